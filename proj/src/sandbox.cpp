#include "tracefix/sandbox.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace tracefix {

namespace fs = std::filesystem;

namespace {

// Loads the solution, then runs each assertion in the same namespace and
// reports the first one that fails.
constexpr const char* kRunner = R"PY(import json
import sys

namespace = {"__name__": "solution"}
with open("solution.py", encoding="utf-8") as handle:
    source = handle.read()
try:
    exec(compile(source, "solution.py", "exec"), namespace)
except BaseException as exc:
    sys.stderr.write("program error: %s: %s\n" % (type(exc).__name__, exc))
    sys.exit(1)
with open("tests.json", encoding="utf-8") as handle:
    tests = json.load(handle)
for test in tests:
    try:
        exec(compile(test, "<test>", "exec"), namespace)
    except AssertionError:
        sys.stderr.write("failed assertion: %s\n" % test)
        sys.exit(1)
    except BaseException as exc:
        sys.stderr.write("error in test: %s: %s: %s\n" % (test, type(exc).__name__, exc))
        sys.exit(1)
)PY";

std::optional<std::string> find_executable(const std::string& name) {
  if (name.empty()) return std::nullopt;
  if (name.find('/') != std::string::npos)
    return ::access(name.c_str(), X_OK) == 0 ? std::optional<std::string>(name) : std::nullopt;
  const char* path = std::getenv("PATH");
  std::stringstream dirs(path ? path : "/usr/bin:/bin");
  std::string dir;
  while (std::getline(dirs, dir, ':')) {
    if (dir.empty()) continue;
    std::string candidate = dir + "/" + name;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate;
  }
  return std::nullopt;
}

class WorkDir {
 public:
  explicit WorkDir(const fs::path& root) {
    std::string pattern = (root / "tracefix-sbx-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr)
      throw SandboxUnavailable("cannot create sandbox directory under " + root.string());
    path_ = pattern;
  }
  ~WorkDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  WorkDir(const WorkDir&) = delete;
  WorkDir& operator=(const WorkDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw SandboxUnavailable("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string summarize_stderr(const std::string& err) {
  std::istringstream lines(err);
  std::string line;
  while (std::getline(lines, line))
    if (line.rfind("failed assertion:", 0) == 0 || line.rfind("error in test:", 0) == 0 ||
        line.rfind("program error:", 0) == 0)
      return line;
  std::string trimmed = err.substr(0, 2000);
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back()))) trimmed.pop_back();
  return trimmed.empty() ? "non-zero exit" : trimmed;
}

}  // namespace

Sandbox::Sandbox(SandboxConfig config) : config_(std::move(config)) {
  if (config_.workers == 0) config_.workers = 1;
}

Verdict Sandbox::run(const std::string& program, const std::vector<std::string>& tests,
                     const SandboxLimits& limits) const {
  if (limits.wall_time.count() <= 0 || limits.memory_bytes == 0)
    throw ConfigError("sandbox limits must be positive");

  std::vector<std::string> argv;
  WorkDir dir(config_.work_root);
  if (config_.backend == "subprocess") {
    auto interpreter = find_executable(config_.interpreter);
    if (!interpreter) throw SandboxUnavailable("interpreter not found: " + config_.interpreter);
    argv = {*interpreter, "run.py"};
  } else if (config_.backend == "container") {
    auto runtime = find_executable(config_.container_runtime);
    if (!runtime) throw SandboxUnavailable("container runtime not found: " + config_.container_runtime);
    argv = {*runtime, "run", "--rm", "--network", "none", "--memory", std::to_string(limits.memory_bytes),
            "-v", dir.path().string() + ":/sandbox", "-w", "/sandbox", config_.container_image,
            config_.interpreter, "run.py"};
  } else {
    throw ConfigError("unknown sandbox backend: " + config_.backend);
  }

  write_file(dir.path() / "solution.py", program);
  write_file(dir.path() / "tests.json", nlohmann::json(tests).dump());
  write_file(dir.path() / "run.py", kRunner);

  {
    std::unique_lock lock(mutex_);
    slot_freed_.wait(lock, [&] { return in_flight_ < config_.workers; });
    ++in_flight_;
  }
  struct SlotGuard {
    const Sandbox* self;
    ~SlotGuard() {
      {
        std::lock_guard lock(self->mutex_);
        --self->in_flight_;
      }
      self->slot_freed_.notify_one();
    }
  } guard{this};

  std::vector<char*> cargv;
  for (auto& a : argv) cargv.push_back(a.data());
  cargv.push_back(nullptr);
  const std::string workdir = dir.path().string();
  const std::string out_path = (dir.path() / "stdout.txt").string();
  const std::string err_path = (dir.path() / "stderr.txt").string();
  const bool apply_rlimits = config_.backend == "subprocess";
  const rlim_t cpu_seconds = static_cast<rlim_t>(limits.wall_time.count() / 1000 + 1);

  const pid_t pid = ::fork();
  if (pid < 0) throw SandboxUnavailable("fork failed");
  if (pid == 0) {
    ::setpgid(0, 0);
    if (::chdir(workdir.c_str()) != 0) ::_exit(126);
    int in = ::open("/dev/null", O_RDONLY);
    int out = ::open(out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    int err = ::open(err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    if (in < 0 || out < 0 || err < 0) ::_exit(126);
    ::dup2(in, 0);
    ::dup2(out, 1);
    ::dup2(err, 2);
    if (apply_rlimits) {
      rlimit mem{static_cast<rlim_t>(limits.memory_bytes), static_cast<rlim_t>(limits.memory_bytes)};
      ::setrlimit(RLIMIT_AS, &mem);
      rlimit cpu{cpu_seconds, cpu_seconds};
      ::setrlimit(RLIMIT_CPU, &cpu);
      rlimit fsize{64u << 20, 64u << 20};
      ::setrlimit(RLIMIT_FSIZE, &fsize);
    }
    ::execv(cargv[0], cargv.data());
    ::_exit(127);
  }

  const auto deadline = std::chrono::steady_clock::now() + limits.wall_time;
  int status = 0;
  bool timed_out = false;
  auto pause = std::chrono::microseconds(200);
  while (true) {
    pid_t done = ::waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      timed_out = true;
      break;
    }
    std::this_thread::sleep_for(pause);
    if (pause < std::chrono::milliseconds(10)) pause *= 2;
  }

  if (timed_out) return {false, "timeout", VerdictMode::deterministic};
  if (WIFEXITED(status) && WEXITSTATUS(status) == 127)
    throw SandboxUnavailable("could not execute " + argv.front());
  if (WIFEXITED(status) && WEXITSTATUS(status) == 0) return {true, "all tests passed", VerdictMode::deterministic};
  if (WIFSIGNALED(status)) {
    const int sig = WTERMSIG(status);
    if (sig == SIGXCPU || sig == SIGKILL) return {false, "timeout", VerdictMode::deterministic};
    return {false, "terminated by signal " + std::to_string(sig), VerdictMode::deterministic};
  }
  return {false, summarize_stderr(read_file(err_path)), VerdictMode::deterministic};
}

Verdict run_sandboxed_tests(const std::string& program, const std::vector<std::string>& tests,
                            const SandboxLimits& limits, const SandboxConfig& config) {
  return Sandbox(config).run(program, tests, limits);
}

}  // namespace tracefix
