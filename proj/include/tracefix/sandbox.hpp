#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "tracefix/error.hpp"
#include "tracefix/verdict.hpp"

namespace tracefix {

class SandboxUnavailable : public Error {
 public:
  using Error::Error;
};

struct SandboxLimits {
  std::chrono::milliseconds wall_time{10'000};
  std::size_t memory_bytes = std::size_t{1} << 30;
};

/// `backend` is "subprocess" (fork/exec with rlimits, private working
/// directory) or "container" (`container_runtime run` with the working
/// directory bind-mounted, networking disabled).
struct SandboxConfig {
  std::string backend = "subprocess";
  std::string interpreter = "python3";
  std::string container_runtime = "docker";
  std::string container_image = "python:3.11-slim";
  std::size_t workers = 4;
  std::filesystem::path work_root = std::filesystem::temp_directory_path();
};

/// Runs programs against assertion lists with at most `workers` runs in
/// flight. Each run gets a fresh directory under `work_root` that is removed
/// afterwards.
class Sandbox {
 public:
  explicit Sandbox(SandboxConfig config = {});

  Verdict run(const std::string& program, const std::vector<std::string>& tests,
              const SandboxLimits& limits) const;

  const SandboxConfig& config() const { return config_; }

 private:
  SandboxConfig config_;
  mutable std::mutex mutex_;
  mutable std::condition_variable slot_freed_;
  mutable std::size_t in_flight_ = 0;
};

/// Success iff the program and every assertion run cleanly within limits.
/// Timeouts are failed verdicts with detail "timeout". Throws
/// SandboxUnavailable when the interpreter or runtime cannot be found.
Verdict run_sandboxed_tests(const std::string& program, const std::vector<std::string>& tests,
                            const SandboxLimits& limits, const SandboxConfig& config = {});

}  // namespace tracefix
