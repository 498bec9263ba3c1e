#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "tracefix/trace.hpp"

namespace tracefix::testing {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("tracefix-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Step make_step(std::size_t id, StepType type, std::string payload, std::vector<std::size_t> deps = {},
                      std::map<std::string, std::string> meta = {}) {
  Step s;
  s.id = id;
  s.type = type;
  s.payload = std::move(payload);
  s.deps = std::move(deps);
  s.meta = std::move(meta);
  return s;
}

/// reasoning, calculator call, observation, final answer read from step 2.
inline Trace calculator_trace(const std::string& expression, const std::string& observation,
                              const std::string& gold, const std::string& id = "calc") {
  Trace t;
  t.trace_id = id;
  t.task.problem_statement = "A box holds some items; how many are there in total?";
  t.task.gold_answer = gold;
  t.task.verifier_kind = VerifierKind::numeric;
  t.steps.push_back(make_step(0, StepType::reasoning, "Multiply the count by the size."));
  t.steps.push_back(make_step(1, StepType::tool_call, "calculator\nexpression: " + expression, {0}));
  t.steps.push_back(make_step(2, StepType::tool_response, observation, {1}));
  t.steps.push_back(make_step(3, StepType::final_answer, observation, {2}, {{"answer_from", "2"}}));
  return t;
}

/// A structurally valid trace of random shape. Payloads include unicode,
/// quotes and newlines to stress serialization.
inline Trace random_trace(std::mt19937_64& rng, std::size_t index) {
  static const std::vector<std::string> fragments = {
      "compute", "6 * 12", "\"quoted\"", "line\nbreak", "ünïcødé", "tab\there", "#1 + 4", "{json: [1,2]}",
      "back\\slash", "émoji 🙂", "   padded   ", "x"};
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  Trace t;
  t.trace_id = "rt-" + std::to_string(index);
  t.task.problem_statement = fragments[pick(fragments.size())] + " problem";
  if (pick(3) != 0) t.task.gold_answer = std::to_string(pick(1000));
  const std::size_t kind = pick(3);
  t.task.verifier_kind = static_cast<VerifierKind>(kind);
  if (t.task.verifier_kind == VerifierKind::program_tests)
    t.task.verifier_config = {{"tests", {"assert f(1) == 2"}}};
  else if (pick(2))
    t.task.verifier_config = {{"abs_tolerance", 0.5}};

  const std::size_t n = 1 + pick(12);
  const bool ends_final = pick(4) != 0;
  for (std::size_t i = 0; i < n; ++i) {
    StepType type = static_cast<StepType>(pick(5));  // every non-final type
    if (ends_final && i + 1 == n) type = StepType::final_answer;
    std::string payload = type == StepType::memory_access && pick(2) ? "" : fragments[pick(fragments.size())];
    std::vector<std::size_t> deps;
    for (std::size_t d = 0; d < i; ++d)
      if (pick(3) == 0) deps.push_back(d);
    std::map<std::string, std::string> meta;
    if (pick(4) == 0) meta["note"] = fragments[pick(fragments.size())];
    t.steps.push_back(make_step(i, type, payload, deps, meta));
  }
  return t;
}

}  // namespace tracefix::testing
