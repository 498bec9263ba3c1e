#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracefix/gateway.hpp"
#include "tracefix/prompts.hpp"
#include "tracefix/trace.hpp"
#include "tracefix/verdict.hpp"

namespace tracefix {

enum class BaselineMethod { direct, self_refine, self_reflection };

std::string_view to_string(BaselineMethod method);
std::optional<BaselineMethod> parse_baseline_method(std::string_view text);

struct Exchange {
  std::string template_name;
  std::string prompt;
  std::string reply;
};

struct RefinementOutcome {
  BaselineMethod method = BaselineMethod::direct;
  std::string initial_solution;
  std::string final_solution;
  /// Answers as handed to the verifier (fenced code for program tasks,
  /// the solution text otherwise).
  std::string initial_answer;
  std::string final_answer;
  /// Feedback (self-refine) or reflection (self-reflection) calls made.
  std::size_t iterations_used = 0;
  std::vector<Exchange> transcript;
  bool truncated = false;
  std::optional<std::string> error;
};

struct BaselineSettings {
  std::string model = "default";
  double temperature = 0.7;
  std::size_t max_iters = 4;
  const PromptLibrary* prompts = &PromptLibrary::defaults();
};

/// 4 refinement cycles for numeric and predictive tasks, 3 for programs.
std::size_t default_max_iters(VerifierKind kind);

/// The verifier-facing answer inside a free-form solution.
std::string extract_answer(std::string_view solution, const TaskSpec& task);

/// Judges an answer for a task; Verifier::check_answer fits.
using AnswerJudge = std::function<Verdict(std::string_view answer, const TaskSpec& task)>;

/// Generate, then up to max_iters rounds of feedback and refinement. A
/// feedback whose last non-empty line is exactly "[STOP]" ends the loop
/// before refining. When `initial_solution` is given the generate call is
/// skipped. Gateway failures end the loop with `truncated` set.
RefinementOutcome self_refine(const TaskSpec& task, ModelGateway& gateway, const BaselineSettings& settings = {},
                              const std::optional<std::string>& initial_solution = std::nullopt);

/// One reflection call and one re-answer call. Throws PreconditionError if
/// the judge accepts the initial solution.
RefinementOutcome self_reflection(const TaskSpec& task, ModelGateway& gateway, const std::string& initial_solution,
                                  const AnswerJudge& judge, const BaselineSettings& settings = {});

/// A single generation call.
RefinementOutcome direct(const TaskSpec& task, ModelGateway& gateway, const BaselineSettings& settings = {});

/// True when a failed initial answer became a passing final answer. Direct
/// never repairs.
bool counts_as_repair(BaselineMethod method, const Verdict& initial, const Verdict& final_verdict);

}  // namespace tracefix
