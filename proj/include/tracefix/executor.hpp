#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "tracefix/gateway.hpp"
#include "tracefix/prompts.hpp"
#include "tracefix/sandbox.hpp"
#include "tracefix/trace.hpp"

namespace tracefix {

/// Raised inside executors when the suffix cannot be regenerated (unknown
/// tool, dangling `#N` reference, malformed continuation). reexecute_suffix
/// converts it into a ReexecutedTrace carrying `error`.
class ExecutionError : public Error {
 public:
  using Error::Error;
};

struct ReexecutedTrace {
  Trace trace;
  std::string source_trace_id;
  std::size_t step_index = 0;
  std::string proposal_id;
  std::optional<std::string> error;

  bool failed() const { return error.has_value(); }
};

/// A tool_call payload: the tool name on the first line, then `key: value`
/// argument lines. A key with an empty value opens a block argument that
/// takes every remaining line verbatim (used for programs).
struct ToolCall {
  std::string tool;
  std::map<std::string, std::string> args;
};

ToolCall parse_tool_call(std::string_view payload);

/// Replaces each `#N` with the trimmed payload of steps[N]. References must
/// point strictly before `limit`; anything else throws ExecutionError.
std::string resolve_references(std::string_view text, const Trace& trace, std::size_t limit);

class StepExecutor {
 public:
  virtual ~StepExecutor() = default;

  /// True when regenerated suffixes are pure functions of the prefix.
  virtual bool deterministic() const = 0;

  /// Produces the complete trace: `prefix` followed by regenerated steps.
  /// `original` is the unmodified trace the prefix was cut from.
  virtual Trace continue_trace(const Trace& original, const Trace& prefix) = 0;
};

/// Replays the original suffix against the edited prefix without a model.
///
///   reasoning, llm_response, memory_access, tool_call  carried forward
///   tool_response   recomputed from the most recent tool_call
///   final_answer    recomputed when meta `answer_from` names a step (and
///                   optionally `answer_field` names a tool argument),
///                   otherwise carried forward
///
/// Tools: `calculator` (argument `expression`) and `run_tests` (argument
/// `program`, checked against the task's tests). Evaluation errors become
/// "error: ..." observations rather than failures.
class ToolExecutor : public StepExecutor {
 public:
  explicit ToolExecutor(SandboxConfig sandbox = {}, SandboxLimits limits = {});

  bool deterministic() const override { return true; }
  Trace continue_trace(const Trace& original, const Trace& prefix) override;

  /// The observation a tool_call produces given the steps before it.
  std::string run_tool(const Step& call, const Trace& context) const;

 private:
  std::shared_ptr<Sandbox> sandbox_;
  SandboxLimits limits_;
};

struct PredictiveSettings {
  std::string model = "default";
  double temperature = 0.0;
  const PromptLibrary* prompts = &PromptLibrary::defaults();
};

/// Asks the model for the continuation in one call. The reply must hold a
/// JSON array of {type, payload} objects (fenced or bare) ending in exactly
/// one final_answer.
class PredictiveExecutor : public StepExecutor {
 public:
  explicit PredictiveExecutor(ModelGateway& gateway, PredictiveSettings settings = {});

  bool deterministic() const override { return false; }
  Trace continue_trace(const Trace& original, const Trace& prefix) override;

 private:
  ModelGateway& gateway_;
  PredictiveSettings settings_;
};

/// Parses a continuation reply into steps numbered from `first_id`.
std::vector<Step> parse_continuation(std::string_view reply, std::size_t first_id);

/// Regenerates steps after the intervened (last) step of `prefix`. Executor
/// failures are returned, not thrown: the trace then ends in a placeholder
/// final_answer whose meta records `execution_error`.
ReexecutedTrace reexecute_suffix(const Trace& original, const Trace& prefix, StepExecutor& executor,
                                 std::string proposal_id = {});

}  // namespace tracefix
