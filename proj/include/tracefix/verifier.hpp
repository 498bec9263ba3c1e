#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "tracefix/gateway.hpp"
#include "tracefix/prompts.hpp"
#include "tracefix/sandbox.hpp"
#include "tracefix/trace.hpp"
#include "tracefix/verdict.hpp"

namespace tracefix {

struct GraderSettings {
  std::string model = "default";
  double temperature = 0.0;
  const PromptLibrary* prompts = &PromptLibrary::defaults();
};

struct VerifierOptions {
  SandboxConfig sandbox;
  SandboxLimits limits;
  GraderSettings grader;
};

/// Judges `answer` against the task:
///   numeric        last numeral of answer vs. last numeral of gold, within
///                  abs_tolerance or rel_tolerance (boundary inclusive)
///   program_tests  the answer is the program; runs the task's tests
///   predictive     one grader call through `gateway`
/// Throws ConfigError for a numeric task without gold or a predictive task
/// without a gateway.
Verdict verify(std::string_view answer, const TaskSpec& task, ModelGateway* gateway,
               const VerifierOptions& options = {});

/// Renders the grader prompt for the trace's final answer and parses a
/// CORRECT/INCORRECT token out of the reply.
Verdict predict_outcome(const Trace& trace, const TaskSpec& task, ModelGateway& gateway,
                        const GraderSettings& settings = {});

/// First whole-word CORRECT or INCORRECT wins. Anything else is a failure
/// with detail "grader-unparseable".
Verdict parse_grader_reply(std::string_view reply);

/// Binds a gateway and options so traces can be judged with one call.
/// Program tests share one sandbox worker pool.
class Verifier {
 public:
  explicit Verifier(ModelGateway* gateway = nullptr, VerifierOptions options = {});

  Verdict operator()(const Trace& trace) const;
  Verdict check_answer(std::string_view answer, const TaskSpec& task) const;

  bool deterministic_for(const TaskSpec& task) const { return task.verifier_kind != VerifierKind::predictive; }

 private:
  ModelGateway* gateway_;
  VerifierOptions options_;
  std::shared_ptr<Sandbox> sandbox_;
};

}  // namespace tracefix
