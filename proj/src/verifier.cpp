#include "tracefix/verifier.hpp"

#include <cctype>
#include <cmath>

#include "tracefix/expression.hpp"
#include "text_util.hpp"

namespace tracefix {

namespace {

Verdict numeric_verdict(std::string_view answer, const TaskSpec& task) {
  if (!task.gold_answer) throw ConfigError("numeric verifier requires a gold answer");
  auto gold = extract_number(*task.gold_answer);
  if (!gold) throw ConfigError("gold answer has no numeric value: " + *task.gold_answer);
  auto value = extract_number(answer);
  if (!value) return {false, "no numeric value in answer", VerdictMode::deterministic};
  const double diff = std::fabs(*value - *gold);
  const bool ok = diff <= task.abs_tolerance() || diff <= task.rel_tolerance() * std::fabs(*gold);
  std::string detail = "answer " + detail::format_double(*value) + " vs gold " + detail::format_double(*gold);
  return {ok, std::move(detail), VerdictMode::deterministic};
}

Verdict program_verdict(std::string_view answer, const TaskSpec& task, const Sandbox& sandbox,
                        const SandboxLimits& limits) {
  return sandbox.run(std::string(answer), task.tests(), limits);
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

Verdict parse_grader_reply(std::string_view reply) {
  for (std::size_t i = 0; i < reply.size(); ++i) {
    if (i > 0 && is_word_char(reply[i - 1])) continue;
    for (std::string_view token : {std::string_view("INCORRECT"), std::string_view("CORRECT")}) {
      if (reply.substr(i, token.size()) != token) continue;
      const std::size_t end = i + token.size();
      if (end < reply.size() && is_word_char(reply[end])) continue;
      return {token == "CORRECT", std::string(detail::trim(reply)), VerdictMode::predictive};
    }
  }
  return {false, "grader-unparseable", VerdictMode::predictive};
}

Verdict predict_outcome(const Trace& trace, const TaskSpec& task, ModelGateway& gateway,
                        const GraderSettings& settings) {
  auto answer = final_answer_of(trace);
  const auto prompt = settings.prompts->get("grader").render({
      {"problem_statement", task.problem_statement},
      {"gold_answer", task.gold_answer.value_or("(not provided)")},
      {"final_answer", answer.value_or("(no final answer)")},
  });
  return parse_grader_reply(gateway.complete(make_request(prompt, settings.model, settings.temperature)));
}

Verdict verify(std::string_view answer, const TaskSpec& task, ModelGateway* gateway, const VerifierOptions& options) {
  switch (task.verifier_kind) {
    case VerifierKind::numeric:
      return numeric_verdict(answer, task);
    case VerifierKind::program_tests:
      return program_verdict(answer, task, Sandbox(options.sandbox), options.limits);
    case VerifierKind::predictive: {
      if (!gateway) throw ConfigError("predictive verifier requires a model gateway");
      Trace single;
      single.task = task;
      single.steps.push_back({0, StepType::final_answer, std::string(answer), {}, {}});
      return predict_outcome(single, task, *gateway, options.grader);
    }
  }
  throw ConfigError("unknown verifier kind");
}

Verifier::Verifier(ModelGateway* gateway, VerifierOptions options)
    : gateway_(gateway), options_(std::move(options)), sandbox_(std::make_shared<Sandbox>(options_.sandbox)) {}

Verdict Verifier::check_answer(std::string_view answer, const TaskSpec& task) const {
  switch (task.verifier_kind) {
    case VerifierKind::numeric:
      return numeric_verdict(answer, task);
    case VerifierKind::program_tests:
      return program_verdict(answer, task, *sandbox_, options_.limits);
    case VerifierKind::predictive:
      return verify(answer, task, gateway_, options_);
  }
  throw ConfigError("unknown verifier kind");
}

Verdict Verifier::operator()(const Trace& trace) const {
  if (trace.task.verifier_kind == VerifierKind::predictive) {
    if (!gateway_) throw ConfigError("predictive verifier requires a model gateway");
    return predict_outcome(trace, trace.task, *gateway_, options_.grader);
  }
  auto answer = final_answer_of(trace);
  if (!answer) return {false, "trace has no final answer", VerdictMode::deterministic};
  return check_answer(*answer, trace.task);
}

}  // namespace tracefix
