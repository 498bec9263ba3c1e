#include "tracefix/baselines.hpp"

#include "text_util.hpp"

namespace tracefix {

namespace {

class Session {
 public:
  Session(RefinementOutcome& outcome, ModelGateway& gateway, const BaselineSettings& settings)
      : outcome_(outcome), gateway_(gateway), settings_(settings) {}

  std::string ask(const std::string& name, const std::map<std::string, std::string>& values) {
    const auto prompt = settings_.prompts->get(name).render(values);
    std::string reply = gateway_.complete(make_request(prompt, settings_.model, settings_.temperature));
    outcome_.transcript.push_back({name, prompt.text(), reply});
    return reply;
  }

 private:
  RefinementOutcome& outcome_;
  ModelGateway& gateway_;
  const BaselineSettings& settings_;
};

bool ends_with_stop(std::string_view feedback) {
  auto lines = detail::split_lines(feedback);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    auto line = detail::trim(*it);
    if (!line.empty()) return line == "[STOP]";
  }
  return false;
}

void finish(RefinementOutcome& outcome, const TaskSpec& task) {
  outcome.initial_answer = extract_answer(outcome.initial_solution, task);
  outcome.final_answer = extract_answer(outcome.final_solution, task);
}

}  // namespace

std::string_view to_string(BaselineMethod method) {
  switch (method) {
    case BaselineMethod::direct:
      return "direct";
    case BaselineMethod::self_refine:
      return "self_refine";
    case BaselineMethod::self_reflection:
      return "self_reflection";
  }
  return "direct";
}

std::optional<BaselineMethod> parse_baseline_method(std::string_view text) {
  for (auto m : {BaselineMethod::direct, BaselineMethod::self_refine, BaselineMethod::self_reflection})
    if (to_string(m) == text) return m;
  return std::nullopt;
}

std::size_t default_max_iters(VerifierKind kind) { return kind == VerifierKind::program_tests ? 3 : 4; }

std::string extract_answer(std::string_view solution, const TaskSpec& task) {
  if (task.verifier_kind == VerifierKind::program_tests)
    if (auto code = detail::fenced_block(solution)) return *code;
  return std::string(detail::trim(solution));
}

RefinementOutcome self_refine(const TaskSpec& task, ModelGateway& gateway, const BaselineSettings& settings,
                              const std::optional<std::string>& initial_solution) {
  if (settings.max_iters == 0) throw ConfigError("self-refine needs max_iters >= 1");
  RefinementOutcome outcome;
  outcome.method = BaselineMethod::self_refine;
  Session session(outcome, gateway, settings);
  try {
    outcome.initial_solution =
        initial_solution ? *initial_solution : session.ask("refine_generate", {{"problem", task.problem_statement}});
    outcome.final_solution = outcome.initial_solution;
    while (outcome.iterations_used < settings.max_iters) {
      const std::string feedback = session.ask(
          "refine_feedback", {{"problem", task.problem_statement}, {"solution", outcome.final_solution}});
      ++outcome.iterations_used;
      if (ends_with_stop(feedback)) break;
      outcome.final_solution =
          session.ask("refine_refine", {{"problem", task.problem_statement},
                                        {"solution", outcome.final_solution},
                                        {"feedback", feedback}});
    }
  } catch (const GatewayError& e) {
    outcome.truncated = true;
    outcome.error = e.what();
  }
  finish(outcome, task);
  return outcome;
}

RefinementOutcome self_reflection(const TaskSpec& task, ModelGateway& gateway, const std::string& initial_solution,
                                  const AnswerJudge& judge, const BaselineSettings& settings) {
  RefinementOutcome outcome;
  outcome.method = BaselineMethod::self_reflection;
  outcome.initial_solution = initial_solution;
  outcome.final_solution = initial_solution;
  if (judge(extract_answer(initial_solution, task), task).success)
    throw PreconditionError("self-reflection only runs on an incorrect initial answer");

  Session session(outcome, gateway, settings);
  try {
    const std::string reflection =
        session.ask("reflect_reflect", {{"problem", task.problem_statement}, {"wrong_solution", initial_solution}});
    outcome.iterations_used = 1;
    outcome.final_solution =
        session.ask("reflect_reanswer", {{"problem", task.problem_statement}, {"reflection", reflection}});
  } catch (const GatewayError& e) {
    outcome.truncated = true;
    outcome.error = e.what();
  }
  finish(outcome, task);
  return outcome;
}

RefinementOutcome direct(const TaskSpec& task, ModelGateway& gateway, const BaselineSettings& settings) {
  RefinementOutcome outcome;
  outcome.method = BaselineMethod::direct;
  Session session(outcome, gateway, settings);
  outcome.initial_solution = session.ask("refine_generate", {{"problem", task.problem_statement}});
  outcome.final_solution = outcome.initial_solution;
  finish(outcome, task);
  return outcome;
}

bool counts_as_repair(BaselineMethod method, const Verdict& initial, const Verdict& final_verdict) {
  return method != BaselineMethod::direct && !initial.success && final_verdict.success;
}

}  // namespace tracefix
