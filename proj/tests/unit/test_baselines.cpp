#include "doctest.h"
#include "support.hpp"
#include "tracefix/baselines.hpp"
#include "tracefix/verifier.hpp"

using namespace tracefix;
using namespace tracefix::testing;

namespace {

TaskSpec numeric_task() {
  TaskSpec t;
  t.problem_statement = "What is 6 times 12?";
  t.gold_answer = "72";
  return t;
}

AnswerJudge judge() {
  static const Verifier verifier;
  return [](std::string_view answer, const TaskSpec& task) { return verifier.check_answer(answer, task); };
}

std::size_t count_template(const RefinementOutcome& o, const std::string& name) {
  return static_cast<std::size_t>(
      std::count_if(o.transcript.begin(), o.transcript.end(), [&](const Exchange& e) { return e.template_name == name; }));
}

}  // namespace

TEST_CASE("self-refine stops on [STOP] in the first feedback") {
  ScriptedGateway gw;
  gw.enqueue("The answer is 72");
  gw.enqueue("Looks right.\n[STOP]\n\n");
  const auto o = self_refine(numeric_task(), gw);
  CHECK(o.iterations_used == 1);
  CHECK(gw.calls() == 2);
  CHECK(o.final_solution == "The answer is 72");
  CHECK(o.final_answer == "The answer is 72");
  CHECK_FALSE(o.truncated);
}

TEST_CASE("self-refine: two feedbacks then STOP") {
  ScriptedGateway gw;
  for (const char* r : {"70", "wrong, recompute", "71", "still off", "72", "fine\n[STOP]"}) gw.enqueue(r);
  const auto o = self_refine(numeric_task(), gw);
  CHECK(o.iterations_used == 3);
  CHECK(gw.calls() == 6);
  CHECK(o.initial_answer == "70");
  CHECK(o.final_answer == "72");
  CHECK(count_template(o, "refine_feedback") == 3);
  CHECK(count_template(o, "refine_refine") == 2);
  const Verifier v;
  CHECK(counts_as_repair(BaselineMethod::self_refine, v.check_answer(o.initial_answer, numeric_task()),
                         v.check_answer(o.final_answer, numeric_task())));
}

TEST_CASE("self-refine respects the iteration cap and STOP must be the last line") {
  ScriptedGateway gw;
  gw.set_responder([](const ChatRequest&) -> std::optional<std::string> { return "[STOP] is not final here\nkeep going"; });
  const auto o = self_refine(numeric_task(), gw);
  CHECK(o.iterations_used == 4);
  CHECK(gw.calls() == 1 + 4 + 4);

  ScriptedGateway gw3;
  gw3.set_responder([](const ChatRequest&) -> std::optional<std::string> { return "again"; });
  BaselineSettings s;
  s.max_iters = default_max_iters(VerifierKind::program_tests);
  CHECK(self_refine(numeric_task(), gw3, s).iterations_used == 3);
  CHECK(default_max_iters(VerifierKind::numeric) == 4);

  s.max_iters = 0;
  CHECK_THROWS_AS(self_refine(numeric_task(), gw3, s), ConfigError);
}

TEST_CASE("self-refine with a given initial solution skips generation") {
  ScriptedGateway gw;
  gw.enqueue("[STOP]");
  const auto o = self_refine(numeric_task(), gw, {}, std::string("78"));
  CHECK(gw.calls() == 1);
  CHECK(o.initial_answer == "78");
  CHECK(o.transcript.front().template_name == "refine_feedback");
}

TEST_CASE("gateway failure truncates the loop") {
  ScriptedGateway gw;
  gw.enqueue("70");
  gw.enqueue("recompute");
  gw.enqueue_failure("outage");
  const auto o = self_refine(numeric_task(), gw);
  CHECK(o.truncated);
  REQUIRE(o.error);
  CHECK(o.error->find("outage") != std::string::npos);
  CHECK(o.iterations_used == 1);
  CHECK(o.final_answer == "70");

  ScriptedGateway gw2;
  gw2.enqueue_failure("outage");
  const auto r = self_reflection(numeric_task(), gw2, "78", judge());
  CHECK(r.truncated);
  CHECK(r.iterations_used == 0);
  CHECK(r.final_answer == "78");
}

TEST_CASE("self-reflection makes exactly two calls and needs a wrong start") {
  ScriptedGateway gw;
  gw.enqueue("I multiplied by 13 instead of 12.");
  gw.enqueue("72");
  const auto o = self_reflection(numeric_task(), gw, "78", judge());
  CHECK(gw.calls() == 2);
  CHECK(o.iterations_used == 1);
  CHECK(o.final_answer == "72");
  CHECK(count_template(o, "reflect_reflect") == 1);
  CHECK(count_template(o, "reflect_reanswer") == 1);
  CHECK(gw.requests()[1].messages.back().content.find("13 instead of 12") != std::string::npos);

  ScriptedGateway unused;
  CHECK_THROWS_AS(self_reflection(numeric_task(), unused, "72", judge()), PreconditionError);
  CHECK(unused.calls() == 0);
}

TEST_CASE("direct is a single call and never a repair") {
  ScriptedGateway gw;
  gw.enqueue("72");
  const auto o = direct(numeric_task(), gw);
  CHECK(gw.calls() == 1);
  CHECK(o.final_answer == "72");
  CHECK(o.iterations_used == 0);
  const Verdict fail{false, "", VerdictMode::deterministic}, pass{true, "", VerdictMode::deterministic};
  CHECK_FALSE(counts_as_repair(BaselineMethod::direct, fail, pass));
  CHECK(counts_as_repair(BaselineMethod::self_reflection, fail, pass));
  CHECK_FALSE(counts_as_repair(BaselineMethod::self_refine, pass, pass));
  CHECK_FALSE(counts_as_repair(BaselineMethod::self_refine, fail, fail));
}

TEST_CASE("program tasks answer with the fenced block") {
  TaskSpec t;
  t.problem_statement = "write f";
  t.verifier_kind = VerifierKind::program_tests;
  CHECK(extract_answer("Here:\n```python\ndef f():\n    return 1\n```\nDone.", t) == "def f():\n    return 1");
  CHECK(extract_answer("no fence", t) == "no fence");
  CHECK(parse_baseline_method("self_reflection") == BaselineMethod::self_reflection);
  CHECK_FALSE(parse_baseline_method("causal"));
}

TEST_CASE("baselines never substitute steps or re-execute traces") {
  const auto subs = audit::substitutions();
  const auto reexec = audit::reexecutions();
  ScriptedGateway gw;
  gw.set_responder([](const ChatRequest&) -> std::optional<std::string> { return "71"; });
  self_refine(numeric_task(), gw);
  self_reflection(numeric_task(), gw, "78", judge());
  direct(numeric_task(), gw);
  CHECK(audit::substitutions() == subs);
  CHECK(audit::reexecutions() == reexec);
}
