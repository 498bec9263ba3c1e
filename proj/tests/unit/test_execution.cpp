#include <fstream>

#include "doctest.h"
#include "support.hpp"
#include "tracefix/executor.hpp"
#include "tracefix/synthetic.hpp"
#include "tracefix/verifier.hpp"

using namespace tracefix;
using namespace tracefix::testing;
namespace fs = std::filesystem;

namespace {

TaskSpec numeric_task(const std::string& gold, double abs_tol = 1e-6, double rel_tol = 1e-6) {
  TaskSpec t;
  t.problem_statement = "p";
  t.gold_answer = gold;
  t.verifier_config = {{"abs_tolerance", abs_tol}, {"rel_tolerance", rel_tol}};
  return t;
}

TaskSpec program_task(std::vector<std::string> tests) {
  TaskSpec t;
  t.problem_statement = "write f";
  t.verifier_kind = VerifierKind::program_tests;
  t.verifier_config = {{"tests", tests}};
  return t;
}

std::size_t entries(const fs::path& dir) {
  return static_cast<std::size_t>(std::distance(fs::directory_iterator(dir), fs::directory_iterator()));
}

}  // namespace

TEST_CASE("numeric verify") {
  CHECK(verify("72", numeric_task("72.0"), nullptr).success);
  CHECK_FALSE(verify("71", numeric_task("72"), nullptr).success);
  CHECK(verify("The total is $1,234.", numeric_task("1234"), nullptr).success);
  const Verdict none = verify("unknown", numeric_task("4"), nullptr);
  CHECK_FALSE(none.success);
  CHECK(none.mode == VerdictMode::deterministic);

  TaskSpec no_gold = numeric_task("1");
  no_gold.gold_answer.reset();
  CHECK_THROWS_AS(verify("1", no_gold, nullptr), ConfigError);

  TaskSpec predictive = numeric_task("1");
  predictive.verifier_kind = VerifierKind::predictive;
  CHECK_THROWS_AS(verify("1", predictive, nullptr), ConfigError);
}

TEST_CASE("numeric verify: the tolerance boundary counts as success") {
  // Binary-exact values so the boundary is hit exactly.
  CHECK(verify("1.5", numeric_task("1", 0.5, 0.0), nullptr).success);
  CHECK(verify("0.5", numeric_task("1", 0.5, 0.0), nullptr).success);
  CHECK_FALSE(verify("1.5000001", numeric_task("1", 0.5, 0.0), nullptr).success);
  CHECK_FALSE(verify("0.4999999", numeric_task("1", 0.5, 0.0), nullptr).success);
  CHECK(verify("110", numeric_task("100", 0.0, 0.125), nullptr).success == (10.0 <= 0.125 * 100));
}

TEST_CASE("grader replies") {
  CHECK(parse_grader_reply("VERDICT: CORRECT").success);
  const Verdict wrong = parse_grader_reply("VERDICT: INCORRECT - wrong entity");
  CHECK_FALSE(wrong.success);
  CHECK(wrong.detail.find("wrong entity") != std::string::npos);
  const Verdict maybe = parse_grader_reply("maybe");
  CHECK_FALSE(maybe.success);
  CHECK(maybe.detail == "grader-unparseable");
  CHECK_FALSE(parse_grader_reply("INCORRECTLY phrased").success);
  CHECK(parse_grader_reply("INCORRECTLY phrased").detail == "grader-unparseable");
}

TEST_CASE("predict_outcome through a scripted gateway") {
  ScriptedGateway gw;
  gw.enqueue("VERDICT: CORRECT");
  Trace t = calculator_trace("6*12", "72", "72");
  t.task.verifier_kind = VerifierKind::predictive;
  const Verdict v = predict_outcome(t, t.task, gw);
  CHECK(v.success);
  CHECK(v.mode == VerdictMode::predictive);
  REQUIRE(gw.calls() == 1);
  CHECK(gw.requests()[0].messages.back().content.find("72") != std::string::npos);
}

TEST_CASE("sandboxed tests") {
  const std::string good = "def f(x):\n    return x + 1\n";
  const Verdict ok = run_sandboxed_tests(good, {"assert f(1) == 2", "assert f(2) == 3", "assert f(0) == 1"}, {});
  CHECK(ok.success);

  const std::string off = "def f(x):\n    return x + 2\n";
  const Verdict bad = run_sandboxed_tests(off, {"assert f(1) == 2"}, {});
  CHECK_FALSE(bad.success);
  CHECK(bad.detail.find("assert f(1) == 2") != std::string::npos);

  SandboxLimits short_limit;
  short_limit.wall_time = std::chrono::milliseconds(2000);
  const Verdict loop = run_sandboxed_tests("while True:\n    pass\n", {"assert True"}, short_limit);
  CHECK_FALSE(loop.success);
  CHECK(loop.detail == "timeout");

  SandboxConfig missing;
  missing.interpreter = "definitely-not-an-interpreter";
  CHECK_THROWS_AS(run_sandboxed_tests(good, {"assert True"}, {}, missing), SandboxUnavailable);
}

TEST_CASE("sandbox leaves no files behind and keeps writes inside its directory") {
  TempDir root("sandbox-root");
  TempDir cwd_probe("sandbox-cwd");
  SandboxConfig config;
  config.work_root = root.path();
  const fs::path host_cwd = fs::current_path();
  const auto host_before = entries(host_cwd);

  const std::string writer =
      "import os\n"
      "open('scratch.txt', 'w').write('x')\n"
      "def f(x):\n    return os.path.exists('scratch.txt')\n";
  const Verdict v = run_sandboxed_tests(writer, {"assert f(0)"}, {}, config);
  CHECK(v.success);
  CHECK(entries(root.path()) == 0);
  CHECK_FALSE(fs::exists(host_cwd / "scratch.txt"));
  CHECK(entries(host_cwd) == host_before);
}

TEST_CASE("tool-call payloads") {
  const ToolCall c = parse_tool_call("calculator\npurpose: multiply\nexpression: 6 * 12");
  CHECK(c.tool == "calculator");
  CHECK(c.args.at("expression") == "6 * 12");
  CHECK(c.args.at("purpose") == "multiply");

  const ToolCall block = parse_tool_call("run_tests\nprogram:\ndef f(x):\n    return x\n\n");
  CHECK(block.tool == "run_tests");
  CHECK(block.args.at("program") == "def f(x):\n    return x");
}

TEST_CASE("step references resolve only backwards") {
  const Trace t = calculator_trace("6*12", " 72 ", "72");
  CHECK(resolve_references("#2 + 1", t, 3) == "72 + 1");
  CHECK(resolve_references("a#2", t, 3) == "a#2");
  CHECK_THROWS_AS(resolve_references("#2 + 1", t, 2), ExecutionError);
  CHECK_THROWS_AS(resolve_references("#9", t, 20), ExecutionError);
}

TEST_CASE("reexecute_suffix regenerates observations and answers") {
  const Trace t = calculator_trace("6*12", "72", "78");
  ToolExecutor exec;
  const ReexecutedTrace r = reexecute_suffix(t, substitute_step(t, 1, "calculator\nexpression: 6*13"), exec, "s1-k0");
  REQUIRE_FALSE(r.failed());
  REQUIRE(r.trace.size() == 4);
  CHECK(r.trace.steps[2].payload == "78");
  CHECK(r.trace.steps[3].payload == "78");
  CHECK(r.proposal_id == "s1-k0");
  CHECK(r.step_index == 1);
  CHECK(verify(*final_answer_of(r.trace), t.task, nullptr).success);

  const ReexecutedTrace id = reexecute_suffix(t, substitute_step(t, 1, t.steps[1].payload), exec);
  CHECK(id.trace == t);
}

TEST_CASE("answer_field takes a tool argument as the answer") {
  Trace t = calculator_trace("6*12", "72", "72");
  t.steps[3].meta = {{"answer_from", "1"}, {"answer_field", "expression"}};
  ToolExecutor exec;
  const auto r = reexecute_suffix(t, substitute_step(t, 1, "calculator\nexpression: 7*7"), exec);
  CHECK(r.trace.steps[3].payload == "7*7");
}

TEST_CASE("carried-forward steps and evaluation errors") {
  Trace t = calculator_trace("6*12", "72", "72");
  t.steps[3].meta.clear();
  ToolExecutor exec;
  const auto r = reexecute_suffix(t, substitute_step(t, 1, "calculator\nexpression: 1/0"), exec);
  REQUIRE_FALSE(r.failed());
  CHECK(r.trace.steps[2].payload.rfind("error: division by zero", 0) == 0);
  CHECK(r.trace.steps[3].payload == "72");  // no answer_from: carried forward
}

TEST_CASE("executor failures become placeholder answers") {
  const Trace t = calculator_trace("6*12", "72", "72");
  ToolExecutor exec;
  const auto unknown = reexecute_suffix(t, substitute_step(t, 1, "abacus\nexpression: 1"), exec);
  REQUIRE(unknown.failed());
  CHECK(unknown.error->find("unknown tool") != std::string::npos);
  CHECK(unknown.trace.size() == 3);
  CHECK(unknown.trace.steps.back().type == StepType::final_answer);
  CHECK(unknown.trace.steps.back().meta.count("execution_error") == 1);
  CHECK(validate_trace(unknown.trace).empty());

  const auto dangling = reexecute_suffix(t, substitute_step(t, 1, "calculator\nexpression: #5 + 1"), exec);
  CHECK(dangling.failed());
  CHECK_THROWS_AS(reexecute_suffix(t, Trace{}, exec), TraceError);
}

TEST_CASE("run_tests tool drives program traces") {
  Trace t;
  t.trace_id = "prog";
  t.task = program_task({"assert f(2) == 4"});
  t.steps.push_back(make_step(0, StepType::reasoning, "Double the input."));
  t.steps.push_back(make_step(1, StepType::tool_call, "run_tests\nprogram:\ndef f(x):\n    return x + 2"));
  t.steps.push_back(make_step(2, StepType::tool_response, "passed"));
  t.steps.push_back(
      make_step(3, StepType::final_answer, "def f(x):\n    return x + 2", {}, {{"answer_from", "1"}, {"answer_field", "program"}}));
  ToolExecutor exec;
  const auto r = reexecute_suffix(t, substitute_step(t, 1, "run_tests\nprogram:\ndef f(x):\n    return x * 3"), exec);
  CHECK(r.trace.steps[2].payload.rfind("failed:", 0) == 0);
  CHECK(r.trace.steps[3].payload == "def f(x):\n    return x * 3");
  Verifier verifier;
  CHECK_FALSE(verifier(r.trace).success);
}

TEST_CASE("predictive executor parses a scripted continuation") {
  Trace t = calculator_trace("6*12", "72", "72");
  t.task.verifier_kind = VerifierKind::predictive;
  ScriptedGateway gw;
  gw.enqueue("```json\n[{\"type\": \"reasoning\", \"payload\": \"Recheck.\"},"
             " {\"type\": \"final_answer\", \"payload\": \"78\"}]\n```");
  PredictiveExecutor exec(gw);
  const auto r = reexecute_suffix(t, substitute_step(t, 1, "calculator\nexpression: 6*13"), exec);
  REQUIRE_FALSE(r.failed());
  CHECK(r.trace.size() == 2 + 2);
  CHECK(r.trace.steps[2].deps == std::vector<std::size_t>{1});
  CHECK(r.trace.steps[3].payload == "78");
  CHECK(validate_trace(r.trace).empty());

  CHECK_THROWS_AS(parse_continuation("[{\"type\": \"reasoning\", \"payload\": \"x\"}]", 3), ExecutionError);
  CHECK_THROWS_AS(parse_continuation("not json", 3), ExecutionError);
  CHECK_THROWS_AS(
      parse_continuation("[{\"type\":\"final_answer\",\"payload\":\"1\"},{\"type\":\"final_answer\",\"payload\":\"2\"}]", 0),
      ExecutionError);

  ScriptedGateway silent;  // no replies: the gateway error becomes a failed re-execution
  PredictiveExecutor broken(silent);
  CHECK(reexecute_suffix(t, substitute_step(t, 1, "x"), broken).failed());
}

TEST_CASE("property: verification and re-execution are repeatable") {
  SyntheticSpec spec;
  spec.count = 40;
  const SyntheticSuite suite = generate_synthetic_suite(spec);
  ToolExecutor exec;
  Verifier verifier;
  for (const Trace& t : suite.traces) {
    const Verdict first = verifier(t);
    const auto redo = reexecute_suffix(t, substitute_step(t, 1, t.steps[1].payload), exec);
    for (int rep = 0; rep < 5; ++rep) {
      CHECK(verifier(t) == first);
      CHECK(reexecute_suffix(t, substitute_step(t, 1, t.steps[1].payload), exec).trace == redo.trace);
    }
  }
}

TEST_CASE("property: identity interventions preserve the verdict at every step") {
  SyntheticSpec spec;
  spec.count = 30;
  spec.seed = 99;
  const SyntheticSuite suite = generate_synthetic_suite(spec);
  ToolExecutor exec;
  Verifier verifier;
  for (const Trace& t : suite.traces) {
    const Verdict v = verifier(t);
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
      const auto r = reexecute_suffix(t, substitute_step(t, i, t.steps[i].payload), exec);
      CHECK(verifier(r.trace).success == v.success);
    }
  }
}
