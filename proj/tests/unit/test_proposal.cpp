#include <fstream>

#include "doctest.h"
#include "support.hpp"
#include "tracefix/proposal.hpp"
#include "tracefix/repair.hpp"

using namespace tracefix;
using namespace tracefix::testing;

namespace {

Trace three_steps() {
  Trace t;
  t.trace_id = "p3";
  t.task.problem_statement = "How many wheels do 6 carts with 12 wheels each have?";
  t.task.gold_answer = "72";
  t.steps.push_back(make_step(0, StepType::reasoning, "Multiply carts by wheels."));
  t.steps.push_back(make_step(1, StepType::tool_call, "calculator\nexpression: 6*13", {0}));
  t.steps.push_back(make_step(2, StepType::final_answer, "78", {1}));
  return t;
}

Trace payload_trace(const std::string& payload) {
  Trace t = three_steps();
  t.steps[1].payload = payload;
  return t;
}

std::vector<std::string> payloads(const std::vector<Proposal>& ps) {
  std::vector<std::string> out;
  for (const auto& p : ps) out.push_back(p.payload);
  return out;
}

}  // namespace

TEST_CASE("prompt templates") {
  const PromptTemplate tpl = PromptTemplate::parse("[system]\nYou check {thing}.\n[user]\n{thing} and {other}\n");
  CHECK(tpl.placeholders() == std::set<std::string>{"thing", "other"});
  const RenderedPrompt r = tpl.render({{"thing", "{other}"}, {"other", "x"}});
  CHECK(r.system == "You check {other}.");
  CHECK(r.user == "{other} and x");
  CHECK_THROWS_AS(tpl.render({{"thing", "a"}}), PromptError);

  const auto names = PromptLibrary::defaults().names();
  for (const char* required : {"intervention", "attribution", "attribution_flag", "critic_b", "critic_c", "grader",
                               "continuation", "refine_generate", "refine_feedback", "refine_refine",
                               "reflect_initial", "reflect_reflect", "reflect_reanswer"})
    CHECK(std::find(names.begin(), names.end(), required) != names.end());
  CHECK_THROWS(PromptLibrary::defaults().get("nope"));
}

TEST_CASE("prompt overrides load from files") {
  TempDir dir("prompts");
  std::ofstream(dir / "grader.txt") << "[system]\nS\n[user]\nGrade {final_answer} against {gold_answer}.\n";
  PromptLibrary lib;
  lib.load_file("grader", dir / "grader.txt");
  CHECK(lib.get("grader").render({{"final_answer", "1"}, {"gold_answer", "2"}}).user == "Grade 1 against 2.");
  CHECK(PromptLibrary::defaults().get("grader").user() != lib.get("grader").user());
}

TEST_CASE("intervention prompt variants") {
  const Trace t = three_steps();
  const std::string with_gold = render_intervention_prompt(t, 1, "answer 78 vs gold 72", PromptVariant::with_gold).text();
  CHECK(with_gold.find("FOR REFERENCE ONLY") != std::string::npos);
  CHECK(with_gold.find("Step 0 (reasoning): Multiply carts by wheels.") != std::string::npos);
  CHECK(with_gold.find("Current step (Step 1, Type: tool_call)") != std::string::npos);
  CHECK(with_gold.find("Agent's Incorrect Answer: 78") != std::string::npos);
  CHECK(with_gold.find("answer 78 vs gold 72") != std::string::npos);

  const std::string no_gold = render_intervention_prompt(t, 1, "", PromptVariant::no_gold).text();
  CHECK(no_gold.find("WITHHELD") != std::string::npos);
  CHECK(no_gold.find("72") == std::string::npos);
  CHECK(no_gold.find("Feedback: (none)") != std::string::npos);

  const std::string first = render_intervention_prompt(t, 0, "", PromptVariant::with_gold).text();
  CHECK(first.find("Context from previous steps:\n(none)") != std::string::npos);

  CHECK_THROWS_AS(render_intervention_prompt(t, 2, "", PromptVariant::with_gold), TraceError);
  Trace no_gold_task = t;
  no_gold_task.task.gold_answer.reset();
  CHECK_THROWS_AS(render_intervention_prompt(no_gold_task, 1, "", PromptVariant::with_gold), ConfigError);
  CHECK_NOTHROW(render_intervention_prompt(no_gold_task, 1, "", PromptVariant::no_gold));
}

TEST_CASE("property: prompts are injective in the step index") {
  Trace t = three_steps();
  t.steps.insert(t.steps.begin() + 1, make_step(1, StepType::reasoning, "Multiply carts by wheels."));
  for (std::size_t i = 0; i < t.size(); ++i) t.steps[i].id = i;
  std::set<std::string> current_lines;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    const std::string text = render_intervention_prompt(t, i, "", PromptVariant::with_gold).text();
    const auto at = text.find("Current step (Step ");
    REQUIRE(at != std::string::npos);
    current_lines.insert(text.substr(at, text.find('\n', at) - at));
  }
  CHECK(current_lines.size() == t.size() - 1);
}

TEST_CASE("attribution prompt") {
  const Trace t = three_steps();
  const std::string text = render_attribution_prompt(t, 1, "answer 78 vs gold 72").text();
  CHECK(text.find("Environment feedback at the point of failure: answer 78 vs gold 72") != std::string::npos);
  Trace no_gold = t;
  no_gold.task.gold_answer.reset();
  CHECK_THROWS(render_attribution_prompt(no_gold, 1, "x"));
}

TEST_CASE("correction replies") {
  CHECK(parse_correction_reply("Here:\n```\ncalculator\nexpression: 6*12\n```\nthanks") ==
        "calculator\nexpression: 6*12");
  CHECK(parse_correction_reply("```python\nx = 1\n```\n```\ny\n```") == "x = 1");
  CHECK(parse_correction_reply("  plain reply \n") == "plain reply");
}

TEST_CASE("generate_proposals with scripted replies") {
  const Trace t = three_steps();
  ScriptedGateway gw;
  for (const char* r : {"```\na\n```", "```\nb\n```", "```\nc\n```"}) gw.enqueue(r);
  const ProposalBatch batch = generate_proposals(t, 1, 3, gw, PromptVariant::with_gold);
  REQUIRE(batch.proposals.size() == 3);
  CHECK(batch.shortfall.empty());
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(batch.proposals[k].sample_index == k);
    CHECK(batch.proposals[k].provider == ProposalProvider::gateway);
    CHECK(batch.proposals[k].id() == "s1-k" + std::to_string(k));
  }
  CHECK(payloads(batch.proposals) == std::vector<std::string>{"a", "b", "c"});
  const auto requests = gw.requests();
  REQUIRE(requests.size() == 3);
  CHECK(requests[0].sample_index == 0);
  CHECK(requests[2].sample_index == 2);
  CHECK(requests[0].temperature == doctest::Approx(0.7));
}

TEST_CASE("generate_proposals degrades on gateway failures") {
  const Trace t = three_steps();
  ScriptedGateway gw;
  gw.enqueue("```\na\n```");
  gw.enqueue_failure("exhausted after retries");
  gw.enqueue("```\nc\n```");
  const ProposalBatch batch = generate_proposals(t, 1, 3, gw, PromptVariant::with_gold);
  CHECK(batch.proposals.size() == 2);
  CHECK(batch.requested == 3);
  REQUIRE(batch.shortfall.size() == 1);
  CHECK(batch.shortfall[0].find("exhausted") != std::string::npos);
  CHECK(batch.proposals[1].sample_index == 2);

  ScriptedGateway one;
  one.enqueue("calculator\nexpression: 6*12");
  const auto single = generate_proposals(t, 1, 1, one, PromptVariant::no_gold);
  REQUIRE(single.proposals.size() == 1);
  CHECK(single.proposals[0].payload == "calculator\nexpression: 6*12");
  CHECK(single.proposals[0].prompt_variant == PromptVariant::no_gold);
}

TEST_CASE("generate_proposals is deterministic and offline under a keyed stub") {
  const Trace t = three_steps();
  auto run = [&] {
    ScriptedGateway gw;
    gw.set_responder([](const ChatRequest& r) -> std::optional<std::string> {
      return "```\nsample " + std::to_string(r.sample_index) + " " + request_key(r).substr(0, 8) + "\n```";
    });
    return payloads(generate_proposals(t, 1, 3, gw, PromptVariant::with_gold).proposals);
  };
  CHECK(run() == run());
}

TEST_CASE("numeric literals skip references and identifiers") {
  const auto lits = find_numeric_literals("x2 = #3 + 4.5 * 10 - v1.2");
  REQUIRE(lits.size() == 2);
  CHECK(lits[0].text == "4.5");
  CHECK(lits[1].text == "10");
  CHECK(find_numeric_literals("no digits").empty());
}

TEST_CASE("mutate_numeric schedule") {
  const Trace t = payload_trace("compute 6*13");
  const auto hinted = mutate_numeric(t, 1, 3, NumericHint{1, "12"});
  REQUIRE_FALSE(hinted.empty());
  CHECK(hinted[0].payload == "compute 6*12");
  CHECK(hinted[0].provider == ProposalProvider::rule_mutator);

  CHECK(mutate_numeric(payload_trace("no digits"), 1, 3).empty());

  const auto x7 = mutate_numeric(payload_trace("x = 7"), 1, 3);
  CHECK(payloads(x7) == std::vector<std::string>{"x = 8", "x = 6", "x = 70"});

  // Negative results and leading-zero swaps are skipped.
  const auto zero = mutate_numeric(payload_trace("n = 0"), 1, 5);
  CHECK(payloads(zero) == std::vector<std::string>{"n = 1"});
  const auto swap = mutate_numeric(payload_trace("n = 10"), 1, 5);
  CHECK(payloads(swap) == std::vector<std::string>{"n = 11", "n = 9", "n = 100"});
  const auto two = mutate_numeric(payload_trace("a 12 b 3"), 1, 10);
  CHECK(payloads(two) ==
        std::vector<std::string>{"a 13 b 3", "a 12 b 4", "a 11 b 3", "a 12 b 2", "a 120 b 3", "a 12 b 30", "a 21 b 3"});
}

TEST_CASE("numeric hints from true payloads") {
  const auto hint = numeric_hint_for("calculator\nexpression: 6 * 13", "calculator\nexpression: 6 * 12");
  REQUIRE(hint.has_value());
  CHECK(hint->literal_index == 1);
  CHECK(hint->value == "12");
  CHECK_FALSE(numeric_hint_for("6 * 13", "6 + 13").has_value());
  CHECK_FALSE(numeric_hint_for("6 * 13", "7 * 12").has_value());
}

TEST_CASE("rule mutator proposer") {
  const Trace t = payload_trace("calculator\nexpression: 6 * 13 - 2");
  RuleMutatorProposer numeric({{"p3", RepairHint{1, "calculator\nexpression: 6 * 12 - 2"}}});
  const auto batch = numeric.propose(t, 1, 3, "");
  REQUIRE(batch.proposals.size() == 3);
  CHECK(batch.proposals[0].payload == "calculator\nexpression: 6 * 12 - 2");

  RuleMutatorProposer structural({{"p3", RepairHint{1, "calculator\nexpression: 6 * 13"}}});
  const auto s = structural.propose(t, 1, 3, "");
  REQUIRE_FALSE(s.proposals.empty());
  CHECK(s.proposals[0].payload == "calculator\nexpression: 6 * 13");
  CHECK(s.proposals.size() == 3);

  const auto elsewhere = structural.propose(t, 0, 3, "");
  CHECK(elsewhere.proposals.empty());
  CHECK_FALSE(elsewhere.shortfall.empty());

  RuleMutatorProposer unhinted;
  CHECK(unhinted.propose(t, 1, 2, "").proposals.size() == 2);
}

TEST_CASE("property: mutations are single-token edits") {
  std::mt19937_64 rng(5);
  for (int n = 0; n < 200; ++n) {
    std::string payload = "calc";
    const int literals = 1 + static_cast<int>(rng() % 4);
    for (int l = 0; l < literals; ++l) payload += (l ? " + " : " ") + std::to_string(rng() % 500);
    const Trace t = payload_trace(payload);
    for (const auto& p : mutate_numeric(t, 1, 6)) {
      const Tokens a = tokenize(payload), b = tokenize(p.payload);
      REQUIRE(a.size() == b.size());
      const double L = static_cast<double>(a.size());
      CHECK(minimality_lexical(a, b) >= (L - 1) / L - 1e-12);
      CHECK(levenshtein_tokens(a, b) == 1);
    }
  }
}
