#include <algorithm>
#include <cstdio>
#include <numeric>

#include "doctest.h"
#include "support.hpp"
#include "tracefix/crs.hpp"
#include "tracefix/verifier.hpp"

using namespace tracefix;
using namespace tracefix::testing;

namespace {

// A reasoning-only trace; interventions are payloads "fix <i> <k>" and a
// table decides which of them flip the outcome.
Trace reasoning_trace(std::size_t n, const std::string& id = "scripted") {
  Trace t;
  t.trace_id = id;
  t.task.problem_statement = "scripted";
  t.task.gold_answer = "1";
  for (std::size_t i = 0; i + 1 < n; ++i) t.steps.push_back(make_step(i, StepType::reasoning, "step " + std::to_string(i)));
  t.steps.push_back(make_step(n - 1, StepType::final_answer, "0"));
  return t;
}

using Table = std::vector<std::vector<bool>>;  // [step][sample]

TraceVerifier table_verifier(const Table& table) {
  return [&table](const Trace& t) {
    for (const auto& s : t.steps) {
      if (s.payload.rfind("fix ", 0) != 0) continue;
      std::size_t i = 0, k = 0;
      std::sscanf(s.payload.c_str(), "fix %zu %zu", &i, &k);
      return Verdict{table.at(i).at(k), "scripted", VerdictMode::deterministic};
    }
    return Verdict{false, "scripted failure", VerdictMode::deterministic};
  };
}

std::vector<Proposal> pool(std::size_t i, std::size_t k) {
  std::vector<Proposal> out;
  for (std::size_t s = 0; s < k; ++s)
    out.push_back(Proposal{i, "fix " + std::to_string(i) + " " + std::to_string(s), ProposalProvider::rule_mutator, s,
                           PromptVariant::with_gold});
  return out;
}

class TableProposer : public Proposer {
 public:
  ProposalBatch propose(const Trace&, std::size_t i, std::size_t k, std::string_view) override {
    ++calls;
    ProposalBatch b;
    b.requested = k;
    b.proposals = pool(i, k);
    return b;
  }
  std::size_t calls = 0;
};

}  // namespace

TEST_CASE("compute_crs_for_step follows the scripted example") {
  const Trace t = reasoning_trace(4);
  const Table table = {{false, true, true}, {false, false, false}, {false, false, false}};
  ToolExecutor exec;
  const auto verifier = table_verifier(table);

  auto shuffled = pool(0, 3);
  std::reverse(shuffled.begin(), shuffled.end());
  const StepScore early = compute_crs_for_step(t, 0, shuffled, exec, verifier, true);
  CHECK(early.crs == 1);
  CHECK(early.attempts == 2);
  REQUIRE(early.successful_interventions.size() == 1);
  CHECK(early.successful_interventions[0].proposal.sample_index == 1);

  const StepScore full = compute_crs_for_step(t, 0, pool(0, 3), exec, verifier, false);
  CHECK(full.crs == 1);
  CHECK(full.attempts == 3);
  CHECK(full.successful_interventions.size() == 2);

  const StepScore none = compute_crs_for_step(t, 1, pool(1, 3), exec, verifier, true);
  CHECK(none.crs == 0);
  CHECK(none.attempts == 3);
  CHECK(none.successful_interventions.empty());
}

TEST_CASE("executor and verifier failures are failed attempts with notes") {
  const Trace t = calculator_trace("6*12", "72", "78");
  ToolExecutor exec;
  Verifier v;
  const TraceVerifier verifier = [&](const Trace& x) { return v(x); };
  std::vector<Proposal> ps = {
      Proposal{1, "calculator\nexpression: #7", ProposalProvider::gateway, 0, PromptVariant::with_gold},
      Proposal{1, "calculator\nexpression: 6*13", ProposalProvider::gateway, 1, PromptVariant::with_gold}};
  const StepScore s = compute_crs_for_step(t, 1, ps, exec, verifier, true);
  CHECK(s.crs == 1);
  CHECK(s.attempts == 2);
  REQUIRE(s.notes.size() == 1);
  CHECK(s.notes[0].find("s1-k0") != std::string::npos);

  const TraceVerifier throwing = [](const Trace&) -> Verdict { throw ConfigError("grader down"); };
  const StepScore err = compute_crs_for_step(t, 1, ps, exec, throwing, true);
  CHECK(err.crs == 0);
  CHECK(err.attempts == 2);
  CHECK(err.notes.size() == 2);
}

TEST_CASE("score_trace on a faulty calculator trace") {
  // Fault at step 1 (6*13 instead of 6*12); tool_response step 2 is skipped.
  const Trace t = calculator_trace("6*13", "78", "72");
  ToolExecutor exec;
  Verifier v;
  const TraceVerifier verifier = [&](const Trace& x) { return v(x); };
  RuleMutatorProposer proposer({{t.trace_id, RepairHint{1, "calculator\nexpression: 6*12"}}});
  const TraceScoring scoring = score_trace(t, proposer, exec, verifier);
  REQUIRE(scoring.scores.size() == 3);
  CHECK(scoring.causal_steps() == std::vector<std::size_t>{1});
  CHECK(scoring.scores[2].skipped.has_value());
  CHECK(scoring.scores[2].attempts == 0);
  CHECK_FALSE(scoring.initial_verdict.success);
  CHECK_FALSE(scoring.budget_truncated);

  const Trace good = calculator_trace("6*12", "72", "72");
  CHECK_THROWS_AS(score_trace(good, proposer, exec, verifier), PreconditionError);
}

TEST_CASE("score_trace boundaries, caps and early stop") {
  const Table table(12, std::vector<bool>(3, false));
  const auto verifier = table_verifier(table);
  ToolExecutor exec;

  TableProposer p2;
  const auto two = score_trace(reasoning_trace(2), p2, exec, verifier);
  CHECK(two.scores.size() == 1);

  TableProposer capped;
  ScoringOptions opts;
  opts.k = 3;
  opts.evaluation_cap = 10;  // floor(10 / 3) = 3 steps scored of 9
  const auto c = score_trace(reasoning_trace(10), capped, exec, verifier, opts);
  CHECK(c.budget_truncated);
  CHECK(c.scores.size() == 9);
  CHECK(capped.calls == 3);
  for (std::size_t i = 3; i < 9; ++i) CHECK(c.scores[i].skipped == std::optional<std::string>("evaluation cap reached"));

  Table mid(6, std::vector<bool>(3, false));
  mid[1][0] = mid[3][0] = true;
  TableProposer stopper;
  ScoringOptions stop;
  stop.stop_after_first_causal_step = true;
  const auto s = score_trace(reasoning_trace(6), stopper, exec, table_verifier(mid), stop);
  CHECK(s.causal_steps() == std::vector<std::size_t>{1});
  CHECK(s.scores[3].skipped.has_value());
  CHECK_FALSE(s.exhaustive);
}

TEST_CASE("shortfall notes come first") {
  class Short : public Proposer {
   public:
    ProposalBatch propose(const Trace&, std::size_t i, std::size_t k, std::string_view) override {
      ProposalBatch b;
      b.requested = k;
      b.proposals = pool(i, 1);
      b.shortfall = {"sample 1 failed", "sample 2 failed"};
      return b;
    }
  } proposer;
  const Table table(3, std::vector<bool>(3, false));
  ToolExecutor exec;
  const auto s = score_trace(reasoning_trace(3), proposer, exec, table_verifier(table));
  REQUIRE(s.scores[0].notes.size() >= 2);
  CHECK(s.scores[0].notes[0] == "sample 1 failed");
  CHECK(s.scores[0].attempts == 1);
}

TEST_CASE("property: early break equals exhaustive evaluation; K is monotone; order is irrelevant") {
  std::mt19937_64 rng(2024);
  ToolExecutor exec;
  for (int round = 0; round < 200; ++round) {
    const std::size_t n = 2 + rng() % 6;
    const std::size_t k = 1 + rng() % 5;
    Table table(n, std::vector<bool>(k + 2));
    for (auto& row : table)
      for (std::size_t s = 0; s < row.size(); ++s) row[s] = rng() % 4 == 0;
    const Trace t = reasoning_trace(n);
    const auto verifier = table_verifier(table);

    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto early = compute_crs_for_step(t, i, pool(i, k), exec, verifier, true);
      const auto full = compute_crs_for_step(t, i, pool(i, k), exec, verifier, false);
      const bool any = std::any_of(table[i].begin(), table[i].begin() + static_cast<long>(k), [](bool b) { return b; });
      CHECK(early.crs == full.crs);
      CHECK(full.crs == (any ? 1 : 0));
      const auto larger = compute_crs_for_step(t, i, pool(i, k + 2), exec, verifier, true);
      CHECK(larger.crs >= early.crs);
    }

    TableProposer proposer;
    ScoringOptions opts;
    opts.k = k;
    const auto whole = score_trace(t, proposer, exec, verifier, opts);
    std::vector<std::size_t> order(n - 1);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      const auto alone = compute_crs_for_step(t, i, pool(i, k), exec, verifier, true);
      CHECK(alone.crs == whole.scores[i].crs);
      CHECK(alone.attempts == whole.scores[i].attempts);
    }
  }
}
