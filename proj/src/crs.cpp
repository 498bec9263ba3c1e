#include "tracefix/crs.hpp"

#include <algorithm>

namespace tracefix {

std::vector<std::size_t> TraceScoring::causal_steps() const {
  std::vector<std::size_t> out;
  for (const auto& s : scores)
    if (s.crs == 1) out.push_back(s.step_index);
  return out;
}

StepScore compute_crs_for_step(const Trace& trace, std::size_t i, std::vector<Proposal> proposals,
                               StepExecutor& executor, const TraceVerifier& verifier, bool early_break) {
  if (i + 1 >= trace.steps.size())
    throw TraceError("step " + std::to_string(i) + " is not a candidate for intervention", i);

  StepScore score;
  score.step_index = i;
  if (executor.deterministic() && trace.steps[i].type == StepType::tool_response) {
    score.skipped = "tool_response is regenerated by a deterministic executor";
    return score;
  }

  std::stable_sort(proposals.begin(), proposals.end(),
                   [](const Proposal& a, const Proposal& b) { return a.sample_index < b.sample_index; });
  for (auto& proposal : proposals) {
    ++score.attempts;
    const Trace prefix = substitute_step(trace, i, proposal.payload);
    ReexecutedTrace rerun = reexecute_suffix(trace, prefix, executor, proposal.id());
    Verdict verdict;
    if (rerun.failed()) {
      verdict = {false, *rerun.error, executor.deterministic() ? VerdictMode::deterministic : VerdictMode::predictive};
      score.notes.push_back(proposal.id() + ": " + *rerun.error);
    } else {
      try {
        verdict = verifier(rerun.trace);
      } catch (const Error& e) {
        verdict = {false, e.what(), VerdictMode::deterministic};
        score.notes.push_back(proposal.id() + ": verifier error: " + e.what());
      }
    }
    if (verdict.success) {
      score.successful_interventions.push_back({std::move(proposal), std::move(rerun), std::move(verdict)});
      score.crs = 1;
      if (early_break) break;
    }
  }
  return score;
}

TraceScoring score_trace(const Trace& trace, Proposer& proposer, StepExecutor& executor,
                         const TraceVerifier& verifier, const ScoringOptions& options) {
  if (options.k == 0) throw ConfigError("K must be at least 1");
  TraceScoring scoring;
  scoring.trace_id = trace.trace_id;
  scoring.exhaustive = !options.early_break;
  scoring.initial_verdict = verifier(trace);
  if (scoring.initial_verdict.success)
    throw PreconditionError("trace '" + trace.trace_id + "' already succeeds; only failed traces are scored");

  const std::size_t n = trace.steps.size();
  if (n < 2) return scoring;

  auto is_candidate = [&](std::size_t i) {
    return !(executor.deterministic() && trace.steps[i].type == StepType::tool_response);
  };
  std::size_t candidates = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) candidates += is_candidate(i);
  std::size_t step_budget = candidates;
  if (candidates * options.k > options.evaluation_cap) {
    step_budget = options.evaluation_cap / options.k;
    scoring.budget_truncated = true;
  }

  bool found = false;
  std::size_t scored_candidates = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (is_candidate(i)) {
      if (found && options.stop_after_first_causal_step) {
        StepScore skipped;
        skipped.step_index = i;
        skipped.skipped = "scoring stopped after the first causal step";
        scoring.scores.push_back(std::move(skipped));
        continue;
      }
      if (scored_candidates >= step_budget) {
        StepScore skipped;
        skipped.step_index = i;
        skipped.skipped = "evaluation cap reached";
        scoring.scores.push_back(std::move(skipped));
        continue;
      }
      ++scored_candidates;
    }
    std::vector<std::string> shortfall;
    std::vector<Proposal> proposals;
    if (is_candidate(i)) {
      ProposalBatch batch = proposer.propose(trace, i, options.k, scoring.initial_verdict.detail);
      proposals = std::move(batch.proposals);
      if (proposals.size() > options.k) proposals.resize(options.k);
      shortfall = std::move(batch.shortfall);
    }
    StepScore score = compute_crs_for_step(trace, i, std::move(proposals), executor, verifier, options.early_break);
    score.notes.insert(score.notes.begin(), shortfall.begin(), shortfall.end());
    found = found || score.crs == 1;
    scoring.scores.push_back(std::move(score));
  }
  return scoring;
}

}  // namespace tracefix
