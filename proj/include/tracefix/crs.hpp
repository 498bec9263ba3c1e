#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tracefix/executor.hpp"
#include "tracefix/proposal.hpp"
#include "tracefix/trace.hpp"
#include "tracefix/verdict.hpp"

namespace tracefix {

/// Judges a complete trace. tracefix::Verifier converts to this.
using TraceVerifier = std::function<Verdict(const Trace&)>;

struct Intervention {
  Proposal proposal;
  ReexecutedTrace reexecuted;
  Verdict verdict;
};

struct StepScore {
  std::size_t step_index = 0;
  int crs = 0;
  std::vector<Intervention> successful_interventions;
  std::size_t attempts = 0;
  /// Set when the step was not evaluated (tool_response under a
  /// deterministic executor, budget cap, stop after first causal step).
  std::optional<std::string> skipped;
  /// Proposer shortfall and executor errors, in order of occurrence.
  std::vector<std::string> notes;
  /// Root-cause flag from the attribution prompt, when that pass ran.
  std::optional<bool> attribution_flag;
};

struct TraceScoring {
  std::string trace_id;
  std::vector<StepScore> scores;
  bool exhaustive = false;
  bool budget_truncated = false;
  Verdict initial_verdict;

  /// Indices with crs = 1, ascending.
  std::vector<std::size_t> causal_steps() const;
};

struct ScoringOptions {
  std::size_t k = 3;
  bool early_break = true;
  bool stop_after_first_causal_step = false;
  std::size_t evaluation_cap = 150;
};

/// Evaluates `proposals` in sample_index order: substitute, re-execute,
/// verify. With early_break the first success ends the loop. Executor
/// failures count as failed attempts and are noted.
StepScore compute_crs_for_step(const Trace& trace, std::size_t i, std::vector<Proposal> proposals,
                               StepExecutor& executor, const TraceVerifier& verifier, bool early_break);

/// Scores every non-final step in ascending order, asking the proposer
/// lazily. Throws PreconditionError if `trace` already verifies. When
/// candidate steps x K exceeds the evaluation cap, the latest candidates are
/// skipped and the scoring is flagged.
TraceScoring score_trace(const Trace& trace, Proposer& proposer, StepExecutor& executor,
                         const TraceVerifier& verifier, const ScoringOptions& options = {});

}  // namespace tracefix
