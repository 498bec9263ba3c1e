#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tracefix/crs.hpp"
#include "tracefix/gateway.hpp"
#include "tracefix/metrics.hpp"
#include "tracefix/proposal.hpp"
#include "tracefix/repair.hpp"
#include "tracefix/sandbox.hpp"
#include "tracefix/synthetic.hpp"

namespace tracefix {

struct RunConfig {
  /// Corpus directory. When empty, a synthetic suite is generated from
  /// `synthetic` (seeded by `seed`) into <output>/corpus.
  std::filesystem::path corpus;
  SyntheticSpec synthetic;
  /// Fault records feeding the rule mutator; defaults to
  /// <corpus>/faults.jsonl when that file exists.
  std::filesystem::path faults;
  std::string benchmark;

  /// Any of direct, self_refine, self_reflection, causal_repair.
  std::vector<std::string> methods = {std::string(kCausalRepairMethod)};
  bool emit_pairs = true;

  std::size_t k = 3;
  bool early_break = true;
  bool stop_after_first_causal_step = false;
  std::size_t evaluation_cap = 150;
  MinimalityMetric metric = MinimalityMetric::lexical;
  PromptVariant prompt_variant = PromptVariant::with_gold;
  /// "rule_mutator" or "gateway".
  std::string proposer = "rule_mutator";

  double tau_c = 0.5;
  bool force_consensus = false;
  /// Ask the attribution prompt to flag steps, for CRS precision.
  bool attribution_flags = false;
  std::optional<double> judge_precision;
  std::size_t baseline_max_iters = 0;  // 0: per-kind default

  GatewayConfig gateway;
  std::filesystem::path stub_dir;
  SandboxConfig sandbox;
  SandboxLimits limits;
  std::map<std::string, std::filesystem::path> prompt_files;

  std::filesystem::path output = "run";
  std::size_t workers = 4;
  std::uint64_t seed = 7;

  /// Throws ConfigError on invalid combinations.
  void validate() const;
};

/// Reads an INI file with [run], [synthetic], [gateway], [sandbox] and
/// [prompts] sections. Unknown keys are errors.
RunConfig load_run_config(const std::filesystem::path& path);
std::string render_run_config(const RunConfig& config);

struct RunResult {
  std::filesystem::path run_dir;
  std::size_t processed = 0;
  std::size_t resumed = 0;
  std::size_t failures = 0;
  std::size_t pairs_written = 0;
  std::size_t invalid_documents = 0;
  std::vector<RunSummary> summaries;
};

/// Runs every configured method over the corpus and writes, under
/// config.output: config.ini, scores.jsonl, pairs.jsonl, summary.csv,
/// summary.md and run.log. Records are written in corpus order whatever
/// the worker count. Items already recorded (except errors) are skipped,
/// and the summary is recomputed from every record. When `gateway` is
/// null one is built from the config (stub directory, else HTTP endpoint).
RunResult run_pipeline(const RunConfig& config, ModelGateway* gateway = nullptr);

/// Summaries recomputed from a scores.jsonl file.
std::vector<RunSummary> summarize_scores(const std::filesystem::path& scores, const std::string& benchmark,
                                         std::optional<double> judge_precision = std::nullopt);

}  // namespace tracefix
