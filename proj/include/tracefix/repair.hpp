#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "tracefix/crs.hpp"

namespace tracefix {

using Tokens = std::vector<std::string>;

/// NFC-normalises, then splits on Unicode whitespace. Punctuation stays
/// attached to its word.
Tokens tokenize(std::string_view text);

/// (m/L) * (1 - |len(x) - len(y)| / (2L)), with m the number of equal
/// tokens at the same position and L the longer length. 1 for two empty
/// sequences.
double minimality_lexical(const Tokens& x, const Tokens& y);

/// Token-level Levenshtein distance (unit costs).
std::size_t levenshtein_tokens(const Tokens& x, const Tokens& y);

/// 1 - levenshtein / L; 1 for two empty sequences.
double minimality_edit(const Tokens& x, const Tokens& y);

struct MinimalityScore {
  double lexical = 1.0;
  double edit = 1.0;
  std::size_t tokens_original = 0;
  std::size_t tokens_repair = 0;

  bool operator==(const MinimalityScore&) const = default;
};

MinimalityScore score_minimality(std::string_view original, std::string_view repair);

enum class MinimalityMetric { lexical, edit };

std::string_view to_string(MinimalityMetric metric);
std::optional<MinimalityMetric> parse_minimality_metric(std::string_view text);

struct SelectedRepair {
  std::size_t intervention_index = 0;
  Proposal proposal;
  MinimalityScore minimality;
};

/// Argmax of `metric` (after `transform`) over the successful interventions,
/// measured against `original_payload`. Ties go to the higher other metric,
/// then to the lower sample_index.
std::optional<SelectedRepair> select_repair(const StepScore& score, std::string_view original_payload,
                                            MinimalityMetric metric,
                                            const std::function<double(double)>& transform = {});

struct ContrastivePair {
  std::string trace_id;
  std::size_t step_index = 0;
  std::string wrong;
  std::string repaired;
  MinimalityScore minimality;
  std::optional<double> consensus;
  VerdictMode verifier_mode = VerdictMode::deterministic;

  bool operator==(const ContrastivePair&) const = default;
};

nlohmann::ordered_json pair_to_json(const ContrastivePair& pair);
ContrastivePair pair_from_json(const nlohmann::json& doc);

/// Line-delimited pair dataset. Records already in the file are loaded at
/// construction, so appends are idempotent per (trace_id, step_index,
/// repaired) across runs. Thread-safe; each record is written with a single
/// write and flushed.
class PairWriter {
 public:
  explicit PairWriter(std::filesystem::path path);

  /// False when an identical key was already stored.
  bool append(const ContrastivePair& pair);

  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::set<std::tuple<std::string, std::size_t, std::string>> keys_;
  std::ofstream out_;
};

std::vector<ContrastivePair> read_pairs(const std::filesystem::path& path);

/// Builds the pair for a successful intervention and appends it. Throws
/// PreconditionError if the intervention's verdict is not a success.
ContrastivePair emit_pair(const Trace& trace, const Intervention& repair, const MinimalityScore& minimality,
                          std::optional<double> consensus, PairWriter& writer);

}  // namespace tracefix
