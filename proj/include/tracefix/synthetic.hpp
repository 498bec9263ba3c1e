#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tracefix/proposal.hpp"
#include "tracefix/trace.hpp"

namespace tracefix {

enum class FaultKind { wrong_operand, wrong_operator, dropped_constraint, wrong_tool_arg };

std::string_view to_string(FaultKind kind);
std::optional<FaultKind> parse_fault_kind(std::string_view text);

struct FaultRecord {
  std::string trace_id;
  std::size_t injected_step = 0;
  FaultKind fault_kind = FaultKind::wrong_operand;
  std::string true_payload;

  bool operator==(const FaultRecord&) const = default;
  RepairHint hint() const { return {injected_step, true_payload}; }
};

nlohmann::ordered_json fault_to_json(const FaultRecord& record);
FaultRecord fault_from_json(const nlohmann::json& doc);

struct SyntheticSpec {
  std::size_t count = 200;
  std::size_t min_depth = 5;
  std::size_t max_depth = 9;
  /// Relative integer weights; kinds that are absent or zero are never drawn.
  std::map<FaultKind, unsigned> mix = {{FaultKind::wrong_operand, 1},
                                       {FaultKind::wrong_operator, 1},
                                       {FaultKind::dropped_constraint, 1},
                                       {FaultKind::wrong_tool_arg, 1}};
  std::uint64_t seed = 7;
};

/// Parses "wrong_operand=2,wrong_operator=1" style mixes.
std::map<FaultKind, unsigned> parse_fault_mix(std::string_view text);

struct SyntheticSuite {
  std::vector<Trace> traces;
  std::vector<FaultRecord> faults;
};

/// Seeded arithmetic chains (reasoning, calculator tool_call/tool_response
/// pairs, final_answer) of `depth` steps, each with exactly one fault in a
/// tool_call. Depth counts every step, final answer included. Every faulty
/// trace fails the numeric verifier and its true payload, substituted and
/// re-executed, passes. No single-literal edit from the rule mutator's
/// schedule at any other tool_call repairs the trace, so the injected step
/// is the only causal one. Generation retries until all of this holds.
SyntheticSuite generate_synthetic_suite(const SyntheticSpec& spec);

/// Writes <trace_id>.json per trace plus faults.jsonl.
void write_corpus(const std::filesystem::path& directory, const SyntheticSuite& suite);

std::vector<FaultRecord> read_faults(const std::filesystem::path& path);

}  // namespace tracefix
