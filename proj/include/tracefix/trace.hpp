#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tracefix/error.hpp"

namespace tracefix {

enum class StepType { reasoning, tool_call, tool_response, llm_response, memory_access, final_answer };

std::string_view to_string(StepType type);
std::optional<StepType> parse_step_type(std::string_view text);

enum class VerifierKind { numeric, program_tests, predictive };

std::string_view to_string(VerifierKind kind);
std::optional<VerifierKind> parse_verifier_kind(std::string_view text);

/// The task a trace attempts, plus how its outcome is judged.
///
/// `verifier_config` is a free-form object. Recognised keys:
///   tests            array of assertion strings (program_tests)
///   abs_tolerance    numeric verifier, default 1e-6
///   rel_tolerance    numeric verifier, default 1e-6
struct TaskSpec {
  std::string problem_statement;
  std::optional<std::string> gold_answer;
  VerifierKind verifier_kind = VerifierKind::numeric;
  nlohmann::json verifier_config = nlohmann::json::object();

  std::vector<std::string> tests() const;
  double abs_tolerance() const;
  double rel_tolerance() const;

  bool operator==(const TaskSpec&) const = default;
};

struct Step {
  std::size_t id = 0;
  StepType type = StepType::reasoning;
  std::string payload;
  std::vector<std::size_t> deps;
  std::map<std::string, std::string> meta;

  bool operator==(const Step&) const = default;
};

/// An ordered chain of typed steps. Values are immutable once parsed; every
/// operation below returns a new trace.
struct Trace {
  std::string trace_id;
  TaskSpec task;
  std::vector<Step> steps;

  std::size_t size() const { return steps.size(); }
  bool operator==(const Trace&) const = default;
};

struct Violation {
  std::optional<std::size_t> step;
  std::string rule;
  std::string detail;

  /// "step 3: empty payload", or just the rule for trace-level violations.
  std::string describe() const;
  bool operator==(const Violation&) const = default;
};

/// Parses one trace document. Throws TraceError naming the step and rule
/// for malformed documents and for any invariant violation.
Trace parse_trace(std::string_view document);

/// Canonical serialization: stable field order, two-space indentation.
std::string serialize_trace(const Trace& trace);

nlohmann::ordered_json trace_to_json(const Trace& trace);
Trace trace_from_json(const nlohmann::json& doc);

/// Every broken Trace/Step invariant; empty means valid.
std::vector<Violation> validate_trace(const Trace& trace);

/// The prefix of `trace` through step `index`, with that step's payload
/// replaced. Later steps are dropped; regenerating them is the executor's
/// job. The final step is never substitutable.
Trace substitute_step(const Trace& trace, std::size_t index, std::string payload);

/// Steps [0, count) as "Step i (type): payload" lines; "(none)" when empty.
std::string render_step_context(const Trace& trace, std::size_t count);

/// Payload of the final_answer step, verbatim.
std::optional<std::string> final_answer_of(const Trace& trace);

namespace audit {
// Process-wide call counters used by tests to prove which code paths ran.
std::uint64_t substitutions();
std::uint64_t reexecutions();
void count_reexecution();
}  // namespace audit

}  // namespace tracefix
