#include "tracefix/trace.hpp"

#include <algorithm>
#include <atomic>
#include <set>

namespace tracefix {

namespace {

constexpr std::pair<StepType, std::string_view> kStepTypeNames[] = {
    {StepType::reasoning, "reasoning"},         {StepType::tool_call, "tool_call"},
    {StepType::tool_response, "tool_response"}, {StepType::llm_response, "llm_response"},
    {StepType::memory_access, "memory_access"}, {StepType::final_answer, "final_answer"},
};

constexpr std::pair<VerifierKind, std::string_view> kVerifierKindNames[] = {
    {VerifierKind::numeric, "numeric"},
    {VerifierKind::program_tests, "program_tests"},
    {VerifierKind::predictive, "predictive"},
};

std::atomic<std::uint64_t> g_substitutions{0};
std::atomic<std::uint64_t> g_reexecutions{0};

[[noreturn]] void fail(std::string message, std::optional<std::size_t> step = std::nullopt) {
  throw TraceError(std::move(message), step);
}

const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail("missing field '" + std::string(key) + "' in " + where);
  return *it;
}

std::string require_string(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& value = require(obj, key, where);
  if (!value.is_string()) fail("field '" + std::string(key) + "' in " + where + " must be a string");
  return value.get<std::string>();
}

}  // namespace

std::string_view to_string(StepType type) {
  for (const auto& [t, name] : kStepTypeNames)
    if (t == type) return name;
  return "unknown";
}

std::optional<StepType> parse_step_type(std::string_view text) {
  for (const auto& [t, name] : kStepTypeNames)
    if (name == text) return t;
  return std::nullopt;
}

std::string_view to_string(VerifierKind kind) {
  for (const auto& [k, name] : kVerifierKindNames)
    if (k == kind) return name;
  return "unknown";
}

std::optional<VerifierKind> parse_verifier_kind(std::string_view text) {
  for (const auto& [k, name] : kVerifierKindNames)
    if (name == text) return k;
  return std::nullopt;
}

std::vector<std::string> TaskSpec::tests() const {
  std::vector<std::string> out;
  auto it = verifier_config.find("tests");
  if (it == verifier_config.end() || !it->is_array()) return out;
  for (const auto& test : *it)
    if (test.is_string()) out.push_back(test.get<std::string>());
  return out;
}

double TaskSpec::abs_tolerance() const {
  return verifier_config.is_object() ? verifier_config.value("abs_tolerance", 1e-6) : 1e-6;
}

double TaskSpec::rel_tolerance() const {
  return verifier_config.is_object() ? verifier_config.value("rel_tolerance", 1e-6) : 1e-6;
}

std::string Violation::describe() const {
  std::string out = step ? "step " + std::to_string(*step) + ": " + rule : rule;
  if (!detail.empty()) out += " " + detail;
  return out;
}

nlohmann::ordered_json trace_to_json(const Trace& trace) {
  nlohmann::ordered_json doc;
  doc["trace_id"] = trace.trace_id;
  nlohmann::ordered_json task;
  task["problem_statement"] = trace.task.problem_statement;
  task["gold_answer"] = trace.task.gold_answer ? nlohmann::ordered_json(*trace.task.gold_answer)
                                               : nlohmann::ordered_json(nullptr);
  task["verifier_kind"] = std::string(to_string(trace.task.verifier_kind));
  task["verifier_config"] = nlohmann::ordered_json::parse(trace.task.verifier_config.dump());
  doc["task"] = std::move(task);
  auto steps = nlohmann::ordered_json::array();
  for (const auto& step : trace.steps) {
    nlohmann::ordered_json s;
    s["id"] = step.id;
    s["type"] = std::string(to_string(step.type));
    s["payload"] = step.payload;
    s["deps"] = step.deps;
    s["meta"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : step.meta) s["meta"][k] = v;
    steps.push_back(std::move(s));
  }
  doc["steps"] = std::move(steps);
  return doc;
}

std::string serialize_trace(const Trace& trace) { return trace_to_json(trace).dump(2) + "\n"; }

Trace trace_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) fail("trace document must be an object");
  Trace trace;
  trace.trace_id = require_string(doc, "trace_id", "trace");

  const auto& task = require(doc, "task", "trace");
  if (!task.is_object()) fail("field 'task' must be an object");
  trace.task.problem_statement = require_string(task, "problem_statement", "task");
  if (auto gold = task.find("gold_answer"); gold != task.end() && !gold->is_null()) {
    if (!gold->is_string()) fail("field 'gold_answer' in task must be a string or null");
    trace.task.gold_answer = gold->get<std::string>();
  }
  auto kind_text = require_string(task, "verifier_kind", "task");
  auto kind = parse_verifier_kind(kind_text);
  if (!kind) fail("unknown verifier_kind '" + kind_text + "'");
  trace.task.verifier_kind = *kind;
  if (auto cfg = task.find("verifier_config"); cfg != task.end() && !cfg->is_null()) {
    if (!cfg->is_object()) fail("field 'verifier_config' in task must be an object");
    trace.task.verifier_config = *cfg;
  }

  const auto& steps = require(doc, "steps", "trace");
  if (!steps.is_array()) fail("field 'steps' must be an array");
  for (std::size_t pos = 0; pos < steps.size(); ++pos) {
    const auto& s = steps[pos];
    const std::string where = "step " + std::to_string(pos);
    if (!s.is_object()) fail(where + " must be an object", pos);
    Step step;
    const auto& id = require(s, "id", where);
    if (!id.is_number_unsigned()) fail("non-ordinal id at step " + std::to_string(pos), pos);
    step.id = id.get<std::size_t>();
    auto type_text = require_string(s, "type", where);
    auto type = parse_step_type(type_text);
    if (!type) fail("unknown step type '" + type_text + "' at step " + std::to_string(pos), pos);
    step.type = *type;
    step.payload = require_string(s, "payload", where);
    if (auto deps = s.find("deps"); deps != s.end() && !deps->is_null()) {
      if (!deps->is_array()) fail("deps must be an array at step " + std::to_string(pos), pos);
      for (const auto& d : *deps) {
        if (!d.is_number_unsigned()) fail("non-ordinal dependency at step " + std::to_string(pos), pos);
        step.deps.push_back(d.get<std::size_t>());
      }
    }
    if (auto meta = s.find("meta"); meta != s.end() && !meta->is_null()) {
      if (!meta->is_object()) fail("meta must be an object at step " + std::to_string(pos), pos);
      for (const auto& [k, v] : meta->items())
        step.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    trace.steps.push_back(std::move(step));
  }
  return trace;
}

Trace parse_trace(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    fail(std::string("malformed document: ") + e.what());
  }
  Trace trace = trace_from_json(doc);
  auto violations = validate_trace(trace);
  if (!violations.empty()) {
    const auto& v = violations.front();
    std::string message = v.rule;
    if (v.step) message += " at step " + std::to_string(*v.step);
    if (!v.detail.empty()) message += ": " + v.detail;
    fail(message, v.step);
  }
  return trace;
}

std::vector<Violation> validate_trace(const Trace& trace) {
  std::vector<Violation> out;
  std::set<std::size_t> seen_ids;
  std::optional<std::size_t> first_final;
  const std::size_t n = trace.steps.size();
  const auto final_count = static_cast<std::size_t>(std::count_if(
      trace.steps.begin(), trace.steps.end(), [](const Step& s) { return s.type == StepType::final_answer; }));

  for (std::size_t pos = 0; pos < n; ++pos) {
    const Step& step = trace.steps[pos];
    if (seen_ids.count(step.id)) {
      out.push_back({pos, "duplicate step id", "(" + std::to_string(step.id) + ")"});
    } else if (step.id != pos) {
      out.push_back({pos, "gapped step ids",
                     "(expected " + std::to_string(pos) + ", found " + std::to_string(step.id) + ")"});
    }
    seen_ids.insert(step.id);

    if (step.payload.empty() && step.type != StepType::memory_access)
      out.push_back({pos, "empty payload", ""});

    for (std::size_t dep : step.deps)
      if (dep >= pos) out.push_back({pos, "forward dependency", "(on step " + std::to_string(dep) + ")"});

    if (step.type == StepType::final_answer) {
      if (first_final) {
        out.push_back({pos, "multiple final_answer steps", ""});
      } else {
        first_final = pos;
        // A misplaced answer is only reported on its own; a second answer
        // is the more specific diagnosis.
        if (pos + 1 != n && final_count == 1) out.push_back({pos, "final_answer step is not last", ""});
      }
    }
  }

  if (trace.task.verifier_kind == VerifierKind::program_tests && trace.task.tests().empty())
    out.push_back({std::nullopt, "program_tests verifier requires a non-empty test list", ""});
  return out;
}

Trace substitute_step(const Trace& trace, std::size_t index, std::string payload) {
  const std::size_t n = trace.steps.size();
  if (index >= n) fail("substitution index " + std::to_string(index) + " out of range", index);
  if (index + 1 == n || trace.steps[index].type == StepType::final_answer)
    fail("the final step cannot be substituted", index);

  ++g_substitutions;
  Trace out;
  out.trace_id = trace.trace_id;
  out.task = trace.task;
  out.steps.assign(trace.steps.begin(), trace.steps.begin() + static_cast<std::ptrdiff_t>(index) + 1);
  out.steps.back().payload = std::move(payload);
  return out;
}

std::string render_step_context(const Trace& trace, std::size_t count) {
  count = std::min(count, trace.steps.size());
  if (count == 0) return "(none)";
  std::string out;
  for (std::size_t i = 0; i < count; ++i) {
    const Step& step = trace.steps[i];
    if (i) out += "\n";
    out += "Step " + std::to_string(step.id) + " (" + std::string(to_string(step.type)) + "): " + step.payload;
  }
  return out;
}

std::optional<std::string> final_answer_of(const Trace& trace) {
  for (auto it = trace.steps.rbegin(); it != trace.steps.rend(); ++it)
    if (it->type == StepType::final_answer) return it->payload;
  return std::nullopt;
}

namespace audit {
std::uint64_t substitutions() { return g_substitutions.load(); }
std::uint64_t reexecutions() { return g_reexecutions.load(); }
void count_reexecution() { ++g_reexecutions; }
}  // namespace audit

}  // namespace tracefix
