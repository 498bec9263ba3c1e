#include "tracefix/executor.hpp"

#include <cctype>

#include "json.hpp"
#include "tracefix/expression.hpp"
#include "text_util.hpp"

namespace tracefix {

namespace {

bool is_key(std::string_view s) {
  if (s.empty() || !(std::islower(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '_'))
      return false;
  return true;
}

std::size_t parse_index(const std::string& text, const char* what) {
  std::size_t pos = 0;
  unsigned long long value = 0;
  try {
    value = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size()) throw ExecutionError(std::string("bad ") + what + " '" + text + "'");
  return static_cast<std::size_t>(value);
}

Step placeholder_final(std::size_t id, const std::string& error) {
  Step step;
  step.id = id;
  step.type = StepType::final_answer;
  step.payload = "(execution failed)";
  step.meta["execution_error"] = error;
  return step;
}

}  // namespace

ToolCall parse_tool_call(std::string_view payload) {
  auto lines = detail::split_lines(payload);
  ToolCall call;
  std::size_t i = 0;
  while (i < lines.size() && detail::trim(lines[i]).empty()) ++i;
  if (i == lines.size()) throw ExecutionError("empty tool call");
  call.tool = std::string(detail::trim(lines[i++]));
  std::string* last = nullptr;
  for (; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    auto colon = line.find(':');
    if (colon != std::string::npos && is_key(line.substr(0, colon))) {
      std::string key = line.substr(0, colon);
      std::string_view value = detail::trim(std::string_view(line).substr(colon + 1));
      if (value.empty()) {
        std::string block;
        for (std::size_t j = i + 1; j < lines.size(); ++j) {
          if (j > i + 1) block += '\n';
          block += lines[j];
        }
        while (!block.empty() && block.back() == '\n') block.pop_back();
        call.args[key] = block;
        return call;
      }
      last = &(call.args[key] = std::string(value));
    } else if (last && !detail::trim(line).empty()) {
      *last += '\n';
      *last += line;
    }
  }
  return call;
}

std::string resolve_references(std::string_view text, const Trace& trace, std::size_t limit) {
  std::string out;
  for (std::size_t i = 0; i < text.size();) {
    const bool boundary = i == 0 || !std::isalnum(static_cast<unsigned char>(text[i - 1]));
    if (text[i] == '#' && boundary && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
      std::size_t j = i + 1;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      const std::size_t ref = parse_index(std::string(text.substr(i + 1, j - i - 1)), "reference");
      if (ref >= limit || ref >= trace.steps.size())
        throw ExecutionError("reference #" + std::to_string(ref) + " does not point to an earlier step");
      out += detail::trim(trace.steps[ref].payload);
      i = j;
      continue;
    }
    out.push_back(text[i++]);
  }
  return out;
}

ToolExecutor::ToolExecutor(SandboxConfig sandbox, SandboxLimits limits)
    : sandbox_(std::make_shared<Sandbox>(std::move(sandbox))), limits_(limits) {}

std::string ToolExecutor::run_tool(const Step& call, const Trace& context) const {
  const ToolCall parsed = parse_tool_call(call.payload);
  auto arg = [&](const char* name) -> std::string {
    auto it = parsed.args.find(name);
    if (it == parsed.args.end())
      throw ExecutionError("tool '" + parsed.tool + "' is missing argument '" + name + "'");
    return resolve_references(it->second, context, call.id);
  };

  if (parsed.tool == "calculator") {
    const std::string expression = arg("expression");
    try {
      return format_number(evaluate_expression(expression));
    } catch (const ExpressionError& e) {
      return std::string("error: ") + e.what();
    }
  }
  if (parsed.tool == "run_tests") {
    const Verdict verdict = sandbox_->run(arg("program"), context.task.tests(), limits_);
    return verdict.success ? "passed" : "failed: " + verdict.detail;
  }
  throw ExecutionError("unknown tool '" + parsed.tool + "'");
}

Trace ToolExecutor::continue_trace(const Trace& original, const Trace& prefix) {
  Trace out = prefix;
  for (std::size_t j = prefix.steps.size(); j < original.steps.size(); ++j) {
    Step step = original.steps[j];
    step.id = out.steps.size();
    switch (step.type) {
      case StepType::tool_response: {
        const Step* call = nullptr;
        for (auto it = out.steps.rbegin(); it != out.steps.rend(); ++it)
          if (it->type == StepType::tool_call) {
            call = &*it;
            break;
          }
        if (!call) throw ExecutionError("tool_response at step " + std::to_string(j) + " has no tool_call");
        step.payload = run_tool(*call, out);
        break;
      }
      case StepType::final_answer: {
        auto from = step.meta.find("answer_from");
        if (from == step.meta.end()) break;
        const std::size_t source = parse_index(from->second, "answer_from");
        if (source >= out.steps.size())
          throw ExecutionError("answer_from " + std::to_string(source) + " is not an earlier step");
        auto field = step.meta.find("answer_field");
        step.payload = field == step.meta.end()
                           ? out.steps[source].payload
                           : [&] {
                               auto parsed = parse_tool_call(out.steps[source].payload);
                               auto it = parsed.args.find(field->second);
                               if (it == parsed.args.end())
                                 throw ExecutionError("answer_field '" + field->second + "' not found");
                               return it->second;
                             }();
        break;
      }
      default:
        break;
    }
    out.steps.push_back(std::move(step));
  }
  return out;
}

PredictiveExecutor::PredictiveExecutor(ModelGateway& gateway, PredictiveSettings settings)
    : gateway_(gateway), settings_(std::move(settings)) {}

std::vector<Step> parse_continuation(std::string_view reply, std::size_t first_id) {
  const std::string body = detail::fenced_block(reply).value_or(std::string(reply));
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ExecutionError(std::string("continuation is not valid JSON: ") + e.what());
  }
  if (!doc.is_array() || doc.empty()) throw ExecutionError("continuation must be a non-empty JSON array");

  std::vector<Step> steps;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("type") || !item.contains("payload") || !item["type"].is_string() ||
        !item["payload"].is_string())
      throw ExecutionError("continuation element needs string fields 'type' and 'payload'");
    auto type = parse_step_type(item["type"].get<std::string>());
    if (!type) throw ExecutionError("continuation has unknown step type '" + item["type"].get<std::string>() + "'");
    Step step;
    step.id = first_id + steps.size();
    step.type = *type;
    step.payload = item["payload"].get<std::string>();
    if (step.id > 0) step.deps = {step.id - 1};
    if (step.payload.empty() && step.type != StepType::memory_access)
      throw ExecutionError("continuation step " + std::to_string(step.id) + " has an empty payload");
    if (step.type == StepType::final_answer && steps.size() + 1 != doc.size())
      throw ExecutionError("continuation has a final_answer before its last element");
    steps.push_back(std::move(step));
  }
  if (steps.back().type != StepType::final_answer) throw ExecutionError("continuation does not end in final_answer");
  return steps;
}

Trace PredictiveExecutor::continue_trace(const Trace& /*original*/, const Trace& prefix) {
  const auto prompt = settings_.prompts->get("continuation").render({
      {"problem_statement", prefix.task.problem_statement},
      {"trace_prefix", render_step_context(prefix, prefix.steps.size())},
      {"next_step_id", std::to_string(prefix.steps.size())},
  });
  const std::string reply = gateway_.complete(make_request(prompt, settings_.model, settings_.temperature));
  Trace out = prefix;
  for (auto& step : parse_continuation(reply, prefix.steps.size())) out.steps.push_back(std::move(step));
  return out;
}

ReexecutedTrace reexecute_suffix(const Trace& original, const Trace& prefix, StepExecutor& executor,
                                 std::string proposal_id) {
  if (prefix.steps.empty()) throw TraceError("cannot re-execute from an empty prefix");
  audit::count_reexecution();
  ReexecutedTrace result;
  result.source_trace_id = original.trace_id;
  result.step_index = prefix.steps.size() - 1;
  result.proposal_id = std::move(proposal_id);
  try {
    result.trace = executor.continue_trace(original, prefix);
    if (result.trace.steps.empty() || result.trace.steps.back().type != StepType::final_answer)
      throw ExecutionError("re-executed trace does not end in final_answer");
  } catch (const ExecutionError& e) {
    result.error = e.what();
  } catch (const GatewayError& e) {
    result.error = std::string("gateway: ") + e.what();
  } catch (const SandboxUnavailable& e) {
    result.error = std::string("sandbox: ") + e.what();
  }
  if (result.error) {
    result.trace = prefix;
    result.trace.steps.push_back(placeholder_final(prefix.steps.size(), *result.error));
  }
  return result;
}

}  // namespace tracefix
