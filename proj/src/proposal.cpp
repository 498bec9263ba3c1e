#include "tracefix/proposal.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "tracefix/expression.hpp"
#include "text_util.hpp"

namespace tracefix {

namespace {

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

void check_step(const Trace& trace, std::size_t i) {
  if (i + 1 >= trace.steps.size())
    throw TraceError("step " + std::to_string(i) + " is not a candidate for intervention", i);
}

std::map<std::string, std::string> common_fields(const Trace& trace, std::size_t i) {
  const Step& step = trace.steps[i];
  return {
      {"problem_statement", trace.task.problem_statement},
      {"previous_step_context", render_step_context(trace, i)},
      {"step_id", std::to_string(step.id)},
      {"step_type", std::string(to_string(step.type))},
      {"step_payload", step.payload},
  };
}

std::string replace_literal(std::string_view payload, const NumericLiteral& lit, std::string_view value) {
  std::string out(payload.substr(0, lit.offset));
  out += value;
  out += payload.substr(lit.offset + lit.text.size());
  return out;
}

std::optional<std::string> swap_last_digits(const std::string& text) {
  std::vector<std::size_t> digits;
  for (std::size_t p = 0; p < text.size(); ++p)
    if (is_digit(text[p])) digits.push_back(p);
  if (digits.size() < 2) return std::nullopt;
  std::string out = text;
  std::swap(out[digits[digits.size() - 2]], out[digits.back()]);
  // A leading zero would make a different kind of literal; skip it.
  if (out[0] == '0' && out.size() > 1 && out[1] != '.') return std::nullopt;
  return out;
}

}  // namespace

std::string_view to_string(ProposalProvider provider) {
  return provider == ProposalProvider::gateway ? "gateway" : "rule_mutator";
}

std::string_view to_string(PromptVariant variant) {
  return variant == PromptVariant::with_gold ? "with_gold" : "no_gold";
}

std::string Proposal::id() const { return "s" + std::to_string(step_index) + "-k" + std::to_string(sample_index); }

RenderedPrompt render_intervention_prompt(const Trace& trace, std::size_t i, std::string_view feedback,
                                          PromptVariant variant, const PromptLibrary& prompts) {
  check_step(trace, i);
  std::string gold = "WITHHELD";
  if (variant == PromptVariant::with_gold) {
    if (!trace.task.gold_answer) throw ConfigError("the with_gold prompt variant requires a gold answer");
    gold = *trace.task.gold_answer;
  }
  auto fields = common_fields(trace, i);
  fields["gold_answer"] = gold;
  fields["final_answer"] = final_answer_of(trace).value_or("(none)");
  fields["execution_logs"] = feedback.empty() ? "(none)" : std::string(feedback);
  return prompts.get("intervention").render(fields);
}

RenderedPrompt render_attribution_prompt(const Trace& trace, std::size_t i, std::string_view end_feedback,
                                         const PromptLibrary& prompts) {
  check_step(trace, i);
  if (!trace.task.gold_answer) throw ConfigError("the attribution prompt requires a gold answer");
  auto fields = common_fields(trace, i);
  fields["gold_answer"] = *trace.task.gold_answer;
  fields["end_feedback"] = end_feedback.empty() ? "(none)" : std::string(end_feedback);
  return prompts.get("attribution").render(fields);
}

std::string parse_correction_reply(std::string_view reply) {
  if (auto block = detail::fenced_block(reply)) return std::string(detail::trim(*block));
  return std::string(detail::trim(reply));
}

ProposalBatch generate_proposals(const Trace& trace, std::size_t i, std::size_t k, ModelGateway& gateway,
                                 PromptVariant variant, std::string_view feedback, const ProposalSettings& settings) {
  if (k == 0) throw ConfigError("K must be at least 1");
  const auto prompt = render_intervention_prompt(trace, i, feedback, variant, *settings.prompts);
  ProposalBatch batch;
  batch.requested = k;
  for (std::size_t sample = 0; sample < k; ++sample) {
    try {
      std::string payload =
          parse_correction_reply(gateway.complete(make_request(prompt, settings.model, settings.temperature, sample)));
      if (payload.empty()) {
        batch.shortfall.push_back("sample " + std::to_string(sample) + ": empty reply");
        continue;
      }
      batch.proposals.push_back({i, std::move(payload), ProposalProvider::gateway, sample, variant});
    } catch (const GatewayError& e) {
      batch.shortfall.push_back("sample " + std::to_string(sample) + ": " + e.what());
    }
  }
  return batch;
}

std::vector<NumericLiteral> find_numeric_literals(std::string_view payload) {
  std::vector<NumericLiteral> out;
  std::size_t i = 0;
  while (i < payload.size()) {
    if (!is_digit(payload[i])) {
      ++i;
      continue;
    }
    const bool glued = i > 0 && (is_ident(payload[i - 1]) || payload[i - 1] == '#' || payload[i - 1] == '.');
    std::size_t j = i;
    while (j < payload.size() && is_digit(payload[j])) ++j;
    if (j + 1 < payload.size() && payload[j] == '.' && is_digit(payload[j + 1])) {
      ++j;
      while (j < payload.size() && is_digit(payload[j])) ++j;
    }
    const bool trailing = j < payload.size() && is_ident(payload[j]);
    if (!glued && !trailing) out.push_back({i, std::string(payload.substr(i, j - i))});
    i = j;
  }
  return out;
}

std::vector<Proposal> mutate_numeric(const Trace& trace, std::size_t i, std::size_t k,
                                     const std::optional<NumericHint>& hint) {
  check_step(trace, i);
  const std::string& payload = trace.steps[i].payload;
  const auto literals = find_numeric_literals(payload);
  std::vector<Proposal> out;
  if (literals.empty() || k == 0) return out;

  std::set<std::string> seen{payload};
  auto offer = [&](std::string candidate) {
    if (out.size() >= k || !seen.insert(candidate).second) return;
    out.push_back({i, std::move(candidate), ProposalProvider::rule_mutator, out.size(), PromptVariant::with_gold});
  };

  if (hint && hint->literal_index < literals.size())
    offer(replace_literal(payload, literals[hint->literal_index], hint->value));

  enum class Variant { plus_one, minus_one, times_ten, swap_digits };
  for (Variant variant : {Variant::plus_one, Variant::minus_one, Variant::times_ten, Variant::swap_digits}) {
    for (const auto& lit : literals) {
      if (out.size() >= k) return out;
      std::optional<std::string> value;
      if (variant == Variant::swap_digits) {
        value = swap_last_digits(lit.text);
      } else if (auto number = parse_decimal(lit.text)) {
        Rational v = *number;
        if (variant == Variant::plus_one) v += 1;
        if (variant == Variant::minus_one) v -= 1;
        if (variant == Variant::times_ten) v *= 10;
        if (v >= 0) value = format_number(v);
      }
      if (value && *value != lit.text) offer(replace_literal(payload, lit, *value));
    }
  }
  return out;
}

std::optional<NumericHint> numeric_hint_for(std::string_view faulty, std::string_view truth) {
  const auto a = find_numeric_literals(faulty);
  const auto b = find_numeric_literals(truth);
  if (a.size() != b.size()) return std::nullopt;
  std::optional<std::size_t> differing;
  for (std::size_t n = 0; n < a.size(); ++n) {
    if (a[n].text == b[n].text) continue;
    if (differing) return std::nullopt;
    differing = n;
  }
  if (!differing) return std::nullopt;
  // The non-literal text must agree too, or the edit is not a literal swap.
  if (replace_literal(faulty, a[*differing], b[*differing].text) != truth) return std::nullopt;
  return NumericHint{*differing, b[*differing].text};
}

GatewayProposer::GatewayProposer(ModelGateway& gateway, PromptVariant variant, ProposalSettings settings)
    : gateway_(gateway), variant_(variant), settings_(std::move(settings)) {}

ProposalBatch GatewayProposer::propose(const Trace& trace, std::size_t i, std::size_t k, std::string_view feedback) {
  return generate_proposals(trace, i, k, gateway_, variant_, feedback, settings_);
}

RuleMutatorProposer::RuleMutatorProposer(std::map<std::string, RepairHint> hints) : hints_(std::move(hints)) {}

ProposalBatch RuleMutatorProposer::propose(const Trace& trace, std::size_t i, std::size_t k,
                                           std::string_view /*feedback*/) {
  ProposalBatch batch;
  batch.requested = k;
  const std::string& current = trace.steps.at(i).payload;

  std::optional<NumericHint> numeric;
  std::optional<std::string> literal_truth;
  if (auto it = hints_.find(trace.trace_id); it != hints_.end() && it->second.step_index == i &&
                                             it->second.true_payload != current) {
    numeric = numeric_hint_for(current, it->second.true_payload);
    if (!numeric) literal_truth = it->second.true_payload;
  }

  if (literal_truth && k > 0) {
    batch.proposals.push_back({i, *literal_truth, ProposalProvider::rule_mutator, 0, PromptVariant::with_gold});
    for (auto& p : mutate_numeric(trace, i, k, std::nullopt)) {
      if (batch.proposals.size() >= k) break;
      if (p.payload == *literal_truth) continue;
      p.sample_index = batch.proposals.size();
      batch.proposals.push_back(std::move(p));
    }
  } else {
    batch.proposals = mutate_numeric(trace, i, k, numeric);
  }
  if (batch.proposals.size() < k)
    batch.shortfall.push_back("rule mutator produced " + std::to_string(batch.proposals.size()) + " of " +
                              std::to_string(k) + " proposals");
  return batch;
}

}  // namespace tracefix
