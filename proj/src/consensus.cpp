#include "tracefix/consensus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "tracefix/proposal.hpp"
#include "text_util.hpp"

namespace tracefix {

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

// Value after "KEY:" when `line` starts with that key (case-insensitive).
std::optional<std::string> field(std::string_view line, std::string_view key) {
  line = detail::trim(line);
  while (!line.empty() && (line.front() == '*' || line.front() == '#')) line.remove_prefix(1);
  if (line.size() <= key.size() || upper(line.substr(0, key.size())) != key || line[key.size()] != ':')
    return std::nullopt;
  std::string_view rest = line.substr(key.size() + 1);
  while (!rest.empty() && rest.front() == '*') rest.remove_prefix(1);
  std::string value(detail::trim(rest));
  while (!value.empty() && (value.back() == '*' || value.back() == '.')) value.pop_back();
  return value;
}

}  // namespace

std::string_view to_string(AgreementLabel label) {
  switch (label) {
    case AgreementLabel::agree:
      return "AGREE";
    case AgreementLabel::partial:
      return "PARTIAL";
    case AgreementLabel::disagree:
      return "DISAGREE";
  }
  return "PARTIAL";
}

std::string_view to_string(CriticAgent agent) { return agent == CriticAgent::B ? "B" : "C"; }

AgreementLabel parse_agreement_label(std::string_view text) {
  const std::string u = upper(detail::trim(text));
  if (u == "AGREE") return AgreementLabel::agree;
  if (u == "PARTIAL") return AgreementLabel::partial;
  if (u == "DISAGREE") return AgreementLabel::disagree;
  throw ConfigError("unknown agreement label '" + std::string(text) + "'");
}

double agreement_weight(AgreementLabel label) {
  switch (label) {
    case AgreementLabel::agree:
      return 1.0;
    case AgreementLabel::partial:
      return 0.5;
    case AgreementLabel::disagree:
      return 0.0;
  }
  throw ConfigError("unknown agreement label");
}

Critique parse_critique(CriticAgent agent, std::string_view reply) {
  Critique critique;
  critique.agent = agent;
  std::optional<AgreementLabel> label;
  std::optional<double> confidence;
  std::string rationale;
  for (const auto& line : detail::split_lines(reply)) {
    if (auto value = field(line, "LABEL"); value && !label) {
      try {
        label = parse_agreement_label(*value);
      } catch (const ConfigError&) {
      }
      continue;
    }
    if (auto value = field(line, "CONFIDENCE"); value && !confidence) {
      char* end = nullptr;
      const double parsed = std::strtod(value->c_str(), &end);
      if (end != value->c_str() && std::isfinite(parsed)) confidence = std::clamp(parsed, 0.0, 1.0);
      continue;
    }
    if (!rationale.empty() || !detail::trim(line).empty()) {
      if (!rationale.empty()) rationale += '\n';
      rationale += line;
    }
  }
  critique.rationale = std::string(detail::trim(rationale));
  if (label && confidence) {
    critique.label = *label;
    critique.confidence = *confidence;
  } else {
    critique.label = AgreementLabel::partial;
    critique.confidence = 0.5;
    critique.parse_warning = true;
  }
  return critique;
}

double consensus_score(int crs, const std::vector<Critique>& critiques) {
  if (crs != 0 && crs != 1) throw ConfigError("crs must be 0 or 1");
  const Critique* b = nullptr;
  const Critique* c = nullptr;
  for (const auto& critique : critiques) {
    const Critique*& slot = critique.agent == CriticAgent::B ? b : c;
    if (slot) throw ConfigError("duplicate critique from agent " + std::string(to_string(critique.agent)));
    slot = &critique;
  }
  if (!b || !c) throw ConfigError("consensus needs one critique from agent B and one from agent C");
  const double sum = static_cast<double>(crs) + std::clamp(b->confidence, 0.0, 1.0) * agreement_weight(b->label) +
                     std::clamp(c->confidence, 0.0, 1.0) * agreement_weight(c->label);
  return sum / 3.0;
}

ConsensusResult validate_attribution(const Trace& trace, std::size_t i, int crs, std::string_view proposed_repair,
                                     std::string_view end_feedback, ModelGateway& gateway,
                                     const ConsensusSettings& settings) {
  const std::string attribution = render_attribution_prompt(trace, i, end_feedback, *settings.prompts).text();
  const std::string step_id = std::to_string(trace.steps.at(i).id);

  const auto prompt_b = settings.prompts->get("critic_b").render({
      {"attribution_prompt", attribution},
      {"step_id", step_id},
      {"proposed_repair", std::string(proposed_repair)},
  });
  const std::string reply_b = gateway.complete(make_request(prompt_b, settings.model, settings.temperature));

  const auto prompt_c = settings.prompts->get("critic_c").render({
      {"attribution_prompt", attribution},
      {"step_id", step_id},
      {"proposed_repair", std::string(proposed_repair)},
      {"critique_b", reply_b},
  });
  const std::string reply_c = gateway.complete(make_request(prompt_c, settings.model, settings.temperature));

  ConsensusResult result;
  result.critiques = {parse_critique(CriticAgent::B, reply_b), parse_critique(CriticAgent::C, reply_c)};
  result.score = consensus_score(crs, result.critiques);
  result.retained = result.score >= settings.tau_c;
  return result;
}

bool attribution_flags_step(const Trace& trace, std::size_t i, std::string_view end_feedback, ModelGateway& gateway,
                            const ConsensusSettings& settings) {
  const std::string attribution = render_attribution_prompt(trace, i, end_feedback, *settings.prompts).text();
  const auto prompt = settings.prompts->get("attribution_flag").render({{"attribution_prompt", attribution}});
  const std::string reply = gateway.complete(make_request(prompt, settings.model, settings.temperature));
  for (const auto& line : detail::split_lines(reply))
    if (auto value = field(line, "ROOT_CAUSE")) return upper(*value) == "YES";
  return false;
}

}  // namespace tracefix
