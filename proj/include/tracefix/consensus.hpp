#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracefix/gateway.hpp"
#include "tracefix/prompts.hpp"
#include "tracefix/trace.hpp"

namespace tracefix {

enum class AgreementLabel { agree, partial, disagree };
enum class CriticAgent { B, C };

std::string_view to_string(AgreementLabel label);
std::string_view to_string(CriticAgent agent);

/// Case-insensitive AGREE / PARTIAL / DISAGREE; throws ConfigError otherwise.
AgreementLabel parse_agreement_label(std::string_view text);

/// AGREE 1, PARTIAL 0.5, DISAGREE 0.
double agreement_weight(AgreementLabel label);

struct Critique {
  CriticAgent agent = CriticAgent::B;
  AgreementLabel label = AgreementLabel::partial;
  double confidence = 0.5;
  std::string rationale;
  bool parse_warning = false;
};

/// Reads `LABEL:` and `CONFIDENCE:` lines. Confidence is clamped to [0, 1].
/// A reply missing either line yields (PARTIAL, 0.5) with parse_warning.
Critique parse_critique(CriticAgent agent, std::string_view reply);

/// (crs + sum of confidence x weight) / 3 over exactly one B and one C
/// critique. Throws ConfigError on a missing or duplicated agent.
double consensus_score(int crs, const std::vector<Critique>& critiques);

struct ConsensusSettings {
  double tau_c = 0.5;
  std::string model = "default";
  double temperature = 0.0;
  const PromptLibrary* prompts = &PromptLibrary::defaults();
};

struct ConsensusResult {
  bool retained = false;
  double score = 0.0;
  std::vector<Critique> critiques;
};

/// Agent B critiques the attribution of step `i` (with the repair that
/// flipped the outcome); agent C reviews the attribution and B's critique.
/// Retained iff score >= tau_c.
ConsensusResult validate_attribution(const Trace& trace, std::size_t i, int crs, std::string_view proposed_repair,
                                     std::string_view end_feedback, ModelGateway& gateway,
                                     const ConsensusSettings& settings = {});

/// One attribution-prompt call asking whether step `i` is the root cause.
/// Anything but a `ROOT_CAUSE: YES` line counts as not flagged.
bool attribution_flags_step(const Trace& trace, std::size_t i, std::string_view end_feedback, ModelGateway& gateway,
                            const ConsensusSettings& settings = {});

}  // namespace tracefix
