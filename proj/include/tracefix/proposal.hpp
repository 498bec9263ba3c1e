#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracefix/gateway.hpp"
#include "tracefix/prompts.hpp"
#include "tracefix/trace.hpp"

namespace tracefix {

enum class ProposalProvider { gateway, rule_mutator };
enum class PromptVariant { with_gold, no_gold };

std::string_view to_string(ProposalProvider provider);
std::string_view to_string(PromptVariant variant);

struct Proposal {
  std::size_t step_index = 0;
  std::string payload;
  ProposalProvider provider = ProposalProvider::gateway;
  std::size_t sample_index = 0;
  PromptVariant prompt_variant = PromptVariant::with_gold;

  /// "s<step>-k<sample>", unique within one trace.
  std::string id() const;
  bool operator==(const Proposal&) const = default;
};

/// Proposals for one step plus a note for every sample that could not be
/// produced.
struct ProposalBatch {
  std::vector<Proposal> proposals;
  std::size_t requested = 0;
  std::vector<std::string> shortfall;
};

/// Fills the intervention template for step `i`. With `no_gold` the gold
/// line reads WITHHELD. Throws TraceError for i >= n-1 and ConfigError when
/// `with_gold` is requested for a task without gold.
RenderedPrompt render_intervention_prompt(const Trace& trace, std::size_t i, std::string_view feedback,
                                          PromptVariant variant,
                                          const PromptLibrary& prompts = PromptLibrary::defaults());

/// Fills the attribution template for step `i`; requires a gold answer.
RenderedPrompt render_attribution_prompt(const Trace& trace, std::size_t i, std::string_view end_feedback,
                                         const PromptLibrary& prompts = PromptLibrary::defaults());

/// The first fenced block of a reply, else the whole reply, trimmed.
std::string parse_correction_reply(std::string_view reply);

struct ProposalSettings {
  std::string model = "default";
  double temperature = 0.7;
  const PromptLibrary* prompts = &PromptLibrary::defaults();
};

/// K independent calls (sample_index 0..K-1) with the intervention prompt.
/// Gateway failures and empty replies shorten the batch instead of throwing.
ProposalBatch generate_proposals(const Trace& trace, std::size_t i, std::size_t k, ModelGateway& gateway,
                                 PromptVariant variant, std::string_view feedback = {},
                                 const ProposalSettings& settings = {});

/// Tells the mutator which literal to set first, and to what.
struct NumericHint {
  std::size_t literal_index = 0;
  std::string value;
};

/// A numeric literal inside a payload: byte offset and text. `#N`
/// references and digits glued to identifiers are not literals.
struct NumericLiteral {
  std::size_t offset = 0;
  std::string text;
};

std::vector<NumericLiteral> find_numeric_literals(std::string_view payload);

/// Up to K single-literal edits of step i's payload. The hinted value comes
/// first; the schedule then tries +1, -1, x10 and a swap of the last two
/// digits, each over the literals in order. Negative results, no-ops and
/// duplicates are skipped.
std::vector<Proposal> mutate_numeric(const Trace& trace, std::size_t i, std::size_t k,
                                     const std::optional<NumericHint>& hint = std::nullopt);

/// Ground truth the harness hands the mutator: the step that was corrupted
/// and its correct payload.
struct RepairHint {
  std::size_t step_index = 0;
  std::string true_payload;
};

/// The hint in mutate_numeric form when the two payloads differ in exactly
/// one numeric literal.
std::optional<NumericHint> numeric_hint_for(std::string_view faulty, std::string_view truth);

class Proposer {
 public:
  virtual ~Proposer() = default;
  virtual ProposalBatch propose(const Trace& trace, std::size_t i, std::size_t k, std::string_view feedback) = 0;
};

class GatewayProposer : public Proposer {
 public:
  GatewayProposer(ModelGateway& gateway, PromptVariant variant, ProposalSettings settings = {});
  ProposalBatch propose(const Trace& trace, std::size_t i, std::size_t k, std::string_view feedback) override;

 private:
  ModelGateway& gateway_;
  PromptVariant variant_;
  ProposalSettings settings_;
};

/// Offline proposer. Hints are keyed by trace id; at the hinted step the
/// true payload (or its single-literal form) is proposed first.
class RuleMutatorProposer : public Proposer {
 public:
  RuleMutatorProposer() = default;
  explicit RuleMutatorProposer(std::map<std::string, RepairHint> hints);

  ProposalBatch propose(const Trace& trace, std::size_t i, std::size_t k, std::string_view feedback) override;

 private:
  std::map<std::string, RepairHint> hints_;
};

}  // namespace tracefix
