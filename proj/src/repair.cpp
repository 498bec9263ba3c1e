#include "tracefix/repair.hpp"

#include <algorithm>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "text_util.hpp"

namespace tracefix {

Tokens tokenize(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error(std::string("ICU NFC normaliser unavailable: ") + u_errorName(status));
  const icu::UnicodeString source = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), text.size()));
  const icu::UnicodeString normal = nfc->normalize(source, status);
  if (U_FAILURE(status)) throw Error(std::string("NFC normalisation failed: ") + u_errorName(status));

  Tokens tokens;
  icu::UnicodeString current;
  auto flush = [&] {
    if (current.isEmpty()) return;
    std::string utf8;
    current.toUTF8String(utf8);
    tokens.push_back(std::move(utf8));
    current.remove();
  };
  for (int32_t i = 0; i < normal.length();) {
    const UChar32 c = normal.char32At(i);
    if (u_isUWhiteSpace(c))
      flush();
    else
      current.append(c);
    i += U16_LENGTH(c);
  }
  flush();
  return tokens;
}

double minimality_lexical(const Tokens& x, const Tokens& y) {
  const std::size_t L = std::max(x.size(), y.size());
  if (L == 0) return 1.0;
  const std::size_t shorter = std::min(x.size(), y.size());
  std::size_t m = 0;
  for (std::size_t p = 0; p < shorter; ++p) m += x[p] == y[p];
  const double len_gap = static_cast<double>(L - shorter);
  const double Ld = static_cast<double>(L);
  return (static_cast<double>(m) / Ld) * (1.0 - 0.5 * len_gap / Ld);
}

std::size_t levenshtein_tokens(const Tokens& x, const Tokens& y) {
  std::vector<std::size_t> row(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t above = row[j];
      row[j] = std::min({above + 1, row[j - 1] + 1, diagonal + (x[i - 1] == y[j - 1] ? 0 : 1)});
      diagonal = above;
    }
  }
  return row[y.size()];
}

double minimality_edit(const Tokens& x, const Tokens& y) {
  const std::size_t L = std::max(x.size(), y.size());
  if (L == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein_tokens(x, y)) / static_cast<double>(L);
}

MinimalityScore score_minimality(std::string_view original, std::string_view repair) {
  const Tokens x = tokenize(original);
  const Tokens y = tokenize(repair);
  return {minimality_lexical(x, y), minimality_edit(x, y), x.size(), y.size()};
}

std::string_view to_string(MinimalityMetric metric) {
  return metric == MinimalityMetric::lexical ? "lexical" : "edit";
}

std::optional<MinimalityMetric> parse_minimality_metric(std::string_view text) {
  if (text == "lexical") return MinimalityMetric::lexical;
  if (text == "edit") return MinimalityMetric::edit;
  return std::nullopt;
}

std::optional<SelectedRepair> select_repair(const StepScore& score, std::string_view original_payload,
                                            MinimalityMetric metric, const std::function<double(double)>& transform) {
  std::optional<SelectedRepair> best;
  double best_primary = 0, best_secondary = 0;
  for (std::size_t n = 0; n < score.successful_interventions.size(); ++n) {
    const auto& intervention = score.successful_interventions[n];
    const MinimalityScore m = score_minimality(original_payload, intervention.proposal.payload);
    double primary = metric == MinimalityMetric::lexical ? m.lexical : m.edit;
    const double secondary = metric == MinimalityMetric::lexical ? m.edit : m.lexical;
    if (transform) primary = transform(primary);
    const bool better = !best || primary > best_primary ||
                        (primary == best_primary &&
                         (secondary > best_secondary ||
                          (secondary == best_secondary &&
                           intervention.proposal.sample_index < best->proposal.sample_index)));
    if (better) {
      best = SelectedRepair{n, intervention.proposal, m};
      best_primary = primary;
      best_secondary = secondary;
    }
  }
  return best;
}

nlohmann::ordered_json pair_to_json(const ContrastivePair& pair) {
  nlohmann::ordered_json doc;
  doc["trace_id"] = pair.trace_id;
  doc["step_index"] = pair.step_index;
  doc["wrong"] = pair.wrong;
  doc["repaired"] = pair.repaired;
  doc["minimality_lexical"] = pair.minimality.lexical;
  doc["minimality_edit"] = pair.minimality.edit;
  doc["consensus"] = pair.consensus ? nlohmann::ordered_json(*pair.consensus) : nlohmann::ordered_json(nullptr);
  doc["verifier_mode"] = std::string(to_string(pair.verifier_mode));
  return doc;
}

ContrastivePair pair_from_json(const nlohmann::json& doc) {
  ContrastivePair pair;
  pair.trace_id = doc.at("trace_id").get<std::string>();
  pair.step_index = doc.at("step_index").get<std::size_t>();
  pair.wrong = doc.at("wrong").get<std::string>();
  pair.repaired = doc.at("repaired").get<std::string>();
  pair.minimality.lexical = doc.at("minimality_lexical").get<double>();
  pair.minimality.edit = doc.at("minimality_edit").get<double>();
  pair.minimality.tokens_original = tokenize(pair.wrong).size();
  pair.minimality.tokens_repair = tokenize(pair.repaired).size();
  if (!doc.at("consensus").is_null()) pair.consensus = doc.at("consensus").get<double>();
  pair.verifier_mode =
      doc.at("verifier_mode").get<std::string>() == "predictive" ? VerdictMode::predictive : VerdictMode::deterministic;
  return pair;
}

std::vector<ContrastivePair> read_pairs(const std::filesystem::path& path) {
  std::vector<ContrastivePair> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(pair_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception&) {
      // A torn final line from an interrupted run is ignored.
    }
  }
  return out;
}

PairWriter::PairWriter(std::filesystem::path path) : path_(std::move(path)) {
  for (const auto& pair : read_pairs(path_)) keys_.emplace(pair.trace_id, pair.step_index, pair.repaired);
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  detail::drop_torn_tail(path_);
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw Error("cannot open pair dataset for writing: " + path_.string());
}

bool PairWriter::append(const ContrastivePair& pair) {
  std::lock_guard lock(mutex_);
  if (!keys_.emplace(pair.trace_id, pair.step_index, pair.repaired).second) return false;
  const std::string line = pair_to_json(pair).dump() + "\n";
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw Error("failed writing pair dataset: " + path_.string());
  return true;
}

std::size_t PairWriter::size() const {
  std::lock_guard lock(mutex_);
  return keys_.size();
}

ContrastivePair emit_pair(const Trace& trace, const Intervention& repair, const MinimalityScore& minimality,
                          std::optional<double> consensus, PairWriter& writer) {
  if (!repair.verdict.success) throw PreconditionError("only verified repairs can be emitted as pairs");
  const std::size_t i = repair.proposal.step_index;
  if (i >= trace.steps.size()) throw TraceError("repair step index out of range", i);
  ContrastivePair pair{trace.trace_id, i, trace.steps[i].payload, repair.proposal.payload,
                       minimality,     consensus, repair.verdict.mode};
  writer.append(pair);
  return pair;
}

}  // namespace tracefix
