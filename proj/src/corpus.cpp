#include "tracefix/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace tracefix {

std::map<VerifierKind, std::vector<std::size_t>> Corpus::by_kind() const {
  std::map<VerifierKind, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < traces.size(); ++i) out[traces[i].task.verifier_kind].push_back(i);
  return out;
}

Corpus ingest_corpus(const std::filesystem::path& directory) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(directory)) throw ConfigError("corpus directory not found: " + directory.string());

  std::vector<fs::path> documents;
  for (const auto& entry : fs::directory_iterator(directory))
    if (entry.is_regular_file() && entry.path().extension() == ".json") documents.push_back(entry.path());
  if (documents.empty()) throw ConfigError("corpus directory has no trace documents: " + directory.string());
  std::sort(documents.begin(), documents.end());

  Corpus corpus;
  std::set<std::string> ids;
  for (const auto& file : documents) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    if (!in && !in.eof()) {
      corpus.issues.push_back({file, "unreadable file"});
      continue;
    }
    try {
      Trace trace = parse_trace(text.str());
      if (!ids.insert(trace.trace_id).second) {
        corpus.issues.push_back({file, "duplicate trace_id '" + trace.trace_id + "'"});
        continue;
      }
      corpus.traces.push_back(std::move(trace));
      corpus.files.push_back(file);
    } catch (const TraceError& e) {
      corpus.issues.push_back({file, e.what()});
    }
  }
  return corpus;
}

}  // namespace tracefix
