#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tracefix/trace.hpp"

namespace tracefix {

struct CorpusIssue {
  std::filesystem::path file;
  std::string reason;
};

/// Valid traces of a directory, in file-name order, plus the files that
/// were rejected and why.
struct Corpus {
  std::vector<Trace> traces;
  std::vector<std::filesystem::path> files;
  std::vector<CorpusIssue> issues;

  /// Indices into `traces`, grouped by verifier kind for stage routing.
  std::map<VerifierKind, std::vector<std::size_t>> by_kind() const;
};

/// Parses and validates every *.json document directly inside `directory`.
/// Invalid documents and duplicate trace ids are reported and excluded.
/// Throws ConfigError when the directory is missing or holds no documents.
Corpus ingest_corpus(const std::filesystem::path& directory);

}  // namespace tracefix
