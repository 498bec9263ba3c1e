#pragma once

// Readers for the reference tables under data/.

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracefix/metrics.hpp"

namespace tracefix::testing {

using CsvRow = std::map<std::string, std::string>;

/// Header-keyed rows of a small CSV file; lines starting with '#' are
/// comments. No quoting support, the fixtures do not need it.
inline std::vector<CsvRow> read_fixture_csv(const std::string& name) {
  const std::string path = std::string(TRACEFIX_DATA_DIR) + "/" + name;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing fixture " + path);
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (header.empty()) {
      header = fields;
      continue;
    }
    CsvRow row;
    for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = i < fields.size() ? fields[i] : "";
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::size_t as_count(const CsvRow& row, const std::string& key) { return std::stoul(row.at(key)); }
inline double as_number(const CsvRow& row, const std::string& key) { return std::stod(row.at(key)); }

struct CellCheck {
  std::string label;
  double computed = 0.0;
  double printed = 0.0;
  /// Absolute difference in percentage points.
  double deviation_pp() const { return 100.0 * std::abs(computed - printed); }
};

/// Recomputes every printed cell of one reference row from its counts.
/// Rates and accuracies are compared as fractions.
inline std::vector<CellCheck> reproduce_reference_row(const CsvRow& row) {
  const std::string tag = row.at("benchmark") + "/" + row.at("method");
  std::vector<CellCheck> out;
  const std::size_t failed = as_count(row, "failed"), repaired = as_count(row, "repaired");
  out.push_back({tag + " repair rate", repair_rate(failed, repaired), as_number(row, "printed_rate") / 100.0});
  if (row.at("total").empty()) return out;
  const auto acc = accuracy_delta(as_count(row, "total"), as_count(row, "passed"), repaired, as_count(row, "regressed"));
  out.push_back({tag + " accuracy before", acc.before, as_number(row, "printed_before")});
  out.push_back({tag + " accuracy after", acc.after, as_number(row, "printed_after")});
  out.push_back({tag + " delta", acc.delta, as_number(row, "printed_delta")});
  return out;
}

/// The aggregate row sums failed/repaired over the rows of its method.
inline std::vector<CellCheck> reproduce_reference_table() {
  std::vector<CellCheck> out;
  std::map<std::string, std::pair<std::size_t, std::size_t>> sums;
  for (const auto& row : read_fixture_csv("reported_counts.csv")) {
    if (row.at("benchmark") == "aggregate") {
      const auto& [failed, repaired] = sums[row.at("method")];
      if (failed != as_count(row, "failed") || repaired != as_count(row, "repaired"))
        throw std::runtime_error("aggregate row does not match the per-benchmark rows");
    } else {
      auto& [failed, repaired] = sums[row.at("method")];
      failed += as_count(row, "failed");
      repaired += as_count(row, "repaired");
    }
    for (auto& c : reproduce_reference_row(row)) out.push_back(std::move(c));
  }
  return out;
}

}  // namespace tracefix::testing
