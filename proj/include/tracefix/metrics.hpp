#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tracefix/crs.hpp"

namespace tracefix {

/// Method name used for the causal intervention pipeline in summaries.
inline constexpr std::string_view kCausalRepairMethod = "causal_repair";

struct RunSummary {
  std::string benchmark;
  std::string method;
  std::size_t total = 0;
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::size_t repaired = 0;
  /// Initially passing items that fail after refinement.
  std::size_t regressed = 0;
  double repair_rate = 0.0;
  double accuracy_before = 0.0;
  double accuracy_after = 0.0;
  double delta = 0.0;
  std::optional<double> minimality_mean;
  std::optional<double> crs_precision;
  std::optional<double> consensus_rate;
  std::optional<double> adjusted_repair_rate;

  bool operator==(const RunSummary&) const = default;
};

/// repaired / failed. Throws ConfigError when failed is 0 or repaired
/// exceeds failed.
double repair_rate(std::size_t failed, std::size_t repaired);

struct AccuracyDelta {
  double before = 0.0;
  double after = 0.0;
  double delta = 0.0;
};

/// before = passed / total; after = (passed + repaired - regressed) / total.
AccuracyDelta accuracy_delta(std::size_t total, std::size_t passed_before, std::size_t repaired,
                             std::size_t regressed = 0);

/// Fills the derived fields from the counts. Throws ConfigError unless
/// passed + failed = total and repaired <= failed. repair_rate is 0 when
/// nothing failed.
RunSummary make_summary(std::string benchmark, std::string method, std::size_t total, std::size_t passed,
                        std::size_t repaired, std::size_t regressed = 0);

enum class FlagSource { crs, attribution_prompt };

/// Validated flagged steps over all flagged steps. With FlagSource::crs a
/// step is flagged by crs = 1, so the value is 1 by construction. With
/// attribution_prompt a step is flagged by its attribution_flag and
/// validated by crs = 1. Throws ConfigError when nothing is flagged.
double crs_precision(const std::vector<TraceScoring>& scorings, FlagSource source);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Wilson score interval. Throws ConfigError for n = 0, successes > n or a
/// confidence outside (0, 1).
Interval wilson_interval(std::size_t successes, std::size_t n, double confidence = 0.95);

/// Repair rate scaled by judge precision.
double adjusted_repair_rate(double rate, double judge_precision);

struct Report {
  std::string csv;
  std::string markdown;
};

/// One table per benchmark with rows in the fixed method order (direct,
/// self_refine, self_reflection, causal_repair, then others by name).
Report render_report(std::vector<RunSummary> summaries);

/// Inverse of the CSV half of render_report.
std::vector<RunSummary> parse_report_csv(std::string_view csv);

/// Position of a method in the fixed report order.
std::size_t method_rank(std::string_view method);

}  // namespace tracefix
