#include "tracefix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "text_util.hpp"

namespace tracefix {

namespace {

constexpr std::string_view kMethodOrder[] = {"direct", "self_refine", "self_reflection", kCausalRepairMethod};

const char* const kCsvHeader =
    "benchmark,method,total,passed,failed,repaired,regressed,repair_rate,accuracy_before,accuracy_after,delta,"
    "minimality_mean,crs_precision,consensus_rate,adjusted_repair_rate";

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string exact(const std::optional<double>& v) { return v ? exact(*v) : std::string(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

double to_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ConfigError("bad number in report: '" + s + "'");
  return v;
}

std::size_t to_count(const std::string& s) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw ConfigError("bad count in report: '" + s + "'");
  return static_cast<std::size_t>(v);
}

std::optional<double> to_optional(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return to_double(s);
}

std::string fixed(double v, int places) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", places, v);
  return buf;
}

// ".750" style: three places, no leading zero.
std::string rate3(double v) {
  std::string s = fixed(v, 3);
  if (s.rfind("0.", 0) == 0) s.erase(0, 1);
  if (s.rfind("-0.", 0) == 0) s.erase(1, 1);
  return s;
}

std::string signed_rate3(double v) {
  std::string s = rate3(std::fabs(v));
  if (s == ".000") return s;
  return (v < 0 ? "-" : "+") + s;
}

std::string optional_cell(const std::optional<double>& v, int places) {
  return v ? fixed(*v, places) : std::string("—");
}

}  // namespace

double repair_rate(std::size_t failed, std::size_t repaired) {
  if (failed == 0) throw ConfigError("repair rate is undefined with no failed traces");
  if (repaired > failed) throw ConfigError("repaired count exceeds failed count");
  return static_cast<double>(repaired) / static_cast<double>(failed);
}

AccuracyDelta accuracy_delta(std::size_t total, std::size_t passed_before, std::size_t repaired,
                             std::size_t regressed) {
  if (total == 0) throw ConfigError("accuracy is undefined for an empty set");
  if (passed_before > total || regressed > passed_before || passed_before + repaired - regressed > total)
    throw ConfigError("inconsistent accuracy counts");
  const double t = static_cast<double>(total);
  AccuracyDelta out;
  out.before = static_cast<double>(passed_before) / t;
  out.after = static_cast<double>(passed_before + repaired - regressed) / t;
  out.delta = out.after - out.before;
  return out;
}

RunSummary make_summary(std::string benchmark, std::string method, std::size_t total, std::size_t passed,
                        std::size_t repaired, std::size_t regressed) {
  if (passed > total) throw ConfigError("passed count exceeds total");
  RunSummary s;
  s.benchmark = std::move(benchmark);
  s.method = std::move(method);
  s.total = total;
  s.passed = passed;
  s.failed = total - passed;
  s.repaired = repaired;
  s.regressed = regressed;
  if (repaired > s.failed) throw ConfigError("repaired count exceeds failed count");
  s.repair_rate = s.failed ? repair_rate(s.failed, repaired) : 0.0;
  if (total > 0) {
    const auto acc = accuracy_delta(total, passed, repaired, regressed);
    s.accuracy_before = acc.before;
    s.accuracy_after = acc.after;
    s.delta = acc.delta;
  }
  return s;
}

double crs_precision(const std::vector<TraceScoring>& scorings, FlagSource source) {
  std::size_t flagged = 0, validated = 0;
  for (const auto& scoring : scorings) {
    for (const auto& step : scoring.scores) {
      const bool is_flagged = source == FlagSource::crs ? step.crs == 1 : step.attribution_flag.value_or(false);
      if (!is_flagged) continue;
      ++flagged;
      validated += step.crs == 1 && !step.successful_interventions.empty();
    }
  }
  if (flagged == 0) throw ConfigError("CRS precision is undefined with no flagged steps");
  return static_cast<double>(validated) / static_cast<double>(flagged);
}

Interval wilson_interval(std::size_t successes, std::size_t n, double confidence) {
  if (n == 0) throw ConfigError("Wilson interval needs n >= 1");
  if (successes > n) throw ConfigError("successes exceed n");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("confidence must lie in (0, 1)");
  const double z = boost::math::quantile(boost::math::normal(), 1.0 - (1.0 - confidence) / 2.0);
  const double nd = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nd;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nd;
  const double centre = (p + z2 / (2.0 * nd)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nd + z2 / (4.0 * nd * nd)) / denom;
  Interval out{std::clamp(centre - half, 0.0, 1.0), std::clamp(centre + half, 0.0, 1.0)};
  if (successes == 0) out.low = 0.0;
  if (successes == n) out.high = 1.0;
  return out;
}

double adjusted_repair_rate(double rate, double judge_precision) { return rate * judge_precision; }

std::size_t method_rank(std::string_view method) {
  for (std::size_t r = 0; r < std::size(kMethodOrder); ++r)
    if (kMethodOrder[r] == method) return r;
  return std::size(kMethodOrder);
}

Report render_report(std::vector<RunSummary> summaries) {
  std::stable_sort(summaries.begin(), summaries.end(), [](const RunSummary& a, const RunSummary& b) {
    if (a.benchmark != b.benchmark) return a.benchmark < b.benchmark;
    const auto ra = method_rank(a.method), rb = method_rank(b.method);
    if (ra != rb) return ra < rb;
    return a.method < b.method;
  });

  Report report;
  std::ostringstream csv;
  csv << kCsvHeader << "\n";
  for (const auto& s : summaries) {
    csv << csv_field(s.benchmark) << ',' << csv_field(s.method) << ',' << s.total << ',' << s.passed << ','
        << s.failed << ',' << s.repaired << ',' << s.regressed << ',' << exact(s.repair_rate) << ','
        << exact(s.accuracy_before) << ',' << exact(s.accuracy_after) << ',' << exact(s.delta) << ','
        << exact(s.minimality_mean) << ',' << exact(s.crs_precision) << ',' << exact(s.consensus_rate) << ','
        << exact(s.adjusted_repair_rate) << "\n";
  }
  report.csv = csv.str();

  const bool any_adjusted =
      std::any_of(summaries.begin(), summaries.end(), [](const RunSummary& s) { return s.adjusted_repair_rate; });
  std::ostringstream md;
  std::string current;
  bool first = true;
  for (const auto& s : summaries) {
    if (first || s.benchmark != current) {
      if (!first) md << "\n";
      first = false;
      current = s.benchmark;
      md << "## " << (current.empty() ? "(unnamed)" : current) << "\n\n";
      md << "| Method | Total | Pass | Fail | Repairs (%) | Min. | Before | After | Δ | CRS prec. | Consensus |";
      if (any_adjusted) md << " Adj. rate |";
      md << "\n|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|---:|";
      if (any_adjusted) md << "---:|";
      md << "\n";
    }
    md << "| " << s.method << " | " << s.total << " | " << s.passed << " | " << s.failed << " | " << s.repaired
       << " (" << fixed(100.0 * s.repair_rate, 1) << ") | " << optional_cell(s.minimality_mean, 2) << " | "
       << rate3(s.accuracy_before) << " | " << rate3(s.accuracy_after) << " | " << signed_rate3(s.delta) << " | "
       << optional_cell(s.crs_precision, 2) << " | " << optional_cell(s.consensus_rate, 2) << " |";
    if (any_adjusted)
      md << " "
         << (s.adjusted_repair_rate ? fixed(100.0 * *s.adjusted_repair_rate, 1) + "%" : std::string("—"))
         << " |";
    md << "\n";
  }
  report.markdown = md.str();
  return report;
}

std::vector<RunSummary> parse_report_csv(std::string_view csv) {
  std::vector<RunSummary> out;
  const auto lines = detail::split_lines(csv);
  bool header = true;
  for (const auto& line : lines) {
    if (line.empty()) continue;
    if (header) {
      if (line != kCsvHeader) throw ConfigError("unexpected report header");
      header = false;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 15) throw ConfigError("report row has " + std::to_string(f.size()) + " fields, expected 15");
    RunSummary s;
    s.benchmark = f[0];
    s.method = f[1];
    s.total = to_count(f[2]);
    s.passed = to_count(f[3]);
    s.failed = to_count(f[4]);
    s.repaired = to_count(f[5]);
    s.regressed = to_count(f[6]);
    s.repair_rate = to_double(f[7]);
    s.accuracy_before = to_double(f[8]);
    s.accuracy_after = to_double(f[9]);
    s.delta = to_double(f[10]);
    s.minimality_mean = to_optional(f[11]);
    s.crs_precision = to_optional(f[12]);
    s.consensus_rate = to_optional(f[13]);
    s.adjusted_repair_rate = to_optional(f[14]);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace tracefix
