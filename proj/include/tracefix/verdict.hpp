#pragma once

#include <string>
#include <string_view>

namespace tracefix {

enum class VerdictMode { deterministic, predictive };

inline std::string_view to_string(VerdictMode mode) {
  return mode == VerdictMode::deterministic ? "deterministic" : "predictive";
}

struct Verdict {
  bool success = false;
  std::string detail;
  VerdictMode mode = VerdictMode::deterministic;

  bool operator==(const Verdict&) const = default;
};

}  // namespace tracefix
