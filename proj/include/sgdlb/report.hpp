#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sgdlb/types.hpp"

namespace sgdlb {

/// upper: the empirical value must not exceed the theoretical one.
/// lower: the empirical value must not fall below it.
/// informational: recorded only, always passes.
enum class BoundSense { upper, lower, informational };

enum class Verdict { pass, fail };

struct BoundReport {
  std::string name;
  double theoretical = 0.0;
  double empirical = 0.0;
  Index replications = 1;
  BoundSense sense = BoundSense::upper;
  double relative_tolerance = 0.0;
  double absolute_tolerance = 0.0;
  Verdict verdict = Verdict::pass;
  /// Distance to the bound in the direction that passes; negative when violated.
  double slack = 0.0;
  std::string note;

  bool passed() const { return verdict == Verdict::pass; }
};

/// Builds a report and fills verdict/slack. The allowance is
/// relative_tolerance * |theoretical| + absolute_tolerance.
inline BoundReport make_report(std::string name, double theoretical, double empirical, Index replications,
                               BoundSense sense, double relative_tolerance = 0.0, double absolute_tolerance = 0.0) {
  BoundReport r;
  r.name = std::move(name);
  r.theoretical = theoretical;
  r.empirical = empirical;
  r.replications = replications;
  r.sense = sense;
  r.relative_tolerance = relative_tolerance;
  r.absolute_tolerance = absolute_tolerance;
  const double allowance = relative_tolerance * std::abs(theoretical) + absolute_tolerance;
  switch (sense) {
    case BoundSense::upper:
      r.slack = theoretical - empirical;
      r.verdict = empirical <= theoretical + allowance ? Verdict::pass : Verdict::fail;
      break;
    case BoundSense::lower:
      r.slack = empirical - theoretical;
      r.verdict = empirical >= theoretical - allowance ? Verdict::pass : Verdict::fail;
      break;
    case BoundSense::informational:
      r.slack = 0.0;
      r.verdict = Verdict::pass;
      break;
  }
  if (std::isnan(empirical) || std::isnan(theoretical)) r.verdict = Verdict::fail;
  return r;
}

using VerificationReport = std::vector<BoundReport>;

inline bool all_passed(const VerificationReport& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const BoundReport& r) { return r.passed(); });
}

inline const char* to_string(BoundSense s) {
  switch (s) {
    case BoundSense::upper: return "upper";
    case BoundSense::lower: return "lower";
    case BoundSense::informational: return "informational";
  }
  return "?";
}

inline const char* to_string(Verdict v) { return v == Verdict::pass ? "pass" : "fail"; }

}  // namespace sgdlb
