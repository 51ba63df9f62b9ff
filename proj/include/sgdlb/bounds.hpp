#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sgdlb/engine.hpp"
#include "sgdlb/report.hpp"

namespace sgdlb {

/// (2 Delta + L sigma^2 sum eta_t^2) / sum eta_t (2 - L eta_t), steps in (0, 1/L).
double ghadimi_lan_bound(double L, double Delta, double sigma, std::span<const double> steps);

/// (4 L Delta + sigma^2 sum L^2 eta^2 (1 - L eta + k)/(1 - L eta))
///   / (3 (T-1) - sum (1 - L eta)(1 - L eta + k + 1/k)),
/// with 1 - L eta_t <= k_t <= 1/(1 - L eta_t). Throws when the denominator is not positive.
double kappa_bound(double L, double Delta, double sigma, std::span<const double> steps, std::span<const double> kappas);

/// 4 Delta / sum eta_t (4 - L eta_t)
double gd_corollary_bound(double L, double Delta, std::span<const double> steps);

/// eta = sqrt(2 Delta / ((T-1) L sigma^2))
double tightness_step(double L, double Delta, double sigma, Index T);

struct TightnessReport {
  double eta = 0.0;
  bool clamped = false;
  double lower = 0.0;      // gamma^2 of the aggregation instance
  double empirical = 0.0;  // mean min_t ||grad f(x_t)||^2
  double upper = 0.0;      // Ghadimi-Lan bound at eta
  double ratio = 0.0;      // upper / lower
  Index replications = 0;
  std::vector<double> per_replication;  // min_t ||grad f(x_t)||^2 of each run
  VerificationReport reports;
};

/// Sandwich lower <= empirical <= upper on the aggregation instance driven
/// with the constant step above (clamped to (1 - 1e-6)/L when it exceeds
/// 1/L), and upper/lower <= 2 sqrt 2 (1.05) for T >= 1000.
TightnessReport tightness_report(double L, double Delta, double sigma, Index T, Index replications,
                                 std::uint64_t seed = 0);

/// Mean over replications of min_t ||grad f(x_t)||^2 against the
/// Ghadimi-Lan bound; passes iff empirical <= bound + 3 SE. Delta defaults
/// to f(x1) - inf f.
BoundReport empirical_vs_bound(const Objective& obj, CRef<Vector> x1, const StepSchedule& schedule,
                               const NoiseModel& noise, Index T, Index replications,
                               std::optional<double> Delta = std::nullopt, std::uint64_t seed = 0);

}  // namespace sgdlb
