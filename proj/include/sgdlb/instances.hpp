#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sgdlb/engine.hpp"
#include "sgdlb/noise.hpp"
#include "sgdlb/objectives.hpp"
#include "sgdlb/report.hpp"

namespace sgdlb {

enum class TheoremId {
  infdim,
  aggregation_step,
  nonconvex_hessian,
  prop_distance,
  prop_noise_const,
  prop_noise_floor,
  prop_noise_poly,
};

std::string to_string(TheoremId id);
std::optional<TheoremId> theorem_from_string(std::string_view name);

/// eta_t = a / (L (b + t^theta)); the scaling used by the noise proposition.
struct ScaledPolyDecay {
  double a = 1.0;
  double b = 0.0;
  double theta = 0.5;
};

struct InstanceParams {
  double L = 0.0;
  double rho = 0.0;
  double Delta = 0.0;
  double sigma = 0.0;
  Index T = 0;
  double delta = 0.0;
  Index d = 0;
  std::vector<double> steps;    // eta_1..eta_{T-1}
  std::vector<double> weights;  // zeta_1..zeta_T
  std::optional<ScaledPolyDecay> poly;
};

struct LowerBoundInstance {
  TheoremId theorem;
  Objective objective;
  Vector x1;
  NoiseModel noise;
  InstanceParams params;
  /// Closed-form quantities: "gamma_sq", "G", "bound", "d0", "M", ...
  std::map<std::string, double> predicted;
  /// Bump variant per step (aggregation instance only).
  std::vector<BumpVariant> variants;

  double predict(const std::string& key) const;
  /// Schedule reproducing params.steps (or params.poly).
  StepSchedule schedule() const;
  /// Aggregation over params.weights; none() when no weights are set.
  AggregationRule aggregation() const;
};

// ---- closed forms ----------------------------------------------------------

/// sigma/(16(T-1)) (sqrt(64 L Delta (T-1) + 9 sigma^2) - 3 sigma)
double aggregation_gamma_sq(double L, double Delta, double sigma, Index T);
/// (3 sigma/32) (256 rho Delta^2/(T-1)^2)^{1/3}
double hessian_gamma_sq(double rho, double Delta, double sigma, Index T);
/// (sigma/2) (rho Delta^2/(T-1)^2)^{1/3}
double hessian_predicted_bound(double rho, double Delta, double sigma, Index T);
/// max{1/L, sum of steps}
double distance_scale(double L, std::span<const double> steps);
/// Phi^{-1}(1 - delta/T)^2 sigma^2 (T-1) / (0.01 L^2 Delta M)
double distance_d0(double L, double Delta, double sigma, Index T, double delta, double M);
/// 96 ln(4T/delta)
double noise_d0(Index T, double delta);
/// sigma^2 sum_{j<t} eta_j^2 prod_{j<i<t} (1 - L eta_i)^2 for t = 1..T
std::vector<double> noise_variance_mass(double L, double sigma, std::span<const double> steps);
/// prod_{j<t} (1 - L eta_j) for t = 1..T
std::vector<double> noise_mean_factor(double L, std::span<const double> steps);
/// 4 exp(-d eps^2 / 24)
double concentration_failure_bound(Index d, double eps);

// ---- aggregation / Hessian instances --------------------------------------

/// Weights and steps fixed in advance. Bump for step t is the minus variant
/// when the tail weight sum_{s>t} zeta_s lies in [-1/2, 1/2] and the plus
/// variant otherwise; width |eta_t| sigma (zero function for eta_t = 0).
LowerBoundInstance build_aggregation_instance(double L, double Delta, double sigma, Index T, std::vector<double> steps,
                                              std::vector<double> weights, std::uint64_t seed = 0);

struct RealizedPolicy {
  std::vector<double> steps;
  std::vector<double> weights;
};

/// Resolves a Gram-adaptive (or fixed) step/aggregation policy on the noise
/// realization of `seed`. Runs the policy on G <x, e_1> alone, which yields the
/// same iterates' Gram matrices as any instance built from the result.
RealizedPolicy probe_aggregation_policy(double L, double Delta, double sigma, Index T, const StepSchedule& schedule,
                                        const AggregationRule& agg, std::uint64_t seed);

LowerBoundInstance build_hessian_instance(double rho, double Delta, double sigma, Index T, std::vector<double> steps,
                                          std::uint64_t seed = 0);

struct BetaCheck {
  /// Exhaustive when T - 1 <= exhaustive_max_steps, otherwise `samples` patterns.
  Index exhaustive_max_steps = 11;
  Index samples = 1000;
  std::uint64_t seed = 0;
};

/// (a) gradients at iterates and x_out equal G e_1 within 1e-12,
/// (b) 0 - min_t f(x_t) + 3G^2/(2L) <= Delta (1 + 1e-9).
VerificationReport verify_aggregation_instance(const LowerBoundInstance& inst, const Trajectory& traj);

/// (c) beta range over sign patterns: non-empty with beta_hi >= min f(z) - G^2/L.
/// Depends only on the instance, not on a particular trajectory.
VerificationReport verify_beta_feasibility(const LowerBoundInstance& inst, const BetaCheck& check = {});

/// Gradient constancy, f(x_1) - f(x_t) <= Delta, zero bump curvature at iterates.
VerificationReport verify_hessian_instance(const LowerBoundInstance& inst, const Trajectory& traj);

/// All 2^(T-1) sign patterns for T - 1 <= 62.
std::vector<std::vector<int>> all_sign_patterns(Index steps);

/// Iterates of the aggregation/Hessian instance for a given sign pattern,
/// computed from the closed form rather than by simulation.
std::vector<Vector> closed_form_iterates(const LowerBoundInstance& inst, std::span<const int> signs);

// ---- convex quadratic instances --------------------------------------------

/// f(x) = <x, e_1>^2 / (4M), M = max{1/L, sum eta_t}, x_1 = sqrt(Delta M) e_1.
/// Throws if d < ceil(d0) or a step lies outside [0, 1/L].
LowerBoundInstance build_quadratic_distance_instance(double L, double Delta, double sigma, Index T, double delta,
                                                     Index d, std::vector<double> steps, std::uint64_t seed = 0);

/// f(x) = (L/2)||x||^2, x_1 = sqrt(Delta/L) e_1. The case is picked from the
/// schedule: poly decay (theta in (0,1)), then constant eta < 1/L, then a
/// positive floor c = L min eta_t.
LowerBoundInstance build_quadratic_noise_instance(double L, double Delta, double sigma, Index T, double delta, Index d,
                                                  std::vector<double> steps, std::uint64_t seed = 0);
LowerBoundInstance build_quadratic_noise_instance(double L, double Delta, double sigma, Index T, double delta, Index d,
                                                  ScaledPolyDecay poly, std::uint64_t seed = 0);

/// High-probability bound frequency over replications (summary-recorded
/// trajectories are enough).
VerificationReport verify_distance_instance(const LowerBoundInstance& inst, std::span<const Trajectory> batch);

/// Frequency bound plus first-coordinate moments against the closed forms.
/// Trajectories must track coordinate 0.
VerificationReport verify_noise_instance(const LowerBoundInstance& inst, std::span<const Trajectory> batch);

/// Runs `replications` seeded copies of the instance's SGD.
std::vector<Trajectory> run_replications(const LowerBoundInstance& inst, Index replications, std::uint64_t base_seed,
                                         Recording recording = Recording::summary);

// ---- concentration ---------------------------------------------------------

/// Draws x ~ N(sqrt(M) e_1, (varmass/d) I) and checks the failure frequency
/// of |‖x‖^2/(M + varmass) - 1| <= eps against 4 exp(-d eps^2/24) plus 3
/// binomial standard errors.
BoundReport verify_concentration(double M, double varmass, Index d, double eps, Index samples, std::uint64_t seed);

// ---- impossibility demo ----------------------------------------------------

/// A deterministic first-order method: SGD with the given step/aggregation
/// policy run without noise.
struct DeterministicMethod {
  std::string name;
  StepSchedule schedule;
  AggregationRule aggregation;

  static DeterministicMethod gd_uniform(double eta, Index T);
  static DeterministicMethod gd_last(double eta, Index T);
  /// x_out = x_1
  static DeterministicMethod identity(Index T);
};

struct ImpossibilityResult {
  double x1_star = 0.0;
  double x_out = 0.0;
  double grad_at_out = 0.0;
  double bracket = 0.0;
  Index bisection_steps = 0;
};

/// x_out of the method on the 1-D sigmoid from x_1.
double method_output(const DeterministicMethod& method, Index T, double x1);

ImpossibilityResult fixed_point_impossibility_demo(const DeterministicMethod& method, Index T);

struct DimensionSweepRow {
  Index d = 0;
  double mean_max_deviation = 0.0;
  double mean_grad_at_out = 0.0;
};

/// Embeds the sigmoid in R^d with isotropic Gaussian noise and measures how
/// far the first coordinate strays from the noiseless run started at the
/// 1-D root x_1*.
std::vector<DimensionSweepRow> infdim_dimension_sweep(const DeterministicMethod& method, Index T, double sigma,
                                                      std::span<const Index> dims, Index replications,
                                                      std::uint64_t seed);

// ---- theorem composition -----------------------------------------------

enum class StepRegime { small_sum, moderate_constant, large_constant };

/// Values of the inequality chain that turns the two propositions into the
/// c0 min{L Delta, sigma^2}/sqrt(T) rate, first to last; a valid chain is
/// non-increasing. small_sum takes any steps with sum <= c sqrt(T)/L;
/// the constant regimes take T - 1 equal steps.
std::vector<double> sgdlow_chain(StepRegime regime, double L, double Delta, double sigma, Index T,
                                 std::span<const double> steps);
StepRegime classify_regime(double L, Index T, std::span<const double> steps);

}  // namespace sgdlb
