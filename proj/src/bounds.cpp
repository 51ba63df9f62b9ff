#include "sgdlb/bounds.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sgdlb/instances.hpp"

namespace sgdlb {

namespace {

void check_steps(double L, std::span<const double> steps) {
  if (!(L > 0.0)) throw std::invalid_argument("bound: L must be positive");
  if (steps.empty()) throw std::invalid_argument("bound: needs at least one step (T >= 2)");
  for (double eta : steps)
    if (!(eta > 0.0 && L * eta < 1.0))
      throw std::invalid_argument("bound: step " + std::to_string(eta) + " outside (0, 1/L)");
}

}  // namespace

double ghadimi_lan_bound(double L, double Delta, double sigma, std::span<const double> steps) {
  check_steps(L, steps);
  double num = 2.0 * Delta, den = 0.0;
  for (double eta : steps) {
    num += L * eta * eta * sigma * sigma;
    den += eta * (2.0 - L * eta);
  }
  return num / den;
}

double kappa_bound(double L, double Delta, double sigma, std::span<const double> steps, std::span<const double> kappas) {
  check_steps(L, steps);
  if (kappas.size() != steps.size()) throw std::invalid_argument("kappa_bound: one kappa per step is required");
  double num = 4.0 * L * Delta;
  double den = 3.0 * static_cast<double>(steps.size());
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const double a = 1.0 - L * steps[t];
    const double k = kappas[t];
    const double band = 1e-12 * (1.0 + std::abs(k));
    if (!(k >= a - band && k <= 1.0 / a + band))
      throw std::invalid_argument("kappa_bound: kappa " + std::to_string(k) + " outside [1 - L eta, 1/(1 - L eta)]");
    num += L * L * steps[t] * steps[t] * (a + k) / a * sigma * sigma;
    den -= a * (a + k + 1.0 / k);
  }
  if (!(den > 0.0)) throw std::invalid_argument("kappa_bound: denominator is not positive");
  return num / den;
}

double gd_corollary_bound(double L, double Delta, std::span<const double> steps) {
  check_steps(L, steps);
  double den = 0.0;
  for (double eta : steps) den += eta * (4.0 - L * eta);
  return 4.0 * Delta / den;
}

double tightness_step(double L, double Delta, double sigma, Index T) {
  if (T < 2) throw std::invalid_argument("tightness: T must be at least 2");
  if (!(sigma > 0.0)) throw std::invalid_argument("tightness: sigma must be positive");
  return std::sqrt(2.0 * Delta / (static_cast<double>(T - 1) * L * sigma * sigma));
}

TightnessReport tightness_report(double L, double Delta, double sigma, Index T, Index replications, std::uint64_t seed) {
  if (replications < 1) throw std::invalid_argument("tightness: replications must be positive");
  TightnessReport rep;
  rep.eta = tightness_step(L, Delta, sigma, T);
  if (L * rep.eta >= 1.0) {
    rep.eta = (1.0 - 1e-6) / L;
    rep.clamped = true;
  }
  const std::vector<double> steps(static_cast<std::size_t>(T - 1), rep.eta);
  const LowerBoundInstance inst = build_aggregation_instance(L, Delta, sigma, T, steps,
                                                             std::vector<double>(static_cast<std::size_t>(T), 1.0 / static_cast<double>(T)));
  rep.lower = inst.predict("gamma_sq");
  rep.upper = ghadimi_lan_bound(L, Delta, sigma, steps);
  rep.ratio = rep.upper / rep.lower;
  rep.replications = replications;
  const auto batch = run_replications(inst, replications, seed, Recording::summary);
  for (const Trajectory& tr : batch) {
    rep.per_replication.push_back(tr.criteria.min_grad_norm_sq());
    rep.empirical += rep.per_replication.back();
  }
  rep.empirical /= static_cast<double>(replications);

  auto lower = make_report("lower_le_empirical", rep.lower, rep.empirical, replications, BoundSense::lower, 1e-12);
  auto upper = make_report("empirical_le_upper", rep.upper, rep.empirical, replications, BoundSense::upper, 1e-12);
  if (rep.clamped) lower.note = upper.note = "step clamped to (1 - 1e-6)/L";
  rep.reports.push_back(lower);
  rep.reports.push_back(upper);
  const double target = 2.0 * std::sqrt(2.0) * 1.05;
  if (T >= 1000) {
    rep.reports.push_back(make_report("ratio_le_2sqrt2", target, rep.ratio, 1, BoundSense::upper));
  } else {
    auto r = make_report("ratio_le_2sqrt2", target, rep.ratio, 1, BoundSense::informational);
    r.note = "asserted only for T >= 1000";
    rep.reports.push_back(r);
  }
  return rep;
}

BoundReport empirical_vs_bound(const Objective& obj, CRef<Vector> x1, const StepSchedule& schedule,
                               const NoiseModel& noise, Index T, Index replications, std::optional<double> Delta,
                               std::uint64_t seed) {
  if (replications < 1) throw std::invalid_argument("empirical_vs_bound: replications must be positive");
  const double gap = Delta ? *Delta : suboptimality_gap(obj, x1);
  const std::vector<double> steps = schedule.steps(T - 1);
  const double bound = ghadimi_lan_bound(obj.declared_grad_lipschitz(), gap, noise.sigma, steps);
  RunOptions options;
  options.recording = Recording::summary;
  double mean = 0.0, sq = 0.0;
  for (Index r = 0; r < replications; ++r) {
    const auto s = replication_seed(seed, static_cast<std::uint64_t>(r));
    const double v = run(obj, x1, T, schedule, noise.with_seed(s), AggregationRule::none(), options)
                         .criteria.min_grad_norm_sq();
    mean += v;
    sq += v * v;
  }
  const auto n = static_cast<double>(replications);
  mean /= n;
  const double var = replications > 1 ? std::max(0.0, (sq - n * mean * mean) / (n - 1.0)) : 0.0;
  const double se = std::sqrt(var / n);
  return make_report("ghadimi_lan", bound, mean, replications, BoundSense::upper, 0.0, 3.0 * se);
}

}  // namespace sgdlb
