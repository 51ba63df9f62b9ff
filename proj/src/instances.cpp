#include "sgdlb/instances.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "sgdlb/interpolation.hpp"

namespace sgdlb {

namespace {

constexpr std::array<std::pair<TheoremId, const char*>, 7> kTheoremNames{{
    {TheoremId::infdim, "infdim"},
    {TheoremId::aggregation_step, "aggregation_step"},
    {TheoremId::nonconvex_hessian, "nonconvex_hessian"},
    {TheoremId::prop_distance, "prop_distance"},
    {TheoremId::prop_noise_const, "prop_noise_const"},
    {TheoremId::prop_noise_floor, "prop_noise_floor"},
    {TheoremId::prop_noise_poly, "prop_noise_poly"},
}};

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be positive and finite");
}

void require_steps(const std::vector<double>& steps, Index T) {
  if (static_cast<Index>(steps.size()) != T - 1)
    throw std::invalid_argument("expected " + std::to_string(T - 1) + " steps, got " + std::to_string(steps.size()));
  for (double e : steps)
    if (!(e >= 0.0) || !std::isfinite(e)) throw std::invalid_argument("steps must be finite and non-negative");
}

double sum(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}

double binomial_se(double p, Index n) {
  p = std::clamp(p, 0.0, 1.0);
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

void require_trajectory(const LowerBoundInstance& inst, const Trajectory& traj, bool need_full) {
  if (traj.T != inst.params.T) throw std::invalid_argument("trajectory/instance mismatch: horizon differs");
  if (traj.last_iterate.size() != inst.objective.dim())
    throw std::invalid_argument("trajectory/instance mismatch: dimension differs");
  if (need_full && (traj.recording != Recording::full || static_cast<Index>(traj.iterates.size()) != traj.T))
    throw std::invalid_argument("verification needs a fully recorded trajectory");
  if (!inst.params.steps.empty()) {
    if (traj.realized_steps.size() != inst.params.steps.size() ||
        !std::equal(traj.realized_steps.begin(), traj.realized_steps.end(), inst.params.steps.begin()))
      throw std::invalid_argument("trajectory/instance mismatch: steps differ from the instance's");
  }
}

double gradient_deviation(const LowerBoundInstance& inst, const Trajectory& traj) {
  const double G = inst.predict("G");
  Vector target = Vector::Zero(inst.objective.dim());
  target[0] = G;
  double worst = 0.0;
  for (const Vector& g : traj.true_grads) worst = std::max(worst, (g - target).norm());
  if (traj.x_out) worst = std::max(worst, (gradient(inst.objective, *traj.x_out) - target).norm());
  return worst;
}

const SeparableLinearPlusBumps& separable_params(const LowerBoundInstance& inst) {
  const auto* p = std::get_if<SeparableLinearPlusBumps>(&inst.objective.parameters());
  if (p == nullptr) throw std::invalid_argument("instance objective is not separable");
  return *p;
}

Objective linear_only(double G, Index T, double L) {
  return Objective::separable(G, std::vector<ScalarFunction>(static_cast<std::size_t>(T - 1)), L);
}

}  // namespace

std::string to_string(TheoremId id) {
  for (const auto& [k, name] : kTheoremNames)
    if (k == id) return name;
  return "unknown";
}

std::optional<TheoremId> theorem_from_string(std::string_view name) {
  for (const auto& [k, n] : kTheoremNames)
    if (name == n) return k;
  return std::nullopt;
}

double LowerBoundInstance::predict(const std::string& key) const {
  const auto it = predicted.find(key);
  if (it == predicted.end()) throw std::invalid_argument("instance has no predicted value '" + key + "'");
  return it->second;
}

StepSchedule LowerBoundInstance::schedule() const {
  if (params.poly) return StepSchedule::poly_decay(params.poly->a / params.L, params.poly->b, params.poly->theta);
  return StepSchedule::list(params.steps);
}

AggregationRule LowerBoundInstance::aggregation() const {
  if (params.weights.empty()) return AggregationRule::none();
  return AggregationRule::fixed_weights(params.weights);
}

double aggregation_gamma_sq(double L, double Delta, double sigma, Index T) {
  if (T < 2) throw std::invalid_argument("aggregation instance: T must be at least 2");
  const double n = static_cast<double>(T - 1);
  return sigma / (16.0 * n) * (std::sqrt(64.0 * L * Delta * n + 9.0 * sigma * sigma) - 3.0 * sigma);
}

double hessian_gamma_sq(double rho, double Delta, double sigma, Index T) {
  if (T < 2) throw std::invalid_argument("Hessian instance: T must be at least 2");
  const double n = static_cast<double>(T - 1);
  return 3.0 * sigma / 32.0 * std::cbrt(256.0 * rho * Delta * Delta / (n * n));
}

double hessian_predicted_bound(double rho, double Delta, double sigma, Index T) {
  if (T < 2) throw std::invalid_argument("Hessian instance: T must be at least 2");
  const double n = static_cast<double>(T - 1);
  return sigma / 2.0 * std::cbrt(rho * Delta * Delta / (n * n));
}

double distance_scale(double L, std::span<const double> steps) { return std::max(1.0 / L, sum(steps)); }

double distance_d0(double L, double Delta, double sigma, Index T, double delta, double M) {
  const double z = boost::math::quantile(boost::math::normal(), 1.0 - delta / static_cast<double>(T));
  return z * z * sigma * sigma * static_cast<double>(T - 1) / (0.01 * L * L * Delta * M);
}

double noise_d0(Index T, double delta) { return 96.0 * std::log(4.0 * static_cast<double>(T) / delta); }

std::vector<double> noise_variance_mass(double L, double sigma, std::span<const double> steps) {
  std::vector<double> gamma{0.0};
  double acc = 0.0;
  for (double eta : steps) {
    const double a = 1.0 - L * eta;
    acc = acc * a * a + eta * eta;
    gamma.push_back(sigma * sigma * acc);
  }
  return gamma;
}

std::vector<double> noise_mean_factor(double L, std::span<const double> steps) {
  std::vector<double> out{1.0};
  for (double eta : steps) out.push_back(out.back() * (1.0 - L * eta));
  return out;
}

double concentration_failure_bound(Index d, double eps) {
  return 4.0 * std::exp(-static_cast<double>(d) * eps * eps / 24.0);
}

LowerBoundInstance build_aggregation_instance(double L, double Delta, double sigma, Index T, std::vector<double> steps,
                                              std::vector<double> weights, std::uint64_t seed) {
  if (T < 2) throw std::invalid_argument("aggregation instance: T must be at least 2");
  require_positive(L, "L");
  require_positive(Delta, "Delta");
  require_positive(sigma, "sigma");
  require_steps(steps, T);
  if (static_cast<Index>(weights.size()) != T)
    throw std::invalid_argument("aggregation instance: expected " + std::to_string(T) + " weights");

  const double gamma_sq = aggregation_gamma_sq(L, Delta, sigma, T);
  const double G = std::sqrt(gamma_sq);
  std::vector<ScalarFunction> bumps;
  std::vector<BumpVariant> variants;
  double tail = 0.0;
  std::vector<double> tails(static_cast<std::size_t>(T), 0.0);
  for (Index s = T - 1; s >= 1; --s) {
    tail += weights[static_cast<std::size_t>(s)];
    tails[static_cast<std::size_t>(s)] = tail;
  }
  for (Index t = 1; t < T; ++t) {
    const double eta = steps[static_cast<std::size_t>(t - 1)];
    const double Z = tails[static_cast<std::size_t>(t)];
    const BumpVariant v = std::abs(Z) <= 0.5 ? BumpVariant::minus : BumpVariant::plus;
    variants.push_back(v);
    bumps.push_back(eta == 0.0 ? make_zero_function<double>() : make_bump1<double>(L, std::abs(eta) * sigma, v));
  }

  InstanceParams params;
  params.L = L;
  params.Delta = Delta;
  params.sigma = sigma;
  params.T = T;
  params.d = T;
  params.steps = std::move(steps);
  params.weights = std::move(weights);
  LowerBoundInstance inst{TheoremId::aggregation_step,
                          Objective::separable(G, std::move(bumps), L),
                          Vector::Zero(T),
                          NoiseModel::rademacher(sigma, seed),
                          std::move(params),
                          {{"gamma_sq", gamma_sq}, {"G", G}, {"bound", gamma_sq}},
                          std::move(variants)};
  return inst;
}

RealizedPolicy probe_aggregation_policy(double L, double Delta, double sigma, Index T, const StepSchedule& schedule,
                                        const AggregationRule& agg, std::uint64_t seed) {
  const double G = std::sqrt(aggregation_gamma_sq(L, Delta, sigma, T));
  const Objective probe = linear_only(G, T, L);
  const Trajectory traj = run(probe, Vector::Zero(T), T, schedule, NoiseModel::rademacher(sigma, seed));
  RealizedPolicy out;
  out.steps = traj.realized_steps;
  if (const auto* fw = std::get_if<FixedWeights>(&agg.kind())) {
    out.weights = fw->weights;
  } else if (const auto* ga = std::get_if<GramAdaptiveWeights>(&agg.kind())) {
    std::vector<Vector> all = traj.iterates;
    all.insert(all.end(), traj.noisy_grads.begin(), traj.noisy_grads.end());
    const Vector w = ga->rule(gram_matrix(all), T);
    out.weights.assign(w.data(), w.data() + w.size());
  } else {
    out.weights = std::vector<double>(static_cast<std::size_t>(T), 1.0 / static_cast<double>(T));
  }
  return out;
}

LowerBoundInstance build_hessian_instance(double rho, double Delta, double sigma, Index T, std::vector<double> steps,
                                          std::uint64_t seed) {
  if (T < 2) throw std::invalid_argument("Hessian instance: T must be at least 2");
  require_positive(rho, "rho");
  require_positive(Delta, "Delta");
  require_positive(sigma, "sigma");
  require_steps(steps, T);
  const double gamma_sq = hessian_gamma_sq(rho, Delta, sigma, T);
  const double G = std::sqrt(gamma_sq);
  std::vector<ScalarFunction> bumps;
  for (double eta : steps)
    bumps.push_back(eta == 0.0 ? make_zero_function<double>() : make_bump2<double>(rho, std::abs(eta) * sigma));

  InstanceParams params;
  params.rho = rho;
  params.Delta = Delta;
  params.sigma = sigma;
  params.T = T;
  params.d = T;
  params.steps = std::move(steps);
  return LowerBoundInstance{TheoremId::nonconvex_hessian,
                            Objective::separable(G, std::move(bumps), std::nullopt, rho),
                            Vector::Zero(T),
                            NoiseModel::rademacher(sigma, seed),
                            std::move(params),
                            {{"gamma_sq", gamma_sq}, {"G", G}, {"bound", hessian_predicted_bound(rho, Delta, sigma, T)}},
                            {}};
}

VerificationReport verify_aggregation_instance(const LowerBoundInstance& inst, const Trajectory& traj) {
  if (inst.theorem != TheoremId::aggregation_step) throw std::invalid_argument("not an aggregation instance");
  require_trajectory(inst, traj, true);
  const auto& p = inst.params;
  VerificationReport out;
  out.push_back(make_report("gradient_constancy", 0.0, gradient_deviation(inst, traj), 1, BoundSense::upper, 0.0, 1e-12));
  const double fmin = *std::min_element(traj.values.begin(), traj.values.end());
  const double certificate = value(inst.objective, inst.x1) - fmin + 1.5 * inst.predict("gamma_sq") / p.L;
  out.push_back(make_report("suboptimality_certificate", p.Delta, certificate, 1, BoundSense::upper, 1e-9));
  return out;
}

std::vector<std::vector<int>> all_sign_patterns(Index steps) {
  if (steps < 0 || steps > 62) throw std::invalid_argument("all_sign_patterns: supports 0..62 steps");
  const std::uint64_t count = std::uint64_t{1} << steps;
  std::vector<std::vector<int>> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t m = 0; m < count; ++m) {
    std::vector<int> s(static_cast<std::size_t>(steps));
    for (Index k = 0; k < steps; ++k) s[static_cast<std::size_t>(k)] = (m >> k) & 1U ? 1 : -1;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Vector> closed_form_iterates(const LowerBoundInstance& inst, std::span<const int> signs) {
  const auto& p = inst.params;
  if (static_cast<Index>(signs.size()) != p.T - 1) throw std::invalid_argument("closed_form_iterates: wrong pattern length");
  const double G = inst.predict("G");
  std::vector<Vector> xs{inst.x1};
  for (Index t = 1; t < p.T; ++t) {
    Vector g = Vector::Zero(p.T);
    g[0] = G;
    g[t] = p.sigma * signs[static_cast<std::size_t>(t - 1)];
    xs.push_back(xs.back() - p.steps[static_cast<std::size_t>(t - 1)] * g);
  }
  return xs;
}

VerificationReport verify_beta_feasibility(const LowerBoundInstance& inst, const BetaCheck& check) {
  if (inst.theorem != TheoremId::aggregation_step) throw std::invalid_argument("not an aggregation instance");
  const auto& p = inst.params;
  const Index n = p.T - 1;
  std::vector<std::vector<int>> patterns;
  bool exhaustive = n <= check.exhaustive_max_steps;
  if (exhaustive) {
    patterns = all_sign_patterns(n);
  } else {
    auto gen = make_stream(check.seed, 0);
    std::bernoulli_distribution coin(0.5);
    for (Index k = 0; k < check.samples; ++k) {
      std::vector<int> s(static_cast<std::size_t>(n));
      for (int& v : s) v = coin(gen) ? 1 : -1;
      patterns.push_back(std::move(s));
    }
  }

  // Iterate t only depends on the first t-1 signs; with exhaustive patterns
  // the prefixes are enumerated once.
  std::vector<Vector> zs;
  std::vector<Vector> ys;
  for (std::size_t k = 0; k < patterns.size(); ++k) {
    const auto xs = closed_form_iterates(inst, patterns[k]);
    Vector y = Vector::Zero(p.T);
    for (Index t = 0; t < p.T; ++t) y += p.weights[static_cast<std::size_t>(t)] * xs[static_cast<std::size_t>(t)];
    ys.push_back(std::move(y));
    for (Index t = 0; t < p.T; ++t) {
      // the prefix of length t first appears at pattern k < 2^t (low bits vary fastest)
      if (exhaustive && k >= (std::size_t{1} << t)) continue;
      zs.push_back(xs[static_cast<std::size_t>(t)]);
    }
  }
  Matrix Z(p.T, static_cast<Index>(zs.size()));
  Vector fz(static_cast<Index>(zs.size()));
  for (std::size_t i = 0; i < zs.size(); ++i) {
    Z.col(static_cast<Index>(i)) = zs[i];
    fz[static_cast<Index>(i)] = value(inst.objective, zs[i]);
  }
  Matrix Y(p.T, static_cast<Index>(ys.size()));
  for (std::size_t j = 0; j < ys.size(); ++j) Y.col(static_cast<Index>(j)) = ys[j];
  Vector gamma = Vector::Zero(p.T);
  gamma[0] = inst.predict("G");
  const BetaRange<double> range = beta_range<double>(Z, fz, Y, gamma, p.L);

  const double scale = 1.0 + fz.cwiseAbs().maxCoeff() + gamma.squaredNorm() / p.L;
  VerificationReport out;
  auto nonempty = make_report("beta_range_nonempty", 0.0, range.lo - range.hi, static_cast<Index>(patterns.size()),
                              BoundSense::upper, 0.0, 1e-10 * scale);
  nonempty.note = std::string(exhaustive ? "exhaustive" : "sampled") + " over " + std::to_string(patterns.size()) +
                  " sign patterns";
  out.push_back(nonempty);
  out.push_back(make_report("beta_hi_certificate", range.certified_lower, range.hi, static_cast<Index>(patterns.size()),
                            BoundSense::lower, 0.0, 1e-10 * scale));
  return out;
}

VerificationReport verify_hessian_instance(const LowerBoundInstance& inst, const Trajectory& traj) {
  if (inst.theorem != TheoremId::nonconvex_hessian) throw std::invalid_argument("not a Hessian instance");
  require_trajectory(inst, traj, true);
  const auto& p = inst.params;
  const auto& sep = separable_params(inst);
  VerificationReport out;
  out.push_back(make_report("gradient_constancy", 0.0, gradient_deviation(inst, traj), 1, BoundSense::upper, 0.0, 1e-12));

  const double f1 = traj.values.front();
  double worst_total = -std::numeric_limits<double>::infinity();
  double worst_step = -std::numeric_limits<double>::infinity();
  for (Index t = 0; t < p.T; ++t) {
    const double drop = f1 - traj.values[static_cast<std::size_t>(t)];
    worst_total = std::max(worst_total, drop);
    worst_step = std::max(worst_step, drop - static_cast<double>(t) * p.Delta / static_cast<double>(p.T - 1));
  }
  out.push_back(make_report("value_drop", p.Delta, worst_total, 1, BoundSense::upper, 1e-9));
  out.push_back(make_report("value_drop_per_step", 0.0, worst_step, 1, BoundSense::upper, 0.0, 1e-9 * p.Delta));

  double curvature = 0.0;
  for (const Vector& x : traj.iterates)
    for (std::size_t k = 0; k < sep.bumps.size(); ++k)
      curvature = std::max(curvature, std::abs(sep.bumps[k].eval(x[static_cast<Index>(k) + 1], 2)));
  out.push_back(make_report("bump_curvature_at_iterates", 0.0, curvature, 1, BoundSense::upper));
  return out;
}

LowerBoundInstance build_quadratic_distance_instance(double L, double Delta, double sigma, Index T, double delta,
                                                     Index d, std::vector<double> steps, std::uint64_t seed) {
  if (T < 2) throw std::invalid_argument("distance instance: T must be at least 2");
  require_positive(L, "L");
  require_positive(Delta, "Delta");
  require_positive(sigma, "sigma");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  require_steps(steps, T);
  for (double e : steps)
    if (e > 1.0 / L) throw std::invalid_argument("distance instance: steps must lie in [0, 1/L]");
  const double M = distance_scale(L, steps);
  const double d0 = distance_d0(L, Delta, sigma, T, delta, M);
  if (static_cast<double>(d) < std::ceil(d0))
    throw std::invalid_argument("distance instance: d = " + std::to_string(d) + " is below d0 = " +
                                std::to_string(static_cast<long long>(std::ceil(d0))));
  Vector curvature = Vector::Zero(d);
  curvature[0] = 1.0 / (2.0 * M);
  Vector x1 = Vector::Zero(d);
  x1[0] = std::sqrt(Delta * M);

  InstanceParams params;
  params.L = L;
  params.Delta = Delta;
  params.sigma = sigma;
  params.T = T;
  params.delta = delta;
  params.d = d;
  params.steps = std::move(steps);
  return LowerBoundInstance{TheoremId::prop_distance,
                            Objective::quadratic(std::move(curvature), L),
                            std::move(x1),
                            NoiseModel::gaussian(sigma, seed),
                            std::move(params),
                            {{"M", M}, {"d0", d0}, {"bound", Delta / (25.0 * M)}},
                            {}};
}

namespace {

LowerBoundInstance noise_instance(TheoremId id, InstanceParams params, std::map<std::string, double> predicted,
                                  std::uint64_t seed) {
  require_positive(params.L, "L");
  require_positive(params.Delta, "Delta");
  require_positive(params.sigma, "sigma");
  if (!(params.delta > 0.0 && params.delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  const double d0 = noise_d0(params.T, params.delta);
  if (static_cast<double>(params.d) < std::ceil(d0))
    throw std::invalid_argument("noise instance: d = " + std::to_string(params.d) + " is below d0 = " +
                                std::to_string(static_cast<long long>(std::ceil(d0))));
  predicted["d0"] = d0;
  Vector x1 = Vector::Zero(params.d);
  x1[0] = std::sqrt(params.Delta / params.L);
  const double L = params.L;
  const Index d = params.d;
  const double sigma = params.sigma;
  return LowerBoundInstance{id,          Objective::isotropic_quadratic(d, L), std::move(x1), NoiseModel::gaussian(sigma, seed),
                            std::move(params), std::move(predicted),           {}};
}

}  // namespace

LowerBoundInstance build_quadratic_noise_instance(double L, double Delta, double sigma, Index T, double delta, Index d,
                                                  std::vector<double> steps, std::uint64_t seed) {
  if (T < 2) throw std::invalid_argument("noise instance: T must be at least 2");
  require_positive(L, "L");
  require_steps(steps, T);
  InstanceParams params;
  params.L = L;
  params.Delta = Delta;
  params.sigma = sigma;
  params.T = T;
  params.delta = delta;
  params.d = d;
  params.steps = steps;

  const double lo = *std::min_element(steps.begin(), steps.end());
  const double hi = *std::max_element(steps.begin(), steps.end());
  if (lo == hi && L * lo < 1.0) {
    const double eta = lo;
    const double bound = L / 2.0 * std::min(Delta, eta * sigma * sigma / (2.0 - L * eta));
    return noise_instance(TheoremId::prop_noise_const, std::move(params), {{"eta", eta}, {"bound", bound}}, seed);
  }
  if (lo > 0.0) {
    const double c = L * lo;
    const double bound = sigma * sigma * c * c / 2.0;
    // x_1 is deterministic with ||grad f(x_1)||^2 = L Delta, so the minimum over
    // all t can only be bounded by the smaller of the two.
    return noise_instance(TheoremId::prop_noise_floor, std::move(params),
                          {{"c", c}, {"bound", bound}, {"bound_effective", std::min(bound, L * Delta)}}, seed);
  }
  throw std::invalid_argument("noise instance: schedule fits no case (non-constant steps with a zero step)");
}

LowerBoundInstance build_quadratic_noise_instance(double L, double Delta, double sigma, Index T, double delta, Index d,
                                                  ScaledPolyDecay poly, std::uint64_t seed) {
  if (T < 2) throw std::invalid_argument("noise instance: T must be at least 2");
  require_positive(L, "L");
  require_positive(poly.a, "a");
  if (!(poly.b >= 0.0)) throw std::invalid_argument("b must be non-negative");
  std::vector<double> steps;
  for (Index t = 1; t < T; ++t)
    steps.push_back(poly.a / (L * (poly.b + std::pow(static_cast<double>(t), poly.theta))));
  if (!(poly.theta > 0.0 && poly.theta < 1.0))
    return build_quadratic_noise_instance(L, Delta, sigma, T, delta, d, std::move(steps), seed);
  InstanceParams params;
  params.L = L;
  params.Delta = Delta;
  params.sigma = sigma;
  params.T = T;
  params.delta = delta;
  params.d = d;
  params.steps = std::move(steps);
  params.poly = poly;
  const double eta_T = poly.a / (L * (poly.b + std::pow(static_cast<double>(T), poly.theta)));
  return noise_instance(TheoremId::prop_noise_poly, std::move(params),
                        {{"eta_T", eta_T}, {"scale", sigma * sigma * std::min(1.0, L * eta_T)}}, seed);
}

std::vector<Trajectory> run_replications(const LowerBoundInstance& inst, Index replications, std::uint64_t base_seed,
                                         Recording recording) {
  const StepSchedule schedule = inst.schedule();
  const AggregationRule agg = inst.aggregation();
  RunOptions options;
  options.recording = recording;
  options.tracked_coordinates = {0};
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(replications));
  for (Index r = 0; r < replications; ++r) {
    const NoiseModel noise = inst.noise.with_seed(replication_seed(base_seed, static_cast<std::uint64_t>(r)));
    out.push_back(run(inst.objective, inst.x1, inst.params.T, schedule, noise, agg, options));
  }
  return out;
}

namespace {

BoundReport frequency_report(const std::string& name, double threshold, double delta,
                             std::span<const Trajectory> batch) {
  Index hits = 0;
  for (const Trajectory& tr : batch)
    if (tr.criteria.min_grad_norm_sq() >= threshold) ++hits;
  const auto n = static_cast<Index>(batch.size());
  const double freq = static_cast<double>(hits) / static_cast<double>(n);
  auto r = make_report(name, 1.0 - delta, freq, n, BoundSense::lower, 0.0, 3.0 * binomial_se(delta, n));
  r.note = "threshold " + std::to_string(threshold);
  return r;
}

}  // namespace

VerificationReport verify_distance_instance(const LowerBoundInstance& inst, std::span<const Trajectory> batch) {
  if (inst.theorem != TheoremId::prop_distance) throw std::invalid_argument("not a distance instance");
  if (batch.empty()) throw std::invalid_argument("verify_distance_instance: empty batch");
  for (const Trajectory& tr : batch) require_trajectory(inst, tr, false);
  return {frequency_report("min_grad_sq_high_probability", inst.predict("bound"), inst.params.delta, batch)};
}

VerificationReport verify_noise_instance(const LowerBoundInstance& inst, std::span<const Trajectory> batch) {
  const auto& p = inst.params;
  if (inst.theorem != TheoremId::prop_noise_const && inst.theorem != TheoremId::prop_noise_floor &&
      inst.theorem != TheoremId::prop_noise_poly)
    throw std::invalid_argument("not a noise instance");
  if (batch.size() < 2) throw std::invalid_argument("verify_noise_instance: need at least two replications");
  for (const Trajectory& tr : batch) {
    require_trajectory(inst, tr, false);
    if (tr.tracked.cols() < 1) throw std::invalid_argument("verify_noise_instance: coordinate 0 must be tracked");
  }
  const auto n = static_cast<Index>(batch.size());
  VerificationReport out;
  switch (inst.theorem) {
    case TheoremId::prop_noise_const:
      out.push_back(frequency_report("min_grad_sq_high_probability", inst.predict("bound"), p.delta, batch));
      break;
    case TheoremId::prop_noise_floor:
      out.push_back(frequency_report("min_grad_sq_high_probability", inst.predict("bound_effective"), p.delta, batch));
      break;
    default: {
      std::vector<double> ratios;
      for (const Trajectory& tr : batch) ratios.push_back(tr.criteria.min_grad_norm_sq() / inst.predict("scale"));
      std::sort(ratios.begin(), ratios.end());
      const auto q = static_cast<std::size_t>(std::floor(p.delta * static_cast<double>(n)));
      auto r = make_report("empirical_constant", 0.0, ratios[std::min(q, ratios.size() - 1)], n,
                           BoundSense::informational);
      r.note = "delta-quantile of min_grad_sq / (sigma^2 min{1, L eta_T})";
      out.push_back(r);
      break;
    }
  }

  const auto mean_factor = noise_mean_factor(p.L, p.steps);
  const auto gamma = noise_variance_mass(p.L, p.sigma, p.steps);
  const double x1 = inst.x1[0];
  double worst_mean = 0.0, worst_var = 0.0;
  const auto nd = static_cast<double>(n);
  for (Index t = 0; t < p.T; ++t) {
    double mean = 0.0;
    for (const Trajectory& tr : batch) mean += tr.tracked(t, 0);
    mean /= nd;
    double var = 0.0;
    for (const Trajectory& tr : batch) var += (tr.tracked(t, 0) - mean) * (tr.tracked(t, 0) - mean);
    var /= nd - 1.0;
    const double pred_mean = mean_factor[static_cast<std::size_t>(t)] * x1;
    const double pred_var = gamma[static_cast<std::size_t>(t)] / static_cast<double>(p.d);
    const double exact_tol = 1e-12 * (1.0 + std::abs(pred_mean));
    const double se_mean = std::sqrt(pred_var / nd);
    const double se_var = pred_var * std::sqrt(2.0 / (nd - 1.0));
    auto zscore = [&](double diff, double se) {
      if (std::abs(diff) <= exact_tol) return 0.0;
      return se > 0.0 ? std::abs(diff) / se : std::numeric_limits<double>::infinity();
    };
    worst_mean = std::max(worst_mean, zscore(mean - pred_mean, se_mean));
    worst_var = std::max(worst_var, zscore(var - pred_var, se_var));
  }
  auto rm = make_report("first_coordinate_mean_zscore", 5.0, worst_mean, n, BoundSense::upper);
  rm.note = "max over t of |empirical - closed form| / SE";
  out.push_back(rm);
  auto rv = make_report("first_coordinate_variance_zscore", 5.0, worst_var, n, BoundSense::upper);
  rv.note = rm.note;
  out.push_back(rv);
  return out;
}

BoundReport verify_concentration(double M, double varmass, Index d, double eps, Index samples, std::uint64_t seed) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("concentration: eps must lie in (0, 1)");
  if (d < 1) throw std::invalid_argument("concentration: d must be at least 1");
  if (samples < 1000) throw std::invalid_argument("concentration: at least 1000 samples are required");
  if (!(M >= 0.0)) throw std::invalid_argument("concentration: M must be non-negative");
  require_positive(varmass, "varmass");
  auto gen = make_stream(seed, 0);
  std::normal_distribution<double> normal(0.0, std::sqrt(varmass / static_cast<double>(d)));
  const double center = std::sqrt(M);
  Index failures = 0;
  for (Index s = 0; s < samples; ++s) {
    double norm2 = 0.0;
    for (Index i = 0; i < d; ++i) {
      const double x = normal(gen) + (i == 0 ? center : 0.0);
      norm2 += x * x;
    }
    if (std::abs(norm2 / (M + varmass) - 1.0) > eps) ++failures;
  }
  const double bound = concentration_failure_bound(d, eps);
  const double freq = static_cast<double>(failures) / static_cast<double>(samples);
  auto r = make_report("concentration_failure_rate", bound, freq, samples, BoundSense::upper, 0.0,
                       3.0 * binomial_se(bound, samples));
  r.note = std::to_string(failures) + " failures";
  return r;
}

DeterministicMethod DeterministicMethod::gd_uniform(double eta, Index T) {
  return {"gd_uniform", StepSchedule::constant(eta), AggregationRule::uniform(T)};
}

DeterministicMethod DeterministicMethod::gd_last(double eta, Index T) {
  return {"gd_last", StepSchedule::constant(eta), AggregationRule::last_iterate(T)};
}

DeterministicMethod DeterministicMethod::identity(Index T) {
  return {"identity", StepSchedule::constant(0.0), AggregationRule::last_iterate(T)};
}

namespace {

double output_on(const Objective& obj, const DeterministicMethod& method, Index T, double x1) {
  RunOptions options;
  options.recording = method.schedule.adaptive() ? Recording::full : Recording::summary;
  const Trajectory tr =
      run(obj, Vector::Constant(1, x1), T, method.schedule, NoiseModel::none(), method.aggregation, options);
  return tr.x_out ? (*tr.x_out)[0] : tr.last_iterate[0];
}

}  // namespace

double method_output(const DeterministicMethod& method, Index T, double x1) {
  static const Objective sigmoid = Objective::embedded(1, 0, make_sigmoid<double>());
  return output_on(sigmoid, method, T, x1);
}

ImpossibilityResult fixed_point_impossibility_demo(const DeterministicMethod& method, Index T) {
  if (T < 1) throw std::invalid_argument("impossibility demo: T must be positive");
  // Determinism and bounded displacement under zero gradients.
  for (double probe : {-3.0, 0.25, 7.0}) {
    const double a = method_output(method, T, probe);
    const double b = method_output(method, T, probe);
    if (std::memcmp(&a, &b, sizeof a) != 0)
      throw std::domain_error("impossibility demo: method '" + method.name + "' is not deterministic");
  }
  const Objective flat = Objective::embedded(1, 0, make_zero_function<double>());
  double displacement = 0.0;
  for (double probe : {-1e3, 0.0, 1e3}) displacement = std::max(displacement, std::abs(output_on(flat, method, T, probe) - probe));
  if (!std::isfinite(displacement) || displacement > 1e5)
    throw std::domain_error("impossibility demo: displacement under zero gradients is not bounded");

  double B = 1.0;
  double lo_val = method_output(method, T, -B), hi_val = method_output(method, T, B);
  while (!(lo_val <= 0.0 && hi_val >= 0.0) && !(lo_val >= 0.0 && hi_val <= 0.0)) {
    B *= 2.0;
    if (B > 1e6) throw std::domain_error("impossibility demo: no sign change of x_out within |x_1| <= 1e6");
    lo_val = method_output(method, T, -B);
    hi_val = method_output(method, T, B);
  }
  double lo = -B, hi = B;
  if (lo_val > 0.0) {
    std::swap(lo, hi);
    std::swap(lo_val, hi_val);
  }
  // now x_out(lo) <= 0 <= x_out(hi)
  ImpossibilityResult res;
  res.x1_star = std::abs(lo_val) <= std::abs(hi_val) ? lo : hi;
  res.x_out = std::abs(lo_val) <= std::abs(hi_val) ? lo_val : hi_val;
  Index steps = 0;
  while (std::abs(res.x_out) > 1e-9 && steps < 400) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double v = method_output(method, T, mid);
    if (v <= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (std::abs(v) < std::abs(res.x_out)) {
      res.x1_star = mid;
      res.x_out = v;
    }
    ++steps;
  }
  if (std::abs(res.x_out) > 1e-9)
    throw ToleranceError("impossibility demo: bisection stalled at |x_out| = " + std::to_string(std::abs(res.x_out)));
  res.bisection_steps = steps;
  res.bracket = std::abs(hi - lo);
  res.grad_at_out = std::abs(eval(make_sigmoid<double>(), res.x_out, 1));
  return res;
}

std::vector<DimensionSweepRow> infdim_dimension_sweep(const DeterministicMethod& method, Index T, double sigma,
                                                      std::span<const Index> dims, Index replications,
                                                      std::uint64_t seed) {
  require_positive(sigma, "sigma");
  if (replications < 1) throw std::invalid_argument("dimension sweep: replications must be positive");
  const double x1_star = fixed_point_impossibility_demo(method, T).x1_star;
  std::vector<DimensionSweepRow> rows;
  for (Index d : dims) {
    if (d < 1) throw std::invalid_argument("dimension sweep: dimensions must be positive");
    const Objective obj = Objective::embedded(d, 0, make_sigmoid<double>());
    Vector x1 = Vector::Zero(d);
    x1[0] = x1_star;
    RunOptions options;
    options.recording = Recording::summary;
    options.tracked_coordinates = {0};
    const Trajectory ref = run(obj, x1, T, method.schedule, NoiseModel::none(), method.aggregation, options);
    DimensionSweepRow row;
    row.d = d;
    for (Index r = 0; r < replications; ++r) {
      const auto s = replication_seed(seed ^ static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(r));
      const Trajectory tr = run(obj, x1, T, method.schedule, NoiseModel::gaussian(sigma, s), method.aggregation, options);
      row.mean_max_deviation += (tr.tracked.col(0) - ref.tracked.col(0)).cwiseAbs().maxCoeff();
      row.mean_grad_at_out += tr.criteria.grad_norm_at_out.value_or(tr.criteria.min_grad_norm);
    }
    row.mean_max_deviation /= static_cast<double>(replications);
    row.mean_grad_at_out /= static_cast<double>(replications);
    rows.push_back(row);
  }
  return rows;
}

StepRegime classify_regime(double L, Index T, std::span<const double> steps) {
  if (steps.empty()) throw std::invalid_argument("classify_regime: no steps");
  const double rootT = std::sqrt(static_cast<double>(T));
  const bool constant = std::all_of(steps.begin(), steps.end(), [&](double e) { return e == steps.front(); });
  if (constant && L * steps.front() >= 1.0) return StepRegime::large_constant;
  if (constant && L * steps.front() * rootT >= 1.0) return StepRegime::moderate_constant;
  return StepRegime::small_sum;
}

std::vector<double> sgdlow_chain(StepRegime regime, double L, double Delta, double sigma, Index T,
                                 std::span<const double> steps) {
  require_positive(L, "L");
  require_positive(Delta, "Delta");
  require_positive(sigma, "sigma");
  if (T < 2 || static_cast<Index>(steps.size()) != T - 1)
    throw std::invalid_argument("sgdlow_chain: expected T - 1 steps with T >= 2");
  const double rootT = std::sqrt(static_cast<double>(T));
  const double floor = std::min(L * Delta, sigma * sigma);
  switch (regime) {
    case StepRegime::small_sum: {
      const double total = sum(steps);
      const double c = L * total / rootT;
      return {Delta / (25.0 * std::max(1.0 / L, total)), L * Delta / (25.0 * std::max(1.0, c * rootT)),
              floor / (25.0 * std::max(1.0, c) * rootT)};
    }
    case StepRegime::moderate_constant: {
      const double eta = steps.front();
      if (!(L * eta * rootT >= 1.0 && L * eta < 1.0))
        throw std::invalid_argument("sgdlow_chain: moderate regime needs 1/(L sqrt T) <= eta < 1/L");
      const double inv = 1.0 / rootT;
      return {L / 2.0 * std::min(Delta, eta * sigma * sigma / (2.0 - L * eta)),
              0.5 * std::min(L * Delta, sigma * sigma * inv / (2.0 - inv)), 0.5 * floor / (2.0 * rootT - 1.0)};
    }
    case StepRegime::large_constant: {
      const double c = L * steps.front();
      if (c < 1.0) throw std::invalid_argument("sgdlow_chain: large regime needs eta >= 1/L");
      return {sigma * sigma * c * c / 2.0, sigma * sigma / 2.0, 0.5 * floor / (2.0 * rootT - 1.0)};
    }
  }
  throw std::logic_error("sgdlow_chain: unknown regime");
}

}  // namespace sgdlb
