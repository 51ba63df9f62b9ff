#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sgdlb/instances.hpp"

using namespace sgdlb;

namespace {

const BoundReport& find(const VerificationReport& reports, const std::string& name) {
  for (const auto& r : reports)
    if (r.name == name) return r;
  throw std::runtime_error("missing report " + name);
}

Trajectory simulate(const LowerBoundInstance& inst, std::uint64_t seed) {
  return run(inst.objective, inst.x1, inst.params.T, inst.schedule(), inst.noise.with_seed(seed), inst.aggregation());
}

std::vector<double> uniform_steps(std::mt19937_64& gen, Index count, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> out;
  for (Index i = 0; i < count; ++i) out.push_back(u(gen));
  return out;
}

std::vector<double> random_weights(std::mt19937_64& gen, Index T, bool allow_negative) {
  std::uniform_real_distribution<double> u(allow_negative ? -1.0 : 0.0, 1.0);
  std::vector<double> w;
  double total = 0.0;
  for (Index i = 0; i < T; ++i) total += w.emplace_back(u(gen));
  if (std::abs(total) < 0.1) {
    w.back() += 1.0;
    total += 1.0;
  }
  for (double& x : w) x /= total;
  return w;
}

}  // namespace

TEST(ClosedForms, Examples) {
  EXPECT_NEAR(aggregation_gamma_sq(1, 1, 1, 2), (std::sqrt(73.0) - 3) / 16, 1e-15);
  EXPECT_NEAR(aggregation_gamma_sq(1, 1, 1, 2), 0.34650, 1e-5);
  EXPECT_NEAR(aggregation_gamma_sq(1, 1, 1, 100), (std::sqrt(6345.0) - 3) / 1584, 1e-15);
  EXPECT_NEAR(hessian_gamma_sq(1, 1, 1, 2), 3.0 / 32 * std::cbrt(256.0), 1e-15);
  EXPECT_NEAR(hessian_gamma_sq(1, 1, 1, 2), 0.59528, 1e-5);
  for (Index T : {2, 10, 1000}) EXPECT_GE(hessian_gamma_sq(2, 3, 0.5, T), hessian_predicted_bound(2, 3, 0.5, T));
  EXPECT_EQ(std::ceil(noise_d0(100, 0.01)), 1018.0);
  EXPECT_NEAR(concentration_failure_bound(1000, 0.5), 4 * std::exp(-125.0 / 12), 1e-18);
  EXPECT_NEAR(concentration_failure_bound(1000, 0.5), 1.19e-4, 1e-6);
  const std::vector<double> steps{0.5, 0.25};
  EXPECT_EQ(distance_scale(1.0, steps), 1.0);
  EXPECT_EQ(distance_scale(0.5, steps), 2.0);
  EXPECT_EQ(noise_mean_factor(1.0, steps), (std::vector<double>{1.0, 0.5, 0.375}));
  const auto gamma = noise_variance_mass(1.0, 2.0, steps);
  ASSERT_EQ(gamma.size(), 3u);
  EXPECT_EQ(gamma[0], 0.0);
  EXPECT_NEAR(gamma[1], 4 * 0.25, 1e-15);
  EXPECT_NEAR(gamma[2], 4 * (0.25 * 0.75 * 0.75 + 0.0625), 1e-15);
}

TEST(ClosedForms, AggregationAsymptotics) {
  for (Index T : {10000, 100000, 1000000}) {
    const double ratio = aggregation_gamma_sq(1, 1, 1, T) / (0.5 * std::sqrt(1.0 / static_cast<double>(T - 1)));
    EXPECT_NEAR(ratio, 1.0, 0.05) << T;
  }
}

TEST(TheoremIds, RoundTrip) {
  for (auto id : {TheoremId::infdim, TheoremId::aggregation_step, TheoremId::nonconvex_hessian, TheoremId::prop_distance,
                  TheoremId::prop_noise_const, TheoremId::prop_noise_floor, TheoremId::prop_noise_poly})
    EXPECT_EQ(theorem_from_string(to_string(id)), id);
  EXPECT_FALSE(theorem_from_string("nope"));
}

TEST(Aggregation, ExactGradientProperty) {
  std::mt19937_64 gen(21);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::uniform_int_distribution<Index> Td(2, 12);
    const Index T = Td(gen);
    const double L = 0.5 + seed % 3, Delta = 1.0 + seed % 2, sigma = 0.5 + 0.25 * (seed % 4);
    auto inst = build_aggregation_instance(L, Delta, sigma, T, uniform_steps(gen, T - 1, 0.0, 1.0 / L),
                                           random_weights(gen, T, seed % 2 == 1), seed);
    const double G = inst.predict("G");
    EXPECT_DOUBLE_EQ(G * G, aggregation_gamma_sq(L, Delta, sigma, T));
    const auto traj = simulate(inst, seed);
    const auto reports = verify_aggregation_instance(inst, traj);
    EXPECT_TRUE(all_passed(reports)) << "seed " << seed;
    EXPECT_LE(find(reports, "gradient_constancy").empirical, 1e-12);
    for (const auto& g : traj.true_grads) EXPECT_LE((g - G * Vector::Unit(T, 0)).norm(), 1e-12);
    ASSERT_TRUE(traj.x_out);
    EXPECT_LE((gradient(inst.objective, *traj.x_out) - G * Vector::Unit(T, 0)).norm(), 1e-12);
  }
}

TEST(Aggregation, OptimalStepMakesCertificateTight) {
  const double L = 1.0, Delta = 1.0, sigma = 1.0;
  for (Index T : {2, 10, 100}) {
    const double G2 = aggregation_gamma_sq(L, Delta, sigma, T);
    const double eta = 8 * G2 / (L * sigma * sigma);
    auto inst = build_aggregation_instance(L, Delta, sigma, T, std::vector<double>(T - 1, eta),
                                           std::vector<double>(T, 1.0 / T), 5);
    const auto r = find(verify_aggregation_instance(inst, simulate(inst, 5)), "suboptimality_certificate");
    EXPECT_NEAR(r.empirical / Delta, 1.0, 1e-6) << T;
  }
}

TEST(Aggregation, ZeroSteps) {
  auto inst = build_aggregation_instance(1, 1, 1, 6, std::vector<double>(5, 0.0), std::vector<double>(6, 1.0 / 6), 3);
  const auto traj = simulate(inst, 3);
  for (double v : traj.values) EXPECT_EQ(v, 0.0);
  const auto r = find(verify_aggregation_instance(inst, traj), "suboptimality_certificate");
  EXPECT_NEAR(r.empirical, 1.5 * aggregation_gamma_sq(1, 1, 1, 6), 1e-15);
  EXPECT_TRUE(r.passed());
}

TEST(Aggregation, ClosedFormIteratesCoverSimulation) {
  std::mt19937_64 gen(22);
  const Index T = 5;
  auto inst = build_aggregation_instance(1.0, 1.0, 1.0, T, uniform_steps(gen, T - 1, 0.0, 1.0), random_weights(gen, T, false));
  const auto traj = simulate(inst, 9);
  int matches = 0;
  for (const auto& signs : all_sign_patterns(T - 1)) {
    const auto xs = closed_form_iterates(inst, signs);
    bool same = true;
    for (Index t = 0; t < T; ++t) same &= (xs[static_cast<std::size_t>(t)] - traj.iterates[static_cast<std::size_t>(t)]).norm() <= 1e-14;
    matches += same;
  }
  EXPECT_EQ(matches, 1);
  EXPECT_EQ(all_sign_patterns(3).size(), 8u);
}

TEST(Aggregation, BetaFeasibility) {
  std::mt19937_64 gen(23);
  for (Index T : {2, 5, 9}) {
    auto inst = build_aggregation_instance(1.0, 1.0, 1.0, T, uniform_steps(gen, T - 1, 0.0, 1.0), random_weights(gen, T, false));
    const auto reports = verify_beta_feasibility(inst);
    EXPECT_TRUE(all_passed(reports)) << T;
    EXPECT_EQ(find(reports, "beta_range_nonempty").replications, Index{1} << (T - 1));
  }
  auto big = build_aggregation_instance(1.0, 1.0, 1.0, 20, uniform_steps(gen, 19, 0.0, 1.0), random_weights(gen, 20, false));
  BetaCheck sampled;
  sampled.samples = 200;
  const auto reports = verify_beta_feasibility(big, sampled);
  EXPECT_TRUE(all_passed(reports));
  EXPECT_EQ(find(reports, "beta_range_nonempty").replications, 200);
}

TEST(Aggregation, InputErrors) {
  EXPECT_THROW(build_aggregation_instance(1, 1, 1, 1, {}, {1.0}), std::invalid_argument);
  EXPECT_THROW(build_aggregation_instance(1, 1, 1, 3, {0.1}, {0.5, 0.5, 0.0}), std::invalid_argument);
  EXPECT_THROW(build_aggregation_instance(1, 1, 1, 3, {0.1, 0.1}, {0.5, 0.5}), std::invalid_argument);
}

TEST(Hessian, ZeroCurvatureAndValueDrop) {
  std::mt19937_64 gen(24);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Index T = 2 + static_cast<Index>(seed % 15);
    const double rho = 0.5 + seed % 3, Delta = 1.0, sigma = 1.0 + seed % 2;
    // Any non-negative steps, including large ones.
    auto inst = build_hessian_instance(rho, Delta, sigma, T, uniform_steps(gen, T - 1, 0.0, 5.0), seed);
    const auto traj = simulate(inst, seed);
    const auto reports = verify_hessian_instance(inst, traj);
    EXPECT_TRUE(all_passed(reports)) << "seed " << seed;
    EXPECT_EQ(find(reports, "bump_curvature_at_iterates").empirical, 0.0);
    EXPECT_NEAR(inst.predict("G") * inst.predict("G"), hessian_gamma_sq(rho, Delta, sigma, T), 1e-15);
  }
  EXPECT_THROW(build_hessian_instance(1, 1, 1, 1, {}), std::invalid_argument);
}

TEST(Distance, ExamplesAndErrors) {
  const double L = 1.0, Delta = 1.0, sigma = 1.0, delta = 0.1;
  const Index T = 5;
  const std::vector<double> steps(4, 0.25);
  const double d0 = distance_d0(L, Delta, sigma, T, delta, 1.0);
  const auto d = static_cast<Index>(std::ceil(d0));
  auto inst = build_quadratic_distance_instance(L, Delta, sigma, T, delta, d, steps, 1);
  EXPECT_NEAR(inst.predict("bound"), 0.04, 1e-16);
  EXPECT_THROW(build_quadratic_distance_instance(L, Delta, sigma, T, delta, d - 1, steps, 1), std::invalid_argument);
  EXPECT_THROW(build_quadratic_distance_instance(L, Delta, sigma, T, delta, d, {0.25, 0.25, 0.25, 1.5}, 1),
               std::invalid_argument);

  // Gradient norm identity and the noiseless first coordinate.
  const Vector x = Vector::Unit(d, 0) * 0.3 + Vector::Unit(d, 1);
  EXPECT_NEAR(gradient(inst.objective, x).norm(), 0.3 / 2.0, 1e-16);
  const auto clean = run(inst.objective, inst.x1, T, inst.schedule(), NoiseModel::none());
  double expected = inst.x1[0];
  for (Index t = 0; t < T; ++t) {
    EXPECT_NEAR(clean.iterates[static_cast<std::size_t>(t)][0], expected, 1e-15);
    EXPECT_GE(clean.iterates[static_cast<std::size_t>(t)][0], inst.x1[0] / 2);
    if (t < T - 1) expected *= 1 - steps[static_cast<std::size_t>(t)] / 2.0;
  }
}

TEST(Distance, FrequencyBound) {
  const double L = 1.0, Delta = 1.0, sigma = 1.0, delta = 0.1;
  const Index T = 64;
  const std::vector<double> steps(T - 1, 1.0 / (L * std::sqrt(64.0)));
  const double d0 = distance_d0(L, Delta, sigma, T, delta, distance_scale(L, steps));
  auto inst = build_quadratic_distance_instance(L, Delta, sigma, T, delta, static_cast<Index>(std::ceil(d0)), steps, 2);
  const auto batch = run_replications(inst, 200, 2);
  const auto reports = verify_distance_instance(inst, batch);
  EXPECT_TRUE(all_passed(reports));
  EXPECT_GE(reports.front().empirical, 1 - delta);
}

TEST(Noise, ConstantCase) {
  const Index T = 64;
  const auto d = static_cast<Index>(std::ceil(noise_d0(T, 0.1)));
  auto inst = build_quadratic_noise_instance(1, 1, 1, T, 0.1, d, std::vector<double>(T - 1, 0.5), 4);
  EXPECT_EQ(inst.theorem, TheoremId::prop_noise_const);
  EXPECT_NEAR(inst.predict("bound"), 1.0 / 6, 1e-16);
  const auto batch = run_replications(inst, 200, 4);
  const auto reports = verify_noise_instance(inst, batch);
  EXPECT_TRUE(all_passed(reports));
  EXPECT_LE(find(reports, "first_coordinate_mean_zscore").empirical, 5.0);
  EXPECT_LE(find(reports, "first_coordinate_variance_zscore").empirical, 5.0);
}

TEST(Noise, FloorCase) {
  const Index T = 20;
  const auto d = static_cast<Index>(std::ceil(noise_d0(T, 0.1)));
  std::vector<double> steps(T - 1, 1.0);
  steps[3] = 1.5;
  auto inst = build_quadratic_noise_instance(1, 1, 1, T, 0.1, d, steps, 5);
  EXPECT_EQ(inst.theorem, TheoremId::prop_noise_floor);
  EXPECT_EQ(inst.predict("bound"), 0.5);
  EXPECT_EQ(inst.predict("bound_effective"), 0.5);
  EXPECT_TRUE(all_passed(verify_noise_instance(inst, run_replications(inst, 200, 5))));
}

TEST(Noise, PolyCase) {
  const Index T = 64;
  const auto d = static_cast<Index>(std::ceil(noise_d0(T, 0.1)));
  auto inst = build_quadratic_noise_instance(1, 1, 1, T, 0.1, d, ScaledPolyDecay{0.5, 1.0, 0.5}, 6);
  EXPECT_EQ(inst.theorem, TheoremId::prop_noise_poly);
  EXPECT_NEAR(inst.predict("eta_T"), 0.5 / 9.0, 1e-16);
  const auto reports = verify_noise_instance(inst, run_replications(inst, 200, 6));
  EXPECT_TRUE(all_passed(reports));
  EXPECT_GT(find(reports, "empirical_constant").empirical, 0.0);
}

TEST(Noise, Errors) {
  EXPECT_THROW(build_quadratic_noise_instance(1, 1, 1, 100, 0.01, 1017, std::vector<double>(99, 0.5)), std::invalid_argument);
  std::vector<double> steps(9, 0.5);
  steps[2] = 0.0;
  EXPECT_THROW(build_quadratic_noise_instance(1, 1, 1, 10, 0.1, 1000, steps), std::invalid_argument);
}

TEST(Concentration, Examples) {
  const auto r = verify_concentration(1.0, 1.0, 1000, 0.5, 20000, 7);
  EXPECT_TRUE(r.passed());
  EXPECT_NEAR(r.theoretical, 4 * std::exp(-125.0 / 12), 1e-18);
  EXPECT_TRUE(verify_concentration(0.0, 2.0, 500, 0.5, 2000, 8).passed());
  EXPECT_EQ(verify_concentration(3.0, 1.0, 2000, 0.99, 1000, 9).empirical, 0.0);
  EXPECT_THROW(verify_concentration(1, 1, 10, 1.0, 1000, 1), std::invalid_argument);
  EXPECT_THROW(verify_concentration(1, 1, 10, 0.5, 999, 1), std::invalid_argument);
}

TEST(SgdLow, ChainsAreNonIncreasing) {
  std::mt19937_64 gen(25);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  const auto non_increasing = [](const std::vector<double>& chain) {
    for (std::size_t i = 1; i < chain.size(); ++i)
      if (chain[i] > chain[i - 1] * (1 + 1e-12)) return false;
    return true;
  };
  for (int k = 0; k < 300; ++k) {
    const double L = u(gen), Delta = u(gen), sigma = u(gen);
    const Index T = 2 + k % 500;
    const double rootT = std::sqrt(static_cast<double>(T));
    // small: varying steps with sum 0.9 sqrt(T)/L
    auto small = std::vector<double>(T - 1);
    double total = 0.0;
    for (Index t = 0; t < T - 1; ++t) total += small[static_cast<std::size_t>(t)] = 1.0 + u(gen);
    for (double& e : small) e *= 0.9 * rootT / (L * total);
    if (T > 2) EXPECT_EQ(classify_regime(L, T, small), StepRegime::small_sum);
    EXPECT_TRUE(non_increasing(sgdlow_chain(StepRegime::small_sum, L, Delta, sigma, T, small)));
    const auto moderate = std::vector<double>(T - 1, (1.0 / rootT + 0.5 * (1 - 1.0 / rootT)) / L);
    EXPECT_EQ(classify_regime(L, T, moderate), StepRegime::moderate_constant);
    EXPECT_TRUE(non_increasing(sgdlow_chain(StepRegime::moderate_constant, L, Delta, sigma, T, moderate)));
    const auto large = std::vector<double>(T - 1, (1.0 + u(gen)) / L);
    EXPECT_EQ(classify_regime(L, T, large), StepRegime::large_constant);
    EXPECT_TRUE(non_increasing(sgdlow_chain(StepRegime::large_constant, L, Delta, sigma, T, large)));
    EXPECT_THROW(sgdlow_chain(StepRegime::large_constant, L, Delta, sigma, T, moderate), std::invalid_argument);
  }
  // Last link of every chain is the min{L Delta, sigma^2}/sqrt(T)-type rate.
  const auto chain = sgdlow_chain(StepRegime::small_sum, 1, 1, 1, 100, std::vector<double>(99, 0.05));
  EXPECT_NEAR(chain.back(), 1.0 / (25 * 10), 1e-15);
}

TEST(SgdLow, ChainsLowerBoundSimulation) {
  // Noise instance at the moderate constant step: the simulated min-grad^2
  // clears the chain's final link in most replications.
  const Index T = 64;
  const double eta = 0.5;
  const auto d = static_cast<Index>(std::ceil(noise_d0(T, 0.1)));
  auto inst = build_quadratic_noise_instance(1, 1, 1, T, 0.1, d, std::vector<double>(T - 1, eta), 10);
  const double floor = sgdlow_chain(StepRegime::moderate_constant, 1, 1, 1, T, inst.params.steps).back();
  Index hits = 0;
  const auto batch = run_replications(inst, 100, 10);
  for (const auto& tr : batch) hits += tr.criteria.min_grad_norm_sq() >= floor;
  EXPECT_GE(hits, 90);
}

TEST(Impossibility, Identity) {
  const auto r = fixed_point_impossibility_demo(DeterministicMethod::identity(10), 10);
  EXPECT_EQ(r.x1_star, 0.0);
  EXPECT_EQ(r.grad_at_out, 1.0);
}

TEST(Impossibility, GdUniform) {
  const auto r = fixed_point_impossibility_demo(DeterministicMethod::gd_uniform(0.1, 50), 50);
  EXPECT_LE(std::abs(r.x_out), 1e-9);
  EXPECT_GE(r.grad_at_out, 0.5);
  EXPECT_NEAR(method_output(DeterministicMethod::gd_uniform(0.1, 50), 50, r.x1_star), r.x_out, 1e-15);
}

TEST(Impossibility, LastIterateGdIsMonotone) {
  const auto gd = DeterministicMethod::gd_last(0.5, 20);
  for (double x1 : {1.0, 1.5, 7.0}) EXPECT_EQ(method_output(gd, 20, x1), x1);
  double prev = -std::numeric_limits<double>::infinity();
  for (double x1 = -3.0; x1 <= 3.0; x1 += 0.01) {
    const double out = method_output(gd, 20, x1);
    EXPECT_GE(out, prev - 1e-15);
    prev = out;
  }
}

TEST(Impossibility, DimensionSweepShrinksDeviation) {
  const std::vector<Index> dims{1, 10, 100, 1000};
  const auto rows = infdim_dimension_sweep(DeterministicMethod::gd_uniform(0.1, 30), 30, 1.0, dims, 40, 11);
  ASSERT_EQ(rows.size(), dims.size());
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i].mean_max_deviation, rows[i - 1].mean_max_deviation);
  EXPECT_GE(rows.back().mean_grad_at_out, 0.5);
}
