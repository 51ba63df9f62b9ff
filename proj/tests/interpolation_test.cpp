#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "interpolation_fixtures.hpp"

using namespace sgdlb;

namespace {

using fixtures::Set;
using fixtures::Triple;
using fixtures::gaussian;
using fixtures::inner_objective;
using fixtures::random_function;
using fixtures::random_interpolable_set;
using fixtures::sample_set;
using fixtures::simplex_grid_oracle;
constexpr auto convex = InterpolationMode::convex;
constexpr auto nonconvex = InterpolationMode::nonconvex;

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(Checkers, ConvexExamples) {
  const double L = 2.0;
  const Set q({{vec({0}), vec({0}), 0.0}, {vec({1}), vec({L}), L / 2}}, L);
  const auto r = check_convex_interpolable(q);
  EXPECT_TRUE(r.ok);
  EXPECT_NEAR(interpolation_slack(q, 1, 0, convex), 0.0, 1e-15);
  EXPECT_NEAR(r.min_slack, 0.0, 1e-15);

  EXPECT_TRUE(check_convex_interpolable(Set({{vec({1, 2}), vec({3, 4}), 5.0}}, L)).ok);

  const Vector v = vec({0.6, -0.8});
  const Set bad({{vec({0, 0}), vec({0, 0}), 0.0}, {vec({0, 0}), v, 0.0}}, L);
  const auto rb = check_convex_interpolable(bad);
  EXPECT_FALSE(rb.ok);
  ASSERT_EQ(rb.violations.size(), 2u);
  for (const auto& pv : rb.violations) EXPECT_NEAR(pv.slack, -v.squaredNorm() / (2 * L), 1e-15);
}

TEST(Checkers, NonconvexExamples) {
  const double L = 1.5;
  const Set concave({{vec({0}), vec({0}), 0.0}, {vec({1}), vec({-L}), -L / 2}}, L);
  EXPECT_TRUE(check_nonconvex_interpolable(concave).ok);
  EXPECT_FALSE(check_convex_interpolable(concave).ok);

  const Vector v = vec({1.0, 2.0});
  const Set bad({{vec({0, 0}), vec({0, 0}), 0.0}, {vec({0, 0}), v, 0.0}}, L);
  const auto r = check_nonconvex_interpolable(bad);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.violations.size(), 2u);
  for (const auto& pv : r.violations) EXPECT_NEAR(pv.slack, -v.squaredNorm() / (4 * L), 1e-15);
}

TEST(Checkers, ConvexImpliesNonconvex) {
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<Index> Td(1, 6), dd(1, 4);
  int convex_ok = 0;
  for (int k = 0; k < 1000; ++k) {
    const Index T = Td(gen), d = dd(gen);
    std::vector<Triple> triples;
    for (Index t = 0; t < T; ++t) triples.push_back({gaussian(gen, d), gaussian(gen, d, 0.3), gaussian(gen, 1)[0]});
    const Set arbitrary(triples, 2.0);
    const Set smooth = random_interpolable_set(gen, true);
    for (const Set* S : {&arbitrary, &smooth}) {
      if (!check_convex_interpolable(*S).ok) continue;
      ++convex_ok;
      EXPECT_TRUE(check_nonconvex_interpolable(*S).ok);
    }
  }
  EXPECT_GE(convex_ok, 1000);
}

TEST(Checkers, SampledFunctionsAreInterpolable) {
  std::mt19937_64 gen(2);
  for (int k = 0; k < 200; ++k) {
    EXPECT_TRUE(check_convex_interpolable(random_interpolable_set(gen, true)).ok);
    EXPECT_TRUE(check_nonconvex_interpolable(random_interpolable_set(gen, false)).ok);
  }
}

TEST(Simplex, Projection) {
  std::mt19937_64 gen(3);
  for (int k = 0; k < 200; ++k) {
    const Vector v = gaussian(gen, 1 + k % 7, 2.0);
    const Vector p = project_onto_simplex(v);
    EXPECT_NEAR(p.sum(), 1.0, 1e-14);
    EXPECT_GE(p.minCoeff(), 0.0);
    // Optimality: <v - p, q - p> <= 0 for every vertex q.
    for (Index i = 0; i < v.size(); ++i)
      EXPECT_LE((v - p).dot(Vector::Unit(v.size(), i) - p), 1e-12);
  }
  EXPECT_EQ(project_onto_simplex(vec({0.2, 0.3, 0.5})), vec({0.2, 0.3, 0.5}));
  EXPECT_EQ(project_onto_simplex(vec({5.0, 0.0})), vec({1.0, 0.0}));
}

TEST(Simplex, QpSolutionContract) {
  std::mt19937_64 gen(4);
  for (int k = 0; k < 300; ++k) {
    const Index n = 1 + k % 6;
    const Matrix B = gaussian(gen, n * (n + 1)).reshaped(n + 1, n);
    const Matrix Q = B.transpose() * B;
    const Vector q = gaussian(gen, n);
    const auto sol = solve_simplex_qp<double>(Q, q);
    ASSERT_TRUE(sol.converged);
    EXPECT_NEAR(sol.alpha.sum(), 1.0, 1e-10);
    EXPECT_GE(sol.alpha.minCoeff(), 0.0);
    EXPECT_LE(sol.kkt_residual, 1e-10);
    const double oracle =
        simplex_grid_oracle([&](const Vector& a) { return 0.5 * a.dot(Q * a) + q.dot(a); }, n, n <= 4 ? 40 : 12);
    EXPECT_NEAR(sol.objective_value, oracle, 1e-9 * (1 + std::abs(oracle)));
  }
  EXPECT_THROW(solve_simplex_qp<double>(Matrix::Identity(2, 2), Vector::Zero(3)), std::invalid_argument);
}

TEST(Interpolant, SingleTriple) {
  const double L = 3.0;
  const Set S({{vec({0, 0}), vec({0, 0}), 0.0}}, L);
  const BoundedInterpolant<double> W(S, convex);
  for (const Vector& y : {vec({1, 2}), vec({-0.5, 0.1})}) {
    const auto e = W.evaluate(y);
    EXPECT_NEAR(e.value, L / 2 * y.squaredNorm(), 1e-14);
    EXPECT_TRUE(e.gradient.isApprox(L * y, 1e-14));
  }
}

TEST(Interpolant, MinimumExamples) {
  const double L = 2.0;
  const Set one({{vec({1, -1}), vec({0, 0}), 5.0}}, L);
  const auto [x0, v0] = global_min_of_interpolant(one, convex);
  EXPECT_EQ(x0, vec({1, -1}));
  EXPECT_EQ(v0, 5.0);

  // {(0,0,1), (e1, L e1, 0)} fails the interpolability precondition.
  const Set two({{vec({0}), vec({0}), 1.0}, {vec({1}), vec({L}), 0.0}}, L);
  EXPECT_FALSE(check_nonconvex_interpolable(two).ok);
  EXPECT_THROW(global_min_of_interpolant(two, nonconvex), std::invalid_argument);

  // Two samples of (L/2) x^2 both point to the minimizer 0.
  const Set quad({{vec({1}), vec({L}), L / 2}, {vec({2}), vec({2 * L}), 2 * L}}, L);
  const auto [x1, v1] = global_min_of_interpolant(quad, convex);
  EXPECT_EQ(x1, vec({0}));
  EXPECT_EQ(v1, 0.0);
  EXPECT_NEAR(eval_bounded_interpolant(quad, x1, convex).value, 0.0, 1e-12);

  // Ties go to the lowest index.
  const Set tie({{vec({0}), vec({0}), 0.0}, {vec({3}), vec({0}), 0.0}}, L);
  EXPECT_EQ(BoundedInterpolant<double>(tie, convex).min_index(), 0);
}

TEST(Interpolant, AttainsLowerBoundAtMinimizer) {
  std::mt19937_64 gen(5);
  for (int k = 0; k < 200; ++k) {
    const bool is_convex = k % 2 == 0;
    const Set S = random_interpolable_set(gen, is_convex);
    const BoundedInterpolant<double> W(S, is_convex ? convex : nonconvex);
    const auto [xm, fm] = W.global_min();
    const Index j = W.min_index();
    EXPECT_NEAR(fm, S[j].f - S[j].g.squaredNorm() / (2 * S.L()), 1e-15 * (1 + std::abs(fm)));
    if (is_convex) EXPECT_NEAR(W.evaluate(xm).value, fm, 1e-8 * S.scale());
  }
}

TEST(Interpolant, RejectsNonInterpolableSets) {
  const Set bad({{vec({0}), vec({0}), 0.0}, {vec({0}), vec({1}), 0.0}}, 1.0);
  EXPECT_THROW(BoundedInterpolant<double>(bad, convex), std::invalid_argument);
  EXPECT_THROW(BoundedInterpolant<double>(bad, nonconvex), std::invalid_argument);
  EXPECT_THROW(Set({}, 1.0), std::invalid_argument);
  EXPECT_THROW(Set({{vec({0}), vec({0, 1}), 0.0}}, 1.0), std::invalid_argument);
}

TEST(Interpolant, FidelityLowerBoundAndSmoothness) {
  std::mt19937_64 gen(6);
  for (int k = 0; k < 300; ++k) {
    const bool is_convex = k % 2 == 0;
    const Set S = random_interpolable_set(gen, is_convex);
    const double L = S.L(), scale = S.scale();
    const BoundedInterpolant<double> W(S, is_convex ? convex : nonconvex);
    for (Index i = 0; i < S.size(); ++i) {
      const auto e = W.evaluate(S[i].x);
      EXPECT_LE(std::abs(e.value - S[i].f), 1e-8 * scale);
      EXPECT_LE((e.gradient - S[i].g).norm(), 1e-6 * scale);
    }
    const double floor = W.global_min().second;
    for (int p = 0; p < 10; ++p) {
      const Vector y = gaussian(gen, S.dim(), 3.0);
      const Vector y2 = y + gaussian(gen, S.dim(), 0.5);
      const auto a = W.evaluate(y), b = W.evaluate(y2);
      EXPECT_GE(a.value, floor - 1e-8);
      EXPECT_LE((a.gradient - b.gradient).norm(), L * (y - y2).norm() * (1 + 1e-6));
      if (!is_convex) {
        const Vector za = a.gradient + L * y, zb = b.gradient + L * y2;
        EXPECT_LE((za - zb).norm(), 2 * L * (y - y2).norm() * (1 + 1e-6));
      }
    }
  }
}

TEST(Interpolant, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(7);
  int checked = 0;
  for (int k = 0; k < 100; ++k) {
    const bool is_convex = k % 2 == 0;
    const Set S = random_interpolable_set(gen, is_convex);
    const BoundedInterpolant<double> W(S, is_convex ? convex : nonconvex);
    const Vector y = gaussian(gen, S.dim(), 2.0);
    const auto e = W.evaluate(y);
    const double h = 1e-6 * (1 + y.norm());
    Vector fd(S.dim());
    bool degenerate = false;
    for (Index i = 0; i < S.dim(); ++i) {
      Vector yp = y, ym = y;
      yp[i] += h;
      ym[i] -= h;
      const auto ep = W.evaluate(yp), em = W.evaluate(ym);
      fd[i] = (ep.value - em.value) / (2 * h);
      // Skip probes where the optimal face changes inside the stencil.
      const auto support = [](const Vector& a) { return (a.array() > 1e-9).cast<int>().matrix().eval(); };
      degenerate |= support(ep.alpha.alpha) != support(e.alpha.alpha) || support(em.alpha.alpha) != support(e.alpha.alpha);
    }
    if (degenerate) continue;
    ++checked;
    EXPECT_LE((fd - e.gradient).norm(), 1e-5 * std::max(1.0, e.gradient.norm())) << "probe " << k;
  }
  EXPECT_GE(checked, 80);
}

TEST(Interpolant, QpMatchesGridOracle) {
  std::mt19937_64 gen(8);
  for (int k = 0; k < 200; ++k) {
    const Set S = random_interpolable_set(gen, true, 4, 3);
    const BoundedInterpolant<double> W(S, convex);
    const Vector y = gaussian(gen, S.dim(), 2.0);
    const double oracle = simplex_grid_oracle([&](const Vector& a) { return inner_objective(S, y, a, S.L()); },
                                              S.size(), 40);
    EXPECT_NEAR(W.evaluate(y).value, oracle, 1e-5);
  }
  // The three-point example at grid resolution 1e-3.
  const Set S = sample_set(gen, random_function(gen, 2, 1.0, true), 3, 1.0);
  const Vector y = vec({0.3, -0.7});
  const double oracle = simplex_grid_oracle([&](const Vector& a) { return inner_objective(S, y, a, 1.0); }, 3, 1000);
  EXPECT_NEAR(eval_bounded_interpolant(S, y, convex).value, oracle, 1e-5);
}

TEST(Interpolant, LongDoubleInstantiation) {
  using LD = long double;
  using V = VectorX<LD>;
  std::vector<InterpolationTriple<LD>> triples{{V::Zero(1), V::Zero(1), 0.0L}, {V::Ones(1), V::Ones(1), 0.5L}};
  const InterpolationSet<LD> S(triples, 1.0L);
  const auto e = BoundedInterpolant<LD>(S, InterpolationMode::convex).evaluate(V::Constant(1, 0.5L));
  EXPECT_NEAR(static_cast<double>(e.value), 0.125, 1e-15);
}

TEST(BetaRange, Examples) {
  // Single z, y = z, gamma the gradient there: the range is {f(z)}.
  Matrix z(2, 1);
  z << 0.5, -1.0;
  const Vector gamma = vec({0.3, 0.4});
  const auto r = beta_range<double>(z, vec({2.0}), z, gamma, 1.0);
  EXPECT_NEAR(r.lo, 2.0, 1e-15);
  EXPECT_NEAR(r.hi, 2.0, 1e-15);
  EXPECT_TRUE(r.nonempty);

  // ys among zs on a linear function with gradient gamma: contains f(y_1).
  Matrix zs(2, 3), ys(2, 2);
  zs << 0, 1, 2, 0, -0.75, -1.5;
  ys << 1, 2, -0.75, -1.5;  // <gamma, y> = 0 for both
  Vector fz(3);
  for (Index i = 0; i < 3; ++i) fz[i] = 7.0 + gamma.dot(zs.col(i));
  const auto r2 = beta_range<double>(zs, fz, ys, gamma, 2.0);
  EXPECT_TRUE(r2.nonempty);
  EXPECT_LE(r2.lo, 7.0 + 1e-14);
  EXPECT_GE(r2.hi, 7.0 - 1e-14);
  EXPECT_TRUE(r2.certificate_holds);
  EXPECT_DOUBLE_EQ(r2.certified_lower, fz.minCoeff() - gamma.squaredNorm() / 2.0);

  Matrix ys_bad(2, 2);
  ys_bad << 1, 0, 0, 0;
  EXPECT_THROW(beta_range<double>(zs, fz, ys_bad, gamma, 1.0), std::invalid_argument);
}
