#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "sgdlb/interpolation.hpp"

namespace sgdlb::fixtures {

using Set = InterpolationSet<double>;
using Triple = InterpolationTriple<double>;

inline Vector gaussian(std::mt19937_64& gen, Index d, double s = 1.0) {
  std::normal_distribution<double> n(0.0, s);
  Vector v(d);
  for (Index i = 0; i < d; ++i) v[i] = n(gen);
  return v;
}

// A random L-smooth function: quadratic with spectrum in [lo, L/2] plus
// (L/2) log-sum-exp of a shifted argument. Convex when lo >= 0.
struct SmoothFunction {
  Matrix H;
  Vector c;
  Vector shift;
  double L;

  double value(const Vector& x) const {
    const Vector z = x - shift;
    const double m = z.maxCoeff();
    const double lse = m + std::log((z.array() - m).exp().sum());
    return 0.5 * x.dot(H * x) + c.dot(x) + L / 2 * lse;
  }
  Vector gradient(const Vector& x) const {
    const Vector z = x - shift;
    Vector p = (z.array() - z.maxCoeff()).exp();
    p /= p.sum();
    return H * x + c + L / 2 * p;
  }
};

inline SmoothFunction random_function(std::mt19937_64& gen, Index d, double L, bool is_convex) {
  const Matrix A = gaussian(gen, d * d).reshaped(d, d);
  Eigen::HouseholderQR<Matrix> qr(A);
  const Matrix Q = qr.householderQ();
  std::uniform_real_distribution<double> u(is_convex ? 0.0 : -L / 2, L / 2);
  Vector eig(d);
  for (Index i = 0; i < d; ++i) eig[i] = u(gen);
  return {Q * eig.asDiagonal() * Q.transpose(), gaussian(gen, d), gaussian(gen, d), L};
}

inline Set sample_set(std::mt19937_64& gen, const SmoothFunction& f, Index T, double L, double spread = 1.5) {
  std::vector<Triple> triples;
  for (Index t = 0; t < T; ++t) {
    const Vector x = gaussian(gen, f.c.size(), spread);
    triples.push_back({x, f.gradient(x), f.value(x)});
  }
  return Set(triples, L);
}

inline Set random_interpolable_set(std::mt19937_64& gen, bool is_convex, Index max_T = 6, Index max_d = 4) {
  std::uniform_int_distribution<Index> Td(1, max_T), dd(1, max_d);
  std::uniform_real_distribution<double> Ld(0.5, 3.0);
  const Index d = dd(gen);
  const double L = Ld(gen);
  return sample_set(gen, random_function(gen, d, L, is_convex), Td(gen), L);
}

// The inner objective exactly as written in the construction:
// L/2 ||y - sum a_t (x_t - g_t/L)||^2 + sum a_t (f_t - ||g_t||^2/(2L)).
inline double inner_objective(const Set& S, const Vector& y, const Vector& a, double L) {
  Vector anchor = Vector::Zero(y.size());
  double offset = 0.0;
  for (Index t = 0; t < S.size(); ++t) {
    anchor += a[t] * (S[t].x - S[t].g / L);
    offset += a[t] * (S[t].f - S[t].g.squaredNorm() / (2 * L));
  }
  return L / 2 * (y - anchor).squaredNorm() + offset;
}

// Dense simplex grid, then exact pairwise line searches from the best grid
// point until nothing improves.
inline double simplex_grid_oracle(const std::function<double(const Vector&)>& obj, Index T, int N) {
  Vector best;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<int> counts(static_cast<std::size_t>(T), 0);
  std::function<void(Index, int)> rec = [&](Index k, int left) {
    if (k == T - 1) {
      counts[static_cast<std::size_t>(k)] = left;
      Vector a(T);
      for (Index i = 0; i < T; ++i) a[i] = counts[static_cast<std::size_t>(i)] / static_cast<double>(N);
      const double v = obj(a);
      if (v < best_val) {
        best_val = v;
        best = a;
      }
      return;
    }
    for (int c = 0; c <= left; ++c) {
      counts[static_cast<std::size_t>(k)] = c;
      rec(k + 1, left - c);
    }
  };
  rec(0, N);
  for (int sweep = 0; sweep < 500; ++sweep) {
    const double before = best_val;
    for (Index i = 0; i < T; ++i)
      for (Index j = 0; j < T; ++j) {
        if (i == j) continue;
        // Move mass s from j to i, s in [-a_i, a_j]; the objective is quadratic in s.
        const double lo = -best[i], hi = best[j];
        if (hi - lo <= 0) continue;
        const auto at = [&](double s) {
          Vector a = best;
          a[i] += s;
          a[j] -= s;
          return obj(a);
        };
        const double h = (hi - lo) / 2;
        const double f0 = at(lo), f1 = at(lo + h), f2 = at(hi);
        const double curv = (f0 - 2 * f1 + f2) / (h * h);
        double s = curv > 0 ? lo + h - (f2 - f0) / (2 * h) / curv : (f0 < f2 ? lo : hi);
        s = std::clamp(s, lo, hi);
        double pick = 0.0, pick_val = best_val;
        for (double cand : {s, lo, hi}) {
          const double v = at(cand);
          if (v < pick_val) {
            pick_val = v;
            pick = cand;
          }
        }
        if (pick != 0.0) {
          best_val = pick_val;
          best[i] += pick;
          best[j] -= pick;
          if (pick == lo) best[i] = 0.0;
          if (pick == hi) best[j] = 0.0;
        }
      }
    if (before - best_val <= 1e-15 * (1 + std::abs(best_val))) break;
  }
  return best_val;
}

}  // namespace sgdlb::fixtures
