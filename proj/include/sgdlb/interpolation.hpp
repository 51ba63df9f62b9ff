#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sgdlb/types.hpp"

namespace sgdlb {

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// A (point, gradient, value) sample.
template <class Scalar>
struct InterpolationTriple {
  VectorX<Scalar> x;
  VectorX<Scalar> g;
  Scalar f;
};

template <class Scalar>
class InterpolationSet {
 public:
  using Triple = InterpolationTriple<Scalar>;

  InterpolationSet(std::vector<Triple> triples, Scalar L) : triples_(std::move(triples)), L_(L) {
    if (triples_.empty()) throw std::invalid_argument("interpolation set: no triples");
    if (!(L_ > 0)) throw std::invalid_argument("interpolation set: L must be positive");
    const Index d = triples_.front().x.size();
    for (const Triple& tr : triples_)
      if (tr.x.size() != d || tr.g.size() != d)
        throw std::invalid_argument("interpolation set: all points and gradients must share one dimension");
  }

  const std::vector<Triple>& triples() const { return triples_; }
  const Triple& operator[](Index i) const { return triples_[static_cast<std::size_t>(i)]; }
  Index size() const { return static_cast<Index>(triples_.size()); }
  Index dim() const { return triples_.front().x.size(); }
  Scalar L() const { return L_; }

  /// 1 + max|f_i| + max ||g_i||^2 / L; the unit for every tolerance below.
  Scalar scale() const {
    Scalar fmax(0), gmax(0);
    for (const Triple& tr : triples_) {
      fmax = std::max(fmax, std::abs(tr.f));
      gmax = std::max(gmax, tr.g.squaredNorm());
    }
    return Scalar(1) + fmax + gmax / L_;
  }

 private:
  std::vector<Triple> triples_;
  Scalar L_;
};

enum class InterpolationMode { convex, nonconvex };

template <class Scalar>
struct PairViolation {
  Index i;
  Index j;
  Scalar slack;
};

template <class Scalar>
struct InterpolabilityReport {
  bool ok = true;
  Scalar min_slack = std::numeric_limits<Scalar>::infinity();
  std::vector<PairViolation<Scalar>> violations;
};

/// Slack (RHS - LHS) of the pairwise smooth-interpolation inequality for the
/// ordered pair (i, j).
template <class Scalar>
Scalar interpolation_slack(const InterpolationSet<Scalar>& S, Index i, Index j, InterpolationMode mode) {
  const auto& a = S[i];
  const auto& b = S[j];
  const Scalar L = S.L();
  const VectorX<Scalar> dg = a.g - b.g;
  const VectorX<Scalar> dx = a.x - b.x;
  Scalar lhs = dg.squaredNorm() / (2 * L);
  if (mode == InterpolationMode::nonconvex) lhs -= L / 4 * (dx - dg / L).squaredNorm();
  const Scalar rhs = a.f - b.f - b.g.dot(dx);
  return rhs - lhs;
}

template <class Scalar>
InterpolabilityReport<Scalar> check_interpolable(const InterpolationSet<Scalar>& S, InterpolationMode mode) {
  InterpolabilityReport<Scalar> report;
  const Scalar tol = Scalar(1e-10) * S.scale();
  for (Index i = 0; i < S.size(); ++i)
    for (Index j = 0; j < S.size(); ++j) {
      if (i == j) continue;
      const Scalar slack = interpolation_slack(S, i, j, mode);
      report.min_slack = std::min(report.min_slack, slack);
      if (slack < -tol) report.violations.push_back({i, j, slack});
    }
  report.ok = report.violations.empty();
  return report;
}

template <class Scalar>
InterpolabilityReport<Scalar> check_convex_interpolable(const InterpolationSet<Scalar>& S) {
  return check_interpolable(S, InterpolationMode::convex);
}

template <class Scalar>
InterpolabilityReport<Scalar> check_nonconvex_interpolable(const InterpolationSet<Scalar>& S) {
  return check_interpolable(S, InterpolationMode::nonconvex);
}

/// Euclidean projection onto {a : a >= 0, sum a = 1} (sort-and-threshold).
template <class Derived>
VectorX<typename Derived::Scalar> project_onto_simplex(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Index n = v.size();
  std::vector<Scalar> u(v.derived().data(), v.derived().data() + n);
  if constexpr (!Derived::IsVectorAtCompileTime) u.assign(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<Scalar>());
  Scalar cumulative(0), theta(0);
  for (Index k = 0; k < n; ++k) {
    cumulative += u[static_cast<std::size_t>(k)];
    const Scalar candidate = (cumulative - Scalar(1)) / static_cast<Scalar>(k + 1);
    if (u[static_cast<std::size_t>(k)] - candidate > Scalar(0)) theta = candidate;
  }
  return (v.array() - theta).cwiseMax(Scalar(0)).matrix();
}

template <class Scalar>
struct SimplexQpOptions {
  Scalar tolerance = Scalar(1e-10);
  Index max_iterations = 100000;
  bool polish = true;
};

template <class Scalar>
struct SimplexQpSolution {
  VectorX<Scalar> alpha;
  Scalar objective_value = 0;
  /// Frank-Wolfe gap grad^T alpha - min_t grad_t; bounds the suboptimality.
  Scalar kkt_residual = 0;
  Index iterations = 0;
  bool converged = false;
};

namespace detail {

template <class Scalar>
Scalar fw_gap(const MatrixX<Scalar>& Q, const VectorX<Scalar>& q, const VectorX<Scalar>& a) {
  const VectorX<Scalar> grad = Q * a + q;
  return std::max(Scalar(0), grad.dot(a) - grad.minCoeff());
}

// Primal active-set refinement started from an approximate solution. Solves
// the equality-constrained KKT system on the support and adjusts the support
// until it is consistent.
template <class Scalar>
bool polish_on_support(const MatrixX<Scalar>& Q, const VectorX<Scalar>& q, VectorX<Scalar>& alpha) {
  const Index n = alpha.size();
  std::vector<bool> in(static_cast<std::size_t>(n));
  const Scalar thresh = Scalar(1e-12);
  for (Index t = 0; t < n; ++t) in[static_cast<std::size_t>(t)] = alpha[t] > thresh;
  if (std::none_of(in.begin(), in.end(), [](bool b) { return b; })) return false;
  for (Index round = 0; round < 4 * n; ++round) {
    std::vector<Index> S;
    for (Index t = 0; t < n; ++t)
      if (in[static_cast<std::size_t>(t)]) S.push_back(t);
    const Index m = static_cast<Index>(S.size());
    MatrixX<Scalar> K = MatrixX<Scalar>::Zero(m + 1, m + 1);
    VectorX<Scalar> rhs(m + 1);
    for (Index a = 0; a < m; ++a) {
      for (Index b = 0; b < m; ++b) K(a, b) = Q(S[static_cast<std::size_t>(a)], S[static_cast<std::size_t>(b)]);
      K(a, m) = Scalar(-1);
      K(m, a) = Scalar(1);
      rhs[a] = -q[S[static_cast<std::size_t>(a)]];
    }
    rhs[m] = Scalar(1);
    const VectorX<Scalar> sol = K.completeOrthogonalDecomposition().solve(rhs);
    if (!sol.allFinite()) return false;
    VectorX<Scalar> cand = VectorX<Scalar>::Zero(n);
    for (Index a = 0; a < m; ++a) cand[S[static_cast<std::size_t>(a)]] = sol[a];
    const Index worst_neg = static_cast<Index>(std::min_element(sol.data(), sol.data() + m) - sol.data());
    if (sol[worst_neg] < Scalar(0)) {
      if (m == 1) return false;
      in[static_cast<std::size_t>(S[static_cast<std::size_t>(worst_neg)])] = false;
      continue;
    }
    const VectorX<Scalar> grad = Q * cand + q;
    const Scalar mu = sol[m];
    Index add = -1;
    Scalar most = Scalar(0);
    for (Index t = 0; t < n; ++t)
      if (!in[static_cast<std::size_t>(t)] && mu - grad[t] > most) {
        most = mu - grad[t];
        add = t;
      }
    if (add < 0 || most <= Scalar(1e-14) * (Scalar(1) + std::abs(mu))) {
      alpha = cand;
      return true;
    }
    in[static_cast<std::size_t>(add)] = true;
  }
  return false;
}

}  // namespace detail

/// Minimizes 1/2 a^T Q a + q^T a over the unit simplex (Q symmetric PSD) by
/// accelerated projected gradient with restarts, then refines the support.
/// Converged when the Frank-Wolfe gap is at most tolerance * scale.
template <class Scalar>
SimplexQpSolution<Scalar> solve_simplex_qp(const MatrixX<Scalar>& Q, const VectorX<Scalar>& q, Scalar scale = Scalar(1),
                                           const SimplexQpOptions<Scalar>& options = {}) {
  const Index n = q.size();
  if (Q.rows() != n || Q.cols() != n) throw std::invalid_argument("solve_simplex_qp: shape mismatch");
  if (n == 0) throw std::invalid_argument("solve_simplex_qp: empty problem");
  const auto objective = [&](const VectorX<Scalar>& a) { return Scalar(0.5) * a.dot(Q * a) + q.dot(a); };
  const Scalar target = options.tolerance * scale;

  SimplexQpSolution<Scalar> out;
  Scalar lip = Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>>(Q, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  lip = std::max(lip, std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + Q.cwiseAbs().maxCoeff()));
  const Scalar step = Scalar(1) / lip;

  // Start from the best vertex.
  VectorX<Scalar> alpha = VectorX<Scalar>::Zero(n);
  {
    Index best = 0;
    for (Index t = 1; t < n; ++t)
      if (Scalar(0.5) * Q(t, t) + q[t] < Scalar(0.5) * Q(best, best) + q[best]) best = t;
    alpha[best] = Scalar(1);
  }
  VectorX<Scalar> y = alpha, prev = alpha;
  Scalar momentum(1);
  Scalar gap = detail::fw_gap(Q, q, alpha);
  Index it = 0;
  for (; it < options.max_iterations && gap > target; ++it) {
    const VectorX<Scalar> next = project_onto_simplex((y - step * (Q * y + q)).eval());
    const Scalar next_momentum = (Scalar(1) + std::sqrt(Scalar(1) + 4 * momentum * momentum)) / 2;
    if ((y - next).dot(next - alpha) > Scalar(0)) {
      // restart
      momentum = Scalar(1);
      y = next;
    } else {
      y = next + ((momentum - Scalar(1)) / next_momentum) * (next - alpha);
      momentum = next_momentum;
    }
    prev = alpha;
    alpha = next;
    if (it % 8 == 7 && options.polish) {
      VectorX<Scalar> polished = alpha;
      if (detail::polish_on_support(Q, q, polished)) {
        const Scalar pg = detail::fw_gap(Q, q, polished);
        if (pg < detail::fw_gap(Q, q, alpha)) {
          alpha = polished;
          y = alpha;
          momentum = Scalar(1);
        }
      }
    }
    gap = detail::fw_gap(Q, q, alpha);
  }
  if (options.polish) {
    VectorX<Scalar> polished = alpha;
    if (detail::polish_on_support(Q, q, polished) && detail::fw_gap(Q, q, polished) <= gap) {
      alpha = polished;
      gap = detail::fw_gap(Q, q, alpha);
    }
  }
  (void)prev;
  out.alpha = alpha;
  out.objective_value = objective(alpha);
  out.kkt_residual = gap;
  out.iterations = it;
  out.converged = gap <= target;
  return out;
}

template <class Scalar>
struct InterpolantEvaluation {
  Scalar value;
  VectorX<Scalar> gradient;
  SimplexQpSolution<Scalar> alpha;
};

/// The bounded smooth interpolant of a finite set:
///   W(y) = min_{a in simplex} L/2 ||y - sum a_t (x_t - g_t/L)||^2 + sum a_t (f_t - ||g_t||^2/(2L))
/// in convex mode. Nonconvex mode evaluates Z(y) - L/2 ||y||^2, where Z is
/// the convex interpolant (constant 2L) of the shifted set
/// {(x_t, g_t + L x_t, f_t + L/2 ||x_t||^2)}.
/// Gradients come from the optimal weights, grad W(y) = L (y - sum a*_t (x_t - g_t/L)),
/// which is well defined even when a* is not unique.
template <class Scalar>
class BoundedInterpolant {
 public:
  BoundedInterpolant(const InterpolationSet<Scalar>& S, InterpolationMode mode, SimplexQpOptions<Scalar> options = {})
      : mode_(mode), L_(S.L()), scale_(S.scale()), options_(options) {
    const auto report = check_interpolable(S, mode);
    if (!report.ok)
      throw std::invalid_argument("bounded interpolant: set violates the " +
                                  std::string(mode == InterpolationMode::convex ? "convex" : "nonconvex") +
                                  " interpolation conditions (" + std::to_string(report.violations.size()) +
                                  " violated pairs)");
    const Index T = S.size();
    const Index d = S.dim();
    kappa_ = mode == InterpolationMode::convex ? L_ : 2 * L_;
    anchors_.resize(d, T);
    offsets_.resize(T);
    for (Index t = 0; t < T; ++t) {
      VectorX<Scalar> g = S[t].g;
      Scalar f = S[t].f;
      if (mode == InterpolationMode::nonconvex) {
        g += L_ * S[t].x;
        f += L_ / 2 * S[t].x.squaredNorm();
      }
      anchors_.col(t) = S[t].x - g / kappa_;
      offsets_[t] = f - g.squaredNorm() / (2 * kappa_);
    }
    gram_ = kappa_ * anchors_.transpose() * anchors_;
    gram_ = (gram_ + gram_.transpose()).eval() / Scalar(2);
    // Lower bound value and minimizer: index j minimizing f_t - ||g_t||^2/(2L), lowest index on ties.
    Index j = 0;
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (Index t = 0; t < T; ++t) {
      const Scalar v = S[t].f - S[t].g.squaredNorm() / (2 * L_);
      if (v < best) {
        best = v;
        j = t;
      }
    }
    min_index_ = j;
    min_value_ = best;
    argmin_ = S[j].x - S[j].g / L_;
  }

  InterpolantEvaluation<Scalar> evaluate(const VectorX<Scalar>& y) const {
    if (y.size() != anchors_.rows()) throw std::invalid_argument("bounded interpolant: probe has the wrong dimension");
    const VectorX<Scalar> q = offsets_ - kappa_ * anchors_.transpose() * y;
    auto sol = solve_simplex_qp<Scalar>(gram_, q, scale_ + kappa_ / 2 * y.squaredNorm(), options_);
    if (!sol.converged)
      throw ToleranceError("bounded interpolant: QP did not converge (residual " +
                           std::to_string(static_cast<double>(sol.kkt_residual)) + ")");
    const VectorX<Scalar> residual = y - anchors_ * sol.alpha;
    Scalar value = kappa_ / 2 * residual.squaredNorm() + offsets_.dot(sol.alpha);
    VectorX<Scalar> grad = kappa_ * residual;
    if (mode_ == InterpolationMode::nonconvex) {
      value -= L_ / 2 * y.squaredNorm();
      grad -= L_ * y;
    }
    sol.objective_value = value;
    return {value, std::move(grad), std::move(sol)};
  }

  /// (x_j - g_j/L, f_j - ||g_j||^2/(2L)) with j the lowest minimizing index.
  std::pair<VectorX<Scalar>, Scalar> global_min() const { return {argmin_, min_value_}; }
  Index min_index() const { return min_index_; }
  InterpolationMode mode() const { return mode_; }
  /// Gradient Lipschitz constant of the convex function minimized over the
  /// simplex (L in convex mode, 2L for the intermediate Z in nonconvex mode).
  Scalar inner_lipschitz() const { return kappa_; }

 private:
  InterpolationMode mode_;
  Scalar L_;
  Scalar scale_;
  Scalar kappa_ = 0;
  SimplexQpOptions<Scalar> options_;
  MatrixX<Scalar> anchors_;
  VectorX<Scalar> offsets_;
  MatrixX<Scalar> gram_;
  Index min_index_ = 0;
  Scalar min_value_ = 0;
  VectorX<Scalar> argmin_;
};

template <class Scalar>
InterpolantEvaluation<Scalar> eval_bounded_interpolant(const InterpolationSet<Scalar>& S, const VectorX<Scalar>& y,
                                                       InterpolationMode mode) {
  return BoundedInterpolant<Scalar>(S, mode).evaluate(y);
}

template <class Scalar>
std::pair<VectorX<Scalar>, Scalar> global_min_of_interpolant(const InterpolationSet<Scalar>& S, InterpolationMode mode) {
  return BoundedInterpolant<Scalar>(S, mode).global_min();
}

template <class Scalar>
struct BetaRange {
  Scalar lo;
  Scalar hi;
  bool nonempty;
  /// min_i f(z_i) - ||gamma||^2 / L
  Scalar certified_lower;
  bool certificate_holds;
};

/// Admissible common values beta for f(y_j) so that the set
/// {(y_j, gamma, beta)} U {(z_i, gamma, f(z_i))} stays L-smooth interpolable.
/// Points are columns of zs (d x n) and ys (d x m).
template <class Scalar>
BetaRange<Scalar> beta_range(const MatrixX<Scalar>& zs, const VectorX<Scalar>& fz, const MatrixX<Scalar>& ys,
                             const VectorX<Scalar>& gamma, Scalar L) {
  if (zs.cols() == 0 || ys.cols() == 0) throw std::invalid_argument("beta_range: empty point sets");
  if (zs.rows() != gamma.size() || ys.rows() != gamma.size())
    throw std::invalid_argument("beta_range: dimension mismatch");
  if (fz.size() != zs.cols()) throw std::invalid_argument("beta_range: one value per z is required");
  if (!(L > 0)) throw std::invalid_argument("beta_range: L must be positive");

  const VectorX<Scalar> gy = ys.transpose() * gamma;
  const Scalar gy_scale = Scalar(1) + gy.cwiseAbs().maxCoeff();
  if (gy.maxCoeff() - gy.minCoeff() > Scalar(1e-9) * gy_scale)
    throw std::invalid_argument("beta_range: <gamma, y_j> differs across j");

  const VectorX<Scalar> gz = zs.transpose() * gamma;
  const VectorX<Scalar> zn = zs.colwise().squaredNorm().transpose();
  const VectorX<Scalar> yn = ys.colwise().squaredNorm().transpose();
  Scalar lo = -std::numeric_limits<Scalar>::infinity();
  Scalar hi = std::numeric_limits<Scalar>::infinity();
  const Index block = 2048;
  for (Index start = 0; start < zs.cols(); start += block) {
    const Index width = std::min(block, zs.cols() - start);
    const MatrixX<Scalar> cross = ys.transpose() * zs.middleCols(start, width);  // m x width
    for (Index c = 0; c < width; ++c) {
      const Index i = start + c;
      for (Index j = 0; j < ys.cols(); ++j) {
        const Scalar dist2 = std::max(Scalar(0), yn[j] + zn[i] - 2 * cross(j, c));
        const Scalar base = fz[i] + gy[j] - gz[i];
        lo = std::max(lo, base - L / 4 * dist2);
        hi = std::min(hi, base + L / 4 * dist2);
      }
    }
  }
  const Scalar gamma2 = gamma.squaredNorm();
  const Scalar scale = Scalar(1) + fz.cwiseAbs().maxCoeff() + gamma2 / L;
  const Scalar certified = fz.minCoeff() - gamma2 / L;
  return BetaRange<Scalar>{lo, hi, lo <= hi + Scalar(1e-10) * scale, certified,
                           hi >= certified - Scalar(1e-10) * scale};
}

}  // namespace sgdlb
