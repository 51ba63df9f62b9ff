#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace sgdlb {

/// One polynomial piece p(x) = sum_k coeffs[k] * (x - shift)^k on [lo, hi].
template <class Scalar>
struct PolynomialPiece {
  Scalar lo;
  Scalar hi;
  std::vector<Scalar> coeffs;
  Scalar shift = Scalar(0);

  /// Value (order 0) or derivative of the given order at x.
  Scalar eval(Scalar x, int order = 0) const {
    const Scalar u = x - shift;
    Scalar acc(0);
    for (std::size_t k = coeffs.size(); k-- > static_cast<std::size_t>(order);) {
      Scalar c = coeffs[k];
      for (int m = 0; m < order; ++m) c *= static_cast<Scalar>(k - static_cast<std::size_t>(m));
      acc = acc * u + c;
    }
    return acc;
  }

  int degree() const {
    for (std::size_t k = coeffs.size(); k-- > 0;)
      if (coeffs[k] != Scalar(0)) return static_cast<int>(k);
    return 0;
  }
};

/// A C^1 (optionally C^2) function on the real line assembled from
/// polynomial pieces. Continuity at every breakpoint is checked when the
/// function is built.
template <class Scalar>
class PiecewiseScalarFunction {
 public:
  using Piece = PolynomialPiece<Scalar>;

  PiecewiseScalarFunction() : PiecewiseScalarFunction(zero_pieces(), Scalar(0), Scalar(0)) {}

  PiecewiseScalarFunction(std::vector<Piece> pieces, std::optional<Scalar> grad_lipschitz,
                          std::optional<Scalar> hess_lipschitz)
      : pieces_(std::move(pieces)),
        grad_lipschitz_(grad_lipschitz),
        hess_lipschitz_(hess_lipschitz) {
    validate();
  }

  const std::vector<Piece>& pieces() const { return pieces_; }
  std::optional<Scalar> declared_grad_lipschitz() const { return grad_lipschitz_; }
  std::optional<Scalar> declared_hess_lipschitz() const { return hess_lipschitz_; }

  /// True when f'' is continuous everywhere (every breakpoint matches).
  bool twice_differentiable() const {
    for (std::size_t k = 0; k + 1 < pieces_.size(); ++k)
      if (!second_derivative_matches(k)) return false;
    return true;
  }

  Scalar operator()(Scalar x) const { return eval(x, 0); }

  Scalar eval(Scalar x, int order) const {
    if (order < 0 || order > 2) throw std::invalid_argument("piecewise: derivative order must be 0, 1 or 2");
    const std::size_t k = locate(x);
    if (order == 2 && k > 0 && x == pieces_[k].lo && !second_derivative_matches(k - 1))
      throw std::domain_error("piecewise: second derivative jumps at x = " + std::to_string(static_cast<double>(x)));
    return pieces_[k].eval(x, order);
  }

  /// inf over the real line; -inf when a tail is unbounded below.
  Scalar infimum() const {
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (const Piece& p : pieces_) {
      const bool left_open = std::isinf(p.lo);
      const bool right_open = std::isinf(p.hi);
      const int deg = p.degree();
      if ((left_open || right_open) && deg > 0) {
        const Scalar lead = p.coeffs[static_cast<std::size_t>(deg)];
        const bool odd = deg % 2 == 1;
        if (right_open && lead < 0) return -std::numeric_limits<Scalar>::infinity();
        if (left_open && ((odd && lead > 0) || (!odd && lead < 0)))
          return -std::numeric_limits<Scalar>::infinity();
      }
      if (!left_open) best = std::min(best, p.eval(p.lo));
      if (!right_open) best = std::min(best, p.eval(p.hi));
      if (left_open && right_open && deg == 0) best = std::min(best, p.eval(Scalar(0)));
      for (Scalar r : critical_points(p))
        if (r > p.lo && r < p.hi) best = std::min(best, p.eval(r));
    }
    return best;
  }

 private:
  static std::vector<Piece> zero_pieces() {
    const Scalar inf = std::numeric_limits<Scalar>::infinity();
    return {Piece{-inf, inf, {Scalar(0)}, Scalar(0)}};
  }

  std::size_t locate(Scalar x) const {
    // Right-continuous lookup: a breakpoint belongs to the piece starting there.
    auto it = std::upper_bound(pieces_.begin() + 1, pieces_.end(), x,
                               [](Scalar v, const Piece& p) { return v < p.lo; });
    return static_cast<std::size_t>(it - pieces_.begin()) - 1;
  }

  static Scalar tolerance(Scalar a, Scalar b) {
    return Scalar(1e-12) * (Scalar(1) + std::max(std::abs(a), std::abs(b)));
  }

  bool matches(std::size_t k, int order) const {
    const Scalar x = pieces_[k].hi;
    const Scalar a = pieces_[k].eval(x, order);
    const Scalar b = pieces_[k + 1].eval(x, order);
    return std::abs(a - b) <= tolerance(a, b);
  }

  bool second_derivative_matches(std::size_t k) const { return matches(k, 2); }

  // Roots of p' (degree <= 3 polynomials only need a quadratic formula).
  static std::vector<Scalar> critical_points(const Piece& p) {
    const auto c = [&](std::size_t k) { return k < p.coeffs.size() ? p.coeffs[k] : Scalar(0); };
    const Scalar a = 3 * c(3), b = 2 * c(2), d = c(1);
    std::vector<Scalar> roots;
    if (a == Scalar(0)) {
      if (b != Scalar(0)) roots.push_back(-d / b + p.shift);
      return roots;
    }
    const Scalar disc = b * b - 4 * a * d;
    if (disc < 0) return roots;
    const Scalar s = std::sqrt(disc);
    roots.push_back((-b - s) / (2 * a) + p.shift);
    roots.push_back((-b + s) / (2 * a) + p.shift);
    return roots;
  }

  void validate() const {
    if (pieces_.empty()) throw std::invalid_argument("piecewise: no pieces");
    if (!(std::isinf(pieces_.front().lo) && pieces_.front().lo < 0) ||
        !(std::isinf(pieces_.back().hi) && pieces_.back().hi > 0))
      throw std::invalid_argument("piecewise: pieces must cover the real line");
    if (pieces_.front().coeffs.size() > 4 || pieces_.back().coeffs.size() > 4)
      throw std::invalid_argument("piecewise: degree above 3 is not supported");
    for (std::size_t k = 0; k < pieces_.size(); ++k) {
      const Piece& p = pieces_[k];
      if (!(p.lo < p.hi)) throw std::invalid_argument("piecewise: piece " + std::to_string(k) + " has lo >= hi");
      if (p.coeffs.empty() || p.coeffs.size() > 4)
        throw std::invalid_argument("piecewise: piece " + std::to_string(k) + " must have degree 0..3");
      if (k + 1 < pieces_.size()) {
        if (p.hi != pieces_[k + 1].lo)
          throw std::invalid_argument("piecewise: gap between pieces " + std::to_string(k) + " and " +
                                      std::to_string(k + 1));
        if (!matches(k, 0)) throw std::invalid_argument("piecewise: value jumps at breakpoint " + std::to_string(k));
        if (!matches(k, 1))
          throw std::invalid_argument("piecewise: derivative jumps at breakpoint " + std::to_string(k));
        if (hess_lipschitz_ && !matches(k, 2))
          throw std::invalid_argument("piecewise: second derivative jumps at breakpoint " + std::to_string(k));
      }
    }
  }

  std::vector<Piece> pieces_;
  std::optional<Scalar> grad_lipschitz_;
  std::optional<Scalar> hess_lipschitz_;
};

template <class Scalar>
Scalar eval(const PiecewiseScalarFunction<Scalar>& f, std::type_identity_t<Scalar> x, int order = 0) {
  return f.eval(x, order);
}

enum class BumpVariant { plus, minus };

/// Identically zero; stands in for a bump of width zero.
template <class Scalar = double>
PiecewiseScalarFunction<Scalar> make_zero_function() {
  return PiecewiseScalarFunction<Scalar>();
}

/// Odd, non-decreasing C^2 step from -1/2 (x <= -1) to 1/2 (x >= 1).
/// f' is 2-Lipschitz and f'' is 4-Lipschitz.
template <class Scalar = double>
PiecewiseScalarFunction<Scalar> make_sigmoid() {
  using P = PolynomialPiece<Scalar>;
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  const Scalar half = Scalar(1) / 2;
  const Scalar two_thirds = Scalar(2) / 3;
  std::vector<P> pieces{
      P{-inf, -1, {-half}, 0},
      P{-1, -half, {-half, 0, 0, two_thirds}, -1},
      P{-half, half, {0, 1, 0, -two_thirds}, 0},
      P{half, 1, {half, 0, 0, two_thirds}, 1},
      P{1, inf, {half}, 0},
  };
  return PiecewiseScalarFunction<Scalar>(std::move(pieces), Scalar(2), Scalar(4));
}

/// Even C^1 bump with L-Lipschitz derivative reaching the plateau L b^2/16.
/// The plus variant rises on |x| < b/2, the minus variant is flat on
/// |x| <= b/2 and rises on b/2 < |x| < b.
template <class Scalar = double>
PiecewiseScalarFunction<Scalar> make_bump1(Scalar L, Scalar b, BumpVariant variant) {
  if (!(L > 0)) throw std::invalid_argument("make_bump1: L must be positive");
  if (!(b > 0)) throw std::invalid_argument("make_bump1: b must be positive");
  using P = PolynomialPiece<Scalar>;
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  const Scalar plateau = L * b * b / 16;
  const Scalar hL = L / 2;
  std::vector<P> pieces;
  if (variant == BumpVariant::plus) {
    pieces = {
        P{-inf, -b / 2, {plateau}, 0},
        P{-b / 2, -b / 4, {plateau, 0, -hL}, -b / 2},
        P{-b / 4, b / 4, {0, 0, hL}, 0},
        P{b / 4, b / 2, {plateau, 0, -hL}, b / 2},
        P{b / 2, inf, {plateau}, 0},
    };
  } else {
    pieces = {
        P{-inf, -b, {plateau}, 0},
        P{-b, -3 * b / 4, {plateau, 0, -hL}, -b},
        P{-3 * b / 4, -b / 2, {0, 0, hL}, -b / 2},
        P{-b / 2, b / 2, {0}, 0},
        P{b / 2, 3 * b / 4, {0, 0, hL}, b / 2},
        P{3 * b / 4, b, {plateau, 0, -hL}, b},
        P{b, inf, {plateau}, 0},
    };
  }
  return PiecewiseScalarFunction<Scalar>(std::move(pieces), L, std::nullopt);
}

/// Even C^2 bump with rho-Lipschitz second derivative reaching the plateau
/// rho b^3/32 at |x| = b, where f' and f'' both vanish. |f''| <= rho b / 4.
template <class Scalar = double>
PiecewiseScalarFunction<Scalar> make_bump2(Scalar rho, Scalar b) {
  if (!(rho > 0)) throw std::invalid_argument("make_bump2: rho must be positive");
  if (!(b > 0)) throw std::invalid_argument("make_bump2: b must be positive");
  using P = PolynomialPiece<Scalar>;
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  const Scalar plateau = rho * b * b * b / 32;
  const Scalar c0 = rho * b * b * b / 192;
  const Scalar c1 = rho * b * b / 16;
  const Scalar c2 = rho * b / 4;
  const Scalar c3 = rho / 6;
  std::vector<P> pieces{
      P{-inf, -b, {plateau}, 0},
      P{-b, -3 * b / 4, {plateau, 0, 0, -c3}, -b},
      P{-3 * b / 4, -b / 4, {c0, c1, c2, c3}, 0},
      P{-b / 4, 0, {0, 0, 0, -c3}, 0},
      P{0, b / 4, {0, 0, 0, c3}, 0},
      P{b / 4, 3 * b / 4, {c0, -c1, c2, -c3}, 0},
      P{3 * b / 4, b, {plateau, 0, 0, c3}, b},
      P{b, inf, {plateau}, 0},
  };
  return PiecewiseScalarFunction<Scalar>(std::move(pieces), rho * b / 4, rho);
}

}  // namespace sgdlb
