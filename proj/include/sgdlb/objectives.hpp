#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "sgdlb/piecewise.hpp"
#include "sgdlb/types.hpp"

namespace sgdlb {

using ScalarFunction = PiecewiseScalarFunction<double>;

/// f(x) = G x_0 + sum_t bumps[t](x_{t+1}).
struct SeparableLinearPlusBumps {
  double G = 0.0;
  std::vector<ScalarFunction> bumps;
};

/// f(x) = scalar(x_r) on R^dim.
struct EmbeddedScalar {
  Index dim = 1;
  Index coordinate = 0;
  ScalarFunction scalar;
};

/// f(x) = 1/2 sum_i curvature_i x_i^2.
struct QuadraticDiag {
  Vector curvature;
};

enum class ObjectiveKind { separable_linear_plus_bumps, embedded_scalar, quadratic_diag };

class Objective {
 public:
  using Parameters = std::variant<SeparableLinearPlusBumps, EmbeddedScalar, QuadraticDiag>;

  /// Declared constants default to the largest over the bumps; an explicit
  /// value must dominate them.
  static Objective separable(double G, std::vector<ScalarFunction> bumps,
                             std::optional<double> grad_lipschitz = std::nullopt,
                             std::optional<double> hess_lipschitz = std::nullopt);
  static Objective embedded(Index dim, Index coordinate, ScalarFunction scalar);
  static Objective quadratic(Vector curvature, std::optional<double> grad_lipschitz = std::nullopt);
  /// (L/2) ||x||^2 on R^dim.
  static Objective isotropic_quadratic(Index dim, double L);

  Index dim() const { return dim_; }
  ObjectiveKind kind() const { return static_cast<ObjectiveKind>(params_.index()); }
  const Parameters& parameters() const { return params_; }
  double declared_grad_lipschitz() const { return grad_lipschitz_; }
  std::optional<double> declared_hess_lipschitz() const { return hess_lipschitz_; }
  /// Whether hessian_diagonal() is defined for this objective.
  bool has_hessian() const;

 private:
  Objective(Parameters params, Index dim, double L, std::optional<double> rho)
      : params_(std::move(params)), dim_(dim), grad_lipschitz_(L), hess_lipschitz_(rho) {}

  Parameters params_;
  Index dim_;
  double grad_lipschitz_;
  std::optional<double> hess_lipschitz_;
};

double value(const Objective& obj, CRef<Vector> x);
Vector gradient(const Objective& obj, CRef<Vector> x);

/// Diagonal of the Hessian. All supported kinds have diagonal Hessians;
/// throws std::logic_error for kinds where it is not exposed.
Vector hessian_diagonal(const Objective& obj, CRef<Vector> x);
Matrix hessian(const Objective& obj, CRef<Vector> x);

/// f(x1) - inf f. Throws std::logic_error for the separable kind, whose
/// linear term makes it unbounded below.
double suboptimality_gap(const Objective& obj, CRef<Vector> x1);

}  // namespace sgdlb
