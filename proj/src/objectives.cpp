#include "sgdlb/objectives.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace sgdlb {

namespace {

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

void check_dim(const Objective& obj, CRef<Vector> x) {
  if (x.size() != obj.dim())
    throw std::invalid_argument("objective: expected dimension " + std::to_string(obj.dim()) + ", got " +
                                std::to_string(x.size()));
}

}  // namespace

Objective Objective::separable(double G, std::vector<ScalarFunction> bumps, std::optional<double> grad_lipschitz,
                               std::optional<double> hess_lipschitz) {
  double L = 0.0;
  std::optional<double> rho = 0.0;
  for (const auto& h : bumps) {
    const auto hL = h.declared_grad_lipschitz();
    if (!hL) throw std::invalid_argument("separable objective: every bump needs a declared gradient Lipschitz constant");
    L = std::max(L, *hL);
    if (rho && h.declared_hess_lipschitz())
      rho = std::max(*rho, *h.declared_hess_lipschitz());
    else
      rho.reset();
  }
  if (grad_lipschitz) {
    if (*grad_lipschitz < L) throw std::invalid_argument("separable objective: declared L is below a bump's constant");
    L = *grad_lipschitz;
  }
  if (hess_lipschitz) {
    if (!rho || *hess_lipschitz < *rho)
      throw std::invalid_argument("separable objective: declared rho is below a bump's constant");
    rho = hess_lipschitz;
  }
  const auto dim = static_cast<Index>(bumps.size()) + 1;
  return Objective(SeparableLinearPlusBumps{G, std::move(bumps)}, dim, L, rho);
}

Objective Objective::embedded(Index dim, Index coordinate, ScalarFunction scalar) {
  if (dim < 1 || coordinate < 0 || coordinate >= dim)
    throw std::invalid_argument("embedded objective: coordinate out of range");
  const auto L = scalar.declared_grad_lipschitz();
  if (!L) throw std::invalid_argument("embedded objective: scalar function needs a declared gradient Lipschitz constant");
  const auto rho = scalar.declared_hess_lipschitz();
  return Objective(EmbeddedScalar{dim, coordinate, std::move(scalar)}, dim, *L, rho);
}

Objective Objective::quadratic(Vector curvature, std::optional<double> grad_lipschitz) {
  if (curvature.size() < 1) throw std::invalid_argument("quadratic objective: empty curvature");
  if ((curvature.array() < 0.0).any()) throw std::invalid_argument("quadratic objective: negative curvature");
  const double cmax = curvature.maxCoeff();
  const double L = grad_lipschitz.value_or(cmax);
  if (cmax > L) throw std::invalid_argument("quadratic objective: curvature exceeds declared L");
  const Index dim = curvature.size();
  return Objective(QuadraticDiag{std::move(curvature)}, dim, L, 0.0);
}

Objective Objective::isotropic_quadratic(Index dim, double L) {
  if (!(L > 0)) throw std::invalid_argument("quadratic objective: L must be positive");
  return quadratic(Vector::Constant(dim, L), L);
}

bool Objective::has_hessian() const {
  return std::visit(overloaded{
                        [](const SeparableLinearPlusBumps& s) {
                          return std::all_of(s.bumps.begin(), s.bumps.end(),
                                             [](const ScalarFunction& h) { return h.twice_differentiable(); });
                        },
                        [](const EmbeddedScalar&) { return false; },
                        [](const QuadraticDiag&) { return true; },
                    },
                    params_);
}

double value(const Objective& obj, CRef<Vector> x) {
  check_dim(obj, x);
  return std::visit(overloaded{
                        [&](const SeparableLinearPlusBumps& s) {
                          double v = s.G * x[0];
                          for (std::size_t t = 0; t < s.bumps.size(); ++t)
                            v += s.bumps[t](x[static_cast<Index>(t) + 1]);
                          return v;
                        },
                        [&](const EmbeddedScalar& e) { return e.scalar(x[e.coordinate]); },
                        [&](const QuadraticDiag& q) { return 0.5 * q.curvature.dot(x.cwiseAbs2()); },
                    },
                    obj.parameters());
}

Vector gradient(const Objective& obj, CRef<Vector> x) {
  check_dim(obj, x);
  return std::visit(overloaded{
                        [&](const SeparableLinearPlusBumps& s) {
                          Vector g(x.size());
                          g[0] = s.G;
                          for (std::size_t t = 0; t < s.bumps.size(); ++t) {
                            const Index i = static_cast<Index>(t) + 1;
                            g[i] = s.bumps[t].eval(x[i], 1);
                          }
                          return g;
                        },
                        [&](const EmbeddedScalar& e) {
                          Vector g = Vector::Zero(x.size());
                          g[e.coordinate] = e.scalar.eval(x[e.coordinate], 1);
                          return g;
                        },
                        [&](const QuadraticDiag& q) -> Vector { return q.curvature.cwiseProduct(x); },
                    },
                    obj.parameters());
}

Vector hessian_diagonal(const Objective& obj, CRef<Vector> x) {
  check_dim(obj, x);
  if (!obj.has_hessian()) throw std::logic_error("objective: Hessian is not exposed for this objective");
  return std::visit(overloaded{
                        [&](const SeparableLinearPlusBumps& s) {
                          Vector h = Vector::Zero(x.size());
                          for (std::size_t t = 0; t < s.bumps.size(); ++t) {
                            const Index i = static_cast<Index>(t) + 1;
                            h[i] = s.bumps[t].eval(x[i], 2);
                          }
                          return h;
                        },
                        [&](const EmbeddedScalar&) -> Vector { throw std::logic_error("unreachable"); },
                        [&](const QuadraticDiag& q) -> Vector { return q.curvature; },
                    },
                    obj.parameters());
}

Matrix hessian(const Objective& obj, CRef<Vector> x) { return hessian_diagonal(obj, x).asDiagonal(); }

double suboptimality_gap(const Objective& obj, CRef<Vector> x1) {
  check_dim(obj, x1);
  return std::visit(
      overloaded{
          [&](const SeparableLinearPlusBumps&) -> double {
            throw std::logic_error(
                "suboptimality_gap: separable objective is unbounded below; use the interpolation certificate");
          },
          [&](const EmbeddedScalar& e) { return e.scalar(x1[e.coordinate]) - e.scalar.infimum(); },
          [&](const QuadraticDiag&) { return value(obj, x1); },
      },
      obj.parameters());
}

}  // namespace sgdlb
