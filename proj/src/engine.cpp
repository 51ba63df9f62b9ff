#include "sgdlb/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sgdlb {

namespace {

void require_non_negative(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be finite and >= 0");
}

// Gram matrix over [x_1..x_t, g_1..g_t] kept incrementally; the storage is
// interleaved (x_1, g_1, x_2, g_2, ...) and permuted on request.
class GramTracker {
 public:
  void push(const Vector& v) {
    const Index n = static_cast<Index>(vectors_.size());
    Matrix grown = Matrix::Zero(n + 1, n + 1);
    grown.topLeftCorner(n, n) = inner_;
    for (Index k = 0; k < n; ++k) {
      const double ip = vectors_[static_cast<std::size_t>(k)].dot(v);
      grown(k, n) = ip;
      grown(n, k) = ip;
    }
    grown(n, n) = v.squaredNorm();
    inner_ = std::move(grown);
    vectors_.push_back(v);
  }

  // Iterates occupy even slots, gradients odd slots.
  Matrix ordered(Index iterates, Index grads) const {
    std::vector<Index> order;
    for (Index k = 0; k < iterates; ++k) order.push_back(2 * k);
    for (Index k = 0; k < grads; ++k) order.push_back(2 * k + 1);
    const Index n = static_cast<Index>(order.size());
    Matrix g(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) g(i, j) = inner_(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    return g;
  }

 private:
  std::vector<Vector> vectors_;
  Matrix inner_;
};

Matrix gram_of_prefix(const std::vector<Vector>& xs, const std::vector<Vector>& gs, Index t_iter, Index t_grad) {
  std::vector<Vector> all;
  all.reserve(static_cast<std::size_t>(t_iter + t_grad));
  for (Index k = 0; k < t_iter; ++k) all.push_back(xs[static_cast<std::size_t>(k)]);
  for (Index k = 0; k < t_grad; ++k) all.push_back(gs[static_cast<std::size_t>(k)]);
  return gram_matrix(all);
}

std::vector<double> weights_for(const AggregationRule& agg, Index T, const Matrix* gram) {
  if (const auto* fw = std::get_if<FixedWeights>(&agg.kind())) {
    if (static_cast<Index>(fw->weights.size()) != T)
      throw std::invalid_argument("aggregation: expected " + std::to_string(T) + " weights, got " +
                                  std::to_string(fw->weights.size()));
    return fw->weights;
  }
  if (const auto* ga = std::get_if<GramAdaptiveWeights>(&agg.kind())) {
    if (gram == nullptr) throw std::invalid_argument("aggregation: Gram-adaptive weights need a full recording");
    const Vector w = ga->rule(*gram, T);
    if (w.size() != T) throw std::invalid_argument("aggregation: Gram rule returned the wrong number of weights");
    return std::vector<double>(w.data(), w.data() + w.size());
  }
  return {};
}

}  // namespace

StepSchedule StepSchedule::constant(double eta) {
  require_non_negative(eta, "constant step");
  return StepSchedule(ConstantStep{eta});
}

StepSchedule StepSchedule::list(std::vector<double> etas) {
  for (double e : etas) require_non_negative(e, "step");
  return StepSchedule(StepList{std::move(etas)});
}

StepSchedule StepSchedule::poly_decay(double a, double b, double theta) {
  if (!(a > 0)) throw std::invalid_argument("poly_decay: a must be positive");
  require_non_negative(b, "poly_decay b");
  require_non_negative(theta, "poly_decay theta");
  return StepSchedule(PolyDecay{a, b, theta});
}

StepSchedule StepSchedule::gram_adaptive(GramStepRule rule, bool wants_hessians) {
  if (!rule) throw std::invalid_argument("gram_adaptive: empty rule");
  return StepSchedule(GramAdaptiveStep{std::move(rule), wants_hessians});
}

double StepSchedule::step(Index t) const {
  if (t < 1) throw std::invalid_argument("step index is 1-based");
  if (const auto* c = std::get_if<ConstantStep>(&kind_)) return c->eta;
  if (const auto* l = std::get_if<StepList>(&kind_)) {
    if (t > static_cast<Index>(l->etas.size()))
      throw std::invalid_argument("step list has " + std::to_string(l->etas.size()) + " entries, step " +
                                  std::to_string(t) + " requested");
    return l->etas[static_cast<std::size_t>(t - 1)];
  }
  if (const auto* p = std::get_if<PolyDecay>(&kind_)) return p->a / (p->b + std::pow(static_cast<double>(t), p->theta));
  throw std::logic_error("step: Gram-adaptive schedules have no fixed steps");
}

std::vector<double> StepSchedule::steps(Index count) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max<Index>(count, 0)));
  for (Index t = 1; t <= count; ++t) out.push_back(step(t));
  return out;
}

AggregationRule AggregationRule::fixed_weights(std::vector<double> weights) {
  for (double w : weights)
    if (!std::isfinite(w)) throw std::invalid_argument("aggregation weight must be finite");
  return AggregationRule(FixedWeights{std::move(weights)});
}

AggregationRule AggregationRule::last_iterate(Index T) {
  std::vector<double> w(static_cast<std::size_t>(T), 0.0);
  if (T > 0) w.back() = 1.0;
  return fixed_weights(std::move(w));
}

Matrix gram_matrix(std::span<const Vector> vectors) {
  const Index n = static_cast<Index>(vectors.size());
  Matrix g(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j <= i; ++j) {
      g(i, j) = vectors[static_cast<std::size_t>(i)].dot(vectors[static_cast<std::size_t>(j)]);
      g(j, i) = g(i, j);
    }
  return g;
}

Trajectory run(const Objective& obj, CRef<Vector> x1, Index T, const StepSchedule& schedule, const NoiseModel& noise,
               const AggregationRule& agg, const RunOptions& options) {
  if (x1.size() != obj.dim())
    throw std::invalid_argument("run: x1 has dimension " + std::to_string(x1.size()) + ", objective has " +
                                std::to_string(obj.dim()));
  if (T < 1) throw std::invalid_argument("run: T must be positive");
  if (noise.kind == NoiseKind::rademacher_coordinate && obj.dim() < T)
    throw std::invalid_argument("run: rademacher noise needs dimension >= T");
  const bool full = options.recording == Recording::full;
  const bool gram_steps = schedule.adaptive();
  const bool gram_weights = std::holds_alternative<GramAdaptiveWeights>(agg.kind());
  if (!full && (gram_steps || gram_weights))
    throw std::invalid_argument("run: Gram-adaptive rules need Recording::full");
  for (Index c : options.tracked_coordinates)
    if (c < 0 || c >= obj.dim()) throw std::invalid_argument("run: tracked coordinate out of range");

  const Index d = obj.dim();
  Trajectory traj;
  traj.T = T;
  traj.recording = options.recording;
  traj.grad_sum = Vector::Zero(d);
  traj.tracked.resize(T, static_cast<Index>(options.tracked_coordinates.size()));

  std::vector<double> fixed_weights;
  if (!gram_weights) fixed_weights = weights_for(agg, T, nullptr);
  Vector out_sum;
  if (!fixed_weights.empty() && !full) out_sum = Vector::Zero(d);

  const auto* gram_rule = std::get_if<GramAdaptiveStep>(&schedule.kind());
  GramTracker tracker;
  std::vector<Matrix> hessians;

  Vector x = x1;
  for (Index t = 1; t <= T; ++t) {
    Vector grad = gradient(obj, x);
    const double gnorm = grad.norm();
    traj.values.push_back(value(obj, x));
    traj.grad_norms.push_back(gnorm);
    traj.grad_sum += grad;
    for (std::size_t k = 0; k < options.tracked_coordinates.size(); ++k)
      traj.tracked(t - 1, static_cast<Index>(k)) = x[options.tracked_coordinates[k]];
    if (out_sum.size() > 0) out_sum += fixed_weights[static_cast<std::size_t>(t - 1)] * x;
    if (gram_rule && gram_rule->wants_hessians) hessians.push_back(hessian(obj, x));
    if (full) {
      traj.iterates.push_back(x);
      traj.true_grads.push_back(grad);
    }
    if (t == T) break;

    Vector g = grad + draw_noise(noise, t, d);
    double eta = 0.0;
    if (gram_rule) {
      tracker.push(x);
      tracker.push(g);
      const Matrix gram = tracker.ordered(t, t);
      eta = gram_rule->rule(GramContext{gram, t, gram_rule->wants_hessians ? &hessians : nullptr});
      if (!std::isfinite(eta)) throw std::runtime_error("run: Gram rule produced a non-finite step at t = " + std::to_string(t));
    } else {
      eta = schedule.step(t);
    }
    Vector next = x - eta * g;
    traj.realized_steps.push_back(eta);
    if (full) traj.noisy_grads.push_back(std::move(g));
    x = std::move(next);
  }
  traj.last_iterate = x;

  if (agg.active()) {
    if (full) {
      traj.x_out = aggregate(traj, agg);
    } else {
      traj.x_out = out_sum;
    }
  }
  traj.criteria = criteria(traj);
  if (traj.x_out) traj.criteria.grad_norm_at_out = gradient(obj, *traj.x_out).norm();
  return traj;
}

Vector aggregate(const Trajectory& traj, const AggregationRule& agg) {
  if (traj.recording != Recording::full || static_cast<Index>(traj.iterates.size()) != traj.T)
    throw std::invalid_argument("aggregate: trajectory must be fully recorded");
  if (!agg.active()) throw std::invalid_argument("aggregate: no aggregation rule");
  const Index T = traj.T;
  Matrix gram;
  const bool gram_weights = std::holds_alternative<GramAdaptiveWeights>(agg.kind());
  if (gram_weights) gram = gram_of_prefix(traj.iterates, traj.noisy_grads, T, T - 1);
  const std::vector<double> w = weights_for(agg, T, gram_weights ? &gram : nullptr);
  Vector out = Vector::Zero(traj.iterates.front().size());
  for (Index t = 0; t < T; ++t) out += w[static_cast<std::size_t>(t)] * traj.iterates[static_cast<std::size_t>(t)];
  return out;
}

Criteria criteria(const Trajectory& traj) {
  Criteria c;
  const auto T = static_cast<double>(traj.T);
  std::vector<double> norms;
  Vector sum;
  if (traj.recording == Recording::full && !traj.true_grads.empty()) {
    sum = Vector::Zero(traj.true_grads.front().size());
    for (const Vector& g : traj.true_grads) {
      norms.push_back(g.norm());
      sum += g;
    }
  } else {
    norms = traj.grad_norms;
    sum = traj.grad_sum;
  }
  if (norms.empty()) return c;
  c.min_grad_norm = *std::min_element(norms.begin(), norms.end());
  double total = 0.0;
  for (double n : norms) total += n;
  c.avg_grad_norm = total / T;
  c.norm_of_avg_grad = (sum / T).norm();
  c.grad_norm_at_out = traj.criteria.grad_norm_at_out;
  return c;
}

CriteriaSummary criteria(std::span<const Trajectory> batch) {
  CriteriaSummary s;
  s.replications = static_cast<Index>(batch.size());
  if (batch.empty()) return s;
  const auto n = static_cast<double>(batch.size());
  auto stats = [&](auto field) {
    double mean = 0.0;
    for (const auto& tr : batch) mean += field(tr.criteria);
    mean /= n;
    double var = 0.0;
    for (const auto& tr : batch) var += (field(tr.criteria) - mean) * (field(tr.criteria) - mean);
    const double se = batch.size() > 1 ? std::sqrt(var / (n - 1) / n) : 0.0;
    return std::pair{mean, se};
  };
  std::tie(s.mean.min_grad_norm, s.standard_error.min_grad_norm) = stats([](const Criteria& c) { return c.min_grad_norm; });
  std::tie(s.mean.avg_grad_norm, s.standard_error.avg_grad_norm) = stats([](const Criteria& c) { return c.avg_grad_norm; });
  std::tie(s.mean.norm_of_avg_grad, s.standard_error.norm_of_avg_grad) =
      stats([](const Criteria& c) { return c.norm_of_avg_grad; });
  const bool have_out = std::all_of(batch.begin(), batch.end(), [](const Trajectory& tr) {
    return tr.criteria.grad_norm_at_out.has_value();
  });
  if (have_out) {
    auto [m, se] = stats([](const Criteria& c) { return *c.grad_norm_at_out; });
    s.mean.grad_norm_at_out = m;
    s.standard_error.grad_norm_at_out = se;
  }
  return s;
}

std::vector<double> replay_gram_steps(const Trajectory& traj, const GramStepRule& rule) {
  if (traj.recording != Recording::full) throw std::invalid_argument("replay_gram_steps: needs a full recording");
  std::vector<double> steps;
  for (Index t = 1; t < traj.T; ++t) {
    const Matrix gram = gram_of_prefix(traj.iterates, traj.noisy_grads, t, t);
    steps.push_back(rule(GramContext{gram, t, nullptr}));
  }
  return steps;
}

GramStepRule adagrad_norm_rule(double eta0) {
  return [eta0](const GramContext& ctx) {
    double acc = 0.0;
    for (Index k = 0; k < ctx.t; ++k) acc += ctx.gram(ctx.t + k, ctx.t + k);
    return acc > 0.0 ? eta0 / std::sqrt(acc) : eta0;
  };
}

GramStepRule normalized_gradient_rule(double eta0) {
  return [eta0](const GramContext& ctx) {
    const double n2 = ctx.gram(2 * ctx.t - 1, 2 * ctx.t - 1);
    return n2 > 0.0 ? eta0 / std::sqrt(n2) : eta0;
  };
}

GramWeightRule shortest_noisy_gradient_weights() {
  return [](const Matrix& gram, Index T) {
    Vector w = Vector::Zero(T);
    if (T == 1) {
      w[0] = 1.0;
      return w;
    }
    Index best = 0;
    for (Index k = 1; k < T - 1; ++k)
      if (gram(T + k, T + k) < gram(T + best, T + best)) best = k;
    w[best] = 1.0;
    return w;
  };
}

}  // namespace sgdlb
