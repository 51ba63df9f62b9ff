#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sgdlb/noise.hpp"
#include "sgdlb/objectives.hpp"
#include "sgdlb/types.hpp"

namespace sgdlb {

/// What a Gram-restricted step rule gets to see at step t: the Gram matrix of
/// [x_1, ..., x_t, g_1, ..., g_t] (size 2t, iterates first) and, if asked
/// for, the exact Hessians at x_1..x_t.
struct GramContext {
  const Matrix& gram;
  Index t;
  const std::vector<Matrix>* hessians = nullptr;
};

using GramStepRule = std::function<double(const GramContext&)>;

/// Aggregation weights from the Gram matrix of [x_1..x_T, g_1..g_{T-1}].
using GramWeightRule = std::function<Vector(const Matrix& gram, Index T)>;

struct ConstantStep {
  double eta;
};
struct StepList {
  std::vector<double> etas;
};
/// eta_t = a / (b + t^theta)
struct PolyDecay {
  double a;
  double b;
  double theta;
};
struct GramAdaptiveStep {
  GramStepRule rule;
  bool wants_hessians = false;
};

class StepSchedule {
 public:
  using Kind = std::variant<ConstantStep, StepList, PolyDecay, GramAdaptiveStep>;

  static StepSchedule constant(double eta);
  static StepSchedule list(std::vector<double> etas);
  static StepSchedule poly_decay(double a, double b, double theta);
  static StepSchedule gram_adaptive(GramStepRule rule, bool wants_hessians = false);

  const Kind& kind() const { return kind_; }
  bool adaptive() const { return std::holds_alternative<GramAdaptiveStep>(kind_); }

  /// Step t (1-based) of a non-adaptive schedule.
  double step(Index t) const;
  /// Steps 1..count of a non-adaptive schedule.
  std::vector<double> steps(Index count) const;

 private:
  explicit StepSchedule(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

struct NoAggregation {};
struct FixedWeights {
  std::vector<double> weights;
};
struct GramAdaptiveWeights {
  GramWeightRule rule;
};

class AggregationRule {
 public:
  using Kind = std::variant<NoAggregation, FixedWeights, GramAdaptiveWeights>;

  static AggregationRule none() { return AggregationRule(NoAggregation{}); }
  static AggregationRule fixed_weights(std::vector<double> weights);
  static AggregationRule uniform(Index T) { return fixed_weights(std::vector<double>(T, 1.0 / T)); }
  static AggregationRule last_iterate(Index T);
  static AggregationRule gram_adaptive(GramWeightRule rule) { return AggregationRule(GramAdaptiveWeights{std::move(rule)}); }

  const Kind& kind() const { return kind_; }
  bool active() const { return !std::holds_alternative<NoAggregation>(kind_); }

 private:
  explicit AggregationRule(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

struct Criteria {
  double min_grad_norm = 0.0;
  double avg_grad_norm = 0.0;
  double norm_of_avg_grad = 0.0;
  std::optional<double> grad_norm_at_out;

  double min_grad_norm_sq() const { return min_grad_norm * min_grad_norm; }
};

enum class Recording { full, summary };

struct RunOptions {
  Recording recording = Recording::full;
  /// Coordinates whose value is kept at every iterate, in either mode.
  std::vector<Index> tracked_coordinates;
};

/// One SGD run. With Recording::summary the vector histories are left empty
/// and only scalars, tracked coordinates and the gradient sum are kept.
struct Trajectory {
  Index T = 0;
  Recording recording = Recording::full;
  std::vector<Vector> iterates;
  std::vector<Vector> noisy_grads;  // g_t = grad f(x_t) + xi_t, t < T
  std::vector<Vector> true_grads;
  std::vector<double> values;
  std::vector<double> grad_norms;
  std::vector<double> realized_steps;
  Vector grad_sum;
  Matrix tracked;  // T x tracked_coordinates.size()
  std::optional<Vector> x_out;
  Vector last_iterate;
  Criteria criteria;
};

Trajectory run(const Objective& obj, CRef<Vector> x1, Index T, const StepSchedule& schedule, const NoiseModel& noise,
               const AggregationRule& agg = AggregationRule::none(), const RunOptions& options = {});

/// sum_t zeta_t x_t over a fully recorded trajectory.
Vector aggregate(const Trajectory& traj, const AggregationRule& agg);

/// Recomputes the criteria from the recorded gradients (or norms, in
/// summary mode).
Criteria criteria(const Trajectory& traj);

struct CriteriaSummary {
  Criteria mean;
  Criteria standard_error;
  Index replications = 0;
};

/// Expected-value estimators over a batch of replications.
CriteriaSummary criteria(std::span<const Trajectory> batch);

/// Gram matrix of the given vectors.
Matrix gram_matrix(std::span<const Vector> vectors);

/// Step sequence a Gram rule produces when replayed on a recorded trajectory.
std::vector<double> replay_gram_steps(const Trajectory& traj, const GramStepRule& rule);

/// eta_t = eta0 / sqrt(sum_{k<=t} ||g_k||^2)
GramStepRule adagrad_norm_rule(double eta0);
/// eta_t = eta0 / ||g_t||
GramStepRule normalized_gradient_rule(double eta0);
/// All weight on the iterate whose noisy gradient is shortest.
GramWeightRule shortest_noisy_gradient_weights();

}  // namespace sgdlb
