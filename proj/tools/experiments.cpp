#include "experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "sgdlb/bounds.hpp"
#include "sgdlb/instances.hpp"
#include "sgdlb/interpolation.hpp"

namespace sgdlb::cli {

namespace {

using Keys = std::vector<std::string>;

Keys with_common(Keys extra) {
  extra.insert(extra.end(), {"experiment", "seed", "replications"});
  return extra;
}

std::string fmt_index(Index v) { return std::to_string(v); }
std::string fmt_seed(std::uint64_t v) { return std::to_string(v); }
std::string fmt_bool(bool v) { return v ? "1" : "0"; }

std::uint64_t rep_seed(std::uint64_t base, Index r) { return replication_seed(base, static_cast<std::uint64_t>(r)); }

Index replications(const Config& c, Index fallback) {
  const Index n = c.integer("replications", fallback);
  if (n < 1) throw ConfigError("replications", "must be at least 1");
  return n;
}

Index horizon(const Config& c, Index fallback) {
  const Index T = c.integer("T", fallback);
  if (T < 2) throw ConfigError("T", "must be at least 2");
  return T;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  const auto n = static_cast<double>(v.size());
  return std::sqrt(acc / (n - 1.0) / n);
}

// Builder errors that come from parameter values are configuration errors.
template <class F>
auto as_config_error(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
}

std::vector<double> weights_of(const AggregationRule& rule, Index T) {
  if (const auto* fw = std::get_if<FixedWeights>(&rule.kind())) return fw->weights;
  return std::vector<double>(static_cast<std::size_t>(T), 1.0 / static_cast<double>(T));
}

std::vector<double> fixed_steps(const ScheduleSpec& spec, Index T, std::uint64_t seed) {
  if (spec.adaptive()) throw ConfigError("schedule", "this experiment needs a non-adaptive schedule");
  return as_config_error("schedule", [&] { return spec.build(T, seed).steps(T - 1); });
}

void add_summary_reports(ExperimentResult& res) {
  auto& arr = res.summary["reports"] = nlohmann::ordered_json::array();
  for (const auto& r : res.reports) arr.push_back(report_json(r));
}

// ---- simulate ---------------------------------------------------------------

ExperimentResult run_simulate(const Config& c) {
  c.require_only(with_common({"L", "delta_gap", "sigma", "T", "d", "objective", "noise", "schedule", "agg", "x1"}));
  ExperimentResult res;
  const double L = c.positive("L", 1.0);
  const double Delta = c.positive("delta_gap", 1.0);
  const double sigma = c.number("sigma", 1.0);
  if (sigma < 0.0) throw ConfigError("sigma", "must be non-negative");
  const Index T = horizon(c, 100);
  const Index d = c.integer("d", 10);
  if (d < 1) throw ConfigError("d", "must be positive");
  const Index reps = replications(c, 10);
  const std::uint64_t seed = c.seed();
  const std::string objective = c.text("objective", "quadratic");
  const std::string noise_kind = c.text("noise", "gaussian");
  const ScheduleSpec spec = ScheduleSpec::parse(c.text("schedule", "constant:0.1"));
  const AggregationSpec agg_spec = AggregationSpec::parse(c.text("agg", "none"));

  std::optional<Objective> obj;
  double x1_default = 0.0;
  if (objective == "quadratic") {
    obj = Objective::isotropic_quadratic(d, L);
    x1_default = std::sqrt(2.0 * Delta / L);
  } else if (objective == "sigmoid") {
    obj = Objective::embedded(d, 0, make_sigmoid<double>());
    x1_default = 0.5;
  } else {
    throw ConfigError("objective", "expected quadratic or sigmoid");
  }
  Vector x1 = Vector::Zero(d);
  x1[0] = c.number("x1", x1_default);

  NoiseModel noise;
  if (noise_kind == "gaussian") {
    noise = NoiseModel::gaussian(sigma, 0);
  } else if (noise_kind == "rademacher") {
    if (d < T) throw ConfigError("noise", "rademacher noise needs d >= T");
    noise = NoiseModel::rademacher(sigma, 0);
  } else if (noise_kind == "none") {
    noise = NoiseModel::none();
  } else {
    throw ConfigError("noise", "expected gaussian, rademacher or none");
  }

  const StepSchedule schedule = spec.build(T, seed);
  const AggregationRule agg = agg_spec.build(T, seed);
  RunOptions options;
  options.recording = (spec.adaptive() || agg_spec.kind == "gram-minnorm") ? Recording::full : Recording::summary;

  res.table.columns = {"replication", "seed", "min_grad_norm", "avg_grad_norm", "norm_of_avg_grad", "grad_norm_at_out",
                       "final_value"};
  std::vector<double> min_sq, mins, avgs, norms, outs, finals;
  for (Index r = 0; r < reps; ++r) {
    const auto s = rep_seed(seed, r);
    const Trajectory tr = run(*obj, x1, T, schedule, noise.with_seed(s), agg, options);
    const auto& cr = tr.criteria;
    min_sq.push_back(cr.min_grad_norm_sq());
    mins.push_back(cr.min_grad_norm);
    avgs.push_back(cr.avg_grad_norm);
    norms.push_back(cr.norm_of_avg_grad);
    finals.push_back(value(*obj, tr.last_iterate));
    if (cr.grad_norm_at_out) outs.push_back(*cr.grad_norm_at_out);
    res.table.add({fmt_index(r), fmt_seed(s), format_real(cr.min_grad_norm), format_real(cr.avg_grad_norm),
                   format_real(cr.norm_of_avg_grad), cr.grad_norm_at_out ? format_real(*cr.grad_norm_at_out) : "",
                   format_real(finals.back())});
  }
  res.table.add({"summary", "", format_real(mean_of(mins)), format_real(mean_of(avgs)), format_real(mean_of(norms)),
                 outs.empty() ? "" : format_real(mean_of(outs)), format_real(mean_of(finals))});

  if (objective == "quadratic" && !spec.adaptive() && noise_kind == "gaussian") {
    const auto steps = schedule.steps(T - 1);
    if (std::all_of(steps.begin(), steps.end(), [&](double e) { return e > 0.0 && L * e < 1.0; })) {
      const double gap = suboptimality_gap(*obj, x1);
      res.reports.push_back(make_report("ghadimi_lan", ghadimi_lan_bound(L, gap, sigma, steps), mean_of(min_sq), reps,
                                        BoundSense::upper, 0.0, 3.0 * se_of(min_sq)));
    }
  }
  res.summary["mean_min_grad_sq"] = mean_of(min_sq);
  return res;
}

// ---- aggregation_step ---------------------------------------------------------

ExperimentResult run_aggregation(const Config& c) {
  c.require_only(with_common({"L", "delta_gap", "sigma", "T", "schedule", "agg", "beta_samples"}));
  ExperimentResult res;
  const double L = c.positive("L", 1.0);
  const double Delta = c.positive("delta_gap", 1.0);
  const double sigma = c.positive("sigma", 1.0);
  const Index T = horizon(c, 100);
  const Index reps = replications(c, 50);
  const std::uint64_t seed = c.seed();
  const Index beta_samples = c.integer("beta_samples", 1000);
  if (beta_samples < 0) throw ConfigError("beta_samples", "must be non-negative");
  const ScheduleSpec spec = ScheduleSpec::parse(c.text("schedule", "random:0," + format_real(1.0 / L)));
  const AggregationSpec agg_spec = AggregationSpec::parse(c.text("agg", "random"));
  const StepSchedule schedule = spec.build(T, seed);
  const AggregationRule agg = agg_spec.build(T, seed);
  const bool adaptive = spec.adaptive() || agg_spec.kind == "gram-minnorm";

  std::optional<LowerBoundInstance> fixed;
  if (!adaptive)
    fixed = as_config_error("schedule", [&] {
      return build_aggregation_instance(L, Delta, sigma, T, schedule.steps(T - 1), weights_of(agg, T));
    });

  res.table.columns = {"replication", "seed", "min_grad_sq", "grad_sq_at_out", "max_grad_deviation", "certificate",
                       "verdict"};
  double worst_dev = 0.0, worst_cert = -std::numeric_limits<double>::infinity();
  std::vector<double> min_sq;
  std::optional<LowerBoundInstance> first;
  for (Index r = 0; r < reps; ++r) {
    const auto s = rep_seed(seed, r);
    LowerBoundInstance inst = [&] {
      if (fixed) return *fixed;
      const RealizedPolicy policy = probe_aggregation_policy(L, Delta, sigma, T, schedule, agg, s);
      return build_aggregation_instance(L, Delta, sigma, T, policy.steps, policy.weights, s);
    }();
    const Trajectory tr = run(inst.objective, inst.x1, T, adaptive ? schedule : inst.schedule(), inst.noise.with_seed(s),
                              adaptive ? agg : inst.aggregation());
    const auto rep = verify_aggregation_instance(inst, tr);
    worst_dev = std::max(worst_dev, rep[0].empirical);
    worst_cert = std::max(worst_cert, rep[1].empirical);
    min_sq.push_back(tr.criteria.min_grad_norm_sq());
    const double out_sq = tr.criteria.grad_norm_at_out ? *tr.criteria.grad_norm_at_out * *tr.criteria.grad_norm_at_out : 0.0;
    res.table.add({fmt_index(r), fmt_seed(s), format_real(min_sq.back()), format_real(out_sq),
                   format_real(rep[0].empirical), format_real(rep[1].empirical), to_string(all_passed(rep) ? Verdict::pass : Verdict::fail)});
    if (!first) first = std::move(inst);
  }
  const double gamma_sq = first->predict("gamma_sq");
  res.reports.push_back(make_report("gradient_constancy", 0.0, worst_dev, reps, BoundSense::upper, 0.0, 1e-12));
  res.reports.push_back(make_report("suboptimality_certificate", Delta, worst_cert, reps, BoundSense::upper, 1e-9));
  res.reports.push_back(
      make_report("min_grad_sq_equals_gamma_sq", gamma_sq, mean_of(min_sq), reps, BoundSense::lower, 1e-12));
  if (T - 1 <= 11 || beta_samples > 0) {
    const auto beta = verify_beta_feasibility(*first, BetaCheck{11, beta_samples, seed});
    res.reports.insert(res.reports.end(), beta.begin(), beta.end());
  }
  res.table.add({"summary", "", format_real(mean_of(min_sq)), "", format_real(worst_dev), format_real(worst_cert),
                 to_string(res.passed() ? Verdict::pass : Verdict::fail)});
  res.summary["gamma_sq"] = gamma_sq;
  res.summary["G"] = std::sqrt(gamma_sq);
  return res;
}

// ---- nonconvex_hessian ----------------------------------------------------------

ExperimentResult run_hessian(const Config& c) {
  c.require_only(with_common({"rho", "delta_gap", "sigma", "T", "schedule"}));
  ExperimentResult res;
  const double rho = c.positive("rho", 1.0);
  const double Delta = c.positive("delta_gap", 1.0);
  const double sigma = c.positive("sigma", 1.0);
  const Index T = horizon(c, 100);
  const Index reps = replications(c, 20);
  const std::uint64_t seed = c.seed();
  const ScheduleSpec spec = ScheduleSpec::parse(c.text("schedule", "random:0,1"));
  const auto steps = fixed_steps(spec, T, seed);
  const LowerBoundInstance inst =
      as_config_error("schedule", [&] { return build_hessian_instance(rho, Delta, sigma, T, steps); });

  res.table.columns = {"replication", "seed", "min_grad_sq", "max_grad_deviation", "max_value_drop", "max_curvature",
                       "verdict"};
  double dev = 0.0, drop = -std::numeric_limits<double>::infinity(), per_step = drop, curv = 0.0;
  std::vector<double> min_sq;
  for (Index r = 0; r < reps; ++r) {
    const auto s = rep_seed(seed, r);
    const Trajectory tr = run(inst.objective, inst.x1, T, inst.schedule(), inst.noise.with_seed(s));
    const auto rep = verify_hessian_instance(inst, tr);
    dev = std::max(dev, rep[0].empirical);
    drop = std::max(drop, rep[1].empirical);
    per_step = std::max(per_step, rep[2].empirical);
    curv = std::max(curv, rep[3].empirical);
    min_sq.push_back(tr.criteria.min_grad_norm_sq());
    res.table.add({fmt_index(r), fmt_seed(s), format_real(min_sq.back()), format_real(rep[0].empirical),
                   format_real(rep[1].empirical), format_real(rep[3].empirical),
                   to_string(all_passed(rep) ? Verdict::pass : Verdict::fail)});
  }
  res.reports.push_back(make_report("gradient_constancy", 0.0, dev, reps, BoundSense::upper, 0.0, 1e-12));
  res.reports.push_back(make_report("value_drop", Delta, drop, reps, BoundSense::upper, 1e-9));
  res.reports.push_back(make_report("value_drop_per_step", 0.0, per_step, reps, BoundSense::upper, 0.0, 1e-9 * Delta));
  res.reports.push_back(make_report("bump_curvature_at_iterates", 0.0, curv, reps, BoundSense::upper));
  res.reports.push_back(make_report("min_grad_sq_vs_bound", inst.predict("bound"), mean_of(min_sq), reps,
                                    BoundSense::lower, 1e-12));
  res.table.add({"summary", "", format_real(mean_of(min_sq)), format_real(dev), format_real(drop), format_real(curv),
                 to_string(res.passed() ? Verdict::pass : Verdict::fail)});
  res.summary["gamma_sq"] = inst.predict("gamma_sq");
  res.summary["bound"] = inst.predict("bound");
  return res;
}

// ---- convex quadratic propositions --------------------------------------------

void frequency_rows(ExperimentResult& res, const LowerBoundInstance& inst, const std::vector<Trajectory>& batch,
                    std::uint64_t seed, double threshold) {
  res.table.columns = {"replication", "seed", "min_grad_sq", "threshold", "meets_threshold"};
  Index hits = 0;
  std::vector<double> min_sq;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const double v = batch[r].criteria.min_grad_norm_sq();
    min_sq.push_back(v);
    hits += v >= threshold;
    res.table.add({fmt_index(static_cast<Index>(r)), fmt_seed(rep_seed(seed, static_cast<Index>(r))), format_real(v),
                   format_real(threshold), fmt_bool(v >= threshold)});
  }
  res.table.add({"summary", "", format_real(mean_of(min_sq)), format_real(threshold),
                 format_real(static_cast<double>(hits) / static_cast<double>(batch.size()))});
  res.summary["d"] = inst.params.d;
  for (const auto& [k, v] : inst.predicted) res.summary[k] = v;
}

ExperimentResult run_distance(const Config& c) {
  c.require_only(with_common({"L", "delta_gap", "sigma", "T", "delta_prob", "d", "schedule"}));
  ExperimentResult res;
  const double L = c.positive("L", 1.0);
  const double Delta = c.positive("delta_gap", 1.0);
  const double sigma = c.positive("sigma", 1.0);
  const Index T = horizon(c, 64);
  const double delta = c.positive("delta_prob", 0.1);
  const Index reps = replications(c, 200);
  const std::uint64_t seed = c.seed();
  const ScheduleSpec spec =
      ScheduleSpec::parse(c.text("schedule", "constant:" + format_real(1.0 / (L * std::sqrt(static_cast<double>(T))))));
  const auto steps = fixed_steps(spec, T, seed);
  const double M = distance_scale(L, steps);
  const Index d = c.integer("d", static_cast<Index>(std::ceil(distance_d0(L, Delta, sigma, T, delta, M))));
  const LowerBoundInstance inst =
      as_config_error("d", [&] { return build_quadratic_distance_instance(L, Delta, sigma, T, delta, d, steps); });
  const auto batch = run_replications(inst, reps, seed);
  res.reports = verify_distance_instance(inst, batch);
  frequency_rows(res, inst, batch, seed, inst.predict("bound"));
  return res;
}

ExperimentResult run_noise(const Config& c) {
  c.require_only(with_common({"L", "delta_gap", "sigma", "T", "delta_prob", "d", "schedule"}));
  ExperimentResult res;
  const double L = c.positive("L", 1.0);
  const double Delta = c.positive("delta_gap", 1.0);
  const double sigma = c.positive("sigma", 1.0);
  const Index T = horizon(c, 64);
  const double delta = c.positive("delta_prob", 0.1);
  const Index reps = replications(c, 200);
  const std::uint64_t seed = c.seed();
  const ScheduleSpec spec = ScheduleSpec::parse(c.text("schedule", "constant:" + format_real(0.5 / L)));
  const Index d = c.integer("d", static_cast<Index>(std::ceil(noise_d0(T, delta))));
  const LowerBoundInstance inst = as_config_error("schedule", [&] {
    if (spec.kind == "poly")
      return build_quadratic_noise_instance(L, Delta, sigma, T, delta, d,
                                            ScaledPolyDecay{spec.values[0] * L, spec.values[1], spec.values[2]});
    return build_quadratic_noise_instance(L, Delta, sigma, T, delta, d, fixed_steps(spec, T, seed));
  });
  const auto batch = run_replications(inst, reps, seed);
  res.reports = verify_noise_instance(inst, batch);
  const double threshold = inst.predicted.count("bound_effective") ? inst.predict("bound_effective")
                           : inst.predicted.count("bound")         ? inst.predict("bound")
                                                                   : 0.0;
  frequency_rows(res, inst, batch, seed, threshold);
  res.summary["case"] = to_string(inst.theorem);
  return res;
}

// ---- upper bounds -----------------------------------------------------------

ExperimentResult run_upper(const Config& c, const std::string& which) {
  c.require_only(with_common({"L", "delta_gap", "sigma", "T", "d", "schedule", "kappa"}));
  ExperimentResult res;
  const double L = c.positive("L", 1.0);
  const double Delta = c.positive("delta_gap", 1.0);
  double sigma = c.number("sigma", which == "gd_corollary" ? 0.0 : 1.0);
  if (sigma < 0.0) throw ConfigError("sigma", "must be non-negative");
  if (which == "gd_corollary" && sigma != 0.0) throw ConfigError("sigma", "the GD corollary is noiseless; use sigma = 0");
  const Index T = horizon(c, 100);
  const Index d = c.integer("d", 100);
  if (d < 1) throw ConfigError("d", "must be positive");
  const Index reps = replications(c, 50);
  const std::uint64_t seed = c.seed();
  const ScheduleSpec spec = ScheduleSpec::parse(c.text("schedule", "constant:" + format_real(0.5 / L)));
  const auto steps = fixed_steps(spec, T, seed);

  const double bound = as_config_error("schedule", [&] {
    if (which == "ghadimi_lan") return ghadimi_lan_bound(L, Delta, sigma, steps);
    if (which == "gd_corollary") return gd_corollary_bound(L, Delta, steps);
    const std::string k = c.text("kappa", "one");
    std::vector<double> kappas;
    for (double eta : steps) {
      if (k == "one") {
        kappas.push_back(1.0);
      } else if (k == "gl") {
        kappas.push_back(1.0 - L * eta);
      } else {
        kappas.push_back(parse_number("kappa", k));
      }
    }
    return kappa_bound(L, Delta, sigma, steps, kappas);
  });

  const Objective obj = Objective::isotropic_quadratic(d, L);
  Vector x1 = Vector::Zero(d);
  x1[0] = std::sqrt(2.0 * Delta / L);
  const NoiseModel noise = sigma > 0.0 ? NoiseModel::gaussian(sigma, 0) : NoiseModel::none();
  const StepSchedule schedule = StepSchedule::list(steps);
  RunOptions options;
  options.recording = Recording::summary;
  res.table.columns = {"replication", "seed", "min_grad_sq", "bound"};
  std::vector<double> min_sq;
  for (Index r = 0; r < reps; ++r) {
    const auto s = rep_seed(seed, r);
    min_sq.push_back(run(obj, x1, T, schedule, noise.with_seed(s), AggregationRule::none(), options)
                         .criteria.min_grad_norm_sq());
    res.table.add({fmt_index(r), fmt_seed(s), format_real(min_sq.back()), format_real(bound)});
  }
  res.table.add({"summary", "", format_real(mean_of(min_sq)), format_real(bound)});
  res.reports.push_back(
      make_report(which, bound, mean_of(min_sq), reps, BoundSense::upper, 0.0, 3.0 * se_of(min_sq)));
  res.summary["bound"] = bound;
  return res;
}

// ---- tightness ---------------------------------------------------------------

ExperimentResult run_tightness(const Config& c) {
  c.require_only(with_common({"L", "delta_gap", "sigma", "T"}));
  ExperimentResult res;
  const double L = c.positive("L", 1.0);
  const double Delta = c.positive("delta_gap", 1.0);
  const double sigma = c.positive("sigma", 1.0);
  const Index T = horizon(c, 10000);
  const Index reps = replications(c, 1);
  const std::uint64_t seed = c.seed();
  const TightnessReport rep = tightness_report(L, Delta, sigma, T, reps, seed);
  res.table.columns = {"replication", "seed", "eta", "lower", "min_grad_sq", "upper", "ratio"};
  for (Index r = 0; r < reps; ++r)
    res.table.add({fmt_index(r), fmt_seed(rep_seed(seed, r)), format_real(rep.eta), format_real(rep.lower),
                   format_real(rep.per_replication[static_cast<std::size_t>(r)]), format_real(rep.upper),
                   format_real(rep.ratio)});
  res.table.add({"summary", "", format_real(rep.eta), format_real(rep.lower), format_real(rep.empirical),
                 format_real(rep.upper), format_real(rep.ratio)});
  res.reports = rep.reports;
  res.summary["eta"] = rep.eta;
  res.summary["clamped"] = rep.clamped;
  res.summary["ratio"] = rep.ratio;
  return res;
}

// ---- concentration -------------------------------------------------------------

ExperimentResult run_concentration(const Config& c) {
  c.require_only(with_common({"M", "gamma", "d", "eps", "samples"}));
  ExperimentResult res;
  const double M = c.number("M", 1.0);
  if (M < 0.0) throw ConfigError("M", "must be non-negative");
  const double gamma = c.positive("gamma", 1.0);
  const Index d = c.integer("d", 1000);
  const double eps = c.positive("eps", 0.5);
  const Index samples = c.integer("samples", 100000);
  const Index reps = replications(c, 1);
  const std::uint64_t seed = c.seed();
  res.table.columns = {"replication", "seed", "samples", "failure_rate", "bound", "allowance", "verdict"};
  std::vector<double> rates;
  for (Index r = 0; r < reps; ++r) {
    const auto s = rep_seed(seed, r);
    const BoundReport rep = as_config_error("eps", [&] { return verify_concentration(M, gamma, d, eps, samples, s); });
    rates.push_back(rep.empirical);
    res.table.add({fmt_index(r), fmt_seed(s), fmt_index(samples), format_real(rep.empirical), format_real(rep.theoretical),
                   format_real(rep.absolute_tolerance), to_string(rep.verdict)});
    res.reports.push_back(rep);
  }
  res.table.add({"summary", "", fmt_index(samples * reps), format_real(mean_of(rates)),
                 format_real(concentration_failure_bound(d, eps)), "", to_string(res.passed() ? Verdict::pass : Verdict::fail)});
  res.summary["bound"] = concentration_failure_bound(d, eps);
  return res;
}

// ---- interpolation -------------------------------------------------------------

InterpolationSet<double> read_set(const std::string& path, double L) {
  std::ifstream in(path);
  if (!in) throw ConfigError("set_file", "cannot read '" + path + "'");
  std::vector<InterpolationTriple<double>> triples;
  std::string line;
  Index d = -1;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::stringstream ss(line);
    std::vector<double> vals;
    std::string tok;
    while (ss >> tok) vals.push_back(parse_number("set_file", tok));
    if (vals.empty()) continue;
    if (vals.size() % 2 == 0 || vals.size() < 3)
      throw ConfigError("set_file", "line " + std::to_string(lineno) + ": expected 2d + 1 values");
    const auto n = static_cast<Index>((vals.size() - 1) / 2);
    if (d >= 0 && n != d) throw ConfigError("set_file", "line " + std::to_string(lineno) + ": dimension changes");
    d = n;
    InterpolationTriple<double> tr{Vector(n), Vector(n), vals.back()};
    for (Index i = 0; i < n; ++i) {
      tr.x[i] = vals[static_cast<std::size_t>(i)];
      tr.g[i] = vals[static_cast<std::size_t>(n + i)];
    }
    triples.push_back(std::move(tr));
  }
  if (triples.empty()) throw ConfigError("set_file", "no triples in '" + path + "'");
  return as_config_error("L", [&] { return InterpolationSet<double>(std::move(triples), L); });
}

ExperimentResult run_interpolate(const Config& c) {
  c.require_only(with_common({"set_file", "L", "mode", "probes"}));
  ExperimentResult res;
  const double L = c.positive("L", 1.0);
  const std::string mode_name = c.text("mode", "convex");
  if (mode_name != "convex" && mode_name != "nonconvex") throw ConfigError("mode", "expected convex or nonconvex");
  const auto mode = mode_name == "convex" ? InterpolationMode::convex : InterpolationMode::nonconvex;
  const Index probes = c.integer("probes", 100);
  if (probes < 0) throw ConfigError("probes", "must be non-negative");
  const std::uint64_t seed = c.seed();
  const auto S = read_set(c.text("set_file"), L);
  const double scale = S.scale();

  const auto check = check_interpolable(S, mode);
  auto r = make_report("interpolable", 0.0, check.min_slack, 1, BoundSense::lower, 0.0, 1e-10 * scale);
  r.note = std::to_string(check.violations.size()) + " violated ordered pairs";
  res.reports.push_back(r);
  res.table.columns = {"index", "value", "interpolant_value", "value_error", "gradient_error"};
  res.summary["scale"] = scale;
  if (!check.ok) {
    auto& v = res.summary["violations"] = nlohmann::ordered_json::array();
    for (const auto& pv : check.violations) v.push_back({{"i", pv.i}, {"j", pv.j}, {"slack", pv.slack}});
    return res;
  }
  const BoundedInterpolant<double> W(S, mode);
  double worst_val = 0.0, worst_grad = 0.0;
  for (Index i = 0; i < S.size(); ++i) {
    const auto e = W.evaluate(S[i].x);
    const double ve = std::abs(e.value - S[i].f);
    const double ge = (e.gradient - S[i].g).norm();
    worst_val = std::max(worst_val, ve);
    worst_grad = std::max(worst_grad, ge);
    res.table.add({fmt_index(i), format_real(S[i].f), format_real(e.value), format_real(ve), format_real(ge)});
  }
  const auto [argmin, fmin] = W.global_min();
  res.reports.push_back(make_report("value_fidelity", 0.0, worst_val, 1, BoundSense::upper, 0.0, 1e-8 * scale));
  res.reports.push_back(make_report("gradient_fidelity", 0.0, worst_grad, 1, BoundSense::upper, 0.0, 1e-6 * scale));
  res.reports.push_back(make_report("global_min_value", fmin, W.evaluate(argmin).value, 1, BoundSense::upper, 0.0,
                                    1e-8 * scale));
  // random probes around the data
  auto gen = make_stream(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  double radius = 1.0;
  for (Index i = 0; i < S.size(); ++i) radius = std::max(radius, S[i].x.norm());
  double lowest = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < probes; ++k) {
    Vector y(S.dim());
    for (Index i = 0; i < y.size(); ++i) y[i] = 2.0 * radius * normal(gen);
    lowest = std::min(lowest, W.evaluate(y).value);
  }
  if (probes > 0)
    res.reports.push_back(make_report("lower_bounded_at_probes", fmin, lowest, probes, BoundSense::lower, 0.0, 1e-8));
  res.table.add({"summary", format_real(fmin), "", format_real(worst_val), format_real(worst_grad)});
  res.summary["global_min"] = fmin;
  auto& am = res.summary["argmin"] = nlohmann::ordered_json::array();
  for (Index i = 0; i < argmin.size(); ++i) am.push_back(argmin[i]);
  return res;
}

// ---- impossibility -------------------------------------------------------------

ExperimentResult run_impossibility(const Config& c) {
  c.require_only(with_common({"T", "eta", "method", "sigma", "dims"}));
  ExperimentResult res;
  const Index T = c.integer("T", 50);
  if (T < 1) throw ConfigError("T", "must be positive");
  const double eta = c.number("eta", 0.1);
  if (eta < 0.0) throw ConfigError("eta", "must be non-negative");
  const std::string method_name = c.text("method", "gd_uniform");
  DeterministicMethod method = [&] {
    if (method_name == "gd_uniform") return DeterministicMethod::gd_uniform(eta, T);
    if (method_name == "gd_last") return DeterministicMethod::gd_last(eta, T);
    if (method_name == "identity") return DeterministicMethod::identity(T);
    throw ConfigError("method", "expected gd_uniform, gd_last or identity");
  }();
  const Index reps = replications(c, 10);
  const std::uint64_t seed = c.seed();
  const double sigma = c.positive("sigma", 1.0);
  std::vector<Index> dims;
  for (double v : c.number_list("dims")) {
    if (v < 1 || v != std::floor(v)) throw ConfigError("dims", "dimensions must be positive integers");
    dims.push_back(static_cast<Index>(v));
  }

  ImpossibilityResult demo;
  try {
    demo = fixed_point_impossibility_demo(method, T);
  } catch (const std::domain_error& e) {
    res.reports.push_back(make_report("hypotheses", 1.0, 0.0, 1, BoundSense::lower));
    res.reports.back().note = e.what();
    res.table.columns = {"row", "d", "x1_star", "x_out", "grad_at_out", "mean_max_deviation"};
    return res;
  }
  res.table.columns = {"row", "d", "x1_star", "x_out", "grad_at_out", "mean_max_deviation"};
  res.table.add({"root", "1", format_real(demo.x1_star), format_real(demo.x_out), format_real(demo.grad_at_out), "0"});
  res.reports.push_back(make_report("x_out_at_root", 0.0, std::abs(demo.x_out), 1, BoundSense::upper, 0.0, 1e-9));
  res.reports.push_back(make_report("grad_at_out", 0.5, demo.grad_at_out, 1, BoundSense::lower));
  if (!dims.empty()) {
    const auto rows = infdim_dimension_sweep(method, T, sigma, dims, reps, seed);
    for (const auto& row : rows)
      res.table.add({"sweep", fmt_index(row.d), format_real(demo.x1_star), "", format_real(row.mean_grad_at_out),
                     format_real(row.mean_max_deviation)});
  }
  res.summary["x1_star"] = demo.x1_star;
  res.summary["bisection_steps"] = demo.bisection_steps;
  return res;
}

// ---- plot data ----------------------------------------------------------------

std::string series(const std::function<double(double)>& f, double lo, double hi, Index points) {
  ResultTable t;
  t.columns = {"x", "y"};
  for (Index i = 0; i < points; ++i) {
    const double x = points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    t.add({format_real(x), format_real(f(x))});
  }
  return to_csv(t);
}

ExperimentResult run_plot_data(const Config& c) {
  c.require_only(with_common({"L", "delta_gap", "sigma", "rho", "points", "sweep_T", "input"}));
  ExperimentResult res;
  const double L = c.positive("L", 1.0);
  const double Delta = c.positive("delta_gap", 1.0);
  const double sigma = c.positive("sigma", 1.0);
  const double rho = c.positive("rho", 1.0);
  const Index points = c.integer("points", 401);
  if (points < 1) throw ConfigError("points", "must be positive");
  const auto s = make_sigmoid<double>();
  const auto h1m = make_bump1<double>(1.0, 1.0, BumpVariant::minus);
  const auto h1p = make_bump1<double>(1.0, 1.0, BumpVariant::plus);
  const auto h2 = make_bump2<double>(1.0, 1.0);
  res.extra_files.emplace_back("s.csv", series([&](double x) { return s(x); }, -2.0, 2.0, points));
  res.extra_files.emplace_back("h1_minus.csv", series([&](double x) { return h1m(x); }, -2.0, 2.0, points));
  res.extra_files.emplace_back("h1_plus.csv", series([&](double x) { return h1p(x); }, -2.0, 2.0, points));
  res.extra_files.emplace_back("h2.csv", series([&](double x) { return h2(x); }, -2.0, 2.0, points));

  std::string sweep;
  const auto Ts = c.has("sweep_T") ? c.number_list("sweep_T") : std::vector<double>{10, 100, 1000, 10000};
  if (!Ts.empty()) {
    ResultTable t;
    t.columns = {"T", "aggregation_gamma_sq", "ghadimi_lan_at_tightness_step", "ratio", "hessian_bound"};
    for (double Tv : Ts) {
      if (Tv < 2 || Tv != std::floor(Tv)) throw ConfigError("sweep_T", "entries must be integers >= 2");
      const auto T = static_cast<Index>(Tv);
      double eta = tightness_step(L, Delta, sigma, T);
      if (L * eta >= 1.0) eta = (1.0 - 1e-6) / L;
      const double lower = aggregation_gamma_sq(L, Delta, sigma, T);
      const double upper = ghadimi_lan_bound(L, Delta, sigma, std::vector<double>(static_cast<std::size_t>(T - 1), eta));
      t.add({fmt_index(T), format_real(lower), format_real(upper), format_real(upper / lower),
             format_real(hessian_predicted_bound(rho, Delta, sigma, T))});
    }
    sweep = to_csv(t);
  }
  res.extra_files.emplace_back("bound_vs_T.csv", sweep);

  if (c.has("input")) {
    const std::string path = c.text("input");
    std::ifstream in(path);
    if (!in) throw ConfigError("input", "missing result file '" + path + "'");
    std::string header;
    std::getline(in, header);
    std::vector<std::string> cols;
    {
      std::stringstream hs(header);
      std::string col;
      while (std::getline(hs, col, ',')) cols.push_back(col);
    }
    const auto find = [&](std::initializer_list<const char*> names) -> int {
      for (const char* n : names)
        for (std::size_t i = 0; i < cols.size(); ++i)
          if (cols[i] == n) return static_cast<int>(i);
      return -1;
    };
    const int ey = find({"min_grad_sq", "failure_rate", "min_grad_norm"});
    const int ty = find({"bound", "threshold", "lower"});
    const int rc = std::max(find({"replication"}), 0);
    if (ey < 0) throw ConfigError("input", "result file has no empirical column");
    ResultTable t;
    t.columns = {"replication", "empirical", "theoretical"};
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      if (cells.size() <= static_cast<std::size_t>(rc) || cells[static_cast<std::size_t>(rc)] == "summary") continue;
      t.add({cells[static_cast<std::size_t>(rc)], cells.size() > static_cast<std::size_t>(ey) ? cells[static_cast<std::size_t>(ey)] : "",
             ty >= 0 && cells.size() > static_cast<std::size_t>(ty) ? cells[static_cast<std::size_t>(ty)] : ""});
    }
    res.extra_files.emplace_back("overlay.csv", to_csv(t));
  }

  res.table.columns = {"file", "bytes"};
  for (const auto& [suffix, content] : res.extra_files) res.table.add({suffix, fmt_index(static_cast<Index>(content.size()))});
  return res;
}

const std::map<std::string, std::function<ExperimentResult(const Config&)>>& registry() {
  static const std::map<std::string, std::function<ExperimentResult(const Config&)>> r{
      {"simulate", run_simulate},
      {"aggregation_step", run_aggregation},
      {"nonconvex_hessian", run_hessian},
      {"prop_distance", run_distance},
      {"prop_noise", run_noise},
      {"infdim", run_impossibility},
      {"impossibility", run_impossibility},
      {"ghadimi_lan", [](const Config& c) { return run_upper(c, "ghadimi_lan"); }},
      {"kappa", [](const Config& c) { return run_upper(c, "kappa"); }},
      {"gd_corollary", [](const Config& c) { return run_upper(c, "gd_corollary"); }},
      {"tightness", run_tightness},
      {"concentration", run_concentration},
      {"interpolate", run_interpolate},
      {"plot-data", run_plot_data},
  };
  return r;
}

}  // namespace

void ResultTable::add(std::vector<std::string> row) {
  if (row.size() != columns.size())
    throw std::logic_error("result table: row has " + std::to_string(row.size()) + " cells, expected " +
                           std::to_string(columns.size()));
  rows.push_back(std::move(row));
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string to_csv(const ResultTable& table) {
  const auto cell = [](const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
      if (ch == '"') q += '"';
      q += ch;
    }
    return q + "\"";
  };
  std::string out;
  const auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cell(cells[i]);
    }
    out += '\n';
  };
  line(table.columns);
  for (const auto& r : table.rows) line(r);
  return out;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [k, v] : registry()) n.push_back(k);
    return n;
  }();
  return names;
}

ExperimentResult run_experiment(const Config& config) {
  const std::string name = config.text("experiment");
  const auto it = registry().find(name);
  if (it == registry().end()) throw ConfigError("experiment", "unknown experiment '" + name + "'");
  ExperimentResult res = it->second(config);
  res.experiment = name;
  res.config = config;
  auto& table = res.table;
  const bool has_verdict = std::find(table.columns.begin(), table.columns.end(), "verdict") != table.columns.end();
  table.columns.insert(table.columns.begin(), "experiment");
  if (!has_verdict) table.columns.push_back("verdict");
  for (auto& row : table.rows) {
    row.insert(row.begin(), name);
    if (!has_verdict) row.push_back(row[1] == "summary" ? to_string(res.passed() ? Verdict::pass : Verdict::fail) : "");
  }
  add_summary_reports(res);
  return res;
}

nlohmann::ordered_json report_json(const BoundReport& r) {
  nlohmann::ordered_json j;
  j["name"] = r.name;
  j["theoretical"] = r.theoretical;
  j["empirical"] = r.empirical;
  j["replications"] = r.replications;
  j["sense"] = to_string(r.sense);
  j["relative_tolerance"] = r.relative_tolerance;
  j["absolute_tolerance"] = r.absolute_tolerance;
  j["verdict"] = to_string(r.verdict);
  j["slack"] = r.slack;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

nlohmann::ordered_json summary_json(const ExperimentResult& result, double wall_seconds) {
  nlohmann::ordered_json j;
  j["experiment"] = result.experiment;
  auto& cfg = j["config"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : result.config.values()) cfg[k] = v;
  j["verdict"] = to_string(result.passed() ? Verdict::pass : Verdict::fail);
  j["summary"] = result.summary;
  j["wall_time_seconds"] = wall_seconds;
  return j;
}

Config config_from_json(const nlohmann::ordered_json& summary) {
  Config c;
  for (const auto& [k, v] : summary.at("config").items()) c.set(k, v.get<std::string>());
  return c;
}

void write_atomically(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

void write_outputs(const ExperimentResult& result, const std::string& prefix, double wall_seconds) {
  write_atomically(prefix + ".csv", to_csv(result.table));
  write_atomically(prefix + ".json", summary_json(result, wall_seconds).dump(2) + "\n");
  for (const auto& [suffix, content] : result.extra_files) write_atomically(prefix + "_" + suffix, content);
}

}  // namespace sgdlb::cli
