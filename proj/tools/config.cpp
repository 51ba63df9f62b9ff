#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "sgdlb/noise.hpp"

namespace sgdlb::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::pair<std::string, std::string> split_spec(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) return {trim(text), ""};
  return {trim(text.substr(0, colon)), trim(text.substr(colon + 1))};
}

}  // namespace

double parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + text + "'");
  }
  if (used != t.size() || !std::isfinite(v)) throw ConfigError(key, "expected a finite number, got '" + text + "'");
  return v;
}

std::vector<double> parse_number_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(key, item));
  return out;
}

Config Config::parse(std::istream& in) {
  Config c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("", "line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(lineno) + ": empty key");
    if (c.has(key)) throw ConfigError(key, "defined twice");
    c.set(key, trim(line.substr(eq + 1)));
  }
  return c;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read '" + path + "'");
  return parse(in);
}

void Config::set(const std::string& key, const std::string& value) {
  if (key.empty() || key.find_first_of(" \t=#\n") != std::string::npos) throw ConfigError(key, "invalid key");
  if (value.find_first_of("#\n") != std::string::npos) throw ConfigError(key, "value may not contain '#' or newlines");
  values_[key] = value;
}

std::string Config::text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(key, "required but missing");
  return it->second;
}

std::string Config::text(const std::string& key, const std::string& fallback) const {
  return has(key) ? text(key) : fallback;
}

double Config::number(const std::string& key) const { return parse_number(key, text(key)); }

double Config::number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

double Config::positive(const std::string& key) const {
  const double v = number(key);
  if (!(v > 0.0)) throw ConfigError(key, "must be positive");
  return v;
}

double Config::positive(const std::string& key, double fallback) const {
  return has(key) ? positive(key) : fallback;
}

Index Config::integer(const std::string& key) const {
  const double v = number(key);
  if (v != std::floor(v) || std::abs(v) > 9e15) throw ConfigError(key, "must be an integer");
  return static_cast<Index>(v);
}

Index Config::integer(const std::string& key, Index fallback) const { return has(key) ? integer(key) : fallback; }

std::uint64_t Config::seed() const {
  if (!has("seed")) return 0;
  const std::string t = text("seed");
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(t, &used);
  } catch (const std::exception&) {
    throw ConfigError("seed", "expected a non-negative integer");
  }
  if (used != t.size() || t.front() == '-') throw ConfigError("seed", "expected a non-negative integer");
  return v;
}

std::vector<double> Config::number_list(const std::string& key) const {
  return has(key) ? parse_number_list(key, text(key)) : std::vector<double>{};
}

void Config::require_only(const std::vector<std::string>& allowed) const {
  for (const auto& [k, v] : values_)
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) throw ConfigError(k, "unknown for this experiment");
}

std::string Config::serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

ScheduleSpec ScheduleSpec::parse(const std::string& text) {
  auto [kind, rest] = split_spec(text);
  ScheduleSpec s{kind, parse_number_list("schedule", rest)};
  const auto need = [&](std::size_t n) {
    if (s.values.size() != n)
      throw ConfigError("schedule", "'" + kind + "' takes " + std::to_string(n) + " value(s)");
  };
  if (kind == "constant" || kind == "adagrad" || kind == "normalized") {
    need(1);
  } else if (kind == "poly") {
    need(3);
  } else if (kind == "random") {
    need(2);
    if (!(s.values[0] >= 0.0 && s.values[0] <= s.values[1])) throw ConfigError("schedule", "random:lo,hi needs 0 <= lo <= hi");
  } else if (kind == "list") {
    if (s.values.empty()) throw ConfigError("schedule", "list needs at least one step");
  } else {
    throw ConfigError("schedule", "unknown schedule '" + kind + "'");
  }
  for (double v : s.values)
    if (v < 0.0) throw ConfigError("schedule", "values must be non-negative");
  return s;
}

StepSchedule ScheduleSpec::build(Index T, std::uint64_t seed) const {
  try {
    if (kind == "constant") return StepSchedule::constant(values[0]);
    if (kind == "poly") return StepSchedule::poly_decay(values[0], values[1], values[2]);
    if (kind == "adagrad") return StepSchedule::gram_adaptive(adagrad_norm_rule(values[0]));
    if (kind == "normalized") return StepSchedule::gram_adaptive(normalized_gradient_rule(values[0]));
    if (kind == "list") {
      if (static_cast<Index>(values.size()) != T - 1)
        throw ConfigError("schedule", "list needs T - 1 = " + std::to_string(T - 1) + " steps");
      return StepSchedule::list(values);
    }
    auto gen = make_stream(seed, 0x5c4ed01eULL);
    std::uniform_real_distribution<double> u(values[0], values[1]);
    std::vector<double> etas;
    for (Index t = 1; t < T; ++t) etas.push_back(u(gen));
    return StepSchedule::list(std::move(etas));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("schedule", e.what());
  }
}

AggregationSpec AggregationSpec::parse(const std::string& text) {
  auto [kind, rest] = split_spec(text);
  AggregationSpec a{kind, parse_number_list("agg", rest)};
  if (kind == "weights") {
    if (a.values.empty()) throw ConfigError("agg", "weights needs values");
  } else if (kind != "none" && kind != "uniform" && kind != "last" && kind != "random" && kind != "gram-minnorm") {
    throw ConfigError("agg", "unknown aggregation '" + kind + "'");
  } else if (!a.values.empty()) {
    throw ConfigError("agg", "'" + kind + "' takes no values");
  }
  return a;
}

AggregationRule AggregationSpec::build(Index T, std::uint64_t seed) const {
  if (kind == "none") return AggregationRule::none();
  if (kind == "uniform") return AggregationRule::uniform(T);
  if (kind == "last") return AggregationRule::last_iterate(T);
  if (kind == "gram-minnorm") return AggregationRule::gram_adaptive(shortest_noisy_gradient_weights());
  if (kind == "weights") {
    if (static_cast<Index>(values.size()) != T) throw ConfigError("agg", "weights needs T = " + std::to_string(T) + " values");
    return AggregationRule::fixed_weights(values);
  }
  auto gen = make_stream(seed, 0xa66e6a7eULL);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w;
  double total = 0.0;
  for (Index t = 0; t < T; ++t) {
    w.push_back(e(gen));
    total += w.back();
  }
  for (double& v : w) v /= total;
  return AggregationRule::fixed_weights(std::move(w));
}

}  // namespace sgdlb::cli
