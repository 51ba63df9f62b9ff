#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgdlb/engine.hpp"

namespace sgdlb::cli {

/// A configuration problem attributable to one key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key.empty() ? message : "config key '" + key + "': " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Flat `key = value` configuration. Keys are kept sorted, so serialization
/// is canonical.
class Config {
 public:
  /// One `key = value` per line; `#` starts a comment; blank lines ignored.
  static Config parse(std::istream& in);
  static Config parse_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string text(const std::string& key) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  double positive(const std::string& key) const;
  double positive(const std::string& key, double fallback) const;
  Index integer(const std::string& key) const;
  Index integer(const std::string& key, Index fallback) const;
  std::uint64_t seed() const;
  std::vector<double> number_list(const std::string& key) const;

  /// Rejects keys outside `allowed`, naming the first offender.
  void require_only(const std::vector<std::string>& allowed) const;

  std::string serialize() const;

  friend bool operator==(const Config&, const Config&) = default;

 private:
  std::map<std::string, std::string> values_;
};

/// Parses a real, naming `key` on failure.
double parse_number(const std::string& key, const std::string& text);
std::vector<double> parse_number_list(const std::string& key, const std::string& text);

/// Step schedule specs: constant:eta | poly:a,b,theta | list:e1,e2,... |
/// adagrad:eta0 | normalized:eta0 | random:lo,hi
struct ScheduleSpec {
  std::string kind;
  std::vector<double> values;

  static ScheduleSpec parse(const std::string& text);
  bool adaptive() const { return kind == "adagrad" || kind == "normalized"; }
  /// Concrete schedule for horizon T; `random` draws from the seed.
  StepSchedule build(Index T, std::uint64_t seed) const;
};

/// Aggregation specs: none | uniform | last | weights:w1,...,wT | random | gram-minnorm
struct AggregationSpec {
  std::string kind;
  std::vector<double> values;

  static AggregationSpec parse(const std::string& text);
  AggregationRule build(Index T, std::uint64_t seed) const;
};

}  // namespace sgdlb::cli
