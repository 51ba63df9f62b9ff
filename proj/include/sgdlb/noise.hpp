#pragma once

#include <cstdint>
#include <random>

#include "sgdlb/types.hpp"

namespace sgdlb {

/// Seed for replication `index` of a batch started from `base`.
std::uint64_t replication_seed(std::uint64_t base, std::uint64_t index);

/// An independent generator for the pair (seed, stream). Draws for a given
/// pair are reproducible regardless of what other streams were used.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

enum class NoiseKind { none, gaussian_isotropic, rademacher_coordinate };

/// Zero-mean oracle noise. gaussian_isotropic draws N(0, sigma^2/d I_d) so
/// that E||xi||^2 = sigma^2; rademacher_coordinate returns +-sigma e_{t+1}
/// at step t (1-based), so ||xi_t|| = sigma exactly.
struct NoiseModel {
  NoiseKind kind = NoiseKind::none;
  double sigma = 0.0;
  std::uint64_t seed = 0;

  static NoiseModel none() { return {}; }
  static NoiseModel gaussian(double sigma, std::uint64_t seed) { return {NoiseKind::gaussian_isotropic, sigma, seed}; }
  static NoiseModel rademacher(double sigma, std::uint64_t seed) {
    return {NoiseKind::rademacher_coordinate, sigma, seed};
  }

  NoiseModel with_seed(std::uint64_t s) const {
    NoiseModel copy = *this;
    copy.seed = s;
    return copy;
  }
};

/// The noise vector for step t (1-based) in dimension dim.
Vector draw_noise(const NoiseModel& noise, Index step, Index dim);

/// The Rademacher sign used at step t; +1 or -1.
int rademacher_sign(const NoiseModel& noise, Index step);

}  // namespace sgdlb
