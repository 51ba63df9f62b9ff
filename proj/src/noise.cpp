#include "sgdlb/noise.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sgdlb {

std::uint64_t replication_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

int rademacher_sign(const NoiseModel& noise, Index step) {
  auto gen = make_stream(noise.seed, static_cast<std::uint64_t>(step));
  return (gen() >> 63) ? 1 : -1;
}

Vector draw_noise(const NoiseModel& noise, Index step, Index dim) {
  switch (noise.kind) {
    case NoiseKind::none:
      return Vector::Zero(dim);
    case NoiseKind::gaussian_isotropic: {
      auto gen = make_stream(noise.seed, static_cast<std::uint64_t>(step));
      std::normal_distribution<double> normal(0.0, noise.sigma / std::sqrt(static_cast<double>(dim)));
      Vector xi(dim);
      for (Index i = 0; i < dim; ++i) xi[i] = normal(gen);
      return xi;
    }
    case NoiseKind::rademacher_coordinate: {
      if (step >= dim)
        throw std::invalid_argument("rademacher noise: step " + std::to_string(step) + " needs dimension > " +
                                    std::to_string(step));
      Vector xi = Vector::Zero(dim);
      xi[step] = noise.sigma * rademacher_sign(noise, step);
      return xi;
    }
  }
  throw std::logic_error("draw_noise: unknown noise kind");
}

}  // namespace sgdlb
