#include "rvbf/random.hpp"

#include <cmath>
#include <stdexcept>

namespace rvbf {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

RandomSource::RandomSource(std::uint64_t seed)
    : seed_(seed), engine_(splitmix64(splitmix64(seed) ^ 0xa5a5a5a5a5a5a5a5ULL)) {}

RandomSource RandomSource::split(std::uint64_t stream) const {
  return RandomSource(splitmix64(seed_ ^ splitmix64(stream + 0x1234567890abcdefULL)));
}

std::uint64_t RandomSource::next_u64() { return engine_(); }

double RandomSource::uniform() {
  // 53-bit mantissa, shifted into (0,1).
  const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  return u > 0.0 ? u : 0x1.0p-53;
}

double RandomSource::normal() {
  if (have_cached_normal_) {
    have_cached_normal_ = false;
    return cached_normal_;
  }
  // Marsaglia polar method.
  double v1 = 0.0, v2 = 0.0, s = 0.0;
  do {
    v1 = 2.0 * uniform() - 1.0;
    v2 = 2.0 * uniform() - 1.0;
    s = v1 * v1 + v2 * v2;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  cached_normal_ = v2 * f;
  have_cached_normal_ = true;
  return v1 * f;
}

double RandomSource::gamma(double shape) {
  if (!(shape > 0.0)) throw std::domain_error("gamma: shape must be positive");
  if (shape < 1.0) {
    // Boost the shape and correct with U^{1/shape}.
    const double g = gamma(shape + 1.0);
    const double u = uniform();
    return g * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0, v = 0.0;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double RandomSource::beta(double a, double b) {
  const double ga = gamma(a);
  const double gb = gamma(b);
  const double s = ga + gb;
  if (s <= 0.0) return 0.5;  // both underflowed; vanishing-shape limit
  return ga / s;
}

double RandomSource::beta_mean_precision(double eta, double k) {
  if (!(eta > 0.0 && eta < 1.0) || !(k > 0.0))
    throw std::domain_error("beta_mean_precision: eta in (0,1), k > 0 required");
  return beta(eta * k, (1.0 - eta) * k);
}

}  // namespace rvbf
