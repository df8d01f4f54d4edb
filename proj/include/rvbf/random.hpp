#ifndef RVBF_RANDOM_HPP
#define RVBF_RANDOM_HPP

#include <cstdint>
#include <random>

namespace rvbf {

/// Seeded random stream built on std::mt19937_64.
///
/// The draw algorithms (uniform, normal, gamma, beta) are implemented here
/// rather than with std::*_distribution so that a fixed seed produces the
/// same sequence on every standard library implementation. split() derives
/// an independent child stream from (seed, stream index) via a splitmix64
/// mix, which is how the pipeline gets per-gene streams that do not depend
/// on thread scheduling.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed);

  RandomSource split(std::uint64_t stream) const;

  std::uint64_t next_u64();
  double uniform();  // U(0,1), never exactly 0 or 1
  double normal();
  double gamma(double shape);  // unit scale, shape > 0
  double beta(double a, double b);
  // Beta in mean/precision form: mean eta in (0,1), precision k > 0.
  double beta_mean_precision(double eta, double k);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool have_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace rvbf

#endif
