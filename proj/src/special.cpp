#include "rvbf/special.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

namespace rvbf {

double log_gamma(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) throw std::domain_error("log_gamma: a must be positive and finite");
  return boost::math::lgamma(a);
}

double log_beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw std::domain_error("log_beta: arguments must be positive and finite");
  return boost::math::lgamma(a) + boost::math::lgamma(b) - boost::math::lgamma(a + b);
}

double digamma(double a) {
  if (!(a > 0.0)) throw std::domain_error("digamma: a must be positive");
  return boost::math::digamma(a);
}

double trigamma(double a) {
  if (!(a > 0.0)) throw std::domain_error("trigamma: a must be positive");
  return boost::math::trigamma(a);
}

double chi2_sf(double x, int df) {
  if (!(x >= 0.0) || !std::isfinite(x)) throw std::domain_error("chi2_sf: x must be non-negative");
  if (df < 1) throw std::domain_error("chi2_sf: df must be a positive integer");
  const boost::math::chi_squared dist(static_cast<double>(df));
  return boost::math::cdf(boost::math::complement(dist, x));
}

double chi2_quantile(double p, int df) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("chi2_quantile: p in (0,1) required");
  if (df < 1) throw std::domain_error("chi2_quantile: df must be a positive integer");
  const boost::math::chi_squared dist(static_cast<double>(df));
  return boost::math::quantile(dist, p);
}

double normal_sf(double z) {
  if (!std::isfinite(z)) throw std::domain_error("normal_sf: z must be finite");
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

namespace {

template <typename T>
double pearson_r2_impl(std::span<const T> u, std::span<const T> v) {
  const std::size_t n = u.size();
  if (n != v.size() || n < 2) throw std::domain_error("pearson_r2: equal lengths >= 2 required");
  double su = 0.0, sv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    su += static_cast<double>(u[i]);
    sv += static_cast<double>(v[i]);
  }
  const double mu = su / static_cast<double>(n);
  const double mv = sv / static_cast<double>(n);
  double cuv = 0.0, cuu = 0.0, cvv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double du = static_cast<double>(u[i]) - mu;
    const double dv = static_cast<double>(v[i]) - mv;
    cuv += du * dv;
    cuu += du * du;
    cvv += dv * dv;
  }
  if (cuu <= 0.0 || cvv <= 0.0) return 0.0;  // constant vector: r^2 defined as 0
  const double r2 = (cuv * cuv) / (cuu * cvv);
  return std::min(r2, 1.0);
}

}  // namespace

double pearson_r2(std::span<const double> u, std::span<const double> v) {
  return pearson_r2_impl(u, v);
}

double pearson_r2(std::span<const std::uint8_t> u, std::span<const std::uint8_t> v) {
  return pearson_r2_impl(u, v);
}

double kendall_tau(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  if (n != b.size()) throw std::domain_error("kendall_tau: length mismatch");
  if (n < 2) throw std::domain_error("kendall_tau: need at least 2 elements");
  long long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0.0 && db == 0.0) continue;  // tied in both: excluded from all counts
      if (da == 0.0) {
        ++ties_a;
      } else if (db == 0.0) {
        ++ties_b;
      } else if ((da > 0.0) == (db > 0.0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double n0c = static_cast<double>(concordant + discordant + ties_a);
  const double n0d = static_cast<double>(concordant + discordant + ties_b);
  if (n0c <= 0.0 || n0d <= 0.0) return 0.0;
  return static_cast<double>(concordant - discordant) / std::sqrt(n0c * n0d);
}

double ks_dplus(std::vector<double> sample, const std::function<double(double)>& null_cdf) {
  if (sample.empty()) throw std::domain_error("ks_dplus: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double t = sample[i];
    if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("ks_dplus: sample values must lie in [0,1]");
    d = std::max(d, static_cast<double>(i + 1) / n - null_cdf(t));
  }
  return std::clamp(d, 0.0, 1.0);
}

double ks_dplus_exact_tail(double d, int n) {
  // Birnbaum-Tingey: P(D+ >= d) = d * sum_{j=0}^{floor(n(1-d))}
  //   C(n,j) (d + j/n)^{j-1} (1 - d - j/n)^{n-j}.
  if (d <= 0.0) return 1.0;
  if (d >= 1.0) return 0.0;
  const int jmax = static_cast<int>(std::floor(static_cast<double>(n) * (1.0 - d)));
  double sum = 0.0;
  for (int j = 0; j <= jmax; ++j) {
    const double jn = static_cast<double>(j) / static_cast<double>(n);
    const double a = d + jn;
    const double b = 1.0 - d - jn;
    if (b <= 0.0) continue;
    const double log_choose = log_gamma(n + 1.0) - log_gamma(j + 1.0) - log_gamma(n - j + 1.0);
    const double log_term = log_choose + (j - 1) * std::log(a) + (n - j) * std::log(b);
    sum += std::exp(log_term);
  }
  return std::clamp(d * sum, 0.0, 1.0);
}

double ks_one_sided(const std::vector<double>& sample,
                    const std::function<double(double)>& null_cdf) {
  const double d = ks_dplus(sample, null_cdf);
  const int n = static_cast<int>(sample.size());
  if (d <= 0.0) return 1.0;
  if (n <= 30) return ks_dplus_exact_tail(d, n);
  return std::clamp(std::exp(-2.0 * static_cast<double>(n) * d * d), 0.0, 1.0);
}

}  // namespace rvbf
