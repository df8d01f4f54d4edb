#ifndef RVBF_SPECIAL_HPP
#define RVBF_SPECIAL_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace rvbf {

// All distribution functions work in log / complement space so that
// genome-wide tail probabilities (p ~ 1e-10 and below) stay representable.

double log_gamma(double a);              // ln Gamma(a), a > 0
double log_beta(double a, double b);     // ln B(a,b), a,b > 0
double digamma(double a);
double trigamma(double a);

double chi2_sf(double x, int df);        // P(chi2(df) > x)
double chi2_quantile(double p, int df);  // inverse CDF
double normal_sf(double z);              // 1 - Phi(z)

/// Squared Pearson correlation; defined as 0 when either vector is constant.
double pearson_r2(std::span<const double> u, std::span<const double> v);
double pearson_r2(std::span<const std::uint8_t> u, std::span<const std::uint8_t> v);

/// Kendall tau-b with tie correction, O(n^2) pair counting.
double kendall_tau(std::span<const double> a, std::span<const double> b);

/// One-sided one-sample KS statistic D+ = max_i (i/n - F(t_(i))),
/// detecting an excess of small sample values relative to the null.
double ks_dplus(std::vector<double> sample, const std::function<double(double)>& null_cdf);

/// p-value of D+: exact Birnbaum-Tingey distribution for n <= 30,
/// asymptotic tail exp(-2 n D+^2) otherwise.
double ks_one_sided(const std::vector<double>& sample,
                    const std::function<double(double)>& null_cdf);

/// Exact tail P(D+ >= d) for sample size n under a continuous null.
double ks_dplus_exact_tail(double d, int n);

}  // namespace rvbf

#endif
