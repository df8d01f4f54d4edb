#ifndef RVBF_BFDR_HPP
#define RVBF_BFDR_HPP

#include <vector>

namespace rvbf {

struct Pi0Estimate {
  double pi0_hat = 1.0;
  double gamma = 0.999;
  double q_star = 0.0;  // chi2(df) gamma-quantile
  int df = 1;
  bool implausible = false;  // no statistic fell below q_star
};

/// Fraction of genes consistent with the null law of 2 log BF.
Pi0Estimate estimate_pi0(const std::vector<double>& two_log_bfs, int df, double gamma);

inline constexpr double kAlphaMax = 1e6;

/// Prior precision alpha = pi0/(1-pi0), capped at kAlphaMax when pi0 -> 1.
double alpha_from_pi0(double pi0_hat);

struct AlphaInf {
  double alpha_inf_hat = 0.0;
  double p0 = 1.0;  // empirical (1 - pi0_inf) quantile of the KS p-values
  bool clamped = false;
};

/// Recalibrated alpha for informative-prior Bayes factors.
AlphaInf alpha_inf(double alpha_hat, const std::vector<double>& ks_pvalues,
                   double pi0_inf_hat);

/// Posterior association probability
///   v = int_0^1 (1-pi) BF / (pi + (1-pi) BF) * (alpha+1) pi^alpha dpi,
/// taking the BF on the log scale so huge Bayes factors saturate at v=1.
double posterior_v(double log_bf, double alpha);

struct ThresholdResult {
  double threshold = 1.0;     // discoveries are genes with v > threshold
  double attained_bfdr = 0.0;
  int n_discoveries = 0;
};

/// Largest descending-v prefix whose mean posterior null probability (1-v)
/// stays at or below alpha0; cuts only between distinct v values.
ThresholdResult select_threshold(const std::vector<double>& v, double alpha0);

}  // namespace rvbf

#endif
