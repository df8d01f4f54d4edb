#include "rvbf/bfdr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

#include "rvbf/special.hpp"

namespace rvbf {

Pi0Estimate estimate_pi0(const std::vector<double>& two_log_bfs, int df, double gamma) {
  if (two_log_bfs.size() < 100)
    throw std::domain_error("estimate_pi0: at least 100 statistics required");
  if (!(gamma > 0.5 && gamma < 1.0))
    throw std::domain_error("estimate_pi0: gamma must lie in (0.5, 1)");
  if (df != 1 && df != 3) throw std::domain_error("estimate_pi0: df must be 1 or 3");
  Pi0Estimate est;
  est.gamma = gamma;
  est.df = df;
  est.q_star = chi2_quantile(gamma, df);
  std::size_t below = 0;
  for (double t : two_log_bfs)
    if (t <= est.q_star) ++below;
  est.pi0_hat = std::min(
      1.0, static_cast<double>(below) / (static_cast<double>(two_log_bfs.size()) * gamma));
  est.implausible = below == 0;
  return est;
}

double alpha_from_pi0(double pi0_hat) {
  if (!(pi0_hat > 0.0 && pi0_hat <= 1.0))
    throw std::domain_error("alpha_from_pi0: pi0 must lie in (0,1]");
  if (pi0_hat >= 1.0) return kAlphaMax;
  return std::min(pi0_hat / (1.0 - pi0_hat), kAlphaMax);
}

AlphaInf alpha_inf(double alpha_hat, const std::vector<double>& ks_pvalues,
                   double pi0_inf_hat) {
  if (ks_pvalues.empty()) throw std::domain_error("alpha_inf: empty KS p-value vector");
  if (!(pi0_inf_hat > 0.0 && pi0_inf_hat <= 1.0))
    throw std::domain_error("alpha_inf: pi0_inf must lie in (0,1]");
  std::vector<double> sorted = ks_pvalues;
  std::sort(sorted.begin(), sorted.end());
  const double q = 1.0 - pi0_inf_hat;
  const auto n = static_cast<double>(sorted.size());
  // nudge below the ceiling so exact rank multiples are not pushed up by
  // floating-point fuzz (e.g. 0.002 * 10000 evaluating just above 20)
  auto idx = static_cast<long long>(std::ceil(q * n - 1e-9)) - 1;
  idx = std::clamp<long long>(idx, 0, static_cast<long long>(sorted.size()) - 1);
  AlphaInf out;
  out.p0 = sorted[static_cast<std::size_t>(idx)];
  if (out.p0 <= 0.0) {
    // Exact-zero quantile: fall forward to the smallest positive p-value.
    out.clamped = true;
    out.p0 = 1e-300;
    for (double p : sorted) {
      if (p > 0.0) {
        out.p0 = p;
        break;
      }
    }
  }
  out.alpha_inf_hat = alpha_hat / out.p0;
  return out;
}

double posterior_v(double log_bf, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw std::domain_error("posterior_v: alpha must be positive and finite");
  if (!std::isfinite(log_bf)) return log_bf > 0.0 ? 1.0 : 0.0;
  // Substitute u = (alpha+1) log pi, then u = -e^w; the integral becomes
  //   v = int h(u(w)) e^{u(w)} e^w dw over w in (-inf, inf),
  // with h = 1 / (1 + exp(log pi - log(1-pi) - log BF)). The double change of
  // variables keeps the mass resolvable for alpha up to the 1e6 cap, where a
  // plain quadrature over pi in (0,1) cannot see the spike at pi ~ 1.
  const double w_lo = std::log(1e-14);
  const double w_hi = std::log(40.0);
  const auto integrand = [&](double w) {
    const double u = -std::exp(w);
    const double log_pi = u / (alpha + 1.0);
    const double log_1m_pi = std::log(-std::expm1(log_pi));
    const double q = log_pi - log_1m_pi - log_bf;
    double h;
    if (q > 0.0) {
      const double e = std::exp(-q);
      h = e / (1.0 + e);
    } else {
      h = 1.0 / (1.0 + std::exp(q));
    }
    return h * std::exp(u + w);
  };
  const double v =
      boost::math::quadrature::gauss<double, 256>::integrate(integrand, w_lo, w_hi);
  return std::clamp(v, 0.0, 1.0);
}

ThresholdResult select_threshold(const std::vector<double>& v, double alpha0) {
  if (v.empty()) throw std::domain_error("select_threshold: empty input");
  if (!(alpha0 > 0.0 && alpha0 < 1.0))
    throw std::domain_error("select_threshold: alpha0 must lie in (0,1)");
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  ThresholdResult res;
  double cum = 0.0;
  long long best_end = -1;  // index of the last element of the accepted prefix
  double best_mean = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    cum += 1.0 - sorted[i];
    const bool run_end = i + 1 == sorted.size() || sorted[i + 1] != sorted[i];
    if (!run_end) continue;
    const double mean = cum / static_cast<double>(i + 1);
    if (mean <= alpha0) {
      best_end = static_cast<long long>(i);
      best_mean = mean;
    }
  }
  if (best_end < 0) {
    res.threshold = 1.0;
    res.attained_bfdr = 0.0;
    res.n_discoveries = 0;
    return res;
  }
  const auto last = static_cast<std::size_t>(best_end);
  if (last + 1 == sorted.size()) {
    res.threshold = sorted[last] / 2.0;  // strictly below the smallest v
  } else {
    res.threshold = 0.5 * (sorted[last] + sorted[last + 1]);
  }
  res.attained_bfdr = best_mean;
  res.n_discoveries = static_cast<int>(last + 1);
  return res;
}

}  // namespace rvbf
