#include "rvbf/bf.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <boost/math/tools/minima.hpp>

#include "rvbf/marginal.hpp"
#include "rvbf/special.hpp"

namespace rvbf {

std::string flags_to_string(std::uint32_t flags) {
  std::string out;
  const auto add = [&](const char* name) {
    if (!out.empty()) out += ';';
    out += name;
  };
  if (flags & kFlagBoundaryMle) add("boundary_mle");
  if (flags & kFlagMixtureUndefined) add("mixture_undefined");
  if (flags & kFlagPriorFallback) add("prior_fallback");
  return out.empty() ? "." : out;
}

namespace {

constexpr double kThetaMax = 35.0;
constexpr int kBrentBits = 45;
constexpr double kPFloor = 1e-300;

double expit(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double clamp_p_prior(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw std::domain_error("p_prior must lie in (0,1]");
  return std::max(p, kPFloor);
}

struct GroupFit {
  double eta = 0.0;
  double sigma = 0.0;
  bool boundary = false;
};

double curvature_sigma(const LikelihoodKernel& kernel, double eta, double fallback) {
  double d2 = 0.0;
  kernel.derivs(eta, nullptr, &d2);
  if (d2 < 0.0 && std::isfinite(d2)) return -1.0 / d2;
  return fallback;
}

/// MLE of eta for an arbitrary kernel; Haldane-style continuity correction
/// at the boundary (all zero / all saturated), flagged.
GroupFit kernel_eta_fit(const CountTable& tab, const LikelihoodKernel& kernel) {
  GroupFit fit;
  if (tab.all_zero() || tab.all_saturated()) {
    const double half = 0.5 / static_cast<double>(std::max<long long>(tab.total_n(), 1));
    fit.eta = tab.all_zero() ? half : 1.0 - half;
    fit.sigma = curvature_sigma(kernel, fit.eta, fit.eta * (1.0 - fit.eta));
    fit.boundary = true;
    return fit;
  }
  const auto neg = [&](double theta) { return -kernel.loglik(expit(theta)); };
  auto [theta_hat, neg_ll] =
      boost::math::tools::brent_find_minima(neg, -kThetaMax, kThetaMax, kBrentBits);
  for (int it = 0; it < 5; ++it) {
    const double eta = expit(theta_hat);
    double d1 = 0.0, d2 = 0.0;
    kernel.derivs(eta, &d1, &d2);
    const double w = eta * (1.0 - eta);
    const double g1 = d1 * w;
    const double g2 = d2 * w * w + d1 * w * (1.0 - 2.0 * eta);
    if (!(g2 < 0.0)) break;
    const double step = std::clamp(-g1 / g2, -1.0, 1.0);
    const double cand = std::clamp(theta_hat + step, -kThetaMax, kThetaMax);
    if (neg(cand) <= neg_ll) {
      neg_ll = neg(cand);
      theta_hat = cand;
    } else {
      break;
    }
    if (std::abs(step) < 1e-12) break;
  }
  fit.eta = expit(theta_hat);
  fit.sigma = curvature_sigma(kernel, fit.eta, fit.eta * (1.0 - fit.eta));
  return fit;
}

GroupFit beta_eta_fit(const CountTable& tab, double k) {
  try {
    const EtaFit ef = mle_eta(tab, k);
    return {ef.eta_hat, ef.sigma_hat, false};
  } catch (const BoundaryMle& e) {
    GroupFit fit;
    const double half = 0.5 / static_cast<double>(std::max<long long>(tab.total_n(), 1));
    fit.eta = e.direction() == "zero" ? half : 1.0 - half;
    BetaKernel kernel(tab, k);
    fit.sigma = curvature_sigma(kernel, fit.eta, fit.eta * (1.0 - fit.eta));
    fit.boundary = true;
    return fit;
  }
}

double log_beta_density(double eta, const BetaPrior& hyper) {
  const double a = hyper.eta * hyper.k;
  const double b = (1.0 - hyper.eta) * hyper.k;
  return (a - 1.0) * std::log(eta) + (b - 1.0) * std::log1p(-eta) - log_beta(a, b);
}

/// Laplace surrogate anchored at the likelihood MLE with likelihood-only
/// curvature: log[(2 pi)^(1/2) Sigma^(1/2) L(eta_hat) pi(eta_hat)]. Under the
/// K* = eta/Sigma hyper recipe the prior is exactly as concentrated as the
/// likelihood, so a full-integrand Laplace would count that concentration
/// twice and shift every group marginal by -log(2)/2, breaking both the
/// identical-group cancellation and the null chi-square law. This form keeps
/// the prefactor cancellation exact.
double mle_log_marginal(const LikelihoodKernel& kernel, const GroupFit& fit,
                        const BetaPrior& hyper) {
  if (kernel.constant_in_eta()) return 0.0;
  return kernel.loglik(fit.eta) + log_beta_density(fit.eta, hyper) +
         0.5 * std::log(2.0 * M_PI * fit.sigma);
}

/// K* = p^2 eta / Sigma computed in logs so tiny p cannot underflow midway.
double k_star(double p, double eta, double sigma, double* log_kstar = nullptr) {
  const double lk = 2.0 * std::log(p) + std::log(eta) - std::log(sigma);
  if (log_kstar) *log_kstar = lk;
  return std::clamp(std::exp(lk), 1e-300, 1e300);
}

void fill_common(BfResult& res, const GeneCounts& gene, double p_raw, double p_c,
                 const GroupFit& pooled, const GroupFit& g1, const GroupFit& g2) {
  res.gene_id = gene.gene_id;
  res.p_prior = p_raw;
  res.df = p_raw == 1.0 ? 1 : 3;
  res.eta_hat = pooled.eta;
  res.eta1_hat = g1.eta;
  res.eta2_hat = g2.eta;
  res.sigma_hat = pooled.sigma;
  res.sigma1_hat = g1.sigma;
  res.sigma2_hat = g2.sigma;
  if (pooled.boundary || g1.boundary || g2.boundary) res.flags |= kFlagBoundaryMle;
  const double diff = g1.eta - g2.eta;
  res.asymptotic_two_log_bf = diff * diff / (g1.sigma + g2.sigma) - 2.0 * std::log(p_c);
  k_star(p_c, pooled.eta, pooled.sigma, &res.log_kstar);
  res.log_kstar_eta = res.log_kstar + std::log(pooled.eta);
}

void fill_bf(BfResult& res, double log_m1, double log_m0, double log_m0_noninf) {
  res.log_bf = log_m1 - log_m0;
  res.two_log_bf = 2.0 * res.log_bf;
  res.two_log_bf_noninf = 2.0 * (log_m1 - log_m0_noninf);
  res.p_value = res.two_log_bf >= 0.0 ? chi2_sf(res.two_log_bf, res.df) : 1.0;
}

/// Degenerate gene (pooled MLE at the boundary): report BF = 1, flagged.
BfResult degenerate_result(const GeneCounts& gene, double p_raw, double p_c,
                           const CountTable& tp, const CountTable& tc, const CountTable& ta,
                           const std::string& direction) {
  BfResult res;
  const double k = kKMax;
  GroupFit pooled, g1, g2;
  const auto haldane = [&](const CountTable& tab) {
    GroupFit f;
    const double half = 0.5 / static_cast<double>(std::max<long long>(tab.total_n(), 1));
    f.eta = direction == "zero" ? half : 1.0 - half;
    BetaKernel kernel(tab, k);
    f.sigma = curvature_sigma(kernel, f.eta, f.eta * (1.0 - f.eta));
    f.boundary = true;
    return f;
  };
  pooled = haldane(tp);
  g1 = haldane(tc);
  g2 = haldane(ta);
  fill_common(res, gene, p_raw, p_c, pooled, g1, g2);
  res.k_tilde = k;
  res.flags |= kFlagBoundaryMle;
  fill_bf(res, 0.0, 0.0, 0.0);
  return res;
}

struct MixtureFit {
  double w0 = 0.0;
  double k = 0.0;
  double eta = 0.0;
};

/// Pooled mixture MLE with optional coordinates pinned (test hooks).
MixtureFit mixture_fit_constrained(const CountTable& tab, std::optional<double> force_w0,
                                   std::optional<double> force_k) {
  if (!force_w0 && !force_k) {
    const MixtureNullFit f = mle_mixture_null(tab);
    return {f.w0_tilde, f.k_tilde, f.eta_hat};
  }
  if (force_w0 && force_k) {
    MixtureKernel kernel(tab, *force_w0, *force_k);
    return {*force_w0, *force_k, kernel_eta_fit(tab, kernel).eta};
  }
  if (force_k) {
    const MixtureGroupFit f = mle_mixture_group(tab, *force_k);
    return {f.w0_hat, *force_k, f.eta_hat};
  }
  // w0 pinned: profile (eta, K) by coordinate ascent.
  const double w0 = *force_w0;
  if (w0 == 0.0) {
    const KFit f = mle_k(tab);
    return {0.0, f.k_tilde, f.eta_hat};
  }
  const auto nll = [&](double th, double lk) {
    return -mixture_loglik(tab, MixturePrior{w0, expit(th), std::exp(lk)}, expit(th));
  };
  const auto theta_profile = [&](double lk) {
    return boost::math::tools::brent_find_minima(
        [&](double th) { return nll(th, lk); }, -kThetaMax, kThetaMax, kBrentBits);
  };
  const double k_lo = std::log(kKMin), k_hi = std::log(kKMax);
  auto [log_k, neg_ll] = boost::math::tools::brent_find_minima(
      [&](double lk) { return theta_profile(lk).second; }, k_lo, k_hi, kBrentBits);
  for (double edge : {k_lo, k_hi}) {
    if (theta_profile(edge).second < neg_ll) {
      log_k = edge;
      neg_ll = theta_profile(edge).second;
    }
  }
  return {w0, std::exp(log_k), expit(theta_profile(log_k).first)};
}

}  // namespace

BfResult bf_beta(const GeneCounts& gene, double p_prior, const BfOptions& opts) {
  gene.validate();
  const double p_c = clamp_p_prior(p_prior);
  const CountTable tc(gene.controls);
  const CountTable ta(gene.cases);
  const CountTable tp = CountTable::merged(tc, ta);

  double k_tilde;
  if (opts.force_k) {
    k_tilde = *opts.force_k;
  } else {
    try {
      k_tilde = mle_k(tp).k_tilde;
    } catch (const BoundaryMle& e) {
      return degenerate_result(gene, p_prior, p_c, tp, tc, ta, e.direction());
    }
  }

  const GroupFit pooled = beta_eta_fit(tp, k_tilde);
  if (pooled.boundary) {
    const std::string dir = tp.all_zero() ? "zero" : "one";
    return degenerate_result(gene, p_prior, p_c, tp, tc, ta, dir);
  }
  const GroupFit g1 = beta_eta_fit(tc, k_tilde);
  const GroupFit g2 = beta_eta_fit(ta, k_tilde);

  BfResult res;
  fill_common(res, gene, p_prior, p_c, pooled, g1, g2);
  res.k_tilde = k_tilde;

  const BetaKernel kp(tp, k_tilde), kc(tc, k_tilde), ka(ta, k_tilde);
  const BetaPrior hyper0{pooled.eta, k_star(p_c, pooled.eta, pooled.sigma)};
  const BetaPrior hyper0_noninf{pooled.eta, k_star(1.0, pooled.eta, pooled.sigma)};
  const BetaPrior hyper1{g1.eta, k_star(1.0, g1.eta, g1.sigma)};
  const BetaPrior hyper2{g2.eta, k_star(1.0, g2.eta, g2.sigma)};
  const double log_m1 =
      mle_log_marginal(kc, g1, hyper1) + mle_log_marginal(ka, g2, hyper2);
  const double log_m0 = mle_log_marginal(kp, pooled, hyper0);
  const double log_m0_noninf =
      p_c == 1.0 ? log_m0 : mle_log_marginal(kp, pooled, hyper0_noninf);
  fill_bf(res, log_m1, log_m0, log_m0_noninf);
  return res;
}

BfResult bf_mixture(const GeneCounts& gene, double p_prior, const BfOptions& opts) {
  gene.validate();
  const double p_c = clamp_p_prior(p_prior);
  const CountTable tc(gene.controls);
  const CountTable ta(gene.cases);
  const CountTable tp = CountTable::merged(tc, ta);

  MixtureFit fit;
  try {
    fit = mixture_fit_constrained(tp, opts.force_w0, opts.force_k);
  } catch (const MixtureUndefined&) {
    BfResult res = bf_beta(gene, p_prior, opts);
    res.flags |= kFlagMixtureUndefined;
    return res;
  } catch (const BoundaryMle& e) {
    BfResult res = degenerate_result(gene, p_prior, p_c, tp, tc, ta, e.direction());
    res.w0_tilde = 0.0;
    return res;
  }

  const MixtureKernel kp(tp, fit.w0, fit.k);
  const MixtureKernel kc(tc, fit.w0, fit.k);
  const MixtureKernel ka(ta, fit.w0, fit.k);
  const GroupFit pooled = kernel_eta_fit(tp, kp);
  const GroupFit g1 = kernel_eta_fit(tc, kc);
  const GroupFit g2 = kernel_eta_fit(ta, ka);
  if (pooled.boundary) {
    BfResult res = degenerate_result(gene, p_prior, p_c, tp, tc, ta,
                                     tp.all_zero() ? "zero" : "one");
    res.w0_tilde = fit.w0;
    return res;
  }

  BfResult res;
  fill_common(res, gene, p_prior, p_c, pooled, g1, g2);
  res.k_tilde = fit.k;
  res.w0_tilde = fit.w0;

  const BetaPrior hyper0{pooled.eta, k_star(p_c, pooled.eta, pooled.sigma)};
  const BetaPrior hyper0_noninf{pooled.eta, k_star(1.0, pooled.eta, pooled.sigma)};
  const BetaPrior hyper1{g1.eta, k_star(1.0, g1.eta, g1.sigma)};
  const BetaPrior hyper2{g2.eta, k_star(1.0, g2.eta, g2.sigma)};
  const double log_m1 =
      mle_log_marginal(kc, g1, hyper1) + mle_log_marginal(ka, g2, hyper2);
  const double log_m0 = mle_log_marginal(kp, pooled, hyper0);
  const double log_m0_noninf =
      p_c == 1.0 ? log_m0 : mle_log_marginal(kp, pooled, hyper0_noninf);
  fill_bf(res, log_m1, log_m0, log_m0_noninf);
  return res;
}

namespace {

/// Empirical beta hyperprior on w0 mirroring the eta recipe:
/// mean = fitted w0 (kept interior), precision = mean / curvature variance.
BetaPrior w0_hyper_from_fit(const CountTable& tab, double w0, double eta, double k) {
  const double eps = 0.5 / static_cast<double>(tab.n_individuals() + 1);
  const double mean = std::clamp(w0, eps, 1.0 - eps);
  double d2 = 0.0;
  mixture_w0_derivs(tab, mean, eta, k, nullptr, &d2);
  double sigma;
  if (d2 < 0.0 && std::isfinite(d2)) {
    sigma = -1.0 / d2;
  } else {
    sigma = mean * (1.0 - mean) / static_cast<double>(tab.n_individuals());
  }
  const double kk = std::clamp(mean / sigma, 1e-12, 1e12);
  return BetaPrior{mean, kk};
}

}  // namespace

BfResult bf_mixture_joint(const GeneCounts& gene, double p_prior, const BfOptions& opts) {
  gene.validate();
  const double p_c = clamp_p_prior(p_prior);
  const CountTable tc(gene.controls);
  const CountTable ta(gene.cases);
  const CountTable tp = CountTable::merged(tc, ta);
  if (tp.common_zero_n() < 0)
    throw UnsupportedShape("zero-count individuals must share one site count");
  if (tp.n_zero() == 0 || tp.n_zero() == tp.n_individuals())
    throw MixtureUndefined("joint mixture requires 0 < m_zero < N");

  const MixtureFit fit = mixture_fit_constrained(tp, opts.force_w0, opts.force_k);
  const double k_tilde = fit.k;

  // Group-level (w0, eta) fits at the shared precision.
  const auto group_fit = [&](const CountTable& tab) -> MixtureFit {
    try {
      const MixtureGroupFit f = mle_mixture_group(tab, k_tilde);
      return {f.w0_hat, k_tilde, f.eta_hat};
    } catch (const BoundaryMle& e) {
      const double half = 0.5 / static_cast<double>(std::max<long long>(tab.total_n(), 1));
      const double eta = e.direction() == "one" ? 1.0 - half : half;
      const double w0 =
          static_cast<double>(tab.n_zero()) / static_cast<double>(tab.n_individuals());
      return {w0, k_tilde, eta};
    }
  };
  const MixtureFit f1 = group_fit(tc);
  const MixtureFit f2 = group_fit(ta);

  const BetaPrior w0h_p = w0_hyper_from_fit(tp, fit.w0, fit.eta, k_tilde);
  const BetaPrior w0h_1 = w0_hyper_from_fit(tc, f1.w0, f1.eta, k_tilde);
  const BetaPrior w0h_2 = w0_hyper_from_fit(ta, f2.w0, f2.eta, k_tilde);

  const JointMixtureKernel kp(tp, k_tilde, w0h_p);
  const JointMixtureKernel kc(tc, k_tilde, w0h_1);
  const JointMixtureKernel ka(ta, k_tilde, w0h_2);

  // Eta fits/curvatures at the fitted w0 (conditional mixture likelihood).
  const auto eta_fit = [&](const CountTable& tab, double w0) {
    const MixtureKernel kernel(tab, w0, k_tilde);
    return kernel_eta_fit(tab, kernel);
  };
  const GroupFit pooled = eta_fit(tp, fit.w0);
  const GroupFit g1 = eta_fit(tc, f1.w0);
  const GroupFit g2 = eta_fit(ta, f2.w0);

  BfResult res;
  fill_common(res, gene, p_prior, p_c, pooled, g1, g2);
  res.k_tilde = k_tilde;
  res.w0_tilde = fit.w0;

  const BetaPrior hyper0{pooled.eta, k_star(p_c, pooled.eta, pooled.sigma)};
  const BetaPrior hyper0_noninf{pooled.eta, k_star(1.0, pooled.eta, pooled.sigma)};
  const BetaPrior hyper1{g1.eta, k_star(1.0, g1.eta, g1.sigma)};
  const BetaPrior hyper2{g2.eta, k_star(1.0, g2.eta, g2.sigma)};
  const double log_m1 =
      mle_log_marginal(kc, g1, hyper1) + mle_log_marginal(ka, g2, hyper2);
  const double log_m0 = mle_log_marginal(kp, pooled, hyper0);
  const double log_m0_noninf =
      p_c == 1.0 ? log_m0 : mle_log_marginal(kp, pooled, hyper0_noninf);
  fill_bf(res, log_m1, log_m0, log_m0_noninf);
  return res;
}

FitDiagnostic fit_diagnostic(const GeneCounts& gene) {
  gene.validate();
  const CountTable tp(gene.pooled());
  FitDiagnostic diag;
  diag.eta_hat = mle_k(tp).eta_hat;
  double sum = 0.0;
  for (const auto& c : tp.cells())
    sum += c.mult * (c.n > 0 ? static_cast<double>(c.x) / c.n : 0.0);
  diag.mean_rate = sum / tp.n_individuals();
  return diag;
}

}  // namespace rvbf
