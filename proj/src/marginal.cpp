#include "rvbf/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include <boost/math/tools/minima.hpp>

#include "rvbf/special.hpp"

namespace rvbf {

namespace {

constexpr double kThetaMax = 35.0;
constexpr int kBrentBits = 45;

double expit(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

BetaKernel::BetaKernel(CountTable tab, double k) : tab_(std::move(tab)), k_(k) {
  if (!(k > 0.0)) throw std::domain_error("BetaKernel: k > 0 required");
}

double BetaKernel::loglik(double eta) const { return bb_loglik(tab_, eta, k_); }

void BetaKernel::derivs(double eta, double* d1, double* d2) const {
  bb_derivs(tab_, eta, k_, d1, d2);
}

bool BetaKernel::constant_in_eta() const { return tab_.total_n() == 0; }

MixtureKernel::MixtureKernel(CountTable tab, double w0, double k)
    : tab_(std::move(tab)), w0_(w0), k_(k) {
  MixturePrior{w0, 0.5, k}.validate();
}

double MixtureKernel::loglik(double eta) const {
  return mixture_loglik(tab_, MixturePrior{w0_, eta, k_}, eta);
}

void MixtureKernel::derivs(double eta, double* d1, double* d2) const {
  mixture_derivs(tab_, MixturePrior{w0_, eta, k_}, eta, d1, d2);
}

bool MixtureKernel::constant_in_eta() const { return tab_.total_n() == 0; }

JointMixtureKernel::JointMixtureKernel(CountTable tab, double k, const BetaPrior& w0_hyper)
    : tab_(std::move(tab)), k_(k) {
  if (!(k > 0.0)) throw std::domain_error("JointMixtureKernel: k > 0 required");
  w0_hyper.validate();
  n_zero_sites_ = tab_.common_zero_n();
  if (n_zero_sites_ < 0)
    throw UnsupportedShape("zero-count individuals must share one site count");
  m_zero_ = tab_.n_zero();
  const int n_total = tab_.n_individuals();
  const double a = w0_hyper.eta * w0_hyper.k;
  const double b = (1.0 - w0_hyper.eta) * w0_hyper.k;
  log_beta_hyper_ = log_beta(a, b);
  log_h_weight_.resize(m_zero_ + 1);
  const double log_m_fact = log_gamma(m_zero_ + 1.0);
  for (int h = 0; h <= m_zero_; ++h) {
    const double log_choose = log_m_fact - log_gamma(h + 1.0) - log_gamma(m_zero_ - h + 1.0);
    log_h_weight_[h] = log_choose + log_beta(h + a, n_total - h + b);
  }
}

double JointMixtureKernel::loglik(double eta) const {
  if (!(eta > 0.0 && eta < 1.0))
    throw std::domain_error("JointMixtureKernel: eta in (0,1) required");
  const double a = eta * k_;
  const double b = (1.0 - eta) * k_;
  const double log_b0 = log_beta(a, b);
  double ll = 0.0;
  for (const auto& c : tab_.cells()) {
    if (c.x == 0) continue;
    ll += c.mult * (log_beta(c.x + a, c.n - c.x + b) - log_b0);
  }
  // s = log P(x=0 | eta, k) across the shared n sites of the zero individuals.
  const double s = n_zero_sites_ == 0
                       ? 0.0
                       : log_gamma(b + n_zero_sites_) - log_gamma(b) -
                             log_gamma(k_ + n_zero_sites_) + log_gamma(k_);
  double lse = -std::numeric_limits<double>::infinity();
  for (int h = 0; h <= m_zero_; ++h) {
    const double t = log_h_weight_[h] + (m_zero_ - h) * s;
    if (t > lse) {
      lse = t + std::log1p(std::exp(lse - t));
    } else {
      lse += std::log1p(std::exp(t - lse));
    }
  }
  return ll + lse - log_beta_hyper_;
}

void JointMixtureKernel::derivs(double eta, double* d1, double* d2) const {
  const double a = eta * k_;
  const double b = (1.0 - eta) * k_;
  const double psi_a = digamma(a);
  const double psi_b = digamma(b);
  const double psi1_a = trigamma(a);
  const double psi1_b = trigamma(b);
  double s1 = 0.0, s2 = 0.0;
  for (const auto& c : tab_.cells()) {
    if (c.x == 0) continue;
    s1 += c.mult * k_ * (digamma(c.x + a) - digamma(c.n - c.x + b) - psi_a + psi_b);
    s2 += c.mult * k_ * k_ *
          (trigamma(c.x + a) + trigamma(c.n - c.x + b) - psi1_a - psi1_b);
  }
  double sp = 0.0, spp = 0.0;
  if (n_zero_sites_ > 0) {
    sp = k_ * (psi_b - digamma(b + n_zero_sites_));
    spp = k_ * k_ * (trigamma(b + n_zero_sites_) - psi1_b);
  }
  // Posterior moments of (M - h) under weights proportional to the h-sum terms.
  const double s = n_zero_sites_ == 0
                       ? 0.0
                       : log_gamma(b + n_zero_sites_) - log_gamma(b) -
                             log_gamma(k_ + n_zero_sites_) + log_gamma(k_);
  double max_t = -std::numeric_limits<double>::infinity();
  for (int h = 0; h <= m_zero_; ++h)
    max_t = std::max(max_t, log_h_weight_[h] + (m_zero_ - h) * s);
  double z = 0.0, z1 = 0.0, z2 = 0.0;
  for (int h = 0; h <= m_zero_; ++h) {
    const double w = std::exp(log_h_weight_[h] + (m_zero_ - h) * s - max_t);
    const double mh = static_cast<double>(m_zero_ - h);
    z += w;
    z1 += w * mh;
    z2 += w * mh * mh;
  }
  const double e_mh = z1 / z;
  const double var_mh = std::max(0.0, z2 / z - e_mh * e_mh);
  if (d1) *d1 = s1 + sp * e_mh;
  if (d2) *d2 = s2 + spp * e_mh + sp * sp * var_mh;
}

bool JointMixtureKernel::constant_in_eta() const {
  if (n_zero_sites_ > 0) return false;
  return tab_.total_n() == 0;
}

LaplaceFit laplace_log_marginal(const LikelihoodKernel& kernel, const BetaPrior& hyper) {
  hyper.validate();
  if (kernel.constant_in_eta()) {
    // The prior integrates to 1, so the marginal equals the constant likelihood.
    LaplaceFit fit;
    fit.theta_hat = std::log(hyper.eta / (1.0 - hyper.eta));
    fit.log_f_at_mode = kernel.loglik(0.5);
    fit.curvature = -hyper.k * 0.25;
    fit.log_integral = fit.log_f_at_mode;
    return fit;
  }
  const double a = hyper.eta * hyper.k;
  const double b = (1.0 - hyper.eta) * hyper.k;
  const double log_b_hyper = log_beta(a, b);
  // g(theta) = loglik(eta) + a log eta + b log(1-eta) - log B(a,b); the theta
  // Jacobian eta(1-eta) merges with the (eta^(a-1))((1-eta)^(b-1)) density.
  const auto g = [&](double theta) {
    const double eta = expit(theta);
    double log_eta, log_1m_eta;
    if (theta >= 0.0) {
      log_1m_eta = -theta - std::log1p(std::exp(-theta));
      log_eta = log_1m_eta + theta;
    } else {
      log_eta = theta - std::log1p(std::exp(theta));
      log_1m_eta = log_eta - theta;
    }
    return kernel.loglik(eta) + a * log_eta + b * log_1m_eta - log_b_hyper;
  };
  auto [theta_hat, neg_g] = boost::math::tools::brent_find_minima(
      [&](double t) { return -g(t); }, -kThetaMax, kThetaMax, kBrentBits);
  double g_hat = -neg_g;
  for (int it = 0; it < 5; ++it) {
    const double eta = expit(theta_hat);
    double d1 = 0.0, d2 = 0.0;
    kernel.derivs(eta, &d1, &d2);
    const double w = eta * (1.0 - eta);
    const double g1 = w * d1 + a * (1.0 - eta) - b * eta;
    const double g2 = w * (1.0 - 2.0 * eta) * d1 + w * w * d2 - hyper.k * w;
    if (!(g2 < 0.0)) break;
    const double step = std::clamp(-g1 / g2, -1.0, 1.0);
    const double cand = std::clamp(theta_hat + step, -kThetaMax, kThetaMax);
    const double g_cand = g(cand);
    if (g_cand >= g_hat) {
      theta_hat = cand;
      g_hat = g_cand;
    } else {
      break;
    }
    if (std::abs(step) < 1e-12) break;
  }
  LaplaceFit fit;
  fit.theta_hat = theta_hat;
  fit.log_f_at_mode = g_hat;
  const double eta = expit(theta_hat);
  double d1 = 0.0, d2 = 0.0;
  kernel.derivs(eta, &d1, &d2);
  const double w = eta * (1.0 - eta);
  fit.curvature = w * (1.0 - 2.0 * eta) * d1 + w * w * d2 - hyper.k * w;
  if (!(fit.curvature < 0.0) || !std::isfinite(fit.curvature))
    throw NumericalFailure("laplace_log_marginal: non-negative curvature at the mode");
  fit.log_integral =
      fit.log_f_at_mode + 0.5 * std::log(2.0 * M_PI) - 0.5 * std::log(-fit.curvature);
  return fit;
}

McEstimate mc_log_marginal(const LikelihoodKernel& kernel, const BetaPrior& hyper,
                           int draws, RandomSource& rng) {
  hyper.validate();
  if (draws < 1000) throw std::domain_error("mc_log_marginal: draws >= 1000 required");
  // Streaming log-sum-exp of loglik and 2*loglik.
  double m1 = -std::numeric_limits<double>::infinity(), s1 = 0.0;
  double m2 = -std::numeric_limits<double>::infinity(), s2 = 0.0;
  for (int l = 0; l < draws; ++l) {
    double eta = rng.beta_mean_precision(hyper.eta, hyper.k);
    eta = std::clamp(eta, 1e-300, 1.0 - 1e-16);
    const double ll = kernel.loglik(eta);
    if (ll == -std::numeric_limits<double>::infinity()) continue;
    if (ll > m1) {
      s1 = s1 * std::exp(m1 - ll) + 1.0;
      m1 = ll;
    } else {
      s1 += std::exp(ll - m1);
    }
    const double ll2 = 2.0 * ll;
    if (ll2 > m2) {
      s2 = s2 * std::exp(m2 - ll2) + 1.0;
      m2 = ll2;
    } else {
      s2 += std::exp(ll2 - m2);
    }
  }
  McEstimate out;
  if (s1 <= 0.0) {
    out.estimate = -std::numeric_limits<double>::infinity();
    out.std_error = std::numeric_limits<double>::infinity();
    return out;
  }
  const double log_n = std::log(static_cast<double>(draws));
  const double lse1 = m1 + std::log(s1);
  const double lse2 = m2 + std::log(s2);
  out.estimate = lse1 - log_n;
  const double ratio = std::exp(lse2 - 2.0 * lse1 + log_n);  // E[L^2]/E[L]^2
  out.std_error = ratio > 1.0 ? std::sqrt((ratio - 1.0) / static_cast<double>(draws))
                              : 0.0;
  return out;
}

}  // namespace rvbf
