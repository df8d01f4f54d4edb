#include "rvbf/counts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>

#include <boost/math/tools/minima.hpp>

#include "rvbf/special.hpp"

namespace rvbf {

namespace {

constexpr double kThetaMax = 35.0;
constexpr int kBrentBits = 45;

double expit(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

void GeneCounts::validate() const {
  if (gene_id.empty()) throw InputError("gene '" + gene_id + "': empty gene_id");
  if (controls.empty() || cases.empty())
    throw InputError("gene '" + gene_id + "': both groups must be non-empty");
  for (const auto* group : {&controls, &cases}) {
    for (const auto& p : *group) {
      if (p.n < 1 || p.x < 0 || p.x > p.n)
        throw InputError("gene '" + gene_id + "': individual counts must satisfy 0 <= x <= n, n >= 1");
    }
  }
}

std::vector<IndivCounts> GeneCounts::pooled() const {
  std::vector<IndivCounts> all = controls;
  all.insert(all.end(), cases.begin(), cases.end());
  return all;
}

void BetaPrior::validate() const {
  if (!(eta > 0.0 && eta < 1.0) || !(k > 0.0) || !std::isfinite(k))
    throw std::domain_error("BetaPrior: eta in (0,1) and k > 0 required");
}

void MixturePrior::validate() const {
  if (!(w0 >= 0.0 && w0 < 1.0)) throw std::domain_error("MixturePrior: w0 in [0,1) required");
  if (!(eta > 0.0 && eta < 1.0) || !(k > 0.0))
    throw std::domain_error("MixturePrior: eta in (0,1) and k > 0 required");
}

CountTable::CountTable(const std::vector<IndivCounts>& people) {
  std::map<std::pair<int, int>, int> agg;
  for (const auto& p : people) {
    if (p.x < 0 || p.n < 0 || p.x > p.n)
      throw InputError("counts must satisfy 0 <= x <= n");
    ++agg[{p.x, p.n}];
  }
  cells_.reserve(agg.size());
  for (const auto& [key, mult] : agg) {
    cells_.push_back({key.first, key.second, mult});
    n_individuals_ += mult;
    total_x_ += static_cast<long long>(key.first) * mult;
    total_n_ += static_cast<long long>(key.second) * mult;
    if (key.first == 0) n_zero_ += mult;
  }
}

CountTable CountTable::merged(const CountTable& a, const CountTable& b) {
  std::map<std::pair<int, int>, int> agg;
  for (const auto& c : a.cells_) agg[{c.x, c.n}] += c.mult;
  for (const auto& c : b.cells_) agg[{c.x, c.n}] += c.mult;
  CountTable out;
  out.cells_.reserve(agg.size());
  for (const auto& [key, mult] : agg) {
    out.cells_.push_back({key.first, key.second, mult});
    out.n_individuals_ += mult;
    out.total_x_ += static_cast<long long>(key.first) * mult;
    out.total_n_ += static_cast<long long>(key.second) * mult;
    if (key.first == 0) out.n_zero_ += mult;
  }
  return out;
}

int CountTable::common_zero_n() const {
  int n = 0;
  bool seen = false;
  for (const auto& c : cells_) {
    if (c.x != 0) continue;
    if (!seen) {
      n = c.n;
      seen = true;
    } else if (c.n != n) {
      return -1;
    }
  }
  return seen ? n : 0;
}

double CountTable::positive_x_variance() const {
  long long m = 0, sx = 0;
  for (const auto& c : cells_) {
    if (c.x > 0) {
      m += c.mult;
      sx += static_cast<long long>(c.x) * c.mult;
    }
  }
  if (m < 2) return 0.0;
  const double mean = static_cast<double>(sx) / static_cast<double>(m);
  double ss = 0.0;
  for (const auto& c : cells_) {
    if (c.x > 0) {
      const double d = static_cast<double>(c.x) - mean;
      ss += c.mult * d * d;
    }
  }
  return ss / static_cast<double>(m);
}

double bb_loglik(const CountTable& tab, double eta, double k) {
  if (!(eta > 0.0 && eta < 1.0) || !(k > 0.0) || !std::isfinite(k))
    throw std::domain_error("bb_loglik: eta in (0,1) and finite k > 0 required");
  const double a = eta * k;
  const double b = (1.0 - eta) * k;
  const double log_b0 = log_beta(a, b);
  double ll = 0.0;
  for (const auto& c : tab.cells()) {
    if (c.n == 0) continue;
    ll += c.mult * (log_beta(c.x + a, c.n - c.x + b) - log_b0);
  }
  return ll;
}

double bb_loglik(const std::vector<IndivCounts>& people, double eta, double k) {
  return bb_loglik(CountTable(people), eta, k);
}

void bb_derivs(const CountTable& tab, double eta, double k, double* d1, double* d2) {
  if (!(eta > 0.0 && eta < 1.0) || !(k > 0.0))
    throw std::domain_error("bb_derivs: eta in (0,1) and k > 0 required");
  const double a = eta * k;
  const double b = (1.0 - eta) * k;
  const double psi_a = digamma(a);
  const double psi_b = digamma(b);
  const double psi1_a = trigamma(a);
  const double psi1_b = trigamma(b);
  double s1 = 0.0, s2 = 0.0;
  for (const auto& c : tab.cells()) {
    if (c.n == 0) continue;
    // d/d eta of log B(x+a, n-x+b) - log B(a,b) with a=k*eta, b=k*(1-eta).
    s1 += c.mult * (digamma(c.x + a) - digamma(c.n - c.x + b) - psi_a + psi_b);
    s2 += c.mult * (trigamma(c.x + a) + trigamma(c.n - c.x + b) - psi1_a - psi1_b);
  }
  if (d1) *d1 = k * s1;
  if (d2) *d2 = k * k * s2;
}

EtaFit mle_eta(const CountTable& tab, double k) {
  if (tab.total_n() == 0) throw InputError("mle_eta: no sites observed");
  if (tab.all_zero()) throw BoundaryMle("zero");
  if (tab.all_saturated()) throw BoundaryMle("one");
  const auto neg = [&](double theta) { return -bb_loglik(tab, expit(theta), k); };
  auto [theta_hat, neg_ll] =
      boost::math::tools::brent_find_minima(neg, -kThetaMax, kThetaMax, kBrentBits);
  // Newton polish on the logit scale using analytic derivatives.
  for (int it = 0; it < 5; ++it) {
    const double eta = expit(theta_hat);
    double d1 = 0.0, d2 = 0.0;
    bb_derivs(tab, eta, k, &d1, &d2);
    const double w = eta * (1.0 - eta);
    const double g1 = d1 * w;
    const double g2 = d2 * w * w + d1 * w * (1.0 - 2.0 * eta);
    if (!(g2 < 0.0)) break;
    const double step = std::clamp(-g1 / g2, -1.0, 1.0);
    const double cand = std::clamp(theta_hat + step, -kThetaMax, kThetaMax);
    if (neg(cand) <= neg_ll) {
      theta_hat = cand;
      neg_ll = neg(cand);
    } else {
      break;
    }
    if (std::abs(step) < 1e-12) break;
  }
  EtaFit fit;
  fit.eta_hat = expit(theta_hat);
  fit.loglik = -neg_ll;
  double d1 = 0.0, d2 = 0.0;
  bb_derivs(tab, fit.eta_hat, k, &d1, &d2);
  if (!(d2 < 0.0) || !std::isfinite(d2))
    throw NumericalFailure("mle_eta: non-negative curvature at the optimum");
  fit.sigma_hat = -1.0 / d2;
  return fit;
}

KFit mle_k(const CountTable& tab) {
  if (tab.total_n() == 0) throw InputError("mle_k: no sites observed");
  if (tab.all_zero()) throw BoundaryMle("zero");
  if (tab.all_saturated()) throw BoundaryMle("one");
  const double lo = std::log(kKMin);
  const double hi = std::log(kKMax);
  const auto profile_neg = [&](double log_k) {
    return -mle_eta(tab, std::exp(log_k)).loglik;
  };
  auto [log_k_hat, neg_ll] = boost::math::tools::brent_find_minima(profile_neg, lo, hi, kBrentBits);
  // Brent cannot land on the bounds; probe them so flat profiles resolve to the boundary.
  for (double edge : {lo, hi}) {
    const double v = profile_neg(edge);
    if (v < neg_ll) {
      neg_ll = v;
      log_k_hat = edge;
    }
  }
  KFit fit;
  fit.k_tilde = std::exp(log_k_hat);
  const EtaFit ef = mle_eta(tab, fit.k_tilde);
  fit.eta_hat = ef.eta_hat;
  fit.sigma_hat = ef.sigma_hat;
  fit.loglik = ef.loglik;
  fit.effectively_binomial = fit.k_tilde >= 1e7;
  return fit;
}

double icc(double k) {
  if (!(k > 0.0)) throw std::domain_error("icc: k > 0 required");
  return 1.0 / (k + 1.0);
}

namespace {

// log of B(a, b+n)/B(a,b): the beta-binomial probability of observing zero
// RVs across n sites, used by the h0 mixture term.
double log_zero_prob(double eta, double k, int n) {
  if (n == 0) return 0.0;
  const double b = (1.0 - eta) * k;
  return log_gamma(b + n) - log_gamma(b) - log_gamma(k + n) + log_gamma(k);
}

double log_h0(double w0, double eta, double k, int n) {
  const double s = log_zero_prob(eta, k, n);
  if (w0 <= 0.0) return s;
  const double lw = std::log(w0);
  const double lc = std::log1p(-w0) + s;
  const double m = std::max(lw, lc);
  return m + std::log1p(std::exp(std::min(lw, lc) - m));
}

}  // namespace

double mixture_loglik(const CountTable& tab, const MixturePrior& prior, double eta) {
  prior.validate();
  if (!(eta > 0.0 && eta < 1.0)) throw std::domain_error("mixture_loglik: eta in (0,1) required");
  const double w0 = prior.w0;
  const double k = prior.k;
  const double a = eta * k;
  const double b = (1.0 - eta) * k;
  const double log_b0 = log_beta(a, b);
  const double log_1mw = w0 > 0.0 ? std::log1p(-w0) : 0.0;
  double ll = 0.0;
  for (const auto& c : tab.cells()) {
    if (c.x == 0) {
      ll += c.mult * log_h0(w0, eta, k, c.n);
    } else {
      ll += c.mult * (log_1mw + log_beta(c.x + a, c.n - c.x + b) - log_b0);
    }
  }
  return ll;
}

void mixture_derivs(const CountTable& tab, const MixturePrior& prior, double eta,
                    double* d1, double* d2) {
  prior.validate();
  const double w0 = prior.w0;
  const double k = prior.k;
  const double a = eta * k;
  const double b = (1.0 - eta) * k;
  const double psi_a = digamma(a);
  const double psi_b = digamma(b);
  const double psi1_a = trigamma(a);
  const double psi1_b = trigamma(b);
  double s1 = 0.0, s2 = 0.0;
  for (const auto& c : tab.cells()) {
    if (c.x == 0) {
      if (c.n == 0) continue;
      const double s = log_zero_prob(eta, k, c.n);
      const double sp = k * (psi_b - digamma(b + c.n));
      const double spp = k * k * (trigamma(b + c.n) - psi1_b);
      const double u = (1.0 - w0) * std::exp(s);
      const double h = w0 + u;
      const double r = u * sp / h;
      s1 += c.mult * r;
      s2 += c.mult * (u * (spp + sp * sp) / h - r * r);
    } else {
      const double g1 = k * (digamma(c.x + a) - digamma(c.n - c.x + b) - psi_a + psi_b);
      const double g2 = k * k * (trigamma(c.x + a) + trigamma(c.n - c.x + b) - psi1_a - psi1_b);
      s1 += c.mult * g1;
      s2 += c.mult * g2;
    }
  }
  if (d1) *d1 = s1;
  if (d2) *d2 = s2;
}

void mixture_w0_derivs(const CountTable& tab, double w0, double eta, double k,
                       double* d1, double* d2) {
  if (!(w0 >= 0.0 && w0 < 1.0)) throw std::domain_error("mixture_w0_derivs: w0 in [0,1) required");
  double s1 = 0.0, s2 = 0.0;
  for (const auto& c : tab.cells()) {
    if (c.x == 0) {
      const double es = std::exp(log_zero_prob(eta, k, c.n));
      const double h = w0 + (1.0 - w0) * es;
      const double r = (1.0 - es) / h;
      s1 += c.mult * r;
      s2 -= c.mult * r * r;
    } else {
      s1 -= c.mult / (1.0 - w0);
      s2 -= c.mult / ((1.0 - w0) * (1.0 - w0));
    }
  }
  if (d1) *d1 = s1;
  if (d2) *d2 = s2;
}

namespace {

// Exact profile over w0 at fixed (eta, k): the log likelihood is concave in
// w0 (each zero cell contributes the log of a linear function, each positive
// cell log(1-w0)), so a safeguarded Newton on the analytic score converges to
// machine precision.
double profile_w0(const CountTable& tab, double eta, double k) {
  double d1 = 0.0, d2 = 0.0;
  mixture_w0_derivs(tab, 0.0, eta, k, &d1, &d2);
  if (!(d1 > 0.0)) return 0.0;
  double lo = 0.0, hi = 1.0 - 1e-12;
  double w = 0.5;
  for (int it = 0; it < 200; ++it) {
    mixture_w0_derivs(tab, w, eta, k, &d1, &d2);
    if (d1 > 0.0) lo = w; else hi = w;
    double cand = d2 < 0.0 ? w - d1 / d2 : w;
    if (!(cand > lo && cand < hi)) cand = 0.5 * (lo + hi);
    if (std::abs(cand - w) < 1e-15) return cand;
    w = cand;
  }
  return w;
}

}  // namespace

MixtureNullFit mle_mixture_null(const CountTable& tab) {
  if (tab.n_zero() == 0 || tab.n_zero() == tab.n_individuals())
    throw MixtureUndefined("mixture fit requires 0 < m_zero < N");
  if (!(tab.positive_x_variance() > 0.0))
    throw MixtureUndefined("mixture fit requires variance among positive counts");
  const double k_lo = std::log(kKMin);
  const double k_hi = std::log(kKMax);
  // Nested profile: w0 solved exactly inside, eta by Brent in the middle,
  // K by Brent outside. Avoids the slow w0/K ridge a coordinate sweep hits.
  const auto theta_profile_neg = [&](double log_k) {
    const double k = std::exp(log_k);
    const auto inner_neg = [&](double theta) {
      const double eta = expit(theta);
      const double w0 = profile_w0(tab, eta, k);
      return -mixture_loglik(tab, MixturePrior{w0, eta, k}, eta);
    };
    return boost::math::tools::brent_find_minima(inner_neg, -kThetaMax, kThetaMax, kBrentBits);
  };
  auto [log_k_hat, neg_ll] = boost::math::tools::brent_find_minima(
      [&](double lk) { return theta_profile_neg(lk).second; }, k_lo, k_hi, kBrentBits);
  for (double edge : {k_lo, k_hi}) {
    const double v = theta_profile_neg(edge).second;
    if (v < neg_ll) {
      neg_ll = v;
      log_k_hat = edge;
    }
  }
  const auto inner = theta_profile_neg(log_k_hat);
  MixtureNullFit fit;
  fit.k_tilde = std::exp(log_k_hat);
  fit.eta_hat = expit(inner.first);
  fit.w0_tilde = profile_w0(tab, fit.eta_hat, fit.k_tilde);
  fit.loglik = -inner.second;
  return fit;
}

MixtureGroupFit mle_mixture_group(const CountTable& tab, double k) {
  if (tab.all_zero()) throw BoundaryMle("zero");
  MixtureGroupFit fit;
  if (tab.n_zero() == 0) {
    // No zeros: the mixture weight maximizes at 0 and the fit is pure beta-binomial.
    const EtaFit ef = mle_eta(tab, k);
    fit.w0_hat = 0.0;
    fit.eta_hat = ef.eta_hat;
    fit.loglik = ef.loglik;
    return fit;
  }
  const auto inner_neg = [&](double theta) {
    const double eta = expit(theta);
    const double w0 = profile_w0(tab, eta, k);
    return -mixture_loglik(tab, MixturePrior{w0, eta, k}, eta);
  };
  auto [theta_hat, neg_ll] =
      boost::math::tools::brent_find_minima(inner_neg, -kThetaMax, kThetaMax, kBrentBits);
  fit.eta_hat = expit(theta_hat);
  fit.w0_hat = profile_w0(tab, fit.eta_hat, k);
  fit.loglik = -neg_ll;
  return fit;
}

}  // namespace rvbf
