#ifndef RVBF_MARGINAL_HPP
#define RVBF_MARGINAL_HPP

#include <vector>

#include "rvbf/counts.hpp"
#include "rvbf/random.hpp"

namespace rvbf {

/// Log likelihood of one group's counts as a function of the mean rate eta,
/// all other parameters held fixed. Implementations omit binomial
/// coefficients, which cancel in every Bayes-factor ratio.
class LikelihoodKernel {
 public:
  virtual ~LikelihoodKernel() = default;
  virtual double loglik(double eta) const = 0;
  virtual void derivs(double eta, double* d1, double* d2) const = 0;
  /// True when the data carry no information about eta (loglik constant).
  virtual bool constant_in_eta() const = 0;
};

class BetaKernel final : public LikelihoodKernel {
 public:
  BetaKernel(CountTable tab, double k);
  double loglik(double eta) const override;
  void derivs(double eta, double* d1, double* d2) const override;
  bool constant_in_eta() const override;

 private:
  CountTable tab_;
  double k_;
};

/// Zero-inflated kernel at fixed (w0, k).
class MixtureKernel final : public LikelihoodKernel {
 public:
  MixtureKernel(CountTable tab, double w0, double k);
  double loglik(double eta) const override;
  void derivs(double eta, double* d1, double* d2) const override;
  bool constant_in_eta() const override;

 private:
  CountTable tab_;
  double w0_;
  double k_;
};

/// Mixture kernel with the zero-mass weight w0 integrated against a
/// Beta(eta**, K**) hyperprior via the exact finite sum over the number of
/// structural zeros. Requires all zero-count individuals to share one site
/// count n (throws UnsupportedShape otherwise).
class JointMixtureKernel final : public LikelihoodKernel {
 public:
  JointMixtureKernel(CountTable tab, double k, const BetaPrior& w0_hyper);
  double loglik(double eta) const override;
  void derivs(double eta, double* d1, double* d2) const override;
  bool constant_in_eta() const override;

 private:
  CountTable tab_;
  double k_;
  int m_zero_;
  int n_zero_sites_;
  double log_beta_hyper_;
  std::vector<double> log_h_weight_;  // log C(M,h) + log B(h+a**, N-h+b**), h=0..M
};

struct LaplaceFit {
  double theta_hat = 0.0;     // logit-scale mode
  double log_f_at_mode = 0.0;
  double curvature = 0.0;     // d2/dtheta2 of the log integrand at the mode
  double log_integral = 0.0;
};

/// log of integral_0^1 L(eta) Beta(eta | hyper) d eta by Laplace approximation
/// on theta = logit(eta); the Jacobian eta(1-eta) is part of the integrand.
/// Data carrying no information about eta give log_integral = 0 exactly.
LaplaceFit laplace_log_marginal(const LikelihoodKernel& kernel, const BetaPrior& hyper);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Plain Monte Carlo estimate of the same log marginal: draws eta_l from the
/// hyperprior and averages exp(loglik) by streaming log-sum-exp. std_error is
/// the delta-method error of the log estimate.
McEstimate mc_log_marginal(const LikelihoodKernel& kernel, const BetaPrior& hyper,
                           int draws, RandomSource& rng);

}  // namespace rvbf

#endif
