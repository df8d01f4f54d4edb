#ifndef RVBF_BF_HPP
#define RVBF_BF_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "rvbf/counts.hpp"

namespace rvbf {

enum BfFlag : std::uint32_t {
  kFlagBoundaryMle = 1u << 0,
  kFlagMixtureUndefined = 1u << 1,
  kFlagPriorFallback = 1u << 2,
};

std::string flags_to_string(std::uint32_t flags);  // "." when empty

struct BfResult {
  std::string gene_id;
  double log_bf = 0.0;
  double two_log_bf = 0.0;
  // Same statistic with the prior probability forced to 1; equals two_log_bf
  // when p_prior = 1. The pipeline needs both in informative runs.
  double two_log_bf_noninf = 0.0;
  int df = 1;
  double p_value = 1.0;
  double eta_hat = 0.0, eta1_hat = 0.0, eta2_hat = 0.0;
  double sigma_hat = 0.0, sigma1_hat = 0.0, sigma2_hat = 0.0;
  double k_tilde = 0.0;
  std::optional<double> w0_tilde;
  double p_prior = 1.0;
  double log_kstar = 0.0;      // log K* for the pooled hyperprior
  double log_kstar_eta = 0.0;  // log(K* eta*)
  double asymptotic_two_log_bf = 0.0;
  std::uint32_t flags = 0;
};

struct BfOptions {
  std::optional<double> force_w0;  // override the fitted mixture zero mass
  std::optional<double> force_k;   // override the fitted precision
};

/// Bayes factor under the plain beta prior on eta. p_prior = 1 gives the
/// non-informative statistic (df 1); p_prior < 1 the informative one (df 3).
BfResult bf_beta(const GeneCounts& gene, double p_prior, const BfOptions& opts = {});

/// Zero-inflated variant with (w0, K) fixed at their pooled null MLEs.
/// Falls back to bf_beta (flagged) when the mixture fit is undefined.
BfResult bf_mixture(const GeneCounts& gene, double p_prior, const BfOptions& opts = {});

/// Variant where the zero mass w0 is integrated against its own empirical
/// beta hyperprior (exact finite sum over structural zeros). Throws
/// MixtureUndefined / UnsupportedShape when the preconditions fail.
BfResult bf_mixture_joint(const GeneCounts& gene, double p_prior, const BfOptions& opts = {});

struct FitDiagnostic {
  double eta_hat = 0.0;
  double mean_rate = 0.0;  // average of x/n over individuals
};

FitDiagnostic fit_diagnostic(const GeneCounts& gene);

}  // namespace rvbf

#endif
