#ifndef RVBF_COUNTS_HPP
#define RVBF_COUNTS_HPP

#include <string>
#include <vector>

#include "rvbf/errors.hpp"

namespace rvbf {

struct IndivCounts {
  int x = 0;  // rare-variant count
  int n = 0;  // number of sites
  bool operator==(const IndivCounts&) const = default;
};

/// Per-gene count data, split by group.
struct GeneCounts {
  std::string gene_id;
  std::vector<IndivCounts> controls;
  std::vector<IndivCounts> cases;

  void validate() const;  // throws InputError on 0<=x<=n / non-empty violations
  std::vector<IndivCounts> pooled() const;
};

/// Beta distribution in mean/precision form: alpha = eta*k, beta = (1-eta)*k.
struct BetaPrior {
  double eta = 0.0;
  double k = 0.0;
  void validate() const;
};

struct MixturePrior {
  double w0 = 0.0;  // point mass at rate zero
  double eta = 0.0;
  double k = 0.0;
  void validate() const;
};

/// Aggregated multiset of (x, n) cells. Likelihood evaluations are linear in
/// the number of distinct cells, not the number of individuals, which is what
/// makes genome-scale optimization affordable.
class CountTable {
 public:
  struct Cell {
    int x = 0;
    int n = 0;
    int mult = 0;
  };

  CountTable() = default;
  explicit CountTable(const std::vector<IndivCounts>& people);
  static CountTable merged(const CountTable& a, const CountTable& b);

  const std::vector<Cell>& cells() const { return cells_; }
  int n_individuals() const { return n_individuals_; }
  long long total_x() const { return total_x_; }
  long long total_n() const { return total_n_; }
  int n_zero() const { return n_zero_; }  // individuals with x == 0
  bool all_zero() const { return total_x_ == 0; }
  bool all_saturated() const { return total_x_ == total_n_; }
  /// Shared n among zero-count individuals; -1 if they differ, 0 if none.
  int common_zero_n() const;
  double positive_x_variance() const;

 private:
  std::vector<Cell> cells_;
  int n_individuals_ = 0;
  long long total_x_ = 0;
  long long total_n_ = 0;
  int n_zero_ = 0;
};

/// Beta-binomial log likelihood in eta at fixed precision k, binomial
/// coefficients excluded (they cancel in every Bayes-factor ratio).
double bb_loglik(const CountTable& tab, double eta, double k);
double bb_loglik(const std::vector<IndivCounts>& people, double eta, double k);

/// Analytic first/second derivative of bb_loglik with respect to eta.
void bb_derivs(const CountTable& tab, double eta, double k, double* d1, double* d2);

struct EtaFit {
  double eta_hat = 0.0;
  double sigma_hat = 0.0;  // -1 / (d^2 loglik / d eta^2) at the mode
  double loglik = 0.0;
};

/// MLE of eta at fixed k, optimized on the logit scale.
/// Throws BoundaryMle when all x=0 or all x=n.
EtaFit mle_eta(const CountTable& tab, double k);

struct KFit {
  double k_tilde = 0.0;
  double eta_hat = 0.0;
  double sigma_hat = 0.0;
  double loglik = 0.0;
  bool effectively_binomial = false;  // k at the upper search bound
};

inline constexpr double kKMin = 1e-4;
inline constexpr double kKMax = 1e8;

/// Joint MLE of (eta, K) by profile likelihood, K on the log scale.
KFit mle_k(const CountTable& tab);

/// Intra-class correlation implied by precision k.
double icc(double k);

/// Zero-inflated beta-binomial log likelihood at fixed (w0, k).
double mixture_loglik(const CountTable& tab, const MixturePrior& prior, double eta);
void mixture_derivs(const CountTable& tab, const MixturePrior& prior, double eta,
                    double* d1, double* d2);

/// Derivatives of mixture_loglik with respect to w0 at fixed (eta, k).
void mixture_w0_derivs(const CountTable& tab, double w0, double eta, double k,
                       double* d1, double* d2);

struct MixtureNullFit {
  double w0_tilde = 0.0;
  double k_tilde = 0.0;
  double eta_hat = 0.0;
  double loglik = 0.0;
};

/// Joint MLE of (w0, eta, K) for the mixture likelihood on the pooled sample.
/// Throws MixtureUndefined when M=0, M=N, or the positive counts are constant.
MixtureNullFit mle_mixture_null(const CountTable& tab);

/// MLE of (w0, eta) at fixed k (group-level fit for the joint-mixture BF).
struct MixtureGroupFit {
  double w0_hat = 0.0;
  double eta_hat = 0.0;
  double loglik = 0.0;
};
MixtureGroupFit mle_mixture_group(const CountTable& tab, double k);

}  // namespace rvbf

#endif
