#ifndef RVBF_KS_PRIOR_HPP
#define RVBF_KS_PRIOR_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rvbf/errors.hpp"

namespace rvbf {

struct VariantSite {
  std::string site_id;
  double maf = 0.0;  // in (0, 0.01]
  std::vector<std::uint8_t> carriers_controls;
  std::vector<std::uint8_t> carriers_cases;
};

struct VariantBlock {
  std::string gene_id;
  std::vector<VariantSite> sites;
  void validate() const;  // consistent carrier-vector lengths, maf in range
};

struct StandardizedCounts {
  long long y1_tilde = 0;
  long long y2_tilde = 0;
  long long c_v = 0;
};

/// Scales raw carrier counts by c_v = floor(0.01 / maf) so that sites of
/// different frequencies become comparable.
StandardizedCounts standardize(const VariantSite& site);

/// Two-sided normal-approximation p-value comparing standardized carrier
/// counts between groups; absent when y1+y2 < 5 (too little information).
std::optional<double> single_variant_p(long long y1_tilde, long long y2_tilde,
                                       int n1, int n2);

/// Greedy keep-first LD prune: drop any site whose pooled carrier vector has
/// squared Pearson correlation above the threshold with a retained site.
VariantBlock prune(const VariantBlock& block, double r2_threshold);

/// Right-continuous ECDF over the pooled per-site p-values of the genome.
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> values, std::size_t min_count = 1000);
  double operator()(double t) const;
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<double> values_;  // sorted
};

/// Per-site p-values of a block (already pruned), absents dropped.
std::vector<double> site_pvalues(const VariantBlock& block);

struct KsPriorResult {
  std::string gene_id;
  double p_prior = 1.0;
  int n_valid_sites = 0;
  bool fallback = false;  // true iff fewer than 5 valid sites
};

/// Informative prior probability for one gene: prune, test each site, then
/// one-sided KS of the site p-values against the genome-wide null.
KsPriorResult gene_prior(const VariantBlock& block, const EmpiricalCdf& null_cdf,
                         double r2_threshold);

}  // namespace rvbf

#endif
