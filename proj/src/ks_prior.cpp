#include "rvbf/ks_prior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rvbf/special.hpp"

namespace rvbf {

void VariantBlock::validate() const {
  if (gene_id.empty()) throw InputError("variant block: empty gene_id");
  std::size_t n1 = 0, n2 = 0;
  bool first = true;
  for (const auto& s : sites) {
    if (!(s.maf > 0.0 && s.maf <= 0.01))
      throw InputError("gene '" + gene_id + "' site '" + s.site_id + "': maf must lie in (0, 0.01]");
    if (first) {
      n1 = s.carriers_controls.size();
      n2 = s.carriers_cases.size();
      first = false;
    } else if (s.carriers_controls.size() != n1 || s.carriers_cases.size() != n2) {
      throw InputError("gene '" + gene_id + "': inconsistent carrier vector lengths");
    }
    for (const auto* v : {&s.carriers_controls, &s.carriers_cases})
      for (auto c : *v)
        if (c > 1) throw InputError("gene '" + gene_id + "': carrier values must be 0 or 1");
  }
}

StandardizedCounts standardize(const VariantSite& site) {
  if (!(site.maf > 0.0 && site.maf <= 0.01))
    throw std::domain_error("standardize: maf must lie in (0, 0.01]");
  StandardizedCounts out;
  out.c_v = static_cast<long long>(std::floor(0.01 / site.maf));
  const long long y1 = std::accumulate(site.carriers_controls.begin(),
                                       site.carriers_controls.end(), 0LL);
  const long long y2 =
      std::accumulate(site.carriers_cases.begin(), site.carriers_cases.end(), 0LL);
  out.y1_tilde = y1 * out.c_v;
  out.y2_tilde = y2 * out.c_v;
  return out;
}

std::optional<double> single_variant_p(long long y1_tilde, long long y2_tilde,
                                       int n1, int n2) {
  if (n1 < 1 || n2 < 1) throw std::domain_error("single_variant_p: group sizes must be positive");
  if (y1_tilde < 0 || y2_tilde < 0)
    throw std::domain_error("single_variant_p: counts must be non-negative");
  if (y1_tilde + y2_tilde < 5) return std::nullopt;
  const double r = static_cast<double>(n2) / static_cast<double>(n1);
  const double y1 = static_cast<double>(y1_tilde);
  const double y2 = static_cast<double>(y2_tilde);
  const double z = (r * y1 - y2) / std::sqrt(r * r * y1 + y2);
  return 2.0 * normal_sf(std::abs(z));
}

VariantBlock prune(const VariantBlock& block, double r2_threshold) {
  if (!(r2_threshold > 0.0 && r2_threshold <= 1.0))
    throw std::domain_error("prune: r2_threshold must lie in (0,1]");
  VariantBlock out;
  out.gene_id = block.gene_id;
  std::vector<std::vector<std::uint8_t>> kept_pooled;
  for (const auto& s : block.sites) {
    std::vector<std::uint8_t> pooled = s.carriers_controls;
    pooled.insert(pooled.end(), s.carriers_cases.begin(), s.carriers_cases.end());
    bool correlated = false;
    for (const auto& kept : kept_pooled) {
      if (pearson_r2(std::span<const std::uint8_t>(kept),
                     std::span<const std::uint8_t>(pooled)) > r2_threshold) {
        correlated = true;
        break;
      }
    }
    if (!correlated) {
      out.sites.push_back(s);
      kept_pooled.push_back(std::move(pooled));
    }
  }
  return out;
}

EmpiricalCdf::EmpiricalCdf(std::vector<double> values, std::size_t min_count)
    : values_(std::move(values)) {
  if (values_.size() < min_count)
    throw ConfigError("empirical null needs at least " + std::to_string(min_count) +
                      " pooled p-values; got " + std::to_string(values_.size()));
  for (double v : values_)
    if (!(v >= 0.0 && v <= 1.0))
      throw std::domain_error("EmpiricalCdf: values must lie in [0,1]");
  std::sort(values_.begin(), values_.end());
}

double EmpiricalCdf::operator()(double t) const {
  const auto it = std::upper_bound(values_.begin(), values_.end(), t);
  return static_cast<double>(it - values_.begin()) / static_cast<double>(values_.size());
}

std::vector<double> site_pvalues(const VariantBlock& block) {
  std::vector<double> out;
  out.reserve(block.sites.size());
  for (const auto& s : block.sites) {
    const StandardizedCounts sc = standardize(s);
    const auto p = single_variant_p(sc.y1_tilde, sc.y2_tilde,
                                    static_cast<int>(s.carriers_controls.size()),
                                    static_cast<int>(s.carriers_cases.size()));
    if (p) out.push_back(*p);
  }
  return out;
}

KsPriorResult gene_prior(const VariantBlock& block, const EmpiricalCdf& null_cdf,
                         double r2_threshold) {
  KsPriorResult res;
  res.gene_id = block.gene_id;
  const VariantBlock pruned = prune(block, r2_threshold);
  const std::vector<double> pvals = site_pvalues(pruned);
  res.n_valid_sites = static_cast<int>(pvals.size());
  if (res.n_valid_sites < 5) {
    res.p_prior = 1.0;
    res.fallback = true;
    return res;
  }
  const double p = ks_one_sided(pvals, [&](double t) { return null_cdf(t); });
  res.p_prior = std::clamp(p, 1e-300, 1.0);
  return res;
}

}  // namespace rvbf
