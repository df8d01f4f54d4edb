#include "rvbf/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "rvbf/random.hpp"

namespace rvbf {

namespace {

constexpr double kOrLow = 2.23;
constexpr double kOrHigh = 4.25;
constexpr double kBaselineLogOdds = -2.1972245773362196;  // logit(0.1)

double expit(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

void SimScenario::validate() const {
  if (n_sites < 1) throw ConfigError("scenario: n_sites must be positive");
  if (n_controls < 1 || n_cases < 1) throw ConfigError("scenario: group sizes must be positive");
  if (!(maf_low > 0.0 && maf_low < maf_high && maf_high <= 0.01))
    throw ConfigError("scenario: need 0 < maf_low < maf_high <= 0.01");
  if (!(k_overdispersion > 0.0)) throw ConfigError("scenario: k_overdispersion must be positive");
  if (!(causal_fraction >= 0.0 && causal_fraction <= 1.0))
    throw ConfigError("scenario: causal_fraction must lie in [0,1]");
  if (!(protective_fraction >= 0.0 && protective_fraction <= 1.0))
    throw ConfigError("scenario: protective_fraction must lie in [0,1]");
  if (!(effect_scale > 0.0)) throw ConfigError("scenario: effect_scale must be positive");
}

SimulatedGene simulate_gene(const SimScenario& scenario, const std::string& gene_id) {
  scenario.validate();
  RandomSource rng(scenario.seed);
  const int n_sites = scenario.n_sites;

  std::vector<double> mafs(n_sites);
  const double log_lo = std::log(scenario.maf_low);
  const double log_hi = std::log(scenario.maf_high);
  double eta_bar = 0.0;
  for (double& m : mafs) {
    m = std::exp(log_lo + rng.uniform() * (log_hi - log_lo));
    eta_bar += m;
  }
  eta_bar /= n_sites;

  const int n_causal = static_cast<int>(std::lround(scenario.causal_fraction * n_sites));
  const int n_protective =
      static_cast<int>(std::lround(scenario.protective_fraction * n_causal));
  std::vector<double> beta(n_sites, 0.0);
  SimulatedGene out;
  out.associated = n_causal > 0;
  for (int v = 0; v < n_causal; ++v) {
    const double odds = std::clamp(scenario.effect_scale / std::sqrt(mafs[v]), kOrLow, kOrHigh);
    beta[v] = (v < n_protective ? -1.0 : 1.0) * std::log(odds);
    out.causal_sites.push_back(v);
  }

  const int n1 = scenario.n_controls;
  const int n2 = scenario.n_cases;
  // carriers[v] spans controls first, then cases.
  std::vector<std::vector<std::uint8_t>> carriers(n_sites);
  for (auto& c : carriers) c.resize(n1 + n2, 0);
  std::vector<int> x_controls, x_cases;
  x_controls.reserve(n1);
  x_cases.reserve(n2);

  int filled1 = 0, filled2 = 0;
  const long long max_attempts = 2000LL * (n1 + n2) + 10000;
  long long attempts = 0;
  std::vector<std::uint8_t> draw(n_sites);
  while (filled1 < n1 || filled2 < n2) {
    if (++attempts > max_attempts)
      throw NumericalFailure("simulate_gene: could not fill case/control quotas");
    const double mult = rng.beta_mean_precision(eta_bar, scenario.k_overdispersion) / eta_bar;
    // Decide the phenotype from the causal sites alone; non-causal carriers
    // are only drawn for individuals that are kept.
    double log_odds = kBaselineLogOdds;
    for (int v = 0; v < n_causal; ++v) {
      draw[v] = rng.uniform() < std::min(1.0, mafs[v] * mult) ? 1 : 0;
      log_odds += beta[v] * draw[v];
    }
    const bool is_case = n_causal > 0 ? rng.uniform() < expit(log_odds) : false;
    int slot;
    if (n_causal == 0) {
      // Null gene: phenotype is independent of genotype, fill in order.
      slot = filled1 < n1 ? 0 : 1;
    } else if (is_case) {
      if (filled2 >= n2) continue;
      slot = 1;
    } else {
      if (filled1 >= n1) continue;
      slot = 0;
    }
    for (int v = n_causal; v < n_sites; ++v)
      draw[v] = rng.uniform() < std::min(1.0, mafs[v] * mult) ? 1 : 0;
    int x = 0;
    const int col = slot == 0 ? filled1 : n1 + filled2;
    for (int v = 0; v < n_sites; ++v) {
      carriers[v][col] = draw[v];
      x += draw[v];
    }
    if (slot == 0) {
      x_controls.push_back(x);
      ++filled1;
    } else {
      x_cases.push_back(x);
      ++filled2;
    }
  }

  out.counts.gene_id = gene_id;
  for (int x : x_controls) out.counts.controls.push_back({x, n_sites});
  for (int x : x_cases) out.counts.cases.push_back({x, n_sites});

  out.block.gene_id = gene_id;
  out.block.sites.resize(n_sites);
  for (int v = 0; v < n_sites; ++v) {
    VariantSite& s = out.block.sites[v];
    s.site_id = gene_id + "_s" + std::to_string(v + 1);
    s.maf = mafs[v];
    s.carriers_controls.assign(carriers[v].begin(), carriers[v].begin() + n1);
    s.carriers_cases.assign(carriers[v].begin() + n1, carriers[v].end());
  }
  return out;
}

std::vector<SimulatedGene> simulate_genome(int n_genes, int n_associated,
                                           const SimScenario& defaults,
                                           std::uint64_t seed) {
  if (n_genes < 1) throw ConfigError("simulate_genome: n_genes must be positive");
  if (n_associated < 0 || n_associated > n_genes)
    throw ConfigError("simulate_genome: need 0 <= n_associated <= n_genes");
  RandomSource master(seed);
  const int width = static_cast<int>(std::to_string(n_genes).size());
  std::vector<SimulatedGene> out;
  out.reserve(n_genes);
  for (int i = 0; i < n_genes; ++i) {
    const double u = master.uniform();
    int lo, hi;
    double causal;
    if (u < 0.46) {
      lo = 20; hi = 50; causal = 0.5;
    } else if (u < 0.82) {
      lo = 50; hi = 100; causal = 0.4;
    } else if (u < 0.99) {
      lo = 100; hi = 500; causal = 0.3;
    } else {
      lo = 500; hi = 1000; causal = 0.2;
    }
    SimScenario sc = defaults;
    sc.n_sites = lo + static_cast<int>(master.uniform() * (hi - lo));
    sc.causal_fraction = i < n_associated ? causal : 0.0;
    sc.seed = master.split(static_cast<std::uint64_t>(i) + 1).seed();
    std::string id = std::to_string(i + 1);
    id.insert(0, std::max<std::size_t>(0, width - id.size()), '0');
    out.push_back(simulate_gene(sc, "g" + id));
  }
  return out;
}

}  // namespace rvbf
