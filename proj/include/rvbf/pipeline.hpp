#ifndef RVBF_PIPELINE_HPP
#define RVBF_PIPELINE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rvbf/bf.hpp"
#include "rvbf/bfdr.hpp"
#include "rvbf/counts.hpp"
#include "rvbf/ks_prior.hpp"
#include "rvbf/simulate.hpp"

namespace rvbf {

struct RunConfig {
  std::string prior_kind = "beta";  // beta | mixture | mixture_joint
  bool informative = false;
  double r2_threshold = 0.99;
  double gamma = 0.999;
  double alpha0 = 0.05;
  int min_sites_per_gene = 20;
  double maf_floor = 0.001;
  int threads = 1;
  std::uint64_t seed = 0;
  std::string counts_path;
  std::string variants_path;  // required when informative
  std::string output_dir;

  void validate() const;  // throws ConfigError
};

struct GeneOutcome {
  std::string gene_id;
  int n_sites = 0;
  bool analyzed = false;
  std::string skip_reason;  // set when analyzed = false
  BfResult bf;
  double p_prior = 1.0;
  bool prior_fallback = false;
  double v = 0.0;
  bool discovered = false;
};

struct RunSummary {
  int n_genes = 0;
  int n_analyzed = 0;
  int n_flagged = 0;
  int n_filtered = 0;
  double pi0_hat = 1.0;
  bool pi0_implausible = false;
  double alpha_hat = kAlphaMax;
  std::optional<double> pi0_inf_hat;
  std::optional<double> alpha_inf_hat;
  std::optional<double> p0;
  double threshold = 1.0;
  double attained_bfdr = 0.0;
  int n_discoveries = 0;
};

struct RunResult {
  std::vector<GeneOutcome> genes;  // descending two_log_bf, ties by gene_id; skipped genes last
  RunSummary summary;
};

/// Two-pass genome analysis on in-memory data: pass 1 pools per-site p-values
/// into the empirical null (informative mode), pass 2 computes the per-gene
/// prior, Bayes factor and posterior, then applies the BFDR threshold.
/// Per-gene numerical failures become flagged rows, never aborts.
RunResult run_genome_data(const std::vector<GeneCounts>& genes,
                          const std::vector<VariantBlock>& blocks, const RunConfig& config);

/// File-based wrapper: reads the TSV inputs, runs the analysis, writes
/// results.tsv and manifest.json into config.output_dir.
RunResult run_genome(const RunConfig& config);

void write_results_tsv(const std::string& path, const RunResult& result);
void write_manifest_json(const std::string& path, const RunConfig& config,
                         const RunResult& result);

struct LaplaceCheckRow {
  std::string gene_id;
  double laplace = 0.0;
  double mc = 0.0;
  double mc_se = 0.0;
};

/// Laplace-vs-Monte-Carlo comparison on freshly simulated small genes.
std::vector<LaplaceCheckRow> validate_laplace(int n_genes, std::uint64_t seed,
                                              int draws = 200000);

struct StratumTau {
  int size_lo = 0;
  int size_hi = 0;
  int n_genes = 0;
  double tau = 0.0;  // Kendall tau between the two BF components
};

struct DiagnosticsReport {
  std::vector<double> eta_hat;     // per gene, paired with mean_rate
  std::vector<double> mean_rate;
  std::vector<double> icc;         // per gene, paired with mean_carrier_r2
  std::vector<double> mean_carrier_r2;
  std::vector<double> log_kstar;
  std::vector<double> log_kstar_eta;
  std::vector<StratumTau> taus;
};

/// Model-fit diagnostics over a simulated null genome.
DiagnosticsReport run_diagnostics(int n_genes, const SimScenario& scenario,
                                  std::uint64_t seed, int threads = 1);

}  // namespace rvbf

#endif
