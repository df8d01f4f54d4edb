#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "rvbf/io.hpp"
#include "rvbf/pipeline.hpp"

namespace {

int do_simulate(const rvbf::SimScenario& scenario, int n_genes, int n_associated,
                std::uint64_t seed, const std::string& out_dir) {
  const auto genes = rvbf::simulate_genome(n_genes, n_associated, scenario, seed);
  std::filesystem::create_directories(out_dir);
  std::vector<rvbf::GeneCounts> counts;
  std::vector<rvbf::VariantBlock> blocks;
  counts.reserve(genes.size());
  blocks.reserve(genes.size());
  for (const auto& g : genes) {
    counts.push_back(g.counts);
    blocks.push_back(g.block);
  }
  rvbf::write_counts_tsv(out_dir + "/counts.tsv", counts);
  rvbf::write_variants_tsv(out_dir + "/variants.tsv", blocks);
  rvbf::write_truth_tsv(out_dir + "/truth.tsv", genes);
  std::cout << "simulated " << n_genes << " genes (" << n_associated
            << " associated) into " << out_dir << "\n";
  return 0;
}

int do_run(const rvbf::RunConfig& config) {
  const rvbf::RunResult result = rvbf::run_genome(config);
  const auto& s = result.summary;
  std::cout << "genes: " << s.n_genes << " analyzed: " << s.n_analyzed
            << " flagged: " << s.n_flagged << " filtered: " << s.n_filtered << "\n"
            << "pi0_hat: " << s.pi0_hat << " alpha_hat: " << s.alpha_hat;
  if (s.alpha_inf_hat) std::cout << " alpha_inf_hat: " << *s.alpha_inf_hat;
  if (s.p0) std::cout << " p0: " << *s.p0;
  std::cout << "\nthreshold: " << s.threshold << " discoveries: " << s.n_discoveries
            << " attained_bfdr: " << s.attained_bfdr << "\n"
            << "results written to " << config.output_dir << "\n";
  return 0;
}

int do_validate_laplace(int n_genes, std::uint64_t seed, int draws) {
  const auto rows = rvbf::validate_laplace(n_genes, seed, draws);
  double max_gap = 0.0;
  std::cout << "gene_id\tlaplace\tmonte_carlo\tmc_se\tgap\n";
  for (const auto& r : rows) {
    const double gap = std::abs(r.laplace - r.mc);
    max_gap = std::max(max_gap, gap);
    std::cout << r.gene_id << '\t' << r.laplace << '\t' << r.mc << '\t' << r.mc_se
              << '\t' << gap << '\n';
  }
  std::cout << "max |laplace - mc|: " << max_gap << "\n";
  return 0;
}

int do_diagnostics(int n_genes, const rvbf::SimScenario& scenario, std::uint64_t seed,
                   int threads) {
  const auto rep = rvbf::run_diagnostics(n_genes, scenario, seed, threads);
  std::cout << "gene\teta_hat\tmean_rate\ticc\tmean_carrier_r2\tlog_kstar\tlog_kstar_eta\n";
  for (std::size_t i = 0; i < rep.eta_hat.size(); ++i)
    std::cout << i + 1 << '\t' << rep.eta_hat[i] << '\t' << rep.mean_rate[i] << '\t'
              << rep.icc[i] << '\t' << rep.mean_carrier_r2[i] << '\t' << rep.log_kstar[i]
              << '\t' << rep.log_kstar_eta[i] << '\n';
  std::cout << "\nstratum\tn_genes\tkendall_tau\n";
  for (const auto& t : rep.taus)
    std::cout << "[" << t.size_lo << "," << t.size_hi << ")\t" << t.n_genes << '\t'
              << t.tau << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gene-based rare-variant association testing via Bayes factors"};
  app.require_subcommand(1);

  rvbf::SimScenario scenario;
  int n_genes = 2000, n_associated = 0;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int draws = 200000;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic case-control genome");
  sim->add_option("--genes", n_genes, "Number of genes")->check(CLI::PositiveNumber);
  sim->add_option("--associated", n_associated, "Number of associated genes");
  sim->add_option("--controls", scenario.n_controls, "Controls per gene");
  sim->add_option("--cases", scenario.n_cases, "Cases per gene");
  sim->add_option("--maf-low", scenario.maf_low, "Lower MAF bound");
  sim->add_option("--maf-high", scenario.maf_high, "Upper MAF bound");
  sim->add_option("--k-overdispersion", scenario.k_overdispersion,
                  "Rate-multiplier precision");
  sim->add_option("--protective-fraction", scenario.protective_fraction,
                  "Protective share of causal variants");
  sim->add_option("--effect-scale", scenario.effect_scale, "Effect-size scale");
  sim->add_option("--seed", seed, "RNG seed");
  sim->add_option("--out-dir", out_dir, "Output directory");

  rvbf::RunConfig config;
  auto* run = app.add_subcommand("run", "Analyze a genome of counts (and variants)");
  run->add_option("--counts", config.counts_path, "Gene counts TSV")->required();
  run->add_option("--variants", config.variants_path, "Variant TSV");
  run->add_option("--out", config.output_dir, "Output directory")->required();
  run->add_option("--prior", config.prior_kind, "beta | mixture | mixture_joint");
  run->add_flag("--informative", config.informative, "Use the KS informative prior");
  run->add_option("--r2-threshold", config.r2_threshold, "LD pruning threshold");
  run->add_option("--gamma", config.gamma, "pi0 estimation quantile");
  run->add_option("--alpha0", config.alpha0, "Nominal BFDR level");
  run->add_option("--min-sites", config.min_sites_per_gene, "Minimum sites per gene");
  run->add_option("--maf-floor", config.maf_floor, "Lowest admissible MAF");
  run->add_option("--threads", config.threads, "Worker threads");
  run->add_option("--seed", config.seed, "RNG seed (recorded in the manifest)");

  auto* val = app.add_subcommand("validate-laplace",
                                 "Compare Laplace and Monte Carlo marginals");
  int val_genes = 20;
  val->add_option("--genes", val_genes, "Number of sampled genes")->check(CLI::PositiveNumber);
  val->add_option("--draws", draws, "Monte Carlo draws");
  val->add_option("--seed", seed, "RNG seed");

  auto* diag = app.add_subcommand("diagnostics", "Model-fit diagnostics on simulated data");
  int diag_genes = 200, diag_threads = 1;
  diag->add_option("--genes", diag_genes, "Number of simulated genes")
      ->check(CLI::PositiveNumber);
  diag->add_option("--controls", scenario.n_controls, "Controls per gene");
  diag->add_option("--cases", scenario.n_cases, "Cases per gene");
  diag->add_option("--k-overdispersion", scenario.k_overdispersion,
                   "Rate-multiplier precision");
  diag->add_option("--threads", diag_threads, "Worker threads");
  diag->add_option("--seed", seed, "RNG seed");

  try {
    app.parse(argc, argv);
    if (sim->parsed()) return do_simulate(scenario, n_genes, n_associated, seed, out_dir);
    if (run->parsed()) return do_run(config);
    if (val->parsed()) return do_validate_laplace(val_genes, seed, draws);
    if (diag->parsed()) return do_diagnostics(diag_genes, scenario, seed, diag_threads);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const rvbf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const rvbf::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
