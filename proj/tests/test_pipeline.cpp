#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rvbf/errors.hpp"
#include "rvbf/io.hpp"
#include "rvbf/pipeline.hpp"
#include "rvbf/random.hpp"

using namespace rvbf;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("rvbf_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RVBF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return (rc >> 8) & 0xff;
}

// Small in-memory genome with controllable gene sizes; maf range chosen so
// most sites clear the informative-prior carrier minimum.
std::pair<std::vector<GeneCounts>, std::vector<VariantBlock>> make_genome(
    int n_genes, std::uint64_t seed, int n1 = 500, int n2 = 500) {
  RandomSource master(seed);
  std::vector<GeneCounts> counts;
  std::vector<VariantBlock> blocks;
  for (int i = 0; i < n_genes; ++i) {
    SimScenario sc;
    sc.n_sites = 20 + (i * 7) % 41;
    sc.n_controls = n1;
    sc.n_cases = n2;
    sc.maf_low = 0.004;
    sc.maf_high = 0.01;
    sc.seed = master.split(i + 1).seed();
    std::string id = std::to_string(i + 1);
    id.insert(0, 3 - std::min<std::size_t>(3, id.size()), '0');
    const SimulatedGene g = simulate_gene(sc, "g" + id);
    counts.push_back(g.counts);
    blocks.push_back(g.block);
  }
  return {counts, blocks};
}

}  // namespace

TEST_CASE("counts TSV round-trip") {
  const auto [counts, blocks] = make_genome(4, 31, 30, 25);
  const fs::path dir = temp_dir("counts_rt");
  write_counts_tsv((dir / "c.tsv").string(), counts);
  const std::vector<GeneCounts> back = read_counts_tsv((dir / "c.tsv").string());
  REQUIRE(back.size() == counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    CHECK(back[i].gene_id == counts[i].gene_id);
    REQUIRE(back[i].controls.size() == counts[i].controls.size());
    REQUIRE(back[i].cases.size() == counts[i].cases.size());
    for (std::size_t j = 0; j < counts[i].controls.size(); ++j) {
      CHECK(back[i].controls[j].x == counts[i].controls[j].x);
      CHECK(back[i].controls[j].n == counts[i].controls[j].n);
    }
    for (std::size_t j = 0; j < counts[i].cases.size(); ++j) {
      CHECK(back[i].cases[j].x == counts[i].cases[j].x);
      CHECK(back[i].cases[j].n == counts[i].cases[j].n);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("variants TSV round-trip") {
  const auto [counts, blocks] = make_genome(3, 32, 40, 40);
  const fs::path dir = temp_dir("variants_rt");
  write_variants_tsv((dir / "v.tsv").string(), blocks);
  VariantReadStats stats;
  const std::vector<VariantBlock> back =
      read_variants_tsv((dir / "v.tsv").string(), 0.001, &stats);
  REQUIRE(back.size() == blocks.size());
  int total_sites = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    CHECK(back[i].gene_id == blocks[i].gene_id);
    REQUIRE(back[i].sites.size() == blocks[i].sites.size());
    for (std::size_t s = 0; s < blocks[i].sites.size(); ++s) {
      CHECK(back[i].sites[s].site_id == blocks[i].sites[s].site_id);
      CHECK(back[i].sites[s].maf == blocks[i].sites[s].maf);  // 17-digit emit
      CHECK(back[i].sites[s].carriers_controls == blocks[i].sites[s].carriers_controls);
      CHECK(back[i].sites[s].carriers_cases == blocks[i].sites[s].carriers_cases);
      ++total_sites;
    }
  }
  CHECK(stats.sites_read == total_sites);
  CHECK(stats.sites_dropped_maf == 0);
  fs::remove_all(dir);
}

TEST_CASE("counts parser rejects malformed input with line numbers") {
  const fs::path dir = temp_dir("counts_bad");
  const std::string header = "gene_id\tgroup\tindividual_id\tx\tn\n";
  auto expect_input_error = [&](const std::string& body) {
    spit(dir / "bad.tsv", body);
    CHECK_THROWS_AS(read_counts_tsv((dir / "bad.tsv").string()), InputError);
  };
  expect_input_error("");                                    // no header
  expect_input_error("gene\tgroup\tid\tx\tn\n");             // wrong header
  expect_input_error(header + "g1\tcontrol\ti1\t2\n");       // 4 columns
  expect_input_error(header + "g1\tcontrol\ti1\ttwo\t10\n"); // bad integer
  expect_input_error(header + "g1\tcontrol\ti1\t5\t3\n");    // x > n
  expect_input_error(header + "g1\tcontrol\ti1\t1\t0\n");    // n < 1
  expect_input_error(header + "g1\tboth\ti1\t1\t10\n");      // bad group
  expect_input_error(header + "g1\tcontrol\ti1\t1\t10\n"
                              "g2\tcontrol\ti1\t1\t10\n"
                              "g2\tcase\ti1\t1\t10\n"
                              "g1\tcase\ti1\t1\t10\n");      // non-contiguous gene
  // a valid error message names the gene, the individual and the line
  spit(dir / "bad.tsv", header + "g1\tcontrol\tind7\t5\t3\n");
  try {
    read_counts_tsv((dir / "bad.tsv").string());
    FAIL("expected InputError");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":2:") != std::string::npos);
    CHECK(msg.find("g1") != std::string::npos);
    CHECK(msg.find("ind7") != std::string::npos);
  }
  // empty body after the header is a valid empty stream
  spit(dir / "empty.tsv", header);
  CHECK(read_counts_tsv((dir / "empty.tsv").string()).empty());
  CHECK_THROWS_AS(read_counts_tsv((dir / "missing.tsv").string()), InputError);
  fs::remove_all(dir);
}

TEST_CASE("variant parser applies the MAF window during parse") {
  const fs::path dir = temp_dir("variants_maf");
  const std::string header = "gene_id\tsite_id\tmaf\tgroup\tindividual_id\tcarrier\n";
  std::string body = header;
  auto add_site = [&](const std::string& site, const std::string& maf) {
    body += "g1\t" + site + "\t" + maf + "\tcontrol\ti1\t1\n";
    body += "g1\t" + site + "\t" + maf + "\tcontrol\ti2\t0\n";
    body += "g1\t" + site + "\t" + maf + "\tcase\ti1\t0\n";
    body += "g1\t" + site + "\t" + maf + "\tcase\ti2\t1\n";
  };
  add_site("keep", "0.005");
  add_site("too_common", "0.02");   // above the 1% ceiling
  add_site("too_rare", "0.0005");   // at or below the floor
  spit(dir / "v.tsv", body);
  VariantReadStats stats;
  const auto blocks = read_variants_tsv((dir / "v.tsv").string(), 0.001, &stats);
  REQUIRE(blocks.size() == 1);
  REQUIRE(blocks[0].sites.size() == 1);
  CHECK(blocks[0].sites[0].site_id == "keep");
  CHECK(stats.sites_read == 3);
  CHECK(stats.sites_dropped_maf == 2);
  // malformed carrier value
  spit(dir / "bad.tsv", header + "g1\ts1\t0.005\tcontrol\ti1\t2\n");
  CHECK_THROWS_AS(read_variants_tsv((dir / "bad.tsv").string(), 0.001), InputError);
  spit(dir / "bad.tsv", header + "g1\ts1\tabc\tcontrol\ti1\t1\n");
  CHECK_THROWS_AS(read_variants_tsv((dir / "bad.tsv").string(), 0.001), InputError);
  fs::remove_all(dir);
}

TEST_CASE("truncated inputs always raise a structured error") {
  const auto [counts, blocks] = make_genome(3, 33, 12, 12);
  const fs::path dir = temp_dir("fuzz");
  write_counts_tsv((dir / "c.tsv").string(), counts);
  write_variants_tsv((dir / "v.tsv").string(), blocks);
  const std::string counts_full = slurp(dir / "c.tsv");
  const std::string variants_full = slurp(dir / "v.tsv");
  int parsed = 0, rejected = 0;
  for (std::size_t len = 0; len < counts_full.size(); len += 7) {
    spit(dir / "c_cut.tsv", counts_full.substr(0, len));
    try {
      read_counts_tsv((dir / "c_cut.tsv").string());
      ++parsed;
    } catch (const InputError&) {
      ++rejected;
    }
  }
  CHECK(rejected > 0);  // most cuts land mid-record
  for (std::size_t len = 0; len < variants_full.size(); len += 101) {
    spit(dir / "v_cut.tsv", variants_full.substr(0, len));
    try {
      read_variants_tsv((dir / "v_cut.tsv").string(), 0.001);
      ++parsed;
    } catch (const InputError&) {
      ++rejected;
    }
  }
  CHECK(parsed + rejected > 0);
  fs::remove_all(dir);
}

TEST_CASE("run configuration validation") {
  RunConfig config;
  CHECK_NOTHROW(config.validate());
  RunConfig bad = config;
  bad.prior_kind = "flat";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = config;
  bad.gamma = 0.4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = config;
  bad.alpha0 = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = config;
  bad.min_sites_per_gene = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = config;
  bad.maf_floor = 0.01;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = config;
  bad.threads = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = config;
  bad.r2_threshold = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  // file-based entry points insist on their paths
  CHECK_THROWS_AS(run_genome(config), ConfigError);
}

TEST_CASE("genome analysis") {
  const auto [counts, blocks] = make_genome(120, 34);
  RunConfig config;
  config.informative = true;
  config.threads = 1;

  const RunResult inf1 = run_genome_data(counts, blocks, config);
  config.threads = 4;
  const RunResult inf4 = run_genome_data(counts, blocks, config);
  RunConfig noninf_config = config;
  noninf_config.informative = false;
  const RunResult noninf = run_genome_data(counts, blocks, noninf_config);

  SUBCASE("every input gene appears exactly once, analyzed genes sorted") {
    CHECK(inf1.summary.n_genes == 120);
    CHECK(inf1.summary.n_analyzed + inf1.summary.n_filtered == 120);
    std::map<std::string, int> seen;
    for (const auto& g : inf1.genes) ++seen[g.gene_id];
    CHECK(seen.size() == 120);
    for (const auto& [id, n] : seen) CHECK(n == 1);
    for (std::size_t i = 1; i < inf1.genes.size(); ++i) {
      if (!inf1.genes[i].analyzed) continue;
      REQUIRE(inf1.genes[i - 1].analyzed);
      CHECK(inf1.genes[i - 1].bf.two_log_bf >= inf1.genes[i].bf.two_log_bf);
    }
  }
  SUBCASE("thread count never changes the numbers") {
    REQUIRE(inf1.genes.size() == inf4.genes.size());
    for (std::size_t i = 0; i < inf1.genes.size(); ++i) {
      CHECK(inf1.genes[i].gene_id == inf4.genes[i].gene_id);
      CHECK(inf1.genes[i].bf.two_log_bf == inf4.genes[i].bf.two_log_bf);
      CHECK(inf1.genes[i].bf.p_value == inf4.genes[i].bf.p_value);
      CHECK(inf1.genes[i].p_prior == inf4.genes[i].p_prior);
      CHECK(inf1.genes[i].v == inf4.genes[i].v);
      CHECK(inf1.genes[i].discovered == inf4.genes[i].discovered);
    }
    CHECK(inf1.summary.pi0_hat == inf4.summary.pi0_hat);
    CHECK(inf1.summary.alpha_hat == inf4.summary.alpha_hat);
    CHECK(inf1.summary.threshold == inf4.summary.threshold);
  }
  SUBCASE("informative mode only adds the prior layer") {
    std::map<std::string, const GeneOutcome*> by_id;
    for (const auto& g : noninf.genes) by_id[g.gene_id] = &g;
    int df3 = 0;
    for (const auto& g : inf1.genes) {
      const GeneOutcome* base = by_id.at(g.gene_id);
      CHECK(g.analyzed == base->analyzed);
      if (!g.analyzed) continue;
      CHECK(base->bf.df == 1);
      CHECK(base->p_prior == 1.0);
      CHECK(g.bf.eta_hat == base->bf.eta_hat);
      CHECK(g.bf.eta1_hat == base->bf.eta1_hat);
      CHECK(g.bf.eta2_hat == base->bf.eta2_hat);
      CHECK(g.bf.k_tilde == base->bf.k_tilde);
      CHECK(g.bf.two_log_bf_noninf == base->bf.two_log_bf);
      if (g.p_prior < 1.0) {
        CHECK(g.bf.df == 3);
        ++df3;
      }
    }
    CHECK(df3 > 100);  // nearly every gene has enough sites for a real prior
    CHECK(inf1.summary.alpha_inf_hat.has_value());
    CHECK(inf1.summary.p0.has_value());
    CHECK_FALSE(noninf.summary.alpha_inf_hat.has_value());
  }
  SUBCASE("null genome stays quiet") {
    CHECK(inf1.summary.pi0_hat > 0.9);
    CHECK(noninf.summary.pi0_hat > 0.9);
    CHECK(noninf.summary.n_discoveries == 0);
  }
  SUBCASE("size filter produces a reported skip row") {
    std::vector<GeneCounts> with_small = counts;
    GeneCounts tiny;
    tiny.gene_id = "tiny";
    for (int i = 0; i < 10; ++i) {
      tiny.controls.push_back({0, 5});
      tiny.cases.push_back({1, 5});
    }
    with_small.push_back(tiny);
    const RunResult res = run_genome_data(with_small, blocks, noninf_config);
    CHECK(res.summary.n_filtered == 1);
    const GeneOutcome& last = res.genes.back();
    CHECK(last.gene_id == "tiny");
    CHECK_FALSE(last.analyzed);
    CHECK(last.skip_reason == "filtered_min_sites");
  }
  SUBCASE("informative mode refuses a too-sparse p-value pool") {
    std::vector<GeneCounts> few(counts.begin(), counts.begin() + 3);
    std::vector<VariantBlock> few_blocks(blocks.begin(), blocks.begin() + 3);
    CHECK_THROWS_AS(run_genome_data(few, few_blocks, config), ConfigError);
  }
}

TEST_CASE("file-based run is byte-stable across thread counts") {
  const auto [counts, blocks] = make_genome(110, 35);
  const fs::path dir = temp_dir("run_files");
  write_counts_tsv((dir / "counts.tsv").string(), counts);
  write_variants_tsv((dir / "variants.tsv").string(), blocks);
  RunConfig config;
  config.informative = true;
  config.counts_path = (dir / "counts.tsv").string();
  config.variants_path = (dir / "variants.tsv").string();
  config.output_dir = (dir / "out1").string();
  config.threads = 1;
  run_genome(config);
  config.output_dir = (dir / "out8").string();
  config.threads = 8;
  run_genome(config);
  const std::string r1 = slurp(dir / "out1" / "results.tsv");
  const std::string r8 = slurp(dir / "out8" / "results.tsv");
  CHECK(r1 == r8);
  CHECK(r1.rfind("gene_id\tn_sites\ttwo_log_bf\tdf\tp_value\tp_prior\t", 0) == 0);
  CHECK(fs::exists(dir / "out1" / "manifest.json"));
  fs::remove_all(dir);
}

TEST_CASE("laplace validation helper") {
  const auto rows = validate_laplace(5, 77, 20000);
  REQUIRE(static_cast<int>(rows.size()) == 5);
  int within = 0;
  for (const auto& r : rows) {
    CHECK(r.mc_se > 0.0);
    if (std::abs(r.laplace - r.mc) <= 2.0 * r.mc_se) ++within;
  }
  CHECK(within >= 4);
  CHECK_THROWS_AS(validate_laplace(2, 77, 20000), ConfigError);
}

TEST_CASE("command line interface") {
  const fs::path dir = temp_dir("cli");
  SUBCASE("simulate then run, exit 0") {
    REQUIRE(run_cli("simulate --genes 20 --controls 60 --cases 60 --seed 9 --out-dir " +
                    (dir / "sim").string()) == 0);
    CHECK(fs::exists(dir / "sim" / "counts.tsv"));
    CHECK(fs::exists(dir / "sim" / "variants.tsv"));
    CHECK(fs::exists(dir / "sim" / "truth.tsv"));
    CHECK(run_cli("run --counts " + (dir / "sim" / "counts.tsv").string() + " --out " +
                  (dir / "run").string()) == 0);
    CHECK(fs::exists(dir / "run" / "results.tsv"));
    CHECK(fs::exists(dir / "run" / "manifest.json"));
  }
  SUBCASE("configuration errors exit 2") {
    CHECK(run_cli("") == 2);                    // missing subcommand
    CHECK(run_cli("run --counts x.tsv") == 2);  // missing required --out
    CHECK(run_cli("nonsense") == 2);
    spit(dir / "c.tsv", "gene_id\tgroup\tindividual_id\tx\tn\n");
    CHECK(run_cli("run --counts " + (dir / "c.tsv").string() + " --out " +
                  (dir / "o").string() + " --prior flat") == 2);
    CHECK(run_cli("run --counts " + (dir / "c.tsv").string() + " --out " +
                  (dir / "o").string() + " --gamma 0.3") == 2);
  }
  SUBCASE("input errors exit 3") {
    CHECK(run_cli("run --counts " + (dir / "absent.tsv").string() + " --out " +
                  (dir / "o").string()) == 3);
    spit(dir / "broken.tsv", "gene_id\tgroup\tindividual_id\tx\tn\ng1\tcontrol\ti1\t9\t3\n");
    CHECK(run_cli("run --counts " + (dir / "broken.tsv").string() + " --out " +
                  (dir / "o").string()) == 3);
  }
  SUBCASE("validate-laplace subcommand") {
    CHECK(run_cli("validate-laplace --genes 3 --draws 5000 --seed 4") == 0);
  }
  fs::remove_all(dir);
}
