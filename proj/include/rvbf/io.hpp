#ifndef RVBF_IO_HPP
#define RVBF_IO_HPP

#include <string>
#include <vector>

#include "rvbf/counts.hpp"
#include "rvbf/ks_prior.hpp"
#include "rvbf/simulate.hpp"

namespace rvbf {

/// Gene counts TSV: header `gene_id group individual_id x n` (tab-separated),
/// group in {control, case}. Rows are grouped by gene in file order.
std::vector<GeneCounts> read_counts_tsv(const std::string& path);
void write_counts_tsv(const std::string& path, const std::vector<GeneCounts>& genes);

struct VariantReadStats {
  int sites_read = 0;
  int sites_dropped_maf = 0;  // outside (maf_floor, 0.01]
};

/// Variant TSV: header `gene_id site_id maf group individual_id carrier`.
/// Sites with maf outside (maf_floor, 0.01] are dropped during parse.
std::vector<VariantBlock> read_variants_tsv(const std::string& path, double maf_floor,
                                            VariantReadStats* stats = nullptr);
void write_variants_tsv(const std::string& path, const std::vector<VariantBlock>& blocks);

/// Truth sidecar emitted by the simulator: gene_id, is_associated, causal_sites.
void write_truth_tsv(const std::string& path, const std::vector<SimulatedGene>& genes);

}  // namespace rvbf

#endif
