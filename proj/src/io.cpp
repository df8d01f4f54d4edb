#include "rvbf/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace rvbf {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

[[noreturn]] void fail(const std::string& path, std::size_t line_no, const std::string& why) {
  throw InputError(path + ":" + std::to_string(line_no) + ": " + why);
}

int parse_int(const std::string& s, const std::string& path, std::size_t line_no,
              const char* field) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    fail(path, line_no, std::string("invalid integer in column '") + field + "': '" + s + "'");
  return value;
}

double parse_double(const std::string& s, const std::string& path, std::size_t line_no,
                    const char* field) {
  try {
    std::size_t pos = 0;
    const double value = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return value;
  } catch (const std::exception&) {
    fail(path, line_no, std::string("invalid number in column '") + field + "': '" + s + "'");
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file: " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open output file: " + path);
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

std::vector<GeneCounts> read_counts_tsv(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw InputError(path + ": empty file, header expected");
  ++line_no;
  strip_cr(line);
  if (line != "gene_id\tgroup\tindividual_id\tx\tn")
    fail(path, line_no, "unexpected header '" + line + "'");
  std::vector<GeneCounts> genes;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 5) fail(path, line_no, "expected 5 tab-separated columns");
    const std::string& gene_id = cols[0];
    if (gene_id.empty()) fail(path, line_no, "empty gene_id");
    if (genes.empty() || genes.back().gene_id != gene_id) {
      for (const auto& g : genes)
        if (g.gene_id == gene_id)
          fail(path, line_no, "gene '" + gene_id + "' rows are not contiguous");
      genes.push_back({gene_id, {}, {}});
    }
    const int x = parse_int(cols[3], path, line_no, "x");
    const int n = parse_int(cols[4], path, line_no, "n");
    if (x < 0 || n < 1 || x > n)
      fail(path, line_no,
           "gene '" + gene_id + "' individual '" + cols[2] + "': need 0 <= x <= n, n >= 1");
    if (cols[1] == "control") {
      genes.back().controls.push_back({x, n});
    } else if (cols[1] == "case") {
      genes.back().cases.push_back({x, n});
    } else {
      fail(path, line_no, "group must be 'control' or 'case', got '" + cols[1] + "'");
    }
  }
  for (const auto& g : genes) g.validate();
  return genes;
}

void write_counts_tsv(const std::string& path, const std::vector<GeneCounts>& genes) {
  std::ofstream out = open_output(path);
  out << "gene_id\tgroup\tindividual_id\tx\tn\n";
  for (const auto& g : genes) {
    for (std::size_t j = 0; j < g.controls.size(); ++j)
      out << g.gene_id << "\tcontrol\tctrl" << j + 1 << '\t' << g.controls[j].x << '\t'
          << g.controls[j].n << '\n';
    for (std::size_t j = 0; j < g.cases.size(); ++j)
      out << g.gene_id << "\tcase\tcase" << j + 1 << '\t' << g.cases[j].x << '\t'
          << g.cases[j].n << '\n';
  }
}

std::vector<VariantBlock> read_variants_tsv(const std::string& path, double maf_floor,
                                            VariantReadStats* stats) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw InputError(path + ": empty file, header expected");
  ++line_no;
  strip_cr(line);
  if (line != "gene_id\tsite_id\tmaf\tgroup\tindividual_id\tcarrier")
    fail(path, line_no, "unexpected header '" + line + "'");
  std::vector<VariantBlock> blocks;
  VariantReadStats local;
  std::string cur_site;
  bool dropping_site = false;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 6) fail(path, line_no, "expected 6 tab-separated columns");
    const std::string& gene_id = cols[0];
    const std::string& site_id = cols[1];
    if (gene_id.empty() || site_id.empty()) fail(path, line_no, "empty gene_id or site_id");
    if (blocks.empty() || blocks.back().gene_id != gene_id) {
      for (const auto& b : blocks)
        if (b.gene_id == gene_id)
          fail(path, line_no, "gene '" + gene_id + "' rows are not contiguous");
      blocks.push_back({gene_id, {}});
      cur_site.clear();
    }
    const double maf = parse_double(cols[2], path, line_no, "maf");
    VariantBlock& block = blocks.back();
    if (site_id != cur_site) {
      cur_site = site_id;
      ++local.sites_read;
      dropping_site = !(maf > maf_floor && maf <= 0.01);
      if (dropping_site) {
        ++local.sites_dropped_maf;
      } else {
        block.sites.push_back({site_id, maf, {}, {}});
      }
    }
    if (dropping_site) continue;
    const int carrier = parse_int(cols[5], path, line_no, "carrier");
    if (carrier != 0 && carrier != 1) fail(path, line_no, "carrier must be 0 or 1");
    if (cols[3] == "control") {
      block.sites.back().carriers_controls.push_back(static_cast<std::uint8_t>(carrier));
    } else if (cols[3] == "case") {
      block.sites.back().carriers_cases.push_back(static_cast<std::uint8_t>(carrier));
    } else {
      fail(path, line_no, "group must be 'control' or 'case', got '" + cols[3] + "'");
    }
  }
  for (const auto& b : blocks) b.validate();
  if (stats) *stats = local;
  return blocks;
}

void write_variants_tsv(const std::string& path, const std::vector<VariantBlock>& blocks) {
  std::ofstream out = open_output(path);
  out << "gene_id\tsite_id\tmaf\tgroup\tindividual_id\tcarrier\n";
  std::ostringstream maf_fmt;
  for (const auto& b : blocks) {
    for (const auto& s : b.sites) {
      maf_fmt.str("");
      maf_fmt.precision(17);
      maf_fmt << s.maf;
      const std::string maf = maf_fmt.str();
      for (std::size_t j = 0; j < s.carriers_controls.size(); ++j)
        out << b.gene_id << '\t' << s.site_id << '\t' << maf << "\tcontrol\tctrl" << j + 1
            << '\t' << int(s.carriers_controls[j]) << '\n';
      for (std::size_t j = 0; j < s.carriers_cases.size(); ++j)
        out << b.gene_id << '\t' << s.site_id << '\t' << maf << "\tcase\tcase" << j + 1
            << '\t' << int(s.carriers_cases[j]) << '\n';
    }
  }
}

void write_truth_tsv(const std::string& path, const std::vector<SimulatedGene>& genes) {
  std::ofstream out = open_output(path);
  out << "gene_id\tis_associated\tcausal_sites\n";
  for (const auto& g : genes) {
    out << g.counts.gene_id << '\t' << (g.associated ? 1 : 0) << '\t';
    if (g.causal_sites.empty()) {
      out << '.';
    } else {
      for (std::size_t i = 0; i < g.causal_sites.size(); ++i) {
        if (i) out << ',';
        out << g.block.sites[g.causal_sites[i]].site_id;
      }
    }
    out << '\n';
  }
}

}  // namespace rvbf
