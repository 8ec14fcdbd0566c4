#pragma once

// Paired unibit / multibit evaluation over binth and group-binth sweeps.

#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dtree.hpp"
#include "ebmap.hpp"
#include "mbtrie.hpp"
#include "rlopt.hpp"

namespace mbtc {

enum class Builder { greedy, rl };

inline Builder parse_builder(const std::string& s) {
  if (s == "greedy") return Builder::greedy;
  if (s == "rl") return Builder::rl;
  throw Error("unknown builder '" + s + "'");
}

inline const char* builder_name(Builder b) { return b == Builder::greedy ? "greedy" : "rl"; }

struct BenchResult {
  std::string ruleset;
  std::string builder;
  int binth = 0;
  int group_binth = 0;
  double bytes_per_rule_unibit = 0;
  double bytes_per_rule_multibit = 0;
  int worst_unibit = 0;
  int worst_multibit = 0;
  double avg_unibit = 0;  // leaf-averaged accesses
  double avg_multibit = 0;
  double trace_avg_unibit = 0;  // mean accesses over the trace
  double trace_avg_multibit = 0;
  int trace_worst_unibit = 0;
  int trace_worst_multibit = 0;
  double agreement = 0;
  std::size_t nodes_unibit = 0;
  std::size_t nodes_multibit = 0;
  std::size_t spliced_nodes = 0;
  std::size_t table_entries = 0;  // lookup-table entries only
  std::size_t max_table_bits = 0;
  double build_seconds = 0;  // reported separately; not part of the CSV

  double worst_improvement() const {
    return worst_unibit ? static_cast<double>(worst_unibit - worst_multibit) / worst_unibit : 0.0;
  }
  double avg_improvement() const { return avg_unibit > 0 ? (avg_unibit - avg_multibit) / avg_unibit : 0.0; }
  double memory_improvement() const {
    return bytes_per_rule_unibit > 0 ? (bytes_per_rule_unibit - bytes_per_rule_multibit) / bytes_per_rule_unibit : 0.0;
  }
};

struct BenchConfig {
  std::string ruleset_name = "ruleset";
  Builder builder = Builder::greedy;
  std::vector<int> binths{16};
  std::vector<int> group_binths{40};
  int max_depth = 24;
  TrainConfig train;  // used by the rl builder; binth and max_depth are overridden
  MemoryModel memory;
};

class OracleMismatch : public Error {
 public:
  OracleMismatch(const PacketHeader& h, const std::string& engine, std::optional<int> got, std::optional<int> want)
      : Error(engine + " disagrees with oracle on header " + format_header(h, ',') + ": got " +
              (got ? std::to_string(*got) : "none") + ", expected " + (want ? std::to_string(*want) : "none")),
        header(h) {}
  PacketHeader header;
};

inline Tree build_tree(const std::shared_ptr<const Ruleset>& rs, Builder builder, int binth, int max_depth,
                       TrainConfig train_cfg = {}) {
  if (builder == Builder::greedy) return build_greedy(rs, binth, max_depth);
  train_cfg.binth = binth;
  train_cfg.max_depth = max_depth;
  return train(rs, train_cfg).tree;
}

// Builds every configuration, runs the whole trace through both engines, and
// throws OracleMismatch on the first disagreement.
inline std::vector<BenchResult> run_bench(const std::shared_ptr<const Ruleset>& rs, const BenchConfig& cfg,
                                          const std::vector<PacketHeader>& trace) {
  if (cfg.binths.empty() || cfg.group_binths.empty()) throw Error("binth and group_binth sweeps must be non-empty");
  if (trace.empty()) throw Error("trace must be non-empty");
  cfg.memory.validate();
  std::vector<std::optional<int>> expected;
  expected.reserve(trace.size());
  for (const auto& h : trace) expected.push_back(oracle_classify(*rs, h));

  std::vector<BenchResult> out;
  for (int binth : cfg.binths) {
    const auto t0 = std::chrono::steady_clock::now();
    Tree tree = build_tree(rs, cfg.builder, binth, cfg.max_depth, cfg.train);
    derive_effective_bits(tree);
    const double tree_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const Metrics um = tree_stats(tree, cfg.memory);

    double uni_sum = 0;
    int uni_worst = 0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
      const auto r = classify_unibit(tree, trace[i]);
      if (r.rule != expected[i]) throw OracleMismatch(trace[i], "unibit", r.rule, expected[i]);
      uni_sum += r.accesses;
      uni_worst = std::max(uni_worst, r.accesses);
    }

    for (int gb : cfg.group_binths) {
      const auto t1 = std::chrono::steady_clock::now();
      Engine engine = build_lookup_tables(truncate(tree, gb));
      const double engine_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
      const Metrics mm = engine_stats(engine, cfg.memory);

      BenchResult r;
      r.ruleset = cfg.ruleset_name;
      r.builder = builder_name(cfg.builder);
      r.binth = binth;
      r.group_binth = gb;
      r.bytes_per_rule_unibit = um.bytes_per_rule;
      r.bytes_per_rule_multibit = mm.bytes_per_rule;
      r.worst_unibit = um.worst_accesses;
      r.worst_multibit = mm.worst_accesses;
      r.avg_unibit = um.avg_accesses;
      r.avg_multibit = mm.avg_accesses;
      r.nodes_unibit = um.node_count;
      r.nodes_multibit = mm.node_count;
      r.spliced_nodes = engine.tree.spliced.size();
      for (const auto& t : engine.tables) {
        r.table_entries += t.entries.size();
        r.max_table_bits = std::max(r.max_table_bits, t.positions.size());
      }
      r.build_seconds = tree_secs + engine_secs;

      double mb_sum = 0;
      int mb_worst = 0;
      std::size_t agree = 0;
      for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto m = classify_multibit(engine, trace[i]);
        if (m.rule != expected[i]) throw OracleMismatch(trace[i], "multibit", m.rule, expected[i]);
        ++agree;
        mb_sum += m.accesses;
        mb_worst = std::max(mb_worst, m.accesses);
      }
      r.agreement = static_cast<double>(agree) / static_cast<double>(trace.size());
      r.trace_avg_unibit = uni_sum / static_cast<double>(trace.size());
      r.trace_avg_multibit = mb_sum / static_cast<double>(trace.size());
      r.trace_worst_unibit = uni_worst;
      r.trace_worst_multibit = mb_worst;
      out.push_back(std::move(r));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw Error("bad number '" + s + "' in CSV");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  for (char c : line) {
    if (c == ',') out.emplace_back();
    else if (c != '\r') out.back() += c;
  }
  return out;
}

inline const std::vector<std::string>& bench_columns() {
  static const std::vector<std::string> cols{
      "ruleset",          "builder",           "binth",
      "group_binth",      "bytes_per_rule_unibit", "bytes_per_rule_multibit",
      "worst_unibit",     "worst_multibit",    "avg_unibit",
      "avg_multibit",     "trace_avg_unibit",  "trace_avg_multibit",
      "trace_worst_unibit", "trace_worst_multibit", "agreement",
      "nodes_unibit",     "nodes_multibit",    "spliced_nodes",
      "table_entries",    "max_table_bits"};
  return cols;
}

inline std::string pct(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * ratio);
  return buf;
}

}  // namespace detail

inline std::string bench_csv(const std::vector<BenchResult>& results) {
  using detail::fmt_double;
  std::string out;
  const auto& cols = detail::bench_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  for (const auto& r : results) {
    if (r.ruleset.find(',') != std::string::npos) throw Error("ruleset name must not contain commas");
    out += r.ruleset + "," + r.builder + "," + std::to_string(r.binth) + "," + std::to_string(r.group_binth) + "," +
           fmt_double(r.bytes_per_rule_unibit) + "," + fmt_double(r.bytes_per_rule_multibit) + "," +
           std::to_string(r.worst_unibit) + "," + std::to_string(r.worst_multibit) + "," + fmt_double(r.avg_unibit) +
           "," + fmt_double(r.avg_multibit) + "," + fmt_double(r.trace_avg_unibit) + "," +
           fmt_double(r.trace_avg_multibit) + "," + std::to_string(r.trace_worst_unibit) + "," +
           std::to_string(r.trace_worst_multibit) + "," + fmt_double(r.agreement) + "," +
           std::to_string(r.nodes_unibit) + "," + std::to_string(r.nodes_multibit) + "," +
           std::to_string(r.spliced_nodes) + "," + std::to_string(r.table_entries) + "," +
           std::to_string(r.max_table_bits) + "\n";
  }
  return out;
}

inline std::vector<BenchResult> parse_bench_csv(const std::string& text) {
  std::vector<BenchResult> out;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (header) {
      if (f != detail::bench_columns()) throw Error("unexpected bench CSV header");
      header = false;
      continue;
    }
    if (f.size() != detail::bench_columns().size()) throw Error("bench CSV row has wrong column count");
    auto i = [&](std::size_t k) { return static_cast<int>(detail::parse_double(f[k])); };
    auto z = [&](std::size_t k) { return static_cast<std::size_t>(detail::parse_double(f[k])); };
    auto d = [&](std::size_t k) { return detail::parse_double(f[k]); };
    BenchResult r;
    r.ruleset = f[0];
    r.builder = f[1];
    r.binth = i(2);
    r.group_binth = i(3);
    r.bytes_per_rule_unibit = d(4);
    r.bytes_per_rule_multibit = d(5);
    r.worst_unibit = i(6);
    r.worst_multibit = i(7);
    r.avg_unibit = d(8);
    r.avg_multibit = d(9);
    r.trace_avg_unibit = d(10);
    r.trace_avg_multibit = d(11);
    r.trace_worst_unibit = i(12);
    r.trace_worst_multibit = i(13);
    r.agreement = d(14);
    r.nodes_unibit = z(15);
    r.nodes_multibit = z(16);
    r.spliced_nodes = z(17);
    r.table_entries = z(18);
    r.max_table_bits = z(19);
    out.push_back(std::move(r));
  }
  if (header) throw Error("empty bench CSV");
  return out;
}

// Same layout as a decision-tree vs multibit comparison table, plus
// improvement columns computed as (unibit - multibit) / unibit.
inline std::string bench_summary(const std::vector<BenchResult>& results) {
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-14s %-7s %5s %5s | %10s %10s | %6s %6s | %7s %7s | %8s %8s %8s\n", "ruleset",
                "builder", "binth", "gbin", "bpr_dt", "bpr_mb", "wc_dt", "wc_mb", "avg_dt", "avg_mb", "worst_imp",
                "avg_imp", "mem_imp");
  out += buf;
  out += std::string(std::strlen(buf) - 1, '-') + "\n";
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%-14s %-7s %5d %5d | %10.2f %10.2f | %6d %6d | %7.2f %7.2f | %8s %8s %8s\n",
                  r.ruleset.c_str(), r.builder.c_str(), r.binth, r.group_binth, r.bytes_per_rule_unibit,
                  r.bytes_per_rule_multibit, r.worst_unibit, r.worst_multibit, r.avg_unibit, r.avg_multibit,
                  detail::pct(r.worst_improvement()).c_str(), detail::pct(r.avg_improvement()).c_str(),
                  detail::pct(r.memory_improvement()).c_str());
    out += buf;
  }
  return out;
}

// Writes `csv_path` plus sibling files sharing its stem: .summary.txt,
// .memory_vs_binth.csv, .worst_vs_group_binth.csv, .avg_vs_group_binth.csv
// and .timing.csv. Returns every path written.
inline std::vector<std::string> emit_report(const std::vector<BenchResult>& results, const std::string& csv_path) {
  if (results.empty()) throw Error("no results to report");
  namespace fs = std::filesystem;
  const fs::path base(csv_path);
  const fs::path stem = base.parent_path() / base.stem();
  auto sibling = [&](const char* suffix) { return stem.string() + suffix; };

  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back(csv_path, bench_csv(results));
  files.emplace_back(sibling(".summary.txt"), bench_summary(results));

  using detail::fmt_double;
  std::string mem = "ruleset,builder,group_binth,binth,bytes_per_rule_unibit,bytes_per_rule_multibit\n";
  std::string worst = "ruleset,builder,binth,group_binth,worst_unibit,worst_multibit\n";
  std::string avg = "ruleset,builder,binth,group_binth,avg_unibit,avg_multibit\n";
  std::string timing = "ruleset,builder,binth,group_binth,build_seconds\n";
  for (const auto& r : results) {
    const std::string key = r.ruleset + "," + r.builder + ",";
    mem += key + std::to_string(r.group_binth) + "," + std::to_string(r.binth) + "," +
           fmt_double(r.bytes_per_rule_unibit) + "," + fmt_double(r.bytes_per_rule_multibit) + "\n";
    const std::string cfg = key + std::to_string(r.binth) + "," + std::to_string(r.group_binth) + ",";
    worst += cfg + std::to_string(r.worst_unibit) + "," + std::to_string(r.worst_multibit) + "\n";
    avg += cfg + fmt_double(r.avg_unibit) + "," + fmt_double(r.avg_multibit) + "\n";
    timing += cfg + fmt_double(r.build_seconds) + "\n";
  }
  files.emplace_back(sibling(".memory_vs_binth.csv"), mem);
  files.emplace_back(sibling(".worst_vs_group_binth.csv"), worst);
  files.emplace_back(sibling(".avg_vs_group_binth.csv"), avg);
  files.emplace_back(sibling(".timing.csv"), timing);

  std::vector<std::string> written;
  for (const auto& [path, text] : files) {
    write_text_file(path, text);
    written.push_back(path);
  }
  return written;
}

}  // namespace mbtc
