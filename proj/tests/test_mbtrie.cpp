#include <gtest/gtest.h>

#include <map>
#include <set>

#include "fixtures.hpp"

using namespace mbtc;

namespace {

Engine engine_for(const std::shared_ptr<const Ruleset>& rs, int binth, int gb) {
  Tree t = build_greedy(rs, binth, 24);
  derive_effective_bits(t);
  return build_lookup_tables(truncate(t, gb));
}

const Edge& edge_to(const TruncNode& n, int child) {
  for (const Edge& e : n.edges)
    if (e.child == child) return e;
  throw std::runtime_error("no edge to " + std::to_string(child));
}

}  // namespace

TEST(Truncate, RequiresAnnotation) {
  Tree t = build_greedy(fixtures::generated(1, 200), 16, 24);
  EXPECT_THROW(truncate(t, 40), Error);
  derive_effective_bits(t);
  EXPECT_THROW(truncate(t, 0), Error);
}

TEST(Truncate, HighThresholdLeavesTreeUnchanged) {
  Tree t = build_greedy(fixtures::generated(1, 500), 16, 24);
  derive_effective_bits(t);
  const Engine e = build_lookup_tables(truncate(t, 501));
  EXPECT_TRUE(e.tree.spliced.empty());
  EXPECT_TRUE(e.tables.empty());
  EXPECT_EQ(e.tree.dfs_order().size(), t.size());
  const Metrics a = tree_stats(t), b = engine_stats(e);
  EXPECT_EQ(a.worst_accesses, b.worst_accesses);
  EXPECT_DOUBLE_EQ(a.bytes_per_rule, b.bytes_per_rule);
}

TEST(Truncate, FigureScenarioSplicesSecondLevel) {
  auto ex = fixtures::truncation_example(false);
  derive_effective_bits(ex.tree);
  const TruncatedTree tt = truncate(ex.tree, ex.group_binth);
  EXPECT_EQ(tt.spliced, (std::vector<int>{1, 2, 3}));
  const TruncNode& root = tt.node(0);
  EXPECT_TRUE(root.multibit);
  std::set<int> kids;
  for (const Edge& e : root.edges) kids.insert(e.child);
  EXPECT_EQ(kids, (std::set<int>{4, 5, 6, 7, 8, 9, 10}));

  // Bits i, j (SrcPort 0, 1), then k, l, m from the spliced cuts.
  const std::vector<BitPos> order{64, 65, 32, 80, 0};
  for (const Edge& e : root.edges) EXPECT_EQ(e.pattern.positions, order);
  EXPECT_EQ(edge_to(root, 4).pattern.str(), "11xxx");  // S5
  EXPECT_EQ(edge_to(root, 5).pattern.str(), "000xx");  // S6
  EXPECT_EQ(edge_to(root, 6).pattern.str(), "001xx");
  EXPECT_EQ(edge_to(root, 7).pattern.str(), "01x0x");  // S8
  EXPECT_EQ(edge_to(root, 8).pattern.str(), "01x1x");
  EXPECT_EQ(edge_to(root, 9).pattern.str(), "10xx0");
  EXPECT_EQ(edge_to(root, 10).pattern.str(), "10xx1");  // S11
}

TEST(BuildLookupTables, FigureRootTable) {
  auto ex = fixtures::truncation_example(false);
  derive_effective_bits(ex.tree);
  const Engine e = build_lookup_tables(truncate(ex.tree, ex.group_binth));
  ASSERT_EQ(e.tables.size(), 1u);
  const LookupTable& tb = e.tables[0];
  EXPECT_EQ(tb.owner, 0);
  EXPECT_EQ(tb.positions.size(), 5u);
  ASSERT_EQ(tb.entries.size(), 32u);
  std::map<int, int> hits;
  for (int c : tb.entries) ++hits[c];
  EXPECT_EQ(hits[4], 8);  // "ijxxx" occupies a quarter of the table
  for (int c = 5; c <= 10; ++c) EXPECT_EQ(hits[c], 4);
}

TEST(Truncate, FigureScenarioCascadesIntoHeavyGrandchildren) {
  auto ex = fixtures::truncation_example(true);
  derive_effective_bits(ex.tree);
  const Engine e = build_lookup_tables(truncate(ex.tree, ex.group_binth));
  const auto& sp = e.tree.spliced;
  EXPECT_EQ(std::set<int>(sp.begin(), sp.end()), (std::set<int>{1, 2, 3, 7, 10}));
  EXPECT_FALSE(e.tree.alive(7));
  EXPECT_FALSE(e.tree.alive(10));
  EXPECT_TRUE(e.tree.alive(11));
  EXPECT_TRUE(e.tree.alive(14));
  ASSERT_EQ(e.tables.size(), 1u);
  EXPECT_EQ(e.tables[0].positions, (std::vector<BitPos>{64, 65, 32, 80, 96, 0, 66}));
  EXPECT_EQ(e.tables[0].entries.size(), 128u);
  for (const auto& h : generate_trace(e.ruleset(), 1, 2000))
    ASSERT_EQ(classify_multibit(e, h), (ClassifyResult{oracle_classify(e.ruleset(), h), 3}));
}

TEST(Truncate, PartitionBlocksSplicing) {
  // Root cut -> heavy partition -> cut. The partition is not selected by
  // header bits, so it stays even though it holds more than group_binth rules.
  Ruleset rs;
  for (int i = 0; i < 20; ++i) {
    Rule r = fixtures::wildcard_rule(i);
    r.ranges[kSrcIp] = FieldRange::exact(static_cast<std::uint64_t>(i) << 24);
    r.ranges[kSrcPort] = {0, 100};
    r.ranges[kDstPort] = {0, 50000};
    rs.rules.push_back(r);
  }
  for (int i = 20; i < 24; ++i) rs.rules.push_back(fixtures::exact_rule(i, PacketHeader{1, 2, 3, 4, 5}));
  Tree t = root_node(rs, 4);
  const auto top = apply_cut(t, 0, kSrcPort, 2);
  const auto sides = apply_partition(t, top[0], kDstPort);
  ASSERT_EQ(t.node(sides[0]).rules.size(), 20u);
  for (int k : apply_cut(t, sides[0], kSrcIp, 2)) t.finalize_leaf(k);
  t.finalize_leaf(sides[1]);
  t.finalize_leaf(top[1]);
  derive_effective_bits(t);
  const Engine e = build_lookup_tables(truncate(t, 1));
  EXPECT_TRUE(e.tree.spliced.empty());
  EXPECT_TRUE(e.tables.empty());
  EXPECT_TRUE(e.tree.alive(top[0]));
  for (const auto& h : generate_trace(rs, 1, 300)) EXPECT_EQ(classify_multibit(e, h), classify_unibit(t, h));
}

TEST(BuildLookupTables, UntruncatedTreeHasNoTables) {
  EXPECT_TRUE(engine_for(fixtures::generated(2, 300), 16, 1 << 20).tables.empty());
}

TEST(BuildLookupTables, EveryIndexOwnedByExactlyOneEdge) {
  for (std::uint64_t seed : {1, 2}) {
    for (int gb : {20, 40}) {
      const Engine e = engine_for(fixtures::generated(seed), 16, gb);
      ASSERT_FALSE(e.tables.empty());
      for (const LookupTable& tb : e.tables) {
        const TruncNode& owner = e.tree.node(tb.owner);
        EXPECT_LE(tb.positions.size(), kMaxIndexBits);
        std::size_t covered = 0;
        std::vector<int> claim(tb.entries.size(), -1);
        for (const Edge& edge : owner.edges) {
          covered += std::size_t{1} << edge.pattern.dont_cares();
          for (std::uint32_t idx : expand_pattern(edge.pattern)) {
            ASSERT_EQ(claim[idx], -1);
            claim[idx] = edge.child;
          }
        }
        EXPECT_EQ(covered, tb.entries.size());
        EXPECT_EQ(claim, tb.entries);
      }
    }
  }
}

TEST(ClassifyMultibit, SingleLeafMatchesUnibit) {
  const Ruleset rs = generate_ruleset(3, 12, Profile::acl_like);
  Tree t = build_greedy(rs, 16, 24);
  derive_effective_bits(t);
  const Engine e = build_lookup_tables(truncate(t, 1));
  for (const auto& h : generate_trace(rs, 5, 100)) EXPECT_EQ(classify_multibit(e, h), classify_unibit(t, h));
}

TEST(ClassifyMultibit, AgreesWithOracleAndNeverCostsMore) {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto rs = fixtures::generated(seed, 1000, seed == 2 ? Profile::ipc_like : Profile::acl_like);
    Tree t = build_greedy(rs, 16, 24);
    derive_effective_bits(t);
    const Engine e = build_lookup_tables(truncate(t, 40));
    const auto trace = generate_trace(*rs, seed, 10000);
    int worst_u = 0, worst_m = 0;
    for (const auto& h : trace) {
      const auto u = classify_unibit(t, h);
      const auto m = classify_multibit(e, h);
      const auto want = oracle_classify(*rs, h);
      ASSERT_EQ(u.rule, want);
      ASSERT_EQ(m.rule, want);
      ASSERT_LE(m.accesses, u.accesses);
      worst_u = std::max(worst_u, u.accesses);
      worst_m = std::max(worst_m, m.accesses);
    }
    EXPECT_LE(worst_m, worst_u);
    EXPECT_LE(engine_stats(e).worst_accesses, tree_stats(t).worst_accesses);
  }
}

TEST(ClassifyMultibit, CrossingSplicedNodeSavesAccesses) {
  auto ex = fixtures::truncation_example(false);
  derive_effective_bits(ex.tree);
  const Engine e = build_lookup_tables(truncate(ex.tree, ex.group_binth));
  for (const auto& h : generate_trace(ex.tree.ruleset(), 2, 500)) {
    const auto u = classify_unibit(ex.tree, h);
    const auto m = classify_multibit(e, h);
    // Every path except the one into S5 crosses a spliced node.
    const bool via_s5 = h.src_port >= 3 * 16384;
    EXPECT_EQ(m.accesses, via_s5 ? u.accesses : u.accesses - 1);
  }
}

TEST(ClassifyMultibit, TableGuardStopsCascade) {
  const Engine e = engine_for(fixtures::generated(1), 8, 1);
  std::size_t widest = 0;
  for (const auto& tb : e.tables) widest = std::max(widest, tb.positions.size());
  EXPECT_LE(widest, kMaxIndexBits);
  EXPECT_GE(widest, kMaxIndexBits - 4);
  for (const auto& h : generate_trace(e.ruleset(), 4, 3000))
    ASSERT_EQ(classify_multibit(e, h).rule, oracle_classify(e.ruleset(), h));
}

TEST(EngineStats, TableMemoryReplacesSplicedNodes) {
  auto ex = fixtures::truncation_example(false);
  derive_effective_bits(ex.tree);
  const Metrics u = tree_stats(ex.tree);
  const Metrics m = engine_stats(build_lookup_tables(truncate(ex.tree, ex.group_binth)));
  EXPECT_EQ(m.node_count, u.node_count - 3);
  // Three 2-slot nodes and the root's 4 slots give way to one 32-entry table.
  EXPECT_EQ(m.table_entries, u.table_entries - 3 * 2 - 4 + 32);
  EXPECT_EQ(m.rule_refs, u.rule_refs);
  EXPECT_EQ(m.worst_path, u.worst_path - 1);
}

TEST(EdgePatternOps, ConcatOverAndExpand) {
  const EdgePattern a = EdgePattern::from_index({3, 9}, 2);
  EXPECT_EQ(a.str(), "10");
  const EdgePattern b = a.concat(EdgePattern::from_index({40}, 1));
  EXPECT_EQ(b.str(), "101");
  const EdgePattern c = b.over({3, 9, 7, 40});
  EXPECT_EQ(c.str(), "10x1");
  EXPECT_EQ(c.dont_cares(), 1u);
  EXPECT_EQ(expand_pattern(c), (std::vector<std::uint32_t>{0b1001, 0b1011}));
  EXPECT_THROW(b.over({3, 9}), Error);
}
