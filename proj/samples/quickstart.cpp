// Build a decision tree for a synthetic ruleset, turn it into a multibit
// engine, and compare the two on a trace.

#include <cstdio>

#include <mbtc/mbtc.hpp>

int main() {
  using namespace mbtc;

  auto rules = std::make_shared<const Ruleset>(generate_ruleset(/*seed=*/1, /*count=*/1000, Profile::acl_like));
  Tree tree = build_greedy(rules, /*binth=*/16, /*max_depth=*/24);
  derive_effective_bits(tree);
  const Engine engine = build_lookup_tables(truncate(tree, /*group_binth=*/40));

  long unibit = 0, multibit = 0;
  const auto trace = generate_trace(*rules, 2, 10000);
  for (const PacketHeader& h : trace) {
    const auto u = classify_unibit(tree, h);
    const auto m = classify_multibit(engine, h);
    if (u.rule != oracle_classify(*rules, h) || m.rule != u.rule) {
      std::fprintf(stderr, "mismatch on %s\n", format_header(h, ',').c_str());
      return 1;
    }
    unibit += u.accesses;
    multibit += m.accesses;
  }

  const Metrics tu = tree_stats(tree), tm = engine_stats(engine);
  std::printf("%zu headers classified\n", trace.size());
  std::printf("unibit:   worst %d  avg %.2f  trace avg %.2f  %.1f bytes/rule\n", tu.worst_accesses, tu.avg_accesses,
              static_cast<double>(unibit) / trace.size(), tu.bytes_per_rule);
  std::printf("multibit: worst %d  avg %.2f  trace avg %.2f  %.1f bytes/rule  (%zu nodes spliced)\n",
              tm.worst_accesses, tm.avg_accesses, static_cast<double>(multibit) / trace.size(), tm.bytes_per_rule,
              engine.tree.spliced.size());
}
