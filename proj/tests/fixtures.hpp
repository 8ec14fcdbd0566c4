#pragma once

#include <memory>
#include <random>
#include <vector>

#include <mbtc/mbtc.hpp>

namespace fixtures {

using namespace mbtc;

inline Rule exact_rule(int id, const PacketHeader& h) {
  Rule r{id, {}};
  for (std::size_t d = 0; d < kNumFields; ++d) r.ranges[d] = FieldRange::exact(h.field(d));
  return r;
}

inline Rule wildcard_rule(int id) { return Rule{id, full_box()}; }

// The `k`th point of `box`, walking each field upward from its low end.
inline PacketHeader point_in(const Box& box, std::uint64_t k) {
  std::array<std::uint64_t, kNumFields> f{};
  for (std::size_t d = 0; d < kNumFields; ++d) f[d] = box[d].lo + k % box[d].width();
  return PacketHeader::from_fields(f);
}

inline PacketHeader random_header(std::mt19937_64& rng) {
  std::array<std::uint64_t, kNumFields> f{};
  for (std::size_t d = 0; d < kNumFields; ++d) f[d] = rng() & (field_span(d) - 1);
  return PacketHeader::from_fields(f);
}

inline PacketHeader random_header_in(const Box& box, std::mt19937_64& rng) {
  std::array<std::uint64_t, kNumFields> f{};
  for (std::size_t d = 0; d < kNumFields; ++d) f[d] = box[d].lo + rng() % box[d].width();
  return PacketHeader::from_fields(f);
}

inline std::shared_ptr<const Ruleset> generated(std::uint64_t seed, std::size_t n = 1000,
                                                Profile p = Profile::acl_like) {
  return std::make_shared<const Ruleset>(generate_ruleset(seed, n, p));
}

// Fig. 2 shape: S0 splits into S1, S2; S1 splits into S3, S4, S5; the rest
// are leaves. A three-way split is not a legal cut, so the nodes are wired
// directly; rewards only look at structure.
inline Tree reward_example_tree() {
  auto rs = std::make_shared<const Ruleset>(Ruleset{{wildcard_rule(0)}});
  Tree t(rs, 16);
  auto add = [&](int parent) {
    TreeNode n;
    n.parent = parent;
    n.depth = parent < 0 ? 0 : t.node(parent).depth + 1;
    n.box = full_box();
    n.rules = {0};
    n.finalized = true;
    const int id = t.add_node(std::move(n));
    if (parent >= 0) {
      t.node(parent).children.push_back(id);
      t.node(parent).finalized = false;
      t.node(parent).action = NodeAction::cut(kSrcIp, static_cast<unsigned>(t.node(parent).children.size()));
    }
    return id;
  };
  const int s0 = add(-1);
  const int s1 = add(s0);
  add(s0);  // S2
  add(s1);  // S3
  add(s1);  // S4
  add(s1);  // S5
  return t;
}

// Fig. 4 layout, with node ids S1 -> 0, S2 -> 1, ... S11 -> 10.
//   S1 cuts SrcPort 4 ways (positions 64, 65) into S2..S5.
//   S2 cuts DstIP (32) into S6, S7; S3 cuts DstPort (80) into S8, S9;
//   S4 cuts SrcIP (0) into S10, S11. S5 is a small leaf.
// With `deep`, S8 cuts Proto (96) and S11 cuts SrcPort again (66), and both
// hold enough rules to be spliced too.
struct TruncationExample {
  Tree tree;
  int group_binth;
};

inline TruncationExample truncation_example(bool deep) {
  constexpr int kGroupBinth = 10;
  constexpr int kBinth = 8;
  // Regions are identified by the bits that route into them; each receives
  // `per_leaf` exact-match rules.
  const std::uint64_t q = 16384;  // quarter of the SrcPort space
  Box s2 = full_box(), s3 = full_box(), s4 = full_box(), s5 = full_box();
  s2[kSrcPort] = {0, q};
  s3[kSrcPort] = {q, 2 * q};
  s4[kSrcPort] = {2 * q, 3 * q};
  s5[kSrcPort] = {3 * q, 4 * q};
  auto half = [](Box b, std::size_t dim, int side) {
    const std::uint64_t w = b[dim].width() / 2;
    b[dim] = {b[dim].lo + side * w, b[dim].lo + (side + 1) * w};
    return b;
  };
  std::vector<Box> leaf_regions = {half(s2, kDstIp, 0), half(s2, kDstIp, 1), half(s3, kDstPort, 1),
                                   half(s4, kSrcIp, 0)};
  if (deep) {
    const Box s8 = half(s3, kDstPort, 0), s11 = half(s4, kSrcIp, 1);
    for (Box b : {half(s8, kProto, 0), half(s8, kProto, 1), half(s11, kSrcPort, 0), half(s11, kSrcPort, 1)})
      leaf_regions.push_back(b);
  } else {
    leaf_regions.push_back(half(s3, kDstPort, 0));
    leaf_regions.push_back(half(s4, kSrcIp, 1));
  }

  Ruleset rs;
  for (const Box& b : leaf_regions)
    for (int k = 0; k < 6; ++k) rs.rules.push_back(exact_rule(static_cast<int>(rs.size()), point_in(b, k)));
  for (int k = 0; k < 3; ++k) rs.rules.push_back(exact_rule(static_cast<int>(rs.size()), point_in(s5, k)));

  Tree t = root_node(rs, kBinth);
  apply_cut(t, 0, kSrcPort, 4);  // S2..S5 = 1..4
  apply_cut(t, 1, kDstIp, 2);    // S6, S7 = 5, 6
  apply_cut(t, 2, kDstPort, 2);  // S8, S9 = 7, 8
  apply_cut(t, 3, kSrcIp, 2);    // S10, S11 = 9, 10
  if (deep) {
    apply_cut(t, 7, kProto, 2);     // 11, 12
    apply_cut(t, 10, kSrcPort, 2);  // 13, 14
  }
  for (const TreeNode& n : std::vector<TreeNode>(t.nodes()))
    if (n.is_leaf()) t.finalize_leaf(n.id);
  return {std::move(t), kGroupBinth};
}

}  // namespace fixtures
