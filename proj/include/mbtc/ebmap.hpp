#pragma once

// Effective bits: the header bit positions that select a cut node's child.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "bitops.hpp"
#include "dtree.hpp"

namespace mbtc {

// The k = log2(count) bits right after the box's prefix on `dim`, MSB first.
inline std::vector<BitPos> cut_bit_positions(const Box& box, std::size_t dim, unsigned count) {
  if (dim >= kNumFields) throw Error("dimension out of range");
  if (!is_cut_count(count)) throw Error("cut count must be one of 2,4,8,16,32");
  const FieldRange& r = box[dim];
  const auto prefix = r.prefix_len(dim);
  if (!prefix) throw Error("box is not an aligned power-of-two range");
  if (r.width() < count) throw Error("over-cut");
  const unsigned k = log2_exact(count);
  std::vector<BitPos> out;
  out.reserve(k);
  for (unsigned t = 0; t < k; ++t) out.push_back(kFieldOffset[dim] + static_cast<int>(*prefix + t));
  return out;
}

struct EbAnnotation {
  // Positions on the edge into each non-root node, and the value they take.
  std::map<int, std::vector<BitPos>> positions;
  std::map<int, std::uint32_t> pattern;
  // Children of partition nodes: reachable only by searching every side.
  std::set<int> non_addressable;

  bool empty() const noexcept { return positions.empty() && non_addressable.empty(); }
};

// Depth-first over the tree; writes eb_set / eb_pattern into every child.
inline EbAnnotation derive_effective_bits(Tree& tree) {
  EbAnnotation ann;
  std::vector<int> stack{tree.root_id()};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    TreeNode& n = tree.node(id);
    if (n.is_leaf()) continue;
    if (n.action.is_cut()) {
      std::vector<BitPos> bits;
      try {
        bits = cut_bit_positions(n.box, n.action.dim, n.action.count);
      } catch (const Error& e) {
        throw Error("node " + std::to_string(id) + ": " + e.what());
      }
      for (std::size_t c = 0; c < n.children.size(); ++c) {
        TreeNode& child = tree.node(n.children[c]);
        child.eb_set = bits;
        child.eb_pattern = static_cast<std::uint32_t>(c);
        ann.positions[child.id] = bits;
        ann.pattern[child.id] = static_cast<std::uint32_t>(c);
      }
    } else {
      for (int c : n.children) {
        TreeNode& child = tree.node(c);
        child.eb_set.clear();
        child.eb_pattern.reset();
        ann.non_addressable.insert(c);
      }
    }
    const auto& kids = tree.node(id).children;
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
  }
  tree.set_eb_annotated(true);
  return ann;
}

}  // namespace mbtc
