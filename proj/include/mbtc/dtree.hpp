#pragma once

// Decision tree over 5-field rules: cut and partition actions, a greedy
// baseline builder, node-per-access classification, and tree metrics.

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bitops.hpp"
#include "ruleset.hpp"

namespace mbtc {

inline constexpr std::array<unsigned, 5> kCutCounts{2, 4, 8, 16, 32};

inline bool is_cut_count(unsigned c) {
  return std::find(kCutCounts.begin(), kCutCounts.end(), c) != kCutCounts.end();
}

inline unsigned log2_exact(std::uint64_t v) {
  unsigned k = 0;
  while ((std::uint64_t{1} << k) < v) ++k;
  return k;
}

inline bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

struct NodeAction {
  enum class Kind : std::uint8_t { none, cut, partition };

  Kind kind = Kind::none;
  std::size_t dim = 0;  // cut dimension, or the key dimension of a partition
  unsigned count = 0;   // number of cut children

  static NodeAction none() { return {}; }
  static NodeAction cut(std::size_t dim, unsigned count) { return {Kind::cut, dim, count}; }
  // The key dimension is chosen by apply_partition.
  static NodeAction partition() { return {Kind::partition, 0, 2}; }

  bool is_none() const noexcept { return kind == Kind::none; }
  bool is_cut() const noexcept { return kind == Kind::cut; }
  bool is_partition() const noexcept { return kind == Kind::partition; }

  friend bool operator==(const NodeAction&, const NodeAction&) = default;
};

struct TreeNode {
  int id = 0;
  int parent = -1;
  int depth = 0;
  Box box{};
  std::vector<int> rules;  // ascending ids, so the first match has top priority
  NodeAction action;
  std::vector<int> children;
  // Bits labelling the edge from the parent and the value they take for this
  // node. Empty at the root and under partitions.
  std::vector<BitPos> eb_set;
  std::optional<std::uint32_t> eb_pattern;
  bool finalized = false;  // closed as a leaf
  bool oversized = false;  // leaf kept above binth (depth limit or no valid action)

  bool is_leaf() const noexcept { return action.is_none(); }
};

class Tree {
 public:
  Tree(std::shared_ptr<const Ruleset> ruleset, int binth) : ruleset_(std::move(ruleset)), binth_(binth) {}

  const Ruleset& ruleset() const noexcept { return *ruleset_; }
  const std::shared_ptr<const Ruleset>& ruleset_ptr() const noexcept { return ruleset_; }
  int binth() const noexcept { return binth_; }
  int root_id() const noexcept { return 0; }
  std::size_t size() const noexcept { return nodes_.size(); }

  const TreeNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  TreeNode& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

  int add_node(TreeNode n) {
    n.id = static_cast<int>(nodes_.size());
    nodes_.push_back(std::move(n));
    return nodes_.back().id;
  }

  bool leaf_eligible(int id) const { return node(id).rules.size() <= static_cast<std::size_t>(binth_); }

  void finalize_leaf(int id) {
    TreeNode& n = node(id);
    if (!n.is_leaf()) throw Error("node " + std::to_string(id) + " already has an action");
    n.finalized = true;
    n.oversized = n.rules.size() > static_cast<std::size_t>(binth_);
  }

  // Every node either acted on or closed as a leaf.
  bool is_finalized() const {
    return std::all_of(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return !n.is_leaf() || n.finalized; });
  }

  bool eb_annotated() const noexcept { return eb_annotated_; }
  void set_eb_annotated(bool v) noexcept { eb_annotated_ = v; }

 private:
  std::shared_ptr<const Ruleset> ruleset_;
  int binth_;
  std::vector<TreeNode> nodes_;
  bool eb_annotated_ = false;
};

inline Tree root_node(std::shared_ptr<const Ruleset> ruleset, int binth) {
  if (!ruleset) throw Error("null ruleset");
  ruleset->validate();
  if (binth < 1) throw Error("binth must be at least 1");
  Tree tree(std::move(ruleset), binth);
  TreeNode root;
  root.box = full_box();
  root.rules.resize(tree.ruleset().size());
  for (std::size_t i = 0; i < root.rules.size(); ++i) root.rules[i] = static_cast<int>(i);
  tree.add_node(std::move(root));
  return tree;
}

inline Tree root_node(const Ruleset& ruleset, int binth) {
  return root_node(std::make_shared<const Ruleset>(ruleset), binth);
}

namespace detail {

inline void require_open(const Tree& tree, int id) {
  const TreeNode& n = tree.node(id);
  if (!n.is_leaf()) throw Error("node " + std::to_string(id) + " already has an action");
  if (n.finalized) throw Error("node " + std::to_string(id) + " is a finalized leaf");
}

// Rule lists per cut child, without touching the tree.
inline std::vector<std::vector<int>> cut_rule_lists(const Tree& tree, const TreeNode& n, std::size_t dim,
                                                    unsigned count) {
  const FieldRange& range = n.box[dim];
  const std::uint64_t sub = range.width() / count;
  std::vector<std::vector<int>> out(count);
  for (int rid : n.rules) {
    const FieldRange& r = tree.ruleset()[static_cast<std::size_t>(rid)].ranges[dim];
    const std::uint64_t lo = std::max(r.lo, range.lo);
    const std::uint64_t hi = std::min(r.hi, range.hi);
    const std::uint64_t first = (lo - range.lo) / sub;
    const std::uint64_t last = (hi - 1 - range.lo) / sub;
    for (std::uint64_t c = first; c <= last; ++c) out[c].push_back(rid);
  }
  return out;
}

}  // namespace detail

// Reasons a cut is not applicable, or empty if it is.
inline std::optional<std::string> cut_violation(const Tree& tree, int id, std::size_t dim, unsigned count) {
  if (dim >= kNumFields) return "dimension out of range";
  if (!is_cut_count(count)) return "cut count must be one of 2,4,8,16,32";
  const FieldRange& r = tree.node(id).box[dim];
  if (!is_pow2(r.width()) || r.lo % r.width() != 0) return "box is not an aligned power-of-two range";
  if (r.width() < count) return "over-cut";
  return std::nullopt;
}

inline std::vector<int> apply_cut(Tree& tree, int id, std::size_t dim, unsigned count) {
  detail::require_open(tree, id);
  if (auto why = cut_violation(tree, id, dim, count)) throw Error(*why);
  auto lists = detail::cut_rule_lists(tree, tree.node(id), dim, count);
  const Box parent_box = tree.node(id).box;
  const int depth = tree.node(id).depth;
  const std::uint64_t sub = parent_box[dim].width() / count;
  std::vector<int> kids;
  kids.reserve(count);
  for (unsigned c = 0; c < count; ++c) {
    TreeNode child;
    child.parent = id;
    child.depth = depth + 1;
    child.box = parent_box;
    child.box[dim] = {parent_box[dim].lo + c * sub, parent_box[dim].lo + (c + 1) * sub};
    child.rules = std::move(lists[c]);
    kids.push_back(tree.add_node(std::move(child)));
  }
  TreeNode& n = tree.node(id);
  n.action = NodeAction::cut(dim, count);
  n.children = kids;
  return kids;
}

// Split into rules covering more than half of the node's box on `dim`
// ("large") and the rest.
inline std::pair<std::vector<int>, std::vector<int>> partition_split(const Tree& tree, int id, std::size_t dim) {
  const TreeNode& n = tree.node(id);
  const FieldRange& box = n.box[dim];
  std::pair<std::vector<int>, std::vector<int>> out;
  for (int rid : n.rules) {
    const FieldRange& r = tree.ruleset()[static_cast<std::size_t>(rid)].ranges[dim];
    const std::uint64_t covered = std::min(r.hi, box.hi) - std::max(r.lo, box.lo);
    (2 * covered > box.width() ? out.first : out.second).push_back(rid);
  }
  return out;
}

// Dimension whose large/small split is non-degenerate and most balanced.
inline std::optional<std::size_t> partition_key(const Tree& tree, int id) {
  std::optional<std::size_t> best;
  std::size_t best_max = 0;
  for (std::size_t d = 0; d < kNumFields; ++d) {
    const auto [large, small] = partition_split(tree, id, d);
    if (large.empty() || small.empty()) continue;
    const std::size_t worst_side = std::max(large.size(), small.size());
    if (!best || worst_side < best_max) {
      best = d;
      best_max = worst_side;
    }
  }
  return best;
}

inline std::vector<int> apply_partition(Tree& tree, int id, std::size_t dim) {
  detail::require_open(tree, id);
  if (dim >= kNumFields) throw Error("dimension out of range");
  if (tree.node(id).rules.size() < 2) throw Error("ineffective partition: fewer than 2 rules");
  auto [large, small] = partition_split(tree, id, dim);
  if (large.empty() || small.empty()) throw Error("ineffective partition");
  std::vector<int> kids;
  for (auto* side : {&large, &small}) {
    TreeNode child;
    child.parent = id;
    child.depth = tree.node(id).depth + 1;
    child.box = tree.node(id).box;
    child.rules = std::move(*side);
    kids.push_back(tree.add_node(std::move(child)));
  }
  TreeNode& n = tree.node(id);
  n.action = {NodeAction::Kind::partition, dim, 2};
  n.children = kids;
  return kids;
}

inline std::vector<int> apply_partition(Tree& tree, int id) {
  detail::require_open(tree, id);
  if (tree.node(id).rules.size() < 2) throw Error("ineffective partition: fewer than 2 rules");
  const auto key = partition_key(tree, id);
  if (!key) throw Error("ineffective partition");
  return apply_partition(tree, id, *key);
}

inline std::vector<int> apply_action(Tree& tree, int id, const NodeAction& a) {
  if (a.is_cut()) return apply_cut(tree, id, a.dim, a.count);
  if (a.is_partition()) return apply_partition(tree, id);
  tree.finalize_leaf(id);
  return {};
}

// Distinct rule endpoints strictly inside the node's box on `dim`.
inline std::size_t interior_endpoints(const Tree& tree, const TreeNode& n, std::size_t dim) {
  const FieldRange& box = n.box[dim];
  std::vector<std::uint64_t> pts;
  pts.reserve(n.rules.size() * 2);
  for (int rid : n.rules) {
    const FieldRange& r = tree.ruleset()[static_cast<std::size_t>(rid)].ranges[dim];
    if (r.lo > box.lo && r.lo < box.hi) pts.push_back(r.lo);
    if (r.hi > box.lo && r.hi < box.hi) pts.push_back(r.hi);
  }
  std::sort(pts.begin(), pts.end());
  return static_cast<std::size_t>(std::unique(pts.begin(), pts.end()) - pts.begin());
}

// HiCuts-style baseline: cut the dimension with the most distinct interior
// endpoints into the largest count not exceeding that number.
inline Tree build_greedy(std::shared_ptr<const Ruleset> ruleset, int binth, int max_depth) {
  Tree tree = root_node(std::move(ruleset), binth);
  std::vector<int> stack{tree.root_id()};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (tree.leaf_eligible(id) || tree.node(id).depth >= max_depth) {
      tree.finalize_leaf(id);
      continue;
    }
    std::size_t best_dim = 0, best_pts = 0;
    for (std::size_t d = 0; d < kNumFields; ++d) {
      const std::size_t pts = interior_endpoints(tree, tree.node(id), d);
      if (pts > best_pts) {
        best_pts = pts;
        best_dim = d;
      }
    }
    if (best_pts == 0) {
      tree.finalize_leaf(id);
      continue;
    }
    const std::uint64_t width = tree.node(id).box[best_dim].width();
    unsigned count = 2;
    for (unsigned c : kCutCounts)
      if (c <= best_pts && c <= width) count = c;
    const auto kids = apply_cut(tree, id, best_dim, count);
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
  }
  return tree;
}

inline Tree build_greedy(const Ruleset& ruleset, int binth, int max_depth) {
  return build_greedy(std::make_shared<const Ruleset>(ruleset), binth, max_depth);
}

// ---------------------------------------------------------------------------
// Cost model

struct MemoryModel {
  double node_overhead_bytes = 32;
  double rule_ref_bytes = 4;
  double table_entry_bytes = 4;

  void validate() const {
    if (!(node_overhead_bytes > 0 && rule_ref_bytes > 0 && table_entry_bytes > 0))
      throw Error("memory model sizes must be positive");
  }
};

// Leaf scan: one access per binth-sized bucket of rules.
inline int leaf_scan_accesses(std::size_t rules, int binth) {
  return static_cast<int>((rules + static_cast<std::size_t>(binth) - 1) / static_cast<std::size_t>(binth));
}

struct ClassifyResult {
  std::optional<int> rule;
  int accesses = 0;

  friend bool operator==(const ClassifyResult&, const ClassifyResult&) = default;
};

inline std::optional<int> better_match(std::optional<int> a, std::optional<int> b) {
  if (!a) return b;
  if (!b) return a;
  return std::min(*a, *b);
}

inline std::optional<int> scan_rules(const Ruleset& rs, const std::vector<int>& rules, const PacketHeader& h) {
  for (int rid : rules)
    if (rule_matches(rs[static_cast<std::size_t>(rid)], h)) return rid;
  return std::nullopt;
}

// Child of a cut node holding `h`, by arithmetic on the cut dimension.
inline std::size_t cut_child_index(const Box& box, const NodeAction& a, const PacketHeader& h) {
  const FieldRange& r = box[a.dim];
  return static_cast<std::size_t>((h.field(a.dim) - r.lo) / (r.width() / a.count));
}

inline ClassifyResult classify_unibit(const Tree& tree, const PacketHeader& h, int id) {
  const TreeNode& n = tree.node(id);
  if (n.is_leaf())
    return {scan_rules(tree.ruleset(), n.rules, h), 1 + leaf_scan_accesses(n.rules.size(), tree.binth())};
  if (n.action.is_cut()) {
    auto r = classify_unibit(tree, h, n.children[cut_child_index(n.box, n.action, h)]);
    r.accesses += 1;
    return r;
  }
  ClassifyResult out{std::nullopt, 1};
  for (int c : n.children) {
    const auto r = classify_unibit(tree, h, c);
    out.rule = better_match(out.rule, r.rule);
    out.accesses += r.accesses;
  }
  return out;
}

inline ClassifyResult classify_unibit(const Tree& tree, const PacketHeader& h) {
  return classify_unibit(tree, h, tree.root_id());
}

struct Metrics {
  int worst_accesses = 0;      // node visits plus leaf scan, partition = sum of sides
  double avg_accesses = 0;     // mean over leaves of path nodes plus leaf scan
  int worst_path = 0;          // as worst_accesses without leaf scans
  double avg_path = 0;         // mean root-to-leaf node count
  std::size_t node_count = 0;
  std::size_t leaf_count = 0;
  std::size_t oversized_leaves = 0;
  std::size_t rule_refs = 0;
  std::size_t table_entries = 0;  // child-pointer slots and lookup-table entries
  double total_bytes = 0;
  double bytes_per_rule = 0;
};

namespace detail {

// Shared by the unibit tree and the truncated engine. `View` provides
// kind(id), children(id), rule_count(id), dispatch_entries(id).
template <class View>
Metrics structural_metrics(const View& view, int root, int binth, std::size_t ruleset_size,
                           const MemoryModel& mm) {
  mm.validate();
  Metrics m;
  double path_sum = 0, access_sum = 0;

  struct Cost {
    int worst;
    int path;
  };
  auto visit = [&](auto&& self, int id, int depth) -> Cost {
    ++m.node_count;
    const auto kind = view.kind(id);
    const std::size_t nrules = view.rule_count(id);
    if (kind == NodeAction::Kind::none) {
      ++m.leaf_count;
      if (view.oversized(id)) ++m.oversized_leaves;
      m.rule_refs += nrules;
      const int scan = leaf_scan_accesses(nrules, binth);
      path_sum += depth + 1;
      access_sum += depth + 1 + scan;
      return {1 + scan, 1};
    }
    m.table_entries += view.dispatch_entries(id);
    Cost c{0, 0};
    for (int k : view.children(id)) {
      const Cost kc = self(self, k, depth + 1);
      if (kind == NodeAction::Kind::partition) {
        c.worst += kc.worst;
        c.path += kc.path;
      } else {
        c.worst = std::max(c.worst, kc.worst);
        c.path = std::max(c.path, kc.path);
      }
    }
    return {c.worst + 1, c.path + 1};
  };
  const Cost root_cost = visit(visit, root, 0);
  m.worst_accesses = root_cost.worst;
  m.worst_path = root_cost.path;
  m.avg_path = path_sum / static_cast<double>(m.leaf_count);
  m.avg_accesses = access_sum / static_cast<double>(m.leaf_count);
  m.total_bytes = static_cast<double>(m.node_count) * mm.node_overhead_bytes +
                  static_cast<double>(m.rule_refs) * mm.rule_ref_bytes +
                  static_cast<double>(m.table_entries) * mm.table_entry_bytes;
  m.bytes_per_rule = m.total_bytes / static_cast<double>(ruleset_size);
  return m;
}

struct TreeView {
  const Tree& tree;
  NodeAction::Kind kind(int id) const { return tree.node(id).action.kind; }
  const std::vector<int>& children(int id) const { return tree.node(id).children; }
  std::size_t rule_count(int id) const { return tree.node(id).rules.size(); }
  bool oversized(int id) const { return tree.node(id).oversized; }
  std::size_t dispatch_entries(int id) const { return tree.node(id).children.size(); }
};

}  // namespace detail

inline Metrics tree_stats(const Tree& tree, const MemoryModel& mm = {}) {
  return detail::structural_metrics(detail::TreeView{tree}, tree.root_id(), tree.binth(), tree.ruleset().size(),
                                    mm);
}

}  // namespace mbtc
