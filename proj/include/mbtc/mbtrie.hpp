#pragma once

// Group-binth truncation, lookup-table construction and the multibit
// classifier.
//
// Truncation splices heavy intermediate cut nodes out of the tree. The
// surviving ancestor (the "owner") then reaches the spliced node's children
// directly, through an edge pattern that concatenates the effective bits of
// the spliced chain. Bits that only matter to sibling branches are left as
// don't-cares, and each owner's patterns are expanded into a table indexed
// by the concatenated bits.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bitops.hpp"
#include "dtree.hpp"
#include "ebmap.hpp"

namespace mbtc {

enum class TriBit : std::uint8_t { zero, one, dont_care };

struct EdgePattern {
  std::vector<BitPos> positions;
  std::vector<TriBit> values;

  std::size_t dont_cares() const {
    return static_cast<std::size_t>(std::count(values.begin(), values.end(), TriBit::dont_care));
  }
  std::size_t specified() const { return values.size() - dont_cares(); }

  // e.g. "10xx"
  std::string str() const {
    std::string s;
    for (TriBit v : values) s += v == TriBit::zero ? '0' : v == TriBit::one ? '1' : 'x';
    return s;
  }

  static EdgePattern from_index(const std::vector<BitPos>& positions, std::uint32_t index) {
    EdgePattern p;
    p.positions = positions;
    const std::size_t k = positions.size();
    for (std::size_t i = 0; i < k; ++i) p.values.push_back(((index >> (k - 1 - i)) & 1u) ? TriBit::one : TriBit::zero);
    return p;
  }

  EdgePattern concat(const EdgePattern& tail) const {
    EdgePattern p = *this;
    p.positions.insert(p.positions.end(), tail.positions.begin(), tail.positions.end());
    p.values.insert(p.values.end(), tail.values.begin(), tail.values.end());
    return p;
  }

  // Re-express over `order`; positions this pattern lacks become don't-cares.
  EdgePattern over(const std::vector<BitPos>& order) const {
    EdgePattern p;
    p.positions = order;
    p.values.assign(order.size(), TriBit::dont_care);
    for (std::size_t i = 0; i < positions.size(); ++i) {
      const auto it = std::find(order.begin(), order.end(), positions[i]);
      if (it == order.end()) throw Error("pattern position missing from table order");
      p.values[static_cast<std::size_t>(it - order.begin())] = values[i];
    }
    return p;
  }

  friend bool operator==(const EdgePattern&, const EdgePattern&) = default;
};

struct Edge {
  int child = -1;
  EdgePattern pattern;  // empty under partitions
};

struct TruncNode {
  int id = 0;  // id in the source tree
  int depth = 0;
  Box box{};
  std::vector<int> rules;
  NodeAction action;
  std::vector<Edge> edges;
  bool oversized = false;
  bool multibit = false;  // at least one spliced descendant edge
  int table = -1;         // index into Engine::tables

  bool is_leaf() const noexcept { return action.is_none(); }
};

class TruncatedTree {
 public:
  TruncatedTree(std::shared_ptr<const Ruleset> ruleset, int binth, int group_binth, std::size_t capacity)
      : ruleset_(std::move(ruleset)), binth_(binth), group_binth_(group_binth), nodes_(capacity) {}

  const Ruleset& ruleset() const noexcept { return *ruleset_; }
  const std::shared_ptr<const Ruleset>& ruleset_ptr() const noexcept { return ruleset_; }
  int binth() const noexcept { return binth_; }
  int group_binth() const noexcept { return group_binth_; }
  int root_id() const noexcept { return 0; }
  std::size_t capacity() const noexcept { return nodes_.size(); }

  bool alive(int id) const {
    return id >= 0 && static_cast<std::size_t>(id) < nodes_.size() && nodes_[static_cast<std::size_t>(id)].has_value();
  }
  const TruncNode& node(int id) const {
    if (!alive(id)) throw Error("node " + std::to_string(id) + " not in truncated tree");
    return *nodes_[static_cast<std::size_t>(id)];
  }
  TruncNode& node(int id) {
    if (!alive(id)) throw Error("node " + std::to_string(id) + " not in truncated tree");
    return *nodes_[static_cast<std::size_t>(id)];
  }
  void put(TruncNode n) {
    const auto id = static_cast<std::size_t>(n.id);
    if (id >= nodes_.size()) nodes_.resize(id + 1);
    nodes_[id] = std::move(n);
  }
  void erase(int id) { nodes_.at(static_cast<std::size_t>(id)).reset(); }

  // Surviving ids, depth-first from the root.
  std::vector<int> dfs_order() const {
    std::vector<int> out, stack{root_id()};
    while (!stack.empty()) {
      const int id = stack.back();
      stack.pop_back();
      out.push_back(id);
      const auto& edges = node(id).edges;
      for (auto it = edges.rbegin(); it != edges.rend(); ++it) stack.push_back(it->child);
    }
    return out;
  }

  std::vector<int> spliced;  // removed node ids, in splice order

 private:
  std::shared_ptr<const Ruleset> ruleset_;
  int binth_;
  int group_binth_;
  std::vector<std::optional<TruncNode>> nodes_;
};

inline TruncatedTree truncate(const Tree& tree, int group_binth) {
  if (!tree.eb_annotated()) throw Error("missing EB annotation: run derive_effective_bits first");
  if (group_binth < 1) throw Error("group_binth must be at least 1");

  TruncatedTree out(tree.ruleset_ptr(), tree.binth(), group_binth, tree.size());
  for (const TreeNode& n : tree.nodes()) {
    TruncNode t;
    t.id = n.id;
    t.depth = n.depth;
    t.box = n.box;
    t.rules = n.rules;
    t.action = n.action;
    t.oversized = n.oversized;
    for (int c : n.children) {
      const TreeNode& child = tree.node(c);
      Edge e{c, {}};
      if (n.action.is_cut()) {
        if (!child.eb_pattern) throw Error("missing EB annotation on node " + std::to_string(c));
        e.pattern = EdgePattern::from_index(child.eb_set, *child.eb_pattern);
      }
      t.edges.push_back(std::move(e));
    }
    out.put(std::move(t));
  }

  auto cut_positions = [&](int id) {
    const TreeNode& n = tree.node(id);
    return tree.node(n.children.front()).eb_set;
  };

  auto process = [&](auto&& self, int owner_id) -> void {
    TruncNode& owner = out.node(owner_id);
    if (owner.action.is_cut()) {
      std::vector<BitPos> order = cut_positions(owner_id);
      std::vector<Edge> kept;
      bool spliced_any = false;

      auto expand = [&](auto&& expand_self, Edge edge) -> void {
        const TreeNode& c = tree.node(edge.child);
        if (c.action.is_cut() && c.rules.size() >= static_cast<std::size_t>(group_binth)) {
          const auto bits = cut_positions(c.id);
          std::vector<BitPos> merged = order;
          for (BitPos b : bits)
            if (std::find(merged.begin(), merged.end(), b) == merged.end()) merged.push_back(b);
          if (merged.size() <= kMaxIndexBits) {
            order = std::move(merged);
            spliced_any = true;
            out.spliced.push_back(c.id);
            out.erase(c.id);
            for (int g : c.children) {
              const TreeNode& gn = tree.node(g);
              expand_self(expand_self, Edge{g, edge.pattern.concat(EdgePattern::from_index(gn.eb_set, *gn.eb_pattern))});
            }
            return;
          }
        }
        kept.push_back(std::move(edge));
      };

      std::vector<Edge> initial = std::move(out.node(owner_id).edges);
      for (Edge& e : initial) expand(expand, std::move(e));
      TruncNode& o = out.node(owner_id);
      if (spliced_any) {
        o.multibit = true;
        for (Edge& e : kept) e.pattern = e.pattern.over(order);
      }
      o.edges = std::move(kept);
    }
    std::vector<int> kids;
    for (const Edge& e : out.node(owner_id).edges) kids.push_back(e.child);
    for (int k : kids) self(self, k);
  };
  process(process, out.root_id());

  auto fix_depth = [&](auto&& self, int id, int depth) -> void {
    TruncNode& n = out.node(id);
    n.depth = depth;
    for (const Edge& e : n.edges) self(self, e.child, depth + 1);
  };
  fix_depth(fix_depth, out.root_id(), 0);
  return out;
}

struct LookupTable {
  int owner = -1;
  std::vector<BitPos> positions;
  std::vector<int> entries;  // surviving child id per index
};

struct Engine {
  TruncatedTree tree;
  std::vector<LookupTable> tables;

  const Ruleset& ruleset() const noexcept { return tree.ruleset(); }
  int binth() const noexcept { return tree.binth(); }
};

// Every index in [0, 2^|positions|) consistent with the pattern's fixed bits.
inline std::vector<std::uint32_t> expand_pattern(const EdgePattern& p) {
  const std::size_t k = p.values.size();
  std::uint32_t fixed = 0;
  std::vector<std::uint32_t> free_bits;
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint32_t bit = std::uint32_t{1} << (k - 1 - i);
    if (p.values[i] == TriBit::one) fixed |= bit;
    else if (p.values[i] == TriBit::dont_care) free_bits.push_back(bit);
  }
  std::vector<std::uint32_t> out;
  out.reserve(std::size_t{1} << free_bits.size());
  for (std::uint32_t combo = 0; combo < (std::uint32_t{1} << free_bits.size()); ++combo) {
    std::uint32_t idx = fixed;
    for (std::size_t b = 0; b < free_bits.size(); ++b)
      if ((combo >> b) & 1u) idx |= free_bits[b];
    out.push_back(idx);
  }
  return out;
}

inline Engine build_lookup_tables(TruncatedTree ttree) {
  Engine engine{std::move(ttree), {}};
  for (int id : engine.tree.dfs_order()) {
    TruncNode& n = engine.tree.node(id);
    n.table = -1;
    if (!n.multibit) continue;
    LookupTable table;
    table.owner = id;
    table.positions = n.edges.front().pattern.positions;
    validate_positions(table.positions);
    table.entries.assign(std::size_t{1} << table.positions.size(), -1);
    for (const Edge& e : n.edges) {
      if (e.pattern.positions != table.positions) throw Error("edge patterns of node " + std::to_string(id) + " disagree on positions");
      for (std::uint32_t idx : expand_pattern(e.pattern)) {
        if (table.entries[idx] != -1) throw Error("pattern overlap at node " + std::to_string(id));
        table.entries[idx] = e.child;
      }
    }
    if (std::find(table.entries.begin(), table.entries.end(), -1) != table.entries.end())
      throw Error("lookup table of node " + std::to_string(id) + " has unclaimed entries");
    n.table = static_cast<int>(engine.tables.size());
    engine.tables.push_back(std::move(table));
  }
  return engine;
}

inline ClassifyResult classify_multibit(const Engine& engine, const PacketHeader& h, int id) {
  const TruncNode& n = engine.tree.node(id);
  if (n.is_leaf())
    return {scan_rules(engine.ruleset(), n.rules, h), 1 + leaf_scan_accesses(n.rules.size(), engine.binth())};
  if (n.action.is_cut()) {
    int next;
    if (n.table >= 0) {
      const LookupTable& t = engine.tables[static_cast<std::size_t>(n.table)];
      next = t.entries[extract_index_unchecked(h, t.positions)];
    } else {
      next = n.edges[cut_child_index(n.box, n.action, h)].child;
    }
    auto r = classify_multibit(engine, h, next);
    r.accesses += 1;
    return r;
  }
  ClassifyResult out{std::nullopt, 1};
  for (const Edge& e : n.edges) {
    const auto r = classify_multibit(engine, h, e.child);
    out.rule = better_match(out.rule, r.rule);
    out.accesses += r.accesses;
  }
  return out;
}

inline ClassifyResult classify_multibit(const Engine& engine, const PacketHeader& h) {
  return classify_multibit(engine, h, engine.tree.root_id());
}

namespace detail {

struct EngineView {
  const Engine& engine;
  NodeAction::Kind kind(int id) const { return engine.tree.node(id).action.kind; }
  std::vector<int> children(int id) const {
    std::vector<int> out;
    for (const Edge& e : engine.tree.node(id).edges) out.push_back(e.child);
    return out;
  }
  std::size_t rule_count(int id) const { return engine.tree.node(id).rules.size(); }
  bool oversized(int id) const { return engine.tree.node(id).oversized; }
  std::size_t dispatch_entries(int id) const {
    const TruncNode& n = engine.tree.node(id);
    return n.table >= 0 ? engine.tables[static_cast<std::size_t>(n.table)].entries.size() : n.edges.size();
  }
};

}  // namespace detail

inline Metrics engine_stats(const Engine& engine, const MemoryModel& mm = {}) {
  return detail::structural_metrics(detail::EngineView{engine}, engine.tree.root_id(), engine.binth(),
                                    engine.ruleset().size(), mm);
}

// Annotate (if needed), truncate and build tables in one go.
inline Engine build_engine(Tree tree, int group_binth) {
  if (!tree.eb_annotated()) derive_effective_bits(tree);
  return build_lookup_tables(truncate(tree, group_binth));
}

}  // namespace mbtc
