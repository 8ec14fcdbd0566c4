#pragma once

// JSON documents for trees, engines and training configs.
//
// Tree document:
//   { "format": "mbtc-tree", "version": 1, "binth": 16, "eb_annotated": true,
//     "rules": ["@1.2.3.0/24 ...", ...],
//     "nodes": [ { "id", "parent", "depth", "box": [[lo,hi] x5], "rules": [...],
//                  "action": {"type": "cut"|"partition"|"none", "dim", "count"},
//                  "children": [...], "eb_set": [...], "eb_pattern", "finalized",
//                  "oversized" } ] }
// Engine document:
//   { "format": "mbtc-engine", "version": 1, "binth", "group_binth", "rules",
//     "spliced": [...], "nodes": [ {..., "edges": [{"child", "positions", "pattern": "10xx"}],
//     "multibit", "table"} ], "tables": [ {"owner", "positions", "entries"} ] }

#include <algorithm>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtree.hpp"
#include "mbtrie.hpp"
#include "rlopt.hpp"

namespace mbtc {

using json = nlohmann::json;

namespace detail {

inline json rules_to_json(const Ruleset& rs) {
  json arr = json::array();
  for (const Rule& r : rs.rules) arr.push_back(format_classbench_rule(r));
  return arr;
}

inline std::shared_ptr<const Ruleset> rules_from_json(const json& arr) {
  std::string text;
  for (const auto& line : arr) text += line.get<std::string>() + "\n";
  return std::make_shared<const Ruleset>(parse_classbench(text));
}

inline json box_to_json(const Box& b) {
  json arr = json::array();
  for (const auto& r : b) arr.push_back({r.lo, r.hi});
  return arr;
}

inline Box box_from_json(const json& j) {
  if (!j.is_array() || j.size() != kNumFields) throw Error("box must list 5 ranges");
  Box b;
  for (std::size_t d = 0; d < kNumFields; ++d) {
    b[d] = {j[d].at(0).get<std::uint64_t>(), j[d].at(1).get<std::uint64_t>()};
    if (!b[d].valid_for(d)) throw Error("invalid box range");
  }
  return b;
}

inline json action_to_json(const NodeAction& a) {
  switch (a.kind) {
    case NodeAction::Kind::cut: return {{"type", "cut"}, {"dim", a.dim}, {"count", a.count}};
    case NodeAction::Kind::partition: return {{"type", "partition"}, {"dim", a.dim}};
    default: return {{"type", "none"}};
  }
}

inline NodeAction action_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "none") return NodeAction::none();
  if (type == "cut") return NodeAction::cut(j.at("dim").get<std::size_t>(), j.at("count").get<unsigned>());
  if (type == "partition") return {NodeAction::Kind::partition, j.at("dim").get<std::size_t>(), 2};
  throw Error("unknown action type '" + type + "'");
}

inline void require_format(const json& j, const char* fmt) {
  if (!j.is_object() || j.value("format", "") != fmt) throw Error(std::string("not a ") + fmt + " document");
  if (j.value("version", 0) != 1) throw Error("unsupported document version");
}

}  // namespace detail

inline json tree_to_json(const Tree& tree) {
  json nodes = json::array();
  for (const TreeNode& n : tree.nodes()) {
    json jn = {{"id", n.id},
               {"parent", n.parent},
               {"depth", n.depth},
               {"box", detail::box_to_json(n.box)},
               {"rules", n.rules},
               {"action", detail::action_to_json(n.action)},
               {"children", n.children},
               {"eb_set", n.eb_set},
               {"finalized", n.finalized},
               {"oversized", n.oversized}};
    jn["eb_pattern"] = n.eb_pattern ? json(*n.eb_pattern) : json(nullptr);
    nodes.push_back(std::move(jn));
  }
  return {{"format", "mbtc-tree"},
          {"version", 1},
          {"binth", tree.binth()},
          {"eb_annotated", tree.eb_annotated()},
          {"rules", detail::rules_to_json(tree.ruleset())},
          {"nodes", std::move(nodes)}};
}

inline Tree tree_from_json(const json& j) {
  detail::require_format(j, "mbtc-tree");
  Tree tree(detail::rules_from_json(j.at("rules")), j.at("binth").get<int>());
  for (const auto& jn : j.at("nodes")) {
    TreeNode n;
    n.parent = jn.at("parent").get<int>();
    n.depth = jn.at("depth").get<int>();
    n.box = detail::box_from_json(jn.at("box"));
    n.rules = jn.at("rules").get<std::vector<int>>();
    n.action = detail::action_from_json(jn.at("action"));
    n.children = jn.at("children").get<std::vector<int>>();
    n.eb_set = jn.at("eb_set").get<std::vector<BitPos>>();
    if (!jn.at("eb_pattern").is_null()) n.eb_pattern = jn.at("eb_pattern").get<std::uint32_t>();
    n.finalized = jn.at("finalized").get<bool>();
    n.oversized = jn.at("oversized").get<bool>();
    const int expect = jn.at("id").get<int>();
    if (tree.add_node(std::move(n)) != expect) throw Error("node ids must be dense and in order");
  }
  if (tree.size() == 0) throw Error("tree has no nodes");
  for (const TreeNode& n : tree.nodes())
    for (int c : n.children)
      if (c <= n.id || static_cast<std::size_t>(c) >= tree.size()) throw Error("bad child id " + std::to_string(c));
  tree.set_eb_annotated(j.at("eb_annotated").get<bool>());
  return tree;
}

namespace detail {

inline EdgePattern pattern_from_string(const std::vector<BitPos>& positions, const std::string& s) {
  if (positions.size() != s.size()) throw Error("edge pattern length mismatch");
  EdgePattern p;
  p.positions = positions;
  for (char c : s) {
    if (c == '0') p.values.push_back(TriBit::zero);
    else if (c == '1') p.values.push_back(TriBit::one);
    else if (c == 'x') p.values.push_back(TriBit::dont_care);
    else throw Error("bad edge pattern character");
  }
  return p;
}

}  // namespace detail

inline json engine_to_json(const Engine& engine) {
  const TruncatedTree& t = engine.tree;
  json nodes = json::array();
  for (int id : t.dfs_order()) {
    const TruncNode& n = t.node(id);
    json edges = json::array();
    for (const Edge& e : n.edges)
      edges.push_back({{"child", e.child}, {"positions", e.pattern.positions}, {"pattern", e.pattern.str()}});
    nodes.push_back({{"id", n.id},
                     {"depth", n.depth},
                     {"box", detail::box_to_json(n.box)},
                     {"rules", n.rules},
                     {"action", detail::action_to_json(n.action)},
                     {"edges", std::move(edges)},
                     {"oversized", n.oversized},
                     {"multibit", n.multibit},
                     {"table", n.table}});
  }
  json tables = json::array();
  for (const LookupTable& tb : engine.tables)
    tables.push_back({{"owner", tb.owner}, {"positions", tb.positions}, {"entries", tb.entries}});
  return {{"format", "mbtc-engine"},
          {"version", 1},
          {"binth", t.binth()},
          {"group_binth", t.group_binth()},
          {"capacity", t.capacity()},
          {"rules", detail::rules_to_json(t.ruleset())},
          {"spliced", t.spliced},
          {"nodes", std::move(nodes)},
          {"tables", std::move(tables)}};
}

inline Engine engine_from_json(const json& j) {
  detail::require_format(j, "mbtc-engine");
  TruncatedTree t(detail::rules_from_json(j.at("rules")), j.at("binth").get<int>(), j.at("group_binth").get<int>(),
                  j.at("capacity").get<std::size_t>());
  t.spliced = j.at("spliced").get<std::vector<int>>();
  for (const auto& jn : j.at("nodes")) {
    TruncNode n;
    n.id = jn.at("id").get<int>();
    n.depth = jn.at("depth").get<int>();
    n.box = detail::box_from_json(jn.at("box"));
    n.rules = jn.at("rules").get<std::vector<int>>();
    n.action = detail::action_from_json(jn.at("action"));
    for (const auto& je : jn.at("edges"))
      n.edges.push_back({je.at("child").get<int>(),
                         detail::pattern_from_string(je.at("positions").get<std::vector<BitPos>>(),
                                                     je.at("pattern").get<std::string>())});
    n.oversized = jn.at("oversized").get<bool>();
    n.multibit = jn.at("multibit").get<bool>();
    n.table = jn.at("table").get<int>();
    if (n.id < 0 || static_cast<std::size_t>(n.id) >= t.capacity()) throw Error("bad node id");
    t.put(std::move(n));
  }
  Engine e{std::move(t), {}};
  for (const auto& jt : j.at("tables")) {
    LookupTable tb;
    tb.owner = jt.at("owner").get<int>();
    tb.positions = jt.at("positions").get<std::vector<BitPos>>();
    tb.entries = jt.at("entries").get<std::vector<int>>();
    validate_positions(tb.positions);
    if (tb.entries.size() != (std::size_t{1} << tb.positions.size())) throw Error("table size mismatch");
    for (int c : tb.entries)
      if (!e.tree.alive(c)) throw Error("table entry points at a missing node");
    e.tables.push_back(std::move(tb));
  }
  for (int id : e.tree.dfs_order()) {
    const TruncNode& n = e.tree.node(id);
    if (n.table >= static_cast<int>(e.tables.size())) throw Error("bad table index");
    if (n.action.is_cut() && n.table < 0 && n.edges.size() != n.action.count)
      throw Error("cut node " + std::to_string(id) + " without a table must keep all children");
  }
  return e;
}

inline json train_config_to_json(const TrainConfig& c) {
  return {{"rollouts_per_iteration", c.rollouts_per_iteration},
          {"iterations", c.iterations},
          {"learning_rate", c.learning_rate},
          {"temperature", c.temperature},
          {"epsilon", c.epsilon},
          {"seed", c.seed},
          {"binth", c.binth},
          {"max_depth", c.max_depth},
          {"max_nodes", c.max_nodes},
          {"objective", c.objective.name()},
          {"weight", c.objective.weight}};
}

// Missing keys keep their defaults; unknown keys are rejected.
inline TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw Error("train config must be a JSON object");
  static const std::vector<std::string> known{"rollouts_per_iteration", "iterations", "learning_rate", "temperature",
                                              "epsilon", "seed", "binth", "max_depth", "max_nodes", "objective",
                                              "weight"};
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end()) throw Error("unknown train config key '" + k + "'");
  TrainConfig c;
  c.rollouts_per_iteration = j.value("rollouts_per_iteration", c.rollouts_per_iteration);
  c.iterations = j.value("iterations", c.iterations);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.temperature = j.value("temperature", c.temperature);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.seed = j.value("seed", c.seed);
  c.binth = j.value("binth", c.binth);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.max_nodes = j.value("max_nodes", c.max_nodes);
  c.objective = Objective::parse(j.value("objective", std::string("time")), j.value("weight", 0.5));
  c.validate();
  return c;
}

inline std::string train_log_csv(const std::vector<TrainLogRow>& log) {
  std::string out = "iteration,best_reward,mean_reward\n";
  char buf[128];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%.6g,%.6g\n", r.iteration, r.best_reward, r.mean_reward);
    out += buf;
  }
  return out;
}

inline json load_json(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw Error("'" + path + "': " + e.what());
  }
}

}  // namespace mbtc
