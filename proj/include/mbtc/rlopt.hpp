#pragma once

// Tree-building environment, branch-aggregated rewards and a policy-search
// trainer.
//
// Each acted node is a 1-step decision whose reward is only known once its
// subtree is complete. Under the time objective a leaf is worth -1, a cut
// node -(1 + worst child) and a partition node -(1 + sum of children), so
// the root reward is minus the worst-case node path of the finished tree.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dtree.hpp"

namespace mbtc {

struct Objective {
  enum class Kind : std::uint8_t { time, space, combined };
  Kind kind = Kind::time;
  double weight = 0.5;  // share of the time term when combined

  static Objective time() { return {Kind::time, 1.0}; }
  static Objective space() { return {Kind::space, 0.0}; }
  static Objective combined(double w) {
    if (!(w >= 0.0 && w <= 1.0)) throw Error("objective weight must lie in [0, 1]");
    return {Kind::combined, w};
  }
  static Objective parse(const std::string& s, double w = 0.5) {
    if (s == "time") return time();
    if (s == "space") return space();
    if (s == "combined") return combined(w);
    throw Error("unknown objective '" + s + "'");
  }
  std::string name() const { return kind == Kind::time ? "time" : kind == Kind::space ? "space" : "combined"; }
};

inline constexpr std::size_t kObservationSize = 2 * kNumFields + 2;
using Observation = std::array<double, kObservationSize>;

// Box bounds over field span, rule count over ruleset size, depth over max_depth.
inline Observation observe(const Tree& tree, int id, int max_depth) {
  const TreeNode& n = tree.node(id);
  Observation o{};
  for (std::size_t d = 0; d < kNumFields; ++d) {
    const double span = static_cast<double>(field_span(d));
    o[2 * d] = static_cast<double>(n.box[d].lo) / span;
    o[2 * d + 1] = static_cast<double>(n.box[d].hi) / span;
  }
  o[2 * kNumFields] = static_cast<double>(n.rules.size()) / static_cast<double>(tree.ruleset().size());
  o[2 * kNumFields + 1] = max_depth > 0 ? static_cast<double>(n.depth) / max_depth : 0.0;
  return o;
}

struct DecisionRecord {
  int node = -1;
  Observation observation{};
  NodeAction action;
  double reward = 0;  // filled once the tree is complete
};

struct EnvState {
  Tree tree;
  std::vector<int> frontier;  // unacted nodes above binth
  std::vector<DecisionRecord> records;
  int max_depth = 0;

  bool done() const noexcept { return frontier.empty(); }
};

// Rule count of each child a cut would create.
inline std::vector<std::size_t> cut_child_counts(const Tree& tree, int id, std::size_t dim, unsigned count) {
  const TreeNode& n = tree.node(id);
  const FieldRange& range = n.box[dim];
  const std::uint64_t sub = range.width() / count;
  std::vector<long> diff(count + 1, 0);
  for (int rid : n.rules) {
    const FieldRange& r = tree.ruleset()[static_cast<std::size_t>(rid)].ranges[dim];
    const std::uint64_t lo = std::max(r.lo, range.lo);
    const std::uint64_t hi = std::min(r.hi, range.hi);
    diff[(lo - range.lo) / sub] += 1;
    diff[(hi - 1 - range.lo) / sub + 1] -= 1;
  }
  std::vector<std::size_t> out(count);
  long run = 0;
  for (unsigned c = 0; c < count; ++c) out[c] = static_cast<std::size_t>(run += diff[c]);
  return out;
}

// Masked action set: well-formed cuts that shrink every child below the
// parent, and non-degenerate partitions.
inline std::vector<NodeAction> valid_actions(const Tree& tree, int id) {
  std::vector<NodeAction> out;
  const TreeNode& n = tree.node(id);
  for (std::size_t d = 0; d < kNumFields; ++d) {
    for (unsigned c : kCutCounts) {
      if (cut_violation(tree, id, d, c)) continue;
      const auto counts = cut_child_counts(tree, id, d, c);
      if (*std::max_element(counts.begin(), counts.end()) < n.rules.size()) out.push_back(NodeAction::cut(d, c));
    }
  }
  if (n.rules.size() >= 2 && partition_key(tree, id)) out.push_back(NodeAction::partition());
  return out;
}

namespace detail {

inline void settle(EnvState& s, int id) {
  Tree& t = s.tree;
  if (t.leaf_eligible(id) || t.node(id).depth >= s.max_depth || valid_actions(t, id).empty()) {
    t.finalize_leaf(id);
    return;
  }
  s.frontier.push_back(id);
}

}  // namespace detail

inline EnvState env_reset(std::shared_ptr<const Ruleset> ruleset, int binth, int max_depth) {
  if (max_depth < 0) throw Error("max_depth must be non-negative");
  EnvState s{root_node(std::move(ruleset), binth), {}, {}, max_depth};
  detail::settle(s, s.tree.root_id());
  return s;
}

inline EnvState& env_step(EnvState& s, int id, const NodeAction& action) {
  const auto it = std::find(s.frontier.begin(), s.frontier.end(), id);
  if (it == s.frontier.end()) throw Error("node " + std::to_string(id) + " is not in the frontier");
  const auto allowed = valid_actions(s.tree, id);
  if (std::find(allowed.begin(), allowed.end(), action) == allowed.end()) throw Error("action is masked for this node");
  s.frontier.erase(it);
  s.records.push_back({id, observe(s.tree, id, s.max_depth), action, 0});
  const auto kids = apply_action(s.tree, id, action);
  s.records.back().action = s.tree.node(id).action;
  // Reverse so the first child is expanded first when the frontier is used as a stack.
  for (auto k = kids.rbegin(); k != kids.rend(); ++k) detail::settle(s, *k);
  return s;
}

// Reward of every acted node; leaves get no entry.
inline std::map<int, double> compute_rewards(const Tree& tree, const Objective& objective) {
  if (!tree.is_finalized()) throw Error("tree is not finalized");
  const std::size_t n = tree.size();
  std::vector<double> time(n, 0), space(n, 0);
  // Children always have larger ids than their parent.
  for (std::size_t i = n; i-- > 0;) {
    const TreeNode& node = tree.node(static_cast<int>(i));
    if (node.is_leaf()) {
      time[i] = 1;
      space[i] = 1;
      continue;
    }
    double agg = 0, nodes = 1;
    for (int c : node.children) {
      const auto k = static_cast<std::size_t>(c);
      agg = node.action.is_partition() ? agg + time[k] : std::max(agg, time[k]);
      nodes += space[k];
    }
    time[i] = 1 + agg;
    space[i] = nodes;
  }
  std::map<int, double> out;
  const double time_root = time[0], space_root = space[0];
  for (std::size_t i = 0; i < n; ++i) {
    if (tree.node(static_cast<int>(i)).is_leaf()) continue;
    double r = 0;
    switch (objective.kind) {
      case Objective::Kind::time: r = -time[i]; break;
      case Objective::Kind::space: r = -space[i]; break;
      case Objective::Kind::combined:
        r = -(objective.weight * time[i] / time_root + (1 - objective.weight) * space[i] / space_root);
        break;
    }
    out[static_cast<int>(i)] = r;
  }
  return out;
}

// Reward of a whole tree: the root's reward, or the leaf value for a
// single-leaf tree.
inline double root_reward(const Tree& tree, const Objective& objective) {
  const auto rewards = compute_rewards(tree, objective);
  if (rewards.empty()) return -1.0;
  return rewards.at(tree.root_id());
}

inline void assign_rewards(std::vector<DecisionRecord>& records, const std::map<int, double>& rewards) {
  for (auto& r : records) r.reward = rewards.at(r.node);
}

// ---------------------------------------------------------------------------
// Policy

inline constexpr std::size_t kPolicyFeatures = 7;
using ActionFeatures = std::array<double, kPolicyFeatures>;

// Per-action features computed from the children the action would create:
// largest child share, mean child share, log replication, empty-child share,
// cut fan-out, a partition indicator, and the levels the largest child still
// needs at 32-way fan-out before it fits in a leaf.
inline ActionFeatures action_features(const Tree& tree, int id, const NodeAction& a) {
  const TreeNode& n = tree.node(id);
  const double parent = static_cast<double>(n.rules.size());
  std::vector<std::size_t> counts;
  if (a.is_cut()) {
    counts = cut_child_counts(tree, id, a.dim, a.count);
  } else {
    const auto key = partition_key(tree, id);
    const auto [large, small] = partition_split(tree, id, key.value_or(0));
    counts = {large.size(), small.size()};
  }
  double mx = 0, sum = 0, empty = 0;
  for (std::size_t c : counts) {
    mx = std::max(mx, static_cast<double>(c));
    sum += static_cast<double>(c);
    if (c == 0) empty += 1;
  }
  const double k = static_cast<double>(counts.size());
  return {mx / parent,
          sum / k / parent,
          std::log2(std::max(sum, 1.0) / parent),
          empty / k,
          a.is_cut() ? std::log2(static_cast<double>(a.count)) / 5.0 : 0.0,
          a.is_partition() ? 1.0 : 0.0,
          std::max(0.0, std::log2(mx / tree.binth())) / 5.0};
}

// Softmax over w . features, mixed with epsilon-uniform exploration.
struct LinearPolicy {
  ActionFeatures weights{-4.0, 0.0, -1.0, 0.0, 0.0, 0.0, -2.0};
  double temperature = 1.0;
  double epsilon = 0.1;

  std::vector<double> probabilities(const std::vector<ActionFeatures>& feats, bool greedy = false) const {
    const std::size_t n = feats.size();
    std::vector<double> p(n, 0.0);
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (std::size_t f = 0; f < kPolicyFeatures; ++f) s += weights[f] * feats[i][f];
      score[i] = s / temperature;
    }
    if (greedy) {
      p[static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin())] = 1.0;
      return p;
    }
    const double top = *std::max_element(score.begin(), score.end());
    double z = 0;
    for (std::size_t i = 0; i < n; ++i) z += (p[i] = std::exp(score[i] - top));
    for (double& v : p) v = (1 - epsilon) * v / z + epsilon / static_cast<double>(n);
    return p;
  }
};

struct TrainConfig {
  int rollouts_per_iteration = 8;
  int iterations = 30;
  double learning_rate = 0.5;
  double temperature = 1.0;
  double epsilon = 0.1;
  std::uint64_t seed = 1;
  int binth = 16;
  int max_depth = 24;
  std::size_t max_nodes = 50000;  // a rollout growing past this is discarded
  Objective objective = Objective::time();

  void validate() const {
    if (rollouts_per_iteration < 1 || iterations < 1) throw Error("rollout and iteration counts must be positive");
    if (binth < 1) throw Error("binth must be at least 1");
    if (max_depth < 1) throw Error("max_depth must be at least 1");
    if (!(temperature > 0) || !(learning_rate > 0)) throw Error("temperature and learning rate must be positive");
    if (!(epsilon >= 0 && epsilon <= 1)) throw Error("epsilon must lie in [0, 1]");
    if (max_nodes < 1) throw Error("max_nodes must be positive");
    if (objective.kind == Objective::Kind::combined && !(objective.weight >= 0 && objective.weight <= 1))
      throw Error("objective weight must lie in [0, 1]");
  }
};

struct TrainLogRow {
  int iteration = 0;
  double best_reward = 0;
  double mean_reward = 0;
};

struct TrainResult {
  Tree tree;
  double best_reward = 0;
  std::vector<TrainLogRow> log;
  LinearPolicy policy;
};

struct Rollout {
  EnvState state;
  std::vector<std::vector<ActionFeatures>> candidates;  // per record
  std::vector<std::size_t> chosen;
  bool failed = false;
  double reward = 0;
};

// One complete tree under `policy`. Deterministic for a given rng state.
inline Rollout run_rollout(const std::shared_ptr<const Ruleset>& ruleset, const TrainConfig& cfg,
                           const LinearPolicy& policy, std::mt19937_64& rng, bool greedy) {
  Rollout ro{env_reset(ruleset, cfg.binth, cfg.max_depth), {}, {}, false, 0};
  EnvState& s = ro.state;
  while (!s.done()) {
    if (s.tree.size() > cfg.max_nodes) {
      ro.failed = true;
      for (int id : s.frontier) s.tree.finalize_leaf(id);
      s.frontier.clear();
      break;
    }
    const int id = s.frontier.back();
    const auto actions = valid_actions(s.tree, id);
    std::vector<ActionFeatures> feats;
    feats.reserve(actions.size());
    for (const auto& a : actions) feats.push_back(action_features(s.tree, id, a));
    const auto probs = policy.probabilities(feats, greedy);
    std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
    const std::size_t choice = pick(rng);
    env_step(s, id, actions[choice]);
    ro.candidates.push_back(std::move(feats));
    ro.chosen.push_back(choice);
  }
  assign_rewards(s.records, compute_rewards(s.tree, cfg.objective));
  ro.reward = root_reward(s.tree, cfg.objective);
  return ro;
}

// Reward-weighted policy search over per-node decisions. Each iteration
// samples rollouts (the first one acts greedily under the current policy),
// scores every decision against the median reward of decisions on nodes of
// similar size, and moves the policy toward the above-median ones.
inline TrainResult train(std::shared_ptr<const Ruleset> ruleset, const TrainConfig& cfg) {
  cfg.validate();
  ruleset->validate();
  LinearPolicy policy;
  policy.temperature = cfg.temperature;
  policy.epsilon = cfg.epsilon;

  std::optional<Tree> best;
  double best_reward = 0;
  std::vector<TrainLogRow> log;

  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<Rollout> rollouts;
    rollouts.reserve(static_cast<std::size_t>(cfg.rollouts_per_iteration));
    for (int r = 0; r < cfg.rollouts_per_iteration; ++r) {
      std::seed_seq seq{cfg.seed, static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(r)};
      std::mt19937_64 rng(seq);
      rollouts.push_back(run_rollout(ruleset, cfg, policy, rng, r == 0));
    }

    double sum = 0;
    int ok = 0;
    for (const auto& ro : rollouts) {
      if (ro.failed) continue;
      sum += ro.reward;
      ++ok;
      if (!best || ro.reward > best_reward) {
        best = ro.state.tree;
        best_reward = ro.reward;
      }
    }

    // Decisions are compared within buckets of nodes with similar rule counts.
    std::map<int, std::vector<double>> buckets;
    auto bucket_of = [&](const Rollout& ro, std::size_t i) {
      return static_cast<int>(std::log2(static_cast<double>(ro.state.tree.node(ro.state.records[i].node).rules.size())));
    };
    for (const auto& ro : rollouts)
      if (!ro.failed)
        for (std::size_t i = 0; i < ro.state.records.size(); ++i)
          buckets[bucket_of(ro, i)].push_back(ro.state.records[i].reward);
    std::map<int, double> median;
    for (auto& [b, v] : buckets) {
      std::sort(v.begin(), v.end());
      median[b] = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    }

    ActionFeatures grad{};
    std::size_t samples = 0;
    for (const auto& ro : rollouts) {
      for (std::size_t i = 0; i < ro.state.records.size(); ++i) {
        double adv;
        if (ro.failed) {
          adv = -1;
        } else {
          const double diff = ro.state.records[i].reward - median[bucket_of(ro, i)];
          adv = diff > 0 ? 1 : diff < 0 ? -1 : 0;
        }
        ++samples;
        if (adv == 0) continue;
        const auto& feats = ro.candidates[i];
        const auto probs = policy.probabilities(feats);
        for (std::size_t f = 0; f < kPolicyFeatures; ++f) {
          double expected = 0;
          for (std::size_t a = 0; a < feats.size(); ++a) expected += probs[a] * feats[a][f];
          grad[f] += adv * (feats[ro.chosen[i]][f] - expected) / policy.temperature;
        }
      }
    }
    if (samples > 0)
      for (std::size_t f = 0; f < kPolicyFeatures; ++f)
        policy.weights[f] += cfg.learning_rate * grad[f] / static_cast<double>(samples);

    log.push_back({it, best ? best_reward : 0.0, ok ? sum / ok : 0.0});
  }

  if (!best) {
    // Every rollout overran the node budget; fall back to the greedy baseline.
    best = build_greedy(ruleset, cfg.binth, cfg.max_depth);
    best_reward = root_reward(*best, cfg.objective);
  }
  return {std::move(*best), best_reward, std::move(log), policy};
}

inline TrainResult train(const Ruleset& ruleset, const TrainConfig& cfg) {
  return train(std::make_shared<const Ruleset>(ruleset), cfg);
}

}  // namespace mbtc
