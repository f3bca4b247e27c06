#pragma once

// Executable policy representations.
//
//  * ThresholdPolicy: backup, transmission threshold and per-level ordered
//    probe lists. Compact (O(n) storage) and evaluated in O(nK).
//  * DecisionTree: explicit adaptive tree. Nodes may be shared (the tree is
//    stored as a DAG), which keeps oracle outputs at O(K 2^n) nodes.
//  * ExhaustPolicy: the two-state EXHAUST(S, i) class.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "probeopt/core.hpp"

namespace probeopt {

struct ProbeLevel {
  State level = 0;
  std::vector<ChannelId> channels;  // probe order within the level
};

struct ThresholdPolicy {
  Backup backup;
  Threshold threshold;
  State w = 0;                      // lowest level that is ever probed
  std::vector<ProbeLevel> levels;   // strictly decreasing level, K-1 down to w

  std::size_t probe_count() const {
    std::size_t n = 0;
    for (const auto& l : levels) n += l.channels.size();
    return n;
  }
};

struct ExhaustPolicy {
  std::vector<ChannelId> probe_order;
  ChannelId backup = 0;
};

enum class NodeKind { Probe, TransmitProbed, TransmitBackup, NoTransmit };

struct TreeNode {
  NodeKind kind = NodeKind::NoTransmit;
  ChannelId channel = 0;              // probed channel, or backup channel
  std::vector<std::size_t> children;  // one per state, Probe nodes only
};

// TransmitProbed leaves send on the probed channel with the highest observed
// state; the reward is read from the execution path, not stored in the node.
class DecisionTree {
 public:
  std::vector<TreeNode> nodes;
  std::size_t root = 0;

  std::size_t add_probe(ChannelId channel, std::vector<std::size_t> children) {
    nodes.push_back({NodeKind::Probe, channel, std::move(children)});
    return nodes.size() - 1;
  }

  // Leaves are deduplicated so that equal actions share one node.
  std::size_t transmit_probed() { return leaf(NodeKind::TransmitProbed, 0); }
  std::size_t transmit_backup(ChannelId channel) { return leaf(NodeKind::TransmitBackup, channel); }
  std::size_t no_transmit() { return leaf(NodeKind::NoTransmit, 0); }

  std::size_t probe_node_count() const {
    std::size_t n = 0;
    for (const auto& node : nodes) n += node.kind == NodeKind::Probe;
    return n;
  }

 private:
  std::size_t leaf(NodeKind kind, ChannelId channel) {
    const auto key = std::make_pair(static_cast<int>(kind), channel);
    if (auto it = leaves_.find(key); it != leaves_.end()) return it->second;
    nodes.push_back({kind, channel, {}});
    leaves_.emplace(key, nodes.size() - 1);
    return nodes.size() - 1;
  }

  std::map<std::pair<int, ChannelId>, std::size_t> leaves_;
};

using AnyPolicy = std::variant<ThresholdPolicy, DecisionTree>;

enum class Selection { TransmitProbed, TransmitBackup, NoTransmit };

/// Selection rule of a threshold policy once probing stops with best state b.
inline Selection select_action(const Instance& inst, const ThresholdPolicy& pol, double backup_reward, State best) {
  const double rb = inst.reward(best);
  if (!pol.threshold.admits(std::max(rb, backup_reward))) return Selection::NoTransmit;
  if (rb >= backup_reward) return best >= 0 ? Selection::TransmitProbed : Selection::NoTransmit;
  return Selection::TransmitBackup;
}

/// Structural checks shared by evaluation and execution of threshold policies.
inline void check_policy(const Instance& inst, const ThresholdPolicy& pol) {
  const auto k = static_cast<State>(inst.num_states());
  std::vector<char> seen(inst.num_channels(), 0);
  if (!pol.backup.is_none()) check_channel(inst, pol.backup.id());
  State prev = k;
  for (const auto& level : pol.levels) {
    if (level.level < 0 || level.level >= k) {
      throw Error(ErrorCode::LevelOutOfRange, "probe level " + std::to_string(level.level));
    }
    if (level.level >= prev) throw Error(ErrorCode::InvalidPolicy, "levels must be strictly decreasing");
    prev = level.level;
    for (ChannelId j : level.channels) {
      check_channel(inst, j);
      if (seen[j] || pol.backup.is(j)) {
        throw Error(ErrorCode::RepeatedProbe, "channel '" + inst.channels[j].name + "' probed twice or also backup");
      }
      seen[j] = 1;
    }
  }
}

inline ThresholdPolicy to_threshold_policy(const Instance& inst, const ExhaustPolicy& ex) {
  if (inst.num_states() != 2) throw Error(ErrorCode::WrongK, "EXHAUST policies need K = 2");
  ThresholdPolicy pol;
  pol.backup = Backup::channel(ex.backup);
  pol.w = 1;
  pol.levels.push_back({1, ex.probe_order});
  check_policy(inst, pol);
  return pol;
}

/// Appends the DAG of a threshold policy to `tree` and returns its root.
///
/// The policy may live on a derived instance: `channel_map` sends policy
/// channel ids to tree channel ids and `state_map` sends a tree-level state to
/// the policy's state space (several tree states may collapse into one).
/// `leaf` builds the terminal node for a final policy-space best state.
template <class LeafFn>
std::size_t append_threshold_dag(DecisionTree& tree, const ThresholdPolicy& pol,
                                 std::span<const ChannelId> channel_map, std::span<const State> state_map,
                                 State policy_states, State initial_best, LeafFn&& leaf) {
  std::vector<std::pair<ChannelId, State>> seq;
  for (const auto& level : pol.levels) {
    for (ChannelId j : level.channels) seq.emplace_back(j, level.level);
  }
  const auto width = static_cast<std::size_t>(policy_states + 1);
  std::vector<std::size_t> memo((seq.size() + 1) * width, static_cast<std::size_t>(-1));

  auto build = [&](auto&& self, std::size_t t, State best) -> std::size_t {
    std::size_t& slot = memo[t * width + static_cast<std::size_t>(best + 1)];
    if (slot != static_cast<std::size_t>(-1)) return slot;
    std::size_t id;
    if (t == seq.size() || best >= seq[t].second) {
      id = leaf(best);
    } else {
      std::vector<std::size_t> children(state_map.size());
      for (std::size_t s = 0; s < state_map.size(); ++s) {
        children[s] = self(self, t + 1, std::max(best, state_map[s]));
      }
      id = tree.add_probe(channel_map[seq[t].first], std::move(children));
    }
    memo[t * width + static_cast<std::size_t>(best + 1)] = id;
    return id;
  };
  return build(build, 0, initial_best);
}

inline DecisionTree to_decision_tree(const Instance& inst, const ThresholdPolicy& pol) {
  check_policy(inst, pol);
  const auto k = static_cast<State>(inst.num_states());
  std::vector<ChannelId> ids(inst.num_channels());
  for (ChannelId j = 0; j < ids.size(); ++j) ids[j] = j;
  std::vector<State> states(inst.num_states());
  for (State s = 0; s < k; ++s) states[static_cast<std::size_t>(s)] = s;
  const double rb = blind_backup_reward(inst, pol.backup);

  DecisionTree tree;
  tree.root = append_threshold_dag(tree, pol, ids, states, k, kNoState, [&](State best) {
    switch (select_action(inst, pol, rb, best)) {
      case Selection::TransmitProbed: return tree.transmit_probed();
      case Selection::TransmitBackup: return tree.transmit_backup(pol.backup.id());
      case Selection::NoTransmit: break;
    }
    return tree.no_transmit();
  });
  return tree;
}

/// Structural validity of a decision tree against an instance: arity, ids,
/// acyclicity, no channel probed twice on a path, backups unprobed on their
/// path. Works on the DAG directly (never expands it).
inline void check_tree(const Instance& inst, const DecisionTree& tree) {
  const std::size_t n = inst.num_channels();
  const std::size_t count = tree.nodes.size();
  if (tree.root >= count) throw Error(ErrorCode::InvalidPolicy, "root id out of range");
  // below[v]: channels probed in v's subtree; backs[v]: backup channels used in it.
  std::vector<std::vector<char>> below(count), backs(count);
  std::vector<int> mark(count, 0);  // 0 new, 1 on stack, 2 done

  auto visit = [&](auto&& self, std::size_t v) -> void {
    if (mark[v] == 2) return;
    if (mark[v] == 1) throw Error(ErrorCode::InvalidPolicy, "decision tree contains a cycle");
    mark[v] = 1;
    const TreeNode& node = tree.nodes[v];
    below[v].assign(n, 0);
    backs[v].assign(n, 0);
    switch (node.kind) {
      case NodeKind::Probe: {
        check_channel(inst, node.channel);
        if (node.children.size() != inst.num_states()) {
          throw Error(ErrorCode::InvalidPolicy, "probe node needs one child per state");
        }
        for (std::size_t c : node.children) {
          if (c >= count) throw Error(ErrorCode::InvalidPolicy, "child id out of range");
          self(self, c);
          if (below[c][node.channel]) {
            throw Error(ErrorCode::RepeatedProbe, "channel '" + inst.channels[node.channel].name + "' probed twice on a path");
          }
          if (backs[c][node.channel]) {
            throw Error(ErrorCode::InvalidPolicy,
                        "channel '" + inst.channels[node.channel].name + "' used as backup after being probed");
          }
          for (std::size_t j = 0; j < n; ++j) {
            below[v][j] |= below[c][j];
            backs[v][j] |= backs[c][j];
          }
        }
        below[v][node.channel] = 1;
        break;
      }
      case NodeKind::TransmitBackup:
        check_channel(inst, node.channel);
        backs[v][node.channel] = 1;
        break;
      default:
        if (!node.children.empty()) throw Error(ErrorCode::InvalidPolicy, "leaf with children");
        break;
    }
    mark[v] = 2;
  };
  visit(visit, tree.root);
}

/// Result of running one policy for one slot.
struct SlotOutcome {
  bool transmitted = false;
  bool used_backup = false;
  ChannelId channel = 0;
  State state = kNoState;  // state of the channel transmitted on
  double probe_cost = 0.0;
  std::vector<std::pair<ChannelId, State>> probed;  // (channel, observed state), only when tracing
};

// `sample(j)` draws the state of channel j; it is called once per probe and
// once for a backup transmission.
template <class Sampler>
SlotOutcome run_slot(const Instance& inst, const ThresholdPolicy& pol, double backup_reward, Sampler&& sample,
                     bool trace = false) {
  SlotOutcome out;
  State best = kNoState;
  ChannelId best_channel = 0;
  for (const auto& level : pol.levels) {
    if (best >= level.level) break;
    for (ChannelId j : level.channels) {
      if (best >= level.level) break;
      const State s = sample(j);
      out.probe_cost += inst.cost(j);
      if (trace) out.probed.emplace_back(j, s);
      if (s > best) {
        best = s;
        best_channel = j;
      }
    }
  }
  switch (select_action(inst, pol, backup_reward, best)) {
    case Selection::TransmitProbed:
      out.transmitted = true;
      out.channel = best_channel;
      out.state = best;
      break;
    case Selection::TransmitBackup:
      out.transmitted = true;
      out.used_backup = true;
      out.channel = pol.backup.id();
      out.state = sample(pol.backup.id());
      break;
    case Selection::NoTransmit:
      break;
  }
  return out;
}

template <class Sampler>
SlotOutcome run_slot(const Instance& inst, const DecisionTree& tree, Sampler&& sample, bool trace = false) {
  SlotOutcome out;
  State best = kNoState;
  ChannelId best_channel = 0;
  std::size_t v = tree.root;
  while (tree.nodes[v].kind == NodeKind::Probe) {
    const TreeNode& node = tree.nodes[v];
    const State s = sample(node.channel);
    out.probe_cost += inst.cost(node.channel);
    if (trace) out.probed.emplace_back(node.channel, s);
    if (s > best) {
      best = s;
      best_channel = node.channel;
    }
    v = node.children[static_cast<std::size_t>(s)];
  }
  const TreeNode& leaf = tree.nodes[v];
  if (leaf.kind == NodeKind::TransmitProbed) {
    if (best < 0) throw Error(ErrorCode::InvalidPolicy, "transmit-probed leaf reached before any probe");
    out.transmitted = true;
    out.channel = best_channel;
    out.state = best;
  } else if (leaf.kind == NodeKind::TransmitBackup) {
    out.transmitted = true;
    out.used_backup = true;
    out.channel = leaf.channel;
    out.state = sample(leaf.channel);
  }
  return out;
}

}  // namespace probeopt
