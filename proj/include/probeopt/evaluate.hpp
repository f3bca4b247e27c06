#pragma once

// Exact analytic gain, transmit probability and probing cost of a policy.

#include <optional>
#include <variant>
#include <vector>

#include "probeopt/core.hpp"
#include "probeopt/policy.hpp"

namespace probeopt {

namespace detail {

inline GainReport finish_report(GainReport rep, std::optional<double> altered_x) {
  rep.altered_x = altered_x;
  rep.gain = rep.success_prob - rep.probe_cost - altered_x.value_or(0.0) * rep.transmit_prob;
  return rep;
}

}  // namespace detail

/// O(|levels| * K): propagates the distribution of the best observed state
/// through the probe sequence.
inline GainReport evaluate_policy(const ThresholdPolicy& pol, const Instance& inst,
                                  std::optional<double> altered_x = std::nullopt) {
  check_policy(inst, pol);
  const std::size_t k = inst.num_states();
  // alive[b + 1]: probability mass still probing with best state b
  std::vector<double> alive(k + 1, 0.0), done(k + 1, 0.0), next(k + 1, 0.0);
  alive[0] = 1.0;
  GainReport rep;
  rep.state_mass.assign(k, 0.0);

  auto retire_at_or_above = [&](State level) {
    for (std::size_t b = static_cast<std::size_t>(level) + 1; b <= k; ++b) {
      done[b] += alive[b];
      alive[b] = 0.0;
    }
  };

  for (const auto& level : pol.levels) {
    retire_at_or_above(level.level);
    for (ChannelId j : level.channels) {
      double total = 0.0;
      for (double a : alive) total += a;
      if (total == 0.0) break;
      rep.probe_cost += total * inst.cost(j);
      // new best = max(old best, observed state)
      next[0] = 0.0;
      double below = alive[0];  // mass with best < s
      double cdf = 0.0;         // P(observed <= b)
      for (std::size_t s = 0; s < k; ++s) {
        const double p = inst.channels[j].probs[s];
        cdf += p;
        next[s + 1] = alive[s + 1] * cdf + p * below;
        below += alive[s + 1];
      }
      alive.swap(next);
      retire_at_or_above(level.level);
    }
  }
  for (std::size_t b = 0; b <= k; ++b) done[b] += alive[b];

  const double rb = blind_backup_reward(inst, pol.backup);
  for (std::size_t idx = 0; idx <= k; ++idx) {
    const double mass = done[idx];
    if (mass == 0.0) continue;
    const State best = static_cast<State>(idx) - 1;
    switch (select_action(inst, pol, rb, best)) {
      case Selection::TransmitProbed:
        rep.transmit_prob += mass;
        rep.success_prob += mass * inst.reward(best);
        rep.state_mass[static_cast<std::size_t>(best)] += mass;
        break;
      case Selection::TransmitBackup:
        rep.transmit_prob += mass;
        rep.success_prob += mass * rb;
        for (std::size_t s = 0; s < k; ++s) rep.state_mass[s] += mass * inst.channels[pol.backup.id()].probs[s];
        break;
      case Selection::NoTransmit:
        break;
    }
  }
  return detail::finish_report(std::move(rep), altered_x);
}

/// Memoized over (node, best state); linear in the DAG size times K^2.
inline GainReport evaluate_policy(const DecisionTree& tree, const Instance& inst,
                                  std::optional<double> altered_x = std::nullopt) {
  check_tree(inst, tree);
  const std::size_t k = inst.num_states();
  struct Acc {
    double success = 0.0, transmit = 0.0, cost = 0.0;
    std::vector<double> q;
  };
  std::vector<std::optional<Acc>> memo(tree.nodes.size() * (k + 1));

  auto eval = [&](auto&& self, std::size_t v, State best) -> const Acc& {
    auto& slot = memo[v * (k + 1) + static_cast<std::size_t>(best + 1)];
    if (slot) return *slot;
    Acc acc;
    acc.q.assign(k, 0.0);
    const TreeNode& node = tree.nodes[v];
    switch (node.kind) {
      case NodeKind::Probe:
        acc.cost = inst.cost(node.channel);
        for (std::size_t s = 0; s < k; ++s) {
          const double p = inst.channels[node.channel].probs[s];
          if (p == 0.0) continue;
          const Acc& child = self(self, node.children[s], std::max(best, static_cast<State>(s)));
          acc.success += p * child.success;
          acc.transmit += p * child.transmit;
          acc.cost += p * child.cost;
          for (std::size_t i = 0; i < k; ++i) acc.q[i] += p * child.q[i];
        }
        break;
      case NodeKind::TransmitProbed:
        if (best < 0) throw Error(ErrorCode::InvalidPolicy, "transmit-probed leaf reachable before any probe");
        acc.success = inst.reward(best);
        acc.transmit = 1.0;
        acc.q[static_cast<std::size_t>(best)] = 1.0;
        break;
      case NodeKind::TransmitBackup:
        acc.success = blind_backup_reward(inst, Backup::channel(node.channel));
        acc.transmit = 1.0;
        acc.q = inst.channels[node.channel].probs;
        break;
      case NodeKind::NoTransmit:
        break;
    }
    slot = std::move(acc);
    return *slot;
  };

  const Acc& root = eval(eval, tree.root, kNoState);
  GainReport rep;
  rep.success_prob = root.success;
  rep.transmit_prob = root.transmit;
  rep.probe_cost = root.cost;
  rep.state_mass = root.q;
  return detail::finish_report(std::move(rep), altered_x);
}

inline GainReport evaluate_policy(const ExhaustPolicy& pol, const Instance& inst,
                                  std::optional<double> altered_x = std::nullopt) {
  return evaluate_policy(to_threshold_policy(inst, pol), inst, altered_x);
}

inline GainReport evaluate_policy(const AnyPolicy& pol, const Instance& inst,
                                  std::optional<double> altered_x = std::nullopt) {
  return std::visit([&](const auto& p) { return evaluate_policy(p, inst, altered_x); }, pol);
}

}  // namespace probeopt
