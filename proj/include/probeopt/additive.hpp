#pragma once

// Additive approximation for equal probing costs: search over the prefix
// classes P(l, i, h) (a single <= i path of at most h probes ending in
// backup l, with no-backup continuations after any observation above i), on
// a copy of the instance whose rewards are rounded down to a grid of width
// (eps / 2) * r_{K-1}.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "probeopt/core.hpp"
#include "probeopt/evaluate.hpp"
#include "probeopt/multi_state.hpp"
#include "probeopt/parallel.hpp"
#include "probeopt/policy.hpp"

namespace probeopt {

inline constexpr double kDefaultCandidateBudget = 1e8;
inline constexpr double kEqualCostTolerance = 1e-12;

/// r''_s = r_s - r_j above the floor state j, 0 at or below it.
inline std::vector<double> shifted_rewards(const Instance& inst, State floor) {
  const auto k = static_cast<State>(inst.num_states());
  if (floor < 0 || floor >= k) {
    throw Error(ErrorCode::LevelOutOfRange, "floor state " + std::to_string(floor) + " outside [0, K-1]");
  }
  std::vector<double> out(inst.num_states(), 0.0);
  for (State s = floor + 1; s < k; ++s) out[static_cast<std::size_t>(s)] = inst.reward(s) - inst.reward(floor);
  return out;
}

/// Channels `channels` of `inst` with every state at or below `floor` merged
/// into state 0 and rewards shifted down by r_floor. The result may have a
/// certain top state, so it is not run through validate_instance.
inline Instance collapsed_instance(const Instance& inst, std::span<const ChannelId> channels, State floor) {
  const std::vector<double> shifted = shifted_rewards(inst, floor);
  const auto k = static_cast<State>(inst.num_states());
  Instance sub;
  sub.rewards.assign(shifted.begin() + floor, shifted.end());
  for (ChannelId j : channels) {
    ChannelStats ch;
    ch.name = inst.channels[j].name;
    ch.cost = inst.cost(j);
    ch.probs.assign(static_cast<std::size_t>(k - floor), 0.0);
    for (State s = 0; s < k; ++s) ch.probs[static_cast<std::size_t>(std::max<State>(0, s - floor))] += inst.prob(j, s);
    sub.channels.push_back(std::move(ch));
  }
  return sub;
}

/// h = 1 + ceil(-log_{1/(1-eps)} eps).
inline std::size_t prefix_depth(double epsilon) {
  return 1 + static_cast<std::size_t>(std::ceil(std::log(epsilon) / std::log1p(-epsilon) - 1e-12));
}

inline void check_equal_costs(const Instance& inst) {
  for (ChannelId j = 1; j < inst.num_channels(); ++j) {
    if (std::abs(inst.cost(j) - inst.cost(0)) > kEqualCostTolerance) {
      throw Error(ErrorCode::UnequalCosts, "channels '" + inst.channels[0].name + "' and '" + inst.channels[j].name +
                                               "' have different probing costs");
    }
  }
}

// Continuation after an observation above the collapse level: OPTNOBKUP over
// the unprobed channels in the system collapsed at the observed state.
struct EscapePlan {
  std::size_t position = 0;        // index in the prefix of the probe that escaped
  State state = 0;                 // observed state, > collapse level
  std::vector<ChannelId> channels; // sub-instance channel -> instance channel
  ThresholdPolicy policy;          // on the collapsed sub-instance
  State sub_states = 1;
  double value = 0.0;              // expected reward above r_state, net of probing
};

struct PrefixTreePolicy {
  Backup backup;
  State collapse = 0;
  std::size_t h = 0;
  std::vector<ChannelId> prefix;
  std::vector<EscapePlan> escapes;
  double gain = -kInf;
  std::uint64_t candidates = 0;
};

namespace detail {

// Exhaustive search over one prefix class with a shared cache of escape
// continuations keyed by (probed set, observed state).
class PrefixSearch {
 public:
  explicit PrefixSearch(const Instance& inst) : inst_(inst) {
    if (inst.num_channels() > 64) throw Error(ErrorCode::TooLarge, "prefix search limited to 64 channels");
  }

  const EscapePlan& escape(std::uint64_t probed, State s) {
    const auto key = std::make_pair(probed, s);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    EscapePlan plan;
    plan.state = s;
    for (ChannelId j = 0; j < inst_.num_channels(); ++j) {
      if (!(probed >> j & 1)) plan.channels.push_back(j);
    }
    plan.sub_states = static_cast<State>(inst_.num_states()) - s;
    if (plan.sub_states > 1 && !plan.channels.empty()) {
      const Instance sub = collapsed_instance(inst_, plan.channels, s);
      plan.policy = reserve_bkup(sub, Backup::none(), Threshold::at(0.0));
      plan.value = evaluate_policy(plan.policy, sub, 0.0).gain;
    } else {
      plan.policy.w = plan.sub_states;
    }
    return cache_.emplace(key, std::move(plan)).first->second;
  }

  PrefixTreePolicy run(Backup backup, State collapse, std::size_t h) {
    backup_ = backup;
    collapse_ = collapse;
    h_ = h;
    best_ = PrefixTreePolicy{};
    best_.backup = backup;
    best_.collapse = collapse;
    best_.h = h;
    if (!backup.is_none()) backup_reward_ = blind_backup_reward(inst_, backup);
    path_.clear();
    std::vector<double> dist(static_cast<std::size_t>(collapse) + 2, 0.0);
    dist[0] = 1.0;
    dfs(0, dist, 1.0, 0.0);

    std::uint64_t probed = 0;
    for (std::size_t t = 0; t < best_.prefix.size(); ++t) {
      const ChannelId x = best_.prefix[t];
      probed |= std::uint64_t{1} << x;
      for (State s = collapse + 1; s < static_cast<State>(inst_.num_states()); ++s) {
        if (inst_.prob(x, s) == 0.0) continue;
        EscapePlan plan = escape(probed, s);
        plan.position = t;
        best_.escapes.push_back(std::move(plan));
      }
    }
    return best_;
  }

 private:
  double end_value(const std::vector<double>& dist, double reach) const {
    if (!backup_.is_none()) return reach * backup_reward_;
    double v = 0.0;
    for (std::size_t b = 1; b < dist.size(); ++b) v += dist[b] * inst_.reward(static_cast<State>(b) - 1);
    return v;
  }

  void dfs(std::uint64_t probed, const std::vector<double>& dist, double reach, double acc) {
    ++best_.candidates;
    if (!backup_.is_none() || !path_.empty()) {
      const double v = acc + end_value(dist, reach);
      if (v > best_.gain + 1e-12 || best_.gain == -kInf) {
        best_.gain = v;
        best_.prefix = path_;
      }
    }
    if (path_.size() >= h_) return;
    if (acc + reach * inst_.top_reward() <= best_.gain + 1e-12 && best_.gain != -kInf) return;

    const auto k = static_cast<State>(inst_.num_states());
    std::vector<double> next(dist.size());
    for (ChannelId x = 0; x < inst_.num_channels(); ++x) {
      if ((probed >> x & 1) || backup_.is(x)) continue;
      const std::uint64_t after = probed | std::uint64_t{1} << x;
      double value = acc - reach * inst_.cost(x);
      double stay = 0.0;
      std::fill(next.begin(), next.end(), 0.0);
      for (State s = 0; s < k; ++s) {
        const double p = inst_.prob(x, s);
        if (p == 0.0) continue;
        if (s <= collapse_) {
          stay += p;
          for (std::size_t b = 0; b < dist.size(); ++b) {
            next[static_cast<std::size_t>(std::max<State>(static_cast<State>(b) - 1, s)) + 1] += dist[b] * p;
          }
        } else {
          value += reach * p * (inst_.reward(s) + escape(after, s).value);
        }
      }
      path_.push_back(x);
      dfs(after, next, reach * stay, value);
      path_.pop_back();
    }
  }

  const Instance& inst_;
  std::map<std::pair<std::uint64_t, State>, EscapePlan> cache_;
  Backup backup_;
  State collapse_ = 0;
  std::size_t h_ = 0;
  double backup_reward_ = 0.0;
  std::vector<ChannelId> path_;
  PrefixTreePolicy best_;
};

// Number of ordered prefixes of length <= h over m channels, saturating.
inline double prefix_count(std::size_t m, std::size_t h) {
  double total = 1.0, term = 1.0;
  for (std::size_t len = 1; len <= std::min(m, h); ++len) {
    term *= static_cast<double>(m - len + 1);
    total += term;
  }
  return total;
}

inline void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw Error(ErrorCode::EpsilonOutOfRange, "epsilon must lie in (0, 1), got " + std::to_string(epsilon));
  }
}

}  // namespace detail

/// The best policy of P(l, i, h) on `inst`, found by exhaustive prefix
/// enumeration with bound-based pruning.
inline PrefixTreePolicy best_in_prefix_class(const Instance& inst, Backup backup, State collapse, std::size_t h,
                                             double budget = kDefaultCandidateBudget) {
  check_equal_costs(inst);
  if (!backup.is_none()) check_channel(inst, backup.id());
  if (collapse < 0 || collapse >= static_cast<State>(inst.num_states())) {
    throw Error(ErrorCode::LevelOutOfRange, "collapse level " + std::to_string(collapse) + " outside [0, K-1]");
  }
  if (h < 1) throw Error(ErrorCode::BadShape, "prefix depth must be at least 1");
  const std::size_t m = inst.num_channels() - (backup.is_none() ? 0 : 1);
  if (detail::prefix_count(m, h) > budget) {
    throw Error(ErrorCode::BudgetExceeded, "prefix enumeration exceeds the candidate budget");
  }
  detail::PrefixSearch search(inst);
  return search.run(backup, collapse, h);
}

/// Builds the decision tree of a prefix policy on `inst`. `group[s]` is the
/// state of the (possibly bucketed) system the policy was computed on for
/// state s of `inst`; the identity when no bucketing took place.
inline DecisionTree to_decision_tree(const Instance& inst, const PrefixTreePolicy& pol, std::span<const State> group) {
  DecisionTree tree;
  const std::size_t k = inst.num_states();
  const std::size_t end = pol.backup.is_none() ? tree.transmit_probed() : tree.transmit_backup(pol.backup.id());
  if (pol.prefix.empty()) {
    tree.root = end;
    return tree;
  }
  std::map<std::pair<std::size_t, State>, std::size_t> escape_root;
  auto escape_node = [&](const EscapePlan& plan) {
    if (plan.policy.probe_count() == 0) return tree.transmit_probed();
    std::vector<State> state_map(k);
    for (std::size_t s = 0; s < k; ++s) state_map[s] = std::max<State>(0, group[s] - plan.state);
    return append_threshold_dag(tree, plan.policy, plan.channels, state_map, plan.sub_states, kNoState,
                                [&](State) { return tree.transmit_probed(); });
  };
  for (const EscapePlan& plan : pol.escapes) escape_root[{plan.position, plan.state}] = escape_node(plan);

  std::size_t next = end;
  for (std::size_t t = pol.prefix.size(); t-- > 0;) {
    std::vector<std::size_t> children(k);
    for (std::size_t s = 0; s < k; ++s) {
      const State g = group[s];
      if (g <= pol.collapse) {
        children[s] = next;
      } else if (auto it = escape_root.find({t, g}); it != escape_root.end()) {
        children[s] = it->second;
      } else {
        children[s] = tree.transmit_probed();  // zero-probability observation
      }
    }
    next = tree.add_probe(pol.prefix[t], std::move(children));
  }
  tree.root = next;
  return tree;
}

inline DecisionTree to_decision_tree(const Instance& inst, const PrefixTreePolicy& pol) {
  std::vector<State> identity(inst.num_states());
  for (std::size_t s = 0; s < identity.size(); ++s) identity[s] = static_cast<State>(s);
  return to_decision_tree(inst, pol, identity);
}

struct Bucketing {
  double width = 0.0;
  std::vector<State> group;  // original state -> bucketed state
  Instance instance;         // bucketed system
};

/// Rounds every reward down to a multiple of width = (eps / 2) r_{K-1} and
/// merges states that land on the same value.
inline Bucketing bucketize(const Instance& inst, double epsilon) {
  detail::check_epsilon(epsilon);
  Bucketing out;
  out.width = 0.5 * epsilon * inst.top_reward();
  out.group.resize(inst.num_states());
  for (std::size_t s = 0; s < inst.num_states(); ++s) {
    double b = out.width * std::floor(inst.rewards[s] / out.width);
    if (b > inst.rewards[s]) b -= out.width;
    if (out.instance.rewards.empty() || b > out.instance.rewards.back()) out.instance.rewards.push_back(b);
    out.group[s] = static_cast<State>(out.instance.rewards.size()) - 1;
  }
  for (const auto& ch : inst.channels) {
    ChannelStats merged{ch.name, ch.cost, std::vector<double>(out.instance.rewards.size(), 0.0)};
    for (std::size_t s = 0; s < inst.num_states(); ++s) merged.probs[static_cast<std::size_t>(out.group[s])] += ch.probs[s];
    out.instance.channels.push_back(std::move(merged));
  }
  return out;
}

struct AdditiveCertificate {
  double epsilon = 0.0;
  std::size_t h = 0;
  std::uint64_t candidates = 0;
  std::size_t bucketed_states = 0;
  bool no_backup_shortcut = false;  // probing cost <= eps r_{K-1}: OPTNOBKUP returned directly
  Backup backup;                    // class of the winning prefix policy
  State collapse = 0;
  double bucketed_gain = 0.0;
};

struct AdditiveResult {
  AnyPolicy policy;
  GainReport report;  // in the original system
  AdditiveCertificate certificate;
};

/// Gain >= OPT - eps r_{K-1} for equal probing costs.
inline AdditiveResult additive_approx(const Instance& inst, double epsilon, double budget = kDefaultCandidateBudget) {
  detail::check_epsilon(epsilon);
  check_equal_costs(inst);
  AdditiveResult out;
  out.certificate.epsilon = epsilon;

  const ThresholdPolicy no_backup = opt_no_bkup(inst);
  out.policy = no_backup;
  out.report = evaluate_policy(no_backup, inst);
  if (inst.cost(0) <= epsilon * inst.top_reward()) {
    out.certificate.no_backup_shortcut = true;
    out.certificate.backup = Backup::none();
    out.certificate.bucketed_gain = out.report.gain;
    return out;
  }

  const Bucketing bucketed = bucketize(inst, epsilon);
  const Instance& sys = bucketed.instance;
  const std::size_t h = prefix_depth(epsilon / 2.0);
  const auto k = static_cast<State>(sys.num_states());
  const std::size_t n = inst.num_channels();
  out.certificate.h = h;
  out.certificate.bucketed_states = sys.num_states();

  double planned = 0.0;
  for (std::size_t l = 0; l <= n; ++l) planned += k * detail::prefix_count(l == 0 ? n : n - 1, h);
  if (planned > budget) throw Error(ErrorCode::BudgetExceeded, "prefix enumeration exceeds the candidate budget");

  // One task per (backup, collapse level); ordered by no backup first, then
  // channel id, then level, which also fixes the tie-break.
  const std::size_t tasks = (n + 1) * static_cast<std::size_t>(k);
  auto results = parallel_map<PrefixTreePolicy>(tasks, [&](std::size_t t) {
    const std::size_t l = t / static_cast<std::size_t>(k);
    const auto i = static_cast<State>(t % static_cast<std::size_t>(k));
    detail::PrefixSearch search(sys);
    return search.run(l == 0 ? Backup::none() : Backup::channel(l - 1), i, h);
  });

  for (const PrefixTreePolicy& cand : results) {
    out.certificate.candidates += cand.candidates;
    if (cand.gain == -kInf) continue;
    DecisionTree tree = to_decision_tree(inst, cand, bucketed.group);
    GainReport rep = evaluate_policy(tree, inst);
    if (rep.gain > out.report.gain + 1e-12) {
      out.policy = std::move(tree);
      out.report = std::move(rep);
      out.certificate.backup = cand.backup;
      out.certificate.collapse = cand.collapse;
      out.certificate.bucketed_gain = cand.gain;
    }
  }
  return out;
}

}  // namespace probeopt
