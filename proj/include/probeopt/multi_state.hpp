#pragma once

// Threshold-structured policies for K >= 2: level sets H_{u,l,x}, the lowest
// probed level w_{l,x}, RESERVEBKUP(l, x) and BESTRESERVEBKUP(x). The
// saturated case is Threshold::none().

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

#include "probeopt/core.hpp"
#include "probeopt/evaluate.hpp"
#include "probeopt/policy.hpp"

namespace probeopt {

/// min { u : r_u > max(r~_l[0], x) }, or K when no state qualifies.
inline State compute_w(const Instance& inst, Backup backup, Threshold threshold) {
  const double floor = threshold.floor(blind_backup_reward(inst, backup));
  const auto k = static_cast<State>(inst.num_states());
  for (State u = 0; u < k; ++u) {
    if (inst.reward(u) > floor) return u;
  }
  return k;
}

// Precomputes everything about an instance that does not depend on the
// backup or the threshold: tail statistics, probing scores per level and, for
// each level, the channels sorted by non-increasing score (ties: lower id).
// Planning one RESERVEBKUP(l, x) is then O(nK) with no sorting.
class ReservePlanner {
 public:
  explicit ReservePlanner(Instance inst) : inst_(std::move(inst)), tails_(inst_) {
    const std::size_t n = inst_.num_channels(), k = inst_.num_states();
    score_.resize(n * k);
    order_.resize(k);
    for (std::size_t u = 0; u < k; ++u) {
      for (ChannelId j = 0; j < n; ++j) score_[j * k + u] = tails_.score(inst_, j, u);
      auto& ord = order_[u];
      ord.resize(n);
      std::iota(ord.begin(), ord.end(), ChannelId{0});
      std::stable_sort(ord.begin(), ord.end(),
                       [&](ChannelId a, ChannelId b) { return score_[a * k + u] > score_[b * k + u]; });
    }
  }

  const Instance& instance() const { return inst_; }
  const TailTable& tails() const { return tails_; }
  double score(ChannelId j, State u) const { return score_[j * inst_.num_states() + static_cast<std::size_t>(u)]; }

  double backup_reward(Backup backup) const { return backup.is_none() ? -1.0 : tails_.blind(backup.id()); }

  /// Membership bound for level u: max(r~_l[0], r_{u-1}, x).
  double level_bound(Backup backup, Threshold threshold, State u) const {
    return threshold.floor(std::max(backup_reward(backup), inst_.reward(u - 1)));
  }

  ThresholdPolicy plan(Backup backup, Threshold threshold) const {
    if (!backup.is_none()) check_channel(inst_, backup.id());
    ThresholdPolicy pol;
    pol.backup = backup;
    pol.threshold = threshold;
    pol.w = compute_w(inst_, backup, threshold);
    std::vector<char> placed(inst_.num_channels(), 0);
    for (State u = static_cast<State>(inst_.num_states()) - 1; u >= pol.w; --u) {
      const double bound = level_bound(backup, threshold, u);
      ProbeLevel level{u, {}};
      for (ChannelId j : order_[static_cast<std::size_t>(u)]) {
        const double s = score(j, u);
        if (!(s > bound)) break;
        if (placed[j] || backup.is(j)) continue;
        placed[j] = 1;
        level.channels.push_back(j);
      }
      pol.levels.push_back(std::move(level));
    }
    return pol;
  }

 private:
  Instance inst_;
  TailTable tails_;
  std::vector<double> score_;
  std::vector<std::vector<ChannelId>> order_;
};

/// The level sets H_{u,l,x} for u = K-1 down to w_{l,x}, each already in
/// probing order.
inline std::vector<ProbeLevel> compute_levels(const Instance& inst, Backup backup, Threshold threshold) {
  return ReservePlanner(inst).plan(backup, threshold).levels;
}

inline ThresholdPolicy reserve_bkup(const Instance& inst, Backup backup, Threshold threshold = Threshold::none()) {
  return ReservePlanner(inst).plan(backup, threshold);
}

/// OPTNOBKUP: the best policy that never transmits on an unprobed channel.
inline ThresholdPolicy opt_no_bkup(const Instance& inst) { return reserve_bkup(inst, Backup::none()); }

struct PlannedPolicy {
  ThresholdPolicy policy;
  GainReport report;  // altered by x when the threshold is set
};

/// Evaluates RESERVEBKUP(l, x) for l in {none, 1..n} and keeps the best.
/// Ties go to the no-backup policy, then to the lower channel id.
inline PlannedPolicy best_reserve_bkup(const ReservePlanner& planner, Threshold threshold) {
  const Instance& inst = planner.instance();
  const std::optional<double> altered =
      threshold.is_none() ? std::nullopt : std::optional<double>(threshold.value());

  PlannedPolicy best;
  best.policy = planner.plan(Backup::none(), threshold);
  best.report = evaluate_policy(best.policy, inst, altered);
  for (ChannelId l = 0; l < inst.num_channels(); ++l) {
    ThresholdPolicy pol = planner.plan(Backup::channel(l), threshold);
    GainReport rep = evaluate_policy(pol, inst, altered);
    if (rep.gain > best.report.gain + 1e-12) {
      best.policy = std::move(pol);
      best.report = std::move(rep);
    }
  }
  return best;
}

inline PlannedPolicy best_reserve_bkup(const Instance& inst, Threshold threshold = Threshold::none()) {
  return best_reserve_bkup(ReservePlanner(inst), threshold);
}

/// Programmatic check of the ThresholdPolicy invariants for a policy produced
/// by the planner. Returns an empty vector when all hold.
inline std::vector<std::string> threshold_policy_violations(const ReservePlanner& planner, const ThresholdPolicy& pol) {
  std::vector<std::string> out;
  const Instance& inst = planner.instance();
  std::vector<char> seen(inst.num_channels(), 0);
  for (const auto& level : pol.levels) {
    const double bound = planner.level_bound(pol.backup, pol.threshold, level.level);
    for (std::size_t t = 0; t < level.channels.size(); ++t) {
      const ChannelId j = level.channels[t];
      if (pol.backup.is(j)) out.push_back("backup appears in level " + std::to_string(level.level));
      if (seen[j]) out.push_back("channel " + inst.channels[j].name + " in two levels");
      seen[j] = 1;
      if (!(planner.score(j, level.level) > bound)) {
        out.push_back("channel " + inst.channels[j].name + " below membership bound at level " +
                      std::to_string(level.level));
      }
      if (t > 0 && planner.score(level.channels[t - 1], level.level) < planner.score(j, level.level)) {
        out.push_back("level " + std::to_string(level.level) + " not in non-increasing score order");
      }
    }
  }
  return out;
}

}  // namespace probeopt
