#pragma once

// Domain types for the multichannel probing problem: channel statistics,
// validated instances, tail statistics and the analytic gain report.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "probeopt/error.hpp"

namespace probeopt {

using ChannelId = std::size_t;
using State = int;  // -1 means "nothing probed yet"

inline constexpr State kNoState = -1;
inline constexpr double kNormTolerance = 1e-12;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct ChannelStats {
  std::string name;
  double cost = 0.0;
  std::vector<double> probs;  // probs[i] = P(channel in state i)
};

struct Instance {
  std::vector<double> rewards;  // r_0 .. r_{K-1}, success probability per state
  std::vector<ChannelStats> channels;

  std::size_t num_states() const { return rewards.size(); }
  std::size_t num_channels() const { return channels.size(); }

  // r_{-1} = -1 so that "nothing probed" never beats a real observation.
  double reward(State s) const { return s < 0 ? -1.0 : rewards[static_cast<std::size_t>(s)]; }
  double top_reward() const { return rewards.back(); }
  double prob(ChannelId j, State s) const { return channels[j].probs[static_cast<std::size_t>(s)]; }
  double cost(ChannelId j) const { return channels[j].cost; }

  std::optional<ChannelId> find(const std::string& name) const {
    for (ChannelId j = 0; j < channels.size(); ++j) {
      if (channels[j].name == name) return j;
    }
    return std::nullopt;
  }
};

struct ValidationOptions {
  bool allow_r0_positive = false;
  bool renormalize = false;  // rescale probability rows instead of rejecting them
};

/// Checks every modelling assumption and returns the instance, or throws an
/// Error listing all violations at once.
inline Instance validate_instance(Instance raw, const ValidationOptions& opts = {}) {
  std::vector<Issue> issues;
  const std::size_t k = raw.rewards.size();
  if (k < 2) issues.push_back({ErrorCode::BadShape, "need at least 2 states, got " + std::to_string(k)});
  if (raw.channels.empty()) issues.push_back({ErrorCode::BadShape, "need at least one channel"});

  for (std::size_t i = 0; i < k; ++i) {
    const double r = raw.rewards[i];
    if (!std::isfinite(r) || r < 0.0 || r > 1.0) {
      issues.push_back({ErrorCode::RewardOutOfRange, "reward r_" + std::to_string(i) + " not in [0,1]"});
    }
    if (i > 0 && !(raw.rewards[i] > raw.rewards[i - 1])) {
      issues.push_back({ErrorCode::NonIncreasingRewards,
                        "r_" + std::to_string(i) + " <= r_" + std::to_string(i - 1)});
    }
  }
  if (k > 0 && raw.rewards[0] != 0.0 && !opts.allow_r0_positive) {
    issues.push_back({ErrorCode::RewardOutOfRange, "r_0 must be 0 (see --allow-r0-positive)"});
  }

  for (std::size_t j = 0; j < raw.channels.size(); ++j) {
    auto& ch = raw.channels[j];
    const std::string who = ch.name.empty() ? "channel #" + std::to_string(j + 1) : "channel '" + ch.name + "'";
    if (ch.name.empty()) ch.name = std::to_string(j + 1);
    if (ch.probs.size() != k) {
      issues.push_back({ErrorCode::BadShape, who + " has " + std::to_string(ch.probs.size()) + " probabilities"});
      continue;
    }
    if (!std::isfinite(ch.cost) || ch.cost < 0.0) {
      issues.push_back({ErrorCode::NegativeCost, who + " has negative cost"});
    }
    double sum = 0.0;
    bool negative = false;
    for (double p : ch.probs) {
      if (!std::isfinite(p) || p < 0.0) negative = true;
      sum += p;
    }
    if (negative) {
      issues.push_back({ErrorCode::ProbsNotNormalized, who + " has a negative probability"});
      continue;
    }
    if (opts.renormalize && sum > 0.0) {
      for (double& p : ch.probs) p /= sum;
    } else if (std::abs(sum - 1.0) > kNormTolerance) {
      issues.push_back({ErrorCode::ProbsNotNormalized, who + " probabilities sum to " + std::to_string(sum)});
    }
    if (k > 0 && ch.probs.back() >= 1.0) {
      issues.push_back({ErrorCode::CertainTopState, who + " is in the top state with probability 1"});
    }
  }
  for (std::size_t a = 0; a < raw.channels.size(); ++a) {
    for (std::size_t b = a + 1; b < raw.channels.size(); ++b) {
      if (raw.channels[a].name == raw.channels[b].name) {
        issues.push_back({ErrorCode::BadShape, "duplicate channel name '" + raw.channels[a].name + "'"});
      }
    }
  }

  if (!issues.empty()) throw Error(std::move(issues));
  return raw;
}

// Backup channel choice. The "no backup" case is a distinguished value,
// never a channel index.
class Backup {
 public:
  constexpr Backup() = default;
  static constexpr Backup none() { return Backup(); }
  static constexpr Backup channel(ChannelId id) { return Backup(id); }

  constexpr bool is_none() const { return !has_; }
  constexpr ChannelId id() const { return id_; }
  constexpr bool is(ChannelId j) const { return has_ && id_ == j; }

  friend constexpr bool operator==(const Backup&, const Backup&) = default;

 private:
  constexpr explicit Backup(ChannelId id) : has_(true), id_(id) {}
  bool has_ = false;
  ChannelId id_ = 0;
};

// Transmission threshold x. An absent value means "no threshold" (the
// saturated case, x = -infinity) and admits every reward.
class Threshold {
 public:
  constexpr Threshold() = default;
  static constexpr Threshold none() { return Threshold(); }
  static constexpr Threshold at(double x) { return Threshold(x); }

  constexpr bool is_none() const { return !has_; }
  constexpr double value() const { return value_; }
  constexpr bool admits(double reward) const { return !has_ || reward >= value_; }
  // max(a, x) with x = -inf when absent
  constexpr double floor(double a) const { return has_ ? std::max(a, value_) : a; }
  constexpr double shift() const { return has_ ? value_ : 0.0; }

  friend constexpr bool operator==(const Threshold&, const Threshold&) = default;

 private:
  constexpr explicit Threshold(double x) : has_(true), value_(x) {}
  bool has_ = false;
  double value_ = 0.0;
};

struct TailStats {
  State level = 0;
  double tail_prob = 0.0;    // P(state >= level)
  double tail_reward = 0.0;  // E[r | state >= level]; meaningful only when defined
  bool defined = false;      // tail_prob > 0
};

inline void check_channel(const Instance& inst, ChannelId j) {
  if (j >= inst.num_channels()) {
    throw Error(ErrorCode::UnknownChannel, "channel index " + std::to_string(j) + " out of range");
  }
}

inline TailStats tail_stats(const Instance& inst, ChannelId j, State level) {
  check_channel(inst, j);
  const auto k = static_cast<State>(inst.num_states());
  if (level < 0 || level > k) {
    throw Error(ErrorCode::LevelOutOfRange, "level " + std::to_string(level) + " outside [0, K]");
  }
  TailStats t;
  t.level = level;
  double mass = 0.0;
  for (State v = level; v < k; ++v) {
    t.tail_prob += inst.prob(j, v);
    mass += inst.prob(j, v) * inst.reward(v);
  }
  if (level == 0) t.tail_prob = 1.0;
  t.defined = t.tail_prob > 0.0;
  t.tail_reward = t.defined ? mass / t.tail_prob : 0.0;
  return t;
}

/// Expected success probability of transmitting blind on the backup, or -1
/// for the no-backup sentinel.
inline double blind_backup_reward(const Instance& inst, Backup backup) {
  if (backup.is_none()) return -1.0;
  check_channel(inst, backup.id());
  double r = 0.0;
  for (State s = 0; s < static_cast<State>(inst.num_states()); ++s) r += inst.prob(backup.id(), s) * inst.reward(s);
  return r;
}

// Row-major table of tail probabilities and tail reward masses, indexed by
// channel and level 0..K. Built once per instance; all policy computations
// read from it.
class TailTable {
 public:
  explicit TailTable(const Instance& inst)
      : k_(inst.num_states()), n_(inst.num_channels()), prob_(n_ * (k_ + 1)), mass_(n_ * (k_ + 1)) {
    for (ChannelId j = 0; j < n_; ++j) {
      double p = 0.0, m = 0.0;
      for (std::size_t u = k_; u-- > 0;) {
        p += inst.channels[j].probs[u];
        m += inst.channels[j].probs[u] * inst.rewards[u];
        prob_[j * (k_ + 1) + u] = p;
        mass_[j * (k_ + 1) + u] = m;
      }
      prob_[j * (k_ + 1)] = 1.0;
    }
  }

  double prob(ChannelId j, std::size_t u) const { return prob_[j * (k_ + 1) + u]; }
  double mass(ChannelId j, std::size_t u) const { return mass_[j * (k_ + 1) + u]; }
  double blind(ChannelId j) const { return mass(j, 0); }

  // Probing score r~_j[u] - c_j / p~_j[u]; -inf when the tail is empty.
  double score(const Instance& inst, ChannelId j, std::size_t u) const {
    const double p = prob(j, u);
    if (!(p > 0.0)) return -kInf;
    return mass(j, u) / p - inst.cost(j) / p;
  }

 private:
  std::size_t k_, n_;
  std::vector<double> prob_, mass_;
};

/// Analytic evaluation of a policy. With an altered threshold x every
/// transmission earns r - x and `gain` is G - x*S.
struct GainReport {
  double gain = 0.0;
  double transmit_prob = 0.0;
  double probe_cost = 0.0;
  double success_prob = 0.0;
  std::vector<double> state_mass;  // q_i: P(transmit on a channel in state i)
  std::optional<double> altered_x;

  double plain_gain() const { return success_prob - probe_cost; }
};

}  // namespace probeopt
