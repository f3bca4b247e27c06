#pragma once

// Exact optimum for two-state channels: the probe set S_i, the
// DETERMINE BEST BACKUP scan and TWOSTATEOPT = EXHAUST(S_{i*}, i*).

#include <algorithm>
#include <numeric>
#include <vector>

#include "probeopt/core.hpp"
#include "probeopt/policy.hpp"

namespace probeopt {

namespace detail {

inline void require_two_states(const Instance& inst) {
  if (inst.num_states() != 2) {
    throw Error(ErrorCode::WrongK, "two-state routines need K = 2, got K = " + std::to_string(inst.num_states()));
  }
}

// Strict member test of S_i for channel j.
inline bool in_probe_set(const Instance& inst, ChannelId backup, ChannelId j) {
  return j != backup && (1.0 - inst.prob(backup, 1)) * inst.prob(j, 1) * inst.reward(1) > inst.cost(j);
}

}  // namespace detail

/// Channels sorted by decreasing p_1j / c_j. Zero-cost channels with p_1j > 0
/// rank as +infinity (among themselves by decreasing p_1j); channels with
/// p_1j = 0 go last. Ties keep the lower id first.
inline std::vector<ChannelId> ratio_order(const Instance& inst) {
  detail::require_two_states(inst);
  std::vector<ChannelId> order(inst.num_channels());
  std::iota(order.begin(), order.end(), ChannelId{0});
  auto tier = [&](ChannelId j) {
    if (inst.prob(j, 1) <= 0.0) return 2;
    return inst.cost(j) == 0.0 ? 0 : 1;
  };
  std::stable_sort(order.begin(), order.end(), [&](ChannelId a, ChannelId b) {
    const int ta = tier(a), tb = tier(b);
    if (ta != tb) return ta < tb;
    if (ta == 0) return inst.prob(a, 1) > inst.prob(b, 1);
    if (ta == 2) return false;
    // p_a / c_a > p_b / c_b without dividing
    return inst.prob(a, 1) * inst.cost(b) > inst.prob(b, 1) * inst.cost(a);
  });
  return order;
}

/// S_i = { j != i : (1 - p_1i) p_1j r_1 > c_j }, listed in ratio order.
inline std::vector<ChannelId> probe_set(const Instance& inst, ChannelId backup) {
  detail::require_two_states(inst);
  check_channel(inst, backup);
  std::vector<ChannelId> out;
  for (ChannelId j : ratio_order(inst)) {
    if (detail::in_probe_set(inst, backup, j)) out.push_back(j);
  }
  return out;
}

struct BackupScan {
  std::vector<ChannelId> order;        // ratio order; position t holds channel order[t]
  std::vector<double> prefix_zero;     // D_t: P(first t channels in state 0)
  std::vector<double> prefix_gain;     // F_t: gain of probing the first t channels
  std::vector<std::size_t> set_size;   // |S_i| per channel id
  std::vector<double> gain;            // Gain(i) per channel id
  ChannelId best = 0;
};

/// O(n log n). Gain(i) comes from the prefix sums D and F; S_i is always a
/// prefix of the ratio order once i itself is removed.
inline BackupScan determine_best_backup(const Instance& inst) {
  detail::require_two_states(inst);
  const std::size_t n = inst.num_channels();
  const double r1 = inst.reward(1);
  BackupScan scan;
  scan.order = ratio_order(inst);
  scan.prefix_zero.assign(n + 1, 1.0);
  scan.prefix_gain.assign(n + 1, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const ChannelId j = scan.order[t];
    scan.prefix_zero[t + 1] = scan.prefix_zero[t] * (1.0 - inst.prob(j, 1));
    scan.prefix_gain[t + 1] = scan.prefix_gain[t] + (inst.prob(j, 1) * r1 - inst.cost(j)) * scan.prefix_zero[t];
  }
  std::vector<std::size_t> position(n);
  for (std::size_t t = 0; t < n; ++t) position[scan.order[t]] = t;

  scan.set_size.assign(n, 0);
  scan.gain.assign(n, 0.0);
  const auto& D = scan.prefix_zero;
  const auto& F = scan.prefix_gain;
  for (ChannelId i = 0; i < n; ++i) {
    // |S_i| by binary search over the ratio order with i removed, where the
    // members (ratio above 1 / ((1 - p_1i) r_1)) form a prefix.
    const std::size_t pos = position[i];
    std::size_t lo = 0, hi = n - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      const ChannelId j = scan.order[mid < pos ? mid : mid + 1];
      if (detail::in_probe_set(inst, i, j)) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    const std::size_t m = lo;
    scan.set_size[i] = m;
    const double p = inst.prob(i, 1);
    if (pos >= m) {
      scan.gain[i] = F[m] + p * r1 * D[m];
    } else {
      scan.gain[i] = F[pos] + (F[m + 1] - F[pos] - (p * r1 - inst.cost(i)) * D[pos]) / (1.0 - p) +
                     p * r1 / (1.0 - p) * D[m + 1];
    }
  }
  for (ChannelId i = 1; i < n; ++i) {
    if (scan.gain[i] > scan.gain[scan.best] + 1e-12) scan.best = i;
  }
  return scan;
}

/// TWOSTATEOPT: probe S_{i*} in ratio order, send on the first channel found
/// in state 1, otherwise on the backup i*.
inline ExhaustPolicy two_state_opt(const Instance& inst) {
  const BackupScan scan = determine_best_backup(inst);
  ExhaustPolicy pol;
  pol.backup = scan.best;
  for (std::size_t t = 0; t < scan.set_size[scan.best] + 1 && t < scan.order.size(); ++t) {
    const ChannelId j = scan.order[t];
    if (j != scan.best && pol.probe_order.size() < scan.set_size[scan.best]) pol.probe_order.push_back(j);
  }
  return pol;
}

/// Closed-form gain of EXHAUST(S, i) with S probed in the given order.
inline double exhaust_gain(const Instance& inst, const ExhaustPolicy& pol) {
  detail::require_two_states(inst);
  double gain = 0.0, zero = 1.0;
  for (ChannelId j : pol.probe_order) {
    gain += (inst.prob(j, 1) * inst.reward(1) - inst.cost(j)) * zero;
    zero *= 1.0 - inst.prob(j, 1);
  }
  return gain + inst.prob(pol.backup, 1) * inst.reward(1) * zero;
}

}  // namespace probeopt
