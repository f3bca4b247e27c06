#pragma once

// Unsaturated sender: pick two multipliers L- <= L+ around the target
// transmit rate rho = lambda (1 + eps), take the best altered-reward threshold
// policy at each, and mix them so the expected transmit rate is exactly rho.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "probeopt/core.hpp"
#include "probeopt/evaluate.hpp"
#include "probeopt/multi_state.hpp"
#include "probeopt/parallel.hpp"

namespace probeopt {

/// -1, 2, every reward and every blind backup reward, sorted ascending.
/// Duplicates are kept.
inline std::vector<double> threshold_array(const Instance& inst) {
  std::vector<double> out{-1.0, 2.0};
  out.insert(out.end(), inst.rewards.begin(), inst.rewards.end());
  for (ChannelId j = 0; j < inst.num_channels(); ++j) out.push_back(blind_backup_reward(inst, Backup::channel(j)));
  std::sort(out.begin(), out.end());
  return out;
}

inline double target_rate(double lambda, double epsilon) {
  const double rho = lambda * (1.0 + epsilon);
  if (!(lambda > 0.0) || !(epsilon >= 0.0) || !(rho < 1.0)) {
    throw Error(ErrorCode::RateOutOfRange, "need lambda > 0, eps >= 0 and lambda (1 + eps) < 1; got lambda = " +
                                               std::to_string(lambda) + ", eps = " + std::to_string(epsilon));
  }
  return rho;
}

/// BESTRESERVEBKUP(x) at each entry of a threshold array.
class ThresholdLadder {
 public:
  explicit ThresholdLadder(const Instance& inst) : planner_(inst), grid_(threshold_array(inst)) {
    cache_.resize(grid_.size());
  }

  const std::vector<double>& grid() const { return grid_; }
  const ReservePlanner& planner() const { return planner_; }

  const PlannedPolicy& at(std::size_t i) {
    if (!cache_[i]) cache_[i] = best_reserve_bkup(planner_, Threshold::at(grid_[i]));
    return *cache_[i];
  }
  double rate(std::size_t i) { return at(i).report.transmit_prob; }

  /// Evaluates every entry (in parallel) and returns the transmit rates.
  std::vector<double> all_rates() {
    auto plans = parallel_map<PlannedPolicy>(
        grid_.size(), [&](std::size_t i) { return best_reserve_bkup(planner_, Threshold::at(grid_[i])); });
    std::vector<double> out;
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      out.push_back(plans[i].report.transmit_prob);
      cache_[i] = std::move(plans[i]);
    }
    return out;
  }

 private:
  ReservePlanner planner_;
  std::vector<double> grid_;
  std::vector<std::optional<PlannedPolicy>> cache_;
};

/// Index i (0-based) with S(i) > rho >= S(i + 1), by binary search on the
/// nonincreasing rates.
inline std::size_t find_bracket(ThresholdLadder& ladder, double rho) {
  std::size_t lo = 0, hi = ladder.grid().size() - 1;
  if (!(ladder.rate(lo) > rho) || !(ladder.rate(hi) <= rho)) {
    throw Error(ErrorCode::RateOutOfRange, "transmit rate " + std::to_string(rho) + " not bracketed");
  }
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (ladder.rate(mid) > rho) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

inline std::size_t find_bracket(const Instance& inst, double lambda, double epsilon) {
  ThresholdLadder ladder(inst);
  return find_bracket(ladder, target_rate(lambda, epsilon));
}

/// Bracket by a full scan; the first index whose successor is at or below rho.
inline std::size_t find_bracket_scan(const std::vector<double>& rates, double rho) {
  for (std::size_t i = 0; i + 1 < rates.size(); ++i) {
    if (rates[i] > rho && rates[i + 1] <= rho) return i;
  }
  throw Error(ErrorCode::RateOutOfRange, "transmit rate " + std::to_string(rho) + " not bracketed");
}

struct LagrangePair {
  std::size_t bracket = 0;
  double delta = 0.0;
  double l_plus = 0.0, l_minus = 0.0;
  bool interior_below = false;  // interior rate of the bracket is <= rho
  bool refined = false;         // midpoint rule failed; pair found by bisection
  PlannedPolicy plus, minus;    // reports carry the altered gain at their multiplier
};

/// Multipliers L+ and L- with L+ - L- <= delta, delta = min(2 eps q_lb / 3,
/// half the bracket width), such that S(sigma+) <= rho < S(sigma-).
inline LagrangePair select_lagrange_pair(ThresholdLadder& ladder, double lambda, double epsilon, double q_lower_bound) {
  const double rho = target_rate(lambda, epsilon);
  if (!(q_lower_bound > 0.0)) {
    throw Error(ErrorCode::DegenerateBound, "lower bound on the LP optimum must be positive, got " +
                                                std::to_string(q_lower_bound));
  }
  LagrangePair out;
  out.bracket = find_bracket(ladder, rho);
  const double lo = ladder.grid()[out.bracket], hi = ladder.grid()[out.bracket + 1];
  out.delta = std::min(2.0 * epsilon * q_lower_bound / 3.0, (hi - lo) / 2.0);
  const PlannedPolicy mid = best_reserve_bkup(ladder.planner(), Threshold::at(lo + (hi - lo) / 2.0));
  out.interior_below = mid.report.transmit_prob <= rho;
  if (out.interior_below) {
    out.l_plus = lo + out.delta;
    out.l_minus = lo;
    out.plus = best_reserve_bkup(ladder.planner(), Threshold::at(out.l_plus));
    out.minus = ladder.at(out.bracket);
  } else {
    out.l_plus = hi;
    out.l_minus = hi - out.delta;
    out.plus = ladder.at(out.bracket + 1);
    out.minus = best_reserve_bkup(ladder.planner(), Threshold::at(out.l_minus));
  }
  if (out.plus.report.transmit_prob <= rho && out.minus.report.transmit_prob > rho) return out;

  // The best-of policy can still change inside the bracket (a probe score or
  // two altered-gain lines crossing x), so fall back to bisecting x until the
  // two sides are within delta.
  out.refined = true;
  double a = lo, b = hi;
  PlannedPolicy at_a = ladder.at(out.bracket), at_b = ladder.at(out.bracket + 1);
  while (b - a > out.delta) {
    const double m = a + (b - a) / 2.0;
    if (m <= a || m >= b) break;
    PlannedPolicy at_m = best_reserve_bkup(ladder.planner(), Threshold::at(m));
    if (at_m.report.transmit_prob > rho) {
      a = m;
      at_a = std::move(at_m);
    } else {
      b = m;
      at_b = std::move(at_m);
    }
  }
  out.l_minus = a;
  out.l_plus = b;
  out.minus = std::move(at_a);
  out.plus = std::move(at_b);
  return out;
}

inline LagrangePair select_lagrange_pair(const Instance& inst, double lambda, double epsilon, double q_lower_bound) {
  ThresholdLadder ladder(inst);
  return select_lagrange_pair(ladder, lambda, epsilon, q_lower_bound);
}

/// lambda (1 + eps) times the gain of the best threshold policy: mixing it
/// with silence is feasible, so this never exceeds the LP optimum.
inline double rate_lower_bound(const ReservePlanner& planner, double rho) {
  return rho * best_reserve_bkup(planner, Threshold::none()).report.plain_gain();
}

struct MixedPolicy {
  ThresholdPolicy sigma_plus, sigma_minus;
  double alpha = 1.0;  // probability of sigma_plus in a busy slot
  double lambda = 0.0, epsilon = 0.0;
  double rate = 0.0;   // lambda (1 + eps)
  double l_plus = 0.0, l_minus = 0.0, delta = 0.0;
  double gain_plus = 0.0, rate_plus = 0.0;
  double gain_minus = 0.0, rate_minus = 0.0;
  double busy_slot_gain = 0.0;  // alpha G+ + (1 - alpha) G-
  double steady_gain = 0.0;     // busy_slot_gain / (1 + eps)
  std::size_t bracket = 0;
};

inline MixedPolicy mix_pair(const Instance& inst, const LagrangePair& pair, double lambda, double epsilon) {
  MixedPolicy out;
  out.lambda = lambda;
  out.epsilon = epsilon;
  out.rate = target_rate(lambda, epsilon);
  out.sigma_plus = pair.plus.policy;
  out.sigma_minus = pair.minus.policy;
  out.l_plus = pair.l_plus;
  out.l_minus = pair.l_minus;
  out.delta = pair.delta;
  out.bracket = pair.bracket;
  const GainReport plus = evaluate_policy(out.sigma_plus, inst);
  const GainReport minus = evaluate_policy(out.sigma_minus, inst);
  out.gain_plus = plus.gain;
  out.rate_plus = plus.transmit_prob;
  out.gain_minus = minus.gain;
  out.rate_minus = minus.transmit_prob;
  out.alpha = (out.rate_minus - out.rate) / (out.rate_minus - out.rate_plus);
  out.busy_slot_gain = out.alpha * out.gain_plus + (1.0 - out.alpha) * out.gain_minus;
  out.steady_gain = out.busy_slot_gain / (1.0 + epsilon);
  return out;
}

/// UNSATAPPROX: per busy slot, run sigma+ with probability alpha and sigma-
/// otherwise.
inline MixedPolicy unsat_approx(const Instance& inst, double lambda, double epsilon) {
  const double rho = target_rate(lambda, epsilon);
  if (!(epsilon > 0.0)) throw Error(ErrorCode::RateOutOfRange, "eps must be positive");
  ThresholdLadder ladder(inst);
  const LagrangePair pair = select_lagrange_pair(ladder, lambda, epsilon, rate_lower_bound(ladder.planner(), rho));
  return mix_pair(inst, pair, lambda, epsilon);
}

}  // namespace probeopt
