#pragma once

// Monte-Carlo check of analytic gains. Channel states are drawn lazily when
// probed (a backup's state is drawn when it is sent on); each replication owns
// a generator seeded from (seed, replication index).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <variant>
#include <vector>

#include "probeopt/core.hpp"
#include "probeopt/lagrange.hpp"
#include "probeopt/parallel.hpp"
#include "probeopt/policy.hpp"

namespace probeopt {

struct Saturated {};

struct BernoulliArrivals {
  double lambda = 0.0;
};

// Two-state modulating chain; `stay[m]` is the probability of remaining in
// phase m, `arrival[m]` the per-slot arrival probability in phase m.
struct MarkovArrivals {
  double arrival[2] = {0.0, 0.0};
  double stay[2] = {0.5, 0.5};

  double stationary_first() const { return (1.0 - stay[1]) / ((1.0 - stay[0]) + (1.0 - stay[1])); }
  double lambda() const {
    const double pi0 = stationary_first();
    return pi0 * arrival[0] + (1.0 - pi0) * arrival[1];
  }
};

using ArrivalModel = std::variant<Saturated, BernoulliArrivals, MarkovArrivals>;

struct SimConfig {
  std::uint64_t slots = 1'000'000;  // per replication
  std::uint64_t seed = 0;
  std::size_t replications = 16;
  ArrivalModel arrivals = Saturated{};
};

struct SimReport {
  std::uint64_t slots = 0;  // per replication
  std::size_t replications = 0;
  double gain = 0.0, gain_se = 0.0;  // per slot
  double transmit_rate = 0.0;        // per slot
  double success_rate = 0.0;
  double probe_cost = 0.0;
  double busy_fraction = 1.0;
  double busy_transmit_rate = 0.0, busy_transmit_se = 0.0;  // transmissions per busy slot
  double mean_queue = 0.0;
  std::uint64_t max_queue = 0;
  double queue_quarters[4] = {0.0, 0.0, 0.0, 0.0};  // mean queue in each quarter of the run
  std::vector<std::uint64_t> state_histogram;        // transmissions per channel state
  std::vector<double> replication_gain;
};

/// Windowed-mean stability proxy: the last-half mean queue is within 10% of
/// the second-quarter mean (or both are below `floor`).
inline bool queue_looks_stable(const SimReport& rep, double floor = 0.05) {
  const double second = rep.queue_quarters[1];
  const double last = 0.5 * (rep.queue_quarters[2] + rep.queue_quarters[3]);
  if (std::max(second, last) < floor) return true;
  return std::abs(last - second) < 0.1 * second;
}

namespace detail {

inline void check_arrivals(const ArrivalModel& model) {
  if (const auto* b = std::get_if<BernoulliArrivals>(&model)) {
    if (!(b->lambda >= 0.0 && b->lambda < 1.0)) throw Error(ErrorCode::RateOutOfRange, "arrival rate must lie in [0, 1)");
  } else if (const auto* m = std::get_if<MarkovArrivals>(&model)) {
    for (int i = 0; i < 2; ++i) {
      if (!(m->arrival[i] >= 0.0 && m->arrival[i] <= 1.0)) throw Error(ErrorCode::BadShape, "arrival probability outside [0, 1]");
      if (!(m->stay[i] >= 0.0 && m->stay[i] < 1.0)) throw Error(ErrorCode::BadShape, "modulating chain must leave each phase");
    }
    if (m->stay[0] == 0.0 && m->stay[1] == 0.0) throw Error(ErrorCode::BadShape, "modulating chain is periodic");
    if (!(m->lambda() < 1.0)) throw Error(ErrorCode::RateOutOfRange, "mean arrival rate must be below 1");
  }
}

class StateSampler {
 public:
  StateSampler(const Instance& inst, std::mt19937_64& rng) : rng_(rng) {
    for (const auto& ch : inst.channels) draws_.emplace_back(ch.probs.begin(), ch.probs.end());
  }
  State operator()(ChannelId j) { return static_cast<State>(draws_[j](rng_)); }

 private:
  std::mt19937_64& rng_;
  std::vector<std::discrete_distribution<int>> draws_;
};

// One policy in executable form.
struct Runner {
  const Instance* inst;
  const ThresholdPolicy* threshold = nullptr;
  const DecisionTree* tree = nullptr;
  double backup_reward = 0.0;

  template <class Sampler>
  SlotOutcome operator()(Sampler& sample) const {
    if (threshold) return run_slot(*inst, *threshold, backup_reward, sample);
    return run_slot(*inst, *tree, sample);
  }
};

struct Tally {
  double reward = 0.0, cost = 0.0;
  std::uint64_t transmissions = 0, busy = 0, queue_sum = 0, max_queue = 0;
  std::uint64_t quarter_sum[4] = {0, 0, 0, 0};
  std::vector<std::uint64_t> states;
};

template <class ChooseRunner>
Tally run_replication(const Instance& inst, const SimConfig& cfg, std::size_t rep, ChooseRunner&& choose) {
  std::seed_seq seq{cfg.seed, static_cast<std::uint64_t>(rep)};
  std::mt19937_64 rng(seq);
  StateSampler sample(inst, rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Tally t;
  t.states.assign(inst.num_states(), 0);

  const bool saturated = std::holds_alternative<Saturated>(cfg.arrivals);
  const auto* bern = std::get_if<BernoulliArrivals>(&cfg.arrivals);
  const auto* markov = std::get_if<MarkovArrivals>(&cfg.arrivals);
  int phase = markov && unit(rng) >= markov->stationary_first() ? 1 : 0;
  std::uint64_t queue = 0;

  for (std::uint64_t slot = 0; slot < cfg.slots; ++slot) {
    if (bern) {
      if (unit(rng) < bern->lambda) ++queue;
    } else if (markov) {
      if (unit(rng) < markov->arrival[phase]) ++queue;
      if (unit(rng) >= markov->stay[phase]) phase = 1 - phase;
    }
    if (saturated || queue > 0) {
      ++t.busy;
      const SlotOutcome out = choose(rng)(sample);
      t.cost += out.probe_cost;
      if (out.transmitted) {
        ++t.transmissions;
        ++t.states[static_cast<std::size_t>(out.state)];
        if (unit(rng) < inst.reward(out.state)) t.reward += 1.0;
        if (!saturated) --queue;
      }
    }
    t.queue_sum += queue;
    t.quarter_sum[std::min<std::uint64_t>(3, slot * 4 / cfg.slots)] += queue;
    t.max_queue = std::max(t.max_queue, queue);
  }
  return t;
}

template <class ChooseRunner>
SimReport simulate(const Instance& inst, const SimConfig& cfg, ChooseRunner&& choose) {
  check_arrivals(cfg.arrivals);
  if (cfg.slots == 0 || cfg.replications == 0) throw Error(ErrorCode::BadShape, "need at least one slot and one replication");
  const auto tallies =
      parallel_map<Tally>(cfg.replications, [&](std::size_t r) { return run_replication(inst, cfg, r, choose); });

  SimReport rep;
  rep.slots = cfg.slots;
  rep.replications = cfg.replications;
  rep.state_histogram.assign(inst.num_states(), 0);
  const auto n = static_cast<double>(cfg.slots);
  const auto reps = static_cast<double>(cfg.replications);
  std::vector<double> busy_rates;
  std::uint64_t busy = 0;
  for (const Tally& t : tallies) {
    rep.replication_gain.push_back((t.reward - t.cost) / n);
    rep.success_rate += t.reward / n / reps;
    rep.probe_cost += t.cost / n / reps;
    rep.transmit_rate += static_cast<double>(t.transmissions) / n / reps;
    rep.mean_queue += static_cast<double>(t.queue_sum) / n / reps;
    rep.max_queue = std::max(rep.max_queue, t.max_queue);
    for (int q = 0; q < 4; ++q) rep.queue_quarters[q] += static_cast<double>(t.quarter_sum[q]) / (n / 4) / reps;
    for (std::size_t s = 0; s < t.states.size(); ++s) rep.state_histogram[s] += t.states[s];
    busy += t.busy;
    if (t.busy > 0) busy_rates.push_back(static_cast<double>(t.transmissions) / static_cast<double>(t.busy));
  }
  auto mean_se = [](const std::vector<double>& xs, double& mean, double& se) {
    mean = 0.0;
    se = 0.0;
    if (xs.empty()) return;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  };
  mean_se(rep.replication_gain, rep.gain, rep.gain_se);
  mean_se(busy_rates, rep.busy_transmit_rate, rep.busy_transmit_se);
  rep.busy_fraction = static_cast<double>(busy) / (n * reps);
  return rep;
}

inline Runner make_runner(const Instance& inst, const ThresholdPolicy& pol) {
  check_policy(inst, pol);
  return Runner{&inst, &pol, nullptr, blind_backup_reward(inst, pol.backup)};
}

inline Runner make_runner(const Instance& inst, const DecisionTree& tree) {
  check_tree(inst, tree);
  return Runner{&inst, nullptr, &tree, 0.0};
}

}  // namespace detail

/// Saturated sender: the policy runs every slot.
inline SimReport simulate_saturated(const AnyPolicy& policy, const Instance& inst, SimConfig cfg = {}) {
  cfg.arrivals = Saturated{};
  const detail::Runner runner = std::holds_alternative<DecisionTree>(policy)
                                    ? detail::make_runner(inst, std::get<DecisionTree>(policy))
                                    : detail::make_runner(inst, std::get<ThresholdPolicy>(policy));
  return detail::simulate(inst, cfg, [&](std::mt19937_64&) -> const detail::Runner& { return runner; });
}

inline SimReport simulate_saturated(const ExhaustPolicy& policy, const Instance& inst, SimConfig cfg = {}) {
  return simulate_saturated(AnyPolicy(to_threshold_policy(inst, policy)), inst, std::move(cfg));
}

/// Unsaturated sender: packets arrive per the arrival model; each busy slot
/// runs sigma+ with probability alpha, else sigma-. Every transmission
/// consumes one packet whether or not it succeeds.
inline SimReport simulate_unsaturated(const MixedPolicy& mix, const Instance& inst, const SimConfig& cfg) {
  if (std::holds_alternative<Saturated>(cfg.arrivals)) {
    throw Error(ErrorCode::BadShape, "unsaturated simulation needs an arrival model");
  }
  const detail::Runner plus = detail::make_runner(inst, mix.sigma_plus);
  const detail::Runner minus = detail::make_runner(inst, mix.sigma_minus);
  return detail::simulate(inst, cfg, [&](std::mt19937_64& rng) -> const detail::Runner& {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < mix.alpha ? plus : minus;
  });
}

}  // namespace probeopt
