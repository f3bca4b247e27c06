#pragma once

// Random and structured instance generation for tests and benchmarks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "probeopt/core.hpp"

namespace probeopt {

enum class CostRegime { Zero, Equal, Heterogeneous };
enum class ProbShape { UniformSimplex, SpikyTop, TwoPoint };

struct GenSpec {
  std::size_t n_min = 1, n_max = 8;
  std::size_t k_min = 2, k_max = 4;
  CostRegime costs = CostRegime::Heterogeneous;
  double cost_lo = 0.0, cost_hi = 0.2;
  ProbShape shape = ProbShape::UniformSimplex;
  std::uint64_t seed = 0;
};

inline constexpr double kMinRewardGap = 1e-6;
inline constexpr double kTopProbCap = 1.0 - 1e-6;

inline void check_spec(const GenSpec& spec) {
  std::vector<Issue> issues;
  if (spec.n_min < 1 || spec.n_min > spec.n_max) issues.push_back({ErrorCode::BadShape, "need 1 <= n_min <= n_max"});
  if (spec.k_min < 2 || spec.k_min > spec.k_max) issues.push_back({ErrorCode::BadShape, "need 2 <= k_min <= k_max"});
  if (!(spec.cost_lo >= 0.0) || !(spec.cost_lo <= spec.cost_hi) || !std::isfinite(spec.cost_hi)) {
    issues.push_back({ErrorCode::NegativeCost, "need 0 <= cost_lo <= cost_hi"});
  }
  if (!issues.empty()) throw Error(std::move(issues));
}

namespace detail {

inline std::vector<double> draw_rewards(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> r(k, 0.0);
  for (;;) {
    for (std::size_t i = 1; i < k; ++i) r[i] = 1.0 - unit(rng);  // (0, 1]
    std::sort(r.begin() + 1, r.end());
    bool ok = true;
    for (std::size_t i = 1; i < k; ++i) ok = ok && r[i] - r[i - 1] >= kMinRewardGap;
    if (ok) return r;
  }
}

inline std::vector<double> draw_probs(std::mt19937_64& rng, std::size_t k, ProbShape shape) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> p(k, 0.0);
  switch (shape) {
    case ProbShape::UniformSimplex:
      for (double& v : p) v = expo(rng);
      break;
    case ProbShape::SpikyTop: {
      // most of the mass sits on the top state
      double rest = 0.0;
      for (std::size_t i = 0; i + 1 < k; ++i) rest += p[i] = expo(rng);
      const double top = 0.5 + 0.45 * unit(rng);
      for (std::size_t i = 0; i + 1 < k; ++i) p[i] *= (1.0 - top) / rest;
      p[k - 1] = top;
      break;
    }
    case ProbShape::TwoPoint: {
      std::uniform_int_distribution<std::size_t> pick(0, k - 1);
      const std::size_t a = pick(rng);
      std::size_t b = pick(rng);
      if (b == a) b = (a + 1) % k;
      const double w = unit(rng);
      p[a] = w;
      p[b] = 1.0 - w;
      break;
    }
  }
  double sum = 0.0;
  for (double v : p) sum += v;
  for (double& v : p) v /= sum;
  if (p[k - 1] > kTopProbCap) {
    p[0] += p[k - 1] - kTopProbCap;
    p[k - 1] = kTopProbCap;
  }
  return p;
}

}  // namespace detail

/// Deterministic in spec.seed. The result always passes validate_instance.
inline Instance generate(const GenSpec& spec) {
  check_spec(spec);
  std::mt19937_64 rng(spec.seed);
  const std::size_t n = std::uniform_int_distribution<std::size_t>(spec.n_min, spec.n_max)(rng);
  const std::size_t k = std::uniform_int_distribution<std::size_t>(spec.k_min, spec.k_max)(rng);
  std::uniform_real_distribution<double> cost(spec.cost_lo, spec.cost_hi);

  Instance inst;
  inst.rewards = detail::draw_rewards(rng, k);
  const double shared = spec.costs == CostRegime::Equal ? cost(rng) : 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    ChannelStats ch;
    ch.name = std::to_string(j + 1);
    ch.probs = detail::draw_probs(rng, k, spec.shape);
    switch (spec.costs) {
      case CostRegime::Zero: ch.cost = 0.0; break;
      case CostRegime::Equal: ch.cost = shared; break;
      case CostRegime::Heterogeneous: ch.cost = cost(rng); break;
    }
    inst.channels.push_back(std::move(ch));
  }
  return validate_instance(std::move(inst));
}

/// The three-channel worked instance: r = (0, 0.1, 1) and channels i, j, k
/// whose costs scale with delta. Valid for 0 < delta < 0.15.
inline Instance three_channel_example(double delta = 0.1) {
  if (!(delta > 0.0 && delta < 0.15)) {
    throw Error(ErrorCode::BadShape, "delta must lie in (0, 0.15), got " + std::to_string(delta));
  }
  Instance inst;
  inst.rewards = {0.0, 0.1, 1.0};
  inst.channels = {
      {"i", 0.05885 * delta, {0.49, 0.02, 0.49}},
      {"j", 0.06 * delta, {0.5, 0.01, 0.49}},
      {"k", 0.05 * delta, {0.5, 0.5 - delta, delta}},
  };
  return validate_instance(std::move(inst));
}

}  // namespace probeopt
