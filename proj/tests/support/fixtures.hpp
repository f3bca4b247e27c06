#pragma once

#include <cstdint>

#include "probeopt/core.hpp"
#include "probeopt/instance_gen.hpp"

namespace fixtures {

// r1 = 1, A: (p1 = 0.8, c = 0.05), B: (p1 = 0.5, c = 0.01)
inline probeopt::Instance two_channel() {
  probeopt::Instance inst;
  inst.rewards = {0.0, 1.0};
  inst.channels = {{"A", 0.05, {0.2, 0.8}}, {"B", 0.01, {0.5, 0.5}}};
  return probeopt::validate_instance(inst);
}

inline probeopt::Instance random_instance(std::uint64_t seed, std::size_t n_max, std::size_t k_min, std::size_t k_max,
                                          probeopt::CostRegime costs = probeopt::CostRegime::Heterogeneous) {
  probeopt::GenSpec spec;
  spec.n_min = 1;
  spec.n_max = n_max;
  spec.k_min = k_min;
  spec.k_max = k_max;
  spec.costs = costs;
  spec.shape = static_cast<probeopt::ProbShape>(seed % 3);
  spec.seed = seed;
  return probeopt::generate(spec);
}

}  // namespace fixtures
