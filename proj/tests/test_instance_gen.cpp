#include <gtest/gtest.h>

#include "probeopt/instance_gen.hpp"

using namespace probeopt;

namespace {

bool same(const Instance& a, const Instance& b) {
  if (a.rewards != b.rewards || a.channels.size() != b.channels.size()) return false;
  for (std::size_t j = 0; j < a.channels.size(); ++j) {
    if (a.channels[j].cost != b.channels[j].cost || a.channels[j].probs != b.channels[j].probs) return false;
  }
  return true;
}

}  // namespace

TEST(Generate, Deterministic) {
  GenSpec spec;
  spec.seed = 1234;
  EXPECT_TRUE(same(generate(spec), generate(spec)));
  spec.seed = 1235;
  GenSpec other = spec;
  other.seed = 1234;
  EXPECT_FALSE(same(generate(spec), generate(other)));
}

TEST(Generate, CostRegimes) {
  GenSpec spec;
  spec.n_min = spec.n_max = 6;
  spec.costs = CostRegime::Equal;
  const Instance eq = generate(spec);
  for (const auto& ch : eq.channels) EXPECT_EQ(ch.cost, eq.channels[0].cost);
  spec.costs = CostRegime::Zero;
  for (const auto& ch : generate(spec).channels) EXPECT_EQ(ch.cost, 0.0);
  spec.costs = CostRegime::Heterogeneous;
  spec.cost_lo = 0.1;
  spec.cost_hi = 0.3;
  for (const auto& ch : generate(spec).channels) {
    EXPECT_GE(ch.cost, 0.1);
    EXPECT_LE(ch.cost, 0.3);
  }
}

TEST(Generate, AlwaysValid) {
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    GenSpec spec;
    spec.n_min = 1;
    spec.n_max = 10;
    spec.k_min = 2;
    spec.k_max = 8;
    spec.costs = static_cast<CostRegime>(seed % 3);
    spec.shape = static_cast<ProbShape>(seed / 3 % 3);
    spec.seed = seed;
    const Instance inst = generate(spec);
    ASSERT_NO_THROW(validate_instance(inst)) << "seed " << seed;
    EXPECT_EQ(inst.rewards[0], 0.0);
    EXPECT_LE(inst.top_reward(), 1.0);
    for (std::size_t i = 1; i < inst.num_states(); ++i) EXPECT_GE(inst.rewards[i] - inst.rewards[i - 1], kMinRewardGap);
    for (const auto& ch : inst.channels) EXPECT_LE(ch.probs.back(), kTopProbCap);
  }
}

TEST(Generate, RejectsBadSpec) {
  GenSpec spec;
  spec.n_min = 0;
  EXPECT_THROW(generate(spec), Error);
  spec = {};
  spec.k_min = 1;
  EXPECT_THROW(generate(spec), Error);
  spec = {};
  spec.cost_lo = 0.5;
  spec.cost_hi = 0.1;
  EXPECT_THROW(generate(spec), Error);
}

TEST(ThreeChannel, Builder) {
  const Instance tri = three_channel_example(0.1);
  EXPECT_EQ(tri.rewards, (std::vector<double>{0.0, 0.1, 1.0}));
  EXPECT_DOUBLE_EQ(tri.channels[0].cost, 0.05885 * 0.1);
  EXPECT_DOUBLE_EQ(tri.channels[2].probs[2], 0.1);
  for (double d : {0.01, 0.05, 0.149}) EXPECT_NO_THROW(three_channel_example(d));
  EXPECT_THROW(three_channel_example(0.15), Error);
  EXPECT_THROW(three_channel_example(0.0), Error);
}
