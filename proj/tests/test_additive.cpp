#include <gtest/gtest.h>

#include <cmath>

#include "probeopt/additive.hpp"
#include "probeopt/evaluate.hpp"
#include "probeopt/instance_gen.hpp"
#include "probeopt/multi_state.hpp"
#include "probeopt/oracle.hpp"
#include "probeopt/two_state.hpp"
#include "support/fixtures.hpp"
#include "support/reference.hpp"

using namespace probeopt;

namespace {

Instance equal_cost_instance(std::uint64_t seed, std::size_t n_max, std::size_t k_max, double cost_hi = 0.3) {
  GenSpec spec;
  spec.n_max = n_max;
  spec.k_max = k_max;
  spec.costs = CostRegime::Equal;
  spec.cost_lo = 0.02;
  spec.cost_hi = cost_hi;
  spec.shape = static_cast<ProbShape>(seed % 3);
  spec.seed = seed;
  return generate(spec);
}

}  // namespace

TEST(ShiftedRewards, Examples) {
  const Instance tri = three_channel_example(0.1);
  EXPECT_EQ(shifted_rewards(tri, 0), (std::vector<double>{0.0, 0.1, 1.0}));
  const auto one = shifted_rewards(tri, 1);
  EXPECT_EQ(one[0], 0.0);
  EXPECT_EQ(one[1], 0.0);
  EXPECT_DOUBLE_EQ(one[2], 0.9);
  EXPECT_EQ(shifted_rewards(tri, 2), (std::vector<double>{0.0, 0.0, 0.0}));
  EXPECT_THROW(shifted_rewards(tri, 3), Error);
  EXPECT_THROW(shifted_rewards(tri, -1), Error);
}

TEST(PrefixDepth, Formula) {
  for (double eps : {0.02, 0.05, 0.1, 0.2, 0.3}) {
    const auto h = static_cast<double>(prefix_depth(eps));
    EXPECT_LT(std::pow(1 - eps, h - 1), eps);
    EXPECT_GE(std::pow(1 - eps, h - 2), eps);
  }
  EXPECT_EQ(prefix_depth(0.5), 2u);
}

TEST(PrefixClass, MatchesReferenceWhenDepthCoversAllChannels) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Instance inst = equal_cost_instance(seed, 5, 3);
    const auto k = static_cast<State>(inst.num_states());
    for (std::size_t l = 0; l <= inst.num_channels(); ++l) {
      const Backup b = l == 0 ? Backup::none() : Backup::channel(l - 1);
      std::optional<ChannelId> ref_b;
      if (l > 0) ref_b = l - 1;
      for (State i = 0; i < k; ++i) {
        const PrefixTreePolicy pol = best_in_prefix_class(inst, b, i, inst.num_channels());
        const double ref = reference::best_prefix_class(inst, ref_b, i);
        if (ref < -1e299) continue;
        EXPECT_NEAR(pol.gain, ref, 1e-9) << "seed " << seed << " backup " << l << " level " << i;
        const DecisionTree tree = to_decision_tree(inst, pol);
        ASSERT_NO_THROW(check_tree(inst, tree));
        EXPECT_NEAR(evaluate_policy(tree, inst).gain, pol.gain, 1e-9);
      }
    }
  }
}

TEST(PrefixClass, Rejections) {
  const Instance tri = three_channel_example(0.1);
  try {
    best_in_prefix_class(tri, Backup::none(), 0, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnequalCosts);
  }
  const Instance eq = equal_cost_instance(1, 12, 3);
  EXPECT_THROW(best_in_prefix_class(eq, Backup::none(), 5, 3), Error);
  GenSpec spec;
  spec.n_min = spec.n_max = 14;
  spec.costs = CostRegime::Equal;
  try {
    best_in_prefix_class(generate(spec), Backup::none(), 0, 14, 1e6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BudgetExceeded);
  }
}

TEST(Bucketing, Sound) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Instance inst = equal_cost_instance(seed, 6, 8);
    for (double eps : {0.05, 0.2, 0.6}) {
      const Bucketing b = bucketize(inst, eps);
      ASSERT_GE(b.instance.num_states(), 2u);
      EXPECT_EQ(b.instance.rewards[0], 0.0);
      for (std::size_t s = 0; s < inst.num_states(); ++s) {
        const double v = b.instance.rewards[static_cast<std::size_t>(b.group[s])];
        EXPECT_LE(v, inst.rewards[s]);
        EXPECT_LT(inst.rewards[s] - v, eps / 2);
        if (s > 0) EXPECT_GE(b.group[s], b.group[s - 1]);
      }
      for (const auto& ch : b.instance.channels) {
        double total = 0.0;
        for (double p : ch.probs) total += p;
        EXPECT_NEAR(total, 1.0, 1e-12);
      }
    }
  }
}

TEST(AdditiveApprox, CheapProbingReturnsNoBackupPolicy) {
  Instance inst;
  inst.rewards = {0.0, 0.5, 1.0};
  inst.channels = {{"a", 0.01, {0.5, 0.3, 0.2}}, {"b", 0.01, {0.6, 0.1, 0.3}}, {"c", 0.01, {0.2, 0.7, 0.1}}};
  inst = validate_instance(inst);
  const AdditiveResult res = additive_approx(inst, 0.05);
  EXPECT_TRUE(res.certificate.no_backup_shortcut);
  ASSERT_TRUE(std::holds_alternative<ThresholdPolicy>(res.policy));
  const ThresholdPolicy& pol = std::get<ThresholdPolicy>(res.policy);
  const ThresholdPolicy ref = opt_no_bkup(inst);
  EXPECT_TRUE(pol.backup.is_none());
  EXPECT_EQ(pol.w, ref.w);
  ASSERT_EQ(pol.levels.size(), ref.levels.size());
  for (std::size_t t = 0; t < ref.levels.size(); ++t) EXPECT_EQ(pol.levels[t].channels, ref.levels[t].channels);

  inst.channels[0].cost = inst.channels[1].cost = inst.channels[2].cost = 0.0;
  EXPECT_TRUE(additive_approx(inst, 0.05).certificate.no_backup_shortcut);
}

TEST(AdditiveApprox, Rejections) {
  const Instance eq = equal_cost_instance(3, 4, 3);
  for (double eps : {0.0, 1.0, -0.1, 1.5}) {
    try {
      additive_approx(eq, eps);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::EpsilonOutOfRange);
    }
  }
  EXPECT_THROW(additive_approx(three_channel_example(0.1), 0.1), Error);
  GenSpec spec;
  spec.n_min = spec.n_max = 40;
  spec.costs = CostRegime::Equal;
  spec.cost_lo = spec.cost_hi = 0.5;
  try {
    additive_approx(generate(spec), 0.05);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BudgetExceeded);
  }
}

TEST(AdditiveApprox, WithinEpsilonOfOptimum) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Instance inst = equal_cost_instance(seed, 6, 4);
    const double opt = exact_dp(inst).value;
    for (double eps : {0.1, 0.3}) {
      const AdditiveResult res = additive_approx(inst, eps);
      EXPECT_LE(res.report.gain, opt + 1e-9);
      EXPECT_GE(res.report.gain, opt - eps * inst.top_reward() - 1e-12) << "seed " << seed << " eps " << eps;
      EXPECT_NEAR(evaluate_policy(res.policy, inst).gain, res.report.gain, 1e-12);
      if (!res.certificate.no_backup_shortcut) {
        EXPECT_EQ(res.certificate.h, prefix_depth(eps / 2));
        // rounding rewards down never raises a policy's gain
        EXPECT_GE(res.report.gain, res.certificate.bucketed_gain - 1e-12);
      }
    }
  }
}

TEST(AdditiveApprox, TwoStateCrossCheck) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Instance inst = equal_cost_instance(seed, 7, 2);
    const double exact = evaluate_policy(two_state_opt(inst), inst).gain;
    const AdditiveResult res = additive_approx(inst, 0.1);
    EXPECT_GE(res.report.gain, exact - 0.1 * inst.top_reward() - 1e-12);
    EXPECT_LE(res.report.gain, exact + 1e-9);
  }
}

TEST(AdditiveApprox, Deterministic) {
  const Instance inst = equal_cost_instance(11, 6, 4);
  set_thread_count(1);
  const AdditiveResult a = additive_approx(inst, 0.2);
  set_thread_count(4);
  const AdditiveResult b = additive_approx(inst, 0.2);
  set_thread_count(0);
  EXPECT_EQ(a.report.gain, b.report.gain);
  EXPECT_EQ(a.certificate.candidates, b.certificate.candidates);
}
