#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "probeopt/evaluate.hpp"
#include "probeopt/instance_gen.hpp"
#include "probeopt/multi_state.hpp"
#include "probeopt/oracle.hpp"
#include "probeopt/two_state.hpp"
#include "support/fixtures.hpp"
#include "support/reference.hpp"

using namespace probeopt;

TEST(ExactDP, MatchesReference) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Instance inst = fixtures::random_instance(seed, 5, 2, 4);
    EXPECT_NEAR(exact_dp(inst).value, reference::best_tree(inst), 1e-12) << "seed " << seed;
    const double x = unit(rng) * inst.top_reward();
    reference::Rules rules;
    rules.x = x;
    rules.allow_silence = true;
    EXPECT_NEAR(altered_optimum(inst, x).value, reference::best_tree(inst, rules), 1e-12) << "seed " << seed;
  }
}

TEST(ExactDP, TreeValueMatchesTable) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Instance inst = fixtures::random_instance(seed, 9, 2, 5);
    const OracleResult res = exact_dp(inst);
    EXPECT_NO_THROW(check_tree(inst, res.tree));
    EXPECT_NEAR(evaluate_policy(res.tree, inst).gain, res.value, 1e-12);
    const double x = 0.37 * inst.top_reward();
    const OracleResult alt = altered_optimum(inst, x);
    EXPECT_NEAR(evaluate_policy(alt.tree, inst, x).gain, alt.value, 1e-12);
  }
}

TEST(ExactDP, IndependentOfChannelOrder) {
  std::mt19937_64 rng(9);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Instance inst = fixtures::random_instance(seed, 9, 2, 4);
    Instance shuffled = inst;
    std::shuffle(shuffled.channels.begin(), shuffled.channels.end(), rng);
    EXPECT_NEAR(exact_dp(inst).value, exact_dp(shuffled).value, 1e-12);
    EXPECT_NEAR(altered_optimum(inst, 0.2).value, altered_optimum(shuffled, 0.2).value, 1e-12);
  }
}

TEST(ExactDP, ThreeChannelTree) {
  const Instance tri = three_channel_example(0.1);
  const ExactDP dp(tri, {});
  const DecisionTree t = dp.tree(kNoState, dp.full_mask());
  const TreeNode& root = t.nodes[t.root];
  ASSERT_EQ(root.kind, NodeKind::Probe);
  EXPECT_EQ(tri.channels[root.channel].name, "i");
  EXPECT_EQ(t.nodes[root.children[2]].kind, NodeKind::TransmitProbed);
  const TreeNode& on_zero = t.nodes[root.children[0]];
  ASSERT_EQ(on_zero.kind, NodeKind::Probe);
  EXPECT_EQ(tri.channels[on_zero.channel].name, "j");
  // After i = 1 the hand values are: probe j first 0.57835, probe k first
  // 0.5765, so the optimum continues with j.
  const std::size_t jk = 0b110;
  EXPECT_NEAR(dp.value(1, jk), 0.57835, 1e-12);
  const double k_first = -0.005 + 0.1 * 1.0 + 0.9 * dp.value(1, 0b010);
  EXPECT_NEAR(k_first, 0.5765, 1e-12);
  const TreeNode& on_one = t.nodes[root.children[1]];
  ASSERT_EQ(on_one.kind, NodeKind::Probe);
  EXPECT_EQ(tri.channels[on_one.channel].name, "j");
  EXPECT_NEAR(dp.optimum(), reference::best_tree(tri), 1e-12);
}

TEST(ExactDP, TwoStateAgreement) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Instance inst = fixtures::random_instance(seed, 10, 2, 2);
    EXPECT_NEAR(exact_dp(inst).value, evaluate_policy(two_state_opt(inst), inst).gain, 1e-9);
  }
}

TEST(ExactDP, RestrictedClassMatchesReserveBkup) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Instance inst = fixtures::random_instance(seed, 8, 2, 4);
    for (std::size_t l = 0; l <= inst.num_channels(); ++l) {
      const Backup b = l == 0 ? Backup::none() : Backup::channel(l - 1);
      EXPECT_NEAR(exact_dp(inst, restricted_to(b)).value, evaluate_policy(reserve_bkup(inst, b), inst).gain, 1e-9)
          << "seed " << seed << " backup " << l;
    }
  }
}

TEST(ExactDP, Errors) {
  GenSpec spec;
  spec.n_min = spec.n_max = 15;
  const Instance big = generate(spec);
  EXPECT_THROW(exact_dp(big), Error);
  spec.n_min = spec.n_max = 3;
  const Instance small = generate(spec);
  OracleOptions bad;
  bad.forbidden_probe = 0;
  bad.allowed_backups = std::vector<ChannelId>{1};
  try {
    exact_dp(small, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InconsistentOptions);
  }
  OracleOptions twice;
  twice.allowed_backups = std::vector<ChannelId>{1, 1};
  EXPECT_THROW(exact_dp(small, twice), Error);
  OracleOptions unknown;
  unknown.allowed_backups = std::vector<ChannelId>{9};
  EXPECT_THROW(exact_dp(small, unknown), Error);
}

TEST(AlteredOptimum, Boundaries) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Instance inst = fixtures::random_instance(seed, 7, 2, 4);
    EXPECT_NEAR(altered_optimum(inst, 0.0).value, exact_dp(inst).value, 1e-12);
    const OracleResult above = altered_optimum(inst, inst.top_reward() + 0.01);
    EXPECT_EQ(above.value, 0.0);
    EXPECT_EQ(above.tree.nodes[above.tree.root].kind, NodeKind::NoTransmit);
  }
}

TEST(AlteredOptimum, SandwichesBestReserveBkup) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::uint64_t seed = 0; seed < 80; ++seed) {
    const Instance inst = fixtures::random_instance(seed, 7, 2, 4);
    const double x = unit(rng) * inst.top_reward();
    const double opt = altered_optimum(inst, x).value;
    const double got = best_reserve_bkup(inst, Threshold::at(x)).report.gain;
    EXPECT_LE(got, opt + 1e-9);
    EXPECT_GE(got, 2.0 / 3.0 * opt - 1e-9);
    if (inst.num_states() == 2) {
      EXPECT_NEAR(got, opt, 1e-9);
    }
  }
}

TEST(StructureCheck, Examples) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Instance inst = fixtures::random_instance(seed, 7, 2, 2);
    EXPECT_TRUE(generalized_structure_check(inst, 0.3 * inst.top_reward()).found);
    const StructureReport above = generalized_structure_check(inst, 1.5);
    EXPECT_TRUE(above.found);
    EXPECT_TRUE(above.backup.is_none());
  }
  const StructureReport tri = generalized_structure_check(three_channel_example(0.1), 0.0);
  EXPECT_TRUE(tri.found);
  EXPECT_TRUE(tri.backup.is_none() || tri.backup.is(2));
}

TEST(StructureCheck, WitnessIsOptimal) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Instance inst = fixtures::random_instance(seed, 7, 3, 4);
    const double x = 0.25 * inst.top_reward();
    const StructureReport rep = generalized_structure_check(inst, x);
    if (!rep.found) continue;
    EXPECT_LE(backup_channels(rep.witness).size(), 1u);
    EXPECT_NEAR(evaluate_policy(rep.witness, inst, x).gain, rep.optimum, 1e-9);
  }
}

TEST(QStar, FullRateIsSaturatedOptimum) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance inst = fixtures::random_instance(seed, 6, 2, 4);
    EXPECT_NEAR(q_star(inst, 0.5, 1.0).value, exact_dp(inst).value, 1e-9);
  }
}

TEST(QStar, PrimalCertificateAndWeakDuality) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Instance inst = fixtures::random_instance(seed, 5, 2, 4);
    const double lambda = 0.1 + 0.8 * unit(rng);
    const double eps = 0.05;
    const double rho = lambda * (1 + eps);
    const QStarResult q = q_star(inst, lambda, eps);
    // the two-tree mix is feasible and attains the dual value
    EXPECT_NEAR(q.alpha * q.rate_plus + (1 - q.alpha) * q.rate_minus, rho, 1e-12);
    EXPECT_GE(q.alpha, 0.0);
    EXPECT_LE(q.alpha, 1.0);
    EXPECT_NEAR(q.primal, q.value, 1e-9);
    // any multiplier gives an upper bound
    for (int t = 0; t < 5; ++t) {
      const double L = unit(rng) * inst.top_reward();
      reference::Rules rules;
      rules.x = L;
      rules.allow_silence = true;
      EXPECT_LE(q.value, L * rho + reference::best_tree(inst, rules) + 1e-12);
    }
    // mixing the saturated optimum with silence is feasible
    EXPECT_GE(q.value, rho * exact_dp(inst).value - 1e-12);
  }
}

TEST(QStar, MonotoneInEpsilon) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance inst = fixtures::random_instance(seed, 6, 2, 4);
    double prev = -1.0;
    for (double eps : {0.0, 0.05, 0.1, 0.2, 0.4}) {
      const double v = q_star(inst, 0.6, eps).value;
      EXPECT_GE(v, prev - 1e-12);
      prev = v;
    }
  }
}

TEST(QStar, RejectsInfeasibleRate) {
  try {
    q_star(three_channel_example(0.1), 0.9, 0.2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleRate);
  }
}

TEST(ExportTree, Shapes) {
  const Instance tri = three_channel_example(0.1);
  DecisionTree blind;
  blind.root = blind.transmit_backup(2);
  const std::string one = export_tree(tri, blind);
  EXPECT_NE(one.find("transmit k"), std::string::npos);
  EXPECT_EQ(std::count(one.begin(), one.end(), '>'), 0);

  DecisionTree silent;
  silent.root = silent.no_transmit();
  EXPECT_NE(export_tree(tri, silent).find("no-transmit"), std::string::npos);

  const OracleResult res = exact_dp(tri);
  // i at the root, j after i = 0 and after i = 1, one shared k node
  EXPECT_EQ(res.tree.probe_node_count(), 4u);
  const std::string dot = export_tree(tri, res.tree);
  EXPECT_NE(dot.find("label=\"0/1\""), std::string::npos);
  EXPECT_NE(dot.find("label=\"0/1/2\""), std::string::npos);
  EXPECT_NE(dot.find("label=\"0\""), std::string::npos);
  EXPECT_NE(dot.find("label=\"1\""), std::string::npos);
  EXPECT_NE(dot.find("digraph"), std::string::npos);
}
