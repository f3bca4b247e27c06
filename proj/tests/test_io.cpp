#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "probeopt/additive.hpp"
#include "probeopt/instance_gen.hpp"
#include "probeopt/io.hpp"
#include "probeopt/lagrange.hpp"
#include "probeopt/multi_state.hpp"
#include "probeopt/oracle.hpp"
#include "support/fixtures.hpp"

using namespace probeopt;

namespace {

std::string sample(const std::string& name) { return std::string(PROBEOPT_SAMPLES_DIR) + "/" + name; }

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::Parse;
}

}  // namespace

TEST(InstanceJson, SamplesLoad) {
  const Instance tri = read_instance(sample("three_channel.json"));
  const Instance built = three_channel_example(0.1);
  ASSERT_EQ(tri.num_channels(), 3u);
  for (ChannelId j = 0; j < 3; ++j) {
    EXPECT_EQ(tri.channels[j].name, built.channels[j].name);
    EXPECT_NEAR(tri.cost(j), built.cost(j), 1e-15);
    for (State s = 0; s < 3; ++s) EXPECT_NEAR(tri.prob(j, s), built.prob(j, s), 1e-15);
  }
  EXPECT_NO_THROW(read_instance(sample("two_channel.json")));
  EXPECT_NO_THROW(read_instance(sample("equal_costs.json")));
}

TEST(InstanceJson, RoundTrip) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Instance inst = fixtures::random_instance(seed, 8, 2, 6);
    const Instance back = instance_from_json(parse_json_text(to_json(inst).dump()));
    EXPECT_EQ(back.rewards, inst.rewards);
    for (ChannelId j = 0; j < inst.num_channels(); ++j) EXPECT_EQ(back.channels[j].probs, inst.channels[j].probs);
    EXPECT_EQ(instance_digest(back), instance_digest(inst));
  }
}

TEST(InstanceJson, Errors) {
  EXPECT_EQ(code_of([] { parse_json_text("{not json"); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { instance_from_json(Json{{"rewards", {0, 1}}}); }), ErrorCode::Parse);
  EXPECT_EQ(code_of([] { instance_from_json(parse_json_text(R"({"rewards":[0,1],"channels":[{"name":"a","cost":"x","probs":[0.5,0.5]}]})")); }),
            ErrorCode::Parse);
  EXPECT_EQ(code_of([] { instance_from_json(parse_json_text(R"({"rewards":[0.5,1],"channels":[{"name":"a","cost":0.1,"probs":[0.5,0.5]}]})")); }),
            ErrorCode::RewardOutOfRange);
  const Json positive = parse_json_text(R"({"rewards":[0.2,1],"channels":[{"name":"a","cost":0.1,"probs":[0.5,0.5]}]})");
  ValidationOptions opts;
  opts.allow_r0_positive = true;
  EXPECT_NO_THROW(instance_from_json(positive, opts));
  EXPECT_EQ(code_of([] { read_instance("/nonexistent/file.json"); }), ErrorCode::Parse);
}

TEST(GenSpecJson, RoundTripAndSample) {
  const GenSpec spec = gen_spec_from_json(read_json(sample("gen_spec.json")));
  EXPECT_EQ(spec.seed, 42u);
  EXPECT_EQ(spec.n_min, 4u);
  const GenSpec back = gen_spec_from_json(to_json(spec));
  EXPECT_EQ(to_json(back), to_json(spec));
  EXPECT_EQ(code_of([] { gen_spec_from_json(Json{{"costs", "cheap"}}); }), ErrorCode::Parse);
  EXPECT_THROW(gen_spec_from_json(Json{{"n_min", 0}}), Error);
}

TEST(PolicyJson, ThresholdRoundTripKeepsGain) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Instance inst = fixtures::random_instance(seed, 8, 2, 5);
    for (Threshold t : {Threshold::none(), Threshold::at(0.3)}) {
      const ThresholdPolicy pol = best_reserve_bkup(inst, t).policy;
      const Json doc = parse_json_text(to_json(inst, pol).dump());
      const PolicyDocument back = policy_from_json(inst, doc);
      ASSERT_TRUE(std::holds_alternative<ThresholdPolicy>(back));
      const ThresholdPolicy& p = std::get<ThresholdPolicy>(back);
      EXPECT_EQ(p.backup, pol.backup);
      EXPECT_EQ(p.threshold, pol.threshold);
      EXPECT_EQ(p.w, pol.w);
      EXPECT_EQ(evaluate_policy(p, inst).gain, evaluate_policy(pol, inst).gain);
    }
  }
}

TEST(PolicyJson, TreeAndMixedRoundTrip) {
  const Instance tri = three_channel_example(0.1);
  const OracleResult opt = exact_dp(tri);
  const PolicyDocument tree = policy_from_json(tri, parse_json_text(to_json(tri, opt.tree).dump()));
  ASSERT_TRUE(std::holds_alternative<DecisionTree>(tree));
  EXPECT_EQ(evaluate_policy(std::get<DecisionTree>(tree), tri).gain, evaluate_policy(opt.tree, tri).gain);

  const MixedPolicy mix = unsat_approx(tri, 0.4, 0.05);
  const PolicyDocument back = policy_from_json(tri, parse_json_text(to_json(tri, mix).dump()));
  ASSERT_TRUE(std::holds_alternative<MixedPolicy>(back));
  const MixedPolicy& m = std::get<MixedPolicy>(back);
  EXPECT_EQ(m.alpha, mix.alpha);
  EXPECT_EQ(m.busy_slot_gain, mix.busy_slot_gain);

  Json bad = to_json(tri, opt.tree);
  bad["nodes"][0]["channel"] = "nowhere";
  EXPECT_EQ(code_of([&] { policy_from_json(tri, bad); }), ErrorCode::UnknownChannel);
  EXPECT_EQ(code_of([&] { policy_from_json(tri, Json{{"kind", "lottery"}}); }), ErrorCode::Parse);
}

TEST(Reports, TwelveSignificantDigits) {
  EXPECT_EQ(fmt12(1.0 / 3.0), "0.333333333333");
  EXPECT_EQ(round12(2.0 / 3.0), 0.666666666667);
  GainReport rep;
  rep.gain = 1.0 / 7.0;
  EXPECT_EQ(to_json(rep)["gain"].dump(), "0.142857142857");
}
