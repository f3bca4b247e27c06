#pragma once

// Command-line frontend. `run` parses argv, writes the JSON report to `out`
// and one-line diagnostics to `err`, and returns the exit status:
// 0 success, 2 bad input, 3 guarantee violated.

#include <chrono>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "probeopt/probeopt.hpp"

namespace probeopt::cli {

inline constexpr int kOk = 0;
inline constexpr int kInvalid = 2;
inline constexpr int kViolation = 3;

struct Options {
  unsigned threads = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool allow_r0_positive = false;

  std::string instance, policy, spec, out, policy_out, dot;
  std::string mode = "saturated";
  std::optional<double> lambda;
  double epsilon = 0.05;
  bool verify = false;
  std::optional<double> altered_x;
  bool allow_no_transmit = false;
  std::uint64_t slots = 1'000'000;
  std::size_t replications = 16;
  std::size_t seeds = 100, n_max = 8, k_max = 4, k_min = 2;
  std::string costs = "heterogeneous";
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

inline Instance load_instance(const Options& o) {
  if (o.instance.empty()) throw Error(ErrorCode::Parse, "--instance is required");
  ValidationOptions v;
  v.allow_r0_positive = o.allow_r0_positive;
  return read_instance(o.instance, v);
}

inline Json mixed_report(const MixedPolicy& mix) {
  return {{"alpha", round12(mix.alpha)},
          {"rate", round12(mix.rate)},
          {"rate_plus", round12(mix.rate_plus)},
          {"rate_minus", round12(mix.rate_minus)},
          {"gain_plus", round12(mix.gain_plus)},
          {"gain_minus", round12(mix.gain_minus)},
          {"l_plus", round12(mix.l_plus)},
          {"l_minus", round12(mix.l_minus)},
          {"busy_slot_gain", round12(mix.busy_slot_gain)},
          {"steady_gain", round12(mix.steady_gain)}};
}

inline Json sim_report(const SimReport& rep) {
  Json quarters = Json::array();
  for (double q : rep.queue_quarters) quarters.push_back(round12(q));
  return {{"slots", rep.slots},
          {"replications", rep.replications},
          {"gain", round12(rep.gain)},
          {"gain_se", round12(rep.gain_se)},
          {"transmit_rate", round12(rep.transmit_rate)},
          {"success_rate", round12(rep.success_rate)},
          {"probe_cost", round12(rep.probe_cost)},
          {"busy_fraction", round12(rep.busy_fraction)},
          {"busy_transmit_rate", round12(rep.busy_transmit_rate)},
          {"mean_queue", round12(rep.mean_queue)},
          {"max_queue", rep.max_queue},
          {"queue_quarters", quarters},
          {"queue_stable", queue_looks_stable(rep)},
          {"state_histogram", rep.state_histogram}};
}

inline int solve(const Options& o, std::ostream& out) {
  const auto start = Clock::now();
  const Instance inst = load_instance(o);
  Json rep = {{"mode", o.mode}, {"instance_digest", instance_digest(inst)}};
  int status = kOk;

  if (o.mode == "saturated") {
    AnyPolicy pol;
    if (inst.num_states() == 2) {
      pol = to_threshold_policy(inst, two_state_opt(inst));
    } else {
      pol = best_reserve_bkup(inst).policy;
    }
    const GainReport gain = evaluate_policy(pol, inst);
    rep["policy"] = to_json(inst, pol);
    rep["report"] = to_json(gain);
    if (o.verify) {
      const double opt = exact_dp(inst).value;
      const double bound = inst.num_states() == 2 ? 1.0 : 0.8;
      const double ratio = opt > 0 ? gain.gain / opt : 1.0;
      rep["oracle"] = {{"value", round12(opt)}, {"ratio", round12(ratio)}, {"bound", bound}};
      if (ratio < bound - 1e-9) status = kViolation;
    }
    if (!o.policy_out.empty()) write_json(o.policy_out, to_json(inst, pol));
  } else if (o.mode == "additive") {
    const AdditiveResult res = additive_approx(inst, o.epsilon);
    rep["policy"] = to_json(inst, res.policy);
    rep["report"] = to_json(res.report);
    rep["certificate"] = {{"epsilon", o.epsilon},
                          {"h", res.certificate.h},
                          {"candidates", res.certificate.candidates},
                          {"bucketed_states", res.certificate.bucketed_states},
                          {"no_backup_shortcut", res.certificate.no_backup_shortcut}};
    if (o.verify) {
      const double opt = exact_dp(inst).value;
      const double margin = res.report.gain - (opt - o.epsilon * inst.top_reward());
      rep["oracle"] = {{"value", round12(opt)}, {"ratio", round12(opt > 0 ? res.report.gain / opt : 1.0)},
                       {"additive_margin", round12(margin)}};
      if (margin < -1e-9) status = kViolation;
    }
    if (!o.policy_out.empty()) write_json(o.policy_out, to_json(inst, res.policy));
  } else if (o.mode == "unsaturated") {
    if (!o.lambda) throw Error(ErrorCode::RateOutOfRange, "--lambda is required in unsaturated mode");
    const MixedPolicy mix = unsat_approx(inst, *o.lambda, o.epsilon);
    rep["policy"] = to_json(inst, mix);
    rep["report"] = mixed_report(mix);
    if (o.verify) {
      const double q = q_star(inst, *o.lambda, o.epsilon).value;
      const double c = inst.num_states() == 2 ? 1.0 : 2.0 / 3.0;
      const double ratio = q > 0 ? mix.busy_slot_gain / q : 1.0;
      rep["oracle"] = {{"q_star", round12(q)}, {"ratio", round12(ratio)}, {"bound", round12(c * (1 - o.epsilon))}};
      if (mix.busy_slot_gain < c * (1 - o.epsilon) * q - 1e-6 || mix.busy_slot_gain > q + 1e-9) status = kViolation;
    }
    if (!o.policy_out.empty()) write_json(o.policy_out, to_json(inst, mix));
  } else {
    throw Error(ErrorCode::Parse, "unknown mode '" + o.mode + "'");
  }
  rep["timing_ms"] = round12(elapsed_ms(start));
  out << rep.dump(2) << '\n';
  return status;
}

inline int oracle(const Options& o, std::ostream& out) {
  const auto start = Clock::now();
  const Instance inst = load_instance(o);
  OracleOptions opts;
  opts.altered_x = o.altered_x;
  opts.allow_no_transmit = o.allow_no_transmit || o.altered_x.has_value();
  const OracleResult res = exact_dp(inst, opts);
  Json rep = {{"mode", "oracle"},
              {"instance_digest", instance_digest(inst)},
              {"value", round12(res.value)},
              {"probe_nodes", res.tree.probe_node_count()},
              {"policy", to_json(inst, res.tree)}};
  if (o.altered_x) {
    const StructureReport s = generalized_structure_check(inst, *o.altered_x);
    rep["structure"] = {{"found", s.found},
                        {"backup", s.backup.is_none() ? Json(nullptr) : Json(inst.channels[s.backup.id()].name)},
                        {"method", s.method}};
  }
  if (!o.dot.empty()) {
    std::ofstream dot(o.dot);
    if (!dot) throw Error(ErrorCode::Parse, "cannot write '" + o.dot + "'");
    dot << export_tree(inst, res.tree);
  }
  if (!o.policy_out.empty()) write_json(o.policy_out, to_json(inst, res.tree));
  rep["timing_ms"] = round12(elapsed_ms(start));
  out << rep.dump(2) << '\n';
  return kOk;
}

inline int simulate(const Options& o, std::ostream& out) {
  const auto start = Clock::now();
  const Instance inst = load_instance(o);
  if (o.policy.empty()) throw Error(ErrorCode::Parse, "--policy is required");
  const PolicyDocument doc = policy_from_json(inst, read_json(o.policy));
  SimConfig cfg;
  cfg.slots = o.slots;
  cfg.seed = o.seed;
  cfg.replications = o.replications;
  Json rep = {{"mode", "simulate"}, {"instance_digest", instance_digest(inst)}};

  SimReport sim;
  double analytic = 0.0;
  if (const auto* mix = std::get_if<MixedPolicy>(&doc)) {
    cfg.arrivals = BernoulliArrivals{o.lambda.value_or(mix->lambda)};
    sim = simulate_unsaturated(*mix, inst, cfg);
    analytic = mix->busy_slot_gain * sim.busy_fraction;
    rep["analytic_busy_slot_gain"] = round12(mix->busy_slot_gain);
  } else {
    const AnyPolicy pol = std::holds_alternative<ThresholdPolicy>(doc) ? AnyPolicy(std::get<ThresholdPolicy>(doc))
                                                                        : AnyPolicy(std::get<DecisionTree>(doc));
    const GainReport gain = evaluate_policy(pol, inst);
    if (o.lambda) {
      // a single policy under arrivals: every busy slot runs it
      MixedPolicy single;
      single.sigma_plus = single.sigma_minus =
          std::holds_alternative<ThresholdPolicy>(pol) ? std::get<ThresholdPolicy>(pol)
                                                       : throw Error(ErrorCode::InvalidPolicy,
                                                                     "arrival simulation needs a threshold policy");
      single.alpha = 1.0;
      cfg.arrivals = BernoulliArrivals{*o.lambda};
      sim = simulate_unsaturated(single, inst, cfg);
      analytic = gain.gain * sim.busy_fraction;
    } else {
      sim = simulate_saturated(pol, inst, cfg);
      analytic = gain.gain;
    }
  }
  rep["analytic_gain"] = round12(analytic);
  rep["simulation"] = sim_report(sim);
  rep["z_score"] = round12(sim.gain_se > 0 ? (sim.gain - analytic) / sim.gain_se : 0.0);
  rep["timing_ms"] = round12(elapsed_ms(start));
  out << rep.dump(2) << '\n';
  return kOk;
}

inline int gen(const Options& o, std::ostream& out) {
  if (o.spec.empty() || o.out.empty()) throw Error(ErrorCode::Parse, "--spec and --out are required");
  GenSpec spec = gen_spec_from_json(read_json(o.spec));
  if (o.seed_given) spec.seed = o.seed;
  const Instance inst = generate(spec);
  write_json(o.out, to_json(inst));
  out << Json{{"mode", "gen"},
              {"instance_digest", instance_digest(inst)},
              {"channels", inst.num_channels()},
              {"states", inst.num_states()},
              {"seed", spec.seed}}
             .dump(2)
      << '\n';
  return kOk;
}

struct CheckTally {
  std::size_t instances = 0;
  double saturated = 1.0, altered = 1.0, unsaturated = kInf;
  double two_state_gap = 0.0, class_gap = 0.0, additive_margin = kInf;
  std::vector<std::string> violations;
};

inline void check_instance(const Instance& inst, std::uint64_t seed, const std::string& tag, CheckTally& t) {
  ++t.instances;
  auto fail = [&](const std::string& what) { t.violations.push_back(tag + ": " + what); };
  const bool two = inst.num_states() == 2;
  const ReservePlanner planner(inst);

  const double opt = exact_dp(inst).value;
  const double best = best_reserve_bkup(planner, Threshold::none()).report.gain;
  if (opt > 0) {
    t.saturated = std::min(t.saturated, best / opt);
    if (best < 0.8 * opt - 1e-9) fail("saturated ratio below 4/5");
  }
  if (two) {
    const double gap = std::abs(evaluate_policy(two_state_opt(inst), inst).gain - opt);
    t.two_state_gap = std::max(t.two_state_gap, gap);
    if (gap > 1e-9) fail("two-state policy not optimal");
  }
  for (std::size_t l = 0; l <= inst.num_channels(); ++l) {
    const Backup b = l == 0 ? Backup::none() : Backup::channel(l - 1);
    const double gap = std::abs(evaluate_policy(planner.plan(b, Threshold::none()), inst).gain -
                                exact_dp(inst, restricted_to(b)).value);
    t.class_gap = std::max(t.class_gap, gap);
    if (gap > 1e-9) fail("threshold policy not optimal in its backup class");
  }

  std::mt19937_64 rng(seed);
  const double x = std::uniform_real_distribution<double>(0.0, inst.top_reward())(rng);
  const double alt_opt = altered_optimum(inst, x).value;
  const double alt = best_reserve_bkup(planner, Threshold::at(x)).report.gain;
  const double c = two ? 1.0 : 2.0 / 3.0;
  if (alt_opt > 0) {
    t.altered = std::min(t.altered, alt / alt_opt);
    if (alt < c * alt_opt - 1e-9) fail("altered-reward ratio below bound");
  }

  for (double lambda : {0.2, 0.5, 0.8}) {
    const double eps = 0.05;
    const MixedPolicy mix = unsat_approx(inst, lambda, eps);
    const double q = q_star(inst, lambda, eps).value;
    if (q > 0) t.unsaturated = std::min(t.unsaturated, mix.busy_slot_gain / q);
    if (mix.busy_slot_gain < c * (1 - eps) * q - 1e-6) fail("unsaturated gain below bound");
    if (mix.busy_slot_gain > q + 1e-9) fail("unsaturated gain above the LP optimum");
  }

  bool equal = true;
  for (ChannelId j = 1; j < inst.num_channels(); ++j) equal = equal && std::abs(inst.cost(j) - inst.cost(0)) <= 1e-12;
  if (equal) {
    try {
      const double eps = 0.2;
      const double margin = additive_approx(inst, eps).report.gain - (opt - eps * inst.top_reward());
      t.additive_margin = std::min(t.additive_margin, margin);
      if (margin < -1e-9) fail("additive scheme misses its guarantee");
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BudgetExceeded) throw;
    }
  }
}

inline int check(const Options& o, std::ostream& out) {
  const auto start = Clock::now();
  CheckTally t;
  if (!o.instance.empty()) {
    check_instance(load_instance(o), o.seed, o.instance, t);
  } else {
    GenSpec spec;
    spec.n_max = o.n_max;
    spec.k_min = o.k_min;
    spec.k_max = o.k_max;
    spec.costs = o.costs == "zero" ? CostRegime::Zero : o.costs == "equal" ? CostRegime::Equal : CostRegime::Heterogeneous;
    if (o.costs != "zero" && o.costs != "equal" && o.costs != "heterogeneous") {
      throw Error(ErrorCode::Parse, "unknown cost regime '" + o.costs + "'");
    }
    if (o.n_max > kDefaultOracleLimit) throw Error(ErrorCode::TooLarge, "--n-max above the oracle limit");
    for (std::size_t i = 0; i < o.seeds; ++i) {
      spec.seed = o.seed + i;
      spec.shape = static_cast<ProbShape>(i % 3);
      check_instance(generate(spec), spec.seed, "seed " + std::to_string(spec.seed), t);
    }
  }
  auto finite = [](double v) { return std::isfinite(v) ? Json(round12(v)) : Json(nullptr); };
  const Json rep = {{"mode", "check"},
                    {"instances", t.instances},
                    {"worst",
                     {{"saturated_ratio", finite(t.saturated)},
                      {"altered_ratio", finite(t.altered)},
                      {"unsaturated_ratio", finite(t.unsaturated)},
                      {"two_state_gap", finite(t.two_state_gap)},
                      {"class_gap", finite(t.class_gap)},
                      {"additive_margin", finite(t.additive_margin)}}},
                    {"violations", t.violations},
                    {"timing_ms", round12(elapsed_ms(start))}};
  out << rep.dump(2) << '\n';
  return t.violations.empty() ? kOk : kViolation;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Channel probing policies: solvers, oracle, simulation"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--threads", o.threads, "worker thread cap (0 = PROBEOPT_THREADS or hardware)");
  auto* seed_opt = app.add_option("--seed", o.seed, "seed for every random draw")->capture_default_str();
  app.add_flag("--allow-r0-positive", o.allow_r0_positive, "accept instances with r_0 > 0");

  auto* solve = app.add_subcommand("solve", "compute a policy for an instance");
  solve->add_option("--instance", o.instance)->required();
  solve->add_option("--mode", o.mode)->check(CLI::IsMember({"saturated", "additive", "unsaturated"}));
  solve->add_option("--lambda", o.lambda);
  solve->add_option("--epsilon", o.epsilon)->capture_default_str();
  solve->add_flag("--verify", o.verify, "compare against the exact oracle");
  solve->add_option("--policy-out", o.policy_out);

  auto* orc = app.add_subcommand("oracle", "exact optimum by dynamic programming");
  orc->add_option("--instance", o.instance)->required();
  orc->add_option("--altered-x", o.altered_x);
  orc->add_flag("--allow-no-transmit", o.allow_no_transmit);
  orc->add_option("--dot", o.dot, "write the optimal tree as a graph description");
  orc->add_option("--policy-out", o.policy_out);

  auto* sim = app.add_subcommand("simulate", "Monte-Carlo run of a stored policy");
  sim->add_option("--policy", o.policy)->required();
  sim->add_option("--instance", o.instance)->required();
  sim->add_option("--slots", o.slots)->capture_default_str();
  sim->add_option("--replications", o.replications)->capture_default_str();
  sim->add_option("--lambda", o.lambda);
  sim->add_option("--epsilon", o.epsilon);

  auto* g = app.add_subcommand("gen", "generate an instance from a spec");
  g->add_option("--spec", o.spec)->required();
  g->add_option("--out", o.out)->required();

  auto* chk = app.add_subcommand("check", "run the guarantee suite");
  chk->add_option("--instance", o.instance);
  chk->add_option("--seeds", o.seeds)->capture_default_str();
  chk->add_option("--n-max", o.n_max)->capture_default_str();
  chk->add_option("--k-min", o.k_min)->capture_default_str();
  chk->add_option("--k-max", o.k_max)->capture_default_str();
  chk->add_option("--costs", o.costs)->check(CLI::IsMember({"zero", "equal", "heterogeneous"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: Usage: " << e.what() << '\n';
    return kInvalid;
  }
  o.seed_given = seed_opt->count() > 0;
  set_thread_count(o.threads);

  try {
    if (solve->parsed()) return detail::solve(o, out);
    if (orc->parsed()) return detail::oracle(o, out);
    if (sim->parsed()) return detail::simulate(o, out);
    if (g->parsed()) return detail::gen(o, out);
    return detail::check(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    err << "error: Internal: " << e.what() << '\n';
    return kInvalid;
  }
}

}  // namespace probeopt::cli
