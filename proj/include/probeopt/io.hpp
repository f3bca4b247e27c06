#pragma once

// JSON documents for instances, generator specs and policies. Channels are
// referenced by name in policy files. Policy files keep full precision;
// reports round to 12 significant digits.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>

#include <json.hpp>

#include "probeopt/core.hpp"
#include "probeopt/evaluate.hpp"
#include "probeopt/instance_gen.hpp"
#include "probeopt/lagrange.hpp"
#include "probeopt/policy.hpp"

namespace probeopt {

using Json = nlohmann::json;

inline double round12(double v) {
  if (!std::isfinite(v)) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::stod(buf);
}

inline std::string fmt12(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& what) { throw Error(ErrorCode::Parse, what); }

template <class F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    parse_fail(what + ": " + e.what());
  }
}

inline ChannelId channel_by_name(const Instance& inst, const std::string& name) {
  for (ChannelId j = 0; j < inst.num_channels(); ++j) {
    if (inst.channels[j].name == name) return j;
  }
  throw Error(ErrorCode::UnknownChannel, "no channel named '" + name + "'");
}

}  // namespace detail

inline Json parse_json_text(const std::string& text, const std::string& origin = "input") {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    detail::parse_fail(origin + ": " + e.what());
  }
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) detail::parse_fail("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

inline void write_json(const std::string& path, const Json& doc) {
  std::ofstream out(path);
  if (!out) detail::parse_fail("cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
}

// ---- instances ----

inline Json to_json(const Instance& inst) {
  Json channels = Json::array();
  for (const auto& ch : inst.channels) channels.push_back({{"name", ch.name}, {"cost", ch.cost}, {"probs", ch.probs}});
  return {{"rewards", inst.rewards}, {"channels", channels}};
}

inline Instance instance_from_json(const Json& doc, const ValidationOptions& opts = {}) {
  Instance raw = detail::guarded("instance", [&] {
    Instance out;
    out.rewards = doc.at("rewards").get<std::vector<double>>();
    for (const auto& ch : doc.at("channels")) {
      ChannelStats c;
      c.name = ch.at("name").get<std::string>();
      c.cost = ch.at("cost").get<double>();
      c.probs = ch.at("probs").get<std::vector<double>>();
      out.channels.push_back(std::move(c));
    }
    return out;
  });
  return validate_instance(std::move(raw), opts);
}

inline Instance read_instance(const std::string& path, const ValidationOptions& opts = {}) {
  return instance_from_json(read_json(path), opts);
}

// ---- generator specs ----

inline Json to_json(const GenSpec& spec) {
  static const char* costs[] = {"zero", "equal", "heterogeneous"};
  static const char* shapes[] = {"uniform_simplex", "spiky_top", "two_point"};
  return {{"n_min", spec.n_min},     {"n_max", spec.n_max},   {"k_min", spec.k_min},
          {"k_max", spec.k_max},     {"costs", costs[static_cast<int>(spec.costs)]},
          {"cost_lo", spec.cost_lo}, {"cost_hi", spec.cost_hi},
          {"shape", shapes[static_cast<int>(spec.shape)]},
          {"seed", spec.seed}};
}

inline GenSpec gen_spec_from_json(const Json& doc) {
  GenSpec spec = detail::guarded("generator spec", [&] {
    GenSpec s;
    s.n_min = doc.value("n_min", s.n_min);
    s.n_max = doc.value("n_max", s.n_max);
    s.k_min = doc.value("k_min", s.k_min);
    s.k_max = doc.value("k_max", s.k_max);
    s.cost_lo = doc.value("cost_lo", s.cost_lo);
    s.cost_hi = doc.value("cost_hi", s.cost_hi);
    s.seed = doc.value("seed", s.seed);
    const std::string costs = doc.value("costs", std::string("heterogeneous"));
    if (costs == "zero") {
      s.costs = CostRegime::Zero;
    } else if (costs == "equal") {
      s.costs = CostRegime::Equal;
    } else if (costs == "heterogeneous") {
      s.costs = CostRegime::Heterogeneous;
    } else {
      detail::parse_fail("unknown cost regime '" + costs + "'");
    }
    const std::string shape = doc.value("shape", std::string("uniform_simplex"));
    if (shape == "uniform_simplex") {
      s.shape = ProbShape::UniformSimplex;
    } else if (shape == "spiky_top") {
      s.shape = ProbShape::SpikyTop;
    } else if (shape == "two_point") {
      s.shape = ProbShape::TwoPoint;
    } else {
      detail::parse_fail("unknown distribution shape '" + shape + "'");
    }
    return s;
  });
  check_spec(spec);
  return spec;
}

// ---- threshold policies ----

inline Json to_json(const Instance& inst, const ThresholdPolicy& pol) {
  Json levels = Json::array();
  for (const auto& level : pol.levels) {
    Json names = Json::array();
    for (ChannelId j : level.channels) names.push_back(inst.channels[j].name);
    levels.push_back({{"level", level.level}, {"channels", names}});
  }
  return {{"kind", "threshold"},
          {"backup", pol.backup.is_none() ? Json(nullptr) : Json(inst.channels[pol.backup.id()].name)},
          {"threshold", pol.threshold.is_none() ? Json(nullptr) : Json(pol.threshold.value())},
          {"w", pol.w},
          {"levels", levels}};
}

inline ThresholdPolicy threshold_policy_from_json(const Instance& inst, const Json& doc) {
  ThresholdPolicy pol = detail::guarded("threshold policy", [&] {
    ThresholdPolicy p;
    const Json& b = doc.at("backup");
    if (!b.is_null()) p.backup = Backup::channel(detail::channel_by_name(inst, b.get<std::string>()));
    const Json& t = doc.at("threshold");
    if (!t.is_null()) p.threshold = Threshold::at(t.get<double>());
    for (const auto& level : doc.at("levels")) {
      ProbeLevel l;
      l.level = level.at("level").get<State>();
      for (const auto& name : level.at("channels")) l.channels.push_back(detail::channel_by_name(inst, name.get<std::string>()));
      p.levels.push_back(std::move(l));
    }
    p.w = doc.contains("w") ? doc.at("w").get<State>()
                            : (p.levels.empty() ? static_cast<State>(inst.num_states()) : p.levels.back().level);
    return p;
  });
  check_policy(inst, pol);
  return pol;
}

// ---- decision trees ----

inline Json to_json(const Instance& inst, const DecisionTree& tree) {
  Json nodes = Json::array();
  for (const TreeNode& node : tree.nodes) {
    switch (node.kind) {
      case NodeKind::Probe:
        nodes.push_back({{"kind", "probe"}, {"channel", inst.channels[node.channel].name}, {"children", node.children}});
        break;
      case NodeKind::TransmitProbed: nodes.push_back({{"kind", "transmit_probed"}}); break;
      case NodeKind::TransmitBackup:
        nodes.push_back({{"kind", "transmit_backup"}, {"channel", inst.channels[node.channel].name}});
        break;
      case NodeKind::NoTransmit: nodes.push_back({{"kind", "no_transmit"}}); break;
    }
  }
  return {{"kind", "tree"}, {"root", tree.root}, {"nodes", nodes}};
}

inline DecisionTree tree_from_json(const Instance& inst, const Json& doc) {
  DecisionTree tree = detail::guarded("decision tree", [&] {
    DecisionTree t;
    t.root = doc.at("root").get<std::size_t>();
    for (const auto& n : doc.at("nodes")) {
      TreeNode node;
      const std::string kind = n.at("kind").get<std::string>();
      if (kind == "probe") {
        node.kind = NodeKind::Probe;
        node.channel = detail::channel_by_name(inst, n.at("channel").get<std::string>());
        node.children = n.at("children").get<std::vector<std::size_t>>();
      } else if (kind == "transmit_probed") {
        node.kind = NodeKind::TransmitProbed;
      } else if (kind == "transmit_backup") {
        node.kind = NodeKind::TransmitBackup;
        node.channel = detail::channel_by_name(inst, n.at("channel").get<std::string>());
      } else if (kind == "no_transmit") {
        node.kind = NodeKind::NoTransmit;
      } else {
        detail::parse_fail("unknown node kind '" + kind + "'");
      }
      t.nodes.push_back(std::move(node));
    }
    return t;
  });
  check_tree(inst, tree);
  return tree;
}

inline Json to_json(const Instance& inst, const AnyPolicy& pol) {
  return std::visit([&](const auto& p) { return to_json(inst, p); }, pol);
}

// ---- mixed policies ----

inline Json to_json(const Instance& inst, const MixedPolicy& mix) {
  return {{"kind", "mixed"},
          {"alpha", mix.alpha},
          {"lambda", mix.lambda},
          {"epsilon", mix.epsilon},
          {"rate", mix.rate},
          {"l_plus", mix.l_plus},
          {"l_minus", mix.l_minus},
          {"delta", mix.delta},
          {"sigma_plus", to_json(inst, mix.sigma_plus)},
          {"sigma_minus", to_json(inst, mix.sigma_minus)}};
}

/// Rebuilds a mixed policy; gains and rates are recomputed from the instance.
inline MixedPolicy mixed_from_json(const Instance& inst, const Json& doc) {
  MixedPolicy mix = detail::guarded("mixed policy", [&] {
    MixedPolicy m;
    m.alpha = doc.at("alpha").get<double>();
    m.lambda = doc.at("lambda").get<double>();
    m.epsilon = doc.at("epsilon").get<double>();
    m.rate = doc.value("rate", m.lambda * (1.0 + m.epsilon));
    m.l_plus = doc.value("l_plus", 0.0);
    m.l_minus = doc.value("l_minus", 0.0);
    m.delta = doc.value("delta", 0.0);
    m.sigma_plus = threshold_policy_from_json(inst, doc.at("sigma_plus"));
    m.sigma_minus = threshold_policy_from_json(inst, doc.at("sigma_minus"));
    return m;
  });
  if (!(mix.alpha >= 0.0 && mix.alpha <= 1.0)) throw Error(ErrorCode::InvalidPolicy, "alpha outside [0, 1]");
  const GainReport plus = evaluate_policy(mix.sigma_plus, inst);
  const GainReport minus = evaluate_policy(mix.sigma_minus, inst);
  mix.gain_plus = plus.gain;
  mix.rate_plus = plus.transmit_prob;
  mix.gain_minus = minus.gain;
  mix.rate_minus = minus.transmit_prob;
  mix.busy_slot_gain = mix.alpha * mix.gain_plus + (1.0 - mix.alpha) * mix.gain_minus;
  mix.steady_gain = mix.busy_slot_gain / (1.0 + mix.epsilon);
  return mix;
}

using PolicyDocument = std::variant<ThresholdPolicy, DecisionTree, MixedPolicy>;

inline PolicyDocument policy_from_json(const Instance& inst, const Json& doc) {
  const std::string kind = doc.is_object() ? doc.value("kind", std::string("threshold")) : std::string();
  if (kind == "threshold") return threshold_policy_from_json(inst, doc);
  if (kind == "tree") return tree_from_json(inst, doc);
  if (kind == "mixed") return mixed_from_json(inst, doc);
  detail::parse_fail("unknown policy kind '" + kind + "'");
}

// ---- reports ----

inline Json to_json(const GainReport& rep) {
  Json out = {{"gain", round12(rep.gain)},
              {"success_prob", round12(rep.success_prob)},
              {"probe_cost", round12(rep.probe_cost)},
              {"transmit_prob", round12(rep.transmit_prob)}};
  Json mass = Json::array();
  for (double q : rep.state_mass) mass.push_back(round12(q));
  out["state_mass"] = mass;
  if (rep.altered_x) out["altered_x"] = round12(*rep.altered_x);
  return out;
}

/// Short content digest (FNV-1a over the canonical JSON) for run reports.
inline std::string instance_digest(const Instance& inst) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : to_json(inst).dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace probeopt
