#pragma once

// Exact brute-force optimum over all adaptive decision trees: the
// (K+1) * 2^n dynamic program, its restricted and altered-reward variants,
// the unique-backup search, the dual bound q_star and DOT export of decision
// trees.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "probeopt/core.hpp"
#include "probeopt/evaluate.hpp"
#include "probeopt/parallel.hpp"
#include "probeopt/policy.hpp"

namespace probeopt {

inline constexpr std::size_t kDefaultOracleLimit = 14;

struct OracleOptions {
  std::optional<double> altered_x;  // every transmission earns r - x
  bool allow_no_transmit = false;
  std::optional<ChannelId> forbidden_probe;
  std::optional<std::vector<ChannelId>> allowed_backups;  // unset: all channels
  bool prefer_backup = false;  // tie-break variant: backups before transmit-probed
  std::size_t max_channels = kDefaultOracleLimit;
};

/// Options describing the class P(l): never probe l, back up only on l. The
/// no-backup sentinel gives the class of OPTNOBKUP.
inline OracleOptions restricted_to(Backup backup) {
  OracleOptions opts;
  if (backup.is_none()) {
    opts.allowed_backups = std::vector<ChannelId>{};
  } else {
    opts.forbidden_probe = backup.id();
    opts.allowed_backups = std::vector<ChannelId>{backup.id()};
  }
  return opts;
}

struct OracleResult {
  double value = 0.0;
  DecisionTree tree;
};

// Value table V(b, S) over best state b in {-1..K-1} and unprobed set S.
// Each entry also keeps its argmax action so that trees can be extracted
// from any (b, S).
class ExactDP {
 public:
  ExactDP(Instance inst, OracleOptions opts) : inst_(std::move(inst)), opts_(std::move(opts)) {
    n_ = inst_.num_channels();
    k_ = inst_.num_states();
    if (n_ > opts_.max_channels || n_ >= 31) {
      throw Error(ErrorCode::TooLarge, "oracle limited to n <= " + std::to_string(opts_.max_channels) +
                                           ", got n = " + std::to_string(n_));
    }
    check_options();
    backup_ok_.assign(n_, opts_.allowed_backups ? 0 : 1);
    if (opts_.allowed_backups) {
      for (ChannelId j : *opts_.allowed_backups) backup_ok_[j] = 1;
    }
    blind_.resize(n_);
    for (ChannelId j = 0; j < n_; ++j) blind_[j] = blind_backup_reward(inst_, Backup::channel(j));
    solve();
  }

  std::size_t full_mask() const { return (std::size_t{1} << n_) - 1; }

  double value(State best, std::size_t mask) const { return value_[slot(best, mask)]; }
  double optimum() const { return value(kNoState, full_mask()); }

  /// Argmax tree from (best, mask); node sharing follows the (b, S) keys.
  DecisionTree tree(State best, std::size_t mask) const {
    DecisionTree out;
    std::map<std::size_t, std::size_t> built;
    auto build = [&](auto&& self, State b, std::size_t m) -> std::size_t {
      const std::size_t key = slot(b, m);
      if (auto it = built.find(key); it != built.end()) return it->second;
      const std::int32_t a = action_[key];
      std::size_t id;
      if (a == kTransmitProbed) {
        id = out.transmit_probed();
      } else if (a == kNoTransmit) {
        id = out.no_transmit();
      } else if (a < static_cast<std::int32_t>(n_)) {
        id = out.transmit_backup(static_cast<ChannelId>(a));
      } else {
        const auto j = static_cast<ChannelId>(a) - n_;
        std::vector<std::size_t> children(k_);
        const std::size_t rest = m & ~(std::size_t{1} << j);
        for (std::size_t s = 0; s < k_; ++s) children[s] = self(self, std::max(b, static_cast<State>(s)), rest);
        id = out.add_probe(j, std::move(children));
      }
      built.emplace(key, id);
      return id;
    };
    out.root = build(build, best, mask);
    return out;
  }

  OracleResult result() const { return {optimum(), tree(kNoState, full_mask())}; }

 private:
  static constexpr std::int32_t kTransmitProbed = -1;
  static constexpr std::int32_t kNoTransmit = -2;

  std::size_t slot(State best, std::size_t mask) const {
    return mask * (k_ + 1) + static_cast<std::size_t>(best + 1);
  }

  void check_options() const {
    if (opts_.forbidden_probe) check_channel(inst_, *opts_.forbidden_probe);
    if (opts_.altered_x && !std::isfinite(*opts_.altered_x)) {
      throw Error(ErrorCode::InconsistentOptions, "altered threshold must be finite");
    }
    if (!opts_.allowed_backups) return;
    std::vector<char> seen(n_, 0);
    for (ChannelId j : *opts_.allowed_backups) {
      check_channel(inst_, j);
      if (seen[j]) throw Error(ErrorCode::InconsistentOptions, "backup '" + inst_.channels[j].name + "' listed twice");
      seen[j] = 1;
    }
    // A forbidden probe is only meaningful as the one reserved backup.
    if (opts_.forbidden_probe && !opts_.allowed_backups->empty() &&
        (opts_.allowed_backups->size() != 1 || opts_.allowed_backups->front() != *opts_.forbidden_probe)) {
      throw Error(ErrorCode::InconsistentOptions, "forbidden probe must be the only allowed backup");
    }
  }

  void solve() {
    const double x = opts_.altered_x.value_or(0.0);
    const std::size_t masks = std::size_t{1} << n_;
    value_.assign(masks * (k_ + 1), 0.0);
    action_.assign(masks * (k_ + 1), kNoTransmit);

    for (std::size_t mask = 0; mask < masks; ++mask) {
      for (State b = kNoState; b < static_cast<State>(k_); ++b) {
        double best = -kInf;
        std::int32_t arg = kNoTransmit;
        auto offer = [&](double v, std::int32_t a) {
          if (v > best + 1e-12 || best == -kInf) {
            best = v;
            arg = a;
          }
        };
        auto offer_backups = [&] {
          for (ChannelId j = 0; j < n_; ++j) {
            if ((mask >> j & 1) && backup_ok_[j]) offer(blind_[j] - x, static_cast<std::int32_t>(j));
          }
        };
        if (opts_.prefer_backup) offer_backups();
        if (b >= 0) offer(inst_.reward(b) - x, kTransmitProbed);
        if (!opts_.prefer_backup) offer_backups();
        if (opts_.allow_no_transmit) offer(0.0, kNoTransmit);
        for (ChannelId j = 0; j < n_; ++j) {
          if (!(mask >> j & 1) || (opts_.forbidden_probe && *opts_.forbidden_probe == j)) continue;
          const std::size_t rest = mask & ~(std::size_t{1} << j);
          double v = -inst_.cost(j);
          for (std::size_t s = 0; s < k_; ++s) {
            const double p = inst_.channels[j].probs[s];
            if (p != 0.0) v += p * value_[slot(std::max(b, static_cast<State>(s)), rest)];
          }
          offer(v, static_cast<std::int32_t>(n_ + j));
        }
        // No admissible action (nothing probed, nothing left): stay silent.
        if (best == -kInf) best = 0.0;
        value_[slot(b, mask)] = best;
        action_[slot(b, mask)] = arg;
      }
    }
  }

  Instance inst_;
  OracleOptions opts_;
  std::size_t n_ = 0, k_ = 0;
  std::vector<char> backup_ok_;
  std::vector<double> blind_;
  std::vector<double> value_;
  std::vector<std::int32_t> action_;
};

inline OracleResult exact_dp(const Instance& inst, const OracleOptions& opts = {}) {
  return ExactDP(inst, opts).result();
}

/// max over all trees of G - x S (no-transmit allowed, any backup).
inline OracleResult altered_optimum(const Instance& inst, double x, std::size_t max_channels = kDefaultOracleLimit) {
  OracleOptions opts;
  opts.altered_x = x;
  opts.allow_no_transmit = true;
  opts.max_channels = max_channels;
  return exact_dp(inst, opts);
}

/// Distinct backup channels named by reachable leaves.
inline std::vector<ChannelId> backup_channels(const DecisionTree& tree) {
  std::vector<char> seen(tree.nodes.size(), 0);
  std::vector<ChannelId> out;
  std::vector<std::size_t> stack{tree.root};
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    if (seen[v]) continue;
    seen[v] = 1;
    const TreeNode& node = tree.nodes[v];
    if (node.kind == NodeKind::TransmitBackup &&
        std::find(out.begin(), out.end(), node.channel) == out.end()) {
      out.push_back(node.channel);
    }
    for (std::size_t c : node.children) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct StructureReport {
  bool found = false;
  double optimum = 0.0;
  Backup backup;       // the unique backup of the witness tree (none if it never backs up)
  std::string method;  // "tie-break", "backup-first" or "restricted"
  DecisionTree witness;
};

/// Looks for an optimal tree of the altered system whose backup leaves all
/// name one channel. Tries both tie-break variants first, then the DP
/// restricted to a single backup (or none) for every choice; a restricted
/// optimum equal to the unrestricted one within 1e-9 is such a tree.
inline StructureReport generalized_structure_check(const Instance& inst, double x,
                                                   std::size_t max_channels = kDefaultOracleLimit) {
  OracleOptions base;
  base.altered_x = x;
  base.allow_no_transmit = true;
  base.max_channels = max_channels;

  StructureReport rep;
  auto accept = [&](OracleResult res, const char* method) {
    const auto used = backup_channels(res.tree);
    if (used.size() > 1) return false;
    rep.found = true;
    rep.backup = used.empty() ? Backup::none() : Backup::channel(used.front());
    rep.method = method;
    rep.witness = std::move(res.tree);
    return true;
  };

  OracleResult plain = exact_dp(inst, base);
  rep.optimum = plain.value;
  if (accept(std::move(plain), "tie-break")) return rep;
  OracleOptions variant = base;
  variant.prefer_backup = true;
  if (accept(exact_dp(inst, variant), "backup-first")) return rep;

  for (std::size_t l = 0; l <= inst.num_channels(); ++l) {
    OracleOptions restricted = base;
    restricted.allowed_backups = l == 0 ? std::vector<ChannelId>{} : std::vector<ChannelId>{l - 1};
    OracleResult res = exact_dp(inst, restricted);
    if (res.value >= rep.optimum - 1e-9 && accept(std::move(res), "restricted")) return rep;
  }
  return rep;
}

struct QStarResult {
  double value = 0.0;       // dual value min_L [L rho + A(L)]
  double multiplier = 0.0;  // minimizing L
  // Primal certificate: alpha * (G+, S+) + (1 - alpha) * (G-, S-) with the
  // S-mix equal to rho.
  double alpha = 1.0;
  double gain_plus = 0.0, rate_plus = 0.0;
  double gain_minus = 0.0, rate_minus = 0.0;
  double primal = 0.0;
  std::size_t oracle_calls = 0;
};

/// Q*(eps) by Kelley's cutting-plane method on the convex piecewise-linear
/// dual over L in [0, r_{K-1}]. Every oracle call contributes the exact line
/// G + L (rho - S) of its argmax tree, so the search ends after finitely many
/// calls with matching primal and dual values.
inline QStarResult q_star(const Instance& inst, double lambda, double epsilon,
                          std::size_t max_channels = kDefaultOracleLimit) {
  const double rho = lambda * (1.0 + epsilon);
  if (!(rho > 0.0) || rho > 1.0 + 1e-15) {
    throw Error(ErrorCode::InfeasibleRate, "lambda (1 + eps) = " + std::to_string(rho) + " outside (0, 1]");
  }
  if (inst.num_channels() > max_channels) {
    throw Error(ErrorCode::TooLarge, "oracle limited to n <= " + std::to_string(max_channels));
  }
  struct Line {
    double gain, rate;
    double at(double L, double r) const { return gain + L * (r - rate); }
  };
  std::vector<Line> lines;
  QStarResult out;

  auto cut = [&](double L) {
    const OracleResult res = altered_optimum(inst, L, max_channels);
    const GainReport rep = evaluate_policy(res.tree, inst);
    ++out.oracle_calls;
    return Line{rep.plain_gain(), rep.transmit_prob};
  };

  // The empty tree and the always-transmitting saturated optimum bound the
  // envelope at both ends of the interval.
  lines.push_back({0.0, 0.0});
  {
    OracleOptions saturated;
    saturated.max_channels = max_channels;
    const GainReport sat = evaluate_policy(exact_dp(inst, saturated).tree, inst);
    lines.push_back({sat.plain_gain(), sat.transmit_prob});
  }
  const double top = inst.top_reward();
  std::vector<double> grid{0.0, top};
  for (ChannelId j = 0; j < inst.num_channels(); ++j) grid.push_back(blind_backup_reward(inst, Backup::channel(j)));
  for (double r : inst.rewards) grid.push_back(r);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const auto grid_lines = parallel_map<Line>(grid.size(), [&](std::size_t t) {
    const OracleResult res = altered_optimum(inst, grid[t], max_channels);
    const GainReport rep = evaluate_policy(res.tree, inst);
    return Line{rep.plain_gain(), rep.transmit_prob};
  });
  out.oracle_calls += grid.size();
  lines.insert(lines.end(), grid_lines.begin(), grid_lines.end());

  auto envelope = [&](double L) {
    double v = -kInf;
    for (const Line& l : lines) v = std::max(v, l.at(L, rho));
    return v;
  };
  auto minimize_envelope = [&] {
    std::vector<double> cands{0.0, top};
    for (std::size_t a = 0; a < lines.size(); ++a) {
      for (std::size_t b = a + 1; b < lines.size(); ++b) {
        const double da = rho - lines[a].rate, db = rho - lines[b].rate;
        if (da == db) continue;
        const double L = (lines[b].gain - lines[a].gain) / (da - db);
        if (L > 0.0 && L < top) cands.push_back(L);
      }
    }
    double best_l = 0.0, best_v = kInf;
    for (double L : cands) {
      const double v = envelope(L);
      if (v < best_v - 1e-15 || (v <= best_v + 1e-15 && L < best_l)) {
        best_v = v;
        best_l = L;
      }
    }
    return best_l;
  };

  double L = minimize_envelope();
  for (int iter = 0; iter < 200; ++iter) {
    const double lower = envelope(L);
    const Line fresh = cut(L);
    if (fresh.at(L, rho) <= lower + 1e-12) break;
    lines.push_back(fresh);
    L = minimize_envelope();
  }
  out.multiplier = L;
  out.value = envelope(L);

  // Active lines at L with rates on either side of rho.
  const double tol = 1e-9;
  std::optional<Line> plus, minus;
  for (const Line& l : lines) {
    if (l.at(L, rho) < out.value - tol) continue;
    if (l.rate <= rho && (!plus || l.rate > plus->rate || (l.rate == plus->rate && l.gain > plus->gain))) plus = l;
    if (l.rate >= rho && (!minus || l.rate < minus->rate || (l.rate == minus->rate && l.gain > minus->gain))) minus = l;
  }
  if (!plus) plus = Line{0.0, 0.0};
  if (!minus) minus = *plus;
  out.gain_plus = plus->gain;
  out.rate_plus = plus->rate;
  out.gain_minus = minus->gain;
  out.rate_minus = minus->rate;
  out.alpha = minus->rate > plus->rate ? (minus->rate - rho) / (minus->rate - plus->rate) : 1.0;
  out.primal = out.alpha * plus->gain + (1.0 - out.alpha) * minus->gain;
  return out;
}

/// Graphviz rendering. Probe nodes are labeled by channel name, edges by the
/// observed states that lead to the same child ("0/1"), leaves by action.
inline std::string export_tree(const Instance& inst, const DecisionTree& tree) {
  std::ostringstream out;
  out << "digraph policy {\n  node [fontname=\"Helvetica\"];\n";
  std::vector<char> seen(tree.nodes.size(), 0);
  std::vector<std::size_t> stack{tree.root};
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    if (seen[v]) continue;
    seen[v] = 1;
    const TreeNode& node = tree.nodes[v];
    out << "  n" << v << " [";
    switch (node.kind) {
      case NodeKind::Probe:
        out << "shape=circle, label=\"" << inst.channels[node.channel].name << "\"";
        break;
      case NodeKind::TransmitProbed:
        out << "shape=box, label=\"transmit probed\"";
        break;
      case NodeKind::TransmitBackup:
        out << "shape=box, label=\"transmit " << inst.channels[node.channel].name << "\"";
        break;
      case NodeKind::NoTransmit:
        out << "shape=box, label=\"no-transmit\"";
        break;
    }
    out << "];\n";
    std::vector<std::size_t> targets;
    for (std::size_t c : node.children) {
      if (std::find(targets.begin(), targets.end(), c) == targets.end()) targets.push_back(c);
    }
    for (std::size_t c : targets) {
      std::string label;
      for (std::size_t s = 0; s < node.children.size(); ++s) {
        if (node.children[s] != c) continue;
        if (!label.empty()) label += "/";
        label += std::to_string(s);
      }
      out << "  n" << v << " -> n" << c << " [label=\"" << label << "\"];\n";
      stack.push_back(c);
    }
  }
  out << "}\n";
  return out.str();
}

}  // namespace probeopt
