#pragma once

// Equilibrium machinery: pure tabular strategies with exact evaluation,
// zero-sum matrix games by fictitious play, brute-force equilibria for tiny
// instances, strategy averaging, exploitability estimation, and the
// decompositional fictitious self-play loop that ties the per-node solvers
// together.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "irg/attacker.hpp"
#include "irg/decomposition.hpp"
#include "irg/dynamics.hpp"
#include "irg/io.hpp"
#include "irg/observation.hpp"
#include "irg/parallel.hpp"
#include "irg/rng.hpp"
#include "irg/stopping.hpp"

namespace irg {

// ---------------------------------------------------------------------------
// pure tabular strategies (enumerable; the brute-force oracle plays these)

using DefenderMap = std::map<int, DefenderAction>;  // zone id -> action
using AttackerMap = std::array<AttackerAction, 3>;  // class -> action

class TabularDefenderLocal : public DefenderLocalStrategy {
 public:
  explicit TabularDefenderLocal(DefenderMap map) : map_(std::move(map)) {
    if (map_.empty()) throw std::invalid_argument("tabular defender map is empty");
  }

  DefenderAction action(int zone) const {
    auto it = map_.find(zone);
    if (it == map_.end())
      throw std::out_of_range("tabular defender map has no entry for zone " +
                              std::to_string(zone));
    return it->second;
  }

  DefenderAction act(int zone, const NodeBelief&, Rng&) override { return action(zone); }

  DefenderStage stage() const override {
    DefenderStage st;
    for (const auto& [z, a] : map_) st.rows[z] = DefenderStageRow::pure(a);
    return st;
  }

  std::string serialize() const override {
    std::ostringstream out;
    out << "tabular " << map_.size() << '\n';
    for (const auto& [z, a] : map_)
      out << "zone " << z << " action " << encode_defender_action(a) << '\n';
    return out.str();
  }

  const DefenderMap& map() const { return map_; }

 private:
  DefenderMap map_;
};

class TabularAttackerLocal : public AttackerLocalStrategy {
 public:
  explicit TabularAttackerLocal(AttackerMap map) : map_(map) {
    if (map_[0] == AttackerAction::brute || map_[0] == AttackerAction::exploit)
      throw std::invalid_argument(
          "tabular attacker map: class 0 cannot attack before reconnaissance");
  }

  AttackerAction action(int attacker_cls) const { return map_.at(attacker_cls); }

  AttackerAction act(int attacker_cls, const std::vector<double>&, Rng&) override {
    return action(attacker_cls);
  }

  AttackerStage stage() const override {
    AttackerStage st;
    for (int cls = 0; cls < 3; ++cls) {
      st.prob[cls] = {0.0, 0.0, 0.0, 0.0};
      st.prob[cls][static_cast<int>(map_[cls])] = 1.0;
    }
    return st;
  }

  std::string serialize() const override {
    std::ostringstream out;
    out << "tabular " << static_cast<int>(map_[0]) << ' ' << static_cast<int>(map_[1])
        << ' ' << static_cast<int>(map_[2]) << '\n';
    return out.str();
  }

  const AttackerMap& map() const { return map_; }

 private:
  AttackerMap map_;
};

// all zone->action maps for one node over a given action set, lexicographic
inline std::vector<DefenderMap> enumerate_defender_maps(
    const GameConfig& cfg, const std::vector<DefenderAction>& actions) {
  if (actions.empty()) throw std::invalid_argument("empty defender action set");
  std::vector<DefenderMap> out;
  std::size_t count = 1;
  for (std::size_t z = 0; z < cfg.zones.size(); ++z) count *= actions.size();
  out.reserve(count);
  std::vector<std::size_t> idx(cfg.zones.size(), 0);
  for (;;) {
    DefenderMap m;
    for (std::size_t z = 0; z < cfg.zones.size(); ++z)
      m[cfg.zones[z].id] = actions[idx[z]];
    out.push_back(std::move(m));
    std::size_t z = 0;
    while (z < idx.size() && ++idx[z] == actions.size()) idx[z++] = 0;
    if (z == idx.size()) break;
  }
  return out;
}

inline std::vector<DefenderMap> enumerate_defender_maps(const GameConfig& cfg) {
  return enumerate_defender_maps(cfg, defender_actions(cfg));
}

// class-0 choices {null, recon}, class-1 all four, class-2 pinned to null
// (a compromised node's action has no effect on the dynamics)
inline std::vector<AttackerMap> enumerate_attacker_maps() {
  std::vector<AttackerMap> out;
  for (AttackerAction a0 : {AttackerAction::null, AttackerAction::recon})
    for (AttackerAction a1 : {AttackerAction::null, AttackerAction::recon,
                              AttackerAction::brute, AttackerAction::exploit})
      out.push_back({a0, a1, AttackerAction::null});
  return out;
}

// ---------------------------------------------------------------------------
// exact evaluation of pure tabular profiles

// Expected discounted defender return of a pure profile, computed exactly.
// Zones evolve deterministically under the defender maps; each node's class
// follows an independent three-state chain, so expectations reduce to
// per-node distributions and the deterministic reachability of the zones.
inline double exact_pure_value(const GameConfig& cfg, const std::vector<DefenderMap>& def,
                               const std::vector<AttackerMap>& atk, int horizon) {
  int n = cfg.graph.size();
  if (static_cast<int>(def.size()) != n || static_cast<int>(atk.size()) != n)
    throw std::invalid_argument("exact_pure_value: one map per node required");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");

  std::vector<int> zone(n);
  std::vector<std::array<double, 3>> rho(n, {1.0, 0.0, 0.0});
  for (int i = 0; i < n; ++i) zone[i] = cfg.graph.initial_zone[i];

  auto defender_action_at = [&](int i) {
    auto it = def[i].find(zone[i]);
    if (it == def[i].end())
      throw std::out_of_range("defender map missing zone " + std::to_string(zone[i]));
    return it->second;
  };

  double total = 0.0, discount = 1.0;
  for (int t = 1; t <= horizon; ++t) {
    std::vector<DefenderAction> act(n);
    for (int i = 0; i < n; ++i) act[i] = defender_action_at(i);

    double stage = 0.0;
    for (int i = 0; i < n; ++i) {
      bool reachable = true;
      int cur = cfg.graph.node_ids[i];
      while (cur != kGateway) {
        int idx = cfg.graph.index_of(cur);
        if (!cfg.zone_active(zone[idx])) {
          reachable = false;
          break;
        }
        cur = cfg.graph.parent[idx];
      }
      stage += cfg.eta * cfg.utility_scale * (reachable ? 1.0 : 0.0);
      stage -= rho[i][2] + action_cost(cfg, act[i]);
    }
    total += discount * stage;
    discount *= cfg.gamma;

    for (int i = 0; i < n; ++i) {
      if (!act[i].is_null()) {
        rho[i] = {1.0, 0.0, 0.0};  // eviction resets the class
      } else {
        std::array<double, 3> next = {0.0, 0.0, 0.0};
        // class 0: reconnaissance moves to 1, anything else stays
        if (atk[i][0] == AttackerAction::recon)
          next[1] += rho[i][0];
        else
          next[0] += rho[i][0];
        // class 1: an attack compromises with its success probability
        double q = 0.0;
        if (atk[i][1] == AttackerAction::brute) q = cfg.p_brute;
        if (atk[i][1] == AttackerAction::exploit) q = cfg.p_exploit;
        next[1] += rho[i][1] * (1.0 - q);
        next[2] += rho[i][1] * q;
        // class 2 is absorbing under a null defender action
        next[2] += rho[i][2];
        rho[i] = next;
      }
      zone[i] = zone_after(zone[i], act[i]);
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// zero-sum matrix games by fictitious play

struct MatrixGameSolution {
  std::vector<double> row_mixture;  // maximizer
  std::vector<double> col_mixture;  // minimizer
  double value = 0.0;               // midpoint of the final bounds
  double upper = 0.0, lower = 0.0;  // best-response bounds on the value
  double gap = 0.0;                 // upper - lower at termination
  long iterations = 0;
};

// Row player maximizes payoff[i][j]. Fictitious play with alternating
// best-response updates (the column player sees the row player's latest move)
// and first-index tie-breaking; stops at the duality-gap tolerance or the
// iteration cap, whichever comes first. The alternating order tightens the
// gap roughly like 1/k, where simultaneous updates stall near 1/sqrt(k) and
// cannot certify tight tolerances.
inline MatrixGameSolution solve_matrix_game(const std::vector<std::vector<double>>& payoff,
                                            double gap_tol = 1e-6,
                                            long max_iterations = 200000000L) {
  std::size_t m = payoff.size();
  if (m == 0) throw std::invalid_argument("empty payoff matrix");
  std::size_t n = payoff[0].size();
  for (const auto& row : payoff)
    if (row.size() != n) throw std::invalid_argument("ragged payoff matrix");

  std::vector<long> row_count(m, 0), col_count(n, 0);
  std::vector<double> row_payoff(m, 0.0);  // payoff[i] . col_count
  std::vector<double> col_payoff(n, 0.0);  // row_count . payoff[:,j]

  auto argmax = [&](const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < v.size(); ++k)
      if (v[k] > v[best]) best = k;
    return best;
  };
  auto argmin = [&](const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < v.size(); ++k)
      if (v[k] < v[best]) best = k;
    return best;
  };

  MatrixGameSolution sol;
  long k = 0;
  for (; k < max_iterations; ++k) {
    std::size_t i = (k == 0) ? 0 : argmax(row_payoff);
    ++row_count[i];
    for (std::size_t c = 0; c < n; ++c) col_payoff[c] += payoff[i][c];
    std::size_t j = argmin(col_payoff);
    ++col_count[j];
    for (std::size_t r = 0; r < m; ++r) row_payoff[r] += payoff[r][j];

    double upper = row_payoff[argmax(row_payoff)] / double(k + 1);
    double lower = col_payoff[argmin(col_payoff)] / double(k + 1);
    if (upper - lower <= gap_tol || k + 1 == max_iterations) {
      sol.upper = upper;
      sol.lower = lower;
      sol.gap = upper - lower;
      sol.iterations = k + 1;
      break;
    }
  }
  sol.value = 0.5 * (sol.upper + sol.lower);
  sol.row_mixture.resize(m);
  sol.col_mixture.resize(n);
  for (std::size_t r = 0; r < m; ++r) sol.row_mixture[r] = row_count[r] / double(sol.iterations);
  for (std::size_t c = 0; c < n; ++c) sol.col_mixture[c] = col_count[c] / double(sol.iterations);
  return sol;
}

// ---------------------------------------------------------------------------
// brute-force equilibrium for tiny instances

struct BruteForceSettings {
  int horizon = 5;
  std::vector<DefenderAction> action_set;  // empty: all defender actions
  double gap_tol = 1e-6;
  long max_iterations = 200000000L;
  std::size_t profile_limit = 4096;  // per side
};

struct BruteForceResult {
  std::vector<std::vector<DefenderMap>> rows;  // defender pure profiles
  std::vector<std::vector<AttackerMap>> cols;  // attacker pure profiles
  std::vector<std::vector<double>> payoff;     // exact expected returns
  MatrixGameSolution game;
  int horizon = 0;
};

template <typename Map>
std::vector<std::vector<Map>> cartesian_profiles(const std::vector<Map>& per_node,
                                                 int n_nodes, std::size_t limit) {
  std::size_t count = 1;
  for (int i = 0; i < n_nodes; ++i) {
    count *= per_node.size();
    if (count > limit) throw std::runtime_error("enumeration budget exceeded");
  }
  std::vector<std::vector<Map>> out;
  out.reserve(count);
  std::vector<std::size_t> idx(n_nodes, 0);
  for (;;) {
    std::vector<Map> profile;
    profile.reserve(n_nodes);
    for (int i = 0; i < n_nodes; ++i) profile.push_back(per_node[idx[i]]);
    out.push_back(std::move(profile));
    int i = 0;
    while (i < n_nodes && ++idx[i] == per_node.size()) idx[i++] = 0;
    if (i == n_nodes) break;
  }
  return out;
}

inline BruteForceResult brute_force_equilibrium(const GameConfig& cfg,
                                                const BruteForceSettings& settings = {}) {
  BruteForceResult res;
  res.horizon = settings.horizon;
  auto actions = settings.action_set.empty() ? defender_actions(cfg) : settings.action_set;
  res.rows = cartesian_profiles(enumerate_defender_maps(cfg, actions), cfg.graph.size(),
                                settings.profile_limit);
  res.cols = cartesian_profiles(enumerate_attacker_maps(), cfg.graph.size(),
                                settings.profile_limit);
  res.payoff.assign(res.rows.size(), std::vector<double>(res.cols.size(), 0.0));
  for (std::size_t r = 0; r < res.rows.size(); ++r)
    for (std::size_t c = 0; c < res.cols.size(); ++c)
      res.payoff[r][c] =
          exact_pure_value(cfg, res.rows[r], res.cols[c], settings.horizon);
  res.game = solve_matrix_game(res.payoff, settings.gap_tol, settings.max_iterations);
  return res;
}

// ---------------------------------------------------------------------------
// stage averaging and mixtures

inline AttackerStage average_attacker_stage(const std::vector<AttackerStage>& stages,
                                            const std::vector<double>& weights) {
  if (stages.empty() || stages.size() != weights.size())
    throw std::invalid_argument("stage averaging: size mismatch");
  AttackerStage avg;
  for (auto& row : avg.prob) row = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < stages.size(); ++k)
    for (int cls = 0; cls < 3; ++cls)
      for (int a = 0; a < kAttackerActionCount; ++a)
        avg.prob[cls][a] += weights[k] * stages[k].prob[cls][a];
  return avg;
}

inline DefenderStage average_defender_stage(const std::vector<DefenderStage>& stages,
                                            const std::vector<double>& weights) {
  if (stages.empty() || stages.size() != weights.size())
    throw std::invalid_argument("stage averaging: size mismatch");
  DefenderStage avg;
  for (const auto& [zid, row0] : stages[0].rows) {
    std::map<int, double> mass;  // keyed by encoded action for a stable order
    for (std::size_t k = 0; k < stages.size(); ++k)
      for (const auto& [a, p] : stages[k].rows.at(zid).prob)
        mass[encode_defender_action(a)] += weights[k] * p;
    DefenderStageRow row;
    for (const auto& [code, p] : mass)
      row.prob.emplace_back(decode_defender_action(code), p);
    avg.rows[zid] = std::move(row);
  }
  return avg;
}

inline std::vector<double> normalized_mixture_weights(std::vector<double> w) {
  if (w.empty()) throw std::invalid_argument("mixture needs at least one component");
  double total = 0.0;
  for (double v : w) {
    if (v < 0.0) throw std::invalid_argument("mixture weights must be nonnegative");
    total += v;
  }
  if (std::fabs(total - 1.0) > 1e-12)
    throw std::invalid_argument("mixture weights must sum to 1");
  for (double& v : w) v /= total;
  return w;
}

// Episode-level mixture: one component is sampled at episode start and plays
// the whole episode; the published stage is the weighted average, which is
// what the opponent's filter conditions on.
class MixtureDefenderStrategy : public DefenderStrategy {
 public:
  MixtureDefenderStrategy(std::vector<std::shared_ptr<DefenderStrategy>> components,
                          std::vector<double> weights)
      : components_(std::move(components)),
        weights_(normalized_mixture_weights(std::move(weights))) {
    if (components_.size() != weights_.size())
      throw std::invalid_argument("mixture component/weight count mismatch");
  }

  void begin_episode(Rng& rng) override {
    current_ = rng.categorical(weights_);
    components_[current_]->begin_episode(rng);
  }

  DefenderAction act(int node_index, int zone, const NodeBelief& belief,
                     Rng& rng) override {
    return components_[current_]->act(node_index, zone, belief, rng);
  }

  DefenderStage stage(int node_index) const override {
    std::vector<DefenderStage> st;
    st.reserve(components_.size());
    for (const auto& c : components_) st.push_back(c->stage(node_index));
    return average_defender_stage(st, weights_);
  }

  int current_component() const { return current_; }
  const std::vector<std::shared_ptr<DefenderStrategy>>& components() const {
    return components_;
  }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<std::shared_ptr<DefenderStrategy>> components_;
  std::vector<double> weights_;
  int current_ = 0;
};

class MixtureAttackerStrategy : public AttackerStrategy {
 public:
  MixtureAttackerStrategy(std::vector<std::shared_ptr<AttackerStrategy>> components,
                          std::vector<double> weights)
      : components_(std::move(components)),
        weights_(normalized_mixture_weights(std::move(weights))) {
    if (components_.size() != weights_.size())
      throw std::invalid_argument("mixture component/weight count mismatch");
  }

  void begin_episode(Rng& rng) override {
    current_ = rng.categorical(weights_);
    components_[current_]->begin_episode(rng);
  }

  AttackerAction act(int node_index, int attacker_cls,
                     const std::vector<double>& zone_belief, Rng& rng) override {
    return components_[current_]->act(node_index, attacker_cls, zone_belief, rng);
  }

  AttackerStage stage(int node_index) const override {
    std::vector<AttackerStage> st;
    st.reserve(components_.size());
    for (const auto& c : components_) st.push_back(c->stage(node_index));
    return average_attacker_stage(st, weights_);
  }

  int current_component() const { return current_; }
  const std::vector<std::shared_ptr<AttackerStrategy>>& components() const {
    return components_;
  }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<std::shared_ptr<AttackerStrategy>> components_;
  std::vector<double> weights_;
  int current_ = 0;
};

// uniform fictitious-play average over the best-response history
inline std::shared_ptr<MixtureDefenderStrategy> average_strategy(
    std::vector<std::shared_ptr<DefenderStrategy>> history) {
  std::vector<double> w(history.size(), 1.0 / double(history.size()));
  return std::make_shared<MixtureDefenderStrategy>(std::move(history), std::move(w));
}

inline std::shared_ptr<MixtureAttackerStrategy> average_strategy(
    std::vector<std::shared_ptr<AttackerStrategy>> history) {
  std::vector<double> w(history.size(), 1.0 / double(history.size()));
  return std::make_shared<MixtureAttackerStrategy>(std::move(history), std::move(w));
}

// per-node restriction of an episode-level mixture (the node's marginal play)
class MixedDefenderLocal : public DefenderLocalStrategy {
 public:
  MixedDefenderLocal(std::vector<std::shared_ptr<DefenderLocalStrategy>> components,
                     std::vector<double> weights)
      : components_(std::move(components)),
        weights_(normalized_mixture_weights(std::move(weights))) {
    if (components_.size() != weights_.size())
      throw std::invalid_argument("mixture component/weight count mismatch");
  }

  void begin_episode(Rng& rng) override {
    current_ = rng.categorical(weights_);
    components_[current_]->begin_episode(rng);
  }

  DefenderAction act(int zone, const NodeBelief& belief, Rng& rng) override {
    return components_[current_]->act(zone, belief, rng);
  }

  DefenderStage stage() const override {
    std::vector<DefenderStage> st;
    st.reserve(components_.size());
    for (const auto& c : components_) st.push_back(c->stage());
    return average_defender_stage(st, weights_);
  }

 private:
  std::vector<std::shared_ptr<DefenderLocalStrategy>> components_;
  std::vector<double> weights_;
  int current_ = 0;
};

class MixedAttackerLocal : public AttackerLocalStrategy {
 public:
  MixedAttackerLocal(std::vector<std::shared_ptr<AttackerLocalStrategy>> components,
                     std::vector<double> weights)
      : components_(std::move(components)),
        weights_(normalized_mixture_weights(std::move(weights))) {
    if (components_.size() != weights_.size())
      throw std::invalid_argument("mixture component/weight count mismatch");
  }

  void begin_episode(Rng& rng) override {
    current_ = rng.categorical(weights_);
    components_[current_]->begin_episode(rng);
  }

  AttackerAction act(int attacker_cls, const std::vector<double>& zone_belief,
                     Rng& rng) override {
    return components_[current_]->act(attacker_cls, zone_belief, rng);
  }

  AttackerStage stage() const override {
    std::vector<AttackerStage> st;
    st.reserve(components_.size());
    for (const auto& c : components_) st.push_back(c->stage());
    return average_attacker_stage(st, weights_);
  }

 private:
  std::vector<std::shared_ptr<AttackerLocalStrategy>> components_;
  std::vector<double> weights_;
  int current_ = 0;
};

// tabular profile helpers (pure rows/columns of the brute-force matrix)
inline std::shared_ptr<CompositeDefenderStrategy> tabular_defender(
    const GameConfig& cfg, const std::vector<DefenderMap>& maps) {
  std::vector<std::shared_ptr<DefenderLocalStrategy>> locals;
  for (const auto& m : maps) locals.push_back(std::make_shared<TabularDefenderLocal>(m));
  return composite_strategy(cfg, std::move(locals));
}

inline std::shared_ptr<CompositeAttackerStrategy> tabular_attacker(
    const GameConfig& cfg, const std::vector<AttackerMap>& maps) {
  std::vector<std::shared_ptr<AttackerLocalStrategy>> locals;
  for (const auto& m : maps) locals.push_back(std::make_shared<TabularAttackerLocal>(m));
  return composite_strategy(cfg, std::move(locals));
}

// mixture over pure tabular profiles with the matrix-game weights; components
// below the probability floor are dropped to keep episode sampling cheap
inline std::shared_ptr<MixtureDefenderStrategy> mixture_of_rows(
    const GameConfig& cfg, const BruteForceResult& res, double floor = 1e-9) {
  std::vector<std::shared_ptr<DefenderStrategy>> comps;
  std::vector<double> w;
  for (std::size_t r = 0; r < res.rows.size(); ++r) {
    if (res.game.row_mixture[r] <= floor) continue;
    comps.push_back(tabular_defender(cfg, res.rows[r]));
    w.push_back(res.game.row_mixture[r]);
  }
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  return std::make_shared<MixtureDefenderStrategy>(std::move(comps), std::move(w));
}

inline std::shared_ptr<MixtureAttackerStrategy> mixture_of_cols(
    const GameConfig& cfg, const BruteForceResult& res, double floor = 1e-9) {
  std::vector<std::shared_ptr<AttackerStrategy>> comps;
  std::vector<double> w;
  for (std::size_t c = 0; c < res.cols.size(); ++c) {
    if (res.game.col_mixture[c] <= floor) continue;
    comps.push_back(tabular_attacker(cfg, res.cols[c]));
    w.push_back(res.game.col_mixture[c]);
  }
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  return std::make_shared<MixtureAttackerStrategy>(std::move(comps), std::move(w));
}

// ---------------------------------------------------------------------------
// Monte-Carlo evaluation and exploitability

struct EvalReturn {
  double mean = 0.0;
  double std_error = 0.0;
  int episodes = 0;
};

// Sequential by design: strategies carry per-episode state (mixture component
// choices), so the episode loop is single-threaded; per-episode seed streams
// make the result a pure function of (config, strategies, episodes, horizon,
// seed) regardless of the caller's worker count.
inline EvalReturn evaluate_mean_return(const GameConfig& cfg, const ObservationModel& model,
                                       DefenderStrategy& defender,
                                       AttackerStrategy& attacker, int episodes,
                                       int horizon, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("need at least one episode");
  double sum = 0.0, sum_sq = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Rng rng(seed, static_cast<std::uint64_t>(e));
    double j = simulate_episode(cfg, model, defender, attacker, horizon, rng).discounted_return;
    sum += j;
    sum_sq += j * j;
  }
  EvalReturn out;
  out.episodes = episodes;
  out.mean = sum / episodes;
  double var = std::max(0.0, sum_sq / episodes - out.mean * out.mean);
  if (episodes > 1) out.std_error = std::sqrt(var / (episodes - 1));
  return out;
}

struct ExploitabilityEstimate {
  double delta_hat = 0.0;
  double std_error = 0.0;
  double v_def = 0.0;  // defender exploiter value: J(br_def, avg_atk)
  double v_atk = 0.0;  // attacker exploiter value: -J(avg_def, br_atk)
};

// delta_hat = J(br_def, avg_atk) - J(avg_def, br_atk); the two terms come
// from separately seeded sample sets, so their errors add in quadrature.
// Passing the same seed twice with degenerate best responses reproduces the
// same episodes and yields exactly zero.
inline ExploitabilityEstimate exploitability_estimate(
    const GameConfig& cfg, const ObservationModel& model, DefenderStrategy& avg_def,
    AttackerStrategy& avg_atk, DefenderStrategy& br_def, AttackerStrategy& br_atk,
    int episodes, int horizon, std::uint64_t seed_def_side, std::uint64_t seed_atk_side) {
  EvalReturn jd =
      evaluate_mean_return(cfg, model, br_def, avg_atk, episodes, horizon, seed_def_side);
  EvalReturn ja =
      evaluate_mean_return(cfg, model, avg_def, br_atk, episodes, horizon, seed_atk_side);
  ExploitabilityEstimate out;
  out.delta_hat = jd.mean - ja.mean;
  out.std_error = std::sqrt(jd.std_error * jd.std_error + ja.std_error * ja.std_error);
  out.v_def = jd.mean;
  out.v_atk = -ja.mean;
  return out;
}

// ---------------------------------------------------------------------------
// decompositional fictitious self-play

struct DfspSettings {
  int max_iterations = 100;
  double delta_stop = 0.2;
  DefenderSolverSettings defender;      // per-iteration best-response budget
  PpoSettings attacker;
  DefenderSolverSettings exp_defender;  // exploitability best-response budget
  PpoSettings exp_attacker;
  int exploit_episodes = 2000;  // per side of the exploitability estimate
  int horizon = 0;              // 0: derive from the discount factor
  int workers = 1;
  std::uint64_t seed = 1;
};

struct DfspIterationMetrics {
  int iteration = 0;
  double delta_hat = 0.0;
  double delta_se = 0.0;
  double v_def = 0.0;
  double v_atk = 0.0;
  double seconds = 0.0;
};

struct DfspResult {
  // history[k][i]: iteration k's strategy for node index i; entry 0 holds the
  // static seed strategies
  std::vector<std::vector<std::shared_ptr<DefenderLocalStrategy>>> defender_history;
  std::vector<std::vector<std::shared_ptr<AttackerLocalStrategy>>> attacker_history;
  std::vector<DfspIterationMetrics> metrics;
  std::vector<NodeSubgame> subgames;
};

inline std::string metrics_csv(const std::vector<DfspIterationMetrics>& metrics) {
  std::ostringstream out;
  out << "iteration,delta_hat,delta_se,v_def,v_atk,seconds\n";
  for (const auto& m : metrics)
    out << m.iteration << ',' << fmt_double(m.delta_hat) << ',' << fmt_double(m.delta_se)
        << ',' << fmt_double(m.v_def) << ',' << fmt_double(m.v_atk) << ','
        << fmt_double(m.seconds) << '\n';
  return out.str();
}

namespace detail {

inline std::vector<double> uniform_weights(std::size_t n) {
  return std::vector<double>(n, 1.0 / double(n));
}

inline std::shared_ptr<MixtureDefenderStrategy> global_average_defender(
    const GameConfig& cfg, const DfspResult& state) {
  std::vector<std::shared_ptr<DefenderStrategy>> comps;
  for (const auto& locals : state.defender_history)
    comps.push_back(std::make_shared<CompositeDefenderStrategy>(locals));
  return average_strategy(std::move(comps));
}

inline std::shared_ptr<MixtureAttackerStrategy> global_average_attacker(
    const GameConfig& cfg, const DfspResult& state) {
  std::vector<std::shared_ptr<AttackerStrategy>> comps;
  for (const auto& locals : state.attacker_history)
    comps.push_back(std::make_shared<CompositeAttackerStrategy>(locals));
  return average_strategy(std::move(comps));
}

inline std::shared_ptr<MixedDefenderLocal> local_average_defender(const DfspResult& state,
                                                                  int node_index) {
  std::vector<std::shared_ptr<DefenderLocalStrategy>> comps;
  for (const auto& locals : state.defender_history) comps.push_back(locals[node_index]);
  return std::make_shared<MixedDefenderLocal>(std::move(comps),
                                              uniform_weights(state.defender_history.size()));
}

inline AttackerStage local_average_attacker_stage(const DfspResult& state, int node_index) {
  std::vector<AttackerStage> st;
  for (const auto& locals : state.attacker_history)
    st.push_back(locals[node_index]->stage());
  return average_attacker_stage(st, uniform_weights(st.size()));
}

// one parallel pass of per-node best responses for both players
inline void best_response_pass(const GameConfig& cfg, const ObservationModel& model,
                               const DfspResult& state,
                               const DefenderSolverSettings& def_settings,
                               const PpoSettings& atk_settings, std::uint64_t pass_seed,
                               int workers,
                               std::vector<std::shared_ptr<DefenderLocalStrategy>>& def_out,
                               std::vector<std::shared_ptr<AttackerLocalStrategy>>& atk_out) {
  int n = cfg.graph.size();
  def_out.assign(n, nullptr);
  atk_out.assign(n, nullptr);
  parallel_for_tasks(2 * n, workers, [&](int task) {
    int i = task % n;
    if (task < n) {
      AttackerStage opponent = local_average_attacker_stage(state, i);
      DefenderNodeBr br =
          solve_defender_node(cfg, state.subgames[i].ancestor_weight, opponent, model,
                              def_settings, mix_seed(pass_seed, 0x10000u + i));
      def_out[i] = br.strategy;
    } else {
      PpoSettings ps = atk_settings;
      ps.seed = mix_seed(pass_seed, 0x20000u + i);
      auto result = attacker_best_response(cfg, model, state.subgames[i],
                                           local_average_defender(state, i),
                                           local_average_attacker_stage(state, i), ps);
      atk_out[i] = result.best;
    }
  });
  for (int i = 0; i < n; ++i)
    if (!def_out[i] || !atk_out[i])
      throw std::logic_error("best response missing for node index " + std::to_string(i));
}

}  // namespace detail

inline DfspResult dfsp_run(const GameConfig& cfg, const ObservationModel& model,
                           const DfspSettings& settings) {
  if (settings.delta_stop <= 0.0)
    throw std::invalid_argument("stop threshold must be positive");
  if (settings.max_iterations < 1)
    throw std::invalid_argument("need at least one iteration");
  int horizon =
      settings.horizon > 0 ? settings.horizon : default_horizon(cfg.gamma);

  DfspResult state;
  state.subgames = decompose(cfg);
  int n = cfg.graph.size();

  std::vector<std::shared_ptr<DefenderLocalStrategy>> seed_def;
  std::vector<std::shared_ptr<AttackerLocalStrategy>> seed_atk;
  for (int i = 0; i < n; ++i) {
    seed_def.push_back(std::make_shared<StaticDefenderLocal>(cfg));
    seed_atk.push_back(std::make_shared<StaticAttackerLocal>());
  }
  state.defender_history.push_back(std::move(seed_def));
  state.attacker_history.push_back(std::move(seed_atk));

  for (int k = 1; k <= settings.max_iterations; ++k) {
    auto t0 = std::chrono::steady_clock::now();
    std::uint64_t iter_seed = mix_seed(settings.seed, static_cast<std::uint64_t>(k));

    std::vector<std::shared_ptr<DefenderLocalStrategy>> def_br;
    std::vector<std::shared_ptr<AttackerLocalStrategy>> atk_br;
    detail::best_response_pass(cfg, model, state, settings.defender, settings.attacker,
                               mix_seed(iter_seed, 1), settings.workers, def_br, atk_br);
    state.defender_history.push_back(std::move(def_br));
    state.attacker_history.push_back(std::move(atk_br));

    // exploitability of the updated averages, with fresh larger-budget BRs
    std::vector<std::shared_ptr<DefenderLocalStrategy>> exp_def;
    std::vector<std::shared_ptr<AttackerLocalStrategy>> exp_atk;
    detail::best_response_pass(cfg, model, state, settings.exp_defender,
                               settings.exp_attacker, mix_seed(iter_seed, 2),
                               settings.workers, exp_def, exp_atk);

    auto avg_def = detail::global_average_defender(cfg, state);
    auto avg_atk = detail::global_average_attacker(cfg, state);
    CompositeDefenderStrategy br_def(exp_def);
    CompositeAttackerStrategy br_atk(exp_atk);
    ExploitabilityEstimate est = exploitability_estimate(
        cfg, model, *avg_def, *avg_atk, br_def, br_atk, settings.exploit_episodes,
        horizon, mix_seed(iter_seed, 3), mix_seed(iter_seed, 4));

    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    state.metrics.push_back(
        {k, est.delta_hat, est.std_error, est.v_def, est.v_atk, seconds});
    if (est.delta_hat < settings.delta_stop) break;
  }
  return state;
}

// averaged profile after the final iteration
struct StrategyProfile {
  std::shared_ptr<MixtureDefenderStrategy> defender;
  std::shared_ptr<MixtureAttackerStrategy> attacker;
  int iteration = 0;
};

inline StrategyProfile profile_from(const GameConfig& cfg, const DfspResult& state) {
  StrategyProfile p;
  p.defender = detail::global_average_defender(cfg, state);
  p.attacker = detail::global_average_attacker(cfg, state);
  p.iteration = static_cast<int>(state.metrics.size());
  return p;
}

}  // namespace irg
