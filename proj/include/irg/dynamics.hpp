#pragma once

// Game dynamics: node states, both players' actions, transition sampling,
// stage utilities, the per-node three-class belief filter, and the episode
// engine. Strategies are abstract here; concrete families live with their
// solvers.

#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "irg/infrastructure.hpp"
#include "irg/io.hpp"
#include "irg/observation.hpp"
#include "irg/rng.hpp"

namespace irg {

// ---------------------------------------------------------------------------
// actions

// wire encoding fixed at 0/1/2/3 (used in csv exports and serialized policies)
enum class AttackerAction { null = 0, recon = 1, brute = 2, exploit = 3 };
constexpr int kAttackerActionCount = 4;

inline const char* attacker_action_name(AttackerAction a) {
  switch (a) {
    case AttackerAction::null: return "null";
    case AttackerAction::recon: return "recon";
    case AttackerAction::brute: return "brute";
    case AttackerAction::exploit: return "exploit";
  }
  return "?";
}

struct DefenderAction {
  enum class Kind { null, access_control, move };
  Kind kind = Kind::null;
  int zone = 0;  // move target, meaningful only for Kind::move

  static DefenderAction null_action() { return {}; }
  static DefenderAction access_control() { return {Kind::access_control, 0}; }
  static DefenderAction move_to(int zone_id) { return {Kind::move, zone_id}; }

  bool is_null() const { return kind == Kind::null; }

  bool operator==(const DefenderAction& o) const {
    return kind == o.kind && (kind != Kind::move || zone == o.zone);
  }
  bool operator!=(const DefenderAction& o) const { return !(*this == o); }
};

// csv encoding: 0 = null, -1 = access control, z > 0 = move to zone z
inline int encode_defender_action(const DefenderAction& a) {
  switch (a.kind) {
    case DefenderAction::Kind::null: return 0;
    case DefenderAction::Kind::access_control: return -1;
    case DefenderAction::Kind::move: return a.zone;
  }
  return 0;
}

inline DefenderAction decode_defender_action(int code) {
  if (code == 0) return DefenderAction::null_action();
  if (code == -1) return DefenderAction::access_control();
  if (code > 0) return DefenderAction::move_to(code);
  throw std::invalid_argument("bad defender action code " + std::to_string(code));
}

// all defender actions for a config: null, access control, move to each zone
inline std::vector<DefenderAction> defender_actions(const GameConfig& cfg) {
  std::vector<DefenderAction> out;
  out.push_back(DefenderAction::null_action());
  out.push_back(DefenderAction::access_control());
  for (const auto& z : cfg.zones) out.push_back(DefenderAction::move_to(z.id));
  return out;
}

inline double action_cost(const GameConfig& cfg, const DefenderAction& a) {
  switch (a.kind) {
    case DefenderAction::Kind::null: return cfg.costs.null_cost;
    case DefenderAction::Kind::access_control: return cfg.costs.access_control;
    case DefenderAction::Kind::move: return cfg.costs.move_cost(a.zone);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// states

struct NodeState {
  int zone = 0;
  bool recon = false;      // attacker has reconnoitred the node
  bool intrusion = false;  // attacker has compromised the node

  bool operator==(const NodeState& o) const {
    return zone == o.zone && recon == o.recon && intrusion == o.intrusion;
  }
};

// attacker classes: 0 healthy (0,0), 1 discovered (1,0), 2 compromised (1,1);
// (0,1) is unreachable because every intrusion step requires reconnaissance
inline int attacker_class(const NodeState& s) {
  if (s.intrusion && !s.recon)
    throw std::logic_error("invalid node state: intrusion without reconnaissance");
  return s.intrusion ? 2 : (s.recon ? 1 : 0);
}

struct GlobalState {
  std::vector<NodeState> nodes;  // indexed like InfrastructureGraph
};

inline GlobalState initial_state(const GameConfig& cfg) {
  GlobalState s;
  s.nodes.resize(cfg.graph.size());
  for (int i = 0; i < cfg.graph.size(); ++i)
    s.nodes[i] = NodeState{cfg.graph.initial_zone[i], false, false};
  return s;
}

// ---------------------------------------------------------------------------
// transitions

inline std::vector<AttackerAction> legal_attacker_actions(const NodeState& s) {
  std::vector<AttackerAction> out = {AttackerAction::null, AttackerAction::recon};
  if (s.recon) {
    out.push_back(AttackerAction::brute);
    out.push_back(AttackerAction::exploit);
  }
  return out;
}

inline bool attacker_action_legal(const NodeState& s, AttackerAction a) {
  if (a == AttackerAction::brute || a == AttackerAction::exploit) return s.recon;
  return true;
}

// zone after a defender action (the zone part of the defender transition)
inline int zone_after(int zone, const DefenderAction& a) {
  return a.kind == DefenderAction::Kind::move ? a.zone : zone;
}

// Defender component of the node transition: deterministic zone update;
// any non-null action evicts the attacker, resetting both bits.
inline NodeState defender_step(const NodeState& s, const DefenderAction& a) {
  NodeState n = s;
  n.zone = zone_after(s.zone, a);
  if (!a.is_null()) {
    n.recon = false;
    n.intrusion = false;
  }
  return n;
}

// Full node transition: defender zone update plus the attacker bits. The
// defender reset takes precedence over the attacker's action.
inline NodeState attacker_step(const NodeState& s, AttackerAction a_A,
                               const DefenderAction& a_D, const GameConfig& cfg,
                               Rng& rng) {
  if (!attacker_action_legal(s, a_A))
    throw std::invalid_argument(std::string("illegal attacker action ") +
                                attacker_action_name(a_A) +
                                " without reconnaissance");
  NodeState n = defender_step(s, a_D);
  if (!a_D.is_null()) return n;
  if (a_A == AttackerAction::recon) n.recon = true;
  if (!n.intrusion && s.recon) {
    if (a_A == AttackerAction::brute && rng.bernoulli(cfg.p_brute)) n.intrusion = true;
    if (a_A == AttackerAction::exploit && rng.bernoulli(cfg.p_exploit)) n.intrusion = true;
  }
  return n;
}

// ---------------------------------------------------------------------------
// utility

// [gw -> i]: 1 if every node on the path gateway..i (including i) sits in an
// active zone, else 0
inline bool reachable_active(const GameConfig& cfg, const GlobalState& s, int node_id) {
  int cur = node_id;
  while (cur != kGateway) {
    int idx = cfg.graph.index_of(cur);
    if (!cfg.zone_active(s.nodes[idx].zone)) return false;
    cur = cfg.graph.parent[idx];
  }
  return true;
}

// Utility contributed by one workflow: eta-weighted activity of its
// reachable nodes minus intrusion and action costs of its nodes.
inline double workflow_utility(const GameConfig& cfg, const GlobalState& s,
                               const std::vector<DefenderAction>& a_D,
                               int workflow_id) {
  double total = 0.0;
  for (int i = 0; i < cfg.graph.size(); ++i) {
    if (cfg.graph.workflow[i] != workflow_id) continue;
    double service = cfg.eta * cfg.utility_scale *
                     (reachable_active(cfg, s, cfg.graph.node_ids[i]) ? 1.0 : 0.0);
    double intrusion = s.nodes[i].intrusion ? 1.0 : 0.0;
    total += service - (intrusion + action_cost(cfg, a_D[i]));
  }
  return total;
}

// Global stage utility; summed workflow-by-workflow so the workflow
// decomposition reproduces it exactly, bit for bit.
inline double stage_utility(const GameConfig& cfg, const GlobalState& s,
                            const std::vector<DefenderAction>& a_D) {
  if (static_cast<int>(a_D.size()) != cfg.graph.size())
    throw std::invalid_argument("stage_utility: one defender action per node required");
  double total = 0.0;
  for (int w : cfg.graph.workflow_ids) total += workflow_utility(cfg, s, a_D, w);
  return total;
}

// ---------------------------------------------------------------------------
// belief filter

using NodeBelief = std::array<double, 3>;
using Matrix3 = std::array<std::array<double, 3>, 3>;

inline NodeBelief belief_e1() { return {1.0, 0.0, 0.0}; }

class FilterDegenerateError : public std::runtime_error {
 public:
  FilterDegenerateError()
      : std::runtime_error("belief filter: observation has zero likelihood under "
                           "every reachable state") {}
};

// per-class distribution over the four attacker actions; the stage strategy
// the defender-side filter conditions on
struct AttackerStage {
  std::array<std::array<double, 4>, 3> prob{};

  static AttackerStage passive() {
    AttackerStage st;
    for (auto& row : st.prob) row = {1.0, 0.0, 0.0, 0.0};
    return st;
  }
};

// Marginal attacker-class transition under the null defender action,
// averaging the per-action kernels over the stage strategy. p is the
// resulting reconnaissance probability, q the compromise probability.
inline Matrix3 compile_stage_transition(const AttackerStage& stage, double p_brute,
                                        double p_exploit) {
  double p = stage.prob[0][static_cast<int>(AttackerAction::recon)];
  double q = stage.prob[1][static_cast<int>(AttackerAction::brute)] * p_brute +
             stage.prob[1][static_cast<int>(AttackerAction::exploit)] * p_exploit;
  return Matrix3{{{1.0 - p, p, 0.0}, {0.0, 1.0 - q, q}, {0.0, 0.0, 1.0}}};
}

// Generic prediction/correction step for a finite-state filter. Pass
// nullptr as likelihood for a prediction-only update.
inline std::vector<double> filter_step(const std::vector<double>& b,
                                       const std::vector<std::vector<double>>& transition,
                                       const std::vector<double>* likelihood) {
  std::size_t n = b.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    if (b[s] == 0.0) continue;
    for (std::size_t t = 0; t < n; ++t) out[t] += b[s] * transition[s][t];
  }
  double norm = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (likelihood) out[t] *= (*likelihood)[t];
    norm += out[t];
  }
  if (!(norm > 0.0)) throw FilterDegenerateError();
  for (double& v : out) v /= norm;
  return out;
}

// One defender belief update. A non-null action evicts the attacker, so the
// posterior is exactly e1; otherwise predict through the stage-compiled
// class chain and reweight by the observation likelihood.
inline NodeBelief belief_update(const NodeBelief& b, const DefenderAction& a_D,
                                std::optional<int> obs, const Matrix3& transition,
                                const ObservationModel* model) {
  if (!a_D.is_null()) return belief_e1();
  NodeBelief out = {0.0, 0.0, 0.0};
  for (int s = 0; s < 3; ++s) {
    if (b[s] == 0.0) continue;
    for (int t = 0; t < 3; ++t) out[t] += b[s] * transition[s][t];
  }
  double norm = 0.0;
  for (int t = 0; t < 3; ++t) {
    if (obs) out[t] *= model->likelihood(t, *obs);
    norm += out[t];
  }
  if (!(norm > 0.0)) throw FilterDegenerateError();
  for (double& v : out) v /= norm;
  return out;
}

// ---------------------------------------------------------------------------
// strategy interfaces

// distribution over defender actions in one zone (published stage behavior)
struct DefenderStageRow {
  std::vector<std::pair<DefenderAction, double>> prob;

  static DefenderStageRow pure(const DefenderAction& a) { return {{{a, 1.0}}}; }
};

// zone -> action distribution; what the attacker-side zone filter conditions on
struct DefenderStage {
  std::map<int, DefenderStageRow> rows;  // keyed by zone id

  const DefenderStageRow& row(int zone_id) const {
    auto it = rows.find(zone_id);
    if (it == rows.end())
      throw std::out_of_range("defender stage has no row for zone " + std::to_string(zone_id));
    return it->second;
  }
};

// zone-index transition kernel induced by a defender stage strategy
inline std::vector<std::vector<double>> compile_zone_transition(const GameConfig& cfg,
                                                                const DefenderStage& stage) {
  int nz = static_cast<int>(cfg.zones.size());
  auto zone_index = [&](int zone_id) {
    for (int j = 0; j < nz; ++j)
      if (cfg.zones[j].id == zone_id) return j;
    throw std::out_of_range("unknown zone id " + std::to_string(zone_id));
  };
  std::vector<std::vector<double>> M(nz, std::vector<double>(nz, 0.0));
  for (int j = 0; j < nz; ++j) {
    const auto& row = stage.row(cfg.zones[j].id);
    for (const auto& [a, pr] : row.prob)
      M[j][zone_index(zone_after(cfg.zones[j].id, a))] += pr;
  }
  return M;
}

class DefenderStrategy {
 public:
  virtual ~DefenderStrategy() = default;
  // called once per episode; mixtures sample their component here
  virtual void begin_episode(Rng&) {}
  // the defender observes only its own node state (the zone) and its belief
  virtual DefenderAction act(int node_index, int zone, const NodeBelief& belief,
                             Rng& rng) = 0;
  // stage behavior announced to the opponent's filter
  virtual DefenderStage stage(int node_index) const = 0;
};

class AttackerStrategy {
 public:
  virtual ~AttackerStrategy() = default;
  virtual void begin_episode(Rng&) {}
  // the attacker observes its own bits (the class) and a belief over zones
  virtual AttackerAction act(int node_index, int attacker_cls,
                             const std::vector<double>& zone_belief, Rng& rng) = 0;
  virtual AttackerStage stage(int node_index) const = 0;
};

// ---------------------------------------------------------------------------
// episodes

struct TrajectoryStep {
  int t = 0;
  GlobalState state;
  std::vector<DefenderAction> d_actions;
  std::vector<AttackerAction> a_actions;
  std::vector<int> obs;  // the observations received before acting at t
  double utility = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  double discounted_return = 0.0;
};

// smallest horizon with gamma^T below the tail tolerance (default policy for
// cli runs); clamped to [1, 400]
inline int default_horizon(double gamma, double tail = 1e-4) {
  if (gamma <= 0.0) return 1;
  int t = 1;
  double g = gamma;
  while (g >= tail && t < 400) {
    g *= gamma;
    ++t;
  }
  return t;
}

// Plays one episode of the full game. Both filters condition on the stage
// strategies the opponent publishes at episode start. Node order, action
// order, and rng consumption order are fixed, so a given rng state always
// reproduces the same episode.
inline Trajectory simulate_episode(const GameConfig& cfg, const ObservationModel& model,
                                   DefenderStrategy& defender, AttackerStrategy& attacker,
                                   int horizon, Rng& rng, bool record_steps = false) {
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  int n = cfg.graph.size();
  int nz = static_cast<int>(cfg.zones.size());

  defender.begin_episode(rng);
  attacker.begin_episode(rng);

  // stage models are frozen for the whole episode
  std::vector<Matrix3> class_kernel(n);
  std::vector<std::vector<std::vector<double>>> zone_kernel(n);
  for (int i = 0; i < n; ++i) {
    class_kernel[i] = compile_stage_transition(attacker.stage(i), cfg.p_brute, cfg.p_exploit);
    zone_kernel[i] = compile_zone_transition(cfg, defender.stage(i));
  }
  auto zone_index = [&](int zone_id) {
    for (int j = 0; j < nz; ++j)
      if (cfg.zones[j].id == zone_id) return j;
    throw std::out_of_range("unknown zone id");
  };

  GlobalState s = initial_state(cfg);
  std::vector<NodeBelief> belief(n, belief_e1());
  std::vector<std::vector<double>> zone_belief(n, std::vector<double>(nz, 0.0));
  for (int i = 0; i < n; ++i) zone_belief[i][zone_index(s.nodes[i].zone)] = 1.0;

  std::vector<int> obs(n);
  for (int i = 0; i < n; ++i) obs[i] = model.sample(attacker_class(s.nodes[i]), rng);

  Trajectory traj;
  if (record_steps) traj.steps.reserve(horizon);
  double discount = 1.0;

  for (int t = 1; t <= horizon; ++t) {
    std::vector<DefenderAction> a_D(n);
    std::vector<AttackerAction> a_A(n);
    for (int i = 0; i < n; ++i) a_D[i] = defender.act(i, s.nodes[i].zone, belief[i], rng);
    for (int i = 0; i < n; ++i)
      a_A[i] = attacker.act(i, attacker_class(s.nodes[i]), zone_belief[i], rng);

    double u = stage_utility(cfg, s, a_D);
    traj.discounted_return += discount * u;
    discount *= cfg.gamma;

    if (record_steps) traj.steps.push_back({t, s, a_D, a_A, obs, u});

    GlobalState next;
    next.nodes.resize(n);
    for (int i = 0; i < n; ++i) next.nodes[i] = attacker_step(s.nodes[i], a_A[i], a_D[i], cfg, rng);
    for (int i = 0; i < n; ++i) obs[i] = model.sample(attacker_class(next.nodes[i]), rng);
    for (int i = 0; i < n; ++i) {
      belief[i] = belief_update(belief[i], a_D[i], obs[i], class_kernel[i], &model);
      const auto& row = zone_kernel[i];
      std::vector<double> zb = zone_belief[i];
      std::vector<double> out(nz, 0.0);
      for (int x = 0; x < nz; ++x) {
        if (zb[x] == 0.0) continue;
        for (int y = 0; y < nz; ++y) out[y] += zb[x] * row[x][y];
      }
      zone_belief[i] = out;  // no zone observations: prediction-only filter
    }
    s = next;
  }
  return traj;
}

// csv export: one row per (step, node)
inline std::string trajectory_csv(const GameConfig& cfg, const Trajectory& traj) {
  std::ostringstream out;
  out << "t,node,zone,recon,intrusion,a_D,a_A,o,u\n";
  for (const auto& st : traj.steps) {
    for (int i = 0; i < cfg.graph.size(); ++i) {
      out << st.t << ',' << cfg.graph.node_ids[i] << ',' << st.state.nodes[i].zone << ','
          << (st.state.nodes[i].recon ? 1 : 0) << ',' << (st.state.nodes[i].intrusion ? 1 : 0)
          << ',' << encode_defender_action(st.d_actions[i]) << ','
          << static_cast<int>(st.a_actions[i]) << ',' << st.obs[i] << ','
          << fmt_double(st.utility) << '\n';
    }
  }
  return out.str();
}

}  // namespace irg
