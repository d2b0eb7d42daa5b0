#pragma once

// Per-node defender solver. Picking *which* defensive action to use in a
// zone is a small deterministic MDP over zones; picking *when* to use it is
// an optimal stopping POMDP over the three attacker classes whose best
// response is a threshold rule in the belief. Thresholds are fitted by
// simultaneous-perturbation stochastic approximation against rollouts; a
// belief-grid dynamic program serves as the reference solver.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <vector>

#include "irg/decomposition.hpp"
#include "irg/dynamics.hpp"

namespace irg {

enum class StopAction { cont = 0, stop = 1 };

// ---------------------------------------------------------------------------
// stopping pomdp

struct StoppingPomdp {
  Matrix3 continue_kernel;                      // attacker class chain under null
  Matrix3 stop_kernel;                          // every row e1 (eviction)
  std::array<std::array<double, 2>, 3> utility; // [class][continue, stop]
  double gamma = 0.9;
  ObservationModel model;
};

// p: probability the attacker reconnoitres a healthy node per step;
// q: probability a discovered node gets compromised per step.
inline StoppingPomdp build_stopping_pomdp(const GameConfig& cfg, int ancestor_weight,
                                          int zone_id, const DefenderAction& which_action,
                                          double p, double q,
                                          const ObservationModel& model) {
  if (which_action.is_null())
    throw std::invalid_argument("stopping problem needs a concrete defensive action");
  if (!(p >= 0.0 && p <= 1.0 && q >= 0.0 && q <= 1.0))
    throw std::invalid_argument("attack-phase probabilities must lie in [0,1]");
  StoppingPomdp m;
  m.continue_kernel = Matrix3{{{1.0 - p, p, 0.0}, {0.0, 1.0 - q, q}, {0.0, 0.0, 1.0}}};
  m.stop_kernel = Matrix3{{{1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}}};
  const NodeState states[3] = {{zone_id, false, false}, {zone_id, true, false},
                               {zone_id, true, true}};
  for (int cls = 0; cls < 3; ++cls) {
    m.utility[cls][0] = local_stage_utility(cfg, ancestor_weight, states[cls],
                                            DefenderAction::null_action());
    m.utility[cls][1] = local_stage_utility(cfg, ancestor_weight, states[cls], which_action);
  }
  m.gamma = cfg.gamma;
  m.model = model;
  return m;
}

inline StoppingPomdp build_stopping_pomdp(const GameConfig& cfg, int ancestor_weight,
                                          int zone_id, const DefenderAction& which_action,
                                          const AttackerStage& stage,
                                          const ObservationModel& model) {
  Matrix3 M = compile_stage_transition(stage, cfg.p_brute, cfg.p_exploit);
  return build_stopping_pomdp(cfg, ancestor_weight, zone_id, which_action, M[0][1],
                              M[1][2], model);
}

// ---------------------------------------------------------------------------
// total positivity

struct Tp2Report {
  bool ok = true;
  int row_i = -1, row_j = -1, col_k = -1, col_l = -1;
  double minor = 0.0;  // most negative minor found when not ok
};

// All 2x2 minors of the row-ordered matrix must be nonnegative (within
// tolerance). For two strictly positive rows this reduces to the
// likelihood-ratio scan over adjacent columns.
inline Tp2Report tp2_check(const std::vector<std::vector<double>>& rows,
                           double tol = 1e-12) {
  Tp2Report rep;
  if (rows.size() < 2) return rep;
  std::size_t n = rows[0].size();
  for (const auto& r : rows)
    if (r.size() != n) throw std::invalid_argument("tp2_check: ragged matrix");

  bool all_positive = true;
  for (const auto& r : rows)
    for (double v : r)
      if (!(v > 0.0)) all_positive = false;

  auto minor_at = [&](std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return rows[i][k] * rows[j][l] - rows[i][l] * rows[j][k];
  };
  auto consider = [&](std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    double m = minor_at(i, j, k, l);
    if (m < -tol && (rep.ok || m < rep.minor)) {
      rep.ok = false;
      rep.row_i = static_cast<int>(i);
      rep.row_j = static_cast<int>(j);
      rep.col_k = static_cast<int>(k);
      rep.col_l = static_cast<int>(l);
      rep.minor = m;
    }
  };

  for (std::size_t i = 0; i + 1 < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      if (all_positive) {
        // positive entries make adjacent-column minors sufficient
        for (std::size_t k = 0; k + 1 < n; ++k) consider(i, j, k, k + 1);
      } else {
        for (std::size_t k = 0; k + 1 < n; ++k)
          for (std::size_t l = k + 1; l < n; ++l) consider(i, j, k, l);
      }
    }
  return rep;
}

inline Tp2Report tp2_check(const Matrix3& m, double tol = 1e-12) {
  std::vector<std::vector<double>> rows(3);
  for (int i = 0; i < 3; ++i) rows[i] = {m[i][0], m[i][1], m[i][2]};
  return tp2_check(rows, tol);
}

// ---------------------------------------------------------------------------
// threshold policies

constexpr double kThetaFloor = 1e-6;

struct ThresholdPolicy {
  double theta1 = 1.0;  // weight on the compromised mass, at least 1
  double theta2 = kThetaFloor;  // stopping level, strictly positive
};

inline ThresholdPolicy project_threshold(double theta1, double theta2) {
  return ThresholdPolicy{std::max(theta1, 1.0), std::max(theta2, kThetaFloor)};
}

// stop iff b2 + theta1*b3 - theta2 > 0 (ties continue)
inline StopAction threshold_decision(const ThresholdPolicy& pol, const NodeBelief& b) {
  double sum = b[0] + b[1] + b[2];
  if (b[0] < -1e-9 || b[1] < -1e-9 || b[2] < -1e-9 || std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("threshold_decision: belief is not on the simplex");
  return (b[1] + pol.theta1 * b[2] - pol.theta2 > 0.0) ? StopAction::stop
                                                       : StopAction::cont;
}

// ---------------------------------------------------------------------------
// zone mdp (which action to use where)

struct ZoneMdp {
  std::vector<int> zone_ids;
  std::vector<DefenderAction> actions;        // all non-null defender actions
  std::vector<std::vector<double>> reward;    // [zone][action]
  std::vector<std::vector<int>> next_zone;    // [zone][action] -> zone index
  double gamma = 0.9;
};

inline ZoneMdp build_zone_mdp(const GameConfig& cfg, int ancestor_weight) {
  ZoneMdp m;
  m.gamma = cfg.gamma;
  for (const auto& z : cfg.zones) m.zone_ids.push_back(z.id);
  for (const auto& a : defender_actions(cfg))
    if (!a.is_null()) m.actions.push_back(a);
  auto zone_index = [&](int zid) {
    for (std::size_t j = 0; j < m.zone_ids.size(); ++j)
      if (m.zone_ids[j] == zid) return static_cast<int>(j);
    throw std::out_of_range("unknown zone");
  };
  m.reward.assign(m.zone_ids.size(), std::vector<double>(m.actions.size(), 0.0));
  m.next_zone.assign(m.zone_ids.size(), std::vector<int>(m.actions.size(), 0));
  for (std::size_t zi = 0; zi < m.zone_ids.size(); ++zi)
    for (std::size_t ai = 0; ai < m.actions.size(); ++ai) {
      int nz = zone_after(m.zone_ids[zi], m.actions[ai]);
      m.next_zone[zi][ai] = zone_index(nz);
      // the belief after any defensive action is e1, so the reward is pure
      // service minus the action cost
      m.reward[zi][ai] = cfg.eta * cfg.utility_scale * ancestor_weight *
                             (cfg.zone_active(nz) ? 1.0 : 0.0) -
                         action_cost(cfg, m.actions[ai]);
    }
  return m;
}

struct ZoneMdpSolution {
  std::vector<double> value;             // per zone
  std::vector<DefenderAction> policy;    // per zone
  std::vector<double> residuals;         // sup-norm per sweep
  bool converged = false;
};

inline ZoneMdpSolution solve_zone_mdp(const ZoneMdp& m, double tol = 1e-8,
                                      int max_sweeps = 400) {
  std::size_t nz = m.zone_ids.size();
  ZoneMdpSolution sol;
  sol.value.assign(nz, 0.0);
  sol.policy.assign(nz, m.actions.at(0));
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    std::vector<double> next(nz);
    double residual = 0.0;
    for (std::size_t zi = 0; zi < nz; ++zi) {
      double best = -std::numeric_limits<double>::infinity();
      DefenderAction best_a = m.actions[0];
      for (std::size_t ai = 0; ai < m.actions.size(); ++ai) {
        double v = m.reward[zi][ai] + m.gamma * sol.value[m.next_zone[zi][ai]];
        if (v > best) {
          best = v;
          best_a = m.actions[ai];
        }
      }
      next[zi] = best;
      sol.policy[zi] = best_a;
      residual = std::max(residual, std::abs(best - sol.value[zi]));
    }
    sol.value = next;
    sol.residuals.push_back(residual);
    if (residual <= tol) {
      sol.converged = true;
      break;
    }
  }
  return sol;
}

// ---------------------------------------------------------------------------
// threshold rollouts and spsa fitting

// Discounted return of a threshold rule in the repeated stopping problem,
// averaged over seeded episodes. Episode e of any call with the same seed
// uses the same rng stream, which gives common random numbers across
// evaluations at different thresholds.
inline double evaluate_threshold(const StoppingPomdp& m, const ThresholdPolicy& pol,
                                 int episodes, int horizon, std::uint64_t seed) {
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Rng rng(seed, static_cast<std::uint64_t>(e));
    int cls = 0;
    NodeBelief b = belief_e1();
    double j = 0.0, discount = 1.0;
    for (int t = 1; t <= horizon; ++t) {
      StopAction a = threshold_decision(pol, b);
      j += discount * m.utility[cls][static_cast<int>(a)];
      discount *= m.gamma;
      const Matrix3& kernel =
          (a == StopAction::stop) ? m.stop_kernel : m.continue_kernel;
      double u = rng.uniform();
      double acc = 0.0;
      int next_cls = 2;
      for (int s = 0; s < 3; ++s) {
        acc += kernel[cls][s];
        if (u < acc) {
          next_cls = s;
          break;
        }
      }
      int obs = m.model.sample(next_cls, rng);
      if (a == StopAction::stop) {
        b = belief_e1();
      } else {
        b = belief_update(b, DefenderAction::null_action(), obs, m.continue_kernel,
                          &m.model);
      }
      cls = next_cls;
    }
    total += j;
  }
  return total / episodes;
}

struct SpsaSettings {
  double a = 1.0;        // step-size numerator
  double big_a = 100.0;  // step-size stability constant
  double c = 10.0;       // perturbation numerator
  double lambda = 0.602; // step-size decay
  double epsilon = 0.101;// perturbation decay
  int iterations = 50;
  int rollouts = 300;    // episodes per evaluation
  int horizon = 0;       // 0: derive from gamma
  ThresholdPolicy init{1.5, 0.5};
  std::uint64_t seed = 1;
};

struct SpsaIterate {
  int k = 0;
  ThresholdPolicy theta;  // iterate after the update
  double j_plus = 0.0, j_minus = 0.0;
  double j_iter = 0.0;    // evaluation of the updated iterate itself
};

struct SpsaResult {
  ThresholdPolicy best;    // highest evaluated candidate (the policy to play)
  ThresholdPolicy final;   // last iterate, kept for diagnostics
  double best_value = 0.0;
  double final_value = 0.0;
  std::vector<SpsaIterate> trace;
};

inline SpsaResult spsa_fit_threshold(const StoppingPomdp& m, const SpsaSettings& st) {
  int horizon = st.horizon > 0 ? st.horizon : default_horizon(m.gamma);
  // streams 0..iterations+1 cover the init/perturbation/final evaluations;
  // iterate evaluations live on a disjoint high range
  constexpr std::uint64_t kIterStream = 1ULL << 32;
  auto eval = [&](const ThresholdPolicy& pol, std::uint64_t stream) {
    return evaluate_threshold(m, pol, st.rollouts, horizon, mix_seed(st.seed, stream));
  };

  SpsaResult res;
  ThresholdPolicy theta = project_threshold(st.init.theta1, st.init.theta2);
  res.best = theta;
  res.best_value = eval(theta, 0);

  Rng perturb(st.seed, 0x5350534150455254ULL);  // perturbation directions only
  for (int k = 1; k <= st.iterations; ++k) {
    double ck = st.c / std::pow(k + 1.0, st.epsilon);
    double ak = st.a / std::pow(k + 1.0 + st.big_a, st.lambda);
    double d1 = perturb.rademacher();
    double d2 = perturb.rademacher();
    ThresholdPolicy tp = project_threshold(theta.theta1 + ck * d1, theta.theta2 + ck * d2);
    ThresholdPolicy tm = project_threshold(theta.theta1 - ck * d1, theta.theta2 - ck * d2);
    double jp = eval(tp, static_cast<std::uint64_t>(k));
    double jm = eval(tm, static_cast<std::uint64_t>(k));
    double g1 = (jp - jm) / (2.0 * ck * d1);
    double g2 = (jp - jm) / (2.0 * ck * d2);
    theta = project_threshold(theta.theta1 + ak * g1, theta.theta2 + ak * g2);
    // evaluate the iterate as well: with a large perturbation numerator the
    // probed candidates tp/tm can sit far from the path the iterates follow,
    // so best-candidate tracking has to see the iterates themselves
    double ji = eval(theta, kIterStream + static_cast<std::uint64_t>(k));
    if (jp > res.best_value) {
      res.best_value = jp;
      res.best = tp;
    }
    if (jm > res.best_value) {
      res.best_value = jm;
      res.best = tm;
    }
    if (ji > res.best_value) {
      res.best_value = ji;
      res.best = theta;
    }
    res.trace.push_back({k, theta, jp, jm, ji});
  }
  res.final = theta;
  res.final_value = eval(theta, static_cast<std::uint64_t>(st.iterations) + 1);
  if (res.final_value > res.best_value) {
    res.best_value = res.final_value;
    res.best = theta;
  }
  return res;
}

// ---------------------------------------------------------------------------
// belief-grid reference solver

struct GridOracle {
  int resolution = 0;
  std::vector<std::array<int, 3>> points;  // barycentric coordinates, sum = resolution
  std::vector<double> value;
  std::vector<StopAction> policy;
  int e1_index = -1;
  int sweeps = 0;
  double residual = 0.0;

  double value_at_e1() const { return value.at(e1_index); }
};

// Value iteration on a barycentric grid over the belief simplex. Posterior
// beliefs are projected to the nearest grid point in Euclidean distance.
inline GridOracle belief_grid_oracle(const StoppingPomdp& m, int resolution,
                                     double tol = 1e-12, int max_sweeps = 4000) {
  if (resolution < 2) throw std::invalid_argument("grid resolution must be at least 2");
  GridOracle g;
  g.resolution = resolution;
  for (int i = resolution; i >= 0; --i)
    for (int j = resolution - i; j >= 0; --j)
      g.points.push_back({i, j, resolution - i - j});
  int n = static_cast<int>(g.points.size());
  for (int idx = 0; idx < n; ++idx)
    if (g.points[idx] == std::array<int, 3>{resolution, 0, 0}) g.e1_index = idx;

  auto belief_of = [&](int idx) {
    NodeBelief b;
    for (int s = 0; s < 3; ++s)
      b[s] = static_cast<double>(g.points[idx][s]) / resolution;
    return b;
  };
  auto nearest = [&](const NodeBelief& b) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int idx = 0; idx < n; ++idx) {
      NodeBelief p = belief_of(idx);
      double d = 0.0;
      for (int s = 0; s < 3; ++s) d += (p[s] - b[s]) * (p[s] - b[s]);
      if (d < best_d) {
        best_d = d;
        best = idx;
      }
    }
    return best;
  };

  int n_obs = m.model.n_obs();
  // successor index and branch probability per (point, observation)
  std::vector<std::vector<int>> succ(n, std::vector<int>(n_obs, 0));
  std::vector<std::vector<double>> branch(n, std::vector<double>(n_obs, 0.0));
  for (int idx = 0; idx < n; ++idx) {
    NodeBelief b = belief_of(idx);
    NodeBelief pred = {0.0, 0.0, 0.0};
    for (int s = 0; s < 3; ++s)
      for (int t = 0; t < 3; ++t) pred[t] += b[s] * m.continue_kernel[s][t];
    for (int o = 0; o < n_obs; ++o) {
      NodeBelief post;
      double w = 0.0;
      for (int t = 0; t < 3; ++t) {
        post[t] = pred[t] * m.model.likelihood(t, o);
        w += post[t];
      }
      branch[idx][o] = w;
      if (w > 0.0) {
        for (int t = 0; t < 3; ++t) post[t] /= w;
        succ[idx][o] = nearest(post);
      }
    }
  }

  g.value.assign(n, 0.0);
  g.policy.assign(n, StopAction::cont);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    std::vector<double> next(n);
    double residual = 0.0;
    double v_e1 = g.value[g.e1_index];
    for (int idx = 0; idx < n; ++idx) {
      NodeBelief b = belief_of(idx);
      double u_cont = 0.0, u_stop = 0.0;
      for (int s = 0; s < 3; ++s) {
        u_cont += b[s] * m.utility[s][0];
        u_stop += b[s] * m.utility[s][1];
      }
      double cont_future = 0.0;
      for (int o = 0; o < n_obs; ++o)
        if (branch[idx][o] > 0.0) cont_future += branch[idx][o] * g.value[succ[idx][o]];
      double v_cont = u_cont + m.gamma * cont_future;
      double v_stop = u_stop + m.gamma * v_e1;
      next[idx] = std::max(v_cont, v_stop);
      g.policy[idx] = (v_stop > v_cont) ? StopAction::stop : StopAction::cont;
      residual = std::max(residual, std::abs(next[idx] - g.value[idx]));
    }
    g.value = next;
    g.sweeps = sweep + 1;
    g.residual = residual;
    if (residual <= tol) break;
  }
  return g;
}

// Number of stop->continue flips walking away from e1 along each ray of
// constant (b2 : b3) direction. A monotone (switching-curve) policy has none.
inline int mlr_line_reversals(const GridOracle& g) {
  std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> lines;  // dir -> (i, idx)
  for (int idx = 0; idx < static_cast<int>(g.points.size()); ++idx) {
    auto [i, j, k] = g.points[idx];
    if (j == 0 && k == 0) continue;  // e1 itself: origin of every ray
    int d = std::gcd(j, k);
    lines[{j / d, k / d}].push_back({i, idx});
  }
  int reversals = 0;
  for (auto& [dir, pts] : lines) {
    std::sort(pts.begin(), pts.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    bool stopped = g.policy[g.e1_index] == StopAction::stop;
    for (auto& [i, idx] : pts) {
      bool s = g.policy[idx] == StopAction::stop;
      if (stopped && !s) ++reversals;
      stopped = stopped || s;
    }
  }
  return reversals;
}

// ---------------------------------------------------------------------------
// fitted per-node defender strategy

class ThresholdDefenderStrategy : public DefenderLocalStrategy {
 public:
  struct ZoneRule {
    DefenderAction which;       // action played on stop
    ThresholdPolicy best;       // fitted threshold (played)
    ThresholdPolicy final;      // last spsa iterate (diagnostics)
    double fit_value = 0.0;
  };

  std::map<int, ZoneRule> rules;  // keyed by zone id

  DefenderAction act(int zone, const NodeBelief& belief, Rng&) override {
    const ZoneRule& r = rule(zone);
    return threshold_decision(r.best, belief) == StopAction::stop
               ? r.which
               : DefenderAction::null_action();
  }

  DefenderStage stage() const override {
    // announced behavior evaluated at the uninformed interior belief
    const NodeBelief ref = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    DefenderStage st;
    for (const auto& [zid, r] : rules)
      st.rows[zid] = DefenderStageRow::pure(threshold_decision(r.best, ref) ==
                                                    StopAction::stop
                                                ? r.which
                                                : DefenderAction::null_action());
    return st;
  }

  const ZoneRule& rule(int zone) const {
    auto it = rules.find(zone);
    if (it == rules.end())
      throw std::out_of_range("no stopping rule for zone " + std::to_string(zone));
    return it->second;
  }

  std::string serialize() const override {
    std::ostringstream out;
    out << "threshold " << rules.size() << '\n';
    for (const auto& [zid, r] : rules)
      out << "zone " << zid << " action " << encode_defender_action(r.which)
          << " theta_best " << fmt_double(r.best.theta1) << ' '
          << fmt_double(r.best.theta2) << " theta_final "
          << fmt_double(r.final.theta1) << ' ' << fmt_double(r.final.theta2)
          << " value " << fmt_double(r.fit_value) << '\n';
    return out.str();
  }
};

struct DefenderSolverSettings {
  SpsaSettings spsa;
  double vi_tol = 1e-8;
  int vi_max_sweeps = 400;
};

struct DefenderNodeBr {
  std::shared_ptr<ThresholdDefenderStrategy> strategy;
  ZoneMdpSolution zone_solution;
  std::map<int, SpsaResult> fits;  // keyed by zone id
};

// Best response of one node's defender against a fixed attacker stage
// strategy: zone MDP for the action choice, then one threshold fit per zone.
inline DefenderNodeBr solve_defender_node(const GameConfig& cfg, int ancestor_weight,
                                          const AttackerStage& opponent,
                                          const ObservationModel& model,
                                          const DefenderSolverSettings& settings,
                                          std::uint64_t seed) {
  DefenderNodeBr br;
  ZoneMdp mdp = build_zone_mdp(cfg, ancestor_weight);
  br.zone_solution = solve_zone_mdp(mdp, settings.vi_tol, settings.vi_max_sweeps);
  br.strategy = std::make_shared<ThresholdDefenderStrategy>();
  for (std::size_t zi = 0; zi < mdp.zone_ids.size(); ++zi) {
    int zid = mdp.zone_ids[zi];
    DefenderAction which = br.zone_solution.policy[zi];
    StoppingPomdp pomdp =
        build_stopping_pomdp(cfg, ancestor_weight, zid, which, opponent, model);
    SpsaSettings st = settings.spsa;
    st.seed = mix_seed(seed, static_cast<std::uint64_t>(zi));
    SpsaResult fit = spsa_fit_threshold(pomdp, st);
    br.strategy->rules[zid] =
        ThresholdDefenderStrategy::ZoneRule{which, fit.best, fit.final, fit.best_value};
    br.fits[zid] = std::move(fit);
  }
  return br;
}

}  // namespace irg
