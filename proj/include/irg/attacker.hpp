#pragma once

// Attacker side of the node subgames: the static strategy pair that seeds
// self-play, a masked linear-softmax policy, and a compact clipped-surrogate
// policy-gradient learner (PPO-style) with GAE and a per-batch least-squares
// value baseline. The learner best-responds within one node subgame against a
// fixed local defender.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "irg/decomposition.hpp"
#include "irg/dynamics.hpp"
#include "irg/io.hpp"
#include "irg/observation.hpp"
#include "irg/rng.hpp"

namespace irg {

// ---------------------------------------------------------------------------
// static strategies (self-play seed and evaluation baselines)

// Plays null w.p. 0.95; the remaining mass is split evenly over the |Z|+1
// non-null actions (access control plus a move to each zone).
class StaticDefenderLocal : public DefenderLocalStrategy {
 public:
  explicit StaticDefenderLocal(const GameConfig& cfg) {
    actions_ = defender_actions(cfg);
    weights_.assign(actions_.size(), 0.05 / static_cast<double>(actions_.size() - 1));
    weights_[0] = 0.95;  // defender_actions puts null first
    for (const auto& z : cfg.zones) zone_ids_.push_back(z.id);
  }

  DefenderAction act(int, const NodeBelief&, Rng& rng) override {
    return actions_[rng.categorical(weights_)];
  }

  DefenderStage stage() const override {
    DefenderStageRow row;
    for (std::size_t k = 0; k < actions_.size(); ++k)
      row.prob.emplace_back(actions_[k], weights_[k]);
    DefenderStage st;
    for (int zid : zone_ids_) st.rows[zid] = row;
    return st;
  }

  std::string serialize() const override { return "static\n"; }

 private:
  std::vector<DefenderAction> actions_;
  std::vector<double> weights_;
  std::vector<int> zone_ids_;
};

// Case table per attacker class: healthy nodes are probed occasionally,
// discovered nodes attacked occasionally, compromised nodes left alone.
class StaticAttackerLocal : public AttackerLocalStrategy {
 public:
  StaticAttackerLocal() {
    stage_.prob[0] = {0.8, 0.2, 0.0, 0.0};
    stage_.prob[1] = {0.7, 0.0, 0.15, 0.15};
    stage_.prob[2] = {1.0, 0.0, 0.0, 0.0};
  }

  AttackerAction act(int attacker_cls, const std::vector<double>&, Rng& rng) override {
    const auto& row = stage_.prob.at(attacker_cls);
    return static_cast<AttackerAction>(
        rng.categorical(std::vector<double>(row.begin(), row.end())));
  }

  AttackerStage stage() const override { return stage_; }

  std::string serialize() const override { return "static\n"; }

 private:
  AttackerStage stage_;
};

// Uniform over the legal actions of the current class; evaluation baseline.
class UniformAttackerLocal : public AttackerLocalStrategy {
 public:
  AttackerAction act(int attacker_cls, const std::vector<double>&, Rng& rng) override {
    return static_cast<AttackerAction>(rng.uniform_int(attacker_cls == 0 ? 2 : 4));
  }

  AttackerStage stage() const override {
    AttackerStage st;
    st.prob[0] = {0.5, 0.5, 0.0, 0.0};
    st.prob[1] = {0.25, 0.25, 0.25, 0.25};
    st.prob[2] = {0.25, 0.25, 0.25, 0.25};
    return st;
  }

  std::string serialize() const override { return "uniform\n"; }
};

inline std::shared_ptr<CompositeDefenderStrategy> static_defender_strategy(
    const GameConfig& cfg) {
  std::vector<std::shared_ptr<DefenderLocalStrategy>> locals;
  for (int i = 0; i < cfg.graph.size(); ++i)
    locals.push_back(std::make_shared<StaticDefenderLocal>(cfg));
  return composite_strategy(cfg, std::move(locals));
}

inline std::shared_ptr<CompositeAttackerStrategy> static_attacker_strategy(
    const GameConfig& cfg) {
  std::vector<std::shared_ptr<AttackerLocalStrategy>> locals;
  for (int i = 0; i < cfg.graph.size(); ++i)
    locals.push_back(std::make_shared<StaticAttackerLocal>());
  return composite_strategy(cfg, std::move(locals));
}

struct StaticProfile {
  std::shared_ptr<CompositeDefenderStrategy> defender;
  std::shared_ptr<CompositeAttackerStrategy> attacker;
};

inline StaticProfile static_strategies(const GameConfig& cfg) {
  return {static_defender_strategy(cfg), static_attacker_strategy(cfg)};
}

// ---------------------------------------------------------------------------
// linear-softmax policy

// feature vector: [recon bit, intrusion bit, belief over defender zones, bias]
inline std::vector<double> attacker_features(int attacker_cls,
                                             const std::vector<double>& zone_belief) {
  std::vector<double> x;
  x.reserve(zone_belief.size() + 3);
  x.push_back(attacker_cls >= 1 ? 1.0 : 0.0);
  x.push_back(attacker_cls == 2 ? 1.0 : 0.0);
  x.insert(x.end(), zone_belief.begin(), zone_belief.end());
  x.push_back(1.0);
  return x;
}

// mask rule version 1: brute force and exploits require prior reconnaissance
inline std::array<bool, 4> attacker_action_mask(int attacker_cls) {
  return {true, true, attacker_cls >= 1, attacker_cls >= 1};
}

class SoftmaxAttackerPolicy : public AttackerLocalStrategy {
 public:
  static constexpr int kMaskVersion = 1;

  SoftmaxAttackerPolicy(int n_zones, std::vector<double> reference_zone_belief)
      : n_zones_(n_zones), ref_belief_(std::move(reference_zone_belief)),
        w_(kAttackerActionCount, std::vector<double>(n_zones + 3, 0.0)) {
    if (n_zones_ < 1) throw std::invalid_argument("softmax policy needs at least one zone");
    if (static_cast<int>(ref_belief_.size()) != n_zones_)
      throw std::invalid_argument("reference zone belief has wrong dimension");
  }

  int n_zones() const { return n_zones_; }
  int n_features() const { return n_zones_ + 3; }
  std::vector<std::vector<double>>& weights() { return w_; }
  const std::vector<std::vector<double>>& weights() const { return w_; }
  const std::vector<double>& reference_belief() const { return ref_belief_; }

  // masked softmax; illegal actions carry exactly zero probability
  std::array<double, 4> distribution(const std::vector<double>& features,
                                     const std::array<bool, 4>& mask) const {
    if (static_cast<int>(features.size()) != n_features())
      throw std::invalid_argument("feature vector has wrong dimension");
    std::array<double, 4> logit{};
    double top = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < kAttackerActionCount; ++a) {
      if (!mask[a]) continue;
      double z = 0.0;
      for (int f = 0; f < n_features(); ++f) z += w_[a][f] * features[f];
      logit[a] = z;
      top = std::max(top, z);
    }
    std::array<double, 4> p{};
    double norm = 0.0;
    for (int a = 0; a < kAttackerActionCount; ++a) {
      if (!mask[a]) continue;
      p[a] = std::exp(logit[a] - top);
      norm += p[a];
    }
    for (double& v : p) v /= norm;
    return p;
  }

  std::array<double, 4> distribution(int attacker_cls,
                                     const std::vector<double>& zone_belief) const {
    return distribution(attacker_features(attacker_cls, zone_belief),
                        attacker_action_mask(attacker_cls));
  }

  AttackerAction act(int attacker_cls, const std::vector<double>& zone_belief,
                     Rng& rng) override {
    auto p = distribution(attacker_cls, zone_belief);
    return static_cast<AttackerAction>(
        rng.categorical(std::vector<double>(p.begin(), p.end())));
  }

  // published behavior: per-class action distribution at the reference belief
  AttackerStage stage() const override {
    AttackerStage st;
    for (int cls = 0; cls < 3; ++cls) st.prob[cls] = distribution(cls, ref_belief_);
    return st;
  }

  std::string serialize() const override {
    std::ostringstream out;
    out << "softmax " << n_zones_ << " mask " << kMaskVersion << "\n";
    out << "features recon intrusion";
    for (int j = 0; j < n_zones_; ++j) out << " zone_belief_" << j;
    out << " bias\n";
    out << "reference_belief";
    for (double v : ref_belief_) out << ' ' << fmt_double(v);
    out << '\n';
    for (int a = 0; a < kAttackerActionCount; ++a) {
      out << "action " << attacker_action_name(static_cast<AttackerAction>(a));
      for (double v : w_[a]) out << ' ' << fmt_double(v);
      out << '\n';
    }
    return out.str();
  }

  // inverse of serialize(); accepts exactly that shape
  static SoftmaxAttackerPolicy parse(const std::vector<std::string>& lines) {
    if (lines.size() < 3 + kAttackerActionCount)
      throw std::runtime_error("softmax policy: truncated serialization");
    auto head = split_ws(lines[0]);
    if (head.size() != 4 || head[0] != "softmax" || head[2] != "mask")
      throw std::runtime_error("softmax policy: bad header line");
    int nz = static_cast<int>(parse_long(head[1], "softmax zone count"));
    if (parse_long(head[3], "softmax mask version") != kMaskVersion)
      throw std::runtime_error("softmax policy: unsupported mask version");
    auto ref_tok = split_ws(lines[2]);
    if (ref_tok.empty() || ref_tok[0] != "reference_belief" ||
        static_cast<int>(ref_tok.size()) != nz + 1)
      throw std::runtime_error("softmax policy: bad reference belief line");
    std::vector<double> ref(nz);
    for (int j = 0; j < nz; ++j)
      ref[j] = parse_double(ref_tok[j + 1], "softmax reference belief");
    SoftmaxAttackerPolicy pol(nz, std::move(ref));
    for (int a = 0; a < kAttackerActionCount; ++a) {
      auto tok = split_ws(lines[3 + a]);
      if (static_cast<int>(tok.size()) != pol.n_features() + 2 || tok[0] != "action" ||
          tok[1] != attacker_action_name(static_cast<AttackerAction>(a)))
        throw std::runtime_error("softmax policy: bad weight row");
      for (int f = 0; f < pol.n_features(); ++f)
        pol.w_[a][f] = parse_double(tok[f + 2], "softmax weight");
    }
    return pol;
  }

 private:
  int n_zones_;
  std::vector<double> ref_belief_;
  std::vector<std::vector<double>> w_;  // action x feature
};

// ---------------------------------------------------------------------------
// node-subgame rollout environment

// One node subgame from the attacker's side: a fixed local defender acts on
// its belief, which conditions on a published attacker stage strategy (the
// averaged strategy during self-play). The attacker sees its own class and a
// prediction-only belief over the defender's zone. Rewards are the negated
// local defender utilities.
class AttackerNodeEnv {
 public:
  AttackerNodeEnv(const GameConfig& cfg, const ObservationModel& model,
                  const NodeSubgame& sub, std::shared_ptr<DefenderLocalStrategy> defender,
                  const AttackerStage& published_attacker)
      : cfg_(cfg), model_(model), sub_(sub), defender_(std::move(defender)) {
    class_kernel_ =
        compile_stage_transition(published_attacker, cfg.p_brute, cfg.p_exploit);
    zone_kernel_ = compile_zone_transition(cfg, defender_->stage());
    for (std::size_t j = 0; j < cfg.zones.size(); ++j)
      if (cfg.zones[j].id == sub.initial_zone) initial_zone_index_ = static_cast<int>(j);
  }

  int n_zones() const { return static_cast<int>(cfg_.zones.size()); }
  double gamma() const { return cfg_.gamma; }

  std::vector<double> initial_zone_belief() const {
    std::vector<double> b(cfg_.zones.size(), 0.0);
    b[initial_zone_index_] = 1.0;
    return b;
  }

  void reset(Rng& rng) {
    state_ = NodeState{sub_.initial_zone, false, false};
    belief_ = belief_e1();
    zone_belief_ = initial_zone_belief();
    defender_->begin_episode(rng);
  }

  int attacker_cls() const { return attacker_class(state_); }
  const std::vector<double>& zone_belief() const { return zone_belief_; }

  // advances one stage; returns the attacker's reward (negated local utility)
  double step(AttackerAction a_A, Rng& rng) {
    DefenderAction a_D = defender_->act(state_.zone, belief_, rng);
    double reward = -local_stage_utility(cfg_, sub_.ancestor_weight, state_, a_D);
    NodeState next = attacker_step(state_, a_A, a_D, cfg_, rng);
    int obs = model_.sample(attacker_class(next), rng);
    belief_ = belief_update(belief_, a_D, obs, class_kernel_, &model_);
    std::vector<double> out(zone_belief_.size(), 0.0);
    for (std::size_t x = 0; x < zone_belief_.size(); ++x) {
      if (zone_belief_[x] == 0.0) continue;
      for (std::size_t y = 0; y < out.size(); ++y)
        out[y] += zone_belief_[x] * zone_kernel_[x][y];
    }
    zone_belief_ = std::move(out);  // no zone observations: prediction only
    state_ = next;
    return reward;
  }

 private:
  const GameConfig& cfg_;
  const ObservationModel& model_;
  NodeSubgame sub_;
  std::shared_ptr<DefenderLocalStrategy> defender_;
  Matrix3 class_kernel_;
  std::vector<std::vector<double>> zone_kernel_;
  int initial_zone_index_ = 0;

  NodeState state_;
  NodeBelief belief_{};
  std::vector<double> zone_belief_;
};

// mean discounted return of a local attacker strategy in the node subgame;
// per-episode seed streams give common random numbers across candidates
struct NodeEvalResult {
  double mean = 0.0;
  double std_error = 0.0;
};

inline NodeEvalResult evaluate_attacker_local(AttackerNodeEnv& env,
                                              AttackerLocalStrategy& attacker,
                                              int episodes, int horizon,
                                              std::uint64_t seed) {
  if (episodes < 1 || horizon < 1)
    throw std::invalid_argument("evaluation needs positive episodes and horizon");
  double sum = 0.0, sum_sq = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Rng rng(seed, static_cast<std::uint64_t>(e));
    env.reset(rng);
    attacker.begin_episode(rng);
    double ret = 0.0, discount = 1.0;
    for (int t = 0; t < horizon; ++t) {
      AttackerAction a = attacker.act(env.attacker_cls(), env.zone_belief(), rng);
      ret += discount * env.step(a, rng);
      discount *= env.gamma();
    }
    sum += ret;
    sum_sq += ret * ret;
  }
  NodeEvalResult out;
  out.mean = sum / episodes;
  double var = std::max(0.0, sum_sq / episodes - out.mean * out.mean);
  if (episodes > 1)
    out.std_error = std::sqrt(var / (episodes - 1));
  return out;
}

// ---------------------------------------------------------------------------
// rollout batches, GAE, and the least-squares value baseline

struct RolloutStep {
  std::vector<double> features;
  std::array<bool, 4> mask{};
  int action = 0;
  double log_prob = 0.0;  // log-probability under the collection policy
  double reward = 0.0;
  double value = 0.0;
  double advantage = 0.0;
  double ret = 0.0;  // discounted return-to-go within the episode
};

struct RolloutBatch {
  std::vector<RolloutStep> steps;
  std::vector<std::pair<int, int>> episodes;  // [begin, end) ranges into steps
};

// collects `episodes` full episodes with per-episode seed streams
inline RolloutBatch collect_rollouts(AttackerNodeEnv& env,
                                     const SoftmaxAttackerPolicy& policy, int episodes,
                                     int horizon, std::uint64_t seed) {
  RolloutBatch batch;
  batch.steps.reserve(static_cast<std::size_t>(episodes) * horizon);
  for (int e = 0; e < episodes; ++e) {
    Rng rng(seed, static_cast<std::uint64_t>(e));
    env.reset(rng);
    int begin = static_cast<int>(batch.steps.size());
    for (int t = 0; t < horizon; ++t) {
      RolloutStep st;
      st.mask = attacker_action_mask(env.attacker_cls());
      st.features = attacker_features(env.attacker_cls(), env.zone_belief());
      auto p = policy.distribution(st.features, st.mask);
      st.action = rng.categorical(std::vector<double>(p.begin(), p.end()));
      st.log_prob = std::log(std::max(p[st.action], 1e-300));
      st.reward = env.step(static_cast<AttackerAction>(st.action), rng);
      batch.steps.push_back(std::move(st));
    }
    batch.episodes.emplace_back(begin, static_cast<int>(batch.steps.size()));
  }
  return batch;
}

// least-squares fit of a linear value function on the batch features against
// the discounted returns-to-go (normal equations with a small ridge term)
inline std::vector<double> fit_value_baseline(RolloutBatch& batch, double gamma,
                                              double ridge = 1e-8) {
  if (batch.steps.empty()) throw std::invalid_argument("empty rollout batch");
  for (const auto& [begin, end] : batch.episodes) {
    double g = 0.0;
    for (int t = end - 1; t >= begin; --t) {
      g = batch.steps[t].reward + gamma * g;
      batch.steps[t].ret = g;
    }
  }
  int f = static_cast<int>(batch.steps[0].features.size());
  std::vector<std::vector<double>> a(f, std::vector<double>(f, 0.0));
  std::vector<double> b(f, 0.0);
  for (const auto& st : batch.steps) {
    for (int i = 0; i < f; ++i) {
      for (int j = 0; j < f; ++j) a[i][j] += st.features[i] * st.features[j];
      b[i] += st.features[i] * st.ret;
    }
  }
  for (int i = 0; i < f; ++i) a[i][i] += ridge * batch.steps.size();
  // gaussian elimination with partial pivoting
  std::vector<double> w(f, 0.0);
  for (int col = 0; col < f; ++col) {
    int pivot = col;
    for (int r = col + 1; r < f; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    if (std::fabs(a[col][col]) < 1e-300)
      throw std::runtime_error("value baseline fit: singular normal equations");
    for (int r = col + 1; r < f; ++r) {
      double m = a[r][col] / a[col][col];
      if (m == 0.0) continue;
      for (int c = col; c < f; ++c) a[r][c] -= m * a[col][c];
      b[r] -= m * b[col];
    }
  }
  for (int r = f - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < f; ++c) s -= a[r][c] * w[c];
    w[r] = s / a[r][r];
  }
  for (auto& st : batch.steps) {
    double v = 0.0;
    for (int i = 0; i < f; ++i) v += w[i] * st.features[i];
    st.value = v;
  }
  return w;
}

// GAE advantages from the fitted values, then normalization to zero mean and
// unit variance across the batch. Episodes are truncated at the horizon, so
// the value past the final step is taken as zero (the discount tail is
// negligible at the default horizon).
inline void compute_advantages(RolloutBatch& batch, double gamma, double lambda) {
  for (const auto& [begin, end] : batch.episodes) {
    double acc = 0.0;
    for (int t = end - 1; t >= begin; --t) {
      double next_value = (t + 1 < end) ? batch.steps[t + 1].value : 0.0;
      double delta = batch.steps[t].reward + gamma * next_value - batch.steps[t].value;
      acc = delta + gamma * lambda * acc;
      batch.steps[t].advantage = acc;
    }
  }
  double mean = 0.0;
  for (const auto& st : batch.steps) mean += st.advantage;
  mean /= batch.steps.size();
  double var = 0.0;
  for (const auto& st : batch.steps) {
    double d = st.advantage - mean;
    var += d * d;
  }
  var /= batch.steps.size();
  double sd = std::sqrt(var);
  if (sd < 1e-12) sd = 1.0;  // degenerate batch: leave centered values
  for (auto& st : batch.steps) st.advantage = (st.advantage - mean) / sd;
}

// ---------------------------------------------------------------------------
// clipped surrogate objective and its analytic gradient

struct SurrogateSettings {
  double clip = 0.2;
  double ent_coef = 1e-4;
};

// mean over the batch of min(rho*A, clip(rho, 1-eps, 1+eps)*A) plus the
// entropy bonus, where rho is the probability ratio against log_prob
inline double surrogate_objective(const SoftmaxAttackerPolicy& policy,
                                  const RolloutBatch& batch,
                                  const SurrogateSettings& ss) {
  double total = 0.0;
  for (const auto& st : batch.steps) {
    auto p = policy.distribution(st.features, st.mask);
    double log_new = std::log(std::max(p[st.action], 1e-300));
    double rho = std::exp(log_new - st.log_prob);
    double unclipped = rho * st.advantage;
    double clipped = std::clamp(rho, 1.0 - ss.clip, 1.0 + ss.clip) * st.advantage;
    double entropy = 0.0;
    for (int a = 0; a < kAttackerActionCount; ++a)
      if (st.mask[a] && p[a] > 0.0) entropy -= p[a] * std::log(p[a]);
    total += std::min(unclipped, clipped) + ss.ent_coef * entropy;
  }
  return total / batch.steps.size();
}

// gradient of surrogate_objective in the policy weights; samples whose ratio
// is cut off by the clip contribute no surrogate gradient
inline std::vector<std::vector<double>> surrogate_gradient(
    const SoftmaxAttackerPolicy& policy, const RolloutBatch& batch,
    const SurrogateSettings& ss) {
  int f = policy.n_features();
  std::vector<std::vector<double>> grad(kAttackerActionCount,
                                        std::vector<double>(f, 0.0));
  double inv = 1.0 / batch.steps.size();
  for (const auto& st : batch.steps) {
    auto p = policy.distribution(st.features, st.mask);
    double log_new = std::log(std::max(p[st.action], 1e-300));
    double rho = std::exp(log_new - st.log_prob);
    double unclipped = rho * st.advantage;
    double clipped = std::clamp(rho, 1.0 - ss.clip, 1.0 + ss.clip) * st.advantage;
    double surr_coeff = (unclipped <= clipped) ? rho * st.advantage : 0.0;
    double entropy = 0.0;
    for (int a = 0; a < kAttackerActionCount; ++a)
      if (st.mask[a] && p[a] > 0.0) entropy -= p[a] * std::log(p[a]);
    for (int a = 0; a < kAttackerActionCount; ++a) {
      if (!st.mask[a]) continue;
      double coeff = surr_coeff * ((a == st.action ? 1.0 : 0.0) - p[a]);
      if (p[a] > 0.0)
        coeff -= ss.ent_coef * p[a] * (std::log(p[a]) + entropy);
      if (coeff == 0.0) continue;
      double scaled = inv * coeff;
      for (int j = 0; j < f; ++j) grad[a][j] += scaled * st.features[j];
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// the best-response learner

struct PpoSettings {
  int iterations = 40;
  int batch_size = 4096;  // steps per batch, rounded up to whole episodes
  int epochs = 10;
  double lr = 0.05;
  double clip = 0.2;
  double gae_lambda = 0.95;
  double ent_coef = 1e-4;
  int horizon = 0;  // 0: derive from the discount factor
  int eval_episodes = 200;
  std::uint64_t seed = 1;
};

struct PpoIterate {
  int iteration = 0;
  double eval_return = 0.0;
  double objective = 0.0;  // surrogate value after the update
};

struct AttackerBrResult {
  std::shared_ptr<SoftmaxAttackerPolicy> best;   // highest evaluation return
  std::shared_ptr<SoftmaxAttackerPolicy> final;  // last iterate
  double best_return = 0.0;
  double final_return = 0.0;
  std::vector<PpoIterate> trace;
};

inline AttackerBrResult attacker_best_response(const GameConfig& cfg,
                                               const ObservationModel& model,
                                               const NodeSubgame& sub,
                                               std::shared_ptr<DefenderLocalStrategy> defender,
                                               const AttackerStage& published_attacker,
                                               const PpoSettings& ps) {
  if (ps.iterations < 1 || ps.batch_size < 1 || ps.epochs < 1 || ps.lr <= 0.0 ||
      ps.clip <= 0.0 || ps.eval_episodes < 1)
    throw std::invalid_argument("ppo settings must be positive");
  int horizon = ps.horizon > 0 ? ps.horizon : default_horizon(cfg.gamma);
  int episodes_per_batch = (ps.batch_size + horizon - 1) / horizon;

  AttackerNodeEnv env(cfg, model, sub, std::move(defender), published_attacker);
  auto policy = std::make_shared<SoftmaxAttackerPolicy>(env.n_zones(),
                                                        env.initial_zone_belief());
  SurrogateSettings ss{ps.clip, ps.ent_coef};
  std::uint64_t eval_seed = mix_seed(ps.seed, 0x6576616cULL);  // fixed: CRN across iterates

  AttackerBrResult out;
  auto snapshot = [&](const SoftmaxAttackerPolicy& p) {
    return std::make_shared<SoftmaxAttackerPolicy>(p);
  };
  out.best_return =
      evaluate_attacker_local(env, *policy, ps.eval_episodes, horizon, eval_seed).mean;
  out.best = snapshot(*policy);
  out.trace.push_back({0, out.best_return, 0.0});

  for (int k = 1; k <= ps.iterations; ++k) {
    std::uint64_t batch_seed = mix_seed(ps.seed, static_cast<std::uint64_t>(k));
    RolloutBatch batch =
        collect_rollouts(env, *policy, episodes_per_batch, horizon, batch_seed);
    fit_value_baseline(batch, cfg.gamma);
    compute_advantages(batch, cfg.gamma, ps.gae_lambda);
    for (int epoch = 0; epoch < ps.epochs; ++epoch) {
      auto grad = surrogate_gradient(*policy, batch, ss);
      auto& w = policy->weights();
      for (int a = 0; a < kAttackerActionCount; ++a)
        for (int j = 0; j < policy->n_features(); ++j) w[a][j] += ps.lr * grad[a][j];
    }
    double eval =
        evaluate_attacker_local(env, *policy, ps.eval_episodes, horizon, eval_seed).mean;
    out.trace.push_back({k, eval, surrogate_objective(*policy, batch, ss)});
    if (eval > out.best_return) {
      out.best_return = eval;
      out.best = snapshot(*policy);
    }
  }
  out.final = snapshot(*policy);
  out.final_return = out.trace.back().eval_return;
  return out;
}

}  // namespace irg
