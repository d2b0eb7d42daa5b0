#pragma once

// Decomposition of the global game into per-node subgames. Each subgame
// carries its node's ancestor weight |an(i)| (the node and its ancestors),
// which is the multiplicity of the node's activity bit in the utilities it
// can influence. The composite operator concatenates per-node strategies
// back into a global strategy.

#include <memory>
#include <sstream>
#include <vector>

#include "irg/dynamics.hpp"

namespace irg {

struct NodeSubgame {
  int node_id = 0;
  int workflow_id = 0;
  int ancestor_weight = 0;  // |an(i)|
  int initial_zone = 0;
};

// one subgame per node, ordered by workflow then node id
inline std::vector<NodeSubgame> decompose(const GameConfig& cfg) {
  std::vector<NodeSubgame> out;
  out.reserve(cfg.graph.size());
  for (int w : cfg.graph.workflow_ids) {
    for (int id : cfg.graph.nodes_in_workflow(w)) {
      int idx = cfg.graph.index_of(id);
      out.push_back(NodeSubgame{id, w, ancestor_weight(cfg.graph, id),
                                cfg.graph.initial_zone[idx]});
    }
  }
  return out;
}

inline std::string subgame_inventory_csv(const std::vector<NodeSubgame>& subgames) {
  std::ostringstream out;
  out << "node,workflow,ancestor_weight\n";
  for (const auto& sg : subgames)
    out << sg.node_id << ',' << sg.workflow_id << ',' << sg.ancestor_weight << '\n';
  return out.str();
}

// Node-local stage utility: the node's activity after the action, weighted
// by how many utility terms contain it, minus its own intrusion and action
// costs. This is the local rewrite under which per-node best responses
// compose into a global best response.
inline double local_stage_utility(const GameConfig& cfg, int ancestor_weight,
                                  const NodeState& s, const DefenderAction& a_D) {
  double active_next = cfg.zone_active(zone_after(s.zone, a_D)) ? 1.0 : 0.0;
  double intrusion = s.intrusion ? 1.0 : 0.0;
  return cfg.eta * cfg.utility_scale * ancestor_weight * active_next -
         (intrusion + action_cost(cfg, a_D));
}

inline double local_stage_utility(const GameConfig& cfg, const NodeSubgame& sg,
                                  const NodeState& s, const DefenderAction& a_D) {
  return local_stage_utility(cfg, sg.ancestor_weight, s, a_D);
}

// ---------------------------------------------------------------------------
// per-node strategies and their composition

class DefenderLocalStrategy {
 public:
  virtual ~DefenderLocalStrategy() = default;
  virtual void begin_episode(Rng&) {}
  virtual DefenderAction act(int zone, const NodeBelief& belief, Rng& rng) = 0;
  virtual DefenderStage stage() const = 0;
  // typed one-block text form; see strategy_io.hpp for the file format
  virtual std::string serialize() const {
    throw std::logic_error("this defender strategy has no serial form");
  }
};

class AttackerLocalStrategy {
 public:
  virtual ~AttackerLocalStrategy() = default;
  virtual void begin_episode(Rng&) {}
  virtual AttackerAction act(int attacker_cls, const std::vector<double>& zone_belief,
                             Rng& rng) = 0;
  virtual AttackerStage stage() const = 0;
  virtual std::string serialize() const {
    throw std::logic_error("this attacker strategy has no serial form");
  }
};

class CompositeDefenderStrategy : public DefenderStrategy {
 public:
  explicit CompositeDefenderStrategy(
      std::vector<std::shared_ptr<DefenderLocalStrategy>> locals)
      : locals_(std::move(locals)) {}

  void begin_episode(Rng& rng) override {
    for (auto& l : locals_) l->begin_episode(rng);
  }

  DefenderAction act(int node_index, int zone, const NodeBelief& belief,
                     Rng& rng) override {
    return locals_.at(node_index)->act(zone, belief, rng);
  }

  DefenderStage stage(int node_index) const override {
    return locals_.at(node_index)->stage();
  }

  const std::shared_ptr<DefenderLocalStrategy>& local(int node_index) const {
    return locals_.at(node_index);
  }
  int size() const { return static_cast<int>(locals_.size()); }

 private:
  std::vector<std::shared_ptr<DefenderLocalStrategy>> locals_;
};

class CompositeAttackerStrategy : public AttackerStrategy {
 public:
  explicit CompositeAttackerStrategy(
      std::vector<std::shared_ptr<AttackerLocalStrategy>> locals)
      : locals_(std::move(locals)) {}

  void begin_episode(Rng& rng) override {
    for (auto& l : locals_) l->begin_episode(rng);
  }

  AttackerAction act(int node_index, int attacker_cls,
                     const std::vector<double>& zone_belief, Rng& rng) override {
    return locals_.at(node_index)->act(attacker_cls, zone_belief, rng);
  }

  AttackerStage stage(int node_index) const override {
    return locals_.at(node_index)->stage();
  }

  const std::shared_ptr<AttackerLocalStrategy>& local(int node_index) const {
    return locals_.at(node_index);
  }
  int size() const { return static_cast<int>(locals_.size()); }

 private:
  std::vector<std::shared_ptr<AttackerLocalStrategy>> locals_;
};

// concatenation: one local strategy per node, in graph index order
inline std::shared_ptr<CompositeDefenderStrategy> composite_strategy(
    const GameConfig& cfg, std::vector<std::shared_ptr<DefenderLocalStrategy>> locals) {
  if (static_cast<int>(locals.size()) != cfg.graph.size())
    throw std::invalid_argument("composite_strategy: need one local strategy per node");
  return std::make_shared<CompositeDefenderStrategy>(std::move(locals));
}

inline std::shared_ptr<CompositeAttackerStrategy> composite_strategy(
    const GameConfig& cfg, std::vector<std::shared_ptr<AttackerLocalStrategy>> locals) {
  if (static_cast<int>(locals.size()) != cfg.graph.size())
    throw std::invalid_argument("composite_strategy: need one local strategy per node");
  return std::make_shared<CompositeAttackerStrategy>(std::move(locals));
}

}  // namespace irg
