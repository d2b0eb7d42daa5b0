#pragma once

// Infrastructure model: the tree of nodes behind a gateway, the zone set,
// workflow partition, per-action defender costs, and the scalar game
// parameters. Configs are loaded from a line-oriented text format (see
// README for the schema).

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "irg/io.hpp"

namespace irg {

using BigInt = boost::multiprecision::cpp_int;

constexpr int kGateway = 0;  // reserved node id for the gateway

enum class ZoneKind { ordinary, shutdown, redirect };

struct Zone {
  int id = 0;
  ZoneKind kind = ZoneKind::ordinary;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tree of nodes rooted at the gateway. Node ids are arbitrary positive
// integers; internally nodes are addressed by dense index in file order.
struct InfrastructureGraph {
  std::vector<int> node_ids;                 // dense index -> id
  std::vector<int> parent;                   // dense index -> parent id (kGateway for roots)
  std::vector<int> initial_zone;             // dense index -> zone id
  std::vector<int> workflow;                 // dense index -> workflow id
  std::map<int, int> index_by_id;            // id -> dense index
  std::vector<int> workflow_ids;             // distinct workflow ids, ascending

  int size() const { return static_cast<int>(node_ids.size()); }

  int index_of(int node_id) const {
    auto it = index_by_id.find(node_id);
    if (it == index_by_id.end())
      throw std::out_of_range("unknown node id " + std::to_string(node_id));
    return it->second;
  }

  bool has_node(int node_id) const { return index_by_id.count(node_id) != 0; }

  int parent_of(int node_id) const { return parent[index_of(node_id)]; }

  std::vector<int> nodes_in_workflow(int workflow_id) const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
      if (workflow[i] == workflow_id) out.push_back(node_ids[i]);
    return out;
  }
};

// an(i): node i and its ancestors up to (and excluding) the gateway,
// ordered from i upward. an(parent(i)) == an(i) minus {i}.
inline std::vector<int> ancestors(const InfrastructureGraph& g, int node_id) {
  std::vector<int> chain;
  int cur = node_id;
  while (cur != kGateway) {
    chain.push_back(cur);
    cur = g.parent_of(cur);
  }
  return chain;
}

inline int ancestor_weight(const InfrastructureGraph& g, int node_id) {
  return static_cast<int>(ancestors(g, node_id).size());
}

struct ActionCosts {
  double null_cost = 0.0;
  double access_control = 0.0;
  std::map<int, double> move;  // zone id -> cost of moving the node there

  double move_cost(int zone_id) const {
    auto it = move.find(zone_id);
    if (it == move.end())
      throw std::out_of_range("no move cost for zone " + std::to_string(zone_id));
    return it->second;
  }
};

struct ObsModelSpec {
  enum class Kind { synthetic, empirical };
  Kind kind = Kind::synthetic;
  // synthetic: truncated negative-binomial alert counts with shared
  // dispersion r and a per-class mean (healthy, discovered, compromised)
  double dispersion = 4.0;
  std::array<double, 3> mean = {20.0, 60.0, 120.0};
  // empirical: path to a model csv exported by the identification pipeline
  std::string path;
};

struct GameConfig {
  int version = 1;
  InfrastructureGraph graph;
  std::vector<Zone> zones;  // ascending by id
  double gamma = 0.9;
  double eta = 1.0;
  double utility_scale = 1.0;
  double p_brute = 0.3;
  double p_exploit = 0.4;
  int obs_space_size = 10;
  ObsModelSpec obs_model;
  ActionCosts costs;
  std::string origin;  // path the config was loaded from, for error messages

  const Zone& zone(int zone_id) const {
    for (const auto& z : zones)
      if (z.id == zone_id) return z;
    throw std::out_of_range("unknown zone id " + std::to_string(zone_id));
  }

  bool zone_active(int zone_id) const {
    return zone(zone_id).kind != ZoneKind::shutdown;
  }

  int shutdown_zone() const {
    for (const auto& z : zones)
      if (z.kind == ZoneKind::shutdown) return z.id;
    throw std::logic_error("config has no shutdown zone");
  }

  int redirect_zone() const {
    for (const auto& z : zones)
      if (z.kind == ZoneKind::redirect) return z.id;
    throw std::logic_error("config has no redirect zone");
  }
};

namespace detail {

inline void validate_config(GameConfig& cfg) {
  auto fail = [&](const std::string& msg) {
    throw ConfigError(cfg.origin + ": " + msg);
  };
  if (cfg.zones.size() < 2) fail("need at least two zones");
  int n_shut = 0, n_redir = 0;
  std::set<int> zone_ids;
  for (const auto& z : cfg.zones) {
    if (z.id <= 0) fail("zone ids must be positive");
    if (!zone_ids.insert(z.id).second)
      fail("duplicate zone id " + std::to_string(z.id));
    if (z.kind == ZoneKind::shutdown) ++n_shut;
    if (z.kind == ZoneKind::redirect) ++n_redir;
  }
  if (n_shut != 1) fail("exactly one shutdown zone required");
  if (n_redir != 1) fail("exactly one redirect zone required");

  if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0)) fail("gamma must be in [0,1)");
  if (cfg.eta < 0.0) fail("eta must be nonnegative");
  if (cfg.utility_scale <= 0.0) fail("utility_scale must be positive");
  if (cfg.p_brute < 0.0 || cfg.p_brute > 1.0) fail("p_brute must be in [0,1]");
  if (cfg.p_exploit < 0.0 || cfg.p_exploit > 1.0) fail("p_exploit must be in [0,1]");
  if (cfg.obs_space_size < 2) fail("obs_space_size must be at least 2");

  if (cfg.costs.null_cost != 0.0) fail("null action cost must be 0");
  if (cfg.costs.access_control < 0.0) fail("access_control cost must be nonnegative");
  for (int zid : zone_ids)
    if (!cfg.costs.move.count(zid))
      fail("missing move cost for zone " + std::to_string(zid));
  for (const auto& [zid, c] : cfg.costs.move) {
    if (!zone_ids.count(zid)) fail("move cost for unknown zone " + std::to_string(zid));
    if (c < 0.0) fail("move costs must be nonnegative");
  }

  auto& g = cfg.graph;
  if (g.size() == 0) fail("config defines no nodes");
  for (int i = 0; i < g.size(); ++i) {
    int id = g.node_ids[i];
    if (id <= 0) fail("node ids must be positive (0 is the gateway)");
    int par = g.parent[i];
    if (par != kGateway && !g.has_node(par))
      fail("node " + std::to_string(id) + " has unknown parent " + std::to_string(par));
    if (!zone_ids.count(g.initial_zone[i]))
      fail("node " + std::to_string(id) + " starts in unknown zone " +
           std::to_string(g.initial_zone[i]));
    if (g.workflow[i] <= 0) fail("workflow ids must be positive");
  }
  // acyclicity + connectivity: every parent chain must terminate at the gateway
  for (int i = 0; i < g.size(); ++i) {
    std::set<int> seen;
    int cur = g.node_ids[i];
    while (cur != kGateway) {
      if (!seen.insert(cur).second)
        fail("parent cycle involving node " + std::to_string(cur));
      cur = g.parent_of(cur);
    }
  }
  // each workflow plus the gateway must form a connected subtree: a node's
  // parent is either the gateway or a node of the same workflow
  for (int i = 0; i < g.size(); ++i) {
    int par = g.parent[i];
    if (par == kGateway) continue;
    if (g.workflow[g.index_of(par)] != g.workflow[i])
      fail("node " + std::to_string(g.node_ids[i]) +
           " crosses workflows: parent belongs to a different workflow");
  }
  std::set<int> wf(g.workflow.begin(), g.workflow.end());
  g.workflow_ids.assign(wf.begin(), wf.end());
}

}  // namespace detail

// Parses the bundled line-oriented config format. `origin` is used in
// error messages only.
inline GameConfig parse_config(const std::string& text, const std::string& origin) {
  GameConfig cfg;
  cfg.origin = origin;
  bool saw_version = false;
  bool saw_obs_section = false;
  std::string section;
  auto fail = [&](int lineno, const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + msg);
  };

  const auto lines = split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    int lineno = static_cast<int>(n) + 1;
    std::string line = lines[n];
    if (auto pos = line.find('#'); pos != std::string::npos) line.resize(pos);
    line = strip(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(lineno, "malformed section header");
      section = line.substr(1, line.size() - 2);
      if (section != "game" && section != "zones" && section != "costs" &&
          section != "nodes" && section != "observations")
        fail(lineno, "unknown section [" + section + "]");
      if (section == "observations") saw_obs_section = true;
      continue;
    }

    auto tok = split_ws(line);
    if (!saw_version) {
      if (tok.size() != 2 || tok[0] != "version")
        fail(lineno, "expected 'version <n>' before any section");
      long v = parse_long(tok[1], "version");
      if (v != 1) fail(lineno, "unsupported config version " + tok[1]);
      cfg.version = static_cast<int>(v);
      saw_version = true;
      continue;
    }

    if (section == "game") {
      if (tok.size() != 2) fail(lineno, "expected '<key> <value>'");
      const std::string& key = tok[0];
      if (key == "gamma") cfg.gamma = parse_double(tok[1], key);
      else if (key == "eta") cfg.eta = parse_double(tok[1], key);
      else if (key == "utility_scale") cfg.utility_scale = parse_double(tok[1], key);
      else if (key == "p_brute") cfg.p_brute = parse_double(tok[1], key);
      else if (key == "p_exploit") cfg.p_exploit = parse_double(tok[1], key);
      else if (key == "obs_space_size") cfg.obs_space_size = static_cast<int>(parse_long(tok[1], key));
      else fail(lineno, "unknown [game] key '" + key + "'");
    } else if (section == "zones") {
      if (tok.size() != 2) fail(lineno, "expected '<zone-id> <kind>'");
      Zone z;
      z.id = static_cast<int>(parse_long(tok[0], "zone id"));
      if (tok[1] == "ordinary") z.kind = ZoneKind::ordinary;
      else if (tok[1] == "shutdown") z.kind = ZoneKind::shutdown;
      else if (tok[1] == "redirect") z.kind = ZoneKind::redirect;
      else fail(lineno, "unknown zone kind '" + tok[1] + "'");
      cfg.zones.push_back(z);
    } else if (section == "costs") {
      if (tok[0] == "null" && tok.size() == 2)
        cfg.costs.null_cost = parse_double(tok[1], "null cost");
      else if (tok[0] == "access_control" && tok.size() == 2)
        cfg.costs.access_control = parse_double(tok[1], "access_control cost");
      else if (tok[0] == "move" && tok.size() == 3)
        cfg.costs.move[static_cast<int>(parse_long(tok[1], "move zone"))] =
            parse_double(tok[2], "move cost");
      else
        fail(lineno, "expected 'null <c>', 'access_control <c>' or 'move <zone> <c>'");
    } else if (section == "nodes") {
      if (tok.size() != 4) fail(lineno, "expected '<id> <parent> <initial-zone> <workflow>'");
      int id = static_cast<int>(parse_long(tok[0], "node id"));
      if (cfg.graph.index_by_id.count(id))
        fail(lineno, "duplicate node id " + std::to_string(id));
      cfg.graph.index_by_id[id] = cfg.graph.size();
      cfg.graph.node_ids.push_back(id);
      cfg.graph.parent.push_back(static_cast<int>(parse_long(tok[1], "parent")));
      cfg.graph.initial_zone.push_back(static_cast<int>(parse_long(tok[2], "initial zone")));
      cfg.graph.workflow.push_back(static_cast<int>(parse_long(tok[3], "workflow")));
    } else if (section == "observations") {
      if (tok[0] == "synthetic" && tok.size() == 6 && tok[1] == "negbin") {
        cfg.obs_model.kind = ObsModelSpec::Kind::synthetic;
        cfg.obs_model.dispersion = parse_double(tok[2], "dispersion");
        cfg.obs_model.mean = {parse_double(tok[3], "mean0"), parse_double(tok[4], "mean1"),
                              parse_double(tok[5], "mean2")};
      } else if (tok[0] == "empirical" && tok.size() == 2) {
        cfg.obs_model.kind = ObsModelSpec::Kind::empirical;
        cfg.obs_model.path = tok[1];
      } else {
        fail(lineno, "expected 'synthetic negbin <r> <m0> <m1> <m2>' or 'empirical <path>'");
      }
    } else {
      fail(lineno, "content outside of any section");
    }
  }
  if (!saw_version) throw ConfigError(origin + ": empty config (missing version line)");
  if (saw_obs_section && cfg.obs_model.kind == ObsModelSpec::Kind::synthetic) {
    if (cfg.obs_model.dispersion <= 0.0)
      throw ConfigError(origin + ": negbin dispersion must be positive");
    if (!(cfg.obs_model.mean[0] > 0.0 && cfg.obs_model.mean[0] < cfg.obs_model.mean[1] &&
          cfg.obs_model.mean[1] < cfg.obs_model.mean[2]))
      throw ConfigError(origin + ": negbin means must be positive and strictly increasing");
  }
  detail::validate_config(cfg);
  return cfg;
}

inline GameConfig load_config(const std::string& path) {
  return parse_config(read_text_file(path), path);
}

// Joint-space sizes. These overflow 64-bit integers quickly (the joint
// state space is (|Z|*4)^|V|), hence arbitrary precision.
struct Cardinalities {
  BigInt states;
  BigInt observations;
  BigInt defender_actions;
  BigInt attacker_actions;
};

inline BigInt big_pow(BigInt base, int exp) {
  BigInt out = 1;
  for (int i = 0; i < exp; ++i) out *= base;
  return out;
}

inline Cardinalities cardinalities(int n_nodes, int n_zones, int obs_per_node,
                                   int defender_actions_per_node,
                                   int attacker_actions_per_node) {
  if (n_nodes < 1 || n_zones < 1 || obs_per_node < 1 ||
      defender_actions_per_node < 1 || attacker_actions_per_node < 1)
    throw std::invalid_argument("cardinalities: all counts must be positive");
  Cardinalities c;
  c.states = big_pow(BigInt(n_zones) * 4, n_nodes);
  c.observations = big_pow(BigInt(obs_per_node), n_nodes);
  c.defender_actions = big_pow(BigInt(defender_actions_per_node), n_nodes);
  c.attacker_actions = big_pow(BigInt(attacker_actions_per_node), n_nodes);
  return c;
}

inline Cardinalities cardinalities(const GameConfig& cfg) {
  // per node: defender picks a target zone, access control, or null;
  // attacker picks one of the four attack steps
  return cardinalities(cfg.graph.size(), static_cast<int>(cfg.zones.size()),
                       cfg.obs_space_size, static_cast<int>(cfg.zones.size()) + 2, 4);
}

}  // namespace irg
