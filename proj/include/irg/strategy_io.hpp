#pragma once

// Versioned text files for whole strategy profiles. A profile file is a
// header line, a node count, then one typed block per node in graph index
// order; each block is the strategy's own serialize() text. Files round-trip
// exactly: parse(serialize(x)) reproduces x field for field.

#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "irg/attacker.hpp"
#include "irg/decomposition.hpp"
#include "irg/equilibrium.hpp"
#include "irg/io.hpp"
#include "irg/stopping.hpp"

namespace irg {

inline constexpr const char* kDefenderProfileHeader = "irg-defender-strategy 1";
inline constexpr const char* kAttackerProfileHeader = "irg-attacker-strategy 1";

namespace detail {

inline std::runtime_error profile_error(std::size_t line_no, const std::string& why) {
  return std::runtime_error("strategy file line " + std::to_string(line_no) + ": " + why);
}

// splits the body into (node id, block lines) groups on "node <id>" markers
struct NodeBlock {
  int node_id = 0;
  std::vector<std::string> lines;
};

inline std::vector<NodeBlock> split_node_blocks(const std::vector<std::string>& lines,
                                                const char* header) {
  if (lines.empty() || strip(lines[0]) != header)
    throw profile_error(1, std::string("expected header '") + header + "'");
  if (lines.size() < 2) throw profile_error(2, "missing node count");
  auto count_tok = split_ws(lines[1]);
  if (count_tok.size() != 2 || count_tok[0] != "nodes")
    throw profile_error(2, "expected 'nodes <count>'");
  long declared = parse_long(count_tok[1], "node count");

  std::vector<NodeBlock> blocks;
  for (std::size_t k = 2; k < lines.size(); ++k) {
    const std::string line = strip(lines[k]);
    if (line.empty()) continue;
    auto tok = split_ws(line);
    if (tok[0] == "node") {
      if (tok.size() != 2) throw profile_error(k + 1, "expected 'node <id>'");
      blocks.push_back({static_cast<int>(parse_long(tok[1], "node id")), {}});
    } else {
      if (blocks.empty()) throw profile_error(k + 1, "block outside any node");
      blocks.back().lines.push_back(line);
    }
  }
  if (static_cast<long>(blocks.size()) != declared)
    throw std::runtime_error("strategy file: declared " + std::to_string(declared) +
                             " nodes, found " + std::to_string(blocks.size()));
  return blocks;
}

inline std::shared_ptr<DefenderLocalStrategy> parse_defender_block(
    const GameConfig& cfg, const NodeBlock& block) {
  if (block.lines.empty())
    throw std::runtime_error("strategy file: empty block for node " +
                             std::to_string(block.node_id));
  auto head = split_ws(block.lines[0]);
  if (head[0] == "static") return std::make_shared<StaticDefenderLocal>(cfg);
  if (head[0] == "tabular") {
    DefenderMap map;
    for (std::size_t k = 1; k < block.lines.size(); ++k) {
      auto tok = split_ws(block.lines[k]);
      if (tok.size() != 4 || tok[0] != "zone" || tok[2] != "action")
        throw std::runtime_error("strategy file: bad tabular row '" + block.lines[k] +
                                 "'");
      map[static_cast<int>(parse_long(tok[1], "zone id"))] =
          decode_defender_action(static_cast<int>(parse_long(tok[3], "action code")));
    }
    return std::make_shared<TabularDefenderLocal>(std::move(map));
  }
  if (head[0] == "threshold") {
    auto strat = std::make_shared<ThresholdDefenderStrategy>();
    for (std::size_t k = 1; k < block.lines.size(); ++k) {
      auto tok = split_ws(block.lines[k]);
      if (tok.size() != 12 || tok[0] != "zone" || tok[2] != "action" ||
          tok[4] != "theta_best" || tok[7] != "theta_final" || tok[10] != "value")
        throw std::runtime_error("strategy file: bad threshold row '" + block.lines[k] +
                                 "'");
      ThresholdDefenderStrategy::ZoneRule rule;
      rule.which =
          decode_defender_action(static_cast<int>(parse_long(tok[3], "action code")));
      rule.best = {parse_double(tok[5], "theta1"), parse_double(tok[6], "theta2")};
      rule.final = {parse_double(tok[8], "theta1"), parse_double(tok[9], "theta2")};
      rule.fit_value = parse_double(tok[11], "fit value");
      strat->rules[static_cast<int>(parse_long(tok[1], "zone id"))] = rule;
    }
    return strat;
  }
  throw std::runtime_error("strategy file: unknown defender block kind '" + head[0] +
                           "'");
}

inline std::shared_ptr<AttackerLocalStrategy> parse_attacker_block(
    const GameConfig& cfg, const NodeBlock& block) {
  if (block.lines.empty())
    throw std::runtime_error("strategy file: empty block for node " +
                             std::to_string(block.node_id));
  auto head = split_ws(block.lines[0]);
  if (head[0] == "static") return std::make_shared<StaticAttackerLocal>();
  if (head[0] == "uniform") return std::make_shared<UniformAttackerLocal>();
  if (head[0] == "tabular") {
    if (head.size() != 4)
      throw std::runtime_error("strategy file: bad tabular attacker block");
    AttackerMap map;
    for (int cls = 0; cls < 3; ++cls) {
      long code = parse_long(head[cls + 1], "attacker action");
      if (code < 0 || code >= kAttackerActionCount)
        throw std::runtime_error("strategy file: attacker action code out of range");
      map[cls] = static_cast<AttackerAction>(code);
    }
    return std::make_shared<TabularAttackerLocal>(map);
  }
  if (head[0] == "softmax") {
    (void)cfg;
    return std::make_shared<SoftmaxAttackerPolicy>(
        SoftmaxAttackerPolicy::parse(block.lines));
  }
  throw std::runtime_error("strategy file: unknown attacker block kind '" + head[0] +
                           "'");
}

template <typename Composite>
std::string serialize_profile(const GameConfig& cfg, const Composite& strategy,
                              const char* header) {
  if (strategy.size() != cfg.graph.size())
    throw std::invalid_argument("serialize: strategy arity does not match the config");
  std::ostringstream out;
  out << header << '\n' << "nodes " << cfg.graph.size() << '\n';
  for (int i = 0; i < cfg.graph.size(); ++i) {
    out << "node " << cfg.graph.node_ids[i] << '\n';
    out << strategy.local(i)->serialize();
  }
  return out.str();
}

}  // namespace detail

inline std::string serialize_defender_profile(const GameConfig& cfg,
                                              const CompositeDefenderStrategy& s) {
  return detail::serialize_profile(cfg, s, kDefenderProfileHeader);
}

inline std::string serialize_attacker_profile(const GameConfig& cfg,
                                              const CompositeAttackerStrategy& s) {
  return detail::serialize_profile(cfg, s, kAttackerProfileHeader);
}

inline std::shared_ptr<CompositeDefenderStrategy> parse_defender_profile(
    const GameConfig& cfg, const std::string& text) {
  auto blocks = detail::split_node_blocks(split_lines(text), kDefenderProfileHeader);
  if (static_cast<int>(blocks.size()) != cfg.graph.size())
    throw std::runtime_error("strategy file: node count does not match the config");
  std::vector<std::shared_ptr<DefenderLocalStrategy>> locals;
  for (int i = 0; i < cfg.graph.size(); ++i) {
    if (blocks[i].node_id != cfg.graph.node_ids[i])
      throw std::runtime_error("strategy file: node " + std::to_string(blocks[i].node_id) +
                               " out of order (expected " +
                               std::to_string(cfg.graph.node_ids[i]) + ")");
    locals.push_back(detail::parse_defender_block(cfg, blocks[i]));
  }
  return composite_strategy(cfg, std::move(locals));
}

inline std::shared_ptr<CompositeAttackerStrategy> parse_attacker_profile(
    const GameConfig& cfg, const std::string& text) {
  auto blocks = detail::split_node_blocks(split_lines(text), kAttackerProfileHeader);
  if (static_cast<int>(blocks.size()) != cfg.graph.size())
    throw std::runtime_error("strategy file: node count does not match the config");
  std::vector<std::shared_ptr<AttackerLocalStrategy>> locals;
  for (int i = 0; i < cfg.graph.size(); ++i) {
    if (blocks[i].node_id != cfg.graph.node_ids[i])
      throw std::runtime_error("strategy file: node " + std::to_string(blocks[i].node_id) +
                               " out of order (expected " +
                               std::to_string(cfg.graph.node_ids[i]) + ")");
    locals.push_back(detail::parse_attacker_block(cfg, blocks[i]));
  }
  return composite_strategy(cfg, std::move(locals));
}

// checkpoint index: which component files make up a mixture and with what
// weight; written next to the per-iteration profile files
inline std::string mixture_index_csv(const std::vector<std::string>& files,
                                     const std::vector<double>& weights) {
  if (files.size() != weights.size())
    throw std::invalid_argument("mixture index: files and weights differ in length");
  std::ostringstream out;
  out << "file,weight\n";
  for (std::size_t k = 0; k < files.size(); ++k)
    out << files[k] << ',' << fmt_double(weights[k]) << '\n';
  return out.str();
}

}  // namespace irg
