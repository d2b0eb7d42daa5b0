#pragma once

// Trace ingestion and empirical observation-model estimation: rebuilds each
// node's per-class alert-count distribution from recorded time steps and
// validates the likelihood-ratio ordering the threshold machinery depends on.

#include <array>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "irg/infrastructure.hpp"
#include "irg/io.hpp"
#include "irg/observation.hpp"
#include "irg/rng.hpp"
#include "irg/stopping.hpp"

namespace irg {

// ---------------------------------------------------------------------------
// trace records

struct TraceRecord {
  int t = 0;            // time-step index within the source episode
  int node = 0;         // node id
  int state_class = 0;  // 0 healthy, 1 discovered, 2 compromised
  int alert_count = 0;  // observation index in [0, n_obs)
};

inline constexpr const char* kTraceHeader = "t,node,state_class,alert_count";

struct TraceSummary {
  std::size_t records = 0;
  std::map<int, std::size_t> per_node;
  std::array<std::size_t, 3> per_class{};
};

struct TraceIngest {
  std::vector<TraceRecord> records;
  TraceSummary summary;
};

// Parses trace CSV text. An entirely empty file is an empty trace; otherwise
// the first line must be the exact header. Errors carry 1-based line numbers.
inline TraceIngest ingest_trace_text(const std::string& text, int n_obs) {
  if (n_obs < 2) throw std::invalid_argument("trace ingest: n_obs must be at least 2");
  TraceIngest out;
  const auto lines = split_lines(text);
  if (lines.empty()) return out;

  auto fail = [](std::size_t line_no, const std::string& why) {
    throw std::runtime_error("trace line " + std::to_string(line_no) + ": " + why);
  };

  if (strip(lines[0]) != kTraceHeader)
    fail(1, std::string("expected header '") + kTraceHeader + "'");

  for (std::size_t k = 1; k < lines.size(); ++k) {
    const std::string line = strip(lines[k]);
    if (line.empty()) continue;
    const auto tok = split_char(line, ',');
    if (tok.size() != 4) fail(k + 1, "expected 4 comma-separated fields");
    TraceRecord rec;
    try {
      rec.t = static_cast<int>(parse_long(strip(tok[0]), "t"));
      rec.node = static_cast<int>(parse_long(strip(tok[1]), "node"));
      rec.state_class = static_cast<int>(parse_long(strip(tok[2]), "state_class"));
      rec.alert_count = static_cast<int>(parse_long(strip(tok[3]), "alert_count"));
    } catch (const std::exception& e) {
      fail(k + 1, e.what());
    }
    if (rec.t < 0) fail(k + 1, "negative time step");
    if (rec.state_class < 0 || rec.state_class > 2)
      fail(k + 1, "state_class must be 0, 1 or 2");
    if (rec.alert_count < 0 || rec.alert_count >= n_obs)
      fail(k + 1, "alert_count " + std::to_string(rec.alert_count) +
                      " outside [0, " + std::to_string(n_obs) + ")");
    out.records.push_back(rec);
    ++out.summary.records;
    ++out.summary.per_node[rec.node];
    ++out.summary.per_class[rec.state_class];
  }
  return out;
}

inline TraceIngest ingest_traces(const std::string& path, int n_obs) {
  return ingest_trace_text(read_text_file(path), n_obs);
}

// Validates node ids against a config on top of the structural checks.
inline TraceIngest ingest_traces(const std::string& path, const GameConfig& cfg) {
  TraceIngest in = ingest_trace_text(read_text_file(path), cfg.obs_space_size);
  for (const auto& [node, count] : in.summary.per_node) {
    (void)count;
    if (!cfg.graph.has_node(node))
      throw std::runtime_error("trace references unknown node " + std::to_string(node));
  }
  return in;
}

// ---------------------------------------------------------------------------
// empirical model estimation

struct EmpiricalObservationModel {
  struct NodeRows {
    std::array<std::vector<long>, 3> counts;
    std::array<std::vector<double>, 3> freq;
    std::array<long, 3> samples{};
    std::array<bool, 3> usable{};    // true when the class was observed at all
    std::array<bool, 3> fallback{};  // discovered row copied from healthy
  };

  int n_obs = 0;
  double alpha = 1.0;  // add-alpha smoothing used to build freq
  std::map<int, NodeRows> nodes;
};

// frequency(o | node, class) = (count + alpha) / (n + alpha * n_obs).
// alpha = 0 reproduces raw frequencies; unobserved rows then stay all-zero
// and are flagged unusable. A node with healthy samples but no discovered
// samples inherits the healthy row for the discovered class (two-class
// measurement fallback).
inline EmpiricalObservationModel estimate_observation_model(
    const std::vector<TraceRecord>& records, int n_obs, double alpha = 1.0) {
  if (n_obs < 2) throw std::invalid_argument("estimate: n_obs must be at least 2");
  if (alpha < 0.0) throw std::invalid_argument("estimate: smoothing must be nonnegative");

  EmpiricalObservationModel model;
  model.n_obs = n_obs;
  model.alpha = alpha;

  for (const auto& rec : records) {
    auto& rows = model.nodes[rec.node];
    if (rows.counts[0].empty())
      for (auto& c : rows.counts) c.assign(n_obs, 0);
    if (rec.alert_count < 0 || rec.alert_count >= n_obs)
      throw std::out_of_range("estimate: alert_count outside the observation space");
    ++rows.counts[rec.state_class][rec.alert_count];
    ++rows.samples[rec.state_class];
  }

  for (auto& [node, rows] : model.nodes) {
    (void)node;
    for (int cls = 0; cls < 3; ++cls) {
      rows.usable[cls] = rows.samples[cls] > 0;
      rows.freq[cls].assign(n_obs, 0.0);
      double denom = double(rows.samples[cls]) + alpha * n_obs;
      if (denom <= 0.0) continue;  // alpha = 0 and no samples: stays zero
      for (int o = 0; o < n_obs; ++o)
        rows.freq[cls][o] = (rows.counts[cls][o] + alpha) / denom;
    }
    if (rows.samples[1] == 0 && rows.samples[0] > 0) {
      rows.freq[1] = rows.freq[0];
      rows.fallback[1] = true;
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// likelihood-ratio validation

struct MlrNodeReport {
  int node = 0;
  std::size_t minors = 0;            // 2x2 minors scanned
  double fraction_nonnegative = 1.0;
  double worst_minor = 0.0;          // most negative minor (0 when none)
  bool ok = true;
};

// Scans every 2x2 minor of the stacked (healthy, compromised) frequency rows.
// Nonnegative minors mean the compromised/healthy likelihood ratio is
// nondecreasing in the alert count — the ordering threshold optimality needs.
inline std::vector<MlrNodeReport> validate_mlr(const EmpiricalObservationModel& model,
                                               double tol = 1e-12) {
  std::vector<MlrNodeReport> reports;
  for (const auto& [node, rows] : model.nodes) {
    double h_mass = 0.0, c_mass = 0.0;
    for (double v : rows.freq[0]) h_mass += v;
    for (double v : rows.freq[2]) c_mass += v;
    if (h_mass <= 0.0 || c_mass <= 0.0)
      throw std::invalid_argument("validate_mlr: node " + std::to_string(node) +
                                  " has an empty healthy or compromised row");
    MlrNodeReport rep;
    rep.node = node;
    const auto& h = rows.freq[0];
    const auto& c = rows.freq[2];
    std::size_t nonneg = 0;
    for (int k = 0; k + 1 < model.n_obs; ++k)
      for (int l = k + 1; l < model.n_obs; ++l) {
        double minor = h[k] * c[l] - h[l] * c[k];
        ++rep.minors;
        if (minor >= -tol) ++nonneg;
        if (minor < rep.worst_minor) rep.worst_minor = minor;
      }
    rep.fraction_nonnegative = rep.minors ? double(nonneg) / double(rep.minors) : 1.0;
    rep.ok = tp2_check({h, c}, tol).ok;
    reports.push_back(rep);
  }
  return reports;
}

// ---------------------------------------------------------------------------
// model export / import

inline constexpr const char* kModelHeader = "node,state_class,obs,probability";
inline constexpr int kPooledNode = -1;  // node id of the count-pooled block

// Long-format CSV: one row per (node, class, observation). A pooled block
// under node id -1 aggregates counts over all nodes with the same smoothing,
// which is what instantiates the game's single observation model.
inline std::string export_model_csv(const EmpiricalObservationModel& model) {
  std::ostringstream out;
  out << kModelHeader << '\n';
  auto emit = [&](int node, const std::array<std::vector<double>, 3>& rows) {
    for (int cls = 0; cls < 3; ++cls)
      for (int o = 0; o < model.n_obs; ++o)
        out << node << ',' << cls << ',' << o << ',' << fmt_double(rows[cls][o]) << '\n';
  };

  std::array<std::vector<long>, 3> pooled_counts;
  std::array<long, 3> pooled_samples{};
  for (auto& c : pooled_counts) c.assign(model.n_obs, 0);
  for (const auto& [node, rows] : model.nodes) {
    (void)node;
    for (int cls = 0; cls < 3; ++cls) {
      pooled_samples[cls] += rows.samples[cls];
      for (int o = 0; o < model.n_obs; ++o) pooled_counts[cls][o] += rows.counts[cls][o];
    }
  }
  std::array<std::vector<double>, 3> pooled;
  for (int cls = 0; cls < 3; ++cls) {
    pooled[cls].assign(model.n_obs, 0.0);
    double denom = double(pooled_samples[cls]) + model.alpha * model.n_obs;
    if (denom > 0.0)
      for (int o = 0; o < model.n_obs; ++o)
        pooled[cls][o] = (pooled_counts[cls][o] + model.alpha) / denom;
  }
  if (pooled_samples[1] == 0 && pooled_samples[0] > 0) pooled[1] = pooled[0];
  emit(kPooledNode, pooled);

  for (const auto& [node, rows] : model.nodes) emit(node, rows.freq);
  return out.str();
}

using ModelRows = std::map<int, std::array<std::vector<double>, 3>>;

inline ModelRows import_model_csv(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.empty() || strip(lines[0]) != kModelHeader)
    throw std::runtime_error(std::string("model csv: expected header '") + kModelHeader +
                             "'");
  ModelRows rows;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const std::string line = strip(lines[k]);
    if (line.empty()) continue;
    const auto tok = split_char(line, ',');
    if (tok.size() != 4)
      throw std::runtime_error("model csv line " + std::to_string(k + 1) +
                               ": expected 4 fields");
    int node = static_cast<int>(parse_long(strip(tok[0]), "node"));
    int cls = static_cast<int>(parse_long(strip(tok[1]), "state_class"));
    int obs = static_cast<int>(parse_long(strip(tok[2]), "obs"));
    double p = parse_double(strip(tok[3]), "probability");
    if (cls < 0 || cls > 2)
      throw std::runtime_error("model csv line " + std::to_string(k + 1) +
                               ": state_class must be 0, 1 or 2");
    if (obs < 0)
      throw std::runtime_error("model csv line " + std::to_string(k + 1) +
                               ": negative observation index");
    auto& block = rows[node];
    for (auto& r : block)
      if (static_cast<int>(r.size()) <= obs) r.resize(obs + 1, 0.0);
    block[cls][obs] = p;
  }
  return rows;
}

// Builds the filter-facing model for one block of imported rows. from_rows
// renormalizes and rejects empty or negative rows.
inline ObservationModel observation_model_from_rows(
    const std::array<std::vector<double>, 3>& rows) {
  return ObservationModel::from_rows(rows);
}

// Loads the model csv referenced by an empirical-observation config. Prefers
// the pooled block; a file holding exactly one node block is accepted too.
inline ObservationModel load_empirical_model(const std::string& path) {
  ModelRows rows = import_model_csv(read_text_file(path));
  auto it = rows.find(kPooledNode);
  if (it == rows.end()) {
    if (rows.size() != 1)
      throw std::runtime_error("model csv " + path +
                               ": no pooled block and multiple node blocks");
    it = rows.begin();
  }
  return observation_model_from_rows(it->second);
}

inline ObservationModel load_observation_model(const GameConfig& cfg) {
  if (cfg.obs_model.kind == ObsModelSpec::Kind::empirical)
    return load_empirical_model(cfg.obs_model.path);
  return ObservationModel::from_config(cfg);
}

// ---------------------------------------------------------------------------
// synthetic trace generation (testing and the ident demo path)

inline std::vector<TraceRecord> synthesize_traces(const ObservationModel& model,
                                                  const std::vector<int>& node_ids,
                                                  long samples_per_class,
                                                  std::uint64_t seed) {
  std::vector<TraceRecord> out;
  out.reserve(node_ids.size() * 3 * static_cast<std::size_t>(samples_per_class));
  for (std::size_t ni = 0; ni < node_ids.size(); ++ni)
    for (int cls = 0; cls < 3; ++cls) {
      Rng rng(seed, (ni << 8) | static_cast<std::uint64_t>(cls));
      for (long k = 0; k < samples_per_class; ++k)
        out.push_back(TraceRecord{static_cast<int>(k), node_ids[ni], cls,
                                  model.sample(cls, rng)});
    }
  return out;
}

inline std::string traces_to_csv(const std::vector<TraceRecord>& records) {
  std::ostringstream out;
  out << kTraceHeader << '\n';
  for (const auto& r : records)
    out << r.t << ',' << r.node << ',' << r.state_class << ',' << r.alert_count << '\n';
  return out.str();
}

}  // namespace irg
