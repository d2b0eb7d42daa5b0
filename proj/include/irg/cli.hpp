#pragma once

// Command-line front door. Every subcommand is a thin adapter: it loads
// inputs, calls library operations, and writes the documented artifacts
// (manifest.txt plus per-command CSV and strategy files). All randomness
// flows from --seed; parallel work derives per-task streams from it.

#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "irg/attacker.hpp"
#include "irg/decomposition.hpp"
#include "irg/dynamics.hpp"
#include "irg/equilibrium.hpp"
#include "irg/infrastructure.hpp"
#include "irg/parallel.hpp"
#include "irg/stopping.hpp"
#include "irg/strategy_io.hpp"
#include "irg/sysid.hpp"

namespace irg {

inline constexpr const char* kToolVersion = "0.1.0";

namespace cli_detail {

struct Opts {
  std::string config;
  std::string out;
  std::uint64_t seed = 1;
  int workers = 1;
  long episodes = 0;  // 0: subcommand default
  int horizon = 0;    // 0: derived from the discount factor
  std::string defender_file;
  std::string attacker_file;
  std::string published_file;
  std::string traces_file;
  double alpha = 1.0;
  int iterations = 100;
  double delta_stop = 0.2;
  int spsa_iterations = 50;
  int spsa_rollouts = 300;
  int ppo_iterations = 40;
  int ppo_batch = 4096;
  long exploit_episodes = 2000;
  // cardinality inputs
  int card_zones = 0;
  int card_nodes = 0;
  int card_obs = 10;
  int card_def_actions = 0;  // 0: zones + 2
  int card_atk_actions = 4;
};

inline GameConfig load_config_checked(const std::string& path) {
  if (path.empty()) throw std::runtime_error("config not found: --config is required");
  if (!std::filesystem::exists(path))
    throw std::runtime_error("config not found: " + path);
  return load_config(path);
}

inline std::filesystem::path ensure_out_dir(const std::string& out) {
  if (out.empty()) throw std::runtime_error("--out directory is required");
  std::filesystem::path dir(out);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& command,
                           const std::vector<std::pair<std::string, std::string>>& fields) {
  std::ostringstream out;
  out << "irg-run-manifest 1\n"
      << "version " << kToolVersion << '\n'
      << "command " << command << '\n';
  for (const auto& [key, value] : fields) out << key << ' ' << value << '\n';
  write_text_file((dir / "manifest.txt").string(), out.str());
}

inline std::shared_ptr<CompositeDefenderStrategy> load_defender_or_static(
    const GameConfig& cfg, const std::string& file) {
  if (file.empty()) return static_defender_strategy(cfg);
  return parse_defender_profile(cfg, read_text_file(file));
}

inline std::shared_ptr<CompositeAttackerStrategy> load_attacker_or_static(
    const GameConfig& cfg, const std::string& file) {
  if (file.empty()) return static_attacker_strategy(cfg);
  return parse_attacker_profile(cfg, read_text_file(file));
}

inline std::string or_static(const std::string& file) {
  return file.empty() ? "static" : file;
}

// ---------------------------------------------------------------------------
// subcommand bodies (exit code 0 on success; validation failures throw)

inline int run_simulate(const Opts& o) {
  GameConfig cfg = load_config_checked(o.config);
  ObservationModel model = load_observation_model(cfg);
  auto def = load_defender_or_static(cfg, o.defender_file);
  auto atk = load_attacker_or_static(cfg, o.attacker_file);
  long episodes = o.episodes > 0 ? o.episodes : 10;
  int horizon = o.horizon > 0 ? o.horizon : default_horizon(cfg.gamma);
  auto dir = ensure_out_dir(o.out);

  std::ostringstream traj;
  double mean = 0.0;
  for (long e = 0; e < episodes; ++e) {
    Rng rng(o.seed, static_cast<std::uint64_t>(e));
    Trajectory tr = simulate_episode(cfg, model, *def, *atk, horizon, rng, true);
    mean += tr.discounted_return;
    auto lines = split_lines(trajectory_csv(cfg, tr));
    if (e == 0) traj << "episode," << lines[0] << '\n';
    for (std::size_t k = 1; k < lines.size(); ++k) traj << e << ',' << lines[k] << '\n';
  }
  mean /= double(episodes);
  write_text_file((dir / "trajectories.csv").string(), traj.str());
  write_manifest(dir, "simulate",
                 {{"config", o.config},
                  {"seed", std::to_string(o.seed)},
                  {"episodes", std::to_string(episodes)},
                  {"horizon", std::to_string(horizon)},
                  {"defender", or_static(o.defender_file)},
                  {"attacker", or_static(o.attacker_file)}});
  std::cout << "episodes " << episodes << " mean_return " << fmt_double(mean) << '\n';
  return 0;
}

inline int run_br_defender(const Opts& o) {
  GameConfig cfg = load_config_checked(o.config);
  ObservationModel model = load_observation_model(cfg);
  auto subgames = decompose(cfg);
  auto opponent = load_attacker_or_static(cfg, o.attacker_file);

  DefenderSolverSettings ds;
  ds.spsa.iterations = o.spsa_iterations;
  ds.spsa.rollouts = o.spsa_rollouts;
  ds.spsa.horizon = o.horizon;

  int n = cfg.graph.size();
  std::vector<DefenderNodeBr> brs(n);
  parallel_for_tasks(n, o.workers, [&](int i) {
    brs[i] = solve_defender_node(cfg, subgames[i].ancestor_weight, opponent->stage(i),
                                 model, ds, mix_seed(o.seed, static_cast<std::uint64_t>(i)));
  });

  std::vector<std::shared_ptr<DefenderLocalStrategy>> locals;
  for (auto& br : brs) locals.push_back(br.strategy);
  auto profile = composite_strategy(cfg, std::move(locals));

  auto dir = ensure_out_dir(o.out);
  std::filesystem::create_directories(dir / "strategies");
  write_text_file((dir / "strategies" / "defender.txt").string(),
                  serialize_defender_profile(cfg, *profile));

  std::ostringstream csv;
  csv << "node,zone,action,fit_value\n";
  for (int i = 0; i < n; ++i)
    for (const auto& [zid, fit] : brs[i].fits)
      csv << cfg.graph.node_ids[i] << ',' << zid << ','
          << encode_defender_action(brs[i].strategy->rule(zid).which) << ','
          << fmt_double(fit.best_value) << '\n';
  write_text_file((dir / "metrics.csv").string(), csv.str());

  write_manifest(dir, "br-defender",
                 {{"config", o.config},
                  {"seed", std::to_string(o.seed)},
                  {"workers", std::to_string(o.workers)},
                  {"horizon", std::to_string(o.horizon)},
                  {"attacker", or_static(o.attacker_file)},
                  {"spsa_iterations", std::to_string(o.spsa_iterations)},
                  {"spsa_rollouts", std::to_string(o.spsa_rollouts)}});
  std::cout << "fitted " << n << " node strategies -> "
            << (dir / "strategies" / "defender.txt").string() << '\n';
  return 0;
}

inline int run_br_attacker(const Opts& o) {
  GameConfig cfg = load_config_checked(o.config);
  ObservationModel model = load_observation_model(cfg);
  auto subgames = decompose(cfg);
  auto opponent = load_defender_or_static(cfg, o.defender_file);
  auto published = load_attacker_or_static(cfg, o.published_file);

  PpoSettings ps;
  ps.iterations = o.ppo_iterations;
  ps.batch_size = o.ppo_batch;
  ps.horizon = o.horizon;

  int n = cfg.graph.size();
  std::vector<AttackerBrResult> brs(n);
  parallel_for_tasks(n, o.workers, [&](int i) {
    PpoSettings node_ps = ps;
    node_ps.seed = mix_seed(o.seed, static_cast<std::uint64_t>(i));
    brs[i] = attacker_best_response(cfg, model, subgames[i], opponent->local(i),
                                    published->stage(i), node_ps);
  });

  std::vector<std::shared_ptr<AttackerLocalStrategy>> locals;
  for (auto& br : brs) locals.push_back(br.best);
  auto profile = composite_strategy(cfg, std::move(locals));

  auto dir = ensure_out_dir(o.out);
  std::filesystem::create_directories(dir / "strategies");
  write_text_file((dir / "strategies" / "attacker.txt").string(),
                  serialize_attacker_profile(cfg, *profile));

  std::ostringstream csv;
  csv << "node,iteration,eval_return,objective\n";
  for (int i = 0; i < n; ++i)
    for (const auto& it : brs[i].trace)
      csv << cfg.graph.node_ids[i] << ',' << it.iteration << ','
          << fmt_double(it.eval_return) << ',' << fmt_double(it.objective) << '\n';
  write_text_file((dir / "metrics.csv").string(), csv.str());

  write_manifest(dir, "br-attacker",
                 {{"config", o.config},
                  {"seed", std::to_string(o.seed)},
                  {"workers", std::to_string(o.workers)},
                  {"horizon", std::to_string(o.horizon)},
                  {"defender", or_static(o.defender_file)},
                  {"published", or_static(o.published_file)},
                  {"ppo_iterations", std::to_string(o.ppo_iterations)},
                  {"ppo_batch", std::to_string(o.ppo_batch)}});
  std::cout << "trained " << n << " node policies -> "
            << (dir / "strategies" / "attacker.txt").string() << '\n';
  return 0;
}

inline int run_dfsp(const Opts& o) {
  GameConfig cfg = load_config_checked(o.config);
  ObservationModel model = load_observation_model(cfg);

  DfspSettings st;
  st.max_iterations = o.iterations;
  st.delta_stop = o.delta_stop;
  st.workers = o.workers;
  st.seed = o.seed;
  st.horizon = o.horizon;
  st.exploit_episodes = o.episodes > 0 ? o.episodes : o.exploit_episodes;
  st.defender.spsa.iterations = o.spsa_iterations;
  st.defender.spsa.rollouts = o.spsa_rollouts;
  st.attacker.iterations = o.ppo_iterations;
  st.attacker.batch_size = o.ppo_batch;
  st.exp_defender = st.defender;
  st.exp_attacker = st.attacker;

  DfspResult res = dfsp_run(cfg, model, st);

  auto dir = ensure_out_dir(o.out);
  std::filesystem::create_directories(dir / "strategies");
  write_text_file((dir / "metrics.csv").string(), metrics_csv(res.metrics));

  std::vector<std::string> def_files, atk_files;
  for (std::size_t k = 0; k < res.defender_history.size(); ++k) {
    CompositeDefenderStrategy d(res.defender_history[k]);
    CompositeAttackerStrategy a(res.attacker_history[k]);
    std::string dname = "defender_" + std::to_string(k) + ".txt";
    std::string aname = "attacker_" + std::to_string(k) + ".txt";
    write_text_file((dir / "strategies" / dname).string(),
                    serialize_defender_profile(cfg, d));
    write_text_file((dir / "strategies" / aname).string(),
                    serialize_attacker_profile(cfg, a));
    def_files.push_back(dname);
    atk_files.push_back(aname);
  }
  std::vector<double> w(res.defender_history.size(),
                        1.0 / double(res.defender_history.size()));
  write_text_file((dir / "strategies" / "defender_index.csv").string(),
                  mixture_index_csv(def_files, w));
  write_text_file((dir / "strategies" / "attacker_index.csv").string(),
                  mixture_index_csv(atk_files, w));

  write_manifest(dir, "dfsp",
                 {{"config", o.config},
                  {"seed", std::to_string(o.seed)},
                  {"workers", std::to_string(o.workers)},
                  {"horizon", std::to_string(o.horizon)},
                  {"iterations", std::to_string(o.iterations)},
                  {"delta_stop", fmt_double(o.delta_stop)},
                  {"exploit_episodes", std::to_string(st.exploit_episodes)},
                  {"spsa_iterations", std::to_string(o.spsa_iterations)},
                  {"spsa_rollouts", std::to_string(o.spsa_rollouts)},
                  {"ppo_iterations", std::to_string(o.ppo_iterations)},
                  {"ppo_batch", std::to_string(o.ppo_batch)}});

  const auto& last = res.metrics.back();
  std::cout << "iterations " << res.metrics.size() << " delta_hat "
            << fmt_double(last.delta_hat) << " (se " << fmt_double(last.delta_se)
            << ")\n";
  return 0;
}

inline int run_exploitability(const Opts& o) {
  GameConfig cfg = load_config_checked(o.config);
  ObservationModel model = load_observation_model(cfg);
  auto subgames = decompose(cfg);
  auto avg_def = load_defender_or_static(cfg, o.defender_file);
  auto avg_atk = load_attacker_or_static(cfg, o.attacker_file);

  DefenderSolverSettings ds;
  ds.spsa.iterations = o.spsa_iterations;
  ds.spsa.rollouts = o.spsa_rollouts;
  ds.spsa.horizon = o.horizon;
  PpoSettings ps;
  ps.iterations = o.ppo_iterations;
  ps.batch_size = o.ppo_batch;
  ps.horizon = o.horizon;

  int n = cfg.graph.size();
  std::vector<std::shared_ptr<DefenderLocalStrategy>> def_locals(n);
  std::vector<std::shared_ptr<AttackerLocalStrategy>> atk_locals(n);
  parallel_for_tasks(2 * n, o.workers, [&](int task) {
    int i = task % n;
    if (task < n) {
      def_locals[i] =
          solve_defender_node(cfg, subgames[i].ancestor_weight, avg_atk->stage(i), model,
                              ds, mix_seed(o.seed, 0x10000u + std::uint64_t(i)))
              .strategy;
    } else {
      PpoSettings node_ps = ps;
      node_ps.seed = mix_seed(o.seed, 0x20000u + std::uint64_t(i));
      atk_locals[i] = attacker_best_response(cfg, model, subgames[i], avg_def->local(i),
                                             avg_atk->stage(i), node_ps)
                          .best;
    }
  });
  auto br_def = composite_strategy(cfg, std::move(def_locals));
  auto br_atk = composite_strategy(cfg, std::move(atk_locals));

  long episodes = o.episodes > 0 ? o.episodes : 10000;
  int horizon = o.horizon > 0 ? o.horizon : default_horizon(cfg.gamma);
  ExploitabilityEstimate est = exploitability_estimate(
      cfg, model, *avg_def, *avg_atk, *br_def, *br_atk, episodes, horizon,
      mix_seed(o.seed, 0xd5ULL), mix_seed(o.seed, 0xa5ULL));

  auto dir = ensure_out_dir(o.out);
  std::ostringstream csv;
  csv << "delta_hat,delta_se,v_def,v_atk\n"
      << fmt_double(est.delta_hat) << ',' << fmt_double(est.std_error) << ','
      << fmt_double(est.v_def) << ',' << fmt_double(est.v_atk) << '\n';
  write_text_file((dir / "metrics.csv").string(), csv.str());
  write_manifest(dir, "exploitability",
                 {{"config", o.config},
                  {"seed", std::to_string(o.seed)},
                  {"workers", std::to_string(o.workers)},
                  {"episodes", std::to_string(episodes)},
                  {"horizon", std::to_string(horizon)},
                  {"defender", or_static(o.defender_file)},
                  {"attacker", or_static(o.attacker_file)}});
  std::cout << "delta_hat " << fmt_double(est.delta_hat) << " se "
            << fmt_double(est.std_error) << '\n';
  return 0;
}

inline int run_ident(const Opts& o) {
  GameConfig cfg = load_config_checked(o.config);
  if (o.traces_file.empty()) throw std::runtime_error("--traces file is required");
  TraceIngest in = ingest_traces(o.traces_file, cfg);
  auto est = estimate_observation_model(in.records, cfg.obs_space_size, o.alpha);
  auto reports = validate_mlr(est);

  auto dir = ensure_out_dir(o.out);
  write_text_file((dir / "model.csv").string(), export_model_csv(est));
  std::ostringstream csv;
  csv << "node,minors,fraction_nonnegative,worst_minor,ok\n";
  for (const auto& r : reports)
    csv << r.node << ',' << r.minors << ',' << fmt_double(r.fraction_nonnegative) << ','
        << fmt_double(r.worst_minor) << ',' << (r.ok ? 1 : 0) << '\n';
  write_text_file((dir / "mlr.csv").string(), csv.str());
  write_manifest(dir, "ident",
                 {{"config", o.config},
                  {"traces", o.traces_file},
                  {"alpha", fmt_double(o.alpha)}});

  std::cout << "records " << in.summary.records << " nodes " << est.nodes.size() << '\n';
  for (const auto& r : reports)
    std::cout << "node " << r.node << " mlr_fraction "
              << fmt_double(r.fraction_nonnegative) << " worst "
              << fmt_double(r.worst_minor) << '\n';
  return 0;
}

inline int run_cardinality(const Opts& o) {
  Cardinalities c;
  if (!o.config.empty()) {
    c = cardinalities(load_config_checked(o.config));
  } else {
    if (o.card_zones < 1 || o.card_nodes < 1)
      throw std::runtime_error("cardinality needs --config or both --zones and --nodes");
    int def_actions = o.card_def_actions > 0 ? o.card_def_actions : o.card_zones + 2;
    c = cardinalities(o.card_nodes, o.card_zones, o.card_obs, def_actions,
                      o.card_atk_actions);
  }
  std::cout << "|S|=" << c.states << '\n'
            << "|O|=" << c.observations << '\n'
            << "|A_D|=" << c.defender_actions << '\n'
            << "|A_A|=" << c.attacker_actions << '\n';
  return 0;
}

}  // namespace cli_detail

// Parses args (program name excluded) and runs the selected subcommand.
// Exit codes: 0 success, 1 validation/runtime error, 2 usage error.
inline int cli_dispatch(const std::vector<std::string>& args) {
  using cli_detail::Opts;
  CLI::App app{"solver for partially observed intrusion-response games on tree "
               "infrastructures"};
  app.require_subcommand(1);
  Opts o;

  auto add_common = [&](CLI::App* cmd, bool needs_out) {
    cmd->add_option("--config", o.config, "game configuration file");
    cmd->add_option("--seed", o.seed, "root random seed");
    cmd->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--episodes", o.episodes, "episode budget")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--horizon", o.horizon, "episode horizon (0: derived)")
        ->check(CLI::NonNegativeNumber);
    if (needs_out) cmd->add_option("--out", o.out, "output directory");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "roll out episodes and record trajectories");
  add_common(simulate, true);
  simulate->add_option("--defender", o.defender_file, "defender strategy file");
  simulate->add_option("--attacker", o.attacker_file, "attacker strategy file");

  CLI::App* brd = app.add_subcommand("br-defender", "fit per-node defender best responses");
  add_common(brd, true);
  brd->add_option("--attacker", o.attacker_file, "opponent attacker strategy file");
  brd->add_option("--spsa-iterations", o.spsa_iterations, "threshold fit iterations")
      ->check(CLI::PositiveNumber);
  brd->add_option("--spsa-rollouts", o.spsa_rollouts, "episodes per fit evaluation")
      ->check(CLI::PositiveNumber);

  CLI::App* bra = app.add_subcommand("br-attacker", "train per-node attacker best responses");
  add_common(bra, true);
  bra->add_option("--defender", o.defender_file, "opponent defender strategy file");
  bra->add_option("--published", o.published_file,
                  "attacker strategy the defender's filter conditions on");
  bra->add_option("--ppo-iterations", o.ppo_iterations, "training iterations")
      ->check(CLI::PositiveNumber);
  bra->add_option("--ppo-batch", o.ppo_batch, "steps per training batch")
      ->check(CLI::PositiveNumber);

  CLI::App* dfsp = app.add_subcommand("dfsp", "decompositional fictitious self-play");
  add_common(dfsp, true);
  dfsp->add_option("--iterations", o.iterations, "maximum self-play iterations")
      ->check(CLI::PositiveNumber);
  dfsp->add_option("--delta-stop", o.delta_stop, "stop once exploitability falls below")
      ->check(CLI::PositiveNumber);
  dfsp->add_option("--spsa-iterations", o.spsa_iterations, "threshold fit iterations")
      ->check(CLI::PositiveNumber);
  dfsp->add_option("--spsa-rollouts", o.spsa_rollouts, "episodes per fit evaluation")
      ->check(CLI::PositiveNumber);
  dfsp->add_option("--ppo-iterations", o.ppo_iterations, "training iterations")
      ->check(CLI::PositiveNumber);
  dfsp->add_option("--ppo-batch", o.ppo_batch, "steps per training batch")
      ->check(CLI::PositiveNumber);

  CLI::App* expl = app.add_subcommand("exploitability", "estimate profile exploitability");
  add_common(expl, true);
  expl->add_option("--defender", o.defender_file, "defender profile to assess");
  expl->add_option("--attacker", o.attacker_file, "attacker profile to assess");
  expl->add_option("--spsa-iterations", o.spsa_iterations, "threshold fit iterations")
      ->check(CLI::PositiveNumber);
  expl->add_option("--spsa-rollouts", o.spsa_rollouts, "episodes per fit evaluation")
      ->check(CLI::PositiveNumber);
  expl->add_option("--ppo-iterations", o.ppo_iterations, "training iterations")
      ->check(CLI::PositiveNumber);
  expl->add_option("--ppo-batch", o.ppo_batch, "steps per training batch")
      ->check(CLI::PositiveNumber);

  CLI::App* ident = app.add_subcommand("ident", "estimate an observation model from traces");
  add_common(ident, true);
  ident->add_option("--traces", o.traces_file, "trace csv file");
  ident->add_option("--alpha", o.alpha, "add-alpha smoothing")
      ->check(CLI::NonNegativeNumber);

  CLI::App* card = app.add_subcommand("cardinality", "print model-space sizes");
  card->add_option("--config", o.config, "game configuration file");
  card->add_option("--zones", o.card_zones, "zones per node");
  card->add_option("--nodes", o.card_nodes, "node count");
  card->add_option("--obs", o.card_obs, "observations per node");
  card->add_option("--def-actions", o.card_def_actions,
                   "defender actions per node (0: zones + 2)");
  card->add_option("--atk-actions", o.card_atk_actions, "attacker actions per node");

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(simulate)) return cli_detail::run_simulate(o);
    if (app.got_subcommand(brd)) return cli_detail::run_br_defender(o);
    if (app.got_subcommand(bra)) return cli_detail::run_br_attacker(o);
    if (app.got_subcommand(dfsp)) return cli_detail::run_dfsp(o);
    if (app.got_subcommand(expl)) return cli_detail::run_exploitability(o);
    if (app.got_subcommand(ident)) return cli_detail::run_ident(o);
    if (app.got_subcommand(card)) return cli_detail::run_cardinality(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cerr << "error: no subcommand selected\n";
  return 2;
}

inline int cli_dispatch(int argc, char** argv) {
  return cli_dispatch(std::vector<std::string>(argv + 1, argv + argc));
}

}  // namespace irg
