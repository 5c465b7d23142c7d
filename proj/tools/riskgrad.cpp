#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "riskgrad/algo.hpp"
#include "riskgrad/checkpoint.hpp"
#include "riskgrad/config.hpp"
#include "riskgrad/environment.hpp"
#include "riskgrad/eval.hpp"
#include "riskgrad/net.hpp"
#include "riskgrad/oracle.hpp"
#include "riskgrad/rng.hpp"

namespace {

using namespace riskgrad;

// Exit codes: 0 success, 2 configuration, 3 I/O or artifact mismatch,
// 4 training/runtime failure.
constexpr int kOkExit = 0;
constexpr int kConfigExit = 2;
constexpr int kIoExit = 3;
constexpr int kRuntimeExit = 4;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

RunConfig load_config(const CommonArgs& args) {
  if (!std::filesystem::exists(args.config_path))
    throw ConfigError("config file not found: " + args.config_path);
  RunConfig cfg = RunConfig::parse_file(args.config_path);
  if (args.seed) cfg.master_seed = *args.seed;
  if (args.out) cfg.out_dir = *args.out;
  return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

int cmd_train(const CommonArgs& args) {
  const RunConfig cfg = load_config(args);
  const std::unique_ptr<Environment> env = cfg.make_env();

  TrainResult result = train(*env, cfg.risk, cfg.train_config(), cfg.master_seed);

  std::string csv = "epoch,upsilon,mean_cost,objective,critic_loss\n";
  for (const TrainLogRow& row : result.log)
    csv += std::to_string(row.epoch) + "," + fmt(row.upsilon) + "," +
           fmt(row.mean_cost) + "," + fmt(row.objective) + "," +
           fmt(row.critic_loss) + "\n";
  write_text(out_path(cfg, "training_log.csv"), csv);

  const Checkpoint ck =
      Checkpoint::from_train(result, cfg.risk, cfg.config_hash(), cfg.master_seed);
  ck.save(out_path(cfg, "checkpoint.json"));

  nlohmann::ordered_json ustar;
  ustar["upsilon_star"] = result.upsilon_star;
  write_text(out_path(cfg, "upsilon_star.json"), ustar.dump(2) + "\n");

  if (result.aborted) {
    std::cerr << "riskgrad train: aborted on non-finite loss after "
              << result.epochs_completed
              << " epochs; last finite checkpoint saved\n";
    return kRuntimeExit;
  }
  std::cout << "trained " << result.epochs_completed
            << " epochs; upsilon_star=" << fmt(result.upsilon_star) << "\n";
  return kOkExit;
}

Checkpoint load_checkpoint_checked(const RunConfig& cfg, const std::string& path) {
  const Checkpoint ck = Checkpoint::load(path);
  if (ck.config_hash != cfg.config_hash())
    throw std::runtime_error("checkpoint " + path + " was produced under config hash " +
                             ck.config_hash + " but the current config hashes to " +
                             cfg.config_hash());
  return ck;
}

std::vector<State> default_curve_states(const RunConfig& cfg, const Environment& env) {
  std::vector<State> states;
  if (cfg.env_kind == "arbitrage") {
    states = {State{0.8, 0.0}, State{1.0, 0.0}, State{1.2, 0.0}};
  } else {
    const auto& tab = dynamic_cast<const TabularEnv&>(env);
    for (int s = 0; s < tab.mdp().n_states; ++s)
      states.push_back(State{static_cast<double>(s)});
  }
  return states;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path,
             std::optional<long long> n_episodes, bool greedy_flag,
             bool with_cost_dist, bool with_value_curve) {
  const RunConfig cfg = load_config(args);
  const std::string ck_path =
      checkpoint_path.empty() ? out_path(cfg, "checkpoint.json") : checkpoint_path;
  const Checkpoint ck = load_checkpoint_checked(cfg, ck_path);
  const std::unique_ptr<Environment> env = cfg.make_env();

  const PolicyNet policy = ck.policy_net();
  const Mlp value = ck.value_net();
  const long long n = n_episodes.value_or(cfg.eval_n_episodes);
  const bool greedy = greedy_flag || cfg.eval_greedy;
  const std::uint64_t seed = args.seed.value_or(
      cfg.eval_seed != 0 ? cfg.eval_seed : derive_seed(cfg.master_seed, "eval"));

  const std::vector<double> costs =
      collect_costs(*env, policy, ck.upsilon_star, n, seed, greedy);
  EvaluationReport report = summarize_costs(costs, seed);
  report.greedy = greedy;
  report.upsilon_star = ck.upsilon_star;
  write_text(out_path(cfg, "eval_report.json"), report.to_json_text(cfg.config_hash()));

  const Sidecar sidecar{cfg.config_hash(), seed};
  if (with_cost_dist)
    export_cost_distribution(costs, {0.8, 0.6}, 101, std::nullopt,
                             out_path(cfg, "cost_distribution.csv"), sidecar);
  if (with_value_curve) {
    std::vector<double> grid(41);
    for (int i = 0; i < 41; ++i)
      grid[i] = ck.bracket.lo + (ck.bracket.hi - ck.bracket.lo) * i / 40.0;
    export_value_curve(value, ck.encoding, *env, policy, ck.risk,
                       default_curve_states(cfg, *env), grid, 2000,
                       out_path(cfg, "value_curve.csv"), sidecar);
  }
  std::cout << "evaluated " << n << " episodes; mean=" << fmt(report.mean)
            << " es_0.8=" << fmt(report.es80) << "\n";
  return kOkExit;
}

int cmd_oracle(const CommonArgs& args, const std::string& compare_path) {
  const RunConfig cfg = load_config(args);
  if (cfg.env_kind != "tabular")
    throw ConfigError(
        "oracle requires env.kind = tabular; arbitrage environments have no "
        "exact solver (train a model and use eval instead)");
  const TabularMDP mdp = TabularMDP::load(cfg.resolve_path(cfg.tabular_path));

  const ScanResult scan = optimal_upsilon_scan(mdp, cfg.risk, cfg.oracle_grid_n);
  const std::vector<AltMinStage> trace =
      alt_min_trace(mdp, cfg.risk, 0.0, cfg.oracle_stages, 0.0, cfg.oracle_grid_n);
  const UpsilonBracket bracket = upsilon_bracket(cfg.risk, exact_cost_bounds(mdp));

  nlohmann::ordered_json j;
  j["format"] = "riskgrad-oracle-report";
  j["version"] = 1;
  j["config_hash"] = cfg.config_hash();
  j["seed"] = cfg.master_seed;
  j["risk"] = risk_kind_name(cfg.risk.kind);
  j["bracket"] = {{"lo", bracket.lo}, {"hi", bracket.hi}};
  j["grid_n"] = scan.grid_n;
  j["resolution"] = scan.resolution;
  j["upsilon_star"] = scan.upsilon_star;
  j["objective"] = scan.objective;
  j["at_bracket_edge"] = scan.at_bracket_edge;
  nlohmann::ordered_json jtrace = nlohmann::ordered_json::array();
  for (const AltMinStage& stage : trace)
    jtrace.push_back({{"upsilon", stage.upsilon}, {"objective", stage.objective}});
  j["trace"] = jtrace;
  write_text(out_path(cfg, "oracle_report.json"), j.dump(2) + "\n");

  std::cout << "oracle optimum " << fmt(scan.objective) << " at upsilon_star="
            << fmt(scan.upsilon_star) << " (grid resolution " << fmt(scan.resolution)
            << ")\n";

  if (!compare_path.empty()) {
    const Checkpoint ck = load_checkpoint_checked(cfg, compare_path);
    const PolicyNet policy = ck.policy_net();
    TabularEnv env(mdp);
    const PolicyTable table = policy_table_from(
        mdp, [&](int t, int s, double y) {
          return policy_probs(policy, t, ck.upsilon_star,
                              env.encode(State{static_cast<double>(s)}), y);
        });
    const double objective = eval_h(
        cfg.risk,
        initial_value(dp_policy_value(mdp, table, cfg.risk, ck.upsilon_star), mdp),
        ck.upsilon_star);
    std::cout << "checkpoint objective " << fmt(objective) << "; optimality gap "
              << fmt(objective - scan.objective) << "\n";
  }
  return kOkExit;
}

int cmd_export(const CommonArgs& args, const std::string& checkpoint_path,
               const std::vector<int>& heatmap_ts, bool with_value_curve,
               bool with_cost_dist, long long dist_episodes, int bins,
               std::optional<std::pair<double, double>> dist_range) {
  const RunConfig cfg = load_config(args);
  const std::string ck_path =
      checkpoint_path.empty() ? out_path(cfg, "checkpoint.json") : checkpoint_path;
  const Checkpoint ck = load_checkpoint_checked(cfg, ck_path);
  const std::unique_ptr<Environment> env = cfg.make_env();
  const PolicyNet policy = ck.policy_net();
  const std::uint64_t seed = args.seed.value_or(
      cfg.eval_seed != 0 ? cfg.eval_seed : derive_seed(cfg.master_seed, "eval"));
  const Sidecar sidecar{cfg.config_hash(), seed};

  for (int t : heatmap_ts) {
    HeatmapGrid grid;
    grid.y_lo = -ck.bounds.y_hi;
    grid.y_hi = -ck.bounds.y_lo;
    export_policy_heatmap(
        policy, *env, ck.upsilon_star, t, grid,
        out_path(cfg, "policy_heatmap_t" + std::to_string(t) + ".csv"), sidecar);
  }
  if (with_value_curve) {
    std::vector<double> grid(41);
    for (int i = 0; i < 41; ++i)
      grid[i] = ck.bracket.lo + (ck.bracket.hi - ck.bracket.lo) * i / 40.0;
    export_value_curve(ck.value_net(), ck.encoding, *env, policy, ck.risk,
                       default_curve_states(cfg, *env), grid, 2000,
                       out_path(cfg, "value_curve.csv"), sidecar);
  }
  if (with_cost_dist) {
    const std::vector<double> costs = collect_costs(
        *env, policy, ck.upsilon_star, dist_episodes, seed, cfg.eval_greedy);
    std::optional<Interval> range;
    if (dist_range) range = Interval{dist_range->first, dist_range->second};
    export_cost_distribution(costs, {0.8, 0.6}, bins, range,
                             out_path(cfg, "cost_distribution.csv"), sidecar);
  }
  std::cout << "exports written to " << cfg.out_dir << "\n";
  return kOkExit;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"risk-sensitive actor-critic: train, evaluate, certify"};
  app.require_subcommand(1);

  CommonArgs common;
  app.add_option("--config", common.config_path, "run configuration file")
      ->required();
  std::uint64_t seed_val = 0;
  auto* seed_opt = app.add_option("--seed", seed_val, "master seed override");
  std::string out_val;
  auto* out_opt = app.add_option("--out", out_val, "output directory override");

  auto* train_cmd = app.add_subcommand("train", "run the training loop");
  train_cmd->fallthrough();

  auto* eval_cmd = app.add_subcommand("eval", "out-of-sample evaluation");
  eval_cmd->fallthrough();
  std::string eval_ck;
  eval_cmd->add_option("--checkpoint", eval_ck, "checkpoint path");
  long long eval_n = 0;
  auto* eval_n_opt = eval_cmd->add_option("--n-episodes", eval_n, "episode count");
  bool eval_greedy = false;
  eval_cmd->add_flag("--greedy", eval_greedy, "deploy the mean action");
  bool eval_cost_dist = false;
  eval_cmd->add_flag("--cost-dist", eval_cost_dist, "also export the cost histogram");
  bool eval_curve = false;
  eval_cmd->add_flag("--value-curve", eval_curve, "also export the value curve");

  auto* oracle_cmd = app.add_subcommand("oracle", "exact tabular certification");
  oracle_cmd->fallthrough();
  std::string compare_ck;
  oracle_cmd->add_option("--compare", compare_ck, "checkpoint to compare against");

  auto* export_cmd = app.add_subcommand("export", "figure-data exports");
  export_cmd->fallthrough();
  std::string export_ck;
  export_cmd->add_option("--checkpoint", export_ck, "checkpoint path");
  std::vector<int> heatmap_ts;
  export_cmd->add_option("--heatmap-t", heatmap_ts, "policy heatmap time indices");
  bool export_curve = false;
  export_cmd->add_flag("--value-curve", export_curve, "export the value curve");
  bool export_dist = false;
  export_cmd->add_flag("--cost-dist", export_dist, "export the cost histogram");
  long long dist_episodes = 20000;
  export_cmd->add_option("--dist-episodes", dist_episodes, "episodes for the histogram");
  int bins = 101;
  export_cmd->add_option("--bins", bins, "histogram bins");
  std::vector<double> range_vals;
  auto* range_opt = export_cmd->add_option("--range", range_vals,
                                           "common histogram range lo hi")
                        ->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOkExit : kConfigExit;
  }

  if (*seed_opt) common.seed = seed_val;
  if (*out_opt) common.out = out_val;

  try {
    if (train_cmd->parsed()) return cmd_train(common);
    if (eval_cmd->parsed())
      return cmd_eval(common, eval_ck,
                      (*eval_n_opt) ? std::optional<long long>(eval_n) : std::nullopt,
                      eval_greedy, eval_cost_dist, eval_curve);
    if (oracle_cmd->parsed()) return cmd_oracle(common, compare_ck);
    if (export_cmd->parsed()) {
      std::optional<std::pair<double, double>> range;
      if (*range_opt) range = std::make_pair(range_vals[0], range_vals[1]);
      return cmd_export(common, export_ck, heatmap_ts, export_curve, export_dist,
                        dist_episodes, bins, range);
    }
  } catch (const ConfigError& e) {
    std::cerr << "riskgrad: " << e.what() << "\n";
    return kConfigExit;
  } catch (const std::runtime_error& e) {
    std::cerr << "riskgrad: " << e.what() << "\n";
    return kIoExit;
  } catch (const std::exception& e) {
    std::cerr << "riskgrad: " << e.what() << "\n";
    return kRuntimeExit;
  }
  return kConfigExit;
}
