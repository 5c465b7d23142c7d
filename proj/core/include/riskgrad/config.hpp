#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskgrad/algo.hpp"
#include "riskgrad/environment.hpp"
#include "riskgrad/scoring.hpp"

namespace riskgrad {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat-key run configuration (`section.key = value` lines, '#' comments).
// Unknown keys are rejected. Relative paths resolve against the directory of
// the config file.
struct RunConfig {
  std::uint64_t master_seed = 0;
  std::string out_dir = ".";

  RiskSpec risk;

  std::string env_kind = "arbitrage";  // arbitrage | tabular
  std::optional<int> horizon;          // env.T
  std::optional<double> dt;            // env.dt; arbitrage default 1/T
  std::string tabular_path;

  std::vector<int> hidden = {64, 64, 64};
  double lr_actor = 3e-3;
  double lr_critic = 1e-2;
  std::uint64_t net_seed = 0;

  // Training keys; hidden sizes and learning rates are merged from net.*.
  int train_n = 256;
  int train_k = 200;
  int train_k_critic = 10;
  int train_k_actor = 1;
  int train_k_upsilon = 50;
  int train_b = 128;
  int train_m = 256;
  int train_l = 5;
  double train_upsilon_lr = 0.05;
  double train_sigma2 = 0.25;
  double train_sigma2_floor = 1e-4;
  double train_decay = 0.8;
  bool train_es_shortcut = true;
  std::uint64_t train_seed = 0;

  long long eval_n_episodes = 10000;
  bool eval_greedy = false;
  std::uint64_t eval_seed = 0;

  int oracle_grid_n = 2001;
  int oracle_stages = 8;

  std::string base_dir = ".";

  static RunConfig parse_file(const std::string& path);
  static RunConfig parse_text(const std::string& text, const std::string& base_dir);

  // FNV-1a over the canonical serialization of the model-defining keys
  // (risk.*, env.*, net.*), as a fixed-width hex string.
  std::string config_hash() const;

  std::unique_ptr<Environment> make_env() const;
  TrainConfig train_config() const;
  std::string resolve_path(const std::string& path) const;
  void validate() const;
};

}  // namespace riskgrad
