#include "riskgrad/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "riskgrad/rng.hpp"

namespace riskgrad {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: invalid number for " + key + ": '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: invalid integer for " + key + ": '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const std::uint64_t x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: invalid unsigned integer for " + key + ": '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: invalid boolean for " + key + ": '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<int>(to_int(key, item)));
  }
  if (out.empty()) throw ConfigError("config: empty list for " + key);
  return out;
}

std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

RunConfig RunConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string dir = std::filesystem::path(path).parent_path().string();
  return parse_text(buf.str(), dir.empty() ? "." : dir);
}

RunConfig RunConfig::parse_text(const std::string& text, const std::string& base_dir) {
  RunConfig cfg;
  cfg.base_dir = base_dir;

  std::optional<double> upsilon_lo, upsilon_hi;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected 'key = value' at line " + std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config: empty key or value at line " + std::to_string(line_no));

    if (key == "seed") cfg.master_seed = to_u64(key, value);
    else if (key == "out") cfg.out_dir = value;
    else if (key == "risk.kind") {
      try {
        cfg.risk.kind = parse_risk_kind(value);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    }
    else if (key == "risk.alpha") cfg.risk.alpha = to_double(key, value);
    else if (key == "risk.lambda") cfg.risk.lambda = to_double(key, value);
    else if (key == "risk.gamma") cfg.risk.gamma = to_double(key, value);
    else if (key == "risk.upsilon_lo") upsilon_lo = to_double(key, value);
    else if (key == "risk.upsilon_hi") upsilon_hi = to_double(key, value);
    else if (key == "env.kind") cfg.env_kind = value;
    else if (key == "env.T") cfg.horizon = static_cast<int>(to_int(key, value));
    else if (key == "env.dt") cfg.dt = to_double(key, value);
    else if (key == "env.tabular_path") cfg.tabular_path = value;
    else if (key == "net.hidden") cfg.hidden = to_int_list(key, value);
    else if (key == "net.lr_actor") cfg.lr_actor = to_double(key, value);
    else if (key == "net.lr_critic") cfg.lr_critic = to_double(key, value);
    else if (key == "net.seed") cfg.net_seed = to_u64(key, value);
    else if (key == "train.N") cfg.train_n = static_cast<int>(to_int(key, value));
    else if (key == "train.K") cfg.train_k = static_cast<int>(to_int(key, value));
    else if (key == "train.K_critic") cfg.train_k_critic = static_cast<int>(to_int(key, value));
    else if (key == "train.K_actor") cfg.train_k_actor = static_cast<int>(to_int(key, value));
    else if (key == "train.K_upsilon") cfg.train_k_upsilon = static_cast<int>(to_int(key, value));
    else if (key == "train.B") cfg.train_b = static_cast<int>(to_int(key, value));
    else if (key == "train.M") cfg.train_m = static_cast<int>(to_int(key, value));
    else if (key == "train.L") cfg.train_l = static_cast<int>(to_int(key, value));
    else if (key == "train.upsilon_lr") cfg.train_upsilon_lr = to_double(key, value);
    else if (key == "train.sigma2") cfg.train_sigma2 = to_double(key, value);
    else if (key == "train.sigma2_floor") cfg.train_sigma2_floor = to_double(key, value);
    else if (key == "train.decay") cfg.train_decay = to_double(key, value);
    else if (key == "train.es_shortcut") cfg.train_es_shortcut = to_bool(key, value);
    else if (key == "train.seed") cfg.train_seed = to_u64(key, value);
    else if (key == "eval.n_episodes") cfg.eval_n_episodes = to_int(key, value);
    else if (key == "eval.greedy") cfg.eval_greedy = to_bool(key, value);
    else if (key == "eval.seed") cfg.eval_seed = to_u64(key, value);
    else if (key == "oracle.grid_n") cfg.oracle_grid_n = static_cast<int>(to_int(key, value));
    else if (key == "oracle.stages") cfg.oracle_stages = static_cast<int>(to_int(key, value));
    else throw ConfigError("config: unknown key '" + key + "' at line " + std::to_string(line_no));
  }

  if (upsilon_lo.has_value() != upsilon_hi.has_value())
    throw ConfigError("config: risk.upsilon_lo and risk.upsilon_hi must be set together");
  if (upsilon_lo) cfg.risk.upsilon_bracket = Interval{*upsilon_lo, *upsilon_hi};

  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  try {
    risk.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (env_kind != "arbitrage" && env_kind != "tabular")
    throw ConfigError("config: env.kind must be 'arbitrage' or 'tabular'");
  if (env_kind == "tabular" && tabular_path.empty())
    throw ConfigError("config: env.tabular_path required for tabular environments");
  if (horizon && *horizon < 1) throw ConfigError("config: env.T must be >= 1");
  if (dt && !(*dt > 0.0)) throw ConfigError("config: env.dt must be > 0");
  try {
    train_config().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (eval_n_episodes < 1) throw ConfigError("config: eval.n_episodes must be >= 1");
  if (oracle_grid_n < 2) throw ConfigError("config: oracle.grid_n must be >= 2");
  if (oracle_stages < 1) throw ConfigError("config: oracle.stages must be >= 1");
}

std::string RunConfig::config_hash() const {
  // Canonical serialization of the model-defining keys.
  std::string canon;
  canon += "risk.kind=" + std::string(risk_kind_name(risk.kind)) + "\n";
  canon += "risk.alpha=" + fmt_num(risk.alpha) + "\n";
  canon += "risk.lambda=" + fmt_num(risk.lambda) + "\n";
  canon += "risk.gamma=" + fmt_num(risk.gamma) + "\n";
  if (risk.upsilon_bracket) {
    canon += "risk.upsilon_lo=" + fmt_num(risk.upsilon_bracket->lo) + "\n";
    canon += "risk.upsilon_hi=" + fmt_num(risk.upsilon_bracket->hi) + "\n";
  }
  canon += "env.kind=" + env_kind + "\n";
  if (horizon) canon += "env.T=" + std::to_string(*horizon) + "\n";
  if (dt) canon += "env.dt=" + fmt_num(*dt) + "\n";
  if (!tabular_path.empty()) canon += "env.tabular_path=" + tabular_path + "\n";
  canon += "net.hidden=";
  for (std::size_t i = 0; i < hidden.size(); ++i)
    canon += (i ? "," : "") + std::to_string(hidden[i]);
  canon += "\n";
  canon += "net.lr_actor=" + fmt_num(lr_actor) + "\n";
  canon += "net.lr_critic=" + fmt_num(lr_critic) + "\n";
  canon += "net.seed=" + std::to_string(net_seed) + "\n";

  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canon)));
  return buf;
}

std::string RunConfig::resolve_path(const std::string& path) const {
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

std::unique_ptr<Environment> RunConfig::make_env() const {
  if (env_kind == "arbitrage") {
    ArbitrageParams params;
    if (horizon) params.horizon = *horizon;
    params.dt = dt ? *dt : 1.0 / static_cast<double>(params.horizon);
    return std::make_unique<ArbitrageEnv>(params);
  }
  TabularMDP mdp = TabularMDP::load(resolve_path(tabular_path));
  if (horizon && *horizon != mdp.horizon)
    throw ConfigError("config: env.T=" + std::to_string(*horizon) +
                      " disagrees with the tabular file's T=" +
                      std::to_string(mdp.horizon));
  return std::make_unique<TabularEnv>(std::move(mdp));
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.episodes_per_epoch = train_n;
  t.epochs = train_k;
  t.batch = train_b;
  t.critic_epochs = train_k_critic;
  t.actor_epochs = train_k_actor;
  t.upsilon_epochs = train_k_upsilon;
  t.upsilon_sims = train_m;
  t.upsilon_every = train_l;
  t.upsilon_lr = train_upsilon_lr;
  t.sigma2 = train_sigma2;
  t.sigma2_floor = train_sigma2_floor;
  t.decay = train_decay;
  t.es_shortcut = train_es_shortcut;
  t.lr_actor = lr_actor;
  t.lr_critic = lr_critic;
  t.hidden = hidden;
  t.seed = train_seed != 0 ? train_seed : derive_seed(master_seed, "train");
  return t;
}

}  // namespace riskgrad
