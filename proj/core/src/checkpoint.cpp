#include "riskgrad/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace riskgrad {

namespace {

using nlohmann::ordered_json;

ordered_json risk_to_json(const RiskSpec& spec) {
  ordered_json j;
  j["kind"] = risk_kind_name(spec.kind);
  j["alpha"] = spec.alpha;
  j["lambda"] = spec.lambda;
  j["gamma"] = spec.gamma;
  if (spec.upsilon_bracket) {
    j["upsilon_lo"] = spec.upsilon_bracket->lo;
    j["upsilon_hi"] = spec.upsilon_bracket->hi;
  }
  return j;
}

RiskSpec risk_from_json(const nlohmann::json& j) {
  RiskSpec spec;
  spec.kind = parse_risk_kind(j.at("kind").get<std::string>());
  spec.alpha = j.at("alpha").get<double>();
  spec.lambda = j.at("lambda").get<double>();
  spec.gamma = j.at("gamma").get<double>();
  if (j.contains("upsilon_lo"))
    spec.upsilon_bracket = Interval{j.at("upsilon_lo").get<double>(),
                                    j.at("upsilon_hi").get<double>()};
  return spec;
}

}  // namespace

Checkpoint Checkpoint::from_train(const TrainResult& result, const RiskSpec& spec,
                                  const std::string& config_hash, std::uint64_t seed) {
  Checkpoint ck;
  ck.config_hash = config_hash;
  ck.seed = seed;
  ck.risk = spec;
  ck.bounds = result.bounds;
  ck.bracket = result.bracket;
  ck.encoding = result.encoding;
  ck.upsilon_star = result.upsilon_star;
  ck.value_sizes = result.value.sizes();
  ck.value_params = result.value.params();
  ck.policy_mode = result.policy.mode;
  ck.policy_sizes = result.policy.net.sizes();
  ck.policy_params = result.policy.net.params();
  ck.a_lo = result.policy.a_lo;
  ck.a_hi = result.policy.a_hi;
  ck.n_actions = result.policy.n_actions;
  ck.epochs_completed = result.epochs_completed;
  ck.aborted = result.aborted;
  return ck;
}

Mlp Checkpoint::value_net() const { return Mlp::from_params(value_sizes, value_params); }

PolicyNet Checkpoint::policy_net() const {
  PolicyNet p;
  p.mode = policy_mode;
  p.net = Mlp::from_params(policy_sizes, policy_params);
  p.enc = encoding;
  p.a_lo = a_lo;
  p.a_hi = a_hi;
  p.n_actions = n_actions;
  return p;
}

void Checkpoint::save(const std::string& path) const {
  ordered_json j;
  j["format"] = "riskgrad-checkpoint";
  j["version"] = kVersion;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["risk"] = risk_to_json(risk);
  j["bounds"] = {{"y_lo", bounds.y_lo}, {"y_hi", bounds.y_hi}};
  j["bracket"] = {{"lo", bracket.lo},
                  {"hi", bracket.hi},
                  {"user_supplied", bracket.user_supplied}};
  j["encoding"] = {{"offset", encoding.offset}, {"scale", encoding.scale}};
  j["upsilon_star"] = upsilon_star;
  j["value"] = {{"sizes", value_sizes}, {"params", value_params}};
  j["policy"] = {
      {"mode", policy_mode == PolicyMode::Categorical ? "categorical"
                                                      : "squashed_gaussian"},
      {"sizes", policy_sizes},
      {"params", policy_params},
      {"a_lo", a_lo},
      {"a_hi", a_hi},
      {"n_actions", n_actions}};
  j["training"] = {{"epochs_completed", epochs_completed}, {"aborted", aborted}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint parse error in " + path + ": " + e.what());
  }
  if (j.value("format", "") != "riskgrad-checkpoint")
    throw std::runtime_error("not a checkpoint file: " + path);
  if (j.at("version").get<int>() != kVersion)
    throw std::runtime_error("unsupported checkpoint version in " + path);

  Checkpoint ck;
  ck.config_hash = j.at("config_hash").get<std::string>();
  ck.seed = j.at("seed").get<std::uint64_t>();
  ck.risk = risk_from_json(j.at("risk"));
  ck.bounds = CostBounds{j.at("bounds").at("y_lo").get<double>(),
                         j.at("bounds").at("y_hi").get<double>()};
  ck.bracket = UpsilonBracket{j.at("bracket").at("lo").get<double>(),
                              j.at("bracket").at("hi").get<double>(),
                              j.at("bracket").at("user_supplied").get<bool>()};
  ck.encoding.offset = j.at("encoding").at("offset").get<std::vector<double>>();
  ck.encoding.scale = j.at("encoding").at("scale").get<std::vector<double>>();
  ck.upsilon_star = j.at("upsilon_star").get<double>();
  ck.value_sizes = j.at("value").at("sizes").get<std::vector<int>>();
  ck.value_params = j.at("value").at("params").get<std::vector<double>>();
  const std::string mode = j.at("policy").at("mode").get<std::string>();
  ck.policy_mode =
      mode == "categorical" ? PolicyMode::Categorical : PolicyMode::SquashedGaussian;
  ck.policy_sizes = j.at("policy").at("sizes").get<std::vector<int>>();
  ck.policy_params = j.at("policy").at("params").get<std::vector<double>>();
  ck.a_lo = j.at("policy").at("a_lo").get<std::vector<double>>();
  ck.a_hi = j.at("policy").at("a_hi").get<std::vector<double>>();
  ck.n_actions = j.at("policy").at("n_actions").get<int>();
  ck.epochs_completed = j.at("training").at("epochs_completed").get<int>();
  ck.aborted = j.at("training").at("aborted").get<bool>();
  return ck;
}

}  // namespace riskgrad
