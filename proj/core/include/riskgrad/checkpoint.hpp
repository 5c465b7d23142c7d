#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riskgrad/algo.hpp"
#include "riskgrad/net.hpp"
#include "riskgrad/scoring.hpp"

namespace riskgrad {

// Versioned JSON dump of a trained model: risk spec, cost bounds and bracket,
// input encoding, both networks, and the selected auxiliary variable.
struct Checkpoint {
  static constexpr int kVersion = 1;

  std::string config_hash;
  std::uint64_t seed = 0;
  RiskSpec risk;
  CostBounds bounds;
  UpsilonBracket bracket;
  InputEncoding encoding;
  double upsilon_star = 0.0;

  std::vector<int> value_sizes;
  std::vector<double> value_params;

  PolicyMode policy_mode = PolicyMode::SquashedGaussian;
  std::vector<int> policy_sizes;
  std::vector<double> policy_params;
  std::vector<double> a_lo, a_hi;
  int n_actions = 0;

  int epochs_completed = 0;
  bool aborted = false;

  static Checkpoint from_train(const TrainResult& result, const RiskSpec& spec,
                               const std::string& config_hash, std::uint64_t seed);

  Mlp value_net() const;
  PolicyNet policy_net() const;

  void save(const std::string& path) const;
  // Throws std::runtime_error on missing files or version/format mismatch.
  static Checkpoint load(const std::string& path);
};

}  // namespace riskgrad
