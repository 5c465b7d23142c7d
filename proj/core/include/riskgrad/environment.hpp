#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "riskgrad/scoring.hpp"

namespace riskgrad {

using State = std::vector<double>;
// Continuous environments take one real per action dimension; discrete ones a
// single element holding the action index.
using Action = std::vector<double>;

struct ActionSpace {
  enum class Kind { Box, Discrete };
  Kind kind = Kind::Box;
  std::vector<double> lo, hi;  // Box: per-dimension bounds
  int n = 0;                   // Discrete: number of actions

  int dim() const { return kind == Kind::Box ? static_cast<int>(lo.size()) : 1; }
};

struct StepResult {
  State next;
  double cost = 0.0;
};

// One logged step of the augmented process. y is the running negative
// accumulated cost; every transition of an episode carries the same upsilon.
struct AugmentedTransition {
  int t = 0;
  State s;
  double y = 0.0;
  Action a;
  State s_next;
  double y_next = 0.0;
  double cost = 0.0;
  double upsilon = 0.0;
};

// Finite-horizon episodic environment. Instances are immutable after
// construction; all randomness flows through the caller-provided generator,
// so independent episodes may run concurrently on independent streams.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual int horizon() const = 0;
  virtual int state_dim() const = 0;
  virtual ActionSpace action_space() const = 0;

  virtual State reset(std::mt19937_64& rng) const = 0;
  // Deterministic given (t, s, a) and the generator state. Throws
  // std::invalid_argument on out-of-bounds actions or indices.
  virtual StepResult step(int t, const State& s, const Action& a,
                          std::mt19937_64& rng) const = 0;

  // Network-facing features of a state and their normalization.
  virtual int feature_dim() const { return state_dim(); }
  virtual std::vector<double> encode(const State& s) const { return s; }
  virtual std::vector<double> feature_offset() const;
  virtual std::vector<double> feature_scale() const;

  // Bounds on the total episode cost.
  virtual CostBounds cost_bounds(std::mt19937_64& rng) const = 0;
};

// Policy callable on the augmented inputs.
using PolicyFn =
    std::function<Action(int t, double upsilon, const State& s, double y,
                         std::mt19937_64& rng)>;

// Simulates one episode from a fresh initial state with y0 = 0. Returns
// horizon() transitions satisfying y_next = y - cost exactly.
std::vector<AugmentedTransition> simulate_episode(const Environment& env,
                                                  const PolicyFn& policy,
                                                  double upsilon,
                                                  std::mt19937_64& rng);

// Continues an episode from (t0, s0, y0) to the terminal time.
std::vector<AugmentedTransition> simulate_suffix(const Environment& env,
                                                 const PolicyFn& policy, int t0,
                                                 const State& s0, double y0,
                                                 double upsilon,
                                                 std::mt19937_64& rng);

inline double total_cost(const std::vector<AugmentedTransition>& episode) {
  double c = 0.0;
  for (const auto& tr : episode) c += tr.cost;
  return c;
}

// Empirical cost bounds from uniform-random-action episodes: 0.001/0.999
// quantiles of the total cost, padded by half the quantile range on each side.
CostBounds estimate_cost_bounds(const Environment& env, int n_episodes,
                                std::mt19937_64& rng);

// Mean-reverting single-asset trading environment. The price follows an
// Ornstein-Uhlenbeck process sampled with the exact transition; the cost of a
// step is the negative wealth increment, so the episode cost sum equals the
// negative terminal wealth.
struct ArbitrageParams {
  double kappa = 2.0;
  double mu = 1.0;
  double sigma = 0.2;
  double phi = 0.005;  // quadratic transaction cost
  double psi = 0.5;    // terminal inventory penalty
  int horizon = 5;
  double q_max = 5.0;
  double a_max = 2.0;
  double dt = 0.2;

  void validate() const;
};

class ArbitrageEnv final : public Environment {
 public:
  explicit ArbitrageEnv(ArbitrageParams params);

  int horizon() const override { return params_.horizon; }
  int state_dim() const override { return 2; }  // (price, inventory)
  ActionSpace action_space() const override;

  State reset(std::mt19937_64& rng) const override;
  StepResult step(int t, const State& s, const Action& a,
                  std::mt19937_64& rng) const override;
  // Same transition with the standard-normal draw pinned; step() draws z and
  // delegates here.
  StepResult step_with_noise(int t, const State& s, const Action& a,
                             double z) const;

  std::vector<double> feature_offset() const override;
  std::vector<double> feature_scale() const override;

  CostBounds cost_bounds(std::mt19937_64& rng) const override;

  const ArbitrageParams& params() const { return params_; }

 private:
  ArbitrageParams params_;
  double decay_;       // exp(-kappa dt)
  double noise_std_;   // sigma sqrt((1 - exp(-2 kappa dt)) / (2 kappa))
};

// Explicit finite MDP: transition tensor p(s'|s,a) and cost tensor c(s,a,s').
struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  int horizon = 0;
  std::vector<double> p;    // [s][a][s'], row-stochastic
  std::vector<double> c;    // [s][a][s']
  std::vector<double> mu0;  // initial distribution; uniform when omitted

  double prob(int s, int a, int s2) const {
    return p[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double cost(int s, int a, int s2) const {
    return c[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double& prob(int s, int a, int s2) {
    return p[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double& cost(int s, int a, int s2) {
    return c[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }

  // Throws std::invalid_argument unless every row is a probability vector
  // (nonnegative, summing to 1 within 1e-12) and mu0 is one as well.
  void validate() const;

  std::pair<double, double> cost_range() const;

  static TabularMDP from_json_text(const std::string& text);
  static TabularMDP load(const std::string& path);
  std::string to_json_text() const;
};

class TabularEnv final : public Environment {
 public:
  explicit TabularEnv(TabularMDP mdp);

  int horizon() const override { return mdp_.horizon; }
  int state_dim() const override { return 1; }  // state index
  ActionSpace action_space() const override;

  State reset(std::mt19937_64& rng) const override;
  StepResult step(int t, const State& s, const Action& a,
                  std::mt19937_64& rng) const override;

  // One-hot features.
  int feature_dim() const override { return mdp_.n_states; }
  std::vector<double> encode(const State& s) const override;

  // Exact: [T min c, T max c] with a margin; no sampling involved.
  CostBounds cost_bounds(std::mt19937_64& rng) const override;

  const TabularMDP& mdp() const { return mdp_; }

 private:
  TabularMDP mdp_;
};

}  // namespace riskgrad
