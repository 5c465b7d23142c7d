#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "riskgrad/environment.hpp"
#include "riskgrad/scoring.hpp"

namespace riskgrad {

// Exact backward induction on the augmented state (s, y) of a tabular MDP.
// The accumulated-cost levels y are finitely many exact sums; keys are
// rounded to 1e-12 to absorb floating summation noise.
inline long long ykey(double y) { return std::llround(y * 1e12); }

using NodeKey = std::pair<int, long long>;  // (state, ykey)

struct AugmentedValueTable {
  struct Node {
    double y = 0.0;      // representative accumulated-cost level
    double value = 0.0;
    int action = -1;     // greedy action; -1 at the terminal layer
  };

  int horizon = 0;
  // layers[t] for t = 0..horizon; ordered keys keep reductions deterministic.
  std::vector<std::map<NodeKey, Node>> layers;

  const Node& node_at(int t, int s, double y) const;
  double value_at(int t, int s, double y) const { return node_at(t, s, y).value; }
};

// Action distribution per reachable (t, s, y) node.
struct PolicyTable {
  std::vector<std::map<NodeKey, std::vector<double>>> layers;

  const std::vector<double>& probs_at(int t, int s, double y) const;
};

// Reachable (s, y) sets per time, expanding from y = 0 at every state.
std::vector<std::map<NodeKey, double>> reachable_sets(const TabularMDP& mdp);

// Optimal augmented values: V_T(s, y) = f(-y, v) and
// V_t(s, y) = min_a sum_s' p(s'|s,a) V_{t+1}(s', y - c(s,a,s')), with greedy
// actions recorded. Exact up to machine precision.
AugmentedValueTable dp_optimal_value(const TabularMDP& mdp, const RiskSpec& spec,
                                     double upsilon);

// Same recursion under a fixed policy mixture; throws std::out_of_range on a
// missing policy entry.
AugmentedValueTable dp_policy_value(const TabularMDP& mdp, const PolicyTable& policy,
                                    const RiskSpec& spec, double upsilon);

// E over the initial distribution of V_0(s0, 0).
double initial_value(const AugmentedValueTable& table, const TabularMDP& mdp);

PolicyTable greedy_policy(const AugmentedValueTable& table, const TabularMDP& mdp);
PolicyTable uniform_policy(const TabularMDP& mdp);
// actions[t * n_states + s]: deterministic policy that ignores y.
PolicyTable markov_policy(const TabularMDP& mdp, const std::vector<int>& actions);
// Tabulates an arbitrary stochastic policy on the reachable nodes.
PolicyTable policy_table_from(
    const TabularMDP& mdp,
    const std::function<std::vector<double>(int t, int s, double y)>& probs_fn);

// Exact law of the total episode cost under a policy, as sorted atoms.
struct CostAtom {
  double cost = 0.0;
  double prob = 0.0;
};
std::vector<CostAtom> cost_law(const TabularMDP& mdp, const PolicyTable& policy);

double law_quantile(const std::vector<CostAtom>& law, double alpha);
double law_mean_f(const std::vector<CostAtom>& law, const RiskSpec& spec,
                  double upsilon);
double law_objective(const std::vector<CostAtom>& law, const RiskSpec& spec,
                     double upsilon);

// Exact cost bounds of a tabular MDP: [T min c, T max c] with a margin.
CostBounds exact_cost_bounds(const TabularMDP& mdp);

// Outer minimization over the auxiliary variable on DP-optimal values:
// minimizes v -> h(E_{s0}[V*_0(s0, 0; v)], v) over a uniform grid on the
// bracket, with ternary refinement of the winning cell when h is the
// identity. `resolution` is the grid spacing.
struct ScanResult {
  double upsilon_star = 0.0;
  double objective = 0.0;
  int grid_n = 0;
  double resolution = 0.0;
  bool at_bracket_edge = false;  // argmin landed on a bracket endpoint
};
ScanResult optimal_upsilon_scan(const TabularMDP& mdp, const RiskSpec& spec,
                                int grid_n);

// Alternating minimization: pi_n optimal for v_n (exact DP), then v_{n+1} =
// grid argmin of v -> h(E[V^{pi_n}_{0,v}], v). Each stage records v_n and the
// post-argmin objective h(E[V^{pi_n}_{0,v_{n+1}}], v_{n+1}). Throws
// std::logic_error if the descent chain objective_n + eps/n ever increases
// beyond numerical slack.
struct AltMinStage {
  double upsilon = 0.0;
  double objective = 0.0;
};
std::vector<AltMinStage> alt_min_trace(const TabularMDP& mdp, const RiskSpec& spec,
                                       double upsilon_init, int n_stages, double eps,
                                       int grid_n);

// Value of state augmentation: optimal augmented value vs the best value over
// deterministic policies that depend on (t, s) only, by enumeration. Throws
// std::length_error when the enumeration exceeds 1e6 policies.
struct AugmentationAdvantage {
  double v_augmented = 0.0;
  double v_markov = 0.0;
};
AugmentationAdvantage augmentation_advantage(const TabularMDP& mdp,
                                             const RiskSpec& spec, double upsilon);

}  // namespace riskgrad
