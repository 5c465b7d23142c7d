#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "riskgrad/algo.hpp"
#include "riskgrad/environment.hpp"
#include "riskgrad/net.hpp"

namespace riskgrad {

// Out-of-sample summary of total episode costs. Standard errors come from
// 20-fold batch means.
struct EvaluationReport {
  long long n_episodes = 0;
  std::uint64_t seed = 0;
  bool greedy = false;
  double upsilon_star = 0.0;

  double mean = 0.0;
  double es80 = 0.0;  // expected shortfall at 0.8
  double es60 = 0.0;  // expected shortfall at 0.6
  double variance = 0.0;
  double mean_variance = 0.0;  // mean + variance (lambda = 1)

  double se_mean = 0.0, se_es80 = 0.0, se_es60 = 0.0, se_variance = 0.0,
         se_mean_variance = 0.0;

  std::string to_json_text(const std::string& config_hash) const;
};

// Statistics of a raw cost sample; ES values share the scoring module's
// empirical computation.
EvaluationReport summarize_costs(std::span<const double> costs, std::uint64_t seed);

// Simulates n episodes under the deployment rule (upsilon pinned at
// upsilon_star, y tracked online) with one rng stream per episode, so results
// are independent of worker count.
std::vector<double> collect_costs(const Environment& env, const PolicyNet& policy,
                                  double upsilon_star, long long n_episodes,
                                  std::uint64_t seed, bool greedy);

EvaluationReport evaluate_policy(const Environment& env, const PolicyNet& policy,
                                 double upsilon_star, long long n_episodes,
                                 std::uint64_t seed, bool greedy);

// Monte Carlo estimate of the value E[f(sum of remaining costs - y, upsilon)]
// under the stochastic policy, from (t, s, y). Returns (mean, standard error).
std::pair<double, double> mc_value_estimate(const Environment& env,
                                            const PolicyNet& policy,
                                            const RiskSpec& spec, int t,
                                            const State& s, double y, double upsilon,
                                            int n_rollouts, std::uint64_t seed);

// Provenance attached to every export: <path>.meta.json.
struct Sidecar {
  std::string config_hash;
  std::uint64_t seed = 0;
};

struct ValueCurveRow {
  int state_id = 0;
  double upsilon = 0.0;
  double v_net = 0.0;
  double v_mc = 0.0;
  double mc_se = 0.0;
};

// CSV columns state_id,upsilon,v_net,v_mc over the given states and upsilon
// grid; v_mc is a fresh Monte Carlo estimate at (s, y=0, t=0).
std::vector<ValueCurveRow> export_value_curve(
    const Mlp& value, const InputEncoding& enc, const Environment& env,
    const PolicyNet& policy, const RiskSpec& spec, const std::vector<State>& states,
    const std::vector<double>& upsilon_grid, int n_rollouts, const std::string& path,
    const Sidecar& sidecar);

struct HeatmapGrid {
  double p_lo = 0.5, p_hi = 1.5;
  int p_n = 21;
  double q_lo = -5.0, q_hi = 5.0;
  int q_n = 21;
  double y_lo = -1.0, y_hi = 1.0;
  int y_n = 5;  // only used for t >= 1
};

// Mean-action slices of a two-dimensional-state policy. t = 0 writes
// P,Q,mean_action; t >= 1 writes y,P,Q,mean_action.
void export_policy_heatmap(const PolicyNet& policy, const Environment& env,
                           double upsilon_star, int t, const HeatmapGrid& grid,
                           const std::string& path, const Sidecar& sidecar);

// Histogram CSV bin_lo,bin_hi,density (densities integrate to 1) with the
// alpha-quantile marks recorded in the sidecar. A common explicit range keeps
// bin edges identical across exports.
void export_cost_distribution(std::span<const double> costs,
                              const std::vector<double>& quantile_marks, int bins,
                              std::optional<Interval> range, const std::string& path,
                              const Sidecar& sidecar);

}  // namespace riskgrad
