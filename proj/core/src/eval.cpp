#include "riskgrad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "riskgrad/parallel.hpp"
#include "riskgrad/rng.hpp"

namespace riskgrad {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_sidecar(const std::string& path, const Sidecar& sidecar,
                   const nlohmann::ordered_json& extra = {}) {
  nlohmann::ordered_json j;
  j["config_hash"] = sidecar.config_hash;
  j["seed"] = sidecar.seed;
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  write_file(path + ".meta.json", j.dump(2) + "\n");
}

double es_of(std::span<const double> costs, double alpha) {
  RiskSpec spec;
  spec.kind = RiskKind::ES;
  spec.alpha = alpha;
  return empirical_risk(spec, costs, 65).rho;
}

struct Stats {
  double mean, es80, es60, variance, mean_variance;
};

Stats stats_of(std::span<const double> costs) {
  double mean = 0.0;
  for (double c : costs) mean += c;
  mean /= static_cast<double>(costs.size());
  double var = 0.0;
  for (double c : costs) var += (c - mean) * (c - mean);
  var /= static_cast<double>(costs.size());
  const double es80 = es_of(costs, 0.8);
  const double es60 = es_of(costs, 0.6);
  return Stats{mean, es80, es60, var, mean + var};
}

}  // namespace

EvaluationReport summarize_costs(std::span<const double> costs, std::uint64_t seed) {
  if (costs.empty()) throw std::invalid_argument("summarize_costs: empty sample");
  EvaluationReport r;
  r.n_episodes = static_cast<long long>(costs.size());
  r.seed = seed;

  const Stats s = stats_of(costs);
  r.mean = s.mean;
  r.es80 = s.es80;
  r.es60 = s.es60;
  r.variance = s.variance;
  r.mean_variance = s.mean_variance;

  // 20-fold batch means (fewer when the sample is tiny).
  const std::size_t folds = std::min<std::size_t>(20, costs.size());
  if (folds >= 2) {
    std::vector<Stats> batch(folds);
    const std::size_t base = costs.size() / folds;
    std::size_t start = 0;
    for (std::size_t b = 0; b < folds; ++b) {
      const std::size_t len = base + (b < costs.size() % folds ? 1 : 0);
      batch[b] = stats_of(costs.subspan(start, len));
      start += len;
    }
    const auto se = [&](auto member) {
      double m = 0.0;
      for (const Stats& st : batch) m += st.*member;
      m /= static_cast<double>(folds);
      double v = 0.0;
      for (const Stats& st : batch) v += (st.*member - m) * (st.*member - m);
      v /= static_cast<double>(folds - 1);
      return std::sqrt(v / static_cast<double>(folds));
    };
    r.se_mean = se(&Stats::mean);
    r.se_es80 = se(&Stats::es80);
    r.se_es60 = se(&Stats::es60);
    r.se_variance = se(&Stats::variance);
    r.se_mean_variance = se(&Stats::mean_variance);
  }
  return r;
}

std::string EvaluationReport::to_json_text(const std::string& config_hash) const {
  nlohmann::ordered_json j;
  j["format"] = "riskgrad-eval-report";
  j["version"] = 1;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["n_episodes"] = n_episodes;
  j["greedy"] = greedy;
  j["upsilon_star"] = upsilon_star;
  j["statistics"] = {{"mean", mean},
                     {"es_0.8", es80},
                     {"es_0.6", es60},
                     {"variance", variance},
                     {"mean_variance_utility", mean_variance}};
  j["standard_errors"] = {{"mean", se_mean},
                          {"es_0.8", se_es80},
                          {"es_0.6", se_es60},
                          {"variance", se_variance},
                          {"mean_variance_utility", se_mean_variance}};
  return j.dump(2) + "\n";
}

std::vector<double> collect_costs(const Environment& env, const PolicyNet& policy,
                                  double upsilon_star, long long n_episodes,
                                  std::uint64_t seed, bool greedy) {
  if (n_episodes < 1) throw std::invalid_argument("collect_costs: n_episodes must be >= 1");
  const PolicyFn deploy = deployment_policy(policy, env, greedy);
  std::vector<double> costs(n_episodes);
  parallel_for(static_cast<std::size_t>(n_episodes), [&](std::size_t i) {
    auto rng = make_rng(seed, "eval-episode", i);
    costs[i] = total_cost(simulate_episode(env, deploy, upsilon_star, rng));
  });
  return costs;
}

EvaluationReport evaluate_policy(const Environment& env, const PolicyNet& policy,
                                 double upsilon_star, long long n_episodes,
                                 std::uint64_t seed, bool greedy) {
  const std::vector<double> costs =
      collect_costs(env, policy, upsilon_star, n_episodes, seed, greedy);
  EvaluationReport r = summarize_costs(costs, seed);
  r.greedy = greedy;
  r.upsilon_star = upsilon_star;
  return r;
}

std::pair<double, double> mc_value_estimate(const Environment& env,
                                            const PolicyNet& policy,
                                            const RiskSpec& spec, int t,
                                            const State& s, double y, double upsilon,
                                            int n_rollouts, std::uint64_t seed) {
  if (n_rollouts < 2) throw std::invalid_argument("mc_value_estimate: need >= 2 rollouts");
  const PolicyFn stochastic = deployment_policy(policy, env, false);
  std::vector<double> scores(n_rollouts);
  parallel_for(static_cast<std::size_t>(n_rollouts), [&](std::size_t i) {
    auto rng = make_rng(seed, "mc-rollout", i);
    const auto suffix = simulate_suffix(env, stochastic, t, s, y, upsilon, rng);
    scores[i] = eval_f(spec, total_cost(suffix) - y, upsilon);
  });
  double mean = 0.0;
  for (double v : scores) mean += v;
  mean /= n_rollouts;
  double var = 0.0;
  for (double v : scores) var += (v - mean) * (v - mean);
  var /= (n_rollouts - 1);
  return {mean, std::sqrt(var / n_rollouts)};
}

std::vector<ValueCurveRow> export_value_curve(
    const Mlp& value, const InputEncoding& enc, const Environment& env,
    const PolicyNet& policy, const RiskSpec& spec, const std::vector<State>& states,
    const std::vector<double>& upsilon_grid, int n_rollouts, const std::string& path,
    const Sidecar& sidecar) {
  std::vector<ValueCurveRow> rows;
  rows.reserve(states.size() * upsilon_grid.size());
  for (std::size_t si = 0; si < states.size(); ++si) {
    const std::vector<double> feats = env.encode(states[si]);
    for (double upsilon : upsilon_grid) {
      ValueCurveRow row;
      row.state_id = static_cast<int>(si);
      row.upsilon = upsilon;
      row.v_net = value_forward(value, enc, 0, upsilon, feats, 0.0);
      const auto [mc, se] = mc_value_estimate(
          env, policy, spec, 0, states[si], 0.0, upsilon, n_rollouts,
          derive_seed(sidecar.seed, "value-curve", si * upsilon_grid.size()));
      row.v_mc = mc;
      row.mc_se = se;
      rows.push_back(row);
    }
  }

  std::string csv = "state_id,upsilon,v_net,v_mc\n";
  for (const auto& r : rows)
    csv += std::to_string(r.state_id) + "," + fmt(r.upsilon) + "," + fmt(r.v_net) +
           "," + fmt(r.v_mc) + "\n";
  write_file(path, csv);
  write_sidecar(path, sidecar);
  return rows;
}

void export_policy_heatmap(const PolicyNet& policy, const Environment& env,
                           double upsilon_star, int t, const HeatmapGrid& grid,
                           const std::string& path, const Sidecar& sidecar) {
  if (env.state_dim() != 2)
    throw std::invalid_argument("policy heatmap needs a two-dimensional state");
  if (t < 0 || t >= env.horizon())
    throw std::invalid_argument("policy heatmap: time index out of range");
  if (grid.p_n < 2 || grid.q_n < 2 || (t >= 1 && grid.y_n < 2))
    throw std::invalid_argument("policy heatmap: grid needs >= 2 points per axis");

  const auto lin = [](double lo, double hi, int n, int i) {
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  std::string csv;
  if (t == 0) {
    csv = "P,Q,mean_action\n";
    for (int i = 0; i < grid.p_n; ++i)
      for (int j = 0; j < grid.q_n; ++j) {
        const double p = lin(grid.p_lo, grid.p_hi, grid.p_n, i);
        const double q = lin(grid.q_lo, grid.q_hi, grid.q_n, j);
        const Action a =
            policy_mean(policy, 0, upsilon_star, env.encode(State{p, q}), 0.0);
        csv += fmt(p) + "," + fmt(q) + "," + fmt(a[0]) + "\n";
      }
  } else {
    csv = "y,P,Q,mean_action\n";
    for (int k = 0; k < grid.y_n; ++k)
      for (int i = 0; i < grid.p_n; ++i)
        for (int j = 0; j < grid.q_n; ++j) {
          const double y = lin(grid.y_lo, grid.y_hi, grid.y_n, k);
          const double p = lin(grid.p_lo, grid.p_hi, grid.p_n, i);
          const double q = lin(grid.q_lo, grid.q_hi, grid.q_n, j);
          const Action a =
              policy_mean(policy, t, upsilon_star, env.encode(State{p, q}), y);
          csv += fmt(y) + "," + fmt(p) + "," + fmt(q) + "," + fmt(a[0]) + "\n";
        }
  }
  write_file(path, csv);
  write_sidecar(path, sidecar, {{"t", t}});
}

void export_cost_distribution(std::span<const double> costs,
                              const std::vector<double>& quantile_marks, int bins,
                              std::optional<Interval> range, const std::string& path,
                              const Sidecar& sidecar) {
  if (costs.empty()) throw std::invalid_argument("cost distribution: empty sample");
  if (bins < 1) throw std::invalid_argument("cost distribution: bins must be >= 1");

  double lo, hi;
  if (range) {
    lo = range->lo;
    hi = range->hi;
  } else {
    const auto [mn, mx] = std::minmax_element(costs.begin(), costs.end());
    lo = *mn;
    hi = *mx;
  }
  if (!(lo < hi)) {
    lo -= 0.5;
    hi += 0.5;
  }

  const double width = (hi - lo) / bins;
  std::vector<double> counts(bins, 0.0);
  for (double c : costs) {
    int b = static_cast<int>((c - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    counts[b] += 1.0;
  }
  const double norm = 1.0 / (static_cast<double>(costs.size()) * width);

  std::string csv = "bin_lo,bin_hi,density\n";
  for (int b = 0; b < bins; ++b)
    csv += fmt(lo + b * width) + "," + fmt(lo + (b + 1) * width) + "," +
           fmt(counts[b] * norm) + "\n";
  write_file(path, csv);

  nlohmann::ordered_json extra;
  nlohmann::ordered_json marks;
  for (double alpha : quantile_marks) {
    char key[32];
    std::snprintf(key, sizeof(key), "%g", alpha);
    marks[key] = es_quantile_update(costs, alpha);
  }
  extra["quantiles"] = marks;
  write_sidecar(path, sidecar, extra);
}

}  // namespace riskgrad
