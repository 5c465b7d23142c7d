#include "riskgrad/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace riskgrad {

namespace {

std::vector<double> initial_distribution(const TabularMDP& mdp) {
  if (!mdp.mu0.empty()) return mdp.mu0;
  return std::vector<double>(mdp.n_states, 1.0 / static_cast<double>(mdp.n_states));
}

}  // namespace

const AugmentedValueTable::Node& AugmentedValueTable::node_at(int t, int s,
                                                              double y) const {
  const auto& layer = layers.at(t);
  auto it = layer.find(NodeKey{s, ykey(y)});
  if (it == layer.end())
    throw std::out_of_range("value table: unreachable (t, s, y) node");
  return it->second;
}

const std::vector<double>& PolicyTable::probs_at(int t, int s, double y) const {
  const auto& layer = layers.at(t);
  auto it = layer.find(NodeKey{s, ykey(y)});
  if (it == layer.end())
    throw std::out_of_range("policy table: undefined (t, s, y) entry");
  return it->second;
}

std::vector<std::map<NodeKey, double>> reachable_sets(const TabularMDP& mdp) {
  std::vector<std::map<NodeKey, double>> sets(mdp.horizon + 1);
  for (int s = 0; s < mdp.n_states; ++s) sets[0].emplace(NodeKey{s, ykey(0.0)}, 0.0);
  for (int t = 0; t < mdp.horizon; ++t) {
    for (const auto& [key, y] : sets[t]) {
      const int s = key.first;
      for (int a = 0; a < mdp.n_actions; ++a)
        for (int s2 = 0; s2 < mdp.n_states; ++s2) {
          if (mdp.prob(s, a, s2) <= 0.0) continue;
          const double y2 = y - mdp.cost(s, a, s2);
          sets[t + 1].emplace(NodeKey{s2, ykey(y2)}, y2);  // first-seen representative
        }
    }
  }
  return sets;
}

namespace {

// Shared backward pass. `mix` returns the state value from the per-action
// expectations; it also records the greedy action for the optimal case.
template <typename Mix>
AugmentedValueTable backward_induction(const TabularMDP& mdp, const RiskSpec& spec,
                                       double upsilon, const Mix& mix) {
  const auto reach = reachable_sets(mdp);
  AugmentedValueTable table;
  table.horizon = mdp.horizon;
  table.layers.resize(mdp.horizon + 1);

  for (const auto& [key, y] : reach[mdp.horizon])
    table.layers[mdp.horizon].emplace(
        key, AugmentedValueTable::Node{y, eval_f(spec, -y, upsilon), -1});

  std::vector<double> action_values(mdp.n_actions);
  for (int t = mdp.horizon - 1; t >= 0; --t) {
    const auto& next = table.layers[t + 1];
    for (const auto& [key, y] : reach[t]) {
      const int s = key.first;
      for (int a = 0; a < mdp.n_actions; ++a) {
        double acc = 0.0;
        for (int s2 = 0; s2 < mdp.n_states; ++s2) {
          const double pr = mdp.prob(s, a, s2);
          if (pr <= 0.0) continue;
          const double y2 = y - mdp.cost(s, a, s2);
          auto it = next.find(NodeKey{s2, ykey(y2)});
          if (it == next.end())
            throw std::logic_error("dp: missing successor node");
          acc += pr * it->second.value;
        }
        action_values[a] = acc;
      }
      table.layers[t].emplace(key, mix(t, s, y, action_values));
    }
  }
  return table;
}

}  // namespace

AugmentedValueTable dp_optimal_value(const TabularMDP& mdp, const RiskSpec& spec,
                                     double upsilon) {
  mdp.validate();
  return backward_induction(
      mdp, spec, upsilon,
      [](int, int, double y, const std::vector<double>& action_values) {
        int best = 0;
        for (std::size_t a = 1; a < action_values.size(); ++a)
          if (action_values[a] < action_values[best]) best = static_cast<int>(a);
        return AugmentedValueTable::Node{y, action_values[best], best};
      });
}

AugmentedValueTable dp_policy_value(const TabularMDP& mdp, const PolicyTable& policy,
                                    const RiskSpec& spec, double upsilon) {
  mdp.validate();
  return backward_induction(
      mdp, spec, upsilon,
      [&policy](int t, int s, double y, const std::vector<double>& action_values) {
        const std::vector<double>& probs = policy.probs_at(t, s, y);
        double acc = 0.0;
        for (std::size_t a = 0; a < action_values.size(); ++a)
          acc += probs[a] * action_values[a];
        return AugmentedValueTable::Node{y, acc, -1};
      });
}

double initial_value(const AugmentedValueTable& table, const TabularMDP& mdp) {
  const std::vector<double> mu0 = initial_distribution(mdp);
  double acc = 0.0;
  for (int s = 0; s < mdp.n_states; ++s)
    if (mu0[s] > 0.0) acc += mu0[s] * table.value_at(0, s, 0.0);
  return acc;
}

PolicyTable greedy_policy(const AugmentedValueTable& table, const TabularMDP& mdp) {
  PolicyTable policy;
  policy.layers.resize(table.horizon);
  for (int t = 0; t < table.horizon; ++t)
    for (const auto& [key, node] : table.layers[t]) {
      std::vector<double> probs(mdp.n_actions, 0.0);
      probs[node.action] = 1.0;
      policy.layers[t].emplace(key, std::move(probs));
    }
  return policy;
}

PolicyTable uniform_policy(const TabularMDP& mdp) {
  const auto reach = reachable_sets(mdp);
  PolicyTable policy;
  policy.layers.resize(mdp.horizon);
  const std::vector<double> probs(mdp.n_actions, 1.0 / mdp.n_actions);
  for (int t = 0; t < mdp.horizon; ++t)
    for (const auto& [key, y] : reach[t]) policy.layers[t].emplace(key, probs);
  return policy;
}

PolicyTable markov_policy(const TabularMDP& mdp, const std::vector<int>& actions) {
  if (static_cast<int>(actions.size()) != mdp.horizon * mdp.n_states)
    throw std::invalid_argument("markov_policy: need one action per (t, s)");
  const auto reach = reachable_sets(mdp);
  PolicyTable policy;
  policy.layers.resize(mdp.horizon);
  for (int t = 0; t < mdp.horizon; ++t)
    for (const auto& [key, y] : reach[t]) {
      std::vector<double> probs(mdp.n_actions, 0.0);
      probs[actions[t * mdp.n_states + key.first]] = 1.0;
      policy.layers[t].emplace(key, std::move(probs));
    }
  return policy;
}

PolicyTable policy_table_from(
    const TabularMDP& mdp,
    const std::function<std::vector<double>(int t, int s, double y)>& probs_fn) {
  const auto reach = reachable_sets(mdp);
  PolicyTable policy;
  policy.layers.resize(mdp.horizon);
  for (int t = 0; t < mdp.horizon; ++t)
    for (const auto& [key, y] : reach[t]) {
      std::vector<double> probs = probs_fn(t, key.first, y);
      if (static_cast<int>(probs.size()) != mdp.n_actions)
        throw std::invalid_argument("policy_table_from: wrong action count");
      policy.layers[t].emplace(key, std::move(probs));
    }
  return policy;
}

std::vector<CostAtom> cost_law(const TabularMDP& mdp, const PolicyTable& policy) {
  mdp.validate();
  const std::vector<double> mu0 = initial_distribution(mdp);
  // dist: (s, ykey) -> (y representative, probability)
  std::map<NodeKey, std::pair<double, double>> dist;
  for (int s = 0; s < mdp.n_states; ++s)
    if (mu0[s] > 0.0) dist[NodeKey{s, ykey(0.0)}] = {0.0, mu0[s]};

  for (int t = 0; t < mdp.horizon; ++t) {
    std::map<NodeKey, std::pair<double, double>> next;
    for (const auto& [key, yp] : dist) {
      const int s = key.first;
      const auto& [y, pr] = yp;
      const std::vector<double>& probs = policy.probs_at(t, s, y);
      for (int a = 0; a < mdp.n_actions; ++a) {
        if (probs[a] <= 0.0) continue;
        for (int s2 = 0; s2 < mdp.n_states; ++s2) {
          const double ptrans = mdp.prob(s, a, s2);
          if (ptrans <= 0.0) continue;
          const double y2 = y - mdp.cost(s, a, s2);
          auto [it, inserted] = next.try_emplace(NodeKey{s2, ykey(y2)}, y2, 0.0);
          it->second.second += pr * probs[a] * ptrans;
        }
      }
    }
    dist = std::move(next);
  }

  std::map<long long, std::pair<double, double>> totals;  // cost -> (repr, prob)
  for (const auto& [key, yp] : dist) {
    const double cost = -yp.first;
    auto [it, inserted] = totals.try_emplace(ykey(cost), cost, 0.0);
    it->second.second += yp.second;
  }
  std::vector<CostAtom> law;
  law.reserve(totals.size());
  for (const auto& [k, cp] : totals) law.push_back(CostAtom{cp.first, cp.second});
  return law;
}

double law_quantile(const std::vector<CostAtom>& law, double alpha) {
  if (law.empty()) throw std::invalid_argument("law_quantile: empty law");
  double cum = 0.0;
  for (const auto& atom : law) {
    cum += atom.prob;
    if (cum >= alpha - 1e-15) return atom.cost;
  }
  return law.back().cost;
}

double law_mean_f(const std::vector<CostAtom>& law, const RiskSpec& spec,
                  double upsilon) {
  double acc = 0.0;
  for (const auto& atom : law) acc += atom.prob * eval_f(spec, atom.cost, upsilon);
  return acc;
}

double law_objective(const std::vector<CostAtom>& law, const RiskSpec& spec,
                     double upsilon) {
  return eval_h(spec, law_mean_f(law, spec, upsilon), upsilon);
}

CostBounds exact_cost_bounds(const TabularMDP& mdp) {
  auto [lo, hi] = mdp.cost_range();
  const double t = static_cast<double>(mdp.horizon);
  const double pad = 0.05 * std::max(1.0, t * (hi - lo));
  return CostBounds{t * lo - pad, t * hi + pad};
}

namespace {

struct GridSpec {
  UpsilonBracket bracket;
  int n = 0;
  double step = 0.0;

  double at(int j) const { return bracket.lo + step * j; }
};

GridSpec make_grid(const RiskSpec& spec, const TabularMDP& mdp, int grid_n) {
  if (grid_n < 2) throw std::invalid_argument("upsilon grid needs >= 2 points");
  GridSpec g;
  g.bracket = upsilon_bracket(spec, exact_cost_bounds(mdp));
  g.n = grid_n;
  g.step = (g.bracket.hi - g.bracket.lo) / static_cast<double>(grid_n - 1);
  return g;
}

double ternary_min(const std::function<double(double)>& obj, double lo, double hi) {
  constexpr double kTol = 1e-10;
  constexpr int kMaxIter = 200;
  for (int i = 0; i < kMaxIter && hi - lo > kTol; ++i) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (obj(m1) <= obj(m2))
      hi = m2;
    else
      lo = m1;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

ScanResult optimal_upsilon_scan(const TabularMDP& mdp, const RiskSpec& spec,
                                int grid_n) {
  const GridSpec grid = make_grid(spec, mdp, grid_n);
  const auto objective = [&](double upsilon) {
    const AugmentedValueTable table = dp_optimal_value(mdp, spec, upsilon);
    return eval_h(spec, initial_value(table, mdp), upsilon);
  };

  int best_j = 0;
  double best_u = grid.at(0);
  double best_val = objective(best_u);
  for (int j = 1; j < grid.n; ++j) {
    const double u = grid.at(j);
    const double v = objective(u);
    if (v < best_val) {
      best_val = v;
      best_u = u;
      best_j = j;
    }
  }

  if (spec.identity_h()) {
    const double lo = grid.at(std::max(0, best_j - 1));
    const double hi = grid.at(std::min(grid.n - 1, best_j + 1));
    const double u = ternary_min(objective, lo, hi);
    const double v = objective(u);
    if (v < best_val) {
      best_val = v;
      best_u = u;
    }
  }

  ScanResult result;
  result.upsilon_star = best_u;
  result.objective = best_val;
  result.grid_n = grid.n;
  result.resolution = grid.step;
  result.at_bracket_edge = best_j == 0 || best_j == grid.n - 1;
  return result;
}

std::vector<AltMinStage> alt_min_trace(const TabularMDP& mdp, const RiskSpec& spec,
                                       double upsilon_init, int n_stages, double eps,
                                       int grid_n) {
  if (n_stages < 1) throw std::invalid_argument("alt_min_trace: need >= 1 stage");
  const GridSpec grid = make_grid(spec, mdp, grid_n);

  std::vector<AltMinStage> trace;
  trace.reserve(n_stages);
  double upsilon = grid.bracket.clip(upsilon_init);
  for (int n = 1; n <= n_stages; ++n) {
    const AugmentedValueTable table = dp_optimal_value(mdp, spec, upsilon);
    const PolicyTable policy = greedy_policy(table, mdp);
    const std::vector<CostAtom> law = cost_law(mdp, policy);

    // v_{n+1}: leftmost grid argmin of the fixed-policy objective.
    int best_j = 0;
    double best_val = law_objective(law, spec, grid.at(0));
    for (int j = 1; j < grid.n; ++j) {
      const double v = law_objective(law, spec, grid.at(j));
      if (v < best_val) {
        best_val = v;
        best_j = j;
      }
    }

    trace.push_back(AltMinStage{upsilon, best_val});
    upsilon = grid.at(best_j);

    if (n >= 2) {
      const double prev = trace[n - 2].objective + eps / (n - 1.0);
      const double curr = trace[n - 1].objective + eps / n;
      if (curr > prev + 1e-9)
        throw std::logic_error("alt_min_trace: descent chain violated");
    }
  }
  return trace;
}

AugmentationAdvantage augmentation_advantage(const TabularMDP& mdp,
                                             const RiskSpec& spec, double upsilon) {
  mdp.validate();
  const AugmentedValueTable opt = dp_optimal_value(mdp, spec, upsilon);

  const int slots = mdp.horizon * mdp.n_states;
  double count = std::pow(static_cast<double>(mdp.n_actions), slots);
  if (count > 1e6)
    throw std::length_error("augmentation_advantage: " + std::to_string(count) +
                            " Markov policies exceed the enumeration limit");

  std::vector<int> actions(slots, 0);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    const PolicyTable policy = markov_policy(mdp, actions);
    best = std::min(best, initial_value(dp_policy_value(mdp, policy, spec, upsilon), mdp));
    int i = 0;
    while (i < slots) {
      if (++actions[i] < mdp.n_actions) break;
      actions[i] = 0;
      ++i;
    }
    if (i == slots) break;
  }
  return AugmentationAdvantage{initial_value(opt, mdp), best};
}

}  // namespace riskgrad
