#include "riskgrad/environment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace riskgrad {

std::vector<double> Environment::feature_offset() const {
  return std::vector<double>(feature_dim(), 0.0);
}

std::vector<double> Environment::feature_scale() const {
  return std::vector<double>(feature_dim(), 1.0);
}

std::vector<AugmentedTransition> simulate_suffix(const Environment& env,
                                                 const PolicyFn& policy, int t0,
                                                 const State& s0, double y0,
                                                 double upsilon,
                                                 std::mt19937_64& rng) {
  const int T = env.horizon();
  if (t0 < 0 || t0 >= T) throw std::invalid_argument("simulate_suffix: t0 out of range");
  std::vector<AugmentedTransition> episode;
  episode.reserve(T - t0);
  State s = s0;
  double y = y0;
  for (int t = t0; t < T; ++t) {
    Action a = policy(t, upsilon, s, y, rng);
    StepResult r = env.step(t, s, a, rng);
    AugmentedTransition tr;
    tr.t = t;
    tr.s = s;
    tr.y = y;
    tr.a = std::move(a);
    tr.s_next = r.next;
    tr.cost = r.cost;
    tr.y_next = y - r.cost;
    tr.upsilon = upsilon;
    s = std::move(r.next);
    y = tr.y_next;
    episode.push_back(std::move(tr));
  }
  return episode;
}

std::vector<AugmentedTransition> simulate_episode(const Environment& env,
                                                  const PolicyFn& policy,
                                                  double upsilon,
                                                  std::mt19937_64& rng) {
  State s0 = env.reset(rng);
  return simulate_suffix(env, policy, 0, s0, 0.0, upsilon, rng);
}

CostBounds estimate_cost_bounds(const Environment& env, int n_episodes,
                                std::mt19937_64& rng) {
  if (n_episodes < 2) throw std::invalid_argument("estimate_cost_bounds: need >= 2 episodes");
  const ActionSpace space = env.action_space();
  PolicyFn random_policy = [&space](int, double, const State&, double,
                                    std::mt19937_64& r) -> Action {
    if (space.kind == ActionSpace::Kind::Discrete) {
      std::uniform_int_distribution<int> pick(0, space.n - 1);
      return Action{static_cast<double>(pick(r))};
    }
    Action a(space.lo.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::uniform_real_distribution<double> u(space.lo[i], space.hi[i]);
      a[i] = u(r);
    }
    return a;
  };

  std::vector<double> totals(n_episodes);
  for (int i = 0; i < n_episodes; ++i)
    totals[i] = total_cost(simulate_episode(env, random_policy, 0.0, rng));
  std::sort(totals.begin(), totals.end());

  const auto at_quantile = [&](double q) {
    auto idx = static_cast<std::size_t>(q * (totals.size() - 1));
    return totals[idx];
  };
  double lo = at_quantile(0.001);
  double hi = at_quantile(0.999);
  double pad = 0.5 * (hi - lo);
  if (pad <= 0.0) pad = std::max(1e-6, 0.5 * std::abs(lo));
  return CostBounds{lo - pad, hi + pad};
}

// ---------------------------------------------------------------------------
// Arbitrage environment
// ---------------------------------------------------------------------------

void ArbitrageParams::validate() const {
  if (!(kappa > 0.0) || !(sigma > 0.0) || !(dt > 0.0))
    throw std::invalid_argument("arbitrage: kappa, sigma, dt must be > 0");
  if (phi < 0.0 || psi < 0.0)
    throw std::invalid_argument("arbitrage: phi, psi must be >= 0");
  if (horizon < 1) throw std::invalid_argument("arbitrage: horizon must be >= 1");
  if (!(q_max > 0.0) || !(a_max > 0.0))
    throw std::invalid_argument("arbitrage: q_max, a_max must be > 0");
}

ArbitrageEnv::ArbitrageEnv(ArbitrageParams params) : params_(params) {
  params_.validate();
  decay_ = std::exp(-params_.kappa * params_.dt);
  noise_std_ = params_.sigma *
               std::sqrt((1.0 - std::exp(-2.0 * params_.kappa * params_.dt)) /
                         (2.0 * params_.kappa));
}

ActionSpace ArbitrageEnv::action_space() const {
  ActionSpace s;
  s.kind = ActionSpace::Kind::Box;
  s.lo = {-params_.a_max};
  s.hi = {params_.a_max};
  return s;
}

State ArbitrageEnv::reset(std::mt19937_64& rng) const {
  std::normal_distribution<double> price(
      params_.mu, std::sqrt(8.0 * params_.sigma * params_.sigma / params_.kappa));
  std::uniform_real_distribution<double> inventory(-params_.q_max, params_.q_max);
  const double p0 = price(rng);
  const double q0 = inventory(rng);
  return State{p0, q0};
}

StepResult ArbitrageEnv::step_with_noise(int t, const State& s, const Action& a,
                                         double z) const {
  if (s.size() != 2) throw std::invalid_argument("arbitrage: state must be (P, Q)");
  if (a.size() != 1 || std::abs(a[0]) > params_.a_max + 1e-12)
    throw std::invalid_argument("arbitrage: action out of bounds");
  if (t < 0 || t >= params_.horizon)
    throw std::invalid_argument("arbitrage: time index out of range");

  const double price = s[0];
  const double q_next = std::clamp(s[1] + a[0], -params_.q_max, params_.q_max);
  const double price_next =
      params_.mu + (price - params_.mu) * decay_ + noise_std_ * z;

  // cost_t = X_t - X_{t+1}: the position held over the step earns the price
  // move, trading pays phi a^2, and the last step pays psi Q_T^2.
  double cost = -q_next * (price_next - price) + params_.phi * a[0] * a[0];
  if (t == params_.horizon - 1) cost += params_.psi * q_next * q_next;
  return StepResult{State{price_next, q_next}, cost};
}

StepResult ArbitrageEnv::step(int t, const State& s, const Action& a,
                              std::mt19937_64& rng) const {
  std::normal_distribution<double> unit;
  return step_with_noise(t, s, a, unit(rng));
}

std::vector<double> ArbitrageEnv::feature_offset() const {
  return {params_.mu, 0.0};
}

std::vector<double> ArbitrageEnv::feature_scale() const {
  const double price_sd =
      std::sqrt(8.0 * params_.sigma * params_.sigma / params_.kappa);
  return {2.0 * price_sd, params_.q_max};
}

CostBounds ArbitrageEnv::cost_bounds(std::mt19937_64& rng) const {
  return estimate_cost_bounds(*this, 100000, rng);
}

// ---------------------------------------------------------------------------
// Tabular MDP
// ---------------------------------------------------------------------------

void TabularMDP::validate() const {
  if (n_states < 1 || n_actions < 1 || horizon < 1)
    throw std::invalid_argument("tabular: n_states, n_actions, horizon must be >= 1");
  const std::size_t cells =
      static_cast<std::size_t>(n_states) * n_actions * n_states;
  if (p.size() != cells || c.size() != cells)
    throw std::invalid_argument("tabular: tensor sizes do not match dimensions");
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        const double q = prob(s, a, s2);
        if (q < 0.0) throw std::invalid_argument("tabular: negative probability");
        sum += q;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("tabular: transition row does not sum to 1");
    }
  }
  if (!mu0.empty()) {
    if (static_cast<int>(mu0.size()) != n_states)
      throw std::invalid_argument("tabular: mu0 size mismatch");
    double sum = 0.0;
    for (double q : mu0) {
      if (q < 0.0) throw std::invalid_argument("tabular: negative mu0 entry");
      sum += q;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("tabular: mu0 does not sum to 1");
  }
}

std::pair<double, double> TabularMDP::cost_range() const {
  double lo = c[0], hi = c[0];
  // Only costs on reachable (p > 0) branches matter for the bounds.
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a)
      for (int s2 = 0; s2 < n_states; ++s2)
        if (prob(s, a, s2) > 0.0) {
          lo = std::min(lo, cost(s, a, s2));
          hi = std::max(hi, cost(s, a, s2));
        }
  return {lo, hi};
}

TabularMDP TabularMDP::from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  TabularMDP mdp;
  mdp.n_states = j.at("n_states").get<int>();
  mdp.n_actions = j.at("n_actions").get<int>();
  mdp.horizon = j.at("T").get<int>();
  const auto read_tensor = [&](const char* key, std::vector<double>& out) {
    const auto& tensor = j.at(key);
    for (const auto& row_s : tensor)
      for (const auto& row_a : row_s)
        for (const auto& v : row_a) out.push_back(v.get<double>());
  };
  read_tensor("p", mdp.p);
  read_tensor("c", mdp.c);
  if (j.contains("mu0")) mdp.mu0 = j.at("mu0").get<std::vector<double>>();
  mdp.validate();
  return mdp;
}

TabularMDP TabularMDP::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tabular MDP file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::string TabularMDP::to_json_text() const {
  nlohmann::ordered_json j;
  j["n_states"] = n_states;
  j["n_actions"] = n_actions;
  j["T"] = horizon;
  const auto tensor = [&](const std::vector<double>& v) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (int s = 0; s < n_states; ++s) {
      nlohmann::ordered_json row_s = nlohmann::ordered_json::array();
      for (int a = 0; a < n_actions; ++a) {
        nlohmann::ordered_json row_a = nlohmann::ordered_json::array();
        for (int s2 = 0; s2 < n_states; ++s2)
          row_a.push_back(v[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2]);
        row_s.push_back(std::move(row_a));
      }
      out.push_back(std::move(row_s));
    }
    return out;
  };
  j["p"] = tensor(p);
  j["c"] = tensor(c);
  if (!mu0.empty()) j["mu0"] = mu0;
  return j.dump(2);
}

TabularEnv::TabularEnv(TabularMDP mdp) : mdp_(std::move(mdp)) { mdp_.validate(); }

ActionSpace TabularEnv::action_space() const {
  ActionSpace s;
  s.kind = ActionSpace::Kind::Discrete;
  s.n = mdp_.n_actions;
  return s;
}

State TabularEnv::reset(std::mt19937_64& rng) const {
  if (mdp_.mu0.empty()) {
    std::uniform_int_distribution<int> pick(0, mdp_.n_states - 1);
    return State{static_cast<double>(pick(rng))};
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng);
  for (int s = 0; s < mdp_.n_states; ++s) {
    r -= mdp_.mu0[s];
    if (r <= 0.0) return State{static_cast<double>(s)};
  }
  return State{static_cast<double>(mdp_.n_states - 1)};
}

StepResult TabularEnv::step(int t, const State& s, const Action& a,
                            std::mt19937_64& rng) const {
  if (t < 0 || t >= mdp_.horizon)
    throw std::invalid_argument("tabular: time index out of range");
  if (s.size() != 1 || a.size() != 1)
    throw std::invalid_argument("tabular: state and action must be scalar indices");
  const int si = static_cast<int>(s[0]);
  const int ai = static_cast<int>(a[0]);
  if (si < 0 || si >= mdp_.n_states) throw std::invalid_argument("tabular: state index out of range");
  if (ai < 0 || ai >= mdp_.n_actions) throw std::invalid_argument("tabular: action index out of range");

  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng);
  int s2 = mdp_.n_states - 1;
  for (int k = 0; k < mdp_.n_states; ++k) {
    r -= mdp_.prob(si, ai, k);
    if (r <= 0.0) {
      s2 = k;
      break;
    }
  }
  return StepResult{State{static_cast<double>(s2)}, mdp_.cost(si, ai, s2)};
}

std::vector<double> TabularEnv::encode(const State& s) const {
  std::vector<double> onehot(mdp_.n_states, 0.0);
  const int si = static_cast<int>(s[0]);
  if (si < 0 || si >= mdp_.n_states) throw std::invalid_argument("tabular: state index out of range");
  onehot[si] = 1.0;
  return onehot;
}

CostBounds TabularEnv::cost_bounds(std::mt19937_64&) const {
  auto [lo, hi] = mdp_.cost_range();
  const double t = static_cast<double>(mdp_.horizon);
  const double pad = 0.05 * std::max(1.0, t * (hi - lo));
  return CostBounds{t * lo - pad, t * hi + pad};
}

}  // namespace riskgrad
