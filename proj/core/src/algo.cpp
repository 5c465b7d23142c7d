#include "riskgrad/algo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "riskgrad/rng.hpp"

namespace riskgrad {

ReplayBuffer::ReplayBuffer(int horizon, std::size_t capacity_episodes)
    : horizon_(horizon), capacity_(capacity_episodes), slots_(horizon) {
  if (horizon < 1) throw std::invalid_argument("replay buffer: horizon must be >= 1");
  for (auto& slot : slots_) slot.reserve(capacity_episodes);
}

void ReplayBuffer::push_transition(const AugmentedTransition& tr) {
  if (tr.t < 0 || tr.t >= horizon_)
    throw std::invalid_argument("replay buffer: transition time out of range");
  if (tr.y_next != tr.y - tr.cost)
    throw std::invalid_argument("replay buffer: augmentation identity violated");
  slots_[tr.t].push_back(tr);
}

void ReplayBuffer::push_episode(const std::vector<AugmentedTransition>& episode) {
  if (static_cast<int>(episode.size()) != horizon_)
    throw std::invalid_argument("replay buffer: episode length != horizon");
  if (episodes_ >= capacity_)
    throw std::runtime_error("replay buffer: capacity exceeded");
  for (const auto& tr : episode) push_transition(tr);
  ++episodes_;
}

void ReplayBuffer::clear() {
  for (auto& slot : slots_) slot.clear();
  episodes_ = 0;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(int t, std::size_t batch,
                                                      std::mt19937_64& rng) const {
  const std::size_t available = slots_.at(t).size();
  if (available < batch)
    throw std::runtime_error("replay buffer: need " + std::to_string(batch) +
                             " transitions at t=" + std::to_string(t) + " but only " +
                             std::to_string(available) + " stored");
  std::uniform_int_distribution<std::size_t> pick(0, available - 1);
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

void TrainConfig::validate() const {
  if (episodes_per_epoch < 1 || epochs < 1 || batch < 1 || upsilon_sims < 1)
    throw std::invalid_argument("train: N, K, B, M must be >= 1");
  if (critic_epochs < 1 || actor_epochs < 1 || upsilon_epochs < 1)
    throw std::invalid_argument("train: K_critic, K_actor, K_upsilon must be >= 1");
  if (upsilon_every < 1) throw std::invalid_argument("train: L must be >= 1");
  if (!(decay > 0.0 && decay <= 1.0))
    throw std::invalid_argument("train: decay must lie in (0, 1]");
  if (!(sigma2_floor > 0.0))
    throw std::invalid_argument("train: sigma2_floor must be > 0");
  if (sigma2 < sigma2_floor)
    throw std::invalid_argument("train: sigma2 must be >= sigma2_floor");
  if (!(lr_actor > 0.0) || !(lr_critic > 0.0) || !(upsilon_lr > 0.0))
    throw std::invalid_argument("train: learning rates must be > 0");
  if (hidden.empty()) throw std::invalid_argument("train: need at least one hidden layer");
}

double sample_upsilon(const UpsilonState& state, std::mt19937_64& rng) {
  std::normal_distribution<double> n(state.upsilon_star, std::sqrt(state.sigma2));
  return state.bracket.clip(n(rng));
}

void decay_schedules(UpsilonState& state) {
  state.update_every = std::max(
      1, static_cast<int>(std::ceil(state.decay * state.update_every)));
  state.sigma2 = std::max(state.sigma2_floor, state.decay * state.sigma2);
  ++state.stage;
}

double es_quantile_update(std::span<const double> episode_costs, double alpha) {
  return empirical_quantile(episode_costs, alpha);
}

BatchIndices sample_batch(const ReplayBuffer& buffer, int batch, std::mt19937_64& rng) {
  BatchIndices out;
  out.per_t.resize(buffer.horizon());
  // Algorithm order: t = T-1 down to 0.
  for (int t = buffer.horizon() - 1; t >= 0; --t)
    out.per_t[t] = buffer.sample_indices(t, batch, rng);
  return out;
}

double critic_target(const Mlp& frozen_value, const InputEncoding& enc,
                     const Environment& env, const RiskSpec& spec,
                     const AugmentedTransition& tr, int horizon) {
  if (tr.t == horizon - 1) return eval_f(spec, tr.cost - tr.y, tr.upsilon);
  return value_forward(frozen_value, enc, tr.t + 1, tr.upsilon, env.encode(tr.s_next),
                       tr.y - tr.cost);
}

double critic_loss_grad(const Mlp& value, const Mlp& frozen_value,
                        const InputEncoding& enc, const Environment& env,
                        const ReplayBuffer& buffer, const RiskSpec& spec,
                        const BatchIndices& batch, std::span<double> grad) {
  const int T = buffer.horizon();
  std::size_t count = 0;
  for (const auto& idx : batch.per_t) count += idx.size();
  const double inv_n = 1.0 / static_cast<double>(count);

  double loss = 0.0;
  Mlp::Tape tape;
  for (int t = T - 1; t >= 0; --t) {
    for (std::size_t i : batch.per_t[t]) {
      const AugmentedTransition& tr = buffer.at(t, i);
      const double target = critic_target(frozen_value, enc, env, spec, tr, T);
      const std::vector<double> x =
          enc.encode(tr.t, tr.upsilon, env.encode(tr.s), tr.y);
      const double pred = value.forward(x, tape)[0];
      const double err = pred - target;
      loss += err * err;
      const double dout[1] = {2.0 * err * inv_n};
      value.backward(tape, dout, grad);
    }
  }
  return loss * inv_n;
}

CriticResult critic_step(Mlp& value, AdamState& adam, const InputEncoding& enc,
                         const Environment& env, const ReplayBuffer& buffer,
                         const RiskSpec& spec, int batch, int epochs, double lr,
                         std::mt19937_64& rng) {
  CriticResult result;
  std::vector<double> grad(value.param_count());
  for (int k = 0; k < epochs; ++k) {
    const Mlp frozen = value;  // targets held fixed within the epoch
    const BatchIndices idx = sample_batch(buffer, batch, rng);
    std::fill(grad.begin(), grad.end(), 0.0);
    const double loss = critic_loss_grad(value, frozen, enc, env, buffer, spec, idx, grad);
    if (k == 0) result.initial_loss = loss;
    result.final_loss = loss;
    adam_step(value.params(), grad, adam, lr);
  }
  return result;
}

void actor_gradient(const PolicyNet& policy, const Mlp& frozen_value,
                    const InputEncoding& value_enc, const Environment& env,
                    const ReplayBuffer& buffer, const RiskSpec& spec,
                    const BatchIndices& batch, std::span<double> grad) {
  const int T = buffer.horizon();
  std::size_t count = 0;
  for (const auto& idx : batch.per_t) count += idx.size();
  const double inv_n = 1.0 / static_cast<double>(count);

  for (int t = T - 1; t >= 0; --t) {
    for (std::size_t i : batch.per_t[t]) {
      const AugmentedTransition& tr = buffer.at(t, i);
      const double g = critic_target(frozen_value, value_enc, env, spec, tr, T);
      policy_log_prob_grad(policy, tr.t, tr.upsilon, env.encode(tr.s), tr.y, tr.a,
                           g * inv_n, grad);
    }
  }
}

void actor_step(PolicyNet& policy, AdamState& adam, const Mlp& frozen_value,
                const InputEncoding& value_enc, const Environment& env,
                const ReplayBuffer& buffer, const RiskSpec& spec, int batch,
                int epochs, double lr, std::mt19937_64& rng) {
  std::vector<double> grad(policy.net.param_count());
  for (int k = 0; k < epochs; ++k) {
    const BatchIndices idx = sample_batch(buffer, batch, rng);
    std::fill(grad.begin(), grad.end(), 0.0);
    actor_gradient(policy, frozen_value, value_enc, env, buffer, spec, idx, grad);
    scale_logstd_head_grad(policy, grad, 0.1);
    adam_step(policy.net.params(), grad, adam, lr);
  }
}

double search_upsilon(const UpsilonValueFn& value_m, int n_sims, const RiskSpec& spec,
                      const UpsilonBracket& bracket, int epochs, double lr,
                      double init) {
  double upsilon = bracket.clip(init);
  const double inv_m = 1.0 / static_cast<double>(n_sims);
  for (int k = 0; k < epochs; ++k) {
    double grad = 0.0;
    for (int m = 0; m < n_sims; ++m) {
      const auto [v, dv] = value_m(m, upsilon);
      grad += dh_dx(spec, v, upsilon) * dv + dh_dupsilon(spec, v, upsilon);
    }
    grad *= inv_m;
    if (!std::isfinite(grad))
      throw std::runtime_error("search_upsilon: non-finite gradient at upsilon=" +
                               std::to_string(upsilon));
    upsilon = bracket.clip(upsilon - lr * grad);
  }
  return upsilon;
}

double search_upsilon_net(const Mlp& value, const InputEncoding& enc,
                          const Environment& env, const std::vector<State>& init_states,
                          const RiskSpec& spec, const UpsilonBracket& bracket,
                          int epochs, double lr, double init) {
  std::vector<std::vector<double>> features;
  features.reserve(init_states.size());
  for (const State& s : init_states) features.push_back(env.encode(s));
  const UpsilonValueFn value_m = [&](int m, double upsilon) {
    return std::make_pair(value_forward(value, enc, 0, upsilon, features[m], 0.0),
                          value_dupsilon(value, enc, 0, upsilon, features[m], 0.0));
  };
  return search_upsilon(value_m, static_cast<int>(init_states.size()), spec, bracket,
                        epochs, lr, init);
}

PolicyFn deployment_policy(const PolicyNet& policy, const Environment& env,
                           bool greedy) {
  return [&policy, &env, greedy](int t, double upsilon, const State& s, double y,
                                 std::mt19937_64& rng) -> Action {
    const std::vector<double> feats = env.encode(s);
    if (greedy) return policy_mean(policy, t, upsilon, feats, y);
    return policy_sample(policy, t, upsilon, feats, y, rng).first;
  };
}

TrainResult train(const Environment& env, const RiskSpec& spec, const TrainConfig& cfg,
                  std::uint64_t master_seed) {
  spec.validate();
  cfg.validate();
  const std::uint64_t seed = cfg.seed != 0 ? cfg.seed : master_seed;
  const int T = env.horizon();

  TrainResult result;
  {
    auto rng = make_rng(seed, "cost-bounds");
    result.bounds = env.cost_bounds(rng);
  }
  result.bracket = upsilon_bracket(spec, result.bounds);
  result.encoding = InputEncoding::standard(env, result.bracket, result.bounds);

  {
    std::vector<int> sizes;
    sizes.push_back(result.encoding.dim());
    for (int h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(1);
    auto rng = make_rng(seed, "value-init");
    result.value = Mlp(std::move(sizes), rng);
  }
  {
    auto rng = make_rng(seed, "policy-init");
    result.policy = PolicyNet::make(env, result.encoding, cfg.hidden, rng);
  }

  AdamState adam_value = AdamState::for_params(result.value.param_count());
  AdamState adam_policy = AdamState::for_params(result.policy.net.param_count());

  UpsilonState ustate;
  ustate.upsilon_star = result.bracket.clip(0.0);
  ustate.sigma2 = cfg.sigma2;
  ustate.update_every = cfg.upsilon_every;
  ustate.sigma2_floor = cfg.sigma2_floor;
  ustate.decay = cfg.decay;
  ustate.bracket = result.bracket;

  const PolicyFn behavior = [&result, &env](int t, double upsilon, const State& s,
                                            double y, std::mt19937_64& rng) -> Action {
    return policy_sample(result.policy, t, upsilon, env.encode(s), y, rng).first;
  };

  // Warm-start the critic's output bias at the mean terminal score of the
  // untrained policy, so early regression targets start near scale.
  {
    auto rng = make_rng(seed, "warmup");
    double acc = 0.0;
    const int n_warm = std::max(8, cfg.episodes_per_epoch / 4);
    for (int i = 0; i < n_warm; ++i) {
      const double upsilon = sample_upsilon(ustate, rng);
      const auto episode = simulate_episode(env, behavior, upsilon, rng);
      acc += eval_f(spec, total_cost(episode), upsilon);
    }
    result.value.params().back() = acc / n_warm;
  }

  ReplayBuffer buffer(T, cfg.episodes_per_epoch);
  auto rng_upsilon = make_rng(seed, "upsilon-sample");
  auto rng_critic = make_rng(seed, "critic");
  auto rng_actor = make_rng(seed, "actor");
  auto rng_states = make_rng(seed, "upsilon-states");

  const bool es_family = spec.kind == RiskKind::ES || spec.kind == RiskKind::MeanES;
  std::vector<double> snapshot_value = result.value.params();
  std::vector<double> snapshot_policy = result.policy.net.params();
  double snapshot_upsilon = ustate.upsilon_star;

  int counter = 0;
  std::vector<double> episode_costs(cfg.episodes_per_epoch);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    buffer.clear();
    for (int n = 0; n < cfg.episodes_per_epoch; ++n) {
      auto rng_ep = make_rng(seed, "episode",
                             static_cast<std::uint64_t>(epoch - 1) * cfg.episodes_per_epoch + n);
      const double upsilon = sample_upsilon(ustate, rng_upsilon);
      const auto episode = simulate_episode(env, behavior, upsilon, rng_ep);
      episode_costs[n] = total_cost(episode);
      buffer.push_episode(episode);
    }

    const CriticResult critic =
        critic_step(result.value, adam_value, result.encoding, env, buffer, spec,
                    cfg.batch, cfg.critic_epochs, cfg.lr_critic, rng_critic);

    const Mlp frozen_value = result.value;
    actor_step(result.policy, adam_policy, frozen_value, result.encoding, env, buffer,
               spec, cfg.batch, cfg.actor_epochs, cfg.lr_actor, rng_actor);

    if (counter % ustate.update_every == 0) {
      double next_upsilon;
      if (cfg.es_shortcut && es_family) {
        next_upsilon = es_quantile_update(episode_costs, spec.alpha);
      } else {
        std::vector<State> states(cfg.upsilon_sims);
        for (auto& s : states) s = env.reset(rng_states);
        next_upsilon = search_upsilon_net(result.value, result.encoding, env, states,
                                          spec, result.bracket, cfg.upsilon_epochs,
                                          cfg.upsilon_lr, ustate.upsilon_star);
      }
      ustate.upsilon_star = result.bracket.clip(next_upsilon);
      counter = 0;
      decay_schedules(ustate);
    }
    ++counter;

    double mean_cost = 0.0;
    for (double c : episode_costs) mean_cost += c;
    mean_cost /= static_cast<double>(cfg.episodes_per_epoch);
    double score = 0.0;
    for (double c : episode_costs) score += eval_f(spec, c, ustate.upsilon_star);
    score /= static_cast<double>(cfg.episodes_per_epoch);
    const double objective = eval_h(spec, score, ustate.upsilon_star);

    result.log.push_back(
        TrainLogRow{epoch, ustate.upsilon_star, mean_cost, objective, critic.final_loss});

    const auto finite = [](const std::vector<double>& v) {
      for (double x : v)
        if (!std::isfinite(x)) return false;
      return true;
    };
    if (!std::isfinite(critic.final_loss) || !std::isfinite(objective) ||
        !finite(result.value.params()) || !finite(result.policy.net.params())) {
      result.value.params() = snapshot_value;
      result.policy.net.params() = snapshot_policy;
      ustate.upsilon_star = snapshot_upsilon;
      result.aborted = true;
      break;
    }
    snapshot_value = result.value.params();
    snapshot_policy = result.policy.net.params();
    snapshot_upsilon = ustate.upsilon_star;
    result.epochs_completed = epoch;
  }

  result.upsilon_star = ustate.upsilon_star;
  return result;
}

}  // namespace riskgrad
