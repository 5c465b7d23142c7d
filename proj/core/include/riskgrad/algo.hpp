#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "riskgrad/environment.hpp"
#include "riskgrad/net.hpp"
#include "riskgrad/scoring.hpp"

namespace riskgrad {

// Per-time-index episode storage; cleared every training epoch. Every stored
// transition must satisfy the augmentation identity y_next = y - cost.
class ReplayBuffer {
 public:
  ReplayBuffer(int horizon, std::size_t capacity_episodes);

  void push_episode(const std::vector<AugmentedTransition>& episode);
  // Stores a single transition (partial episodes, e.g. exploring starts).
  void push_transition(const AugmentedTransition& tr);
  void clear();

  int horizon() const { return horizon_; }
  std::size_t episodes() const { return episodes_; }
  std::size_t size_at(int t) const { return slots_.at(t).size(); }
  const AugmentedTransition& at(int t, std::size_t i) const { return slots_.at(t).at(i); }

  // Uniform indices into time slot t; throws std::runtime_error naming the
  // shortfall when fewer than batch transitions are stored there.
  std::vector<std::size_t> sample_indices(int t, std::size_t batch,
                                          std::mt19937_64& rng) const;

 private:
  int horizon_;
  std::size_t capacity_;
  std::size_t episodes_ = 0;
  std::vector<std::vector<AugmentedTransition>> slots_;
};

struct TrainConfig {
  int episodes_per_epoch = 256;  // N
  int epochs = 200;              // K
  int batch = 128;               // B
  int critic_epochs = 10;        // Adam steps per critic fit
  // Likelihood-ratio updates per epoch. More than a couple of steps on one
  // buffer re-descends stale on-policy data and destabilizes the actor.
  int actor_epochs = 1;
  int upsilon_epochs = 50;       // SGD steps of the upsilon search
  int upsilon_sims = 256;        // M
  int upsilon_every = 5;         // L
  double upsilon_lr = 0.05;
  double sigma2 = 0.25;          // exploration variance of the upsilon samples
  double sigma2_floor = 1e-4;
  double decay = 0.8;            // geometric decay of L and sigma^2
  bool es_shortcut = true;       // quantile update for the ES family
  double lr_actor = 3e-3;
  double lr_critic = 1e-2;
  std::vector<int> hidden = {64, 64, 64};
  std::uint64_t seed = 0;

  void validate() const;
};

// State of the upsilon sampling schedule.
struct UpsilonState {
  double upsilon_star = 0.0;
  double sigma2 = 0.25;
  int update_every = 5;  // L(n)
  int stage = 1;
  double sigma2_floor = 1e-4;
  double decay = 0.8;
  UpsilonBracket bracket;
};

// Draws N(upsilon_star, sigma2) clipped to the bracket.
double sample_upsilon(const UpsilonState& state, std::mt19937_64& rng);

// L <- max(1, ceil(decay L)); sigma2 <- max(floor, decay sigma2).
void decay_schedules(UpsilonState& state);

// Lower empirical alpha-quantile of simulated total costs.
double es_quantile_update(std::span<const double> episode_costs, double alpha);

// One batch view into the buffer: the sampled transition indices per t.
struct BatchIndices {
  std::vector<std::vector<std::size_t>> per_t;
};
BatchIndices sample_batch(const ReplayBuffer& buffer, int batch, std::mt19937_64& rng);

// Regression target for a transition: f(c - y, upsilon) at t = T-1, else the
// frozen critic at (t+1, upsilon, s', y - c).
double critic_target(const Mlp& frozen_value, const InputEncoding& enc,
                     const Environment& env, const RiskSpec& spec,
                     const AugmentedTransition& tr, int horizon);

// Mean-squared-error loss over a batch plus gradient w.r.t. the critic.
double critic_loss_grad(const Mlp& value, const Mlp& frozen_value,
                        const InputEncoding& enc, const Environment& env,
                        const ReplayBuffer& buffer, const RiskSpec& spec,
                        const BatchIndices& batch, std::span<double> grad);

struct CriticResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Policy evaluation: K epochs of Adam on the squared Bellman residual, with
// the target critic frozen at the start of each epoch.
CriticResult critic_step(Mlp& value, AdamState& adam, const InputEncoding& enc,
                         const Environment& env, const ReplayBuffer& buffer,
                         const RiskSpec& spec, int batch, int epochs, double lr,
                         std::mt19937_64& rng);

// Likelihood-ratio policy gradient (1/BT) sum grad log pi(a) * G with the
// critic treated as a constant. Accumulates into grad.
void actor_gradient(const PolicyNet& policy, const Mlp& frozen_value,
                    const InputEncoding& value_enc, const Environment& env,
                    const ReplayBuffer& buffer, const RiskSpec& spec,
                    const BatchIndices& batch, std::span<double> grad);

// Policy improvement: K epochs of Adam on the likelihood-ratio gradient.
void actor_step(PolicyNet& policy, AdamState& adam, const Mlp& frozen_value,
                const InputEncoding& value_enc, const Environment& env,
                const ReplayBuffer& buffer, const RiskSpec& spec, int batch,
                int epochs, double lr, std::mt19937_64& rng);

// Initial-state value and its derivative in upsilon, for sample m.
using UpsilonValueFn = std::function<std::pair<double, double>(int m, double upsilon)>;

// Projected SGD on v -> (1/M) sum_m h(V_m(v), v), the gradient flowing through
// both the value's upsilon dependence and the analytic dh/dv. Throws
// std::runtime_error on a non-finite gradient.
double search_upsilon(const UpsilonValueFn& value_m, int n_sims, const RiskSpec& spec,
                      const UpsilonBracket& bracket, int epochs, double lr,
                      double init = 0.0);

// Net-backed variant over frozen critic values at (t=0, s0^m, y=0).
double search_upsilon_net(const Mlp& value, const InputEncoding& enc,
                          const Environment& env, const std::vector<State>& init_states,
                          const RiskSpec& spec, const UpsilonBracket& bracket,
                          int epochs, double lr, double init = 0.0);

struct TrainLogRow {
  int epoch = 0;
  double upsilon = 0.0;
  double mean_cost = 0.0;
  double objective = 0.0;
  double critic_loss = 0.0;
};

struct TrainResult {
  PolicyNet policy;
  Mlp value;
  InputEncoding encoding;
  CostBounds bounds;
  UpsilonBracket bracket;
  double upsilon_star = 0.0;
  std::vector<TrainLogRow> log;
  bool aborted = false;   // non-finite loss; nets hold the last finite state
  int epochs_completed = 0;
};

// Complete training loop: per epoch simulate N episodes with per-episode
// upsilon draws, fit the critic, update the actor, refresh upsilon_star every
// L epochs (quantile shortcut for the ES family when enabled), decay the
// schedules, and clear the buffer.
TrainResult train(const Environment& env, const RiskSpec& spec, const TrainConfig& cfg,
                  std::uint64_t master_seed);

// Deployment policy: upsilon pinned to upsilon_star, y tracked online.
PolicyFn deployment_policy(const PolicyNet& policy, const Environment& env,
                           bool greedy);

}  // namespace riskgrad
