#pragma once

#include <random>
#include <span>
#include <utility>
#include <vector>

#include "riskgrad/environment.hpp"
#include "riskgrad/scoring.hpp"

namespace riskgrad {

// Fully connected feed-forward network with tanh hidden layers and a linear
// output layer. Parameters live in one flat vector (per layer: row-major
// weights, then biases) so optimizers, checkpoints, and finite differences
// can treat them uniformly. Forward and backward are pure; training owns the
// parameters single-threaded while read-only snapshots may be evaluated from
// any thread.
class Mlp {
 public:
  Mlp() = default;
  // sizes = {input, hidden..., output}; fan-in uniform initialization.
  Mlp(std::vector<int> sizes, std::mt19937_64& rng);
  // Rebuild from checkpointed sizes and flat parameters.
  static Mlp from_params(std::vector<int> sizes, std::vector<double> params);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  std::size_t param_count() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  // Symmetric start for policy heads: zero final-layer weights and biases.
  void zero_output_layer();

  std::vector<double> forward(std::span<const double> x) const;

  struct Tape {
    std::vector<std::vector<double>> acts;  // acts[l] = input of layer l
  };
  std::vector<double> forward(std::span<const double> x, Tape& tape) const;

  // Accumulates dL/dparams into `grad` (size param_count()) given dL/doutput
  // for the tape's forward pass; optionally also returns dL/dinput.
  void backward(const Tape& tape, std::span<const double> dout,
                std::span<double> grad, std::vector<double>* dinput = nullptr) const;

 private:
  std::vector<int> sizes_;
  std::vector<double> params_;
  std::vector<std::size_t> weight_off_, bias_off_;
};

struct AdamState {
  std::vector<double> m, v;
  long long step = 0;

  static AdamState for_params(std::size_t n) {
    return AdamState{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0};
  }
};

// Standard Adam update with bias correction; increments the step counter.
void adam_step(std::vector<double>& params, std::span<const double> grad,
               AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

// Plain SGD step: params -= lr * grad.
void sgd_step(std::vector<double>& params, std::span<const double> grad, double lr);

// Normalization of the augmented network inputs (t, upsilon, s..., y).
struct InputEncoding {
  std::vector<double> offset, scale;

  int dim() const { return static_cast<int>(offset.size()); }
  void validate() const;  // scales strictly positive

  std::vector<double> encode(int t, double upsilon,
                             std::span<const double> features, double y) const;

  // t/T, upsilon centered on the bracket, features by environment scales,
  // y by the cost-bound half-width.
  static InputEncoding standard(const Environment& env, const UpsilonBracket& bracket,
                                const CostBounds& bounds);
};

// Scalar critic output V(t, upsilon, s, y). Throws std::invalid_argument on
// non-finite inputs.
double value_forward(const Mlp& net, const InputEncoding& enc, int t, double upsilon,
                     std::span<const double> features, double y);

// dV/dupsilon through the network's upsilon input channel.
double value_dupsilon(const Mlp& net, const InputEncoding& enc, int t, double upsilon,
                      std::span<const double> features, double y);

// Mean squared error over a batch of encoded inputs plus its exact gradient
// (accumulated into `grad`, which must be zeroed by the caller).
double mse_loss_grad(const Mlp& net, std::span<const std::vector<double>> inputs,
                     std::span<const double> targets, std::span<double> grad);

// Policy network over the same augmented inputs. Continuous actions use a
// tanh-squashed Gaussian per dimension (log-std clamped to [-5, 2]); discrete
// actions use categorical logits.
enum class PolicyMode { SquashedGaussian, Categorical };

struct PolicyNet {
  PolicyMode mode = PolicyMode::SquashedGaussian;
  Mlp net;
  InputEncoding enc;
  std::vector<double> a_lo, a_hi;  // box bounds (SquashedGaussian)
  int n_actions = 0;               // Categorical

  int action_dim() const {
    return mode == PolicyMode::Categorical ? 1 : static_cast<int>(a_lo.size());
  }

  static PolicyNet make(const Environment& env, const InputEncoding& enc,
                        const std::vector<int>& hidden, std::mt19937_64& rng);
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

std::pair<Action, double> policy_sample(const PolicyNet& policy, int t, double upsilon,
                                        std::span<const double> features, double y,
                                        std::mt19937_64& rng);

// Deployment-mode action: squashed mean (continuous) or argmax (discrete).
Action policy_mean(const PolicyNet& policy, int t, double upsilon,
                   std::span<const double> features, double y);

double policy_log_prob(const PolicyNet& policy, int t, double upsilon,
                       std::span<const double> features, double y, const Action& a);

// Action-probability vector of a categorical policy (sums to 1).
std::vector<double> policy_probs(const PolicyNet& policy, int t, double upsilon,
                                 std::span<const double> features, double y);

// Rescales the gradient entries of the log-std output rows. The spread head
// otherwise shrinks much faster than the mean head learns, starving
// exploration.
void scale_logstd_head_grad(const PolicyNet& policy, std::span<double> grad,
                            double factor);

// grad += weight * d log pi(a | t, upsilon, s, y) / d theta. Boundary actions
// (continuous case) have their pre-image clipped with tolerance 1e-6.
void policy_log_prob_grad(const PolicyNet& policy, int t, double upsilon,
                          std::span<const double> features, double y, const Action& a,
                          double weight, std::span<double> grad);

}  // namespace riskgrad
