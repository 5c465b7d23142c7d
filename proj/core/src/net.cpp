#include "riskgrad/net.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

namespace riskgrad {

Mlp::Mlp(std::vector<int> sizes, std::mt19937_64& rng) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("mlp: need at least input and output sizes");
  for (int s : sizes_)
    if (s < 1) throw std::invalid_argument("mlp: layer sizes must be >= 1");

  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    weight_off_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l];
    bias_off_.push_back(total);
    total += sizes_[l + 1];
  }
  params_.resize(total);

  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    const std::size_t end = (l + 1 < weight_off_.size()) ? weight_off_[l + 1] : total;
    for (std::size_t i = weight_off_[l]; i < end; ++i) params_[i] = u(rng);
  }
}

Mlp Mlp::from_params(std::vector<int> sizes, std::vector<double> params) {
  std::mt19937_64 rng(0);
  Mlp net(std::move(sizes), rng);
  if (params.size() != net.param_count())
    throw std::invalid_argument("mlp: parameter count does not match sizes");
  net.params_ = std::move(params);
  return net;
}

void Mlp::zero_output_layer() {
  const std::size_t l = sizes_.size() - 2;
  std::fill(params_.begin() + weight_off_[l], params_.end(), 0.0);
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  Tape tape;
  return forward(x, tape);
}

std::vector<double> Mlp::forward(std::span<const double> x, Tape& tape) const {
  if (static_cast<int>(x.size()) != sizes_.front())
    throw std::invalid_argument("mlp: input dimension mismatch");
  const std::size_t layers = sizes_.size() - 1;
  tape.acts.assign(layers, {});
  std::vector<double> a(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    tape.acts[l] = a;
    const int in = sizes_[l], out = sizes_[l + 1];
    const double* w = params_.data() + weight_off_[l];
    const double* b = params_.data() + bias_off_[l];
    std::vector<double> z(out);
    for (int i = 0; i < out; ++i) {
      double acc = b[i];
      const double* row = w + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) acc += row[j] * a[j];
      z[i] = acc;
    }
    if (l + 1 < layers)
      for (double& v : z) v = std::tanh(v);
    a = std::move(z);
  }
  return a;
}

void Mlp::backward(const Tape& tape, std::span<const double> dout,
                   std::span<double> grad, std::vector<double>* dinput) const {
  const std::size_t layers = sizes_.size() - 1;
  if (tape.acts.size() != layers) throw std::invalid_argument("mlp: tape mismatch");
  if (grad.size() != params_.size()) throw std::invalid_argument("mlp: gradient size mismatch");

  std::vector<double> delta(dout.begin(), dout.end());
  for (std::size_t li = layers; li-- > 0;) {
    const int in = sizes_[li], out = sizes_[li + 1];
    const std::vector<double>& a = tape.acts[li];
    double* gw = grad.data() + weight_off_[li];
    double* gb = grad.data() + bias_off_[li];
    const double* w = params_.data() + weight_off_[li];
    for (int i = 0; i < out; ++i) {
      const double d = delta[i];
      gb[i] += d;
      double* grow = gw + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) grow[j] += d * a[j];
    }
    if (li == 0 && dinput == nullptr) break;
    std::vector<double> prev(in, 0.0);
    for (int i = 0; i < out; ++i) {
      const double d = delta[i];
      const double* row = w + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) prev[j] += row[j] * d;
    }
    if (li > 0) {
      // a holds the tanh outputs of the previous layer.
      for (int j = 0; j < in; ++j) prev[j] *= 1.0 - a[j] * a[j];
    }
    delta = std::move(prev);
    if (li == 0 && dinput) *dinput = std::move(delta);
  }
}

void adam_step(std::vector<double>& params, std::span<const double> grad,
               AdamState& state, double lr, double beta1, double beta2, double eps) {
  if (grad.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    throw std::invalid_argument("adam: shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

void sgd_step(std::vector<double>& params, std::span<const double> grad, double lr) {
  if (grad.size() != params.size()) throw std::invalid_argument("sgd: shape mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
}

void InputEncoding::validate() const {
  if (offset.size() != scale.size())
    throw std::invalid_argument("encoding: offset/scale size mismatch");
  for (double s : scale)
    if (!(s > 0.0)) throw std::invalid_argument("encoding: scales must be > 0");
}

std::vector<double> InputEncoding::encode(int t, double upsilon,
                                          std::span<const double> features,
                                          double y) const {
  if (static_cast<int>(features.size()) + 3 != dim())
    throw std::invalid_argument("encoding: feature dimension mismatch");
  std::vector<double> x(offset.size());
  x[0] = (static_cast<double>(t) - offset[0]) / scale[0];
  x[1] = (upsilon - offset[1]) / scale[1];
  for (std::size_t i = 0; i < features.size(); ++i)
    x[2 + i] = (features[i] - offset[2 + i]) / scale[2 + i];
  x.back() = (y - offset.back()) / scale.back();
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("encoding: non-finite input");
  return x;
}

InputEncoding InputEncoding::standard(const Environment& env,
                                      const UpsilonBracket& bracket,
                                      const CostBounds& bounds) {
  InputEncoding enc;
  const int fd = env.feature_dim();
  enc.offset.resize(fd + 3);
  enc.scale.resize(fd + 3);
  enc.offset[0] = 0.0;
  enc.scale[0] = static_cast<double>(env.horizon());
  enc.offset[1] = bracket.mid();
  enc.scale[1] = std::max(bracket.half_width(), 1e-12);
  const auto foff = env.feature_offset();
  const auto fsc = env.feature_scale();
  for (int i = 0; i < fd; ++i) {
    enc.offset[2 + i] = foff[i];
    enc.scale[2 + i] = fsc[i];
  }
  // y lives in the negated cost support [-y_hi, -y_lo].
  enc.offset[fd + 2] = -0.5 * (bounds.y_lo + bounds.y_hi);
  enc.scale[fd + 2] = std::max(0.5 * (bounds.y_hi - bounds.y_lo), 1e-12);
  enc.validate();
  return enc;
}

double value_forward(const Mlp& net, const InputEncoding& enc, int t, double upsilon,
                     std::span<const double> features, double y) {
  return net.forward(enc.encode(t, upsilon, features, y))[0];
}

double value_dupsilon(const Mlp& net, const InputEncoding& enc, int t, double upsilon,
                      std::span<const double> features, double y) {
  Mlp::Tape tape;
  net.forward(enc.encode(t, upsilon, features, y), tape);
  std::vector<double> grad(net.param_count(), 0.0);
  std::vector<double> dinput;
  const double dout[1] = {1.0};
  net.backward(tape, dout, grad, &dinput);
  return dinput[1] / enc.scale[1];
}

double mse_loss_grad(const Mlp& net, std::span<const std::vector<double>> inputs,
                     std::span<const double> targets, std::span<double> grad) {
  if (inputs.empty() || inputs.size() != targets.size())
    throw std::invalid_argument("mse: batch is empty or sizes mismatch");
  const double inv_n = 1.0 / static_cast<double>(inputs.size());
  double loss = 0.0;
  Mlp::Tape tape;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const double pred = net.forward(inputs[i], tape)[0];
    const double err = pred - targets[i];
    loss += err * err;
    const double dout[1] = {2.0 * err * inv_n};
    net.backward(tape, dout, grad);
  }
  return loss * inv_n;
}

// ---------------------------------------------------------------------------
// Policy heads
// ---------------------------------------------------------------------------

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // log(2 pi) / 2

double clamp_logstd(double raw) { return std::clamp(raw, kLogStdMin, kLogStdMax); }

// The pre-squash mean is itself soft-bounded: tanh(3) is already 0.995 of the
// action range, and an unbounded mean head can run past the plateau where
// likelihood-ratio gradients stop pulling it back.
constexpr double kMeanPreMax = 3.0;

double squash_mean(double raw) { return kMeanPreMax * std::tanh(raw / kMeanPreMax); }

double squash_mean_grad(double raw) {
  const double t = std::tanh(raw / kMeanPreMax);
  return 1.0 - t * t;
}

// log(1 - tanh(u)^2), stable for large |u|.
double log_sech2(double u) {
  const double au = std::abs(u);
  return 2.0 * (std::log(2.0) - au - std::log1p(std::exp(-2.0 * au)));
}

void softmax(std::span<const double> logits, std::vector<double>& probs) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  probs.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - mx);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
}

double logsumexp(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  return mx + std::log(sum);
}

// Pre-image of the squashing map; boundary actions are clipped.
double squash_preimage(double a, double mid, double half) {
  double r = (a - mid) / half;
  constexpr double kEdge = 1.0 - 1e-6;
  if (r > kEdge || r < -kEdge) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true))
      std::cerr << "riskgrad: clipping boundary action pre-image (tol 1e-6)\n";
    r = std::clamp(r, -kEdge, kEdge);
  }
  return std::atanh(r);
}

}  // namespace

PolicyNet PolicyNet::make(const Environment& env, const InputEncoding& enc,
                          const std::vector<int>& hidden, std::mt19937_64& rng) {
  PolicyNet p;
  p.enc = enc;
  const ActionSpace space = env.action_space();
  std::vector<int> sizes;
  sizes.push_back(enc.dim());
  for (int h : hidden) sizes.push_back(h);
  if (space.kind == ActionSpace::Kind::Discrete) {
    p.mode = PolicyMode::Categorical;
    p.n_actions = space.n;
    sizes.push_back(space.n);
  } else {
    p.mode = PolicyMode::SquashedGaussian;
    p.a_lo = space.lo;
    p.a_hi = space.hi;
    sizes.push_back(2 * static_cast<int>(space.lo.size()));
  }
  p.net = Mlp(std::move(sizes), rng);
  p.net.zero_output_layer();
  if (p.mode == PolicyMode::SquashedGaussian) {
    // Moderate initial spread: a wide pre-squash Gaussian parks too much mass
    // on the tanh plateaus, where the likelihood-ratio signal dies.
    const std::size_t dim = p.a_lo.size();
    for (std::size_t i = 0; i < dim; ++i)
      p.net.params()[p.net.param_count() - dim + i] = -0.7;
  }
  return p;
}

std::pair<Action, double> policy_sample(const PolicyNet& policy, int t, double upsilon,
                                        std::span<const double> features, double y,
                                        std::mt19937_64& rng) {
  const std::vector<double> out =
      policy.net.forward(policy.enc.encode(t, upsilon, features, y));

  if (policy.mode == PolicyMode::Categorical) {
    std::vector<double> probs;
    softmax(out, probs);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double r = u(rng);
    int pick = policy.n_actions - 1;
    for (int i = 0; i < policy.n_actions; ++i) {
      r -= probs[i];
      if (r <= 0.0) {
        pick = i;
        break;
      }
    }
    return {Action{static_cast<double>(pick)}, std::log(std::max(probs[pick], 1e-300))};
  }

  const int dim = policy.action_dim();
  Action a(dim);
  double logp = 0.0;
  std::normal_distribution<double> unit;
  for (int i = 0; i < dim; ++i) {
    const double mean = squash_mean(out[i]);
    const double logstd = clamp_logstd(out[dim + i]);
    const double sigma = std::exp(logstd);
    const double z = unit(rng);
    const double u = mean + sigma * z;
    const double mid = 0.5 * (policy.a_lo[i] + policy.a_hi[i]);
    const double half = 0.5 * (policy.a_hi[i] - policy.a_lo[i]);
    a[i] = mid + half * std::tanh(u);
    logp += -0.5 * z * z - logstd - kHalfLog2Pi - std::log(half) - log_sech2(u);
  }
  return {std::move(a), logp};
}

Action policy_mean(const PolicyNet& policy, int t, double upsilon,
                   std::span<const double> features, double y) {
  const std::vector<double> out =
      policy.net.forward(policy.enc.encode(t, upsilon, features, y));
  if (policy.mode == PolicyMode::Categorical) {
    const int best = static_cast<int>(
        std::max_element(out.begin(), out.end()) - out.begin());
    return Action{static_cast<double>(best)};
  }
  const int dim = policy.action_dim();
  Action a(dim);
  for (int i = 0; i < dim; ++i) {
    const double mid = 0.5 * (policy.a_lo[i] + policy.a_hi[i]);
    const double half = 0.5 * (policy.a_hi[i] - policy.a_lo[i]);
    a[i] = mid + half * std::tanh(squash_mean(out[i]));
  }
  return a;
}

double policy_log_prob(const PolicyNet& policy, int t, double upsilon,
                       std::span<const double> features, double y, const Action& a) {
  const std::vector<double> out =
      policy.net.forward(policy.enc.encode(t, upsilon, features, y));
  if (policy.mode == PolicyMode::Categorical) {
    const int idx = static_cast<int>(a[0]);
    if (idx < 0 || idx >= policy.n_actions)
      throw std::invalid_argument("policy: action index out of range");
    return out[idx] - logsumexp(out);
  }
  const int dim = policy.action_dim();
  double logp = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double mid = 0.5 * (policy.a_lo[i] + policy.a_hi[i]);
    const double half = 0.5 * (policy.a_hi[i] - policy.a_lo[i]);
    const double u = squash_preimage(a[i], mid, half);
    const double logstd = clamp_logstd(out[dim + i]);
    const double sigma = std::exp(logstd);
    const double z = (u - squash_mean(out[i])) / sigma;
    logp += -0.5 * z * z - logstd - kHalfLog2Pi - std::log(half) - log_sech2(u);
  }
  return logp;
}

std::vector<double> policy_probs(const PolicyNet& policy, int t, double upsilon,
                                 std::span<const double> features, double y) {
  if (policy.mode != PolicyMode::Categorical)
    throw std::invalid_argument("policy_probs: policy is not categorical");
  const std::vector<double> out =
      policy.net.forward(policy.enc.encode(t, upsilon, features, y));
  std::vector<double> probs;
  softmax(out, probs);
  return probs;
}

void scale_logstd_head_grad(const PolicyNet& policy, std::span<double> grad,
                            double factor) {
  if (policy.mode != PolicyMode::SquashedGaussian) return;
  const auto& sizes = policy.net.sizes();
  const int in = sizes[sizes.size() - 2];
  const int out = sizes.back();
  const int dim = out / 2;
  const std::size_t bias0 = grad.size() - out;
  const std::size_t weight0 = bias0 - static_cast<std::size_t>(out) * in;
  for (int r = dim; r < out; ++r) {
    for (int j = 0; j < in; ++j)
      grad[weight0 + static_cast<std::size_t>(r) * in + j] *= factor;
    grad[bias0 + r] *= factor;
  }
}

void policy_log_prob_grad(const PolicyNet& policy, int t, double upsilon,
                          std::span<const double> features, double y, const Action& a,
                          double weight, std::span<double> grad) {
  Mlp::Tape tape;
  const std::vector<double> out =
      policy.net.forward(policy.enc.encode(t, upsilon, features, y), tape);

  std::vector<double> dout(out.size(), 0.0);
  if (policy.mode == PolicyMode::Categorical) {
    const int idx = static_cast<int>(a[0]);
    if (idx < 0 || idx >= policy.n_actions)
      throw std::invalid_argument("policy: action index out of range");
    std::vector<double> probs;
    softmax(out, probs);
    for (int i = 0; i < policy.n_actions; ++i)
      dout[i] = weight * ((i == idx ? 1.0 : 0.0) - probs[i]);
  } else {
    const int dim = policy.action_dim();
    for (int i = 0; i < dim; ++i) {
      const double mid = 0.5 * (policy.a_lo[i] + policy.a_hi[i]);
      const double half = 0.5 * (policy.a_hi[i] - policy.a_lo[i]);
      const double u = squash_preimage(a[i], mid, half);
      const double raw = out[dim + i];
      const double logstd = clamp_logstd(raw);
      const double sigma = std::exp(logstd);
      const double z = (u - squash_mean(out[i])) / sigma;
      dout[i] = weight * z / sigma * squash_mean_grad(out[i]);
      // Clamped log-std passes no gradient outside its range.
      const bool active = raw > kLogStdMin && raw < kLogStdMax;
      dout[dim + i] = active ? weight * (z * z - 1.0) : 0.0;
    }
  }
  policy.net.backward(tape, dout, grad);
}

}  // namespace riskgrad
