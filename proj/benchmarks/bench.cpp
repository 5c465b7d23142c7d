#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "riskgrad/algo.hpp"
#include "riskgrad/environment.hpp"
#include "riskgrad/net.hpp"
#include "riskgrad/oracle.hpp"
#include "riskgrad/rng.hpp"
#include "riskgrad/scoring.hpp"

using namespace riskgrad;

namespace {

RiskSpec es_spec() {
  RiskSpec spec;
  spec.kind = RiskKind::ES;
  spec.alpha = 0.8;
  return spec;
}

TabularMDP bench_mdp(int n_states, int n_actions, int horizon) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TabularMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.horizon = horizon;
  const std::size_t cells =
      static_cast<std::size_t>(n_states) * n_actions * n_states;
  mdp.p.resize(cells);
  mdp.c.resize(cells);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        mdp.prob(s, a, s2) = u(rng) + 1e-3;
        sum += mdp.prob(s, a, s2);
        mdp.cost(s, a, s2) = u(rng);
      }
      double acc = 0.0;
      for (int s2 = 0; s2 + 1 < n_states; ++s2) {
        mdp.prob(s, a, s2) /= sum;
        acc += mdp.prob(s, a, s2);
      }
      mdp.prob(s, a, n_states - 1) = 1.0 - acc;
    }
  return mdp;
}

void BM_EmpiricalRiskES(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> samples(state.range(0));
  for (double& y : samples) y = n(rng);
  const RiskSpec spec = es_spec();
  for (auto _ : state) {
    benchmark::DoNotOptimize(empirical_risk(spec, samples, 257));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EmpiricalRiskES)->Range(256, 1 << 16)->Complexity();

void BM_DpOptimalValue(benchmark::State& state) {
  const TabularMDP mdp = bench_mdp(3, 3, static_cast<int>(state.range(0)));
  const RiskSpec spec = es_spec();
  for (auto _ : state) {
    benchmark::DoNotOptimize(dp_optimal_value(mdp, spec, 0.5));
  }
}
BENCHMARK(BM_DpOptimalValue)->DenseRange(2, 5);

void BM_UpsilonScan(benchmark::State& state) {
  const TabularMDP mdp = bench_mdp(2, 2, 3);
  const RiskSpec spec = es_spec();
  for (auto _ : state) {
    benchmark::DoNotOptimize(optimal_upsilon_scan(mdp, spec, static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_UpsilonScan)->Arg(201)->Arg(2001);

void BM_ValueForwardBackward(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const int width = static_cast<int>(state.range(0));
  Mlp net({6, width, width, 1}, rng);
  std::vector<double> x(6, 0.3);
  std::vector<double> grad(net.param_count(), 0.0);
  const double dout[1] = {1.0};
  for (auto _ : state) {
    Mlp::Tape tape;
    benchmark::DoNotOptimize(net.forward(x, tape));
    net.backward(tape, dout, grad);
    benchmark::DoNotOptimize(grad.data());
  }
}
BENCHMARK(BM_ValueForwardBackward)->Arg(32)->Arg(64)->Arg(128);

void BM_ArbitrageEpisode(benchmark::State& state) {
  ArbitrageEnv env{ArbitrageParams{}};
  std::mt19937_64 rngp(3);
  const InputEncoding enc = InputEncoding::standard(
      env, UpsilonBracket{-1.0, 1.0, false}, CostBounds{-5.0, 15.0});
  const PolicyNet policy = PolicyNet::make(env, enc, {64, 64}, rngp);
  const PolicyFn act = deployment_policy(policy, env, false);
  auto rng = make_rng(4, "bench");
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_episode(env, act, 0.0, rng));
  }
}
BENCHMARK(BM_ArbitrageEpisode);

void BM_CriticEpoch(benchmark::State& state) {
  ArbitrageEnv env{ArbitrageParams{}};
  std::mt19937_64 rngp(5);
  auto rngb = make_rng(5, "bounds");
  const CostBounds bounds = estimate_cost_bounds(env, 2000, rngb);
  const RiskSpec spec = es_spec();
  const UpsilonBracket bracket = upsilon_bracket(spec, bounds);
  const InputEncoding enc = InputEncoding::standard(env, bracket, bounds);
  const PolicyNet policy = PolicyNet::make(env, enc, {64, 64}, rngp);
  Mlp value({enc.dim(), 64, 64, 1}, rngp);
  AdamState adam = AdamState::for_params(value.param_count());

  ReplayBuffer buffer(env.horizon(), 256);
  const PolicyFn act = deployment_policy(policy, env, false);
  auto rng = make_rng(6, "fill");
  for (int i = 0; i < 256; ++i)
    buffer.push_episode(simulate_episode(env, act, 0.0, rng));

  auto rngc = make_rng(7, "critic");
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        critic_step(value, adam, enc, env, buffer, spec, 128, 1, 1e-2, rngc));
  }
}
BENCHMARK(BM_CriticEpoch);

}  // namespace

BENCHMARK_MAIN();
