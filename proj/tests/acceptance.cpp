// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Criteria marked with their pinned tolerances; oracles are
// independent routes (direct recursion, quantile integration, finite
// differences, Monte Carlo).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "riskgrad/algo.hpp"
#include "riskgrad/environment.hpp"
#include "riskgrad/eval.hpp"
#include "riskgrad/net.hpp"
#include "riskgrad/oracle.hpp"
#include "riskgrad/rng.hpp"
#include "riskgrad/scoring.hpp"
#include "test_support.hpp"

using namespace riskgrad;
using namespace riskgrad::testing;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass,
            const std::string& detail) {
  std::printf("[%s] criterion %2d: %s — %s\n", pass ? "PASS" : "FAIL", criterion,
              name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RiskSpec make_spec(RiskKind kind, double alpha = 0.8, double lambda = 1.0) {
  RiskSpec spec;
  spec.kind = kind;
  spec.alpha = alpha;
  spec.lambda = lambda;
  return spec;
}

// ---------------------------------------------------------------------------
// 1. Rockafellar-Uryasev / scoring equivalence
// ---------------------------------------------------------------------------
void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(901);
  std::uniform_int_distribution<int> n_atoms(1, 50);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const RiskSpec spec = make_spec(RiskKind::ES, 0.8);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> ys(n_atoms(rng));
    for (double& y : ys) y = u(rng);
    const double via_scoring = empirical_risk(spec, ys, 257).rho;
    const double via_tail = tail_average_es(ys, 0.8);
    worst = std::max(worst, std::abs(via_scoring - via_tail));
  }
  const double secs = elapsed_s(t0);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "max |min-over-upsilon - tail average| = %.3g (tol 1e-6), %.2fs (budget 5s)",
                worst, secs);
  report(1, "Rockafellar-Uryasev equivalence on 200 random laws",
         worst < 1e-6 && secs < 5.0, detail);
}

// ---------------------------------------------------------------------------
// 2. Variance and mean-variance as scoring functionals
// ---------------------------------------------------------------------------
void criterion_2() {
  std::mt19937_64 rng(902);
  std::uniform_int_distribution<int> n_atoms(2, 50);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  double worst_var = 0.0, worst_mu = 0.0, worst_mv = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> ys(n_atoms(rng));
    for (double& y : ys) y = u(rng);
    double mean = 0.0;
    for (double y : ys) mean += y;
    mean /= ys.size();
    double var = 0.0;
    for (double y : ys) var += (y - mean) * (y - mean);
    var /= ys.size();

    const EmpiricalRisk rv = empirical_risk(make_spec(RiskKind::Variance), ys, 101);
    worst_var = std::max(worst_var, std::abs(rv.rho - var));
    worst_mu = std::max(worst_mu, std::abs(rv.upsilon_star - mean));

    const EmpiricalRisk rmv =
        empirical_risk(make_spec(RiskKind::MeanVariance, 0.8, 1.3), ys, 101);
    worst_mv = std::max(worst_mv, std::abs(rmv.rho - (mean + 1.3 * var)));
  }
  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "|rho - Var| = %.3g (tol 1e-9), |ups* - mean| = %.3g, "
                "|rho - (mean + lambda Var)| = %.3g (tol 1e-8)",
                worst_var, worst_mu, worst_mv);
  report(2, "variance and mean-variance scoring equivalences",
         worst_var < 1e-9 && worst_mu < 1e-6 && worst_mv < 1e-8, detail);
}

// ---------------------------------------------------------------------------
// 3. Bellman oracle vs exhaustive recursion, plus the lower-bound property
// ---------------------------------------------------------------------------
std::vector<TabularMDP> the_mdp_suite() {
  std::vector<TabularMDP> suite;
  std::mt19937_64 rng(903);
  for (int i = 0; i < 100; ++i) suite.push_back(random_mdp(rng, 3, 3, 3));
  return suite;
}

void criterion_3(const std::vector<TabularMDP>& suite) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(904);
  std::uniform_real_distribution<double> u(-0.5, 2.0);
  double worst = 0.0;
  bool dominance = true;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const TabularMDP& mdp = suite[i];
    const RiskSpec spec =
        i % 2 == 0 ? make_spec(RiskKind::ES, 0.7) : make_spec(RiskKind::Variance);
    const double upsilon = u(rng);
    const AugmentedValueTable opt = dp_optimal_value(mdp, spec, upsilon);
    for (int s = 0; s < mdp.n_states; ++s)
      worst = std::max(worst, std::abs(opt.value_at(0, s, 0.0) -
                                       brute_force_value(mdp, spec, upsilon, 0, s, 0.0)));

    std::uniform_real_distribution<double> up(0.01, 1.0);
    const PolicyTable random_policy = policy_table_from(mdp, [&](int, int, double) {
      std::vector<double> probs(mdp.n_actions);
      double sum = 0.0;
      for (double& p : probs) sum += (p = up(rng));
      for (double& p : probs) p /= sum;
      return probs;
    });
    const AugmentedValueTable val = dp_policy_value(mdp, random_policy, spec, upsilon);
    for (int t = 0; t <= mdp.horizon; ++t)
      for (const auto& [key, node] : val.layers[t])
        dominance = dominance && node.value >= opt.layers[t].at(key).value - 1e-12;
  }
  const double secs = elapsed_s(t0);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "max |DP - recursion| = %.3g (tol 1e-12), dominance %s, %.2fs (budget 60s)",
                worst, dominance ? "holds" : "VIOLATED", secs);
  report(3, "Bellman oracle equals exhaustive enumeration on 100 MDPs",
         worst < 1e-12 && dominance && secs < 60.0, detail);
}

// ---------------------------------------------------------------------------
// 4. Exchange of infima by double enumeration
// ---------------------------------------------------------------------------
void criterion_4(const std::vector<TabularMDP>& suite) {
  bool exact = true;
  int done = 0;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const TabularMDP& mdp = suite[i];
    const double count = std::pow(static_cast<double>(mdp.n_actions),
                                  mdp.horizon * mdp.n_states);
    if (count > 20000) continue;  // keep the double enumeration quick
    const RiskSpec spec = make_spec(RiskKind::ES, 0.7);
    const UpsilonBracket bracket = upsilon_bracket(spec, exact_cost_bounds(mdp));
    std::vector<double> grid(41);
    for (int j = 0; j < 41; ++j)
      grid[j] = bracket.lo + (bracket.hi - bracket.lo) * j / 40.0;

    std::vector<double> per_upsilon(grid.size(), 1e300);
    double policy_first = 1e300;
    std::vector<int> actions(mdp.horizon * mdp.n_states, 0);
    for (;;) {
      const std::vector<CostAtom> law =
          cost_law(mdp, markov_policy(mdp, actions));
      double best_u = 1e300;
      for (std::size_t j = 0; j < grid.size(); ++j) {
        const double v = law_objective(law, spec, grid[j]);
        best_u = std::min(best_u, v);
        per_upsilon[j] = std::min(per_upsilon[j], v);
      }
      policy_first = std::min(policy_first, best_u);
      int k = 0;
      const int slots = static_cast<int>(actions.size());
      while (k < slots) {
        if (++actions[k] < mdp.n_actions) break;
        actions[k] = 0;
        ++k;
      }
      if (k == slots) break;
    }
    double upsilon_first = 1e300;
    for (double v : per_upsilon) upsilon_first = std::min(upsilon_first, v);
    exact = exact && policy_first == upsilon_first;
    ++done;
  }
  char detail[120];
  std::snprintf(detail, sizeof(detail), "min-min equality exact on %d instances", done);
  report(4, "exchange of infima (double enumeration)", exact && done >= 50, detail);
}

// ---------------------------------------------------------------------------
// 5. Gradient correctness against central finite differences
// ---------------------------------------------------------------------------
void criterion_5() {
  std::mt19937_64 rng(905);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  double worst_policy = 0.0, worst_mse = 0.0;
  InputEncoding enc;
  enc.offset.assign(4, 0.0);
  enc.scale.assign(4, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    // Policy gradient, alternating categorical and squashed-Gaussian heads.
    PolicyNet policy;
    policy.enc = enc;
    if (rep % 2 == 0) {
      policy.mode = PolicyMode::Categorical;
      policy.n_actions = 3;
      policy.net = Mlp({4, 5, 3}, rng);
    } else {
      policy.mode = PolicyMode::SquashedGaussian;
      policy.a_lo = {-2.0};
      policy.a_hi = {2.0};
      policy.net = Mlp({4, 5, 2}, rng);
    }
    for (double& w : policy.net.params()) w = 0.1 * u(rng);
    const std::vector<double> feats = {u(rng)};
    const double upsilon = u(rng), y = u(rng);
    const Action action =
        policy.mode == PolicyMode::Categorical ? Action{1.0} : Action{1.2 * u(rng)};
    std::vector<double> analytic(policy.net.param_count(), 0.0);
    policy_log_prob_grad(policy, 1, upsilon, feats, y, action, 1.0, analytic);
    const auto fd_policy = finite_difference_grad(
        [&](const std::vector<double>& params) {
          PolicyNet probe = policy;
          probe.net.params() = params;
          return policy_log_prob(probe, 1, upsilon, feats, y, action);
        },
        policy.net.params());
    worst_policy = std::max(worst_policy, max_relative_error(analytic, fd_policy));

    // Critic mean-squared-error gradient.
    Mlp net({4, 6, 1}, rng);
    std::vector<std::vector<double>> xs;
    std::vector<double> targets;
    for (int i = 0; i < 4; ++i) {
      xs.push_back({u(rng), u(rng), u(rng), u(rng)});
      targets.push_back(u(rng));
    }
    std::vector<double> analytic_mse(net.param_count(), 0.0);
    mse_loss_grad(net, xs, targets, analytic_mse);
    const auto fd_mse = finite_difference_grad(
        [&](const std::vector<double>& params) {
          Mlp probe = Mlp::from_params(net.sizes(), params);
          std::vector<double> scratch(probe.param_count(), 0.0);
          return mse_loss_grad(probe, xs, targets, scratch);
        },
        net.params());
    worst_mse = std::max(worst_mse, max_relative_error(analytic_mse, fd_mse));
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "max rel. err: policy %.3g, mse %.3g (tol 1e-4) on 20 random nets",
                worst_policy, worst_mse);
  report(5, "gradients match central finite differences",
         worst_policy < 1e-4 && worst_mse < 1e-4, detail);
}

// ---------------------------------------------------------------------------
// 6. Alternating-minimization descent and convergence to the scan optimum
// ---------------------------------------------------------------------------
void criterion_6() {
  std::mt19937_64 rng(906);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bool descent = true;
  bool lower_bounded = true;
  int stuck = 0;
  double worst_gap = 0.0;
  const int grid_n = 2001;
  for (int rep = 0; rep < 50; ++rep) {
    const TabularMDP mdp = random_mdp(rng, 3, 3, 3);
    const RiskSpec spec =
        rep % 2 == 0 ? make_spec(RiskKind::ES, 0.8) : make_spec(RiskKind::Variance);
    const ScanResult scan = optimal_upsilon_scan(mdp, spec, grid_n);
    const UpsilonBracket bracket = upsilon_bracket(spec, exact_cost_bounds(mdp));
    const double start = bracket.lo + (bracket.hi - bracket.lo) * u(rng);
    const double eps = 1e-3;
    const auto trace = alt_min_trace(mdp, spec, start, 8, eps, grid_n);
    for (std::size_t n = 1; n < trace.size(); ++n)
      descent = descent && trace[n].objective + eps / (n + 1.0) <=
                               trace[n - 1].objective + eps / n + 1e-9;

    // Objective tolerance: grid spacing times a slope bound of the scoring
    // function over the bracket.
    double slope;
    if (spec.kind == RiskKind::ES)
      slope = std::max(1.0, spec.alpha / (1.0 - spec.alpha));
    else
      slope = 2.0 * (bracket.hi - bracket.lo);
    const double tol = scan.resolution * slope + 1e-9;
    const double gap = trace.back().objective - scan.objective;
    lower_bounded = lower_bounded && gap >= -1e-9;
    worst_gap = std::max(worst_gap, gap);
    if (gap > tol) ++stuck;
  }
  char detail[260];
  std::snprintf(detail, sizeof(detail),
                "descent chain %s and never undercuts the joint optimum (%s); "
                "limit reached the scan optimum on %d/50 instances, worst gap %.3f "
                "(alternation admits strictly suboptimal fixed points; see the "
                "notes on excluded convergence conditions)",
                descent ? "monotone" : "VIOLATED",
                lower_bounded ? "ok" : "VIOLATED", 50 - stuck, worst_gap);
  report(6, "alternating minimization descends to the scan optimum",
         descent && lower_bounded && stuck == 0, detail);
}

// ---------------------------------------------------------------------------
// 7. ES quantile shortcut equals the grid argmin on exact laws
// ---------------------------------------------------------------------------
void criterion_7() {
  std::mt19937_64 rng(907);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  const int grid_n = 2001;
  for (int rep = 0; rep < 50; ++rep) {
    const TabularMDP mdp = random_mdp(rng, 3, 3, 3);
    const RiskSpec spec = make_spec(RiskKind::ES, rep % 2 == 0 ? 0.8 : 0.6);
    const UpsilonBracket bracket = upsilon_bracket(spec, exact_cost_bounds(mdp));
    const double upsilon0 = bracket.lo + (bracket.hi - bracket.lo) * u(rng);
    const PolicyTable policy =
        greedy_policy(dp_optimal_value(mdp, spec, upsilon0), mdp);
    const std::vector<CostAtom> law = cost_law(mdp, policy);

    const double quantile = law_quantile(law, spec.alpha);
    double best = 1e300, best_u = bracket.lo;
    const double step = (bracket.hi - bracket.lo) / (grid_n - 1);
    for (int j = 0; j < grid_n; ++j) {
      const double g = bracket.lo + step * j;
      const double v = law_objective(law, spec, g);
      if (v < best) {
        best = v;
        best_u = g;
      }
    }
    worst = std::max(worst, std::abs(best_u - quantile) / (step + 1e-12));
  }
  char detail[120];
  std::snprintf(detail, sizeof(detail),
                "max |quantile - grid argmin| = %.2f grid cells (tol 1)", worst);
  report(7, "ES quantile rule matches the fixed-policy argmin", worst <= 1.0, detail);
}

// ---------------------------------------------------------------------------
// 8/9. Learning on the shipped two-state example vs the exact oracle
// ---------------------------------------------------------------------------
struct TabularRun {
  TrainResult result;
  double objective = 0.0;
  bool ok = false;
};

TabularRun run_tabular_training(const TabularMDP& mdp, const RiskSpec& spec,
                                std::uint64_t seed) {
  TabularEnv env(mdp);
  TrainConfig cfg;
  cfg.episodes_per_epoch = 64;
  cfg.epochs = 300;
  cfg.batch = 64;
  cfg.critic_epochs = 10;
  cfg.actor_epochs = 1;
  cfg.upsilon_sims = 64;
  cfg.upsilon_every = 5;
  cfg.sigma2 = 0.25;
  cfg.sigma2_floor = 1e-3;
  cfg.lr_actor = 0.02;
  cfg.lr_critic = 0.02;
  cfg.hidden = {16, 16};
  cfg.seed = seed;

  TabularRun run;
  run.result = train(env, spec, cfg, seed);
  if (run.result.aborted) return run;
  const PolicyTable table = policy_table_from(mdp, [&](int t, int s, double y) {
    return policy_probs(run.result.policy, t, run.result.upsilon_star,
                        env.encode(State{static_cast<double>(s)}), y);
  });
  run.objective = law_objective(cost_law(mdp, table), spec,
                                run.result.upsilon_star);
  run.ok = true;
  return run;
}

TabularRun criterion_8(const TabularMDP& mdp) {
  const RiskSpec spec = make_spec(RiskKind::ES, 0.8);
  const ScanResult scan = optimal_upsilon_scan(mdp, spec, 2001);
  int hits = 0;
  double worst_secs = 0.0;
  TabularRun first_hit;
  std::string gaps;
  for (int seed = 1; seed <= 10; ++seed) {
    const auto t0 = std::chrono::steady_clock::now();
    TabularRun run = run_tabular_training(mdp, spec, 7000 + seed);
    worst_secs = std::max(worst_secs, elapsed_s(t0));
    const double gap = run.ok ? run.objective - scan.objective : 1e9;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%.3f", seed == 1 ? "" : " ", gap);
    gaps += buf;
    if (run.ok && gap <= 0.05) {
      ++hits;
      if (!first_hit.ok) first_hit = std::move(run);
    }
  }
  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "%d/10 seeds within 0.05 of the DP optimum %.4f (gaps: %s), "
                "slowest seed %.0fs (budget 600s)",
                hits, scan.objective, gaps.c_str(), worst_secs);
  report(8, "full training reaches the tabular DP optimum", hits >= 8 && worst_secs < 600.0,
         detail);
  return first_hit;
}

void criterion_9(const TabularMDP& mdp, const TabularRun& trained) {
  if (!trained.ok) {
    report(9, "trained critic matches Monte Carlo ground truth", false,
           "no trained policy available from criterion 8");
    return;
  }
  const RiskSpec spec = make_spec(RiskKind::ES, 0.8);
  TabularEnv env(mdp);
  const PolicyNet& policy = trained.result.policy;
  const UpsilonBracket bracket = trained.result.bracket;
  const InputEncoding& enc = trained.result.encoding;

  // Policy-evaluation phase with exploring starts: the trained policy is
  // near-deterministic, so on-policy rollouts alone would never visit most of
  // the (t, s, y) probe nodes. Suffix rollouts from every reachable node with
  // uniform upsilon draws give the regression full coverage of the probe set.
  ReplayBuffer buffer(mdp.horizon, 1);
  auto rng = make_rng(908, "probe-fill");
  const PolicyFn act = deployment_policy(policy, env, false);
  // Overshoot the bracket by 10% so its endpoints are interior to the
  // training distribution; the probes themselves stay inside.
  const double widen = 0.1 * (bracket.hi - bracket.lo);
  std::uniform_real_distribution<double> u(bracket.lo - widen, bracket.hi + widen);
  const auto reach_fill = reachable_sets(mdp);
  for (int rep = 0; rep < 512; ++rep)
    for (int t = 0; t < mdp.horizon; ++t)
      for (const auto& [key, y] : reach_fill[t]) {
        const auto suffix = simulate_suffix(
            env, act, t, State{static_cast<double>(key.first)}, y, u(rng), rng);
        for (const auto& tr : suffix) buffer.push_transition(tr);
      }

  // Fresh critic for the frozen policy, annealed in three stages.
  auto rngv = make_rng(908, "probe-value");
  Mlp value(std::vector<int>{enc.dim(), 48, 48, 1}, rngv);
  AdamState adam = AdamState::for_params(value.param_count());
  auto rngc = make_rng(908, "probe-critic");
  critic_step(value, adam, enc, env, buffer, spec, 768, 2500, 0.02, rngc);
  critic_step(value, adam, enc, env, buffer, spec, 768, 3000, 0.005, rngc);
  critic_step(value, adam, enc, env, buffer, spec, 768, 3500, 0.00125, rngc);

  // Probe every reachable (t, s, y) node at five upsilon levels.
  const auto reach = reachable_sets(mdp);
  double sup = -1e300;
  int probes = 0;
  double worst[4] = {0, 0, 0, 0};
  for (int t = 0; t < mdp.horizon; ++t) {
    for (const auto& [key, y] : reach[t]) {
      for (int j = 0; j < 5; ++j) {
        const double upsilon = bracket.lo + (bracket.hi - bracket.lo) * j / 4.0;
        const double v_net =
            value_forward(value, enc, t, upsilon,
                          env.encode(State{static_cast<double>(key.first)}), y);
        const auto [v_mc, se] = mc_value_estimate(
            env, policy, spec, t, State{static_cast<double>(key.first)}, y, upsilon,
            4000, derive_seed(909, "probe", probes));
        const double score = std::abs(v_net - v_mc) - 3.0 * se;
        if (score > sup) {
          sup = score;
          worst[0] = t;
          worst[1] = key.first;
          worst[2] = y;
          worst[3] = upsilon;
        }
        ++probes;
      }
    }
  }
  char detail[220];
  std::snprintf(detail, sizeof(detail),
                "sup over %d probes of |net - MC| - 3 SE = %.4f (tol 0.05), worst at "
                "(t=%g, s=%g, y=%.3f, ups=%.3f)",
                probes, sup, worst[0], worst[1], worst[2], worst[3]);
  report(9, "trained critic matches Monte Carlo ground truth", sup <= 0.05, detail);
}

// ---------------------------------------------------------------------------
// 10. Arbitrage ordering across risk objectives
// ---------------------------------------------------------------------------
EvaluationReport train_and_eval_arbitrage(const RiskSpec& spec, std::uint64_t seed,
                                          double& train_secs) {
  ArbitrageEnv env{ArbitrageParams{}};
  TrainConfig cfg;
  cfg.episodes_per_epoch = 256;
  cfg.epochs = 1200;
  cfg.batch = 256;
  cfg.critic_epochs = 10;
  cfg.actor_epochs = 1;
  cfg.upsilon_sims = 128;
  cfg.upsilon_every = 5;
  cfg.sigma2 = 0.25;
  cfg.sigma2_floor = 1e-3;
  cfg.lr_actor = 3e-3;
  cfg.lr_critic = 1e-2;
  cfg.hidden = {64, 64};
  cfg.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult result = train(env, spec, cfg, seed);
  train_secs = elapsed_s(t0);
  // Shared evaluation seed and greedy deployment give common random numbers
  // across models.
  return evaluate_policy(env, result.policy, result.upsilon_star, 50000, 424242, true);
}

void criterion_10() {
  double secs_mean = 0, secs_es = 0, secs_var = 0, secs_mv = 0;
  const EvaluationReport rl_mean =
      train_and_eval_arbitrage(make_spec(RiskKind::Expectation), 31001, secs_mean);
  const EvaluationReport rl_es =
      train_and_eval_arbitrage(make_spec(RiskKind::ES, 0.8), 31002, secs_es);
  const EvaluationReport rl_var =
      train_and_eval_arbitrage(make_spec(RiskKind::Variance), 31003, secs_var);
  const EvaluationReport rl_mv =
      train_and_eval_arbitrage(make_spec(RiskKind::MeanVariance, 0.8, 1.0), 31004,
                               secs_mv);

  std::printf("    model        mean      es0.8     es0.6     var       mean-var   train\n");
  const auto row = [](const char* name, const EvaluationReport& r, double secs) {
    std::printf("    %-12s %+.4f   %+.4f   %+.4f   %.4f    %+.4f    %.0fs\n", name,
                r.mean, r.es80, r.es60, r.variance, r.mean_variance, secs);
  };
  row("RL-mean", rl_mean, secs_mean);
  row("RL-ES0.8", rl_es, secs_es);
  row("RL-Var", rl_var, secs_var);
  row("RL-Mean-Var", rl_mv, secs_mv);

  const bool mean_col = rl_mean.mean <= rl_es.mean && rl_mean.mean <= rl_var.mean &&
                        rl_mean.mean <= rl_mv.mean;
  const bool es_col = rl_es.es80 <= rl_mean.es80 - 0.01;
  const bool var_col = rl_var.variance <= rl_mean.variance &&
                       rl_var.variance <= rl_es.variance &&
                       rl_var.variance <= rl_mv.variance;
  const bool mv_col = rl_mv.mean_variance <= rl_mean.mean_variance &&
                      rl_mv.mean_variance <= rl_es.mean_variance &&
                      rl_mv.mean_variance <= rl_var.mean_variance;
  const double worst_secs = std::max({secs_mean, secs_es, secs_var, secs_mv});
  char detail[240];
  std::snprintf(detail, sizeof(detail),
                "mean column %s, ES column %s (margin %.4f vs 0.01), var column %s, "
                "mean-var column %s; slowest model %.0fs (budget 1800s)",
                mean_col ? "ok" : "VIOLATED", es_col ? "ok" : "VIOLATED",
                rl_mean.es80 - rl_es.es80, var_col ? "ok" : "VIOLATED",
                mv_col ? "ok" : "VIOLATED", worst_secs);
  report(10, "arbitrage models dominate their own objective column",
         mean_col && es_col && var_col && mv_col && worst_secs < 1800.0, detail);
}

// ---------------------------------------------------------------------------
// 11. Environment ledger identity and OU moments
// ---------------------------------------------------------------------------
void criterion_11() {
  ArbitrageEnv env{ArbitrageParams{}};
  const ArbitrageParams& params = env.params();

  // Ledger identity over 1000 random-policy episodes.
  const ActionSpace space = env.action_space();
  const PolicyFn random_policy = [&space](int, double, const State&, double,
                                          std::mt19937_64& r) -> Action {
    std::uniform_real_distribution<double> u(space.lo[0], space.hi[0]);
    return Action{u(r)};
  };
  double worst_ledger = 0.0;
  for (int ep = 0; ep < 1000; ++ep) {
    auto rng = make_rng(911, "ledger", ep);
    const auto episode = simulate_episode(env, random_policy, 0.0, rng);
    double wealth = 0.0;
    for (const auto& tr : episode) {
      wealth += tr.s_next[1] * (tr.s_next[0] - tr.s[0]) -
                params.phi * tr.a[0] * tr.a[0];
      if (tr.t == env.horizon() - 1)
        wealth -= params.psi * tr.s_next[1] * tr.s_next[1];
    }
    worst_ledger = std::max(worst_ledger, std::abs(total_cost(episode) + wealth));
  }

  // One-step OU moments from a fixed start, against the exact transition law.
  const double p0 = 1.3;
  const double decay = std::exp(-params.kappa * params.dt);
  const double exact_mean = params.mu + (p0 - params.mu) * decay;
  const double exact_var = params.sigma * params.sigma *
                           (1.0 - std::exp(-2.0 * params.kappa * params.dt)) /
                           (2.0 * params.kappa);
  const int n = 100000;
  auto rng = make_rng(912, "ou");
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const StepResult r = env.step(0, State{p0, 0.0}, Action{0.0}, rng);
    acc += r.next[0];
    acc2 += r.next[0] * r.next[0];
  }
  const double mc_mean = acc / n;
  const double mc_var = acc2 / n - mc_mean * mc_mean;
  const double mean_band = 3.0 * std::sqrt(exact_var / n);
  const double var_band = 3.0 * exact_var * std::sqrt(2.0 / n);
  const bool moments_ok = std::abs(mc_mean - exact_mean) < mean_band &&
                          std::abs(mc_var - exact_var) < var_band;
  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "max |cost sum + X_T| = %.2g (tol 1e-10); OU mean err %.2g (band %.2g), "
                "var err %.2g (band %.2g)",
                worst_ledger, std::abs(mc_mean - exact_mean), mean_band,
                std::abs(mc_var - exact_var), var_band);
  report(11, "wealth ledger identity and OU transition moments",
         worst_ledger < 1e-10 && moments_ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select individual criteria, e.g. `riskgrad_acceptance 1 5`.
  std::vector<bool> wanted(12, argc <= 1);
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n >= 1 && n <= 11) wanted[n] = true;
  }

  std::printf("riskgrad acceptance suite\n");
  if (wanted[1]) criterion_1();
  if (wanted[2]) criterion_2();
  if (wanted[3] || wanted[4]) {
    const std::vector<TabularMDP> suite = the_mdp_suite();
    if (wanted[3]) criterion_3(suite);
    if (wanted[4]) criterion_4(suite);
  }
  if (wanted[5]) criterion_5();
  if (wanted[6]) criterion_6();
  if (wanted[7]) criterion_7();
  if (wanted[8] || wanted[9]) {
    const TabularMDP example = TabularMDP::load(std::string(RISKGRAD_DATA_DIR) +
                                                "/mdp_2state.json");
    TabularRun trained;
    if (wanted[8]) {
      trained = criterion_8(example);
    } else {
      trained = run_tabular_training(example, make_spec(RiskKind::ES, 0.8), 7001);
    }
    if (wanted[9]) criterion_9(example, trained);
  }
  if (wanted[10]) criterion_10();
  if (wanted[11]) criterion_11();
  std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
