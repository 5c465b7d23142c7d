#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "riskgrad/eval.hpp"
#include "riskgrad/oracle.hpp"
#include "riskgrad/rng.hpp"
#include "test_support.hpp"

using namespace riskgrad;
using namespace riskgrad::testing;

namespace {

std::filesystem::path temp_dir() {
  const auto dir =
      std::filesystem::temp_directory_path() / "riskgrad_eval_test";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::istringstream in(slurp(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

TabularMDP zero_cost_mdp(int horizon) {
  TabularMDP mdp;
  mdp.n_states = 1;
  mdp.n_actions = 2;
  mdp.horizon = horizon;
  mdp.p = {1.0, 1.0};
  mdp.c = {0.0, 0.0};
  return mdp;
}

PolicyNet fresh_policy(const Environment& env, std::uint64_t seed) {
  auto rngb = make_rng(seed, "bounds");
  const CostBounds bounds = env.cost_bounds(rngb);
  RiskSpec spec;
  spec.kind = RiskKind::ES;
  const UpsilonBracket bracket = upsilon_bracket(spec, bounds);
  const InputEncoding enc = InputEncoding::standard(env, bracket, bounds);
  auto rngp = make_rng(seed, "policy");
  return PolicyNet::make(env, enc, {8, 8}, rngp);
}

}  // namespace

TEST_CASE("cost summaries") {
  SUBCASE("two-point law has the closed-form statistics") {
    std::vector<double> costs;
    for (int i = 0; i < 5000; ++i) {
      costs.push_back(-1.0);
      costs.push_back(1.0);
    }
    const EvaluationReport r = summarize_costs(costs, 1);
    CHECK(r.mean == doctest::Approx(0.0));
    CHECK(r.es80 == doctest::Approx(1.0));
    CHECK(r.es60 == doctest::Approx(1.0));
    CHECK(r.variance == doctest::Approx(1.0));
    CHECK(r.mean_variance == doctest::Approx(1.0));
  }

  SUBCASE("tail averages dominate the mean on random samples") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.3, 1.7);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> costs(400);
      for (double& c : costs) c = n(rng);
      const EvaluationReport r = summarize_costs(costs, 1);
      CHECK(r.es80 >= r.es60 - 1e-12);
      CHECK(r.es60 >= r.mean - 1e-12);
      CHECK(r.variance >= 0.0);
    }
  }

  SUBCASE("ES statistics agree with the scoring module on the same sample") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 5.0);
    std::vector<double> costs(777);
    for (double& c : costs) c = u(rng);
    const EvaluationReport r = summarize_costs(costs, 1);
    RiskSpec es;
    es.kind = RiskKind::ES;
    es.alpha = 0.8;
    CHECK(r.es80 == doctest::Approx(empirical_risk(es, costs, 65).rho).epsilon(1e-9));
    es.alpha = 0.6;
    CHECK(r.es60 == doctest::Approx(empirical_risk(es, costs, 65).rho).epsilon(1e-9));
  }

  SUBCASE("standard errors shrink like one over root two when n doubles") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 1.0);
    double se_small = 0.0, se_big = 0.0;
    const int reps = 40;
    for (int rep = 0; rep < reps; ++rep) {
      std::vector<double> small(4000), big(8000);
      for (double& c : small) c = n(rng);
      for (double& c : big) c = n(rng);
      se_small += summarize_costs(small, 1).se_mean;
      se_big += summarize_costs(big, 1).se_mean;
    }
    const double ratio = se_small / se_big;
    CHECK(ratio == doctest::Approx(std::sqrt(2.0)).epsilon(0.15));
  }
}

TEST_CASE("policy evaluation") {
  SUBCASE("zero-cost environment reports all-zero statistics") {
    TabularEnv env(zero_cost_mdp(3));
    const PolicyNet policy = fresh_policy(env, 11);
    const EvaluationReport r = evaluate_policy(env, policy, 0.0, 500, 9, false);
    CHECK(r.mean == doctest::Approx(0.0));
    CHECK(r.es80 == doctest::Approx(0.0));
    CHECK(r.variance == doctest::Approx(0.0));
    CHECK(r.n_episodes == 500);
  }

  SUBCASE("identical seeds produce identical reports") {
    ArbitrageEnv env{ArbitrageParams{}};
    const PolicyNet policy = fresh_policy(env, 12);
    const EvaluationReport a = evaluate_policy(env, policy, 0.1, 800, 77, false);
    const EvaluationReport b = evaluate_policy(env, policy, 0.1, 800, 77, false);
    CHECK(a.mean == b.mean);
    CHECK(a.es80 == b.es80);
    CHECK(a.variance == b.variance);
    CHECK(a.se_mean == b.se_mean);
  }

  SUBCASE("greedy deployment of a deterministic-mean policy is noise-free in actions") {
    ArbitrageEnv env{ArbitrageParams{}};
    const PolicyNet policy = fresh_policy(env, 13);
    auto r1 = make_rng(5, "g");
    auto r2 = make_rng(5, "g");
    const PolicyFn d = deployment_policy(policy, env, true);
    const auto e1 = simulate_episode(env, d, 0.0, r1);
    const auto e2 = simulate_episode(env, d, 0.0, r2);
    for (std::size_t i = 0; i < e1.size(); ++i) CHECK(e1[i].a == e2[i].a);
  }
}

TEST_CASE("monte carlo value estimates track the exact policy value") {
  std::mt19937_64 gen(21);
  const TabularMDP mdp = random_mdp_fixed(gen, 2, 2, 2);
  TabularEnv env(mdp);
  const PolicyNet policy = fresh_policy(env, 31);  // uniform head
  RiskSpec spec;
  spec.kind = RiskKind::ES;
  spec.alpha = 0.8;
  const double upsilon = 0.7;

  const PolicyTable table = uniform_policy(mdp);
  const AugmentedValueTable exact = dp_policy_value(mdp, table, spec, upsilon);
  const auto [mc, se] = mc_value_estimate(env, policy, spec, 0, State{0.0}, 0.0,
                                          upsilon, 20000, 5);
  CHECK(std::abs(mc - exact.value_at(0, 0, 0.0)) < 4.0 * se + 1e-6);
}

TEST_CASE("value curve export") {
  std::mt19937_64 gen(41);
  const TabularMDP mdp = random_mdp_fixed(gen, 2, 2, 2);
  TabularEnv env(mdp);
  const PolicyNet policy = fresh_policy(env, 42);
  RiskSpec spec;
  spec.kind = RiskKind::ES;
  spec.alpha = 0.8;
  auto rngb = make_rng(42, "bounds");
  const CostBounds bounds = env.cost_bounds(rngb);
  const UpsilonBracket bracket = upsilon_bracket(spec, bounds);
  const InputEncoding enc = InputEncoding::standard(env, bracket, bounds);
  auto rngv = make_rng(42, "value");
  const Mlp value(std::vector<int>{enc.dim(), 8, 1}, rngv);

  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i)
    grid.push_back(bracket.lo + (bracket.hi - bracket.lo) * i / 10.0);

  const auto path = (temp_dir() / "curve.csv").string();
  const auto rows =
      export_value_curve(value, enc, env, policy, spec, {State{0.0}, State{1.0}},
                         grid, 400, path, Sidecar{"cafe", 7});

  SUBCASE("file format and finite entries") {
    const auto csv = read_csv(path);
    REQUIRE(!csv.empty());
    CHECK(csv[0] == std::vector<std::string>{"state_id", "upsilon", "v_net", "v_mc"});
    CHECK(csv.size() == rows.size() + 1);
    for (const auto& row : rows) {
      CHECK(std::isfinite(row.v_net));
      CHECK(std::isfinite(row.v_mc));
    }
    CHECK(std::filesystem::exists(path + ".meta.json"));
  }

  SUBCASE("exact fixed-policy values are midpoint-convex along upsilon") {
    const PolicyTable table = uniform_policy(mdp);
    std::vector<double> exact;
    for (double upsilon : grid)
      exact.push_back(
          dp_policy_value(mdp, table, spec, upsilon).value_at(0, 0, 0.0));
    for (std::size_t i = 1; i + 1 < exact.size(); ++i)
      CHECK(exact[i] <= 0.5 * (exact[i - 1] + exact[i + 1]) + 1e-9);
  }
}

TEST_CASE("policy heatmap export") {
  ArbitrageEnv env{ArbitrageParams{}};
  const PolicyNet policy = fresh_policy(env, 51);
  HeatmapGrid grid;
  grid.p_n = 7;
  grid.q_n = 5;
  grid.y_n = 3;

  SUBCASE("freshly initialized policy is flat at zero mean action") {
    const auto path = (temp_dir() / "heat0.csv").string();
    export_policy_heatmap(policy, env, 0.0, 0, grid, path, Sidecar{"cafe", 7});
    const auto csv = read_csv(path);
    CHECK(csv[0] == std::vector<std::string>{"P", "Q", "mean_action"});
    CHECK(csv.size() == 1 + 7 * 5);
    for (std::size_t i = 1; i < csv.size(); ++i)
      CHECK(std::stod(csv[i][2]) == doctest::Approx(0.0));  // zeroed head
  }

  SUBCASE("later times add the accumulated-cost axis") {
    const auto path = (temp_dir() / "heat2.csv").string();
    export_policy_heatmap(policy, env, 0.0, 2, grid, path, Sidecar{"cafe", 7});
    const auto csv = read_csv(path);
    CHECK(csv[0] == std::vector<std::string>{"y", "P", "Q", "mean_action"});
    CHECK(csv.size() == 1 + 3 * 7 * 5);
  }

  SUBCASE("time bounds are checked") {
    CHECK_THROWS_AS(export_policy_heatmap(policy, env, 0.0, 9, grid,
                                          (temp_dir() / "x.csv").string(),
                                          Sidecar{"cafe", 7}),
                    std::invalid_argument);
  }
}

TEST_CASE("cost distribution export") {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> costs(5000);
  for (double& c : costs) c = n(rng);

  const auto path = (temp_dir() / "dist.csv").string();
  export_cost_distribution(costs, {0.8, 0.6}, 101, std::nullopt, path,
                           Sidecar{"cafe", 7});

  SUBCASE("densities integrate to one") {
    const auto csv = read_csv(path);
    REQUIRE(csv.size() == 102);
    CHECK(csv[0] == std::vector<std::string>{"bin_lo", "bin_hi", "density"});
    double mass = 0.0;
    for (std::size_t i = 1; i < csv.size(); ++i)
      mass += std::stod(csv[i][2]) * (std::stod(csv[i][1]) - std::stod(csv[i][0]));
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("quantile marks reuse the quantile-update rule") {
    const nlohmann::json meta = nlohmann::json::parse(slurp(path + ".meta.json"));
    CHECK(meta.at("config_hash") == "cafe");
    CHECK(meta.at("quantiles").at("0.8").get<double>() ==
          doctest::Approx(es_quantile_update(costs, 0.8)));
  }

  SUBCASE("a shared range pins identical bin edges across exports") {
    std::vector<double> other(3000);
    for (double& c : other) c = 0.3 + 0.5 * n(rng);
    const auto p1 = (temp_dir() / "d1.csv").string();
    const auto p2 = (temp_dir() / "d2.csv").string();
    const Interval range{-4.0, 4.0};
    export_cost_distribution(costs, {0.8}, 51, range, p1, Sidecar{"cafe", 7});
    export_cost_distribution(other, {0.8}, 51, range, p2, Sidecar{"cafe", 7});
    const auto c1 = read_csv(p1);
    const auto c2 = read_csv(p2);
    REQUIRE(c1.size() == c2.size());
    for (std::size_t i = 1; i < c1.size(); ++i) {
      CHECK(c1[i][0] == c2[i][0]);
      CHECK(c1[i][1] == c2[i][1]);
    }
  }
}
