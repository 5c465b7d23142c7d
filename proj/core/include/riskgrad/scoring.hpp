#pragma once

#include <optional>
#include <span>
#include <string>

namespace riskgrad {

// Risk functionals of a random total cost Y, written as
//
//   rho(Y) = inf_v h(E[f(Y, v)], v)
//
// where f(y, v) is convex in the auxiliary variable v for each fixed cost y
// and h is strictly increasing in its first argument. Each RiskKind fixes a
// concrete (f, h) pair; see eval_f / eval_h for the formulas.
enum class RiskKind {
  Expectation,
  ES,            // expected shortfall at level alpha
  Variance,
  MAD,           // mean absolute deviation around v
  AsymVariance,  // alpha-weighted squared deviation
  MeanES,        // E[Y] + lambda * ES_alpha(Y)
  MeanVariance,  // E[Y] + lambda * Var(Y)
  Entropic,      // log E[exp(gamma Y)] / gamma
  EVaR,          // entropic value-at-risk (costs must be nonnegative)
};

const char* risk_kind_name(RiskKind kind);
RiskKind parse_risk_kind(const std::string& name);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// A named risk objective: kind plus its parameters. The optional
// upsilon_bracket overrides the derived search interval for the auxiliary
// variable; EVaR has no finite bracket in general and requires it.
struct RiskSpec {
  RiskKind kind = RiskKind::Expectation;
  double alpha = 0.8;    // confidence level, ES / AsymVariance / MeanES / EVaR
  double lambda = 1.0;   // risk-penalty weight, MeanES / MeanVariance
  double gamma = 1.0;    // risk aversion, Entropic
  std::optional<Interval> upsilon_bracket;

  // Throws std::invalid_argument on out-of-range parameters.
  void validate() const;

  bool uses_alpha() const;
  // h is the identity map for every kind except Entropic and EVaR.
  bool identity_h() const;
};

// Bounds on the total episode cost. Used to derive the auxiliary-variable
// bracket and input normalization.
struct CostBounds {
  double y_lo = -1.0;
  double y_hi = 1.0;
};

struct UpsilonBracket {
  double lo = 0.0;
  double hi = 0.0;
  // True when the bracket came from RiskSpec::upsilon_bracket rather than
  // from the cost support (always the case for EVaR).
  bool user_supplied = false;

  double mid() const { return 0.5 * (lo + hi); }
  double half_width() const { return 0.5 * (hi - lo); }
  double clip(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
};

// Scoring function f(y, v). EVaR requires y >= 0 (convexity in v is lost for
// negative costs); throws std::domain_error otherwise.
double eval_f(const RiskSpec& spec, double y, double upsilon);

// Transform h(x, v); identity except Entropic (log(x)/gamma) and EVaR
// (exp(-v) log(x)). Throws std::domain_error when a logarithm of a
// non-positive x is requested.
double eval_h(const RiskSpec& spec, double x, double upsilon);

// Partial derivatives of h, used by the SGD search over v.
double dh_dx(const RiskSpec& spec, double x, double upsilon);
double dh_dupsilon(const RiskSpec& spec, double x, double upsilon);

// An element of the subdifferential of v -> f(y, v). Kinks (MAD,
// AsymVariance, ES at y == v) return 0 where 0 is a valid subgradient.
double subgrad_f_upsilon(const RiskSpec& spec, double y, double upsilon);

// Interval guaranteed to contain a minimizer of v -> h(E[f(Y, v)], v) for
// every Y supported on [bounds.y_lo, bounds.y_hi]. A user-supplied bracket
// takes precedence; EVaR throws std::invalid_argument without one.
UpsilonBracket upsilon_bracket(const RiskSpec& spec, const CostBounds& bounds);

struct EmpiricalRisk {
  double rho = 0.0;
  double upsilon_star = 0.0;
};

// rho of the empirical law of `samples`: minimizes
// v -> h(mean_i f(y_i, v), v) over a grid_n-point grid on the bracket,
// refined by ternary search on the winning cell when h is the identity.
// ES uses the closed-form minimizer (lower empirical alpha-quantile) and
// Variance the sample mean, each cross-checked against the grid.
EmpiricalRisk empirical_risk(const RiskSpec& spec, std::span<const double> samples,
                             int grid_n);

// Lower empirical quantile inf{ y : F_hat(y) >= alpha }.
double empirical_quantile(std::span<const double> samples, double alpha);

}  // namespace riskgrad
