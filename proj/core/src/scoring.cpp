#include "riskgrad/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace riskgrad {

const char* risk_kind_name(RiskKind kind) {
  switch (kind) {
    case RiskKind::Expectation: return "expectation";
    case RiskKind::ES: return "es";
    case RiskKind::Variance: return "variance";
    case RiskKind::MAD: return "mad";
    case RiskKind::AsymVariance: return "asym_variance";
    case RiskKind::MeanES: return "mean_es";
    case RiskKind::MeanVariance: return "mean_variance";
    case RiskKind::Entropic: return "entropic";
    case RiskKind::EVaR: return "evar";
  }
  return "?";
}

RiskKind parse_risk_kind(const std::string& name) {
  for (RiskKind k : {RiskKind::Expectation, RiskKind::ES, RiskKind::Variance,
                     RiskKind::MAD, RiskKind::AsymVariance, RiskKind::MeanES,
                     RiskKind::MeanVariance, RiskKind::Entropic, RiskKind::EVaR}) {
    if (name == risk_kind_name(k)) return k;
  }
  throw std::invalid_argument("unknown risk kind: " + name);
}

bool RiskSpec::uses_alpha() const {
  return kind == RiskKind::ES || kind == RiskKind::AsymVariance ||
         kind == RiskKind::MeanES || kind == RiskKind::EVaR;
}

bool RiskSpec::identity_h() const {
  return kind != RiskKind::Entropic && kind != RiskKind::EVaR;
}

void RiskSpec::validate() const {
  if (uses_alpha() && !(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("risk.alpha must lie in (0, 1)");
  if ((kind == RiskKind::MeanES || kind == RiskKind::MeanVariance) && !(lambda >= 0.0))
    throw std::invalid_argument("risk.lambda must be >= 0");
  if (kind == RiskKind::Entropic && !(gamma > 0.0))
    throw std::invalid_argument("risk.gamma must be > 0");
  if (upsilon_bracket && !(upsilon_bracket->lo < upsilon_bracket->hi))
    throw std::invalid_argument("risk.upsilon_lo must be < risk.upsilon_hi");
}

namespace {

double es_term(double y, double upsilon, double alpha) {
  const double excess = y - upsilon;
  return upsilon + (excess > 0.0 ? excess / (1.0 - alpha) : 0.0);
}

double es_term_subgrad(double y, double upsilon, double alpha) {
  return 1.0 - (y > upsilon ? 1.0 / (1.0 - alpha) : 0.0);
}

}  // namespace

double eval_f(const RiskSpec& spec, double y, double upsilon) {
  const double d = y - upsilon;
  switch (spec.kind) {
    case RiskKind::Expectation:
      return y;
    case RiskKind::ES:
      return es_term(y, upsilon, spec.alpha);
    case RiskKind::Variance:
      return d * d;
    case RiskKind::MAD:
      return std::abs(d);
    case RiskKind::AsymVariance:
      return (y >= upsilon ? spec.alpha : 1.0 - spec.alpha) * d * d;
    case RiskKind::MeanES:
      return y + spec.lambda * es_term(y, upsilon, spec.alpha);
    case RiskKind::MeanVariance:
      return y + spec.lambda * d * d;
    case RiskKind::Entropic:
      return std::exp(spec.gamma * y);
    case RiskKind::EVaR:
      if (y < 0.0)
        throw std::domain_error("evar scoring requires nonnegative costs");
      return std::exp(std::exp(upsilon) * y) / spec.alpha;
  }
  return 0.0;
}

double eval_h(const RiskSpec& spec, double x, double upsilon) {
  switch (spec.kind) {
    case RiskKind::Entropic:
      if (!(x > 0.0)) throw std::domain_error("entropic transform needs x > 0");
      return std::log(x) / spec.gamma;
    case RiskKind::EVaR:
      if (!(x > 0.0)) throw std::domain_error("evar transform needs x > 0");
      return std::exp(-upsilon) * std::log(x);
    default:
      return x;
  }
}

double dh_dx(const RiskSpec& spec, double x, double upsilon) {
  switch (spec.kind) {
    case RiskKind::Entropic:
      if (!(x > 0.0)) throw std::domain_error("entropic transform needs x > 0");
      return 1.0 / (spec.gamma * x);
    case RiskKind::EVaR:
      if (!(x > 0.0)) throw std::domain_error("evar transform needs x > 0");
      return std::exp(-upsilon) / x;
    default:
      return 1.0;
  }
}

double dh_dupsilon(const RiskSpec& spec, double x, double upsilon) {
  if (spec.kind == RiskKind::EVaR) {
    if (!(x > 0.0)) throw std::domain_error("evar transform needs x > 0");
    return -std::exp(-upsilon) * std::log(x);
  }
  return 0.0;
}

double subgrad_f_upsilon(const RiskSpec& spec, double y, double upsilon) {
  const double d = y - upsilon;
  switch (spec.kind) {
    case RiskKind::Expectation:
    case RiskKind::Entropic:
      return 0.0;
    case RiskKind::ES:
      return es_term_subgrad(y, upsilon, spec.alpha);
    case RiskKind::Variance:
      return -2.0 * d;
    case RiskKind::MAD:
      return d > 0.0 ? -1.0 : (d < 0.0 ? 1.0 : 0.0);
    case RiskKind::AsymVariance:
      if (d > 0.0) return -2.0 * spec.alpha * d;
      if (d < 0.0) return -2.0 * (1.0 - spec.alpha) * d;
      return 0.0;
    case RiskKind::MeanES:
      return spec.lambda * es_term_subgrad(y, upsilon, spec.alpha);
    case RiskKind::MeanVariance:
      return -2.0 * spec.lambda * d;
    case RiskKind::EVaR: {
      if (y < 0.0)
        throw std::domain_error("evar scoring requires nonnegative costs");
      const double e = std::exp(upsilon);
      return e * y * std::exp(e * y) / spec.alpha;
    }
  }
  return 0.0;
}

UpsilonBracket upsilon_bracket(const RiskSpec& spec, const CostBounds& bounds) {
  if (!(bounds.y_lo < bounds.y_hi))
    throw std::invalid_argument("cost bounds must satisfy y_lo < y_hi");
  if (spec.upsilon_bracket) {
    const Interval& b = *spec.upsilon_bracket;
    return UpsilonBracket{b.lo, b.hi, true};
  }
  if (spec.kind == RiskKind::EVaR)
    throw std::invalid_argument(
        "evar has no finite upsilon bracket; configure risk.upsilon_lo/hi");
  // For the remaining kinds the per-law minimizer is a quantile or mean of Y,
  // hence inside the cost support (or the objective is constant in upsilon).
  return UpsilonBracket{bounds.y_lo, bounds.y_hi, false};
}

double empirical_quantile(std::span<const double> samples, double alpha) {
  if (samples.empty()) throw std::invalid_argument("empirical_quantile: empty sample");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("empirical_quantile: alpha must lie in (0, 1)");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto idx = static_cast<std::size_t>(std::ceil(alpha * n));
  if (idx < 1) idx = 1;
  if (idx > sorted.size()) idx = sorted.size();
  return sorted[idx - 1];
}

namespace {

// Ternary search for the minimum of a unimodal objective on [lo, hi].
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

EmpiricalRisk empirical_risk(const RiskSpec& spec, std::span<const double> samples,
                             int grid_n) {
  if (samples.empty()) throw std::invalid_argument("empirical_risk: empty sample");
  if (grid_n < 2) throw std::invalid_argument("empirical_risk: grid_n must be >= 2");

  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  CostBounds bounds{*mn, *mx};
  if (!(bounds.y_lo < bounds.y_hi)) {
    // Point mass: widen so the bracket is nondegenerate and contains the atom.
    bounds.y_lo -= 0.5;
    bounds.y_hi += 0.5;
  }
  const UpsilonBracket bracket = upsilon_bracket(spec, bounds);

  const auto objective = [&](double upsilon) {
    double acc = 0.0;
    for (double y : samples) acc += eval_f(spec, y, upsilon);
    return eval_h(spec, acc / static_cast<double>(samples.size()), upsilon);
  };

  double best_u = bracket.lo;
  double best_val = objective(best_u);
  int best_j = 0;
  const double step = (bracket.hi - bracket.lo) / static_cast<double>(grid_n - 1);
  for (int j = 1; j < grid_n; ++j) {
    const double u = bracket.lo + step * j;
    const double v = objective(u);
    if (v < best_val) {
      best_val = v;
      best_u = u;
      best_j = j;
    }
  }

  if (spec.identity_h()) {
    const double lo = bracket.lo + step * std::max(0, best_j - 1);
    const double hi = bracket.lo + step * std::min(grid_n - 1, best_j + 1);
    const double u = ternary_min(objective, lo, hi);
    const double v = objective(u);
    if (v < best_val) {
      best_val = v;
      best_u = u;
    }
  }

  // Closed-form minimizers, cross-checked against the grid result. The grid
  // wins only when it is strictly better beyond rounding noise (flat minima
  // make the two objectives coincide up to the last few ulps).
  std::optional<double> closed;
  if (spec.kind == RiskKind::ES || spec.kind == RiskKind::MeanES) {
    closed = empirical_quantile(samples, spec.alpha);
  } else if (spec.kind == RiskKind::Variance || spec.kind == RiskKind::MeanVariance) {
    double mean = 0.0;
    for (double y : samples) mean += y;
    closed = mean / static_cast<double>(samples.size());
  }
  if (closed) {
    const double v = objective(*closed);
    if (v <= best_val + 1e-9 * (1.0 + std::abs(best_val))) {
      best_val = std::min(v, best_val);
      best_u = *closed;
    }
  }

  return EmpiricalRisk{best_val, best_u};
}

}  // namespace riskgrad
