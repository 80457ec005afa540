#pragma once

// Economic functionals of a single contract (theta, r) offered to the segment
// [theta, 1]: cost, profit, elasticity of demand, policyholder surplus and
// social welfare, plus the residuals of the optimality conditions.

#include <cmath>
#include <limits>
#include <memory>

#include "commrate/errors.hpp"
#include "commrate/preference.hpp"
#include "commrate/quadrature.hpp"
#include "commrate/typedist.hpp"

namespace commrate {

struct QuadratureSpec {
  int nodes = 129;
  double abs_tol = 1e-10;
};

inline void validate(const QuadratureSpec& q) {
  detail::require(q.nodes >= 9 && q.nodes % 2 == 1, "QuadratureSpec: nodes must be odd and >= 9");
  detail::require(q.abs_tol > 0.0, "QuadratureSpec: abs_tol must be > 0");
}

class MarketModel {
 public:
  MarketModel(TypeMeasure measure, MarketPrimitives prim, QuadratureSpec quad = {})
      : measure_(std::move(measure)), prim_(prim), quad_(quad) {
    validate(quad_);
    rule_ = std::make_shared<const GaussLegendre>(quad_.nodes);
    check_rule_ = std::make_shared<const GaussLegendre>(2 * quad_.nodes + 1);
  }

  const TypeMeasure& measure() const { return measure_; }
  const MarketPrimitives& prim() const { return prim_; }
  const QuadratureSpec& quad() const { return quad_; }
  const GaussLegendre& rule() const { return *rule_; }
  const GaussLegendre& check_rule() const { return *check_rule_; }

 private:
  TypeMeasure measure_;
  MarketPrimitives prim_;
  QuadratureSpec quad_;
  std::shared_ptr<const GaussLegendre> rule_;
  std::shared_ptr<const GaussLegendre> check_rule_;
};

namespace detail {

inline void check_segment(const MarketModel& mm, double theta, double r, const char* who) {
  check_contract(mm.prim(), theta, r, who);
}

}  // namespace detail

inline double marginal_cost(double theta, double r) { return theta * r; }

inline double avg_cost(const MarketModel& mm, double theta, double r) {
  detail::check_segment(mm, theta, r, "avg_cost");
  return r * avg_damage(mm.measure(), theta);
}

inline double total_cost(const MarketModel& mm, double theta, double r) {
  detail::check_segment(mm, theta, r, "total_cost");
  const auto s = segment_stats(mm.measure(), theta);
  return r * s.avg * s.survival;
}

// Premium minus average cost per policy.
inline double avg_profit(const MarketModel& mm, double theta, double r) {
  detail::check_segment(mm, theta, r, "avg_profit");
  return wtp(mm.prim(), theta, r) - r * avg_damage(mm.measure(), theta);
}

inline double profit(const MarketModel& mm, double theta, double r) {
  detail::check_segment(mm, theta, r, "profit");
  if (theta == 1.0) return 0.0;
  const auto s = segment_stats(mm.measure(), theta);
  return (wtp(mm.prim(), theta, r) - r * s.avg) * s.survival;
}

// d profit / d theta = (1 - F) d wtp / d theta - f (wtp - r theta).
inline double profit_dtheta(const MarketModel& mm, double theta, double r) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("profit_dtheta: theta must lie in (0, 1)");
  detail::check_segment(mm, theta, r, "profit_dtheta");
  const auto p = detail::tail_point(mm.measure(), theta);
  return p.survival * wtp_dtheta(mm.prim(), theta, r) - p.density * (wtp(mm.prim(), theta, r) - r * theta);
}

// d profit / d r = (1 - F) (d wtp / d r - A).
inline double profit_dr(const MarketModel& mm, double theta, double r) {
  detail::check_segment(mm, theta, r, "profit_dr");
  if (theta == 1.0) return 0.0;
  const auto s = segment_stats(mm.measure(), theta);
  return s.survival * (wtp_dr(mm.prim(), theta, r) - s.avg);
}

namespace detail {

inline void check_elasticity_args(const MarketModel& mm, double theta, double r, const char* who) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError(std::string(who) + ": undefined at theta in {0, 1}");
  if (!(r > 0.0 && r <= mm.prim().loss())) throw DomainError(std::string(who) + ": r must lie in (0, loss]");
}

}  // namespace detail

// Elasticity of take-up with respect to the premium along the segmentation:
// -H wtp / (d wtp / d theta), the product of a distribution term and a
// preference term.
inline double elasticity(const MarketModel& mm, double theta, double r) {
  detail::check_elasticity_args(mm, theta, r, "elasticity");
  const double h = hazard(mm.measure(), theta);
  const double dlog_wtp = wtp_dtheta(mm.prim(), theta, r) / wtp(mm.prim(), theta, r);
  return -h / dlog_wtp;
}

// Same quantity from the demand form Q'(theta) / (d wtp / d theta) * wtp / Q.
inline double elasticity_demand_form(const MarketModel& mm, double theta, double r) {
  detail::check_elasticity_args(mm, theta, r, "elasticity_demand_form");
  const auto p = detail::tail_point(mm.measure(), theta);
  const double slope = -p.density / wtp_dtheta(mm.prim(), theta, r);
  return slope * wtp(mm.prim(), theta, r) / p.survival;
}

struct QuadEstimate {
  double value;
  double diff;   // |primary - check rule|
  bool within_budget;
};

namespace detail {

// int_theta^1 wtp(x, r) dF(x) in CDF space: u = F(theta) + (1 - F(theta)) phi(s),
// with x = F^{-1}(u) evaluated from its upper tail.
inline double expected_wtp_rule(const MarketModel& mm, const GaussLegendre& rule, double theta, double r) {
  if (r == 0.0 || theta >= 1.0) return 0.0;
  const TypeMeasure& m = mm.measure();
  const double tail = survival(m, theta);
  if (tail == 0.0) return 0.0;
  const ToleranceConfig tol{};
  double acc = 0.0;
  for (int i = 0; i < rule.size(); ++i) {
    const GradedNode g = graded(rule.nodes[i]);
    const double x = quantile_upper(m, tail * g.one_minus, tol);
    acc += rule.weights[i] * g.jacobian * wtp(mm.prim(), std::fmax(x, theta), r);
  }
  return tail * acc;
}

}  // namespace detail

inline double expected_wtp(const MarketModel& mm, double theta, double r) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw DomainError("expected_wtp: theta must lie in [0, 1]");
  detail::check_segment(mm, theta, r, "expected_wtp");
  return detail::expected_wtp_rule(mm, mm.rule(), theta, r);
}

// expected_wtp with the (n, 2n + 1) node-doubling check.
inline QuadEstimate expected_wtp_checked(const MarketModel& mm, double theta, double r) {
  const double v = expected_wtp(mm, theta, r);
  const double w = detail::expected_wtp_rule(mm, mm.check_rule(), theta, r);
  const double diff = std::fabs(v - w);
  return {v, diff, diff <= 10.0 * mm.quad().abs_tol};
}

inline double surplus(const MarketModel& mm, double theta, double r) {
  const double ew = expected_wtp(mm, theta, r);
  if (theta >= 1.0) return 0.0;
  return ew - wtp(mm.prim(), theta, r) * survival(mm.measure(), theta);
}

inline double welfare(const MarketModel& mm, double theta, double r) {
  const double ew = expected_wtp(mm, theta, r);
  if (theta >= 1.0) return 0.0;
  const auto s = segment_stats(mm.measure(), theta);
  return ew - r * s.avg * s.survival;
}

// Profit when the premium is forced down to marginal cost theta r:
// -r m(theta) (1 - F(theta)), a deficit everywhere inside (0, 1).
inline double first_best_deficit(const MarketModel& mm, double theta, double r) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("first_best_deficit: theta must lie in (0, 1)");
  if (!(r > 0.0 && r <= mm.prim().loss())) throw DomainError("first_best_deficit: r must lie in (0, loss]");
  return -r * mean_residual(mm.measure(), theta) * survival(mm.measure(), theta);
}

// Optimality-condition residuals at (theta, r). A residual whose denominator
// vanishes is NaN.
struct Residuals {
  double lerner;   // wtp (1 + 1/eps) - theta r
  double foc_a;    // (wtp_theta - r A') / (wtp - r A) - H
  double foc_b;    // wtp_theta / (wtp - r theta) - H
  double foc_r;    // wtp_r - A
  double foc_a_rel;  // foc_a / H
  double foc_b_rel;  // foc_b / H
  double hazard;
};

namespace detail {

inline double ratio_or_nan(double num, double den) {
  return den == 0.0 ? std::numeric_limits<double>::quiet_NaN() : num / den;
}

}  // namespace detail

inline double lerner_residual(const MarketModel& mm, double theta, double r) {
  const double eps = elasticity(mm, theta, r);
  return wtp(mm.prim(), theta, r) * (1.0 + 1.0 / eps) - marginal_cost(theta, r);
}

inline double foc_residual_a(const MarketModel& mm, double theta, double r) {
  detail::check_elasticity_args(mm, theta, r, "foc_residual_a");
  const double w = wtp(mm.prim(), theta, r);
  const double num = wtp_dtheta(mm.prim(), theta, r) - r * avg_damage_deriv(mm.measure(), theta);
  return detail::ratio_or_nan(num, w - r * avg_damage(mm.measure(), theta)) - hazard(mm.measure(), theta);
}

inline double foc_residual_b(const MarketModel& mm, double theta, double r) {
  detail::check_elasticity_args(mm, theta, r, "foc_residual_b");
  const double w = wtp(mm.prim(), theta, r);
  return detail::ratio_or_nan(wtp_dtheta(mm.prim(), theta, r), w - r * theta) - hazard(mm.measure(), theta);
}

inline double foc_residual_r(const MarketModel& mm, double theta, double r) {
  detail::check_segment(mm, theta, r, "foc_residual_r");
  return wtp_dr(mm.prim(), theta, r) - avg_damage(mm.measure(), theta);
}

inline Residuals residuals(const MarketModel& mm, double theta, double r) {
  Residuals out{};
  out.hazard = hazard(mm.measure(), theta);
  out.lerner = lerner_residual(mm, theta, r);
  out.foc_a = foc_residual_a(mm, theta, r);
  out.foc_b = foc_residual_b(mm, theta, r);
  out.foc_r = foc_residual_r(mm, theta, r);
  out.foc_a_rel = out.foc_a / out.hazard;
  out.foc_b_rel = out.foc_b / out.hazard;
  return out;
}

}  // namespace commrate
