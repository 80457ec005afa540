#pragma once

// Beta-distributed agent types: density, CDF and quantiles, the EZ-square
// reparametrization, and the truncated-mean calculus
//
//   A(t) = E[X | X >= t],  m(t) = A(t) - t,  H(t) = f(t) / (1 - F(t)),
//   A'(t) = H(t) m(t).
//
// The truncated mean uses  int_t^1 x f = E (1 - I_t(a + 1, b))  rewritten with
// the recurrence of I in a, which leaves
//
//   A(t) = E + t^a (1-t)^b / ((a + b) B(a, b) (1 - F(t))).
//
// Past the symmetry point of the continued fraction the upper tail and m are
// taken from the reflected distribution instead, which keeps m(t) accurate to
// full relative precision as t -> 1.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "commrate/errors.hpp"
#include "commrate/specfn.hpp"

namespace commrate {

class BetaParams {
 public:
  BetaParams(double alpha, double beta) : alpha_(alpha), beta_(beta) {
    detail::require(alpha > 0.0 && std::isfinite(alpha), "BetaParams: alpha must be finite and > 0");
    detail::require(beta > 0.0 && std::isfinite(beta), "BetaParams: beta must be finite and > 0");
  }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

 private:
  double alpha_;
  double beta_;
};

// A point of the EZ-square: e is the mean A(0), z the slope A'(1).
class EZPoint {
 public:
  EZPoint(double e, double z) : e_(e), z_(z) {
    detail::require(e > 0.0 && e < 1.0, "EZPoint: E must lie in (0, 1)");
    detail::require(z > 0.0 && z < 1.0, "EZPoint: Z must lie in (0, 1)");
  }
  double e() const { return e_; }
  double z() const { return z_; }

 private:
  double e_;
  double z_;
};

inline EZPoint ez_from_ab(const BetaParams& p) {
  return EZPoint(p.alpha() / (p.alpha() + p.beta()), p.beta() / (p.beta() + 1.0));
}

inline BetaParams ab_from_ez(const EZPoint& ez) {
  if (ez.z() >= 1.0 - 1e-9) throw RangeError("ab_from_ez: Z too close to 1 (Dirac limit)");
  const double e = ez.e();
  const double z = ez.z();
  return BetaParams(e * z / ((1.0 - e) * (1.0 - z)), z / (1.0 - z));
}

// Immutable Beta(alpha, beta) measure over types in [0, 1].
class TypeMeasure {
 public:
  explicit TypeMeasure(const BetaParams& p, double taylor_eps = 1e-6)
      : params_(p), ez_(ez_from_ab(p)), taylor_eps_(taylor_eps), log_beta_(log_beta(p.alpha(), p.beta())) {
    detail::require(taylor_eps > 0.0 && taylor_eps < 1e-3, "TypeMeasure: taylor_eps must lie in (0, 1e-3)");
  }

  static TypeMeasure from_ez(const EZPoint& ez, double taylor_eps = 1e-6) {
    return TypeMeasure(ab_from_ez(ez), taylor_eps);
  }

  const BetaParams& params() const { return params_; }
  const EZPoint& ez() const { return ez_; }
  double alpha() const { return params_.alpha(); }
  double beta() const { return params_.beta(); }
  double mean() const { return ez_.e(); }
  double tail_slope() const { return ez_.z(); }
  double taylor_eps() const { return taylor_eps_; }
  double log_beta_fn() const { return log_beta_; }

 private:
  BetaParams params_;
  EZPoint ez_;
  double taylor_eps_;
  double log_beta_;
};

namespace detail {

inline void check_theta(double theta, const char* who) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw DomainError(std::string(who) + ": theta must lie in [0, 1]");
}

// Everything the truncated calculus needs at one interior point, computed
// from a single continued-fraction evaluation (two in the upper branch).
struct TailPoint {
  double theta = 0.0;
  double survival = 1.0;      // 1 - F
  double log_survival = 0.0;
  double density = 0.0;       // f
  double avg = 0.0;           // A, exact (no Taylor switch)
  double residual = 0.0;      // m = A - theta
  double hazard = 0.0;        // f / (1 - F)
};

inline TailPoint tail_point(const TypeMeasure& m, double theta) {
  const double a = m.alpha();
  const double b = m.beta();
  const double lb = m.log_beta_fn();
  const double y = 1.0 - theta;
  TailPoint p;
  p.theta = theta;
  const double front = log_front(theta, a, b, lb);  // log t^a (1-t)^b / B
  if (use_lower_fraction(theta, a, b)) {
    const double lower = std::exp(front + std::log(beta_cf(theta, a, b) / a));
    p.survival = 1.0 - lower;
    p.log_survival = std::log1p(-lower);
    const double ratio = std::exp(front - p.log_survival);
    p.avg = m.mean() + ratio / (a + b);
    p.residual = p.avg - theta;
    p.hazard = ratio / (theta * y);
  } else {
    const double cf0 = beta_cf(y, b, a);
    const double cf1 = beta_cf(y, b + 1.0, a);
    p.log_survival = front + std::log(cf0 / b);
    p.survival = std::exp(p.log_survival);
    // 1 - A = E[1 - X | 1 - X <= y] = y Z cf1 / cf0
    const double shortfall = m.tail_slope() * cf1 / cf0;
    p.residual = y * (1.0 - shortfall);
    p.avg = 1.0 - y * shortfall;
    p.hazard = b / (cf0 * theta * y);
  }
  p.density = std::exp(front) / (theta * y);
  return p;
}

}  // namespace detail

inline double pdf(const TypeMeasure& m, double theta) {
  detail::check_theta(theta, "pdf");
  const double a = m.alpha();
  const double b = m.beta();
  if ((theta == 0.0 && a < 1.0) || (theta == 1.0 && b < 1.0))
    throw DomainError("pdf: density has a pole at this endpoint");
  if (theta == 0.0) return a == 1.0 ? std::exp(-m.log_beta_fn()) : 0.0;
  if (theta == 1.0) return b == 1.0 ? std::exp(-m.log_beta_fn()) : 0.0;
  return std::exp((a - 1.0) * std::log(theta) + (b - 1.0) * std::log1p(-theta) - m.log_beta_fn());
}

inline double cdf(const TypeMeasure& m, double theta) {
  detail::check_theta(theta, "cdf");
  return beta_tails(theta, m.alpha(), m.beta(), m.log_beta_fn()).lower;
}

// 1 - F(theta), accurate in the far upper tail.
inline double survival(const TypeMeasure& m, double theta) {
  detail::check_theta(theta, "survival");
  return beta_tails(theta, m.alpha(), m.beta(), m.log_beta_fn()).upper;
}

inline double quantile(const TypeMeasure& m, double u, const ToleranceConfig& tol = {}) {
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("quantile: u must lie in [0, 1]");
  if (u == 0.0) return 0.0;
  if (u == 1.0) return 1.0;
  if (u <= 0.5) return detail::inv_lower_tail(u, m.alpha(), m.beta(), m.log_beta_fn(), tol);
  return 1.0 - detail::inv_lower_tail(1.0 - u, m.beta(), m.alpha(), m.log_beta_fn(), tol);
}

// The type t with 1 - F(t) = q.
inline double quantile_upper(const TypeMeasure& m, double q, const ToleranceConfig& tol = {}) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile_upper: q must lie in [0, 1]");
  if (q == 0.0) return 1.0;
  if (q == 1.0) return 0.0;
  if (q <= 0.5) return 1.0 - detail::inv_lower_tail(q, m.beta(), m.alpha(), m.log_beta_fn(), tol);
  return detail::inv_lower_tail(1.0 - q, m.alpha(), m.beta(), m.log_beta_fn(), tol);
}

// Average probability of damage of the segment [theta, 1]. Within taylor_eps
// of 1 both integrals vanish and the first-order expansion 1 - Z (1 - theta)
// is used instead.
inline double avg_damage(const TypeMeasure& m, double theta) {
  detail::check_theta(theta, "avg_damage");
  if (theta == 0.0) return m.mean();
  if (theta >= 1.0 - m.taylor_eps()) return 1.0 - m.tail_slope() * (1.0 - theta);
  return detail::tail_point(m, theta).avg;
}

// A(theta) and 1 - F(theta) together, sharing one kernel evaluation.
struct SegmentStats {
  double avg;
  double survival;
};

inline SegmentStats segment_stats(const TypeMeasure& m, double theta) {
  detail::check_theta(theta, "segment_stats");
  if (theta == 0.0) return {m.mean(), 1.0};
  if (theta == 1.0) return {1.0, 0.0};
  if (theta >= 1.0 - m.taylor_eps())
    return {1.0 - m.tail_slope() * (1.0 - theta), beta_tails(theta, m.alpha(), m.beta(), m.log_beta_fn()).upper};
  const auto p = detail::tail_point(m, theta);
  return {p.avg, p.survival};
}

inline double mean_residual(const TypeMeasure& m, double theta) {
  detail::check_theta(theta, "mean_residual");
  if (theta == 0.0) return m.mean();
  if (theta >= 1.0 - m.taylor_eps()) return (1.0 - m.tail_slope()) * (1.0 - theta);
  return detail::tail_point(m, theta).residual;
}

// f / (1 - F); +inf at theta = 1, and at theta = 0 when alpha < 1.
inline double hazard(const TypeMeasure& m, double theta) {
  detail::check_theta(theta, "hazard");
  if (theta == 1.0) return std::numeric_limits<double>::infinity();
  if (theta == 0.0) {
    if (m.alpha() < 1.0) return std::numeric_limits<double>::infinity();
    return pdf(m, 0.0);
  }
  return detail::tail_point(m, theta).hazard;
}

// A'(theta) = H m. At theta = 1 this is Z; at theta = 0 it is 0 for alpha > 1,
// Z for alpha = 1 and +inf (vertical tangent) for alpha < 1.
inline double avg_damage_deriv(const TypeMeasure& m, double theta) {
  detail::check_theta(theta, "avg_damage_deriv");
  if (theta == 1.0) return m.tail_slope();
  if (theta == 0.0) {
    if (m.alpha() > 1.0) return 0.0;
    if (m.alpha() == 1.0) return m.tail_slope();
    return std::numeric_limits<double>::infinity();
  }
  const auto p = detail::tail_point(m, theta);
  const double residual = theta >= 1.0 - m.taylor_eps() ? (1.0 - m.tail_slope()) * (1.0 - theta) : p.residual;
  return p.hazard * residual;
}

// A'' = A' f'/f + H (2 A' - 1), from H' = H (f'/f + H) and m' = A' - 1.
inline double avg_damage_second_deriv(const TypeMeasure& m, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("avg_damage_second_deriv: theta must lie in (0, 1)");
  const auto p = detail::tail_point(m, theta);
  const double slope = p.hazard * p.residual;
  const double log_density_slope = (m.alpha() - 1.0) / theta - (m.beta() - 1.0) / (1.0 - theta);
  return slope * log_density_slope + p.hazard * (2.0 * slope - 1.0);
}

// A'(1) for a density equivalent to (1 - t)^s near 1.
inline double docking_slope(double s) {
  if (!(s > -1.0)) throw DomainError("docking_slope: exponent must be > -1");
  return (s + 1.0) / (s + 2.0);
}

inline double variance_ez(const EZPoint& ez) {
  const double e = ez.e();
  const double z = ez.z();
  return e * (1.0 - e) * (1.0 - e) * (1.0 - z) / (1.0 - e * (1.0 - z));
}

inline double coeff_variation(const EZPoint& ez) { return std::sqrt(variance_ez(ez)) / ez.e(); }

struct MeanSd {
  double mean;
  double sd;
};

// Mean and standard deviation of the types in [theta, 1].
inline MeanSd cond_mean_sd(const TypeMeasure& m, double theta) {
  if (!(theta >= 0.0 && theta < 1.0)) throw DomainError("cond_mean_sd: theta must lie in [0, 1)");
  if (theta == 0.0) return {m.mean(), std::sqrt(variance_ez(m.ez()))};
  const double a = m.alpha();
  const double b = m.beta();
  const double y = 1.0 - theta;
  if (theta >= 1.0 - m.taylor_eps()) {
    // (1 - X) / y given X >= theta is asymptotically Beta(b, 1)
    return {1.0 - m.tail_slope() * y, y * std::sqrt(b / (b + 2.0)) / (b + 1.0)};
  }
  const auto p = detail::tail_point(m, theta);
  const double ratio = std::exp(detail::log_front(theta, a, b, m.log_beta_fn()) - p.log_survival);
  // E[X^2 | X >= t] = a (a+1) / ((a+b)(a+b+1)) (1 - I_t(a+2, b)) / (1 - F(t))
  const double second = a * (a + 1.0) / ((a + b) * (a + b + 1.0)) *
                        (1.0 + ratio / a + theta * ratio * (a + b) / (a * (a + 1.0)));
  const double var = second - p.avg * p.avg;
  return {p.avg, std::sqrt(var > 0.0 ? var : 0.0)};
}

// Shape classes of the EZ-square.
enum class RegionLabel {
  D,                // decreasing density (alpha < 1 < beta)
  I,                // increasing density (beta < 1 < alpha)
  U,                // U-shaped (alpha, beta < 1)
  A,                // single-peaked (alpha, beta > 1)
  PowerIncreasing,  // beta = 1 < alpha
  PowerDecreasing,  // alpha = 1 < beta
  PolarPole0,       // beta = 1 > alpha
  PolarPole1,       // alpha = 1 > beta
  Uniform,
};

inline std::string_view to_string(RegionLabel r) {
  switch (r) {
    case RegionLabel::D: return "D";
    case RegionLabel::I: return "I";
    case RegionLabel::U: return "U";
    case RegionLabel::A: return "A";
    case RegionLabel::PowerIncreasing: return "PowerIncreasing";
    case RegionLabel::PowerDecreasing: return "PowerDecreasing";
    case RegionLabel::PolarPole0: return "PolarPole0";
    case RegionLabel::PolarPole1: return "PolarPole1";
    case RegionLabel::Uniform: return "Uniform";
  }
  return "?";
}

inline RegionLabel classify_region(const EZPoint& ez) {
  constexpr double tie = 1e-12;
  const BetaParams p = ab_from_ez(ez);
  const int sa = std::fabs(p.alpha() - 1.0) <= tie ? 0 : (p.alpha() > 1.0 ? 1 : -1);
  const int sb = std::fabs(p.beta() - 1.0) <= tie ? 0 : (p.beta() > 1.0 ? 1 : -1);
  if (sa == 0 && sb == 0) return RegionLabel::Uniform;
  if (sa == 0) return sb > 0 ? RegionLabel::PowerDecreasing : RegionLabel::PolarPole1;
  if (sb == 0) return sa > 0 ? RegionLabel::PowerIncreasing : RegionLabel::PolarPole0;
  if (sa > 0) return sb > 0 ? RegionLabel::A : RegionLabel::I;
  return sb > 0 ? RegionLabel::D : RegionLabel::U;
}

struct ConvexityCell {
  EZPoint ez;
  double min_second_deriv;
  double argmin_theta;
};

struct ConvexityReport {
  std::vector<ConvexityCell> cells;
  double threshold = -1e-9;
  double worst = std::numeric_limits<double>::infinity();
  bool holds_on_grid = true;  // grid evidence only, not a proof
};

// Minimum of A'' over theta_grid at every EZ point. Only alpha >= 1 points are
// admissible (Z >= 1 - E).
inline ConvexityReport verify_convexity(std::span<const EZPoint> ez_grid, std::span<const double> theta_grid,
                                        double threshold = -1e-9) {
  ConvexityReport report;
  report.threshold = threshold;
  report.cells.reserve(ez_grid.size());
  for (const EZPoint& ez : ez_grid) {
    if (ez.z() < 1.0 - ez.e() - 1e-12)
      throw DomainError("verify_convexity: point has alpha < 1 (Z < 1 - E)");
  }
  for (const EZPoint& ez : ez_grid) {
    const TypeMeasure m = TypeMeasure::from_ez(ez);
    double lo = std::numeric_limits<double>::infinity();
    double at = 0.0;
    for (double t : theta_grid) {
      const double v = avg_damage_second_deriv(m, t);
      if (v < lo) {
        lo = v;
        at = t;
      }
    }
    report.cells.push_back({ez, lo, at});
    if (lo < report.worst) report.worst = lo;
    if (lo < threshold) report.holds_on_grid = false;
  }
  return report;
}

}  // namespace commrate
