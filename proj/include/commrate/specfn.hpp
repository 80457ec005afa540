#pragma once

// Special functions for the Beta layer: log-gamma, the regularized incomplete
// beta function I_x(a, b) and its inverse.
//
// I_x(a, b) is evaluated with the modified Lentz continued fraction on the
// side of the symmetry point (a + 1) / (a + b + 2) where it converges fast;
// the other tail follows from I_x(a, b) = 1 - I_{1-x}(b, a). Both tails are
// available in log form, so callers that divide by a vanishing survival
// probability never see an underflow.

#include <cmath>
#include <limits>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "commrate/errors.hpp"

namespace commrate {

struct ToleranceConfig {
  double rel_tol = 1e-12;  // relative step tolerance of the inverse
  int max_iter = 300;      // budget for the continued fraction and Newton
};

inline void validate(const ToleranceConfig& tol) {
  detail::require(tol.rel_tol > 0.0, "ToleranceConfig: rel_tol must be > 0");
  detail::require(tol.max_iter >= 1, "ToleranceConfig: max_iter must be >= 1");
}

inline double log_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw DomainError("log_gamma: argument must be a finite positive number");
  return boost::math::lgamma(x);
}

inline double log_beta(double a, double b) {
  return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

namespace detail {

inline void check_shape(double a, double b, const char* who) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw DomainError(std::string(who) + ": shape parameters must be finite and > 0");
}

// Continued fraction of I_x(a, b) = x^a (1-x)^b / (a B(a, b)) * cf.
// Converges quickly for x < (a + 1) / (a + b + 2).
inline double beta_cf(double x, double a, double b, int max_iter = 300) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 4.0 * std::numeric_limits<double>::epsilon();
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) <= eps) return h;
  }
  throw ConvergenceError("reg_inc_beta: continued fraction did not converge");
}

// log of x^a (1-x)^b / B(a, b)
inline double log_front(double x, double a, double b, double lbeta) {
  return a * std::log(x) + b * std::log1p(-x) - lbeta;
}

inline bool use_lower_fraction(double x, double a, double b) {
  return x < (a + 1.0) / (a + b + 2.0);
}

}  // namespace detail

// Both tails of the Beta(a, b) CDF at x, each also in log form.
struct BetaTails {
  double lower = 0.0;  // I_x(a, b)
  double upper = 1.0;  // 1 - I_x(a, b)
  double log_lower = -std::numeric_limits<double>::infinity();
  double log_upper = 0.0;
};

inline BetaTails beta_tails(double x, double a, double b, double lbeta, int max_iter = 300) {
  BetaTails t;
  if (x <= 0.0) return t;
  if (x >= 1.0) {
    t.lower = 1.0;
    t.upper = 0.0;
    t.log_lower = 0.0;
    t.log_upper = -std::numeric_limits<double>::infinity();
    return t;
  }
  const double front = detail::log_front(x, a, b, lbeta);
  if (detail::use_lower_fraction(x, a, b)) {
    t.log_lower = front + std::log(detail::beta_cf(x, a, b, max_iter) / a);
    t.lower = std::exp(t.log_lower);
    t.upper = 1.0 - t.lower;
    t.log_upper = std::log1p(-t.lower);
  } else {
    t.log_upper = front + std::log(detail::beta_cf(1.0 - x, b, a, max_iter) / b);
    t.upper = std::exp(t.log_upper);
    t.lower = 1.0 - t.upper;
    t.log_lower = std::log1p(-t.upper);
  }
  return t;
}

inline double reg_inc_beta(double x, double a, double b, const ToleranceConfig& tol = {}) {
  detail::check_shape(a, b, "reg_inc_beta");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("reg_inc_beta: x must lie in [0, 1]");
  return beta_tails(x, a, b, log_beta(a, b), tol.max_iter).lower;
}

// 1 - I_x(a, b) without cancellation.
inline double reg_inc_beta_upper(double x, double a, double b, const ToleranceConfig& tol = {}) {
  detail::check_shape(a, b, "reg_inc_beta_upper");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("reg_inc_beta_upper: x must lie in [0, 1]");
  return beta_tails(x, a, b, log_beta(a, b), tol.max_iter).upper;
}

namespace detail {

// Initial guess for I_x(a, b) = p (Numerical Recipes, 3rd ed., 6.14).
inline double inv_beta_guess(double p, double a, double b, double lbeta) {
  double x;
  if (a >= 1.0 && b >= 1.0) {
    const double pp = (p < 0.5) ? p : 1.0 - p;
    const double t = std::sqrt(-2.0 * std::log(pp));
    x = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
    if (p < 0.5) x = -x;
    const double al = (x * x - 3.0) / 6.0;
    const double h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0));
    const double w = (x * std::sqrt(al + h) / h) -
                     (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) * (al + 5.0 / 6.0 - 2.0 / (3.0 * h));
    x = a / (a + b * std::exp(2.0 * w));
  } else {
    const double lna = std::log(a / (a + b));
    const double lnb = std::log(b / (a + b));
    const double t = std::exp(a * lna) / a;
    const double u = std::exp(b * lnb) / b;
    const double w = t + u;
    if (p < t / w)
      x = std::pow(a * w * p, 1.0 / a);
    else
      x = 1.0 - std::pow(b * w * (1.0 - p), 1.0 / b);
  }
  // The power-law tail is exact to leading order; prefer it far out.
  const double tail = std::exp((std::log(p) + std::log(a) + lbeta) / a);
  if (tail < 1e-3) x = tail;
  if (!(x > 0.0) || !(x < 1.0) || !std::isfinite(x)) x = a / (a + b);
  return x;
}

// Solves I_x(a, b) = p for p <= 1/2 by Newton's method on (log x, log I),
// safeguarded by bisection on the log-x bracket.
inline double inv_lower_tail(double p, double a, double b, double lbeta, const ToleranceConfig& tol) {
  if (p <= 0.0) return 0.0;
  const double log_p = std::log(p);
  double lo = std::log(std::numeric_limits<double>::min());
  double hi = 0.0;
  double t = std::log(inv_beta_guess(p, a, b, lbeta));
  if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
  for (int it = 0; it < tol.max_iter; ++it) {
    const double x = std::exp(t);
    const BetaTails tails = beta_tails(x, a, b, lbeta, tol.max_iter);
    const double g = tails.log_lower - log_p;
    if (g > 0.0)
      hi = t;
    else
      lo = t;
    if (g == 0.0) return x;
    // d log I / d log x = x f(x) / I_x
    const double slope = std::exp(a * t + (b - 1.0) * std::log1p(-x) - lbeta - tails.log_lower);
    double next = t - g / slope;
    if (!std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
    const double step = next - t;
    t = next;
    if (std::fabs(step) <= tol.rel_tol || hi - lo <= tol.rel_tol) return std::exp(t);
  }
  throw ConvergenceError("inv_reg_inc_beta: Newton iteration did not converge");
}

}  // namespace detail

// x in [0, 1] with I_x(a, b) = u.
inline double inv_reg_inc_beta(double u, double a, double b, const ToleranceConfig& tol = {}) {
  detail::check_shape(a, b, "inv_reg_inc_beta");
  validate(tol);
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("inv_reg_inc_beta: u must lie in [0, 1]");
  if (u == 0.0) return 0.0;
  if (u == 1.0) return 1.0;
  const double lbeta = log_beta(a, b);
  if (u <= 0.5) return detail::inv_lower_tail(u, a, b, lbeta, tol);
  return 1.0 - detail::inv_lower_tail(1.0 - u, b, a, lbeta, tol);
}

// x in [0, 1] with 1 - I_x(a, b) = q; accurate when q is tiny.
inline double inv_reg_inc_beta_upper(double q, double a, double b, const ToleranceConfig& tol = {}) {
  detail::check_shape(a, b, "inv_reg_inc_beta_upper");
  validate(tol);
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("inv_reg_inc_beta_upper: q must lie in [0, 1]");
  if (q == 0.0) return 1.0;
  if (q == 1.0) return 0.0;
  const double lbeta = log_beta(a, b);
  if (q <= 0.5) return 1.0 - detail::inv_lower_tail(q, b, a, lbeta, tol);
  return detail::inv_lower_tail(1.0 - q, a, b, lbeta, tol);
}

}  // namespace commrate
