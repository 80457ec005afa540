#pragma once

// Reference computations for tests. Nothing here calls into the library's
// numerical kernels: densities and tails come from Boost.Math, integrals from
// adaptive Simpson or tanh-sinh, derivatives from finite differences and
// optima from brute-force grids.

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>

namespace oracle {

// ---- Beta(a, b) via Boost ----

inline double pdf(double a, double b, double x) {
  return boost::math::pdf(boost::math::beta_distribution<double>(a, b), x);
}
inline double cdf(double a, double b, double x) { return boost::math::ibeta(a, b, x); }
inline double sf(double a, double b, double x) { return boost::math::ibetac(a, b, x); }

// E[X | X >= x] from the incomplete-beta moment identity.
inline double truncated_mean(double a, double b, double x) {
  return a / (a + b) * boost::math::ibetac(a + 1.0, b, x) / boost::math::ibetac(a, b, x);
}

inline double truncated_second_moment(double a, double b, double x) {
  return a * (a + 1.0) / ((a + b) * (a + b + 1.0)) * boost::math::ibetac(a + 2.0, b, x) /
         boost::math::ibetac(a, b, x);
}

// ---- closed-form CARA willingness to pay, straight from the formula ----

inline double wtp(double rho, double l, double theta, double r) {
  const long double num = theta * std::exp(static_cast<long double>(rho) * l) + (1.0L - theta);
  const long double den = theta * std::exp(static_cast<long double>(rho) * (l - r)) + (1.0L - theta);
  return static_cast<double>(std::log(num / den) / rho);
}

// ---- integration ----

namespace detail {

inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                           double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-12,
                               int max_depth = 50) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// int_lo^1 g(x) dBeta(a, b)(x) in theta-space by adaptive Simpson. The
// interval is split at the mean and each half is mapped so the endpoint
// power singularities disappear: x = s^(1/a) on the left, 1 - x = t^(1/b) on
// the right. Pieces are further split into subintervals to resolve peaks.
inline double beta_expectation(double a, double b, double lo, const std::function<double(double)>& g,
                               double tol = 1e-13) {
  const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const double c = std::max(lo, a / (a + b));
  double total = 0.0;
  if (lo < c) {
    // s in [lo^a, c^a], x = s^(1/a), x^(a-1) dx = ds / a
    auto h = [&](double s) {
      if (s <= 0.0) return a >= 1.0 ? 0.0 : g(0.0) * std::exp(-lbeta) / a;
      const double x = std::pow(s, 1.0 / a);
      return g(x) * std::exp((b - 1.0) * std::log1p(-x) - lbeta) / a;
    };
    const double s0 = std::pow(lo, a);
    const double s1 = std::pow(c, a);
    const int pieces = 64;
    for (int k = 0; k < pieces; ++k)
      total += adaptive_simpson(h, s0 + (s1 - s0) * k / pieces, s0 + (s1 - s0) * (k + 1) / pieces, tol / pieces);
  }
  {
    // t in [0, (1-c)^b], 1 - x = t^(1/b), (1-x)^(b-1) dx = -dt / b
    auto h = [&](double t) {
      const double y = t <= 0.0 ? 0.0 : std::pow(t, 1.0 / b);
      const double x = 1.0 - y;
      if (x <= 0.0) return 0.0;
      return g(x) * std::exp((a - 1.0) * std::log(x) - lbeta) / b;
    };
    const double t1 = std::pow(1.0 - c, b);
    const int pieces = 64;
    for (int k = 0; k < pieces; ++k)
      total += adaptive_simpson(h, t1 * k / pieces, t1 * (k + 1) / pieces, tol / pieces);
  }
  return total;
}

// Same integral by Boost tanh-sinh on the raw density.
inline double beta_expectation_tanh_sinh(double a, double b, double lo, const std::function<double(double)>& g) {
  boost::math::quadrature::tanh_sinh<double> ts;
  auto f = [&](double x) { return g(x) * pdf(a, b, x); };
  return ts.integrate(f, lo, 1.0);
}

// ---- derivatives ----

inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Richardson-extrapolated central difference.
inline double richardson_diff(const std::function<double(double)>& f, double x, double h) {
  const double d1 = central_diff(f, x, h);
  const double d2 = central_diff(f, x, 0.5 * h);
  return (4.0 * d2 - d1) / 3.0;
}

inline double second_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

// ---- brute-force optimization ----

struct GridMax {
  double x;
  double value;
};

// Maximum over lo + (hi - lo) k / (n - 1).
inline GridMax grid_max(const std::function<double(double)>& f, double lo, double hi, int n) {
  GridMax best{lo, -std::numeric_limits<double>::infinity()};
  for (int k = 0; k < n; ++k) {
    const double x = lo + (hi - lo) * k / (n - 1);
    const double v = f(x);
    if (v > best.value) best = {x, v};
  }
  return best;
}

struct GridMax2 {
  double x;
  double y;
  double value;
};

inline GridMax2 grid_max2(const std::function<double(double, double)>& f, double xlo, double xhi, double ylo,
                          double yhi, int n) {
  GridMax2 best{xlo, ylo, -std::numeric_limits<double>::infinity()};
  for (int j = 0; j < n; ++j) {
    const double y = ylo + (yhi - ylo) * j / (n - 1);
    for (int i = 0; i < n; ++i) {
      const double x = xlo + (xhi - xlo) * i / (n - 1);
      const double v = f(x, y);
      if (v > best.value) best = {x, y, v};
    }
  }
  return best;
}

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(gen);
}

}  // namespace oracle
