#pragma once

// Deterministic bounded scalar maximization: an equispaced multistart scan
// followed by Brent's parabolic/golden-section search inside the bracket of
// the best sample. Ties always resolve toward the smaller abscissa.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "commrate/errors.hpp"

namespace commrate {

struct ScalarSearchConfig {
  int multistart_points = 200;
  double x_tol = 1e-10;
  int max_iter = 200;
};

struct ScalarMaximum {
  double x = 0.0;
  double value = -std::numeric_limits<double>::infinity();
  bool flat = false;        // max - min over the scan below 1e-14
  bool multimodal = false;  // two refined peaks > 1e-4 apart with values within 1e-10
  int evaluations = 0;
};

// Brent's method for a maximum of f on [lo, hi], started from x0.
template <class F>
std::pair<double, double> brent_maximize(F&& f, double lo, double hi, double x0, double f0, double x_tol,
                                         int max_iter, int* evaluations = nullptr) {
  constexpr double golden = 0.3819660112501051;
  const double eps = std::sqrt(std::numeric_limits<double>::epsilon());
  double a = lo;
  double b = hi;
  double x = x0;
  double w = x0;
  double v = x0;
  double fx = -f0;
  double fw = fx;
  double fv = fx;
  double d = 0.0;
  double e = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const double xm = 0.5 * (a + b);
    const double tol1 = eps * std::fabs(x) + x_tol / 3.0;
    const double tol2 = 2.0 * tol1;
    if (std::fabs(x - xm) <= tol2 - 0.5 * (b - a)) break;
    bool golden_step = true;
    if (std::fabs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::fabs(q);
      const double etemp = e;
      e = d;
      if (!(std::fabs(p) >= std::fabs(0.5 * q * etemp) || p <= q * (a - x) || p >= q * (b - x))) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = std::copysign(tol1, xm - x);
        golden_step = false;
      }
    }
    if (golden_step) {
      e = (x >= xm) ? a - x : b - x;
      d = golden * e;
    }
    const double u = (std::fabs(d) >= tol1) ? x + d : x + std::copysign(tol1, d);
    const double fu = -f(u);
    if (evaluations) ++*evaluations;
    if (fu <= fx) {
      if (u >= x)
        a = x;
      else
        b = x;
      v = w;
      fv = fw;
      w = x;
      fw = fx;
      x = u;
      fx = fu;
    } else {
      if (u < x)
        a = u;
      else
        b = u;
      if (fu <= fw || w == x) {
        v = w;
        fv = fw;
        w = u;
        fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }
  return {x, -fx};
}

// Global-ish maximum of f on [lo, hi].
template <class F>
ScalarMaximum maximize_scalar(F&& f, double lo, double hi, const ScalarSearchConfig& cfg = {}) {
  if (!(lo < hi)) throw DomainError("maximize_scalar: need lo < hi");
  detail::require(cfg.multistart_points >= 3, "maximize_scalar: need at least 3 multistart points");
  const int n = cfg.multistart_points;
  std::vector<double> xs(n);
  std::vector<double> fs(n);
  ScalarMaximum out;
  for (int i = 0; i < n; ++i) {
    xs[i] = (i == n - 1) ? hi : lo + (hi - lo) * i / (n - 1);
    fs[i] = f(xs[i]);
    if (std::isnan(fs[i])) fs[i] = -std::numeric_limits<double>::infinity();
  }
  out.evaluations = n;
  const auto [mn, mx] = std::minmax_element(fs.begin(), fs.end());
  out.flat = (*mx - *mn) < 1e-14;

  // Local maxima of the scan, best first (ties: smaller x).
  std::vector<int> peaks;
  for (int i = 0; i < n; ++i) {
    const bool left_ok = i == 0 || fs[i] >= fs[i - 1];
    const bool right_ok = i == n - 1 || fs[i] > fs[i + 1];
    if (left_ok && right_ok) peaks.push_back(i);
  }
  if (peaks.empty()) peaks.push_back(static_cast<int>(mx - fs.begin()));
  std::stable_sort(peaks.begin(), peaks.end(), [&](int a, int b) { return fs[a] > fs[b]; });
  if (peaks.size() > 2) peaks.resize(2);

  std::vector<std::pair<double, double>> refined;
  for (int i : peaks) {
    const double a = xs[std::max(i - 1, 0)];
    const double b = xs[std::min(i + 1, n - 1)];
    auto best = brent_maximize(f, a, b, xs[i], fs[i], cfg.x_tol, cfg.max_iter, &out.evaluations);
    if (!(best.second >= fs[i])) best = {xs[i], fs[i]};
    refined.push_back(best);
  }
  out.x = refined[0].first;
  out.value = refined[0].second;
  if (refined.size() > 1) {
    const auto& other = refined[1];
    if (other.second > out.value || (other.second == out.value && other.first < out.x)) {
      out.x = other.first;
      out.value = other.second;
    }
    out.multimodal = std::fabs(refined[0].first - other.first) > 1e-4 &&
                     std::fabs(refined[0].second - other.second) < 1e-10;
  }
  return out;
}

// Root of g on [lo, hi] given a sign change, to a few ulps.
template <class G>
double bracketed_root(G&& g, double lo, double hi, double glo, double ghi, int max_iter = 100) {
  std::uintmax_t iters = static_cast<std::uintmax_t>(max_iter);
  auto tol = [](double a, double b) {
    return std::fabs(b - a) <= 4.0 * std::numeric_limits<double>::epsilon() * std::fmax(std::fabs(a), std::fabs(b));
  };
  const auto bracket = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi, tol, iters);
  return 0.5 * (bracket.first + bracket.second);
}

}  // namespace commrate
