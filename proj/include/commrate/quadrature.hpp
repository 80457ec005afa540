#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "commrate/errors.hpp"

namespace commrate {

// n-point Gauss-Legendre rule on [0, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int n) : nodes(n), weights(n) {
    detail::require(n >= 1, "GaussLegendre: need at least one node");
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0;
        double p1 = 0.0;
        for (int k = 1; k <= n; ++k) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
        }
        dp = n * (x * p0 - p1) / (x * x - 1.0);
        const double dx = p0 / dp;
        x -= dx;
        if (std::fabs(dx) < 1e-16) break;
      }
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      nodes[i] = 0.5 * (1.0 - x);
      nodes[n - 1 - i] = 0.5 * (1.0 + x);
      weights[i] = weights[n - 1 - i] = 0.5 * w;
    }
  }

  int size() const { return static_cast<int>(nodes.size()); }
};

// Sigmoidal grading phi(s) = s^3 / (s^3 + (1 - s)^3) on [0, 1]. Its derivative
// vanishes to second order at both ends, which turns algebraic endpoint
// singularities of the integrand into smooth ones.
struct GradedNode {
  double phi;         // phi(s)
  double one_minus;   // 1 - phi(s), computed without cancellation
  double jacobian;    // phi'(s)
};

inline GradedNode graded(double s) {
  const double a = s * s * s;
  const double t = 1.0 - s;
  const double b = t * t * t;
  const double den = a + b;
  return {a / den, b / den, 3.0 * s * s * t * t / (den * den)};
}

}  // namespace commrate
