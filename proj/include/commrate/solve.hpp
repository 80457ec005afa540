#pragma once

// Optimal single contracts.
//
//  * inner problem: for a fixed indemnity r the insurer picks the segmentation
//    theta maximizing profit (theta = 1 means not trading);
//  * unregulated: the insurer picks (theta, r) jointly;
//  * regulated: a regulator picks r to maximize welfare, anticipating the
//    insurer's inner response theta*_r, which is re-solved from scratch at
//    every r.
//
// All searches are deterministic: scans on fixed grids, Brent refinement, and
// root polishing of the first-order conditions where they are smooth.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "commrate/errors.hpp"
#include "commrate/market.hpp"
#include "commrate/optimize.hpp"

namespace commrate {

struct SolverConfig {
  double theta_tol = 1e-10;
  double r_tol = 1e-8;
  int multistart_points = 200;
  int coarse_grid = 256;
  int refine_iters = 200;
  int scan_points = 4096;  // profitable_boundary
};

inline void validate(const SolverConfig& cfg) {
  detail::require(cfg.theta_tol > 0.0, "SolverConfig: theta_tol must be > 0");
  detail::require(cfg.r_tol > 0.0, "SolverConfig: r_tol must be > 0");
  detail::require(cfg.multistart_points >= 8, "SolverConfig: multistart_points must be >= 8");
  detail::require(cfg.coarse_grid >= 8, "SolverConfig: coarse_grid must be >= 8");
  detail::require(cfg.refine_iters >= 1, "SolverConfig: refine_iters must be >= 1");
  detail::require(cfg.scan_points >= 8, "SolverConfig: scan_points must be >= 8");
}

inline ScalarSearchConfig theta_search(const SolverConfig& cfg) {
  return {cfg.multistart_points, cfg.theta_tol, cfg.refine_iters};
}

// Profits below this (nondimensional) are treated as no trade.
inline constexpr double kProfitFloor = 1e-13;

enum class Regime { Regulated, Unregulated, FixedContract };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::Regulated: return "Regulated";
    case Regime::Unregulated: return "Unregulated";
    case Regime::FixedContract: return "FixedContract";
  }
  return "?";
}

struct OptimumReport {
  Regime regime = Regime::FixedContract;
  double theta_star = 1.0;
  double r_star = 0.0;
  double premium = 0.0;
  double take_up = 0.0;
  double profit = 0.0;
  double surplus = 0.0;
  double welfare = 0.0;
  double elasticity = std::numeric_limits<double>::quiet_NaN();
  double marginal_cost = 0.0;
  double cond_mean = std::numeric_limits<double>::quiet_NaN();
  double cond_sd = std::numeric_limits<double>::quiet_NaN();
  std::map<std::string, double> residuals;
  bool profitable = false;
  bool multimodal = false;
  bool quadrature_ok = true;
};

// Best segmentation for a fixed indemnity.
struct SegmentChoice {
  double theta = 1.0;
  double profit = 0.0;
  bool profitable = false;
  bool multimodal = false;
};

namespace detail {

// Moves a Brent estimate of the profit maximum onto the root of d profit /
// d theta when a sign change brackets it.
inline double polish_theta(const MarketModel& mm, double r, double theta, double value, double lo, double hi) {
  lo = std::max(lo, 1e-300);
  hi = std::min(hi, std::nextafter(1.0, 0.0));
  if (!(lo < theta && theta < hi)) return theta;
  auto g = [&](double t) { return profit_dtheta(mm, t, r); };
  const double glo = g(lo);
  const double ghi = g(hi);
  if (!(glo > 0.0 && ghi < 0.0)) return theta;
  const double root = bracketed_root(g, lo, hi, glo, ghi);
  return profit(mm, root, r) >= value - 1e-12 * std::fabs(value) ? root : theta;
}

inline SegmentChoice finish_segment(const MarketModel& mm, double r, double theta, double value, double lo,
                                    double hi, bool multimodal) {
  SegmentChoice c;
  c.multimodal = multimodal;
  if (!(value > kProfitFloor) || theta >= 1.0) return c;
  c.theta = polish_theta(mm, r, theta, value, lo, hi);
  c.profit = profit(mm, c.theta, r);
  c.profitable = c.profit > kProfitFloor;
  if (!c.profitable) c.theta = 1.0;
  return c;
}

// Segment choice restricted to [lo, hi], for refinement near a known optimum.
inline SegmentChoice local_segment(const MarketModel& mm, double r, double lo, double hi, double seed,
                                   const SolverConfig& cfg) {
  auto f = [&](double t) { return profit(mm, t, r); };
  const double fs = f(seed);
  const auto [x, v] = brent_maximize(f, lo, hi, seed, fs, cfg.theta_tol, cfg.refine_iters);
  return finish_segment(mm, r, x, v, lo, hi, false);
}

}  // namespace detail

inline SegmentChoice best_segment(const MarketModel& mm, double r, const SolverConfig& cfg = {}) {
  if (!(r > 0.0)) return {};
  auto f = [&](double t) { return profit(mm, t, r); };
  const ScalarMaximum sm = maximize_scalar(f, 0.0, 1.0, theta_search(cfg));
  const double h = 1.0 / (cfg.multistart_points - 1);
  return detail::finish_segment(mm, r, sm.x, sm.value, sm.x - h, sm.x + h, sm.multimodal);
}

// Lower end of the profitable interval adjacent to theta = 1 (when the
// profitability margin is positive), or of the rightmost profitable interval
// found on the scan grid otherwise.
inline std::optional<double> profitable_boundary(const MarketModel& mm, double r, const SolverConfig& cfg = {}) {
  if (!(r > 0.0 && r <= mm.prim().loss())) throw DomainError("profitable_boundary: r must lie in (0, loss]");
  auto gain = [&](double t) { return avg_profit(mm, t, r); };
  const int n = cfg.scan_points;
  auto bisect = [&](double bad, double good) {
    for (int it = 0; it < 200 && std::fabs(good - bad) > cfg.theta_tol; ++it) {
      const double mid = 0.5 * (bad + good);
      (gain(mid) > 0.0 ? good : bad) = mid;
    }
    return 0.5 * (bad + good);
  };
  if (profitability_margin(mm.prim(), mm.measure(), r) > 0.0) {
    // positive on a left neighbourhood of 1; find the first grid point in it
    double good = 1.0 - 1.0 / n;
    for (int k = 1; k <= 60 && !(gain(good) > 0.0); ++k) good = 1.0 - std::ldexp(1.0 / n, -k);
    if (!(gain(good) > 0.0)) return std::nullopt;
    for (int k = n - 1; k >= 0; --k) {
      const double t = static_cast<double>(k) / n;
      if (t >= good) continue;
      if (!(gain(t) > 0.0)) return bisect(t, good);
      good = t;
    }
    return 0.0;
  }
  for (int k = n - 1; k >= 0; --k) {
    const double t = static_cast<double>(k) / n;
    if (gain(t) > 0.0) {
      double good = t;
      int j = k - 1;
      for (; j >= 0 && gain(static_cast<double>(j) / n) > 0.0; --j) good = static_cast<double>(j) / n;
      if (j < 0) return 0.0;
      return bisect(static_cast<double>(j) / n, good);
    }
  }
  return std::nullopt;
}

inline OptimumReport make_report(const MarketModel& mm, Regime regime, double theta, double r, bool profitable) {
  OptimumReport rep;
  rep.regime = regime;
  rep.r_star = r;
  rep.profitable = profitable;
  if (!profitable) {
    rep.theta_star = 1.0;
    rep.premium = r;
    rep.marginal_cost = r;
    return rep;
  }
  rep.theta_star = theta;
  rep.premium = wtp(mm.prim(), theta, r);
  rep.take_up = survival(mm.measure(), theta);
  rep.profit = profit(mm, theta, r);
  const QuadEstimate ew = expected_wtp_checked(mm, theta, r);
  rep.quadrature_ok = ew.within_budget;
  rep.surplus = ew.value - rep.premium * rep.take_up;
  rep.welfare = ew.value - r * avg_damage(mm.measure(), theta) * rep.take_up;
  rep.marginal_cost = marginal_cost(theta, r);
  const MeanSd ms = cond_mean_sd(mm.measure(), theta);
  rep.cond_mean = ms.mean;
  rep.cond_sd = ms.sd;
  if (theta > 0.0 && theta < 1.0 && r > 0.0) {
    rep.elasticity = elasticity(mm, theta, r);
    const Residuals res = residuals(mm, theta, r);
    rep.residuals = {{"lerner", res.lerner},       {"lerner_rel", res.lerner / rep.premium},
                     {"foc_a", res.foc_a},         {"foc_a_rel", res.foc_a_rel},
                     {"foc_b", res.foc_b},         {"foc_b_rel", res.foc_b_rel},
                     {"foc_r", res.foc_r},         {"quadrature_diff", ew.diff}};
  }
  return rep;
}

inline OptimumReport inner_profit_opt(const MarketModel& mm, double r, const SolverConfig& cfg = {}) {
  if (!(r > 0.0 && r <= mm.prim().loss())) throw DomainError("inner_profit_opt: r must lie in (0, loss]");
  validate(cfg);
  const SegmentChoice c = best_segment(mm, r, cfg);
  OptimumReport rep = make_report(mm, Regime::FixedContract, c.theta, r, c.profitable);
  rep.multimodal = c.multimodal;
  return rep;
}

namespace detail {

struct JointCandidate {
  double theta;
  double r;
  double value;
};

// Profile refinement around a coarse-grid seed: r -> max_theta profit(theta, r)
// with theta searched in a window of the seed, then the indemnity moved onto
// the root of d profit / d r (envelope condition).
inline JointCandidate refine_joint(const MarketModel& mm, const JointCandidate& seed, double dtheta, double dr,
                                   const SolverConfig& cfg) {
  const double loss = mm.prim().loss();
  const double tlo = std::max(0.0, seed.theta - 4.0 * dtheta);
  const double thi = std::min(1.0, seed.theta + 4.0 * dtheta);
  double last_theta = seed.theta;
  auto profile = [&](double r) {
    const SegmentChoice c = local_segment(mm, r, tlo, thi, std::clamp(last_theta, tlo, thi), cfg);
    if (c.profitable) last_theta = c.theta;
    return c.profitable ? c.profit : 0.0;
  };
  // the coarse theta grid can shift the profile peak by a few r cells
  double rc = seed.r;
  double r = rc;
  double v = 0.0;
  double rlo = 0.0;
  double rhi = 0.0;
  for (int pass = 0; pass < 16; ++pass) {
    rlo = std::max(rc - 3.0 * dr, 0.25 * dr);
    rhi = std::min(rc + 3.0 * dr, loss);
    const double f0 = profile(rc);
    std::tie(r, v) = brent_maximize(profile, rlo, rhi, rc, f0, cfg.r_tol, cfg.refine_iters);
    const bool at_lo = r - rlo < 10.0 * cfg.r_tol && rlo > 0.25 * dr;
    const bool at_hi = rhi - r < 10.0 * cfg.r_tol && rhi < loss;
    if (!at_lo && !at_hi) break;
    rc = r;
  }
  if (!(v > kProfitFloor)) return {1.0, r, 0.0};
  // the maximum may sit on the r = loss face
  if (loss - r < 10.0 * cfg.r_tol) {
    const double fl = profile(loss);
    if (fl >= v) {
      r = loss;
      v = fl;
    }
  }
  auto envelope = [&](double rr) {
    const SegmentChoice c = local_segment(mm, rr, tlo, thi, std::clamp(last_theta, tlo, thi), cfg);
    return c.profitable ? foc_residual_r(mm, c.theta, rr) : std::numeric_limits<double>::quiet_NaN();
  };
  if (r < loss) {
    const double step = std::max(1e3 * cfg.r_tol, 1e-6);
    const double a = std::max(r - step, rlo);
    const double b = std::min(r + step, loss);
    const double ga = envelope(a);
    const double gb = envelope(b);
    if (ga > 0.0 && gb < 0.0) {
      const double root = bracketed_root(envelope, a, b, ga, gb);
      const double fr = profile(root);
      if (fr >= v - 1e-12 * std::fabs(v)) {
        r = root;
        v = fr;
      }
    }
  }
  const SegmentChoice c = local_segment(mm, r, tlo, thi, std::clamp(last_theta, tlo, thi), cfg);
  return {c.profitable ? c.theta : 1.0, r, c.profitable ? c.profit : 0.0};
}

}  // namespace detail

// Joint maximization of profit over (theta, r) in [0, 1] x (0, loss].
inline OptimumReport unregulated_opt(const MarketModel& mm, const SolverConfig& cfg = {}) {
  validate(cfg);
  const int g = cfg.coarse_grid;
  const double loss = mm.prim().loss();
  const double dtheta = 1.0 / (g - 1);
  const double dr = loss / g;
  // values[j][i]: r = (j + 1) dr, theta = i dtheta
  std::vector<double> values(static_cast<std::size_t>(g) * g);
  auto at = [&](int j, int i) -> double& { return values[static_cast<std::size_t>(j) * g + i]; };
  for (int j = 0; j < g; ++j) {
    const double r = (j + 1) * dr;
    for (int i = 0; i < g; ++i) at(j, i) = profit(mm, i * dtheta, r);
  }
  // local maxima of the grid (8-neighbourhood), best first; ties -> smaller theta, then r
  std::vector<detail::JointCandidate> seeds;
  for (int j = 0; j < g; ++j) {
    for (int i = 0; i < g; ++i) {
      const double v = at(j, i);
      if (!(v > kProfitFloor)) continue;
      bool peak = true;
      for (int dj = -1; dj <= 1 && peak; ++dj) {
        for (int di = -1; di <= 1; ++di) {
          if (!di && !dj) continue;
          const int jj = j + dj;
          const int ii = i + di;
          if (jj < 0 || jj >= g || ii < 0 || ii >= g) continue;
          if (at(jj, ii) > v) {
            peak = false;
            break;
          }
        }
      }
      if (peak) seeds.push_back({i * dtheta, (j + 1) * dr, v});
    }
  }
  std::stable_sort(seeds.begin(), seeds.end(), [](const auto& a, const auto& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.theta != b.theta) return a.theta < b.theta;
    return a.r < b.r;
  });
  if (seeds.size() > 5) seeds.resize(5);
  if (seeds.empty()) {
    OptimumReport rep = make_report(mm, Regime::Unregulated, 1.0, loss, false);
    return rep;
  }
  detail::JointCandidate best{1.0, loss, 0.0};
  for (const auto& s : seeds) {
    const auto c = detail::refine_joint(mm, s, dtheta, dr, cfg);
    if (c.value > best.value) best = c;
  }
  if (!(best.value > kProfitFloor)) return make_report(mm, Regime::Unregulated, 1.0, loss, false);
  OptimumReport rep = make_report(mm, Regime::Unregulated, best.theta, best.r, true);
  return rep;
}

// Welfare when the regulator fixes r and the insurer responds optimally.
struct RegulatedPoint {
  double r;
  SegmentChoice segment;
  double welfare;
};

inline RegulatedPoint regulated_response(const MarketModel& mm, double r, const SolverConfig& cfg = {}) {
  const SegmentChoice c = best_segment(mm, r, cfg);
  return {r, c, c.profitable ? welfare(mm, c.theta, r) : 0.0};
}

inline OptimumReport regulated_opt(const MarketModel& mm, const SolverConfig& cfg = {}) {
  validate(cfg);
  const int g = cfg.coarse_grid;
  const double loss = mm.prim().loss();
  const double dr = loss / g;
  int best_j = -1;
  double best_w = 0.0;
  for (int j = 1; j <= g; ++j) {
    const RegulatedPoint p = regulated_response(mm, j * dr, cfg);
    if (p.segment.profitable && (best_j < 0 || p.welfare > best_w)) {
      best_j = j;
      best_w = p.welfare;
    }
  }
  if (best_j < 0) return make_report(mm, Regime::Regulated, 1.0, loss, false);
  auto objective = [&](double r) { return regulated_response(mm, r, cfg).welfare; };
  const double lo = std::max((best_j - 1) * dr, 0.25 * dr);
  const double hi = std::min((best_j + 1) * dr, loss);
  auto [r, w] = brent_maximize(objective, lo, hi, best_j * dr, best_w, cfg.r_tol, cfg.refine_iters);
  if (!(w >= best_w)) {
    r = best_j * dr;
    w = best_w;
  }
  if (loss - r < 10.0 * cfg.r_tol && objective(loss) >= w) r = loss;
  const SegmentChoice c = best_segment(mm, r, cfg);
  OptimumReport rep = make_report(mm, Regime::Regulated, c.theta, r, c.profitable);
  rep.multimodal = c.multimodal;
  return rep;
}

}  // namespace commrate
