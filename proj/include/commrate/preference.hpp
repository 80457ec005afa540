#pragma once

// Nondimensional CARA preferences: u(w) = (1 - e^{-rho w}) / (1 - e^{-rho}),
// wealth and money amounts measured in units of initial wealth.
//
// The willingness-to-pay solves  theta u(1 - l - p + r) + (1 - theta) u(1 - p)
// = theta u(1 - l) + (1 - theta) u(1), which for CARA is
//
//   wtp = (1/rho) ln[(theta e^{rho l} + 1 - theta) / (theta e^{rho (l - r)} + 1 - theta)].
//
// Everything below is written in terms of e^{-rho x} and expm1 so it neither
// overflows for large rho l nor loses the O(rho) signal for small rho.

#include <cmath>

#include "commrate/errors.hpp"
#include "commrate/typedist.hpp"

namespace commrate {

class MarketPrimitives {
 public:
  MarketPrimitives(double rho, double loss) : rho_(rho), loss_(loss) {
    detail::require(rho > 0.0 && std::isfinite(rho), "MarketPrimitives: rho must be finite and > 0");
    detail::require(loss > 0.0 && loss <= 1.0, "MarketPrimitives: loss must lie in (0, 1]");
  }
  double rho() const { return rho_; }
  double loss() const { return loss_; }

 private:
  double rho_;
  double loss_;
};

// A priced contract: the segment [theta, 1] buys indemnity r at premium wtp(theta, r).
struct ContractQuote {
  double theta;
  double r;
  double premium;
};

// Below this the closed-form risk-neutral limit wtp = theta r is used.
inline constexpr double kRiskNeutralRho = 1e-8;

inline double utility(const MarketPrimitives& mp, double w) {
  if (!(w >= 0.0)) throw DomainError("utility: wealth must be >= 0");
  return std::expm1(-mp.rho() * w) / std::expm1(-mp.rho());
}

namespace detail {

inline void check_contract(const MarketPrimitives& mp, double theta, double r, const char* who) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw DomainError(std::string(who) + ": theta must lie in [0, 1]");
  if (!(r >= 0.0 && r <= mp.loss())) throw DomainError(std::string(who) + ": r must lie in [0, loss]");
}

// theta + (1 - theta) e^{-x}, x >= 0
inline double mix(double theta, double x) { return 1.0 + (1.0 - theta) * std::expm1(-x); }

inline double log_mix(double theta, double x) { return std::log1p((1.0 - theta) * std::expm1(-x)); }

}  // namespace detail

inline double wtp(const MarketPrimitives& mp, double theta, double r) {
  detail::check_contract(mp, theta, r, "wtp");
  if (theta == 0.0 || r == 0.0) return 0.0;
  if (theta == 1.0) return r;
  const double rho = mp.rho();
  if (rho < kRiskNeutralRho) return theta * r;
  const double l = mp.loss();
  const double v = r + (detail::log_mix(theta, rho * l) - detail::log_mix(theta, rho * (l - r))) / rho;
  return std::fmin(std::fmax(v, 0.0), r);
}

inline double wtp_dtheta(const MarketPrimitives& mp, double theta, double r) {
  detail::check_contract(mp, theta, r, "wtp_dtheta");
  const double rho = mp.rho();
  if (rho < kRiskNeutralRho) return r;
  const double l = mp.loss();
  const double full = -std::expm1(-rho * l) / detail::mix(theta, rho * l);
  const double kept = -std::expm1(-rho * (l - r)) / detail::mix(theta, rho * (l - r));
  return (full - kept) / rho;
}

inline double wtp_dr(const MarketPrimitives& mp, double theta, double r) {
  detail::check_contract(mp, theta, r, "wtp_dr");
  if (mp.rho() < kRiskNeutralRho) return theta;
  return theta / detail::mix(theta, mp.rho() * (mp.loss() - r));
}

// Expected-utility gain of buying (premium, r) for type theta; the agent buys
// when this is >= 0.
inline double participation_gap(const MarketPrimitives& mp, double theta, double premium, double r) {
  detail::check_contract(mp, theta, r, "participation_gap");
  if (!(premium >= 0.0 && premium <= 1.0)) throw DomainError("participation_gap: premium must lie in [0, 1]");
  const double l = mp.loss();
  const double damaged = 1.0 - l - premium + r;
  if (damaged < 0.0 || 1.0 - premium < 0.0) throw DomainError("participation_gap: negative wealth argument");
  return theta * utility(mp, damaged) + (1.0 - theta) * utility(mp, 1.0 - premium) - theta * utility(mp, 1.0 - l) -
         (1.0 - theta) * utility(mp, 1.0);
}

// The indifferent type for a contract (premium, r); types above it buy.
inline double critical_theta(const MarketPrimitives& mp, double premium, double r) {
  if (!(r > 0.0 && r <= mp.loss())) throw DomainError("critical_theta: r must lie in (0, loss]");
  if (!(premium > 0.0)) throw DomainError("critical_theta: premium must be > 0");
  if (!(premium < r)) throw DomainError("critical_theta: inadmissible contract, premium must be < r");
  const double rho = mp.rho();
  const double l = mp.loss();
  if (rho < kRiskNeutralRho) return premium / r;
  // [u(1) - u(1-p)] / ([u(1) - u(1-p)] + [u(1-l+r-p) - u(1-l)]), rescaled by e^{rho(1-l)}
  const double no_claim = std::exp(-rho * l) * std::expm1(rho * premium);
  const double claim = -std::expm1(-rho * (r - premium));
  return no_claim / (no_claim + claim);
}

// r A'(1) - d wtp / d theta (1, r); positive iff a left neighbourhood of
// theta = 1 is profitable.
inline double profitability_margin(const MarketPrimitives& mp, const TypeMeasure& m, double r) {
  if (!(r > 0.0 && r <= mp.loss())) throw DomainError("profitability_margin: r must lie in (0, loss]");
  return r * m.tail_slope() - wtp_dtheta(mp, 1.0, r);
}

}  // namespace commrate
