#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "commrate/typedist.hpp"
#include "oracles.hpp"

using namespace commrate;

namespace {

const double kAlphaBench = 0.05 * 0.989 / (0.95 * 0.011);
const double kBetaBench = 0.989 / 0.011;

// A spread of shapes covering every region of the square.
std::vector<BetaParams> measures() {
  return {{1, 1},     {2, 2},     {2, 3},    {0.5, 0.5}, {0.3, 4.0},   {4.0, 0.3},  {1, 7},
          {7, 1},     {1, 0.4},   {0.4, 1},  {3, 30},    {kAlphaBench, kBetaBench}, {0.8, 12}, {12, 0.8},
          {25, 25},   {1.5, 150}, {0.2, 0.2}, {60, 2},   {2.5, 1.2},  {0.6, 3.0}};
}

}  // namespace

TEST(EzSquare, Mapping) {
  const EZPoint u = ez_from_ab({1, 1});
  EXPECT_DOUBLE_EQ(u.e(), 0.5);
  EXPECT_DOUBLE_EQ(u.z(), 0.5);
  const EZPoint b = ez_from_ab({kAlphaBench, kBetaBench});
  EXPECT_NEAR(b.e(), 0.05, 1e-14);
  EXPECT_NEAR(b.z(), 0.989, 1e-14);
  const BetaParams p = ab_from_ez({0.05, 0.989});
  EXPECT_NEAR(p.alpha(), 4.73205741626794, 1e-10);
  EXPECT_NEAR(p.beta(), 89.9090909090909, 1e-10);
  const BetaParams half = ab_from_ez({0.3, 0.5});
  EXPECT_NEAR(half.alpha(), 0.3 / 0.7, 1e-15);
  EXPECT_NEAR(half.beta(), 1.0, 1e-15);
}

TEST(EzSquare, Bijection) {
  std::mt19937_64 gen(21);
  for (int i = 0; i < 1000; ++i) {
    const double a = std::exp(oracle::uniform(gen, -4.0, 5.0));
    const double b = std::exp(oracle::uniform(gen, -4.0, 5.0));
    const BetaParams back = ab_from_ez(ez_from_ab({a, b}));
    EXPECT_NEAR(back.alpha() / a, 1.0, 1e-12);
    EXPECT_NEAR(back.beta() / b, 1.0, 1e-12);
  }
}

TEST(EzSquare, Validation) {
  EXPECT_THROW(EZPoint(0.0, 0.5), DomainError);
  EXPECT_THROW(EZPoint(0.5, 1.0), DomainError);
  EXPECT_THROW(BetaParams(-1.0, 2.0), DomainError);
  EXPECT_THROW(ab_from_ez({0.5, 1.0 - 1e-10}), RangeError);
  EXPECT_THROW(TypeMeasure(BetaParams(2, 2), 1e-2), DomainError);
  EXPECT_THROW(TypeMeasure(BetaParams(2, 2), 0.0), DomainError);
}

TEST(TypeMeasure, StoresConsistentCoordinates) {
  for (const auto& p : measures()) {
    const TypeMeasure m(p);
    const EZPoint ez = ez_from_ab(p);
    EXPECT_NEAR(m.mean(), ez.e(), 1e-12);
    EXPECT_NEAR(m.tail_slope(), ez.z(), 1e-12);
  }
}

TEST(Density, ClosedForms) {
  EXPECT_NEAR(pdf(TypeMeasure({1, 1}), 0.3), 1.0, 1e-14);
  EXPECT_NEAR(pdf(TypeMeasure({2, 2}), 0.5), 1.5, 1e-14);
  EXPECT_NEAR(cdf(TypeMeasure({1, 1}), 0.25), 0.25, 1e-15);
  EXPECT_NEAR(cdf(TypeMeasure({2, 2}), 0.5), 0.5, 1e-15);
  const TypeMeasure bench({kAlphaBench, kBetaBench});
  const double want = oracle::pdf(kAlphaBench, kBetaBench, 0.05);
  EXPECT_NEAR(pdf(bench, 0.05) / want, 1.0, 1e-12);
}

TEST(Density, MatchesBoostDistribution) {
  for (const auto& p : measures()) {
    const TypeMeasure m(p);
    EXPECT_EQ(cdf(m, 0.0), 0.0);
    EXPECT_EQ(cdf(m, 1.0), 1.0);
    for (int k = 1; k < 200; ++k) {
      const double t = k / 200.0;
      const double f = oracle::pdf(p.alpha(), p.beta(), t);
      EXPECT_NEAR(pdf(m, t), f, 1e-11 * std::max(1.0, f)) << p.alpha() << ' ' << p.beta() << ' ' << t;
      EXPECT_NEAR(cdf(m, t), oracle::cdf(p.alpha(), p.beta(), t), 1e-12);
    }
  }
}

TEST(Density, PolesAreSignalled) {
  EXPECT_THROW(pdf(TypeMeasure({0.5, 2}), 0.0), DomainError);
  EXPECT_THROW(pdf(TypeMeasure({2, 0.5}), 1.0), DomainError);
  EXPECT_NO_THROW(pdf(TypeMeasure({2, 2}), 0.0));
  EXPECT_THROW(pdf(TypeMeasure({2, 2}), 1.5), DomainError);
}

TEST(Quantile, RoundTrip) {
  for (const auto& p : measures()) {
    const TypeMeasure m(p);
    for (int k = 1; k < 100; ++k) {
      const double t = k / 100.0;
      const double u = cdf(m, t);
      if (u <= 0.0 || u >= 1.0 || oracle::pdf(p.alpha(), p.beta(), t) < 1e-3) continue;
      EXPECT_NEAR(quantile(m, u), t, 1e-9) << p.alpha() << ' ' << p.beta() << ' ' << t;
    }
  }
}

TEST(AvgDamage, ClosedForms) {
  const TypeMeasure uni({1, 1});
  EXPECT_NEAR(avg_damage(uni, 0.5), 0.75, 1e-14);
  for (const auto& p : measures()) {
    const TypeMeasure m(p);
    EXPECT_NEAR(avg_damage(m, 0.0), m.mean(), 1e-14);
    EXPECT_EQ(avg_damage(m, 1.0), 1.0);
  }
}

TEST(AvgDamage, MatchesIncompleteBetaIdentity) {
  for (const auto& p : measures()) {
    const TypeMeasure m(p);
    for (int k = 0; k < 200; ++k) {
      const double t = k / 200.0;
      if (oracle::sf(p.alpha(), p.beta(), t) < 1e-280) continue;  // Boost ratio underflows
      EXPECT_NEAR(avg_damage(m, t), oracle::truncated_mean(p.alpha(), p.beta(), t), 1e-11)
          << p.alpha() << ' ' << p.beta() << ' ' << t;
    }
  }
}

TEST(AvgDamage, LinearWhenAlphaIsOne) {
  for (double b : {0.3, 0.7, 1.0, 2.0, 9.0, 120.0}) {
    const TypeMeasure m({1.0, b});
    const double E = m.mean(), Z = m.tail_slope();
    double worst = 0.0;
    for (int k = 0; k <= 10000; ++k) {
      const double t = k / 10000.0;
      worst = std::max(worst, std::fabs(avg_damage(m, t) - (Z * t + E)));
    }
    EXPECT_LE(worst, 1e-10) << b;
  }
}

TEST(AvgDamage, ExceedsTheta) {
  for (const auto& p : measures()) {
    const TypeMeasure m(p);
    for (int k = 1; k < 1000; ++k) {
      const double t = k / 1000.0;
      EXPECT_GT(avg_damage(m, t), t);
      EXPECT_GT(mean_residual(m, t), 0.0);
      EXPECT_GT(hazard(m, t), 0.0);
      EXPECT_GT(avg_damage_deriv(m, t), 0.0);
    }
  }
}

TEST(AvgDamage, ContinuousAcrossTaylorSwitch) {
  for (const auto& p : measures()) {
    const TypeMeasure m(p);
    const double edge = 1.0 - m.taylor_eps();
    const double below = avg_damage(m, std::nextafter(edge, 0.0));
    const double above = avg_damage(m, edge);
    EXPECT_NEAR(below, above, 1e-10) << p.alpha() << ' ' << p.beta();
  }
}

TEST(Calculus, UniformClosedForms) {
  const TypeMeasure uni({1, 1});
  EXPECT_NEAR(mean_residual(uni, 0.5), 0.25, 1e-14);
  EXPECT_NEAR(hazard(uni, 0.5), 2.0, 1e-13);
  EXPECT_NEAR(avg_damage_deriv(uni, 0.5), 0.5, 1e-13);
  EXPECT_NEAR(avg_damage_second_deriv(uni, 0.3), 0.0, 1e-12);
}

TEST(Calculus, DerivativeAtOneIsZ) {
  for (const auto& p : measures()) {
    const TypeMeasure m(p);
    EXPECT_NEAR(avg_damage_deriv(m, 1.0), p.beta() / (p.beta() + 1.0), 1e-15);
    // one-sided differences at h, 2h, 4h, extrapolated to cancel the O(h) and O(h^2) terms
    const double h = 1e-5;
    auto diff = [&](double step) { return (avg_damage(m, 1.0) - avg_damage(m, 1.0 - step)) / step; };
    const double d = (8.0 * diff(h) - 6.0 * diff(2.0 * h) + diff(4.0 * h)) / 3.0;
    EXPECT_NEAR(d, m.tail_slope(), 1e-9) << p.alpha() << ' ' << p.beta();
  }
}

TEST(Calculus, DerivativeAtZero) {
  EXPECT_EQ(avg_damage_deriv(TypeMeasure({2, 3}), 0.0), 0.0);
  const TypeMeasure lin({1, 3});
  EXPECT_NEAR(avg_damage_deriv(lin, 0.0), lin.tail_slope(), 1e-15);
  EXPECT_TRUE(std::isinf(avg_damage_deriv(TypeMeasure({0.5, 3}), 0.0)));
  EXPECT_TRUE(std::isinf(hazard(TypeMeasure({2, 3}), 1.0)));
}

TEST(Calculus, FirstDerivativeMatchesFiniteDifferences) {
  for (const auto& p : measures()) {
    const TypeMeasure m(p);
    for (double t : {0.05, 0.2, 0.4, 0.6, 0.9}) {
      const double h = 1e-4 * std::min(t, 1.0 - t);
      const double fd = oracle::richardson_diff([&](double x) { return avg_damage(m, x); }, t, h);
      const double an = avg_damage_deriv(m, t);
      EXPECT_NEAR(an, fd, 1e-6 * std::max(1.0, std::fabs(an))) << p.alpha() << ' ' << p.beta() << ' ' << t;
    }
  }
  const TypeMeasure m({2, 3});
  const double fd = oracle::central_diff([&](double x) { return avg_damage(m, x); }, 0.4, 1e-6);
  EXPECT_NEAR(avg_damage_deriv(m, 0.4), fd, 1e-6);
}

TEST(Calculus, SecondDerivativeMatchesFiniteDifferences) {
  const TypeMeasure m({2, 3});
  const double fd = oracle::second_diff([&](double x) { return avg_damage(m, x); }, 0.5, 1e-4);
  EXPECT_NEAR(avg_damage_second_deriv(m, 0.5), fd, 1e-5);
  for (const auto& p : measures()) {
    const TypeMeasure mm(p);
    for (double t : {0.1, 0.3, 0.5, 0.7}) {
      const double d2 = oracle::central_diff([&](double x) { return avg_damage_deriv(mm, x); }, t, 1e-6);
      const double an = avg_damage_second_deriv(mm, t);
      EXPECT_NEAR(an, d2, 1e-5 * std::max(1.0, std::fabs(an))) << p.alpha() << ' ' << p.beta() << ' ' << t;
    }
  }
}

TEST(Calculus, SecondDerivativeVanishesWhenAlphaIsOne) {
  for (double b : {0.5, 1.0, 3.0, 40.0}) {
    const TypeMeasure m({1.0, b});
    for (int k = 1; k < 512; ++k) EXPECT_NEAR(avg_damage_second_deriv(m, k / 512.0), 0.0, 1e-9) << b;
  }
}

TEST(Calculus, HazardIncreasesWhereAIsConvex) {
  for (const auto& p : measures()) {
    const TypeMeasure m(p);
    bool convex = true;
    for (int k = 1; k < 400 && convex; ++k) convex = avg_damage_second_deriv(m, k / 400.0) >= 0.0;
    if (!convex) continue;
    double prev = 0.0;
    for (int k = 1; k < 400; ++k) {
      const double h = hazard(m, k / 400.0);
      EXPECT_GT(h, prev) << p.alpha() << ' ' << p.beta() << ' ' << k;
      prev = h;
    }
  }
}

TEST(Moments, DockingSlope) {
  EXPECT_DOUBLE_EQ(docking_slope(0.0), 0.5);
  EXPECT_NEAR(docking_slope(89.909091 - 1.0), 89.909091 / 90.909091, 1e-15);
  EXPECT_LT(docking_slope(-1.0 + 1e-12), 1e-11);
  EXPECT_THROW(docking_slope(-1.0), DomainError);
}

TEST(Moments, Variance) {
  EXPECT_NEAR(variance_ez({0.5, 0.5}), 1.0 / 12.0, 1e-15);
  const EZPoint bench(0.05, 0.989);
  EXPECT_NEAR(coeff_variation(bench), 0.445, 1e-3);
  EXPECT_NEAR(std::sqrt(variance_ez(bench)), 0.023, 1e-3);
  for (const auto& p : measures()) {
    const double a = p.alpha(), b = p.beta();
    EXPECT_NEAR(variance_ez(ez_from_ab(p)), a * b / ((a + b) * (a + b) * (a + b + 1.0)), 1e-12);
  }
  double prev = 1.0;
  for (double z = 0.01; z < 1.0; z += 0.01) {
    const double v = variance_ez({0.3, z});
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_LT(variance_ez({0.3, 1.0 - 1e-12}), 1e-12);
}

TEST(Moments, ConditionalMeanAndSd) {
  const TypeMeasure uni({1, 1});
  const MeanSd half = cond_mean_sd(uni, 0.5);
  EXPECT_NEAR(half.mean, 0.75, 1e-14);
  EXPECT_NEAR(half.sd, std::sqrt(1.0 / 48.0), 1e-12);
  for (const auto& p : measures()) {
    const TypeMeasure m(p);
    const MeanSd zero = cond_mean_sd(m, 0.0);
    EXPECT_NEAR(zero.mean, m.mean(), 1e-14);
    EXPECT_NEAR(zero.sd, std::sqrt(variance_ez(m.ez())), 1e-12);
    for (int k = 1; k < 50; ++k) {
      const double t = k / 50.0;
      if (oracle::sf(p.alpha(), p.beta(), t) < 1e-280) continue;
      const double mean = oracle::truncated_mean(p.alpha(), p.beta(), t);
      const double sd = std::sqrt(oracle::truncated_second_moment(p.alpha(), p.beta(), t) - mean * mean);
      const MeanSd got = cond_mean_sd(m, t);
      EXPECT_NEAR(got.mean, mean, 1e-11);
      EXPECT_NEAR(got.sd, sd, 1e-7 * std::max(1.0, sd / 1e-3)) << p.alpha() << ' ' << p.beta() << ' ' << t;
    }
  }
}

TEST(Regions, Classification) {
  EXPECT_EQ(classify_region({0.5, 0.5}), RegionLabel::Uniform);
  EXPECT_EQ(classify_region({0.05, 0.989}), RegionLabel::A);
  EXPECT_EQ(classify_region(ez_from_ab({0.5, 0.5})), RegionLabel::U);
  EXPECT_EQ(classify_region(ez_from_ab({3.0, 0.5})), RegionLabel::I);
  EXPECT_EQ(classify_region(ez_from_ab({0.5, 3.0})), RegionLabel::D);
  EXPECT_EQ(classify_region(ez_from_ab({1.0, 3.0})), RegionLabel::PowerDecreasing);
  EXPECT_EQ(classify_region(ez_from_ab({1.0, 0.5})), RegionLabel::PolarPole1);
  EXPECT_EQ(classify_region(ez_from_ab({3.0, 1.0})), RegionLabel::PowerIncreasing);
  EXPECT_EQ(classify_region(ez_from_ab({0.5, 1.0})), RegionLabel::PolarPole0);
  // the alpha = 1 line is Z = 1 - E; above Z = 1/2 it carries beta > 1
  EXPECT_EQ(classify_region({0.25, 0.75}), RegionLabel::PowerDecreasing);
  EXPECT_EQ(classify_region({0.75, 0.25}), RegionLabel::PolarPole1);
}

TEST(Regions, PartitionIsExhaustive) {
  int counts[9] = {};
  for (int j = 1; j < 200; ++j) {
    for (int i = 1; i < 200; ++i) {
      const RegionLabel r = classify_region({i / 200.0, j / 200.0});
      ++counts[static_cast<int>(r)];
    }
  }
  for (int k = 0; k < 9; ++k) EXPECT_GT(counts[k], 0) << to_string(static_cast<RegionLabel>(k));
}

TEST(Convexity, Verifier) {
  std::vector<EZPoint> diag;
  for (int i = 1; i < 16; ++i) diag.emplace_back(i / 16.0, 1.0 - i / 16.0);
  std::vector<double> thetas;
  for (int k = 0; k < 512; ++k) thetas.push_back((k + 0.5) / 512.0);
  const ConvexityReport lin = verify_convexity(diag, thetas);
  for (const auto& c : lin.cells) EXPECT_NEAR(c.min_second_deriv, 0.0, 1e-9);

  std::vector<EZPoint> grid;
  for (int j = 0; j < 32; ++j)
    for (int i = 0; i < 32; ++i) {
      const double E = (i + 0.5) / 32, Z = (j + 0.5) / 32;
      if (Z > 1.0 - E) grid.emplace_back(E, Z);
    }
  const ConvexityReport rep = verify_convexity(grid, thetas);
  EXPECT_TRUE(rep.holds_on_grid);
  EXPECT_GE(rep.worst, -1e-9);

  const std::vector<EZPoint> bad{{0.2, 0.3}};
  EXPECT_THROW(verify_convexity(bad, thetas), DomainError);
}
