#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "u2x/metrics.hpp"

using namespace u2x;

namespace {

MetricCurve powerLaw(double order, double scale) {
  MetricCurve c;
  for (double x = 10.0; x <= 40.0; x += 2.0) {
    c.xDb.push_back(x);
    c.y.push_back(scale * std::pow(10.0, -order * x / 10.0));
  }
  return c;
}

OutageInputs sectionFour() {
  OutageInputs in;
  in.geometry = {1.0, 50.0, 100.0};
  in.channel = {4.0, 1.0, std::nullopt};
  in.budget = {1.0, dbmToWatts(-90.0), 0.4, 0.6};
  return in;
}

}  // namespace

TEST(DiversityOrder, SyntheticPowerLaw) {
  EXPECT_NEAR(diversityOrder(powerLaw(2.0, 0.3)), 2.0, 1e-9);
  EXPECT_NEAR(diversityOrder(powerLaw(1.0, 1.0), 3), 1.0, 1e-9);
}

TEST(DiversityOrder, IgnoresConstantFactor) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> k(1e-3, 1e3);
  for (int i = 0; i < 50; ++i) {
    const double s = k(rng);
    EXPECT_NEAR(diversityOrder(powerLaw(1.7, s)), diversityOrder(powerLaw(1.7, 1.0)), 1e-9);
  }
}

TEST(DiversityOrder, RejectsZerosAndLooseIntervals) {
  auto c = powerLaw(2.0, 1.0);
  auto z = c;
  z.y.back() = 0.0;
  EXPECT_THROW(diversityOrder(z), MetricError);
  std::vector<double> hw(c.y.size());
  for (std::size_t i = 0; i < c.y.size(); ++i) hw[i] = 0.05 * c.y[i];
  EXPECT_NO_THROW(diversityOrder(c, 5, hw));
  hw.back() = 0.2 * c.y.back();
  EXPECT_THROW(diversityOrder(c, 5, hw), MetricError);
}

TEST(DiversityOrder, WindowErrors) {
  const auto c = powerLaw(1.0, 1.0);
  EXPECT_THROW(diversityOrder(c, 2), MetricError);
  EXPECT_THROW(diversityOrder(c, c.y.size() + 1), MetricError);
  auto bad = c;
  std::swap(bad.xDb[0], bad.xDb[1]);
  EXPECT_THROW(diversityOrder(bad), MetricError);
}

TEST(HighSnrSlope, LinearInLog2Snr) {
  MetricCurve c{{}, {}, MetricKind::RateBpcu};
  for (double x = 30.0; x <= 60.0; x += 5.0) {
    c.xDb.push_back(x);
    c.y.push_back(0.5 * std::log2(std::pow(10.0, x / 10.0)) + 3.0);
  }
  EXPECT_NEAR(highSnrSlope(c), 0.5, 1e-12);
  for (auto& v : c.y) v = 1.32;
  EXPECT_NEAR(highSnrSlope(c), 0.0, 1e-12);
}

TEST(OutageSumRate, ByHand) {
  RateTargets r;
  r.rV = 1.0;
  r.rW = 1.5;
  EXPECT_DOUBLE_EQ(outageSumRate(0.0, 0.0, r), 2.5);
  EXPECT_DOUBLE_EQ(outageSumRate(1.0, 1.0, r), 0.0);
  EXPECT_DOUBLE_EQ(outageSumRate(0.5, 0.25, r), 1.625);
}

TEST(OutageSumRateProperty, DecreasingInOutage) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const RateTargets r;
  for (int i = 0; i < 1000; ++i) {
    const double pv = u(rng);
    const double pw = u(rng);
    const double base = outageSumRate(pv, pw, r);
    EXPECT_GE(base, 0.0);
    EXPECT_LE(base, r.rV + r.rW);
    EXPECT_LE(outageSumRate(std::min(1.0, pv + 0.01), pw, r), base);
    EXPECT_LE(outageSumRate(pv, std::min(1.0, pw + 0.01), r), base);
  }
}

TEST(TableOne, RecoversShapeAndSlopes) {
  TableOneSpec spec;
  spec.base = sectionFour();
  for (double p = 20.0; p <= 50.0; p += 1.0) spec.puDbm.push_back(p);
  spec.farRate.seeds.masterSeed = 20190109;
  const auto rows = tableOne(spec);
  ASSERT_EQ(rows.size(), 10u);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.diversityOk) << toString(r.scenario) << " m=" << r.m << " D=" << r.diversity;
    EXPECT_TRUE(r.slopeOk) << toString(r.scenario) << " m=" << r.m << " S=" << r.slope;
    EXPECT_EQ(r.slopeSource, r.scenario == Scenario::NomaFar ? "monte_carlo" : "exact");
  }
}

TEST(TableOne, RejectsShortGrid) {
  TableOneSpec spec;
  spec.base = sectionFour();
  spec.puDbm = {30.0};
  EXPECT_THROW(tableOne(spec), MetricError);
}
