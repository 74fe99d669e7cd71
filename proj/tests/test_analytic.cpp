#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "u2x/analytic.hpp"
#include "u2x/montecarlo.hpp"

using namespace u2x;
using u2x::testing::ergodicOracle;
using u2x::testing::outageOracle;

namespace {

OutageInputs sectionFour(Scenario s, double m, double puDbm) {
  OutageInputs in;
  in.geometry = {1.0, 50.0, 100.0};
  in.channel = {4.0, m, std::nullopt};
  in.budget = {dbmToWatts(puDbm), dbmToWatts(-90.0), 0.4, 0.6};
  in.rates = RateTargets{};
  in.scenario = s;
  return in;
}

double relErr(double got, double want) { return std::fabs(got - want) / std::fabs(want); }

}  // namespace

// -- exact outage ------------------------------------------------------------

TEST(OutageExact, FarVanishesWithPower) {
  double prev = 1.0;
  for (double pu = -40.0; pu <= 80.0; pu += 5.0) {
    const double p = outageExact(sectionFour(Scenario::NomaFar, 1, pu)).value;
    EXPECT_LE(p, prev);
    EXPECT_GE(p, 0.0);
    prev = p;
  }
  EXPECT_LT(prev, 1e-8);
  EXPECT_GT(outageExact(sectionFour(Scenario::NomaFar, 1, -60.0)).value, 0.999);
}

TEST(OutageExact, SwappedSplitGivesCertainOutage) {
  auto in = sectionFour(Scenario::NomaFar, 2, 30.0);
  in.budget.aV2 = 0.4;
  in.budget.aW2 = 0.6;
  const auto e = outageExact(in);
  EXPECT_EQ(e.value, 1.0);
  EXPECT_TRUE(e.diag.infeasible);
  in.scenario = Scenario::NomaNear;
  EXPECT_EQ(outageExact(in).value, 1.0);
}

TEST(OutageExact, MatchesDistanceIntegralOracle) {
  for (Scenario s : kAllScenarios) {
    for (int m : {1, 2, 3}) {
      for (double pu : {-20.0, 0.0, 10.0, 30.0, 50.0}) {
        const auto in = sectionFour(s, m, pu);
        const double x = m * *thresholdScale(in.budget, in.rates, s) * in.budget.sigma2;
        const auto [a, b] = shellOf(in.geometry, regionOf(s));
        const double ref = outageOracle(m, 4.0, x, a, b);
        const double got = outageExact(in).value;
        EXPECT_LT(std::fabs(got - ref), 1e-12 + 1e-9 * ref) << toString(s) << " m=" << m << " pu=" << pu;
      }
    }
  }
}

TEST(OutageExact, FarTwentyDbmAgreesWithSimulation) {
  const auto in = sectionFour(Scenario::NomaFar, 2, 20.0);
  const auto exact = outageExact(in);
  const auto mc = estimate(in, MonteCarloMetric::Outage, {1'000'000, {}, 1});
  EXPECT_GE(exact.value, mc.ciLow);
  EXPECT_LE(exact.value, mc.ciHigh);
}

TEST(OutageExact, RecordsTheGammaOrderPlusOneVariant) {
  const auto e = outageExact(sectionFour(Scenario::NomaFar, 2, 20.0));
  ASSERT_TRUE(e.diag.printedForm);
  EXPECT_GT(std::fabs(*e.diag.printedForm - e.value), 0.5);
}

TEST(OutageExact, RejectsNonIntegerShape) {
  EXPECT_THROW(outageExact(sectionFour(Scenario::NomaFar, 1.5, 20.0)), DomainError);
}

TEST(OutageExactProperty, MonotoneInPowerAndRates) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pu(-20.0, 50.0);
  std::uniform_real_distribution<double> rate(0.1, 1.2);
  std::uniform_int_distribution<int> mm(1, 4);
  for (int i = 0; i < 300; ++i) {
    for (Scenario s : kAllScenarios) {
      auto in = sectionFour(s, mm(rng), pu(rng));
      in.rates.rV = rate(rng);
      in.rates.rW = rate(rng) * 2.0;
      in.rates.rO = in.rates.rOW = in.rates.rOV = rate(rng);
      const double p0 = outageExact(in).value;
      auto louder = in;
      louder.budget.pu *= 1.5;
      EXPECT_LE(outageExact(louder).value, p0 + 1e-14);
      auto harder = in;
      harder.rates.rV += 0.05;
      harder.rates.rW += 0.05;
      harder.rates.rO += 0.05;
      harder.rates.rOW += 0.05;
      harder.rates.rOV += 0.05;
      EXPECT_GE(outageExact(harder).value, p0 - 1e-14);
    }
  }
}

// -- asymptotic outage --------------------------------------------------------

TEST(OutageAsymptotic, VanishesWithThreshold) {
  const auto e = outageAsymptotic(sectionFour(Scenario::NomaFar, 2, 200.0));
  EXPECT_LT(e.value, 1e-30);
}

TEST(OutageAsymptotic, OneTermHandValue) {
  // m = 1, m M_v sigma^2 = 1e-9: leading term x E[r^4] over the far shell.
  auto in = sectionFour(Scenario::NomaFar, 1, 0.0);
  in.budget.sigma2 = 1.0;
  in.budget.pu = 1.0 / (0.2 * 1e-9);  // M_v = 1e-9
  const double hand = 1e-9 * 3.0 * (std::pow(100.0, 7) - std::pow(50.0, 7)) / (7.0 * (1e6 - 1.25e5));
  EXPECT_NEAR(hand, 0.048597, 1e-6);
  const auto e = outageAsymptotic(in);
  EXPECT_LT(relErr(e.value, hand), 0.05);
  EXPECT_LT(relErr(e.value, outageExact(in).value), 0.05);
}

TEST(OutageAsymptotic, SlopeIsFadingShape) {
  for (int m : {1, 2, 3}) {
    const double p1 = outageAsymptotic(sectionFour(Scenario::NomaFar, m, 70.0)).value;
    const double p2 = outageAsymptotic(sectionFour(Scenario::NomaFar, m, 80.0)).value;
    EXPECT_NEAR(std::log10(p1 / p2), m, 1e-3);
  }
}

TEST(OutageAsymptotic, AgreesWithExactAtHighSnr) {
  // pu / sigma^2 >= 1e10  <=>  pu >= 10 dBm at sigma^2 = -90 dBm.
  for (int m : {1, 2, 3}) {
    for (double pu = 10.0; pu <= 60.0; pu += 5.0) {
      const auto far = sectionFour(Scenario::NomaFar, m, pu);
      EXPECT_LT(relErr(outageAsymptotic(far).value, outageExact(far).value), 0.05) << m << " " << pu;
      const auto near = sectionFour(Scenario::NomaNear, m, pu);
      ASSERT_FALSE(outageAsymptotic(near).diag.thresholdMismatch);
      EXPECT_LT(relErr(outageAsymptotic(near).value, outageExact(near).value), 0.05) << m << " " << pu;
    }
  }
}

TEST(OutageAsymptotic, FlagsNearThresholdMismatch) {
  auto in = sectionFour(Scenario::NomaNear, 1, 40.0);
  in.rates.rW = 2.0;  // M_w = 7.5/pu > M_v = 5/pu
  const auto e = outageAsymptotic(in);
  EXPECT_TRUE(e.diag.thresholdMismatch);
  EXPECT_LT(e.value, outageExact(in).value);
}

TEST(OutageAsymptotic, ClampsLowSnrAndKeepsRaw) {
  const auto e = outageAsymptotic(sectionFour(Scenario::NomaFar, 1, -30.0));
  EXPECT_GE(e.value, 0.0);
  EXPECT_LE(e.value, 1.0);
  EXPECT_TRUE(e.diag.clamped);
  ASSERT_TRUE(e.diag.raw);
  EXPECT_TRUE(*e.diag.raw < 0.0 || *e.diag.raw > 1.0);
}

TEST(OutageAsymptotic, OmaScenariosRejected) {
  EXPECT_THROW(outageAsymptotic(sectionFour(Scenario::OmaSingle, 1, 20.0)), DomainError);
}

// -- no-fading limit ------------------------------------------------------------

namespace {

/// Far-user config whose no-fading radius is exactly z.
OutageInputs farWithRadius(double z, double R, double D) {
  auto in = sectionFour(Scenario::NomaFar, 1, 0.0);
  in.geometry = {1.0, R, D};
  in.budget.sigma2 = 1.0;
  in.budget.pu = std::pow(z, 4.0) / 0.2;  // M_v = 0.2 / (0.2 z^4)
  return in;
}

}  // namespace

TEST(OutageNoFading, MiddleBranchByHand) {
  const auto in = farWithRadius(100.0, 50.0, 200.0);
  EXPECT_NEAR(*noFadingRadius(in), 100.0, 1e-9);
  const auto e = outageNoFading(in);
  // P(d > z) with d uniform in volume on (50, 200).
  EXPECT_NEAR(e.value, 7e6 / 7.875e6, 1e-9);
  ASSERT_TRUE(e.diag.printedForm);
  EXPECT_NEAR(*e.diag.printedForm, 1.0 / 9.0, 1e-9);
}

TEST(OutageNoFading, OuterBranches) {
  EXPECT_EQ(outageNoFading(farWithRadius(40.0, 50.0, 200.0)).value, 1.0);
  EXPECT_EQ(outageNoFading(farWithRadius(250.0, 50.0, 200.0)).value, 0.0);
}

TEST(OutageNoFading, ContinuousAtBoundaries) {
  EXPECT_NEAR(outageNoFading(farWithRadius(50.0 * (1 + 1e-9), 50.0, 200.0)).value, 1.0, 1e-6);
  EXPECT_NEAR(outageNoFading(farWithRadius(200.0 * (1 - 1e-9), 50.0, 200.0)).value, 0.0, 1e-6);
}

TEST(OutageNoFading, HeavyShapeExactConverges) {
  for (Scenario s : kAllScenarios) {
    for (double pu = -40.0; pu <= 20.0; pu += 1.0) {
      const auto in = sectionFour(s, 64, pu);
      const auto z = noFadingRadius(in);
      const auto [a, b] = shellOf(in.geometry, regionOf(s));
      if (std::fabs(*z - a) < 0.08 * a || std::fabs(*z - b) < 0.08 * b) continue;
      EXPECT_NEAR(outageExact(in).value, outageNoFading(in).value, 0.02) << toString(s) << " pu=" << pu;
    }
  }
}

// -- LoS mixture ----------------------------------------------------------------

TEST(OutageLosMixture, DegenerateMixtureEqualsLosBranch) {
  auto in = sectionFour(Scenario::NomaFar, 1, 20.0);
  in.channel.losMix = LosMixture{1.0, 3.0};
  EXPECT_DOUBLE_EQ(outageLosMixture(in).value, outageExact(sectionFour(Scenario::NomaFar, 3, 20.0)).value);
}

TEST(OutageLosMixture, ConvexCombination) {
  for (Scenario s : {Scenario::NomaNear, Scenario::NomaFar}) {
    for (double pu = 0.0; pu <= 50.0; pu += 5.0) {
      auto in = sectionFour(s, 1, pu);
      in.channel.losMix = LosMixture{0.8, 3.0};
      const double los = outageExact(sectionFour(s, 3, pu)).value;
      const double nlos = outageExact(sectionFour(s, 1, pu)).value;
      const double mix = outageLosMixture(in).value;
      EXPECT_NEAR(mix, 0.8 * los + 0.2 * nlos, 1e-15);
      EXPECT_GE(mix, std::min(los, nlos));
      EXPECT_LE(mix, std::max(los, nlos));
    }
  }
}

TEST(OutageLosMixture, SlopeFollowsNlosBranch) {
  auto a = sectionFour(Scenario::NomaFar, 1, 60.0);
  a.channel.losMix = LosMixture{0.8, 3.0};
  auto b = a;
  b.budget.pu = dbmToWatts(70.0);
  EXPECT_NEAR(std::log10(outageLosMixture(a).value / outageLosMixture(b).value), 1.0, 0.01);
}

TEST(OutageLosMixture, RequiresMixtureAndNoma) {
  EXPECT_THROW(outageLosMixture(sectionFour(Scenario::NomaFar, 1, 20.0)), DomainError);
  auto in = sectionFour(Scenario::OmaSingle, 1, 20.0);
  in.channel.losMix = LosMixture{0.5, 3.0};
  EXPECT_THROW(outageLosMixture(in), DomainError);
}

// -- ergodic rates ----------------------------------------------------------------

TEST(ErgodicNear, VanishesAtLowPower) {
  EXPECT_LT(ergodicNearNoma(sectionFour(Scenario::NomaNear, 1, -120.0)).value, 1e-4);
}

TEST(ErgodicNear, MatchesCcdfQuadrature) {
  for (int m : {1, 2, 3}) {
    for (double pu : {-20.0, 10.0, 30.0}) {
      const auto in = sectionFour(Scenario::NomaNear, m, pu);
      const double c = m * in.budget.sigma2 / (in.budget.pu * in.budget.aW2);
      const auto e = ergodicNearNoma(in);
      EXPECT_TRUE(e.diag.converged);
      EXPECT_LT(relErr(e.value, ergodicOracle(m, 4.0, c, 1.0, 50.0)), 1e-8) << m << " " << pu;
    }
  }
}

TEST(ErgodicNear, UnitSlopeAtHighSnr) {
  const double r1 = ergodicNearNoma(sectionFour(Scenario::NomaNear, 2, 60.0)).value;
  const double r2 = ergodicNearNoma(sectionFour(Scenario::NomaNear, 2, 70.0)).value;
  EXPECT_NEAR((r2 - r1) / std::log2(10.0), 1.0, 0.05);
}

TEST(ErgodicNear, NondecreasingInPower) {
  for (int m : {1, 2}) {
    double prev = 0.0;
    for (double pu = -40.0; pu <= 60.0; pu += 2.5) {
      const double r = ergodicNearNoma(sectionFour(Scenario::NomaNear, m, pu)).value;
      EXPECT_GE(r, prev);
      prev = r;
    }
  }
}

TEST(ErgodicNear, PartialSumsIncreaseOnceTermsArePositive) {
  // Terms are positive once k exceeds C b^alpha; at high SNR that is k >= 0.
  const auto in = sectionFour(Scenario::NomaNear, 2, 40.0);
  const double c = 2.0 * in.budget.sigma2 / (in.budget.pu * in.budget.aW2);
  std::vector<std::size_t> cuts;
  for (std::size_t k = 1; k <= 256; ++k) cuts.push_back(k);
  const auto sums = detail::ergodicPartialSums(2, 4.0, c, 1.0, 50.0, cuts);
  for (std::size_t i = 1; i < sums.size(); ++i) EXPECT_GT(sums[i], sums[i - 1]);
}

TEST(ErgodicNear, ReportsExhaustedBudget) {
  ErgodicSeriesControl tight;
  tight.kMax = 64;
  tight.relTol = 1e-15;
  const auto e = ergodicNearNoma(sectionFour(Scenario::NomaNear, 1, 0.0), tight);
  EXPECT_FALSE(e.diag.converged);
  ASSERT_TRUE(e.diag.seriesResidual);
  EXPECT_GT(*e.diag.seriesResidual, 0.0);
}

TEST(ErgodicFar, CeilingAtHighPower) {
  const auto e = ergodicFarNoma(sectionFour(Scenario::NomaFar, 2, 200.0));
  EXPECT_NEAR(e.value, 1.32193, 1e-5);
  EXPECT_EQ(e.method, Method::Asymptotic);
  auto even = sectionFour(Scenario::NomaFar, 1, 30.0);
  even.budget.aV2 = even.budget.aW2 = 0.5;
  EXPECT_DOUBLE_EQ(ergodicFarNoma(even).value, 1.0);
}

TEST(ErgodicFar, CloseToSimulationAtThirtyDbm) {
  const auto in = sectionFour(Scenario::NomaFar, 2, 30.0);
  const auto mc = estimate(in, MonteCarloMetric::Ergodic, {200'000, {}, 1});
  EXPECT_NEAR(ergodicFarNoma(in).value, mc.value, 0.05);
}

TEST(ErgodicOma, VanishesAtLowPower) {
  for (Scenario s : {Scenario::OmaSingle, Scenario::OmaPairNear, Scenario::OmaPairFar})
    EXPECT_LT(ergodicOma(sectionFour(s, 1, -140.0)).value, 1e-4);
}

TEST(ErgodicOma, SlopesOneAndHalf) {
  auto slope = [](Scenario s) {
    const double r1 = ergodicOma(sectionFour(s, 1, 60.0)).value;
    const double r2 = ergodicOma(sectionFour(s, 1, 70.0)).value;
    return (r2 - r1) / std::log2(10.0);
  };
  EXPECT_NEAR(slope(Scenario::OmaSingle), 1.0, 0.05);
  EXPECT_NEAR(slope(Scenario::OmaPairNear), 0.5, 0.05);
  EXPECT_NEAR(slope(Scenario::OmaPairFar), 0.5, 0.05);
}

TEST(ErgodicOma, SingleMatchesCcdfQuadrature) {
  const auto in = sectionFour(Scenario::OmaSingle, 1, 20.0);
  const double c = in.budget.sigma2 / in.budget.pu;
  EXPECT_LT(relErr(ergodicOma(in).value, ergodicOracle(1, 4.0, c, 1.0, 100.0)), 1e-4);
}

TEST(ErgodicOma, NomaScenariosRejected) {
  EXPECT_THROW(ergodicOma(sectionFour(Scenario::NomaNear, 1, 20.0)), DomainError);
}

// -- spectrum efficiency --------------------------------------------------------

TEST(SpectrumEfficiency, GapsAreDifferences) {
  const auto in = sectionFour(Scenario::NomaNear, 1, 30.0);
  const auto se = spectrumEfficiency(in);
  EXPECT_NEAR(se.tauGapVsOma1, se.tauNoma - se.omaSingle, 1e-15);
  EXPECT_NEAR(se.tauGapVsOma2, se.tauNoma - se.omaPair, 1e-15);
  EXPECT_NEAR(se.tauNoma - se.tauNoma, 0.0, 0.0);
}

TEST(SpectrumEfficiency, NomaAboveSingleOmaAtFortyDbm) {
  const auto se = spectrumEfficiency(sectionFour(Scenario::NomaNear, 1, 40.0));
  EXPECT_GT(se.tauNoma, se.omaSingle);
}

TEST(SpectrumEfficiency, ConstantTermIsFarCeiling) {
  const auto in = sectionFour(Scenario::NomaNear, 2, 80.0);
  EXPECT_NEAR(spectrumEfficiency(in).tauNoma - ergodicNearNoma(in).value, 1.32193, 1e-5);
}
