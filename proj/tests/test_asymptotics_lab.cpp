#include <gtest/gtest.h>

#include <random>

#include "ambit/asymptotics_lab.hpp"

using namespace ambit;

namespace {

ExperimentConfig make(const CharacteristicTriplet& t, const Kernel& k, const AmbitSet& set) {
  ExperimentConfig c;
  c.triplet = t;
  c.kernel = k;
  c.set = set;
  return c;
}

ExperimentConfig gauss_disk(int M) {
  auto c = make({0.0, 1.0, NoJumps{}}, constant_kernel({1.0, 0.0}), unit_disk());
  c.replicates = M;
  c.seed = 11;
  return c;
}

ExperimentConfig cp_disk(int M) {
  auto c = make({0.0, 0.0, CompoundPoisson{1.5, NormalJumps{0.0, 1.0}}},
                isotropic_kernel(0.0, PolynomialRadial{{1.05, 0.0, -1.0}}), unit_disk());
  c.replicates = M;
  c.seed = 12;
  return c;
}

template <class F>
void expect_config_error(F&& f, const std::string& needle) {
  try {
    f();
    FAIL() << "expected a config error mentioning " << needle;
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(Validate, AcceptsDefaults) { EXPECT_NO_THROW(validate(gauss_disk(100))); }

TEST(Validate, RejectsBadGrids) {
  auto c = gauss_disk(100);
  c.r_grid = {0.02, 0.04, 0.01};
  expect_config_error([&] { validate(c); }, "r_grid");
  c.r_grid = {0.02, 0.02, 0.01};
  expect_config_error([&] { validate(c); }, "r_grid");
  c.r_grid = {};
  expect_config_error([&] { validate(c); }, "r_grid");
}

TEST(Validate, RejectsFewReplicates) {
  expect_config_error([] { validate(gauss_disk(99)); }, "replicates");
}

TEST(Validate, RejectsCoarseCells) {
  auto c = gauss_disk(100);
  c.h_rule = HRule{false, 10.0, 0.002};
  expect_config_error([&] { validate(c); }, "h_rule");
  c.h_rule = HRule{true, 5.0, 0.0};
  expect_config_error([&] { validate(c); }, "h_rule");
  c.h_rule = HRule{false, 10.0, 0.001};
  EXPECT_NO_THROW(validate(c));
}

TEST(Validate, RejectsStdForHeavyTails) {
  auto c = make({0.0, 0.0, StableDensity{0.06, 0.06, 1.5}}, constant_kernel({1, 0}), unit_disk());
  c.replicates = 100;
  c.statistic = ScaleStatistic::std_dev;
  expect_config_error([&] { validate(c); }, "std");
  c.statistic = ScaleStatistic::iqr;
  EXPECT_NO_THROW(validate(c));
}

TEST(Statistics, QuantilesAndScales) {
  const std::vector<double> v{4, 1, 3, 2, 5};
  EXPECT_DOUBLE_EQ(median_of(v), 3.0);
  EXPECT_DOUBLE_EQ(scale_statistic(v, ScaleStatistic::iqr), 2.0);
  EXPECT_DOUBLE_EQ(median_abs({-3, 1, -2}), 2.0);
  EXPECT_NEAR(scale_statistic(v, ScaleStatistic::std_dev), std::sqrt(2.5), 1e-15);
  EXPECT_DOUBLE_EQ(quantile_sorted({1, 2}, 0.25), 1.25);
}

TEST(Statistics, OlsRecoversExactLine) {
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const auto f = ols(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.se, 0.0, 1e-12);
}

TEST(Statistics, OlsIntervalCoversTrueSlope) {
  // Property: across noisy replicates the 95% interval covers the truth
  // most of the time.
  std::mt19937_64 g(7);
  std::normal_distribution<double> N(0.0, 0.3);
  int covered = 0;
  for (int k = 0; k < 400; ++k) {
    std::vector<double> x, y;
    for (int i = 0; i < 6; ++i) {
      x.push_back(i);
      y.push_back(1.5 * i + N(g));
    }
    const auto f = ols(x, y);
    covered += f.ci_lo <= 1.5 && 1.5 <= f.ci_hi;
  }
  EXPECT_GT(covered, 360);
  EXPECT_LT(covered, 400);
}

TEST(Statistics, EmpiricalCfOfPointMass) {
  const cplx c = empirical_cf({0.5, 0.5}, 2.0);
  EXPECT_NEAR(c.real(), std::cos(1.0), 1e-15);
  EXPECT_NEAR(c.imag(), std::sin(1.0), 1e-15);
}

TEST(RateScan, GaussianSlopeNearThreeHalves) {
  const auto rep = rate_scan(gauss_disk(300));
  EXPECT_EQ(rep.regime.tag, RegimeTag::GaussianAttractor);
  EXPECT_DOUBLE_EQ(rep.predicted_slope, 1.5);
  EXPECT_NEAR(rep.fit.slope, 1.5, 0.25);
  EXPECT_EQ(rep.per_r.size(), 5u);
  EXPECT_EQ(rep.raw.size(), 5u * 300u);
  for (const auto& p : rep.per_r) {
    EXPECT_DOUBLE_EQ(p.h, p.r / 10.0);
    EXPECT_GT(p.scale, 0.0);
  }
}

TEST(RateScan, WrongExpectedSlopeFails) {
  auto c = gauss_disk(300);
  c.expected_slope = 2.0;
  const auto rep = rate_scan(c);
  EXPECT_FALSE(rep.pass);
  EXPECT_DOUBLE_EQ(rep.predicted_slope, 2.0);
}

TEST(RateScan, CompoundPoissonClassicalWithPathwiseMatch) {
  auto c = cp_disk(200);
  c.r_grid = {0.02, 0.014, 0.01, 0.007};
  const auto rep = rate_scan(c);
  EXPECT_EQ(rep.regime.tag, RegimeTag::Classical);
  EXPECT_NEAR(rep.fit.slope, 2.0, 0.15);
  ASSERT_TRUE(rep.pathwise_median_rel_error.has_value());
  EXPECT_GT(rep.pathwise_count, 100u);
  EXPECT_LT(*rep.pathwise_median_rel_error, 0.02);
}

TEST(RateScan, DeterministicBasisHasVanishingFlux) {
  auto c = make({1.0, 0.0, NoJumps{}}, constant_kernel({1.0, 0.0}), unit_disk());
  c.replicates = 100;
  const auto rep = rate_scan(c);
  for (const auto& s : rep.raw) EXPECT_NEAR(s.normalized, 0.0, 1e-8);
}

TEST(RateScan, NeedsFourRadii) {
  auto c = gauss_disk(100);
  c.r_grid = {0.04, 0.02, 0.01};
  expect_config_error([&] { rate_scan(c); }, "4 radii");
}

TEST(RateScan, ReproducibleAcrossThreadCounts) {
  auto c = cp_disk(100);
  c.threads = 1;
  const auto a = rate_scan(c);
  c.threads = 3;
  const auto b = rate_scan(c);
  ASSERT_EQ(a.raw.size(), b.raw.size());
  for (std::size_t i = 0; i < a.raw.size(); ++i) EXPECT_EQ(a.raw[i].value, b.raw[i].value);
  EXPECT_EQ(a.fit.slope, b.fit.slope);
}

TEST(RateScan, SeedChangesSamples) {
  auto c = cp_disk(100);
  const auto a = rate_scan(c);
  c.seed += 1;
  const auto b = rate_scan(c);
  EXPECT_NE(a.raw[0].value + a.raw[1].value, b.raw[0].value + b.raw[1].value);
}

TEST(LimitLaw, GaussianBoundaryLimit) {
  auto c = gauss_disk(400);
  const auto rep = limit_distribution_test(c, {-3, -2, -1, -0.5, 0.5, 1, 2, 3});
  EXPECT_TRUE(rep.pass) << rep.sup_distance << " > " << rep.threshold;
  EXPECT_NEAR(rep.oracle_variance, kPi, 1e-6);
  EXPECT_NEAR(rep.sample_variance, kPi, 0.25 * kPi);
}

TEST(LimitLaw, RejectsRandomVolatility) {
  auto c = gauss_disk(100);
  c.volatility = IndependentGridVol{0.5, 1.5, 0.1};
  expect_config_error([&] { limit_distribution_test(c, {1.0}); }, "volatility");
}

TEST(Vanishing, InverseSquareKernelIsIncompressible) {
  auto c = make({0.0, 0.0, CompoundPoisson{3.0, NormalJumps{0.0, 1.0}}},
                isotropic_kernel(kPi / 2, PowerLaw{1.0, -2.0}), AmbitSet(Annulus{{0, 0}, 0.2, 1.0}));
  c.replicates = 100;
  c.seed = 5;
  const auto rep = incompressibility_test(c);
  EXPECT_TRUE(rep.pass) << rep.ratio;
  EXPECT_EQ(rep.reference_kind, "jacobian");
}

TEST(Vanishing, QuadraticRadialKernelIsIrrotational) {
  auto c = make({0.0, 0.0, CompoundPoisson{3.0, NormalJumps{0.0, 1.0}}},
                isotropic_kernel(0.0, PowerLaw{1.0, 2.0}), unit_disk());
  c.replicates = 100;
  c.seed = 6;
  const auto rep = irrotationality_test(c);
  EXPECT_TRUE(rep.pass) << rep.ratio;
  EXPECT_EQ(rep.reference_kind, "flux");
}

TEST(Vanishing, RotatedQuadraticIsNotIrrotational) {
  auto c = make({0.0, 0.0, CompoundPoisson{3.0, NormalJumps{0.0, 1.0}}},
                isotropic_kernel(kPi / 2, PowerLaw{1.0, 2.0}), unit_disk());
  c.replicates = 100;
  c.seed = 6;
  EXPECT_FALSE(irrotationality_test(c).pass);
}

TEST(Isotropy, DiskPassesAndSquareControlFails) {
  IsotropyConfig ic;
  ic.base = gauss_disk(400);
  ic.base.kernel = isotropic_kernel(0.4, PolynomialRadial{{1.0, 0.0, -0.5}});
  EXPECT_TRUE(isotropy_test(ic).pass);

  IsotropyConfig sq = ic;
  sq.base.set = unit_square();
  expect_config_error([&] { isotropy_test(sq); }, "rotation-invariant");
}

TEST(Isotropy, NonIsotropicKernelIsDetected) {
  IsotropyConfig ic;
  ic.base = gauss_disk(400);
  ic.base.kernel = Kernel(PolynomialKernel{{{1.0, 2, 0}}, {{0.2, 0, 0}}});
  ic.p = {0.3, 0.0};
  EXPECT_FALSE(isotropy_test(ic).pass);
}

TEST(Audit, CompoundPoissonResidualAtRoundoff) {
  auto c = cp_disk(100);
  const auto rep = decomposition_audit(c);
  EXPECT_LT(rep.max_residual, 1e-10);
  EXPECT_TRUE(rep.pass);
  // Boundary term is O(r^2) pathwise: its r^-2 scale stays bounded.
  for (const auto& row : rep.rows) EXPECT_LT(row.median_abs_boundary_over_r2, 50.0);
}

TEST(Audit, GaussianBasisIsConfigError) {
  expect_config_error([] { decomposition_audit(gauss_disk(100)); }, "compound Poisson");
}
