#include <gtest/gtest.h>

#include <algorithm>

#include "ambit/functionals.hpp"

using namespace ambit;

namespace {

SeedStableParams gaussian_seed(double b) {
  SeedStableParams s;
  s.beta = 2.0;
  s.gauss_b = b;
  return s;
}

AtomRealization atoms_at(std::vector<Atom> atoms, double drift = 0.0) {
  AtomRealization a;
  a.window = {{-6, -6}, {6, 6}};
  a.atoms = std::move(atoms);
  a.drift = drift;
  return a;
}

cplx empirical_cf(const std::vector<double>& xs, double z) {
  cplx s = 0;
  for (double x : xs) s += std::exp(cplx(0, z * x));
  return s / static_cast<double>(xs.size());
}

}  // namespace

// -- flux and circulation ------------------------------------------------------

TEST(Flux, ConstantFieldHasZeroFlux) {
  const LevyRealization real = atoms_at({}, 1.7);
  const Kernel k = isotropic_kernel(0.3, PolynomialRadial{{1.0, 0.2}});
  for (double r : {0.3, 0.05}) {
    EXPECT_NEAR(line_functional_direct(real, k, unit_disk(), {0.1, 0.2}, r, 128, LineMode::flux), 0.0, 1e-12);
    EXPECT_NEAR(line_functional_direct(real, k, unit_disk(), {0.1, 0.2}, r, 128, LineMode::circulation), 0.0, 1e-12);
    EXPECT_EQ(flux(real, k, unit_disk(), {0.1, 0.2}, r, 128), 0.0);
    EXPECT_EQ(circulation(real, k, unit_disk(), {0.1, 0.2}, r, 128), 0.0);
  }
}

TEST(Flux, SurrogateFieldStokesValues) {
  auto X = [](Vec2 q) { return Vec2{q.x * q.x, q.x * q.y}; };
  const double r = 1e-2, area = kPi * r * r;
  EXPECT_NEAR(line_functional(X, {1, 0}, r, 512, LineMode::flux) / area, 3.0, 3e-3);
  EXPECT_NEAR(line_functional(X, {1, 1}, r, 512, LineMode::circulation) / area, 1.0, 1e-3);
}

TEST(Flux, StokesConvergenceOrder) {
  // div (x^3, x y^2) = 3x^2 + 2xy, curl = y^2; the disk averages differ from
  // the point values by O(r^2).
  auto X = [](Vec2 q) { return Vec2{q.x * q.x * q.x, q.x * q.y * q.y}; };
  const Vec2 p{0.7, -0.4};
  const double dv = 3 * p.x * p.x + 2 * p.x * p.y, cv = p.y * p.y;
  double prev_f = 0, prev_c = 0;
  for (int i = 0; i < 4; ++i) {
    const double r = 0.1 * std::pow(0.5, i), area = kPi * r * r;
    const double ef = std::abs(line_functional(X, p, r, 512, LineMode::flux) / area - dv);
    const double ec = std::abs(line_functional(X, p, r, 512, LineMode::circulation) / area - cv);
    if (i > 0) {
      EXPECT_GE(std::log2(prev_f / ef), 1.9);
      EXPECT_GE(std::log2(prev_c / ec), 1.9);
    }
    prev_f = ef;
    prev_c = ec;
  }
}

TEST(Flux, TrapezoidRefinementOnSmoothField) {
  auto X = [](Vec2 q) { return Vec2{std::sin(3 * q.x) * q.y, std::exp(q.x * q.y)}; };
  double prev_diff = 1e300;
  for (int n : {16, 32, 64}) {
    const double d = std::abs(line_functional(X, {0.2, 0.1}, 0.5, 2 * n, LineMode::flux) -
                              line_functional(X, {0.2, 0.1}, 0.5, n, LineMode::flux));
    EXPECT_TRUE(d < 1e-13 || d <= prev_diff / 4) << n;
    prev_diff = d;
  }
}

TEST(Flux, SingleAtomMatchesBruteForce) {
  const double phi = 0.8, x1 = 1.4;
  const Vec2 q1{0.35, 0.95};
  const Kernel k = isotropic_kernel(phi, PolynomialRadial{{1.0, 0.0, 0.5}});
  const LevyRealization real = atoms_at({{q1, x1}});
  const Vec2 p{0.0, 0.0};
  const int N = 256;
  for (double r : {0.2, 0.07}) {
    for (LineMode m : {LineMode::flux, LineMode::circulation}) {
      double s = 0.0;
      for (int t = 0; t < N; ++t) {
        const double th = 2 * kPi * t / N;
        const double ux = std::cos(th), uy = std::sin(th);
        const double yx = p.x + r * ux, yy = p.y + r * uy;
        const double dx = yx - q1.x, dy = yy - q1.y;
        if (dx * dx + dy * dy > 1.0) continue;  // q1 outside the unit disk around y
        const double f = 1.0 + 0.5 * (dx * dx + dy * dy);
        const double Fx = (std::cos(phi) * dx - std::sin(phi) * dy) * f;
        const double Fy = (std::sin(phi) * dx + std::cos(phi) * dy) * f;
        s += m == LineMode::flux ? Fx * ux + Fy * uy : -Fx * uy + Fy * ux;
      }
      const double brute = r * (2 * kPi / N) * s * x1;
      EXPECT_NEAR(line_functional(real, k, unit_disk(), p, r, N, m), brute, 1e-13);
      EXPECT_NEAR(line_functional_direct(real, k, unit_disk(), p, r, N, m), brute, 1e-13);
    }
  }
}

TEST(Flux, GridStencilMatchesDirectEvaluation) {
  const CharacteristicTriplet t{0.0, 1.0, NoJumps{}};
  const Kernel k = isotropic_kernel(0.5, PolynomialRadial{{1.0, -0.4}});
  const AmbitSet R(Annulus{{0, 0}, 0.4, 1.0});
  const Vec2 p{0.2, -0.1};
  const double r = 0.1, h = 0.02;
  const Window w = make_window(R, {p}, r, h);
  for (std::uint32_t m = 0; m < 3; ++m) {
    const auto real = realize(t, w, h, 12, m);
    for (LineMode mode : {LineMode::flux, LineMode::circulation}) {
      const double a = line_functional(real, k, R, p, r, 64, mode);
      const double b = line_functional_direct(real, k, R, p, r, 64, mode);
      EXPECT_NEAR(a, b, 1e-10 * std::max(1.0, std::abs(b)));
    }
  }
}

TEST(Flux, TooFewNodesIsDomainError) { EXPECT_THROW(CircleQuadrature({0, 0}, 0.1, 8), Error); }

// -- decomposition --------------------------------------------------------------

TEST(Decomposition, AtomDeepInsideIsPurelyInterior) {
  const Kernel k = isotropic_kernel(0.2, PolynomialRadial{{1.0, 0.0, 0.3}});
  const LevyRealization real = atoms_at({{{0.1, 0.2}, 2.0}});
  const auto d = flux_decomposition(real, k, unit_disk(), {0, 0}, 0.1);
  EXPECT_EQ(d.boundary, 0.0);
  EXPECT_EQ(d.interior_atoms, 1u);
  EXPECT_NEAR(d.interior, 2.0 * disk_integral(k, {-0.1, -0.2}, 0.1, LineMode::flux), 1e-15);
  EXPECT_LT(d.relative_residual(), 1e-10);
}

TEST(Decomposition, CollarAtomIsPurelyBoundary) {
  const Kernel k = isotropic_kernel(0.2, PolynomialRadial{{1.0, 0.0, 0.3}});
  const LevyRealization real = atoms_at({{{0.97, 0.0}, -1.5}});
  const auto d = flux_decomposition(real, k, unit_disk(), {0, 0}, 0.1);
  EXPECT_EQ(d.interior, 0.0);
  EXPECT_EQ(d.boundary_atoms, 1u);
  EXPECT_LT(d.relative_residual(), 1e-10);
}

TEST(Decomposition, IdentityOnRandomCompoundPoisson) {
  const CharacteristicTriplet t{0.0, 0.0, CompoundPoisson{3.0, NormalJumps{0.5, 1.0}}};
  const std::vector<AmbitSet> shapes{unit_disk(), unit_square(), AmbitSet(Annulus{{0, 0}, 0.4, 1.0})};
  const std::vector<Kernel> kernels{isotropic_kernel(0.6, PolynomialRadial{{1.0, 0.0, -0.5}}),
                                    Kernel(PolynomialKernel{{{1.0, 0, 1}, {0.3, 2, 0}}, {{-0.7, 1, 1}, {1.0, 0, 0}}})};
  const Vec2 p{0.1, 0.05};
  for (const auto& R : shapes)
    for (const auto& k : kernels)
      for (std::uint32_t m = 0; m < 5; ++m) {
        auto a = std::get<AtomRealization>(realize(t, make_window(R, {p}, 0.2, 0.01), 0.01, 44, m));
        a.drift = 0.0;
        for (LineMode mode : {LineMode::flux, LineMode::circulation}) {
          const auto d = flux_decomposition(LevyRealization{a}, k, R, p, 0.15, 256, mode);
          if (std::abs(d.total) < 1e-12) continue;
          EXPECT_LT(d.relative_residual(), 1e-10);
        }
      }
}

TEST(Decomposition, GridRealizationIsUnsupported) {
  const auto real = realize({0, 1, NoJumps{}}, {{-2, -2}, {2, 2}}, 0.1, 1, 0);
  try {
    flux_decomposition(real, constant_kernel({1, 0}), unit_disk(), {0, 0}, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unsupported);
  }
}

// -- classical limits -----------------------------------------------------------

TEST(LimitSigma, IncompressibleKernelGivesZero) {
  const Kernel k = isotropic_kernel(0.9, PowerLaw{1.0, -2.0});
  const AmbitSet R(Annulus{{0, 0}, 0.3, 1.0});
  const LevyRealization real = atoms_at({{{0.5, 0.1}, 1.0}, {{-0.2, 0.6}, -2.0}}, 0.7);
  EXPECT_NEAR(limit_sigma(real, k, R, {0, 0}, 0.0), 0.0, 1e-12);
}

TEST(LimitSigma, SingleAtom) {
  const Kernel k = isotropic_kernel(0.4, PolynomialRadial{{0.5, 1.0, 0.0, 0.2}});
  const Vec2 q1{0.2, -0.3}, p{0.1, 0.1};
  const LevyRealization real = atoms_at({{q1, 1.3}}, 0.25);
  EXPECT_NEAR(limit_sigma(real, k, unit_disk(), p, 0.25), k.div(p - q1) * 1.3, 1e-14);
  EXPECT_NEAR(limit_omega(real, k, unit_disk(), p, 0.25), k.curl(p - q1) * 1.3, 1e-14);
}

TEST(LimitSigma, NormalisedFluxMatchesPathwise) {
  // Pathwise the collar (boundary within r) empties as r -> 0. At rate 3 a
  // typical path has no atom within r = 1e-2 of the boundary.
  const CharacteristicTriplet t{0.2, 0.0, CompoundPoisson{3.0, NormalJumps{0.3, 1.0}}};
  const Kernel k = isotropic_kernel(0.0, PolynomialRadial{{1.0, 0.0, -1.0}});
  const Vec2 p{0, 0};
  const double r = 1e-2;
  const Window w = make_window(unit_disk(), {p}, r, 0.01);
  std::vector<double> rel;
  for (std::uint32_t m = 0; m < 40; ++m) {
    const auto real = realize(t, w, 0.01, 9, m);
    const double s = limit_sigma(real, k, unit_disk(), p);
    const double f = flux(real, k, unit_disk(), p, r, 256) / (kPi * r * r);
    if (std::abs(s) > 1e-6) rel.push_back(std::abs(f - s) / std::abs(s));
  }
  std::sort(rel.begin(), rel.end());
  EXPECT_LT(rel[rel.size() / 2], 0.02);
}

// -- partial circle integrals -----------------------------------------------------

TEST(PartialCircle, TangentCirclesVanish) {
  const Kernel k = constant_kernel({1, 0});
  for (double s : {-1.0, 1.0})
    for (int side : {1, 2}) {
      const double G = partial_circle_integral(k, unit_disk(), {1, 0}, s, 1e-3, side, LineMode::flux);
      EXPECT_LT(std::abs(G), 1e-3);
    }
}

TEST(PartialCircle, HalfCircleLimits) {
  const Kernel k = constant_kernel({1, 0});
  const double r = 1e-3;
  EXPECT_NEAR(partial_circle_integral(k, unit_disk(), {1, 0}, 0.0, r, 2, LineMode::flux) / r, 2.0, 0.04);
  EXPECT_NEAR(partial_circle_integral(k, unit_disk(), {1, 0}, 0.0, r, 1, LineMode::flux) / r, -2.0, 0.04);
}

TEST(PartialCircle, ChordFormulaAcrossOffsets) {
  // r^{-1} G^i -> (-1)^i 2 sqrt(1 - s^2) F(q) . u(q) on a straight edge.
  const Kernel k = constant_kernel({0.3, -1.2});
  const Vec2 q{0.4, 0.0};
  const double r = 1e-3, Fu = 1.2;  // u = (0, -1) on the bottom edge
  for (double s : {-0.8, -0.3, 0.0, 0.5, 0.9})
    for (int side : {1, 2}) {
      const double G = partial_circle_integral(k, unit_square(), q, s, r, side, LineMode::flux) / r;
      const double expect = (side == 1 ? -1.0 : 1.0) * 2 * std::sqrt(1 - s * s) * Fu;
      EXPECT_NEAR(G, expect, 1e-9) << s << " " << side;
    }
}

TEST(PartialCircle, CornerIsDomainError) {
  try {
    partial_circle_integral(constant_kernel({1, 0}), unit_square(), {0, 0}, 0.0, 1e-3, 1, LineMode::flux);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
  }
}

// -- boundary limit fields -------------------------------------------------------

TEST(LimitField, GaussianVarianceIsLineIntegral) {
  const int M = 10000;
  std::vector<double> v(M);
  for (int m = 0; m < M; ++m)
    v[m] = simulate_limit_field(unit_disk(), constant_kernel({1, 0}), gaussian_seed(1.0), 2 * kPi / 128, 3, m,
                                {{0, 0}}, LineMode::flux)[0];
  double s = 0, s2 = 0;
  for (double x : v) {
    s += x;
    s2 += x * x;
  }
  const double var = s2 / M - (s / M) * (s / M);
  EXPECT_NEAR(var, kPi, 0.05 * kPi);
}

TEST(LimitField, ZeroSeedScaleGivesZero) {
  const auto v = simulate_limit_field(unit_disk(), constant_kernel({1, 0}), gaussian_seed(0.0), 0.1, 3, 0,
                                      {{0, 0}, {1, 1}}, LineMode::flux);
  for (double x : v) EXPECT_EQ(x, 0.0);
}

TEST(LimitField, MeshRefinementKeepsTheLaw) {
  const SeedStableParams seed{0.5, 0.5, 1.5, 0.0, 0.0};
  const Kernel k = isotropic_kernel(0.3, PolynomialRadial{{1.0, 0.5}});
  const int M = 4000;
  std::vector<double> a(M), b(M);
  for (int m = 0; m < M; ++m) {
    a[m] = simulate_limit_field(unit_disk(), k, seed, 0.2, 5, m, {{0, 0}}, LineMode::flux)[0];
    b[m] = simulate_limit_field(unit_disk(), k, seed, 0.1, 6, m, {{0, 0}}, LineMode::flux)[0];
  }
  for (double z : {0.3, 1.0, 2.0})
    EXPECT_LT(std::abs(empirical_cf(a, z) - empirical_cf(b, z)), 4.0 * std::sqrt(2.0 / M)) << z;
}

TEST(LimitField, DistinctPointsAreUncorrelated) {
  const int M = 5000;
  double s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0;
  for (int m = 0; m < M; ++m) {
    const auto v = simulate_limit_field(unit_disk(), isotropic_kernel(0.0, PolynomialRadial{{1.0}}), gaussian_seed(1.0),
                                        0.1, 8, m, {{0, 0}, {0.3, 0.2}}, LineMode::flux);
    s1 += v[0];
    s2 += v[1];
    s11 += v[0] * v[0];
    s22 += v[1] * v[1];
    s12 += v[0] * v[1];
  }
  const double c = s12 / M - (s1 / M) * (s2 / M);
  const double sd1 = std::sqrt(s11 / M - (s1 / M) * (s1 / M)), sd2 = std::sqrt(s22 / M - (s2 / M) * (s2 / M));
  EXPECT_LT(std::abs(c / (sd1 * sd2)), 4.0 / std::sqrt(M));
}

// -- characteristic-function oracles -------------------------------------------

TEST(CfLimitExact, GaussianDiskValue) {
  EXPECT_NEAR(cf_limit_exact(gaussian_seed(1.0), constant_kernel({1, 0}), unit_disk(), 1.0).real(), -kPi / 2, 1e-12);
  EXPECT_EQ(cf_limit_exact(gaussian_seed(1.0), constant_kernel({1, 0}), unit_disk(), 0.0), cplx(0.0, 0.0));
}

TEST(CfLimitExact, StableMatchesSimulatedLimitField) {
  const SeedStableParams seed{0.5, 0.5, 1.5, 0.0, 0.0};
  const Kernel k = constant_kernel({1, 0});
  const int M = 10000;
  std::vector<double> v(M);
  for (int m = 0; m < M; ++m)
    v[m] = simulate_limit_field(unit_disk(), k, seed, 2 * kPi / 128, 13, m, {{0, 0}}, LineMode::flux)[0];
  for (double z : {0.25, 0.5, 1.0, 2.0}) {
    const cplx exact = std::exp(cf_limit_exact(seed, k, unit_disk(), z));
    EXPECT_LT(std::abs(empirical_cf(v, z) - exact), 0.02) << z;
  }
}

TEST(CfFluxExact, ZeroAndDeterministicBasis) {
  const Kernel k = isotropic_kernel(0.4, PolynomialRadial{{1.0, 0.3}});
  EXPECT_EQ(cf_flux_exact({0, 1, NoJumps{}}, k, unit_disk(), {0, 0}, 0.1, 0.0), cplx(0.0, 0.0));
  const cplx c = cf_flux_exact({2.0, 0, NoJumps{}}, k, unit_disk(), {0, 0}, 0.1, 1.3);
  EXPECT_LT(std::abs(c), 1e-6);
}

TEST(CfFluxExact, GaussianMatchesSimulatedFluxes) {
  const CharacteristicTriplet t{0.0, 1.0, NoJumps{}};
  const Kernel k = constant_kernel({1, 0});
  const double r = 0.1, h = 0.01;
  const Vec2 p{0, 0};
  const CfFluxOracle oracle(t, k, unit_disk(), r);
  const auto st = compile_stencil(k, unit_disk(), p, r, h, 256, LineMode::flux);
  const Window w = make_window(unit_disk(), {p}, r, h);
  const int M = 2000;
  std::vector<double> v(M);
  for (int m = 0; m < M; ++m) v[m] = apply_stencil(st, GridRealization::over(t, w, h, 14, m));
  // the Gaussian cumulant is -b^2 z^2 int g^2 / 2
  EXPECT_NEAR(oracle.cumulant(1.0).real(), -0.5 * oracle.g2_integral(), 1e-9);
  const double sd = std::sqrt(oracle.g2_integral());
  for (double u : {-2.0, -1.0, -0.5, 0.5, 1.0, 1.5}) {
    const double z = u / sd;
    EXPECT_LT(std::abs(empirical_cf(v, z) - oracle.cf(z)), 3.0 / std::sqrt(M)) << u;
  }
}

TEST(CfFluxExact, CompoundPoissonMatchesAtomFluxes) {
  const CharacteristicTriplet t{0.0, 0.0, CompoundPoisson{40.0, DiscreteJumps{{-1.0, 2.0}, {0.5, 0.5}}}};
  const Kernel k = isotropic_kernel(0.0, PolynomialRadial{{1.0, 0.0, 0.5}});
  const double r = 0.2;
  const Vec2 p{0, 0};
  const CfFluxOracle oracle(t, k, unit_disk(), r);
  const Window w = make_window(unit_disk(), {p}, r, 0.01);
  const int M = 2000;
  std::vector<double> v(M);
  for (int m = 0; m < M; ++m) v[m] = flux(realize(t, w, 0.01, 15, m), k, unit_disk(), p, r, 256);
  for (double z : {-3.0, -1.0, 0.5, 2.0, 4.0})
    EXPECT_LT(std::abs(empirical_cf(v, z) - oracle.cf(z)), 3.0 / std::sqrt(M)) << z;
}
