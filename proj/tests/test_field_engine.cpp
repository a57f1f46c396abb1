#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <numeric>

#include "ambit/field_engine.hpp"

using namespace ambit;

namespace {

const Window kUnitWindow{{-1.0, -1.0}, {1.0, 1.0}};

double sum_cells(const GridRealization& g) {
  double s = 0.0;
  for (std::int64_t j = g.j0(); j < g.j0() + g.ny(); ++j)
    for (std::int64_t i = g.i0(); i < g.i0() + g.nx(); ++i) s += g.value(i, j);
  return s;
}

}  // namespace

// -- realize -------------------------------------------------------------------

TEST(Realize, DeterministicBasisCells) {
  const double h = 0.1;
  const auto real = realize({5.0, 0.0, NoJumps{}}, kUnitWindow, h, 1, 0);
  const auto& g = std::get<GridRealization>(real);
  EXPECT_EQ(g.nx() * g.ny(), 400);
  for (std::int64_t j = g.j0(); j < g.j0() + g.ny(); ++j)
    for (std::int64_t i = g.i0(); i < g.i0() + g.nx(); ++i) EXPECT_DOUBLE_EQ(g.value(i, j), 5 * h * h);
}

TEST(Realize, CellCountIsCeilOfWindowOverH) {
  const Window w{{0.0, 0.0}, {1.05, 0.33}};
  const auto g = GridRealization::over({0, 1, NoJumps{}}, w, 0.1, 1, 0);
  EXPECT_EQ(g.nx(), 11);
  EXPECT_EQ(g.ny(), 4);
}

TEST(Realize, CompoundPoissonAtomCountIsPoisson) {
  const CharacteristicTriplet t{0.0, 0.0, CompoundPoisson{2.0, NormalJumps{0, 1}}};
  const int M = 10000;
  double s = 0.0, s2 = 0.0;
  for (int m = 0; m < M; ++m) {
    const auto a = std::get<AtomRealization>(realize(t, kUnitWindow, 0.1, 17, m));
    const double n = static_cast<double>(a.atoms.size());
    s += n;
    s2 += n * n;
    for (const auto& at : a.atoms) {
      ASSERT_GE(at.q.x, -1.0);
      ASSERT_LE(at.q.x, 1.0);
      ASSERT_GE(at.q.y, -1.0);
      ASSERT_LE(at.q.y, 1.0);
    }
  }
  const double mean = s / M, var = s2 / M - mean * mean;
  EXPECT_NEAR(mean, 8.0, 0.1);
  EXPECT_NEAR(var, 8.0, 0.4);
}

TEST(Realize, GaussianCellSumIsGaussianWithAdditiveParameters) {
  // Sum over a window of area A: N(gamma A, b^2 A). Checked via its CF.
  const CharacteristicTriplet t{0.3, 1.0, NoJumps{}};
  const Window w{{0.0, 0.0}, {1.0, 1.0}};
  const int M = 1000;
  std::vector<double> sums(M);
  for (int m = 0; m < M; ++m) sums[m] = sum_cells(GridRealization::over(t, w, 0.01, 5, m));
  for (double z : {-2.0, -0.7, 0.5, 1.5}) {
    cplx emp = 0;
    for (double s : sums) emp += std::exp(cplx(0, z * s));
    emp /= static_cast<double>(M);
    const cplx exact = std::exp(cplx(-0.5 * z * z, 0.3 * z));
    EXPECT_LT(std::abs(emp - exact), 0.08) << z;
  }
}

TEST(Realize, GhWithoutApproximationIsUnsupported) {
  try {
    realize({0, 0, GHDensity{-0.5, 2.0, 0.0, 1.0}}, kUnitWindow, 0.1, 1, 0, SamplingOptions{false, 1e-3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unsupported);
  }
}

TEST(Realize, LazyAndMaterialisedGridsAgree) {
  const CharacteristicTriplet t{0.0, 0.0, StableDensity{1.0, 0.5, 1.5}};
  auto g = GridRealization::over(t, kUnitWindow, 0.2, 99, 3);
  const auto lazy = g;
  g.materialize();
  for (std::int64_t j = g.j0(); j < g.j0() + g.ny(); ++j)
    for (std::int64_t i = g.i0(); i < g.i0() + g.nx(); ++i) EXPECT_EQ(g.value(i, j), lazy.value(i, j));
}

TEST(Realize, ReplicatesAndSeedsAreIndependentStreams) {
  const CharacteristicTriplet t{0.0, 1.0, NoJumps{}};
  const auto a = GridRealization::over(t, kUnitWindow, 0.5, 1, 0);
  const auto b = GridRealization::over(t, kUnitWindow, 0.5, 1, 1);
  const auto c = GridRealization::over(t, kUnitWindow, 0.5, 2, 0);
  EXPECT_NE(a.value(0, 0), b.value(0, 0));
  EXPECT_NE(a.value(0, 0), c.value(0, 0));
  EXPECT_EQ(a.value(0, 0), GridRealization::over(t, kUnitWindow, 0.5, 1, 0).value(0, 0));
}

// -- eval_field ------------------------------------------------------------------

TEST(EvalField, DeterministicBasisGivesArea) {
  const auto real = realize({1.0, 0.0, NoJumps{}}, {{-1.1, -1.1}, {1.1, 1.1}}, 0.01, 1, 0);
  const Vec2 x = eval_field(real, constant_kernel({1, 0}), unit_disk(), {0, 0});
  EXPECT_NEAR(x.x, kPi, 1e-3 * kPi);
  EXPECT_EQ(x.y, 0.0);
}

TEST(EvalField, SingleAtomIsExact) {
  const Kernel k = isotropic_kernel(0.4, PolynomialRadial{{1.0, 0.5}});
  AtomRealization a;
  a.window = {{-3, -3}, {3, 3}};
  a.atoms = {{{0.2, 0.3}, 1.7}};
  a.drift = 0.0;
  const Vec2 p{0.5, -0.1};
  const Vec2 x = eval_field(LevyRealization{a}, k, unit_disk(), p);
  const Vec2 expect = k.eval(p - Vec2{0.2, 0.3}) * 1.7;
  EXPECT_EQ(x.x, expect.x);
  EXPECT_EQ(x.y, expect.y);
}

TEST(EvalField, AtomsMatchBruteForceSummation) {
  // Independent oracle: explicit loop with the disk test |q - p| <= 1 and the
  // kernel written out by hand.
  const CharacteristicTriplet t{0.0, 0.0, CompoundPoisson{30.0, ExponentialJumps{2.0}}};
  const double phi = 1.1;
  const Kernel k = isotropic_kernel(phi, PolynomialRadial{{0.5, 0.0, 1.0}});
  const Window w{{-2, -2}, {2, 2}};
  for (std::uint32_t m = 0; m < 20; ++m) {
    const auto real = realize(t, w, 0.1, 8, m);
    const auto& a = std::get<AtomRealization>(real);
    const Vec2 p{0.3, -0.4};
    Vec2 brute{0, 0};
    for (const auto& at : a.atoms) {
      const double dx = p.x - at.q.x, dy = p.y - at.q.y;
      if (dx * dx + dy * dy > 1.0) continue;
      const double f = 0.5 + dx * dx + dy * dy;
      brute.x += (std::cos(phi) * dx - std::sin(phi) * dy) * f * at.x;
      brute.y += (std::sin(phi) * dx + std::cos(phi) * dy) * f * at.x;
    }
    // the compensating drift: gamma - lambda E[J 1{|J| <= 1}]
    const double drift = -30.0 * (0.5 - 1.5 * std::exp(-2.0));
    EXPECT_NEAR(a.drift, drift, 1e-12);
    const Vec2 x = eval_field(real, k, unit_disk(), p) - drift_field_integral(k, unit_disk(), p, Volatility{}) * a.drift;
    EXPECT_NEAR(norm(x - brute), 0.0, 1e-12 * std::max(1.0, norm(brute)));
  }
}

TEST(EvalField, WindowOverflowIsRangeError) {
  const auto real = realize({0, 1, NoJumps{}}, kUnitWindow, 0.1, 1, 0);
  try {
    eval_field(real, constant_kernel({1, 0}), unit_disk(), {0.5, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::range);
  }
  const auto atoms = realize({0, 0, CompoundPoisson{1.0, NormalJumps{0, 1}}}, kUnitWindow, 0.1, 1, 0);
  EXPECT_THROW(eval_field(atoms, constant_kernel({1, 0}), unit_disk(), {0.5, 0}), Error);
}

TEST(EvalField, DeterministicBasisIsConstantInP) {
  AtomRealization a;
  a.window = {{-5, -5}, {5, 5}};
  a.drift = 1.3;
  const Kernel k = isotropic_kernel(0.6, PolynomialRadial{{1.0, -0.3, 0.2}});
  const Vec2 x0 = eval_field(LevyRealization{a}, k, unit_disk(), {0, 0});
  for (const Vec2 p : {Vec2{1, 2}, Vec2{-3, 0.5}, Vec2{0.01, -2}})
    EXPECT_NEAR(norm(eval_field(LevyRealization{a}, k, unit_disk(), p) - x0), 0.0, 1e-12);
  // exact drift integral: int_disk R_phi(-q) f(|q|) dq = 0 by symmetry
  EXPECT_NEAR(norm(x0), 0.0, 1e-12);
  const Vec2 c = eval_field(LevyRealization{a}, constant_kernel({1, 0}), unit_square(), {0.3, 0.1});
  EXPECT_NEAR(c.x, 1.3, 1e-12);
}

TEST(EvalField, StationaryLawAcrossPoints) {
  const CharacteristicTriplet t{0.0, 0.0, CompoundPoisson{4.0, NormalJumps{0.2, 1.0}}};
  const Kernel k = isotropic_kernel(0.0, PolynomialRadial{{1.0}});
  const std::vector<Vec2> pts{{0, 0}, {1.7, -0.8}};
  const Window w = make_window(unit_disk(), pts, 0.0, 0.1);
  const int M = 10000;
  for (double z : {0.5, 1.5}) {
    cplx c0 = 0, c1 = 0;
    for (int m = 0; m < M; ++m) {
      const auto real = realize(t, w, 0.1, 21, m);
      c0 += std::exp(cplx(0, z * eval_field(real, k, unit_disk(), pts[0]).x));
      c1 += std::exp(cplx(0, z * eval_field(real, k, unit_disk(), pts[1]).x));
    }
    EXPECT_LT(std::abs(c0 - c1) / M, 4.0 * std::sqrt(2.0 / M)) << z;
  }
}

TEST(EvalField, GridVarianceMatchesExactAcrossRefinement) {
  // Var X_1(0) = b^2 int_R |F_1(-q)|^2 dq = int_disk x^2 dq = pi / 4 for F(q) = q.
  const CharacteristicTriplet t{0.0, 1.0, NoJumps{}};
  const Kernel k = isotropic_kernel(0.0, PolynomialRadial{{1.0}});
  const int M = 10000;
  double vars[2];
  for (int s = 0; s < 2; ++s) {
    const double h = s == 0 ? 0.05 : 0.025;
    const Window w = make_window(unit_disk(), {{0, 0}}, 0.0, h);
    double a = 0, a2 = 0;
    for (int m = 0; m < M; ++m) {
      const double x = eval_field(realize(t, w, h, 31 + s, m), k, unit_disk(), {0, 0}).x;
      a += x;
      a2 += x * x;
    }
    vars[s] = a2 / M - (a / M) * (a / M);
    EXPECT_NEAR(vars[s], kPi / 4, 0.02 * kPi / 4) << h;
  }
  // MC band of a variance estimate: var * sqrt(2 / M) per estimate
  EXPECT_LT(std::abs(vars[0] - vars[1]), 3.0 * (kPi / 4) * std::sqrt(4.0 / M));
}

// -- modulated field ----------------------------------------------------------

TEST(EvalFieldModulated, UnitVolatilityEqualsPlainField) {
  const CharacteristicTriplet t{0.0, 0.0, StableDensity{1, 1, 1.5}};
  const auto real = realize(t, {{-1.5, -1.5}, {1.5, 1.5}}, 0.05, 3, 0);
  const Kernel k = isotropic_kernel(0.3, PowerLaw{1.0, 1.0});
  const Vec2 a = eval_field(real, k, unit_disk(), {0.2, 0.1});
  const Vec2 b = eval_field_modulated(real, k, unit_disk(), Volatility{ConstantVol{1.0}}, {0.2, 0.1});
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  const Vec2 c = eval_field_modulated(real, k, unit_disk(), Volatility{ConstantVol{2.0}}, {0.2, 0.1});
  EXPECT_EQ(c.x, 2 * a.x);
  EXPECT_EQ(c.y, 2 * a.y);
}

TEST(EvalFieldModulated, LatticeVolatilityWeightsEachCell) {
  // V = 3 on the right half plane and 1 on the left: with a deterministic basis
  // the field is int_R V, i.e. (3 + 1) * pi / 2 for the unit disk.
  UserLatticeVol u{{-2, -2}, 2.0, 2, 2, {1, 3, 1, 3}};
  const auto real = realize({1.0, 0.0, NoJumps{}}, {{-1.2, -1.2}, {1.2, 1.2}}, 0.005, 1, 0);
  const Vec2 x = eval_field_modulated(real, constant_kernel({1, 0}), unit_disk(), Volatility{u}, {0, 0});
  EXPECT_NEAR(x.x, 2 * kPi, 2e-3 * 2 * kPi);
}

TEST(EvalFieldModulated, IndependentGridVolatilityIsBoundedAndReproducible) {
  const Volatility v(IndependentGridVol{0.5, 1.5, 0.1}, 77, 2);
  const Volatility w(IndependentGridVol{0.5, 1.5, 0.1}, 77, 2);
  for (double x : {-0.33, 0.0, 0.71})
    for (double y : {-1.0, 0.25}) {
      EXPECT_GE(v.at({x, y}), 0.5);
      EXPECT_LE(v.at({x, y}), 1.5);
      EXPECT_EQ(v.at({x, y}), w.at({x, y}));
    }
  EXPECT_EQ(v.bound(), 1.5);
  EXPECT_THROW(Volatility(IndependentGridVol{0.0, 1.0, 0.1}), Error);
}

TEST(EvalFieldModulated, IsotropicIncrements) {
  // Isotropic kernel and disk: |X(p) - X(0)|^2 has the same law as for R_theta p.
  const CharacteristicTriplet t{0.0, 0.0, CompoundPoisson{6.0, NormalJumps{0.0, 1.0}}};
  const Kernel k = isotropic_kernel(0.7, PolynomialRadial{{1.0, -0.5}});
  const Vec2 p{0.6, 0.0}, q = rotate(p, 1.9);
  const Window w = make_window(unit_disk(), {{0, 0}, p, q}, 0.0, 0.1);
  const int M = 8000;
  double s = 0, s2 = 0;
  for (int m = 0; m < M; ++m) {
    const auto real = realize(t, w, 0.1, 41, m);
    const Vec2 x0 = eval_field(real, k, unit_disk(), {0, 0});
    const double d = norm2(eval_field(real, k, unit_disk(), p) - x0) - norm2(eval_field(real, k, unit_disk(), q) - x0);
    s += d;
    s2 += d * d;
  }
  const double mean = s / M, sd = std::sqrt(s2 / M - mean * mean);
  EXPECT_LT(std::abs(mean), 3.0 * sd / std::sqrt(M));
}

// -- dumps -------------------------------------------------------------------

TEST(Dump, RoundTripAndTripletCheck) {
  const CharacteristicTriplet t{0.1, 1.0, NoJumps{}};
  auto g = GridRealization::over(t, kUnitWindow, 0.25, 5, 1);
  g.materialize();
  const auto path = (std::filesystem::temp_directory_path() / "ambit_test_dump.bin").string();
  write_dump(path, g, 0xabcdefULL, "test-version");
  DumpHeader h;
  const auto back = read_dump(path, t, &h);
  EXPECT_EQ(back.values(), g.values());
  EXPECT_EQ(h.config_hash, 0xabcdefULL);
  EXPECT_EQ(h.version, "test-version");
  EXPECT_EQ(h.seed, 5u);
  EXPECT_EQ(h.replicate, 1u);
  try {
    read_dump(path, {0.2, 1.0, NoJumps{}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
  std::remove(path.c_str());
}
