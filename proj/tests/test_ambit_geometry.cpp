#include <gtest/gtest.h>

#include <random>

#include "ambit/ambit_geometry.hpp"

using namespace ambit;

namespace {

AmbitSet annulus() { return AmbitSet(Annulus{{0, 0}, 0.5, 1.0}); }

// Leb{q : d(q, boundary) <= r} by midpoint grid counting over the bounding box.
double grid_parallel_area(const AmbitSet& s, double r, int n) {
  auto [lo, hi] = s.bounding_box();
  lo = lo - Vec2{2 * r, 2 * r};
  hi = hi + Vec2{2 * r, 2 * r};
  const double dx = (hi.x - lo.x) / n, dy = (hi.y - lo.y) / n;
  long count = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (s.boundary_distance({lo.x + (i + 0.5) * dx, lo.y + (j + 0.5) * dy}) <= r) ++count;
  return count * dx * dy;
}

}  // namespace

// -- membership and distance ---------------------------------------------------

TEST(Contains, Examples) {
  EXPECT_TRUE(unit_disk().contains({0, 0}));
  EXPECT_FALSE(unit_disk().contains({2, 0}));
  EXPECT_FALSE(annulus().contains({0.25, 0}));
  EXPECT_TRUE(annulus().contains({0.75, 0}));
}

TEST(Contains, BoundaryPointsAreInside) {
  EXPECT_TRUE(unit_disk().contains({1, 0}));
  EXPECT_TRUE(unit_square().contains({1, 0.5}));
  EXPECT_TRUE(annulus().contains({0, -0.5}));
}

TEST(BoundaryDistance, Examples) {
  EXPECT_DOUBLE_EQ(unit_disk().boundary_distance({0, 0}), 1.0);
  EXPECT_NEAR(unit_disk().boundary_distance({1.3, 0}), 0.3, 1e-15);
  EXPECT_DOUBLE_EQ(unit_square().boundary_distance({0.5, 0.5}), 0.5);
}

TEST(BoundaryDistance, SquareExteriorCorner) {
  EXPECT_NEAR(unit_square().boundary_distance({2, 2}), std::sqrt(2.0), 1e-15);
}

TEST(BoundaryDistance, ConsistentWithContains) {
  // Along any segment crossing the boundary once, membership flips exactly where
  // the distance vanishes.
  const AmbitSet sets[] = {unit_disk(), unit_square(), annulus()};
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  for (const auto& s : sets) {
    for (int k = 0; k < 2000; ++k) {
      const Vec2 q{U(g), U(g)};
      const double d = s.boundary_distance(q);
      if (d < 10 * s.tol_boundary()) continue;
      // contains is locally constant away from the boundary
      const Vec2 e = unit_at(U(g) * 3.0);
      EXPECT_EQ(s.contains(q), s.contains(q + e * (0.9 * d)));
    }
  }
}

TEST(BoundaryDistance, ZeroExactlyOnBoundarySamples) {
  for (const auto& s : {unit_disk(), unit_square(), annulus()}) {
    for (const auto& a : s.discretize_boundary(0.05).arcs) {
      EXPECT_LT(s.boundary_distance(a.midpoint), s.tol_boundary());
      EXPECT_TRUE(s.contains(a.midpoint));
    }
  }
}

// -- normals -------------------------------------------------------------------

TEST(OutwardNormal, Examples) {
  const Vec2 n = unit_disk().outward_normal({0, 1});
  EXPECT_NEAR(n.x, 0.0, 1e-15);
  EXPECT_NEAR(n.y, 1.0, 1e-15);
  const Vec2 h = annulus().outward_normal({0.5, 0});
  EXPECT_NEAR(h.x, -1.0, 1e-15);
  EXPECT_NEAR(h.y, 0.0, 1e-15);
  const Vec2 c = unit_square().outward_normal({0, 0});
  EXPECT_EQ(c.x, 0.0);
  EXPECT_EQ(c.y, 0.0);
}

TEST(OutwardNormal, OffBoundaryIsDomainError) {
  try {
    unit_disk().outward_normal({0.5, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
  }
}

TEST(OutwardNormal, UnitLengthAndOrthogonalToTangent) {
  const AmbitSet sets[] = {unit_disk(), unit_square(), annulus(),
                           AmbitSet(SetDifference{Disk{{0, 0}, 2.0},
                                                  {ConvexPolygon{{{-0.5, -0.5}, {0.5, -0.5}, {0, 0.5}}}}})};
  for (const auto& s : sets)
    for (const auto& a : s.discretize_boundary(0.07).arcs) {
      const Vec2 n = s.outward_normal(a.midpoint);
      EXPECT_NEAR(norm(n), 1.0, 1e-12);
      EXPECT_NEAR(dot(n, a.tangent), 0.0, 1e-12);
      EXPECT_NEAR(norm(n - a.normal), 0.0, 1e-12);
      // a step along the normal leaves R
      EXPECT_FALSE(s.contains(a.midpoint + n * 1e-6));
      EXPECT_TRUE(s.contains(a.midpoint - n * 1e-6));
    }
}

TEST(OutwardNormal, HoleOrientationFlipsNormal) {
  // The same circle as an outer boundary and as a hole has opposite normals.
  const AmbitSet disk(Disk{{0, 0}, 0.5});
  const AmbitSet holed = annulus();
  for (double th : {0.1, 1.3, 2.9, 4.4}) {
    const Vec2 q = unit_at(th) * 0.5;
    const Vec2 a = disk.outward_normal(q), b = holed.outward_normal(q);
    EXPECT_NEAR(norm(a + b), 0.0, 1e-15);
  }
}

// -- perimeter and area ----------------------------------------------------------

TEST(Perimeter, AnalyticValues) {
  EXPECT_NEAR(unit_disk().perimeter(), 2 * kPi, 1e-9);
  EXPECT_NEAR(unit_square().perimeter(), 4.0, 1e-9);
  EXPECT_NEAR(annulus().perimeter(), 3 * kPi, 1e-9);
  EXPECT_NEAR(annulus().area(), kPi * 0.75, 1e-12);
  const AmbitSet tri(ConvexPolygon{{{0, 0}, {3, 0}, {0, 4}}});
  EXPECT_NEAR(tri.perimeter(), 12.0, 1e-9);
  EXPECT_NEAR(tri.area(), 6.0, 1e-12);
}

TEST(Polygon, ClockwiseInputIsReoriented) {
  const AmbitSet s(ConvexPolygon{{{0, 0}, {0, 1}, {1, 1}, {1, 0}}});
  EXPECT_NEAR(s.area(), 1.0, 1e-15);
  const Vec2 n = s.outward_normal({0.5, 0});
  EXPECT_NEAR(n.y, -1.0, 1e-15);
}

TEST(Polygon, NonConvexIsConfigError) {
  try {
    AmbitSet(ConvexPolygon{{{0, 0}, {2, 0}, {1, 0.5}, {2, 2}, {0, 2}}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

TEST(SetDifference, OverlappingHolesRejected) {
  EXPECT_THROW(AmbitSet(SetDifference{Disk{{0, 0}, 3.0}, {Disk{{-0.3, 0}, 0.5}, Disk{{0.3, 0}, 0.5}}}),
               Error);
  EXPECT_THROW(AmbitSet(SetDifference{Disk{{0, 0}, 1.0}, {Disk{{0.8, 0}, 0.5}}}), Error);
  EXPECT_THROW(AmbitSet(Annulus{{0, 0}, 1.0, 0.5}), Error);
}

// -- parallel sets -----------------------------------------------------------

TEST(ParallelSetArea, Examples) {
  EXPECT_NEAR(unit_disk().parallel_set_area(0.1), 4 * kPi * 0.1, 1e-12);
  EXPECT_NEAR(unit_square().parallel_set_area(0.1), 0.8 + kPi * 0.01 - 0.04, 1e-12);
  EXPECT_NEAR(annulus().parallel_set_area(0.05), 4 * kPi * 0.05 + 4 * kPi * 0.5 * 0.05, 1e-12);
}

TEST(ParallelSetArea, MatchesGridCounting) {
  // Independent oracle: count grid cells within distance r of the boundary.
  const AmbitSet sets[] = {unit_disk(), unit_square(), annulus(),
                           AmbitSet(ConvexPolygon{{{0, 0}, {2, 0}, {2.5, 1}, {0.5, 1.5}}})};
  for (const auto& s : sets) {
    const double r = 0.08;
    const double grid = grid_parallel_area(s, r, 1500);
    EXPECT_NEAR(s.parallel_set_area(r), grid, 3e-3 * grid);
  }
}

TEST(ParallelSetArea, MergingComponentsIsGeometryError) {
  try {
    annulus().parallel_set_area(0.3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::geometry);
    EXPECT_NE(std::string(e.what()).find("0 and 1"), std::string::npos);
  }
}

TEST(ParallelSetArea, RatioMonotoneToLimitForConvexShapes) {
  // For a convex polygon the ratio is 2P + (pi - sum cot(theta_i / 2)) r, and the
  // cotangent sum exceeds pi, so the approach is monotone from below.
  for (const auto& s : {unit_square(), AmbitSet(ConvexPolygon{{{0, 0}, {1, 0}, {0, 1}}})}) {
    double prev_gap = 1e300;
    for (int k = 0; k < 12; ++k) {
      const double r = 0.1 * std::pow(0.5, k);
      const double gap = 2 * s.perimeter() - s.parallel_set_area(r) / r;
      EXPECT_GT(gap, 0.0);
      EXPECT_LT(gap, prev_gap);
      prev_gap = gap;
    }
  }
  for (double r : {0.3, 0.01, 1e-5}) EXPECT_NEAR(unit_disk().parallel_set_area(r) / r, 4 * kPi, 1e-12);
}

TEST(MinkowskiContent, Examples) {
  EXPECT_NEAR(unit_disk().minkowski_content().value, 4 * kPi, 1e-3 * 4 * kPi);
  EXPECT_NEAR(unit_square().minkowski_content().value, 8.0, 5e-3 * 8);
  EXPECT_NEAR(annulus().minkowski_content().value, 6 * kPi, 5e-3 * 6 * kPi);
}

TEST(MinkowskiContent, TwiceLengthForPolygonWithHole) {
  const AmbitSet s(SetDifference{ConvexPolygon{{{-2, -2}, {2, -2}, {2, 2}, {-2, 2}}}, {Disk{{0.5, 0}, 0.7}}});
  const double mc = s.minkowski_content().value;
  EXPECT_NEAR(mc, 2 * (16 + 2 * kPi * 0.7), 1e-6 * mc);
}

// -- boundary discretization ----------------------------------------------------

TEST(DiscretizeBoundary, Examples) {
  const auto d = unit_disk().discretize_boundary(kPi / 2);
  ASSERT_EQ(d.arcs.size(), 4u);
  for (const auto& a : d.arcs) {
    EXPECT_NEAR(a.length, kPi / 2, 1e-12);
    EXPECT_NEAR(norm(a.normal - a.midpoint), 0.0, 1e-12);
  }
  EXPECT_NEAR(unit_disk().discretize_boundary(0.01).total_length(), 2 * kPi, 1e-12);
  const auto sq = unit_square().discretize_boundary(0.3);
  for (const auto& a : sq.arcs) EXPECT_LE(a.length, 0.3);
  EXPECT_NEAR(sq.total_length(), 4.0, 1e-12);
}

TEST(DiscretizeBoundary, TotalLengthAndMesh) {
  for (const auto& s : {unit_disk(), unit_square(), annulus()})
    for (double ell : {0.5, 0.1, 0.013}) {
      const auto d = s.discretize_boundary(ell);
      EXPECT_NEAR(d.total_length(), s.perimeter(), 1e-6 * s.perimeter());
      for (const auto& a : d.arcs) EXPECT_LE(a.length, ell * (1 + 1e-12));
    }
}

TEST(DiscretizeBoundary, Deterministic) {
  const auto a = annulus().discretize_boundary(0.1), b = annulus().discretize_boundary(0.1);
  ASSERT_EQ(a.arcs.size(), b.arcs.size());
  for (std::size_t i = 0; i < a.arcs.size(); ++i) EXPECT_EQ(a.arcs[i].midpoint, b.arcs[i].midpoint);
}

TEST(DiscretizeBoundary, RefinementOrderForLipschitzIntegrand) {
  // |x - 0.3| has a kink on the square's bottom edge; the integral over the
  // boundary is known in closed form.
  const AmbitSet s = unit_square();
  auto h = [](Vec2 q) { return std::abs(q.x - 0.3) + q.y * q.y; };
  const double a = 0.5 * (0.09 + 0.49);
  const double exact = 2 * a + 0.3 + 0.7 + 2.0 / 3.0 + 1.0;
  auto integral = [&](double ell) {
    double sum = 0.0;
    for (const auto& arc : s.discretize_boundary(ell).arcs) sum += arc.length * h(arc.midpoint);
    return sum;
  };
  std::vector<double> errs;
  for (double ell : {0.1 / 3, 0.1 / 6, 0.1 / 12, 0.1 / 24}) errs.push_back(std::abs(integral(ell) - exact));
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
    if (errs[i + 1] < 1e-14) continue;
    EXPECT_GE(std::log2(errs[i] / errs[i + 1]), 0.9);
  }
}

// -- regularity diagnostic -----------------------------------------------------

TEST(Assumption1, Examples) {
  const auto d = unit_disk().assumption1_diagnostic();
  ASSERT_EQ(d.components.size(), 1u);
  EXPECT_DOUBLE_EQ(d.components[0].reach_lower_bound, 1.0);
  EXPECT_TRUE(d.components[0].corners.empty());
  EXPECT_TRUE(d.pass);

  const auto s = unit_square().assumption1_diagnostic();
  EXPECT_DOUBLE_EQ(s.components[0].reach_lower_bound, 0.0);
  EXPECT_EQ(s.components[0].corners.size(), 4u);
  EXPECT_TRUE(s.pass);

  const auto a = annulus().assumption1_diagnostic();
  EXPECT_EQ(a.components.size(), 2u);
  EXPECT_TRUE(a.pass);
  EXPECT_DOUBLE_EQ(a.components[1].reach_lower_bound, 0.5);
}
