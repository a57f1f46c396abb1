#pragma once
// Planar quadrature rules: polar bands, circular sectors, bilinear quads,
// convex polygons, and whole ambit sets.

#include <vector>

#include "ambit_geometry.hpp"
#include "numeric.hpp"

namespace ambit {

struct QuadNode {
  Vec2 q;
  double w;
};
using Rule2D = std::vector<QuadNode>;

inline void append(Rule2D& dst, const Rule2D& src, double scale = 1.0) {
  dst.reserve(dst.size() + src.size());
  for (const auto& n : src) dst.push_back({n.q, n.w * scale});
}

// Polar band {c + rho e(theta) : r0 <= rho <= r1, th0 <= theta <= th1}.
// Full turns use the periodic trapezoid rule in theta, partial ones
// Gauss-Legendre.
// With sine_rho the radial nodes are pushed towards both radial ends.
inline Rule2D polar_rule(Vec2 c, double r0, double r1, int n_rho, int n_theta, double th0 = 0.0,
                         double th1 = 2.0 * kPi, bool sine_rho = false) {
  Rule2D out;
  if (r1 <= r0) return out;
  const auto& gr = GaussLegendre::get(n_rho);
  const bool full = std::abs(th1 - th0 - 2.0 * kPi) < 1e-14;
  const auto& gt = GaussLegendre::get(n_theta);
  out.reserve(static_cast<std::size_t>(n_rho) * n_theta);
  for (int a = 0; a < n_rho; ++a) {
    double x = gr.x[a], wx = gr.w[a];
    if (sine_rho) {
      wx *= kPi / 2.0 * std::cos(kPi * x / 2.0);
      x = std::sin(kPi * x / 2.0);
    }
    const double rho = 0.5 * (r0 + r1) + 0.5 * (r1 - r0) * x;
    const double wr = 0.5 * (r1 - r0) * wx * rho;
    for (int b = 0; b < n_theta; ++b) {
      double th, wt;
      if (full) {
        th = th0 + 2.0 * kPi * b / n_theta;
        wt = 2.0 * kPi / n_theta;
      } else {
        th = 0.5 * (th0 + th1) + 0.5 * (th1 - th0) * gt.x[b];
        wt = 0.5 * (th1 - th0) * gt.w[b];
      }
      out.push_back({c + unit_at(th) * rho, wr * wt});
    }
  }
  return out;
}

// Bilinear quadrilateral a-b-c-d (counter-clockwise), tensor Gauss-Legendre.
// With sine_v the v-direction uses v = sin(pi t / 2), which absorbs square
// root behaviour at both v-ends.
inline Rule2D quad_rule(Vec2 a, Vec2 b, Vec2 c, Vec2 d, int nu, int nv, bool sine_v = false) {
  Rule2D out;
  const auto& gu = GaussLegendre::get(nu);
  const auto& gv = GaussLegendre::get(nv);
  for (int i = 0; i < nu; ++i) {
    const double u = gu.x[i];
    for (int j = 0; j < nv; ++j) {
      double v = gv.x[j], wv = gv.w[j];
      if (sine_v) {
        const double t = v;
        v = std::sin(kPi * t / 2.0);
        wv *= kPi / 2.0 * std::cos(kPi * t / 2.0);
      }
      const double s = 0.5 * (1 + u), t = 0.5 * (1 + v);
      const Vec2 p = a * ((1 - s) * (1 - t)) + b * (s * (1 - t)) + c * (s * t) + d * ((1 - s) * t);
      const Vec2 ps = (b - a) * (1 - t) + (c - d) * t;
      const Vec2 pt = (d - a) * (1 - s) + (c - b) * s;
      const double J = std::abs(cross(ps, pt)) * 0.25;
      out.push_back({p, gu.w[i] * wv * J});
    }
  }
  return out;
}

inline Rule2D triangle_rule(Vec2 a, Vec2 b, Vec2 c, int n) {
  // Collapsed quadrilateral with d = c.
  return quad_rule(a, b, c, c, n, n);
}

inline Rule2D polygon_rule(const std::vector<Vec2>& v, int n) {
  Rule2D out;
  if (v.size() < 3) return out;
  Vec2 g{0, 0};
  for (const auto& x : v) g += x;
  g = g / static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) append(out, triangle_rule(g, v[i], v[(i + 1) % v.size()], n));
  return out;
}

inline Rule2D simple_shape_rule(const BoundaryComponent& c, int n) {
  if (c.is_circle) return polar_rule(c.center, 0.0, c.radius, n, 2 * n);
  return polygon_rule(c.vertices, n);
}

// Rule for the whole set. Concentric circular holes use polar bands, other
// holes subtract their own rule (the integrand must then be regular on the
// holes too).
inline Rule2D set_rule(const AmbitSet& set, int n) {
  const auto& comps = set.components();
  const auto& outer = comps.front();
  Rule2D out;
  if (outer.is_circle && comps.size() == 2 && comps[1].is_circle &&
      norm(comps[1].center - outer.center) == 0.0) {
    return polar_rule(outer.center, comps[1].radius, outer.radius, n, 2 * n);
  }
  out = simple_shape_rule(outer, n);
  for (std::size_t i = 1; i < comps.size(); ++i) append(out, simple_shape_rule(comps[i], n), -1.0);
  return out;
}

template <class F>
auto integrate_rule(const Rule2D& rule, F&& f) {
  using R = decltype(f(Vec2{}));
  R s{};
  for (const auto& n : rule) s += f(n.q) * n.w;
  return s;
}

}  // namespace ambit
