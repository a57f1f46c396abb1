#pragma once
// Ambit sets: disks, annuli, convex polygons and differences outer \ holes.
// All distances, normals and parallel-set areas are exact for this catalogue.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "numeric.hpp"

namespace ambit {

struct Disk {
  Vec2 center{};
  double radius = 1.0;
};

struct Annulus {
  Vec2 center{};
  double inner = 0.5;
  double outer = 1.0;
};

struct ConvexPolygon {
  std::vector<Vec2> vertices;  // counter-clockwise after validation
};

// Holes are simple Jordan domains (disks or convex polygons).
using SimpleShape = std::variant<Disk, ConvexPolygon>;

struct SetDifference {
  SimpleShape outer;
  std::vector<SimpleShape> holes;
};

using JordanDomainSpec = std::variant<Disk, Annulus, ConvexPolygon, SetDifference>;

// ---------------------------------------------------------------------------
// Primitive helpers

inline double segment_distance(Vec2 q, Vec2 a, Vec2 b) {
  const Vec2 d = b - a;
  const double L2 = norm2(d);
  double t = L2 > 0 ? dot(q - a, d) / L2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(q - (a + d * t));
}

inline double polygon_area(const std::vector<Vec2>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += cross(v[i], v[(i + 1) % v.size()]);
  return 0.5 * s;
}

inline double polygon_perimeter(const std::vector<Vec2>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += norm(v[(i + 1) % v.size()] - v[i]);
  return s;
}

// Outward normal of edge i of a counter-clockwise polygon.
inline Vec2 edge_normal(const std::vector<Vec2>& v, std::size_t i) {
  const Vec2 d = v[(i + 1) % v.size()] - v[i];
  return Vec2{d.y, -d.x} / norm(d);
}

// Clip a convex polygon by the half plane {x : n.(x - a) <= 0}.
inline std::vector<Vec2> clip_halfplane(const std::vector<Vec2>& poly, Vec2 n, Vec2 a) {
  std::vector<Vec2> out;
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Vec2 P = poly[i], Q = poly[(i + 1) % m];
    const double fp = dot(n, P - a), fq = dot(n, Q - a);
    if (fp <= 0) out.push_back(P);
    if ((fp < 0 && fq > 0) || (fp > 0 && fq < 0)) out.push_back(P + (Q - P) * (fp / (fp - fq)));
  }
  return out;
}

// Points of a convex polygon at distance >= r from its boundary.
inline std::vector<Vec2> inner_parallel_polygon(const std::vector<Vec2>& v, double r) {
  std::vector<Vec2> poly = v;
  for (std::size_t i = 0; i < v.size() && !poly.empty(); ++i) {
    const Vec2 n = edge_normal(v, i);
    poly = clip_halfplane(poly, n, v[i] - n * r);
  }
  if (poly.size() < 3 || polygon_area(poly) <= 0.0) return {};
  return poly;
}

inline bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  auto orient = [](Vec2 p, Vec2 q, Vec2 r) { return cross(q - p, r - p); };
  const double o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 &&
         o4 != 0;
}

// ---------------------------------------------------------------------------
// Boundary component: a circle or a closed convex polyline, with orientation
// +1 when it bounds R from outside (traversed counter-clockwise) and -1 for a
// hole (traversed clockwise, normals pointing into the hole).

struct BoundaryComponent {
  bool is_circle = true;
  Vec2 center{};
  double radius = 0.0;
  std::vector<Vec2> vertices;  // counter-clockwise, polygons only
  int orientation = +1;

  double length() const {
    return is_circle ? 2.0 * kPi * radius : polygon_perimeter(vertices);
  }

  // Signed distance to the region enclosed by this curve (negative inside).
  double enclosed_signed_distance(Vec2 q) const {
    if (is_circle) return norm(q - center) - radius;
    double dmin = 1e300;
    bool inside = true;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      const Vec2 a = vertices[i], b = vertices[(i + 1) % vertices.size()];
      dmin = std::min(dmin, segment_distance(q, a, b));
      if (cross(b - a, q - a) < 0) inside = false;
    }
    return inside ? -dmin : dmin;
  }

  double distance(Vec2 q) const { return std::abs(enclosed_signed_distance(q)); }

  std::size_t corner_count() const { return is_circle ? 0 : vertices.size(); }

  // Leb of the r-neighbourhood of this curve.
  double parallel_area(double r) const {
    if (is_circle) return r <= radius ? 4.0 * kPi * radius * r : kPi * (radius + r) * (radius + r);
    const double A = polygon_area(vertices);
    const double P = polygon_perimeter(vertices);
    const auto inner = inner_parallel_polygon(vertices, r);
    const double Ai = inner.empty() ? 0.0 : polygon_area(inner);
    return A + P * r + kPi * r * r - Ai;
  }
};

// Distance between two disjoint boundary curves.
inline double component_separation(const BoundaryComponent& a, const BoundaryComponent& b) {
  if (a.is_circle && b.is_circle) {
    const double d = norm(a.center - b.center);
    const double big = std::max(a.radius, b.radius), small = std::min(a.radius, b.radius);
    if (d + small <= big) return big - d - small;
    if (d >= a.radius + b.radius) return d - a.radius - b.radius;
    return 0.0;
  }
  if (a.is_circle != b.is_circle) {
    const BoundaryComponent& c = a.is_circle ? a : b;
    const BoundaryComponent& p = a.is_circle ? b : a;
    double gmin = 1e300, gmax = 0.0;
    for (std::size_t i = 0; i < p.vertices.size(); ++i) {
      const Vec2 u = p.vertices[i], w = p.vertices[(i + 1) % p.vertices.size()];
      gmin = std::min(gmin, segment_distance(c.center, u, w));
      gmax = std::max(gmax, norm(u - c.center));
    }
    if (c.radius >= gmin && c.radius <= gmax) return 0.0;
    return std::min(std::abs(gmin - c.radius), std::abs(gmax - c.radius));
  }
  double d = 1e300;
  const auto& va = a.vertices;
  const auto& vb = b.vertices;
  for (std::size_t i = 0; i < va.size(); ++i)
    for (std::size_t j = 0; j < vb.size(); ++j)
      if (segments_intersect(va[i], va[(i + 1) % va.size()], vb[j], vb[(j + 1) % vb.size()]))
        return 0.0;
  for (std::size_t i = 0; i < va.size(); ++i)
    for (std::size_t j = 0; j < vb.size(); ++j) {
      d = std::min(d, segment_distance(va[i], vb[j], vb[(j + 1) % vb.size()]));
      d = std::min(d, segment_distance(vb[j], va[i], va[(i + 1) % va.size()]));
    }
  return d;
}

struct BoundaryArc {
  Vec2 midpoint;
  double length;
  Vec2 normal;   // outward from R (into the hole for hole components)
  Vec2 tangent;  // perp(normal)
  std::size_t component;
};

struct BoundaryDiscretization {
  std::vector<BoundaryArc> arcs;
  double mesh = 0.0;

  double total_length() const {
    double s = 0.0;
    for (const auto& a : arcs) s += a.length;
    return s;
  }
};

struct ComponentDiagnostic {
  std::string kind;
  double length = 0.0;
  double reach_lower_bound = 0.0;
  std::vector<Vec2> corners;
};

struct Assumption1Report {
  std::vector<ComponentDiagnostic> components;
  bool pass = true;
  std::string note;
};

struct MinkowskiResult {
  double value = 0.0;
  std::vector<double> radii;
  std::vector<double> ratios;
};

// ---------------------------------------------------------------------------

class AmbitSet {
 public:
  AmbitSet() : AmbitSet(JordanDomainSpec{Disk{}}) {}

  explicit AmbitSet(JordanDomainSpec spec) : spec_(std::move(spec)) {
    std::visit([this](auto& s) { build(s); }, spec_);
    diameter_ = compute_diameter();
    tol_ = 1e-9 * diameter_;
    validate_components();
  }

  const JordanDomainSpec& spec() const { return spec_; }
  const std::vector<BoundaryComponent>& components() const { return comps_; }
  double diameter() const { return diameter_; }
  double tol_boundary() const { return tol_; }

  bool contains(Vec2 q) const {
    for (const auto& c : comps_) {
      const double sd = c.enclosed_signed_distance(q);
      if (c.orientation > 0 ? sd > tol_ : sd < -tol_) return false;
    }
    return true;
  }

  double boundary_distance(Vec2 q) const {
    double d = 1e300;
    for (const auto& c : comps_) d = std::min(d, c.distance(q));
    return d;
  }

  // Membership and boundary distance in one pass.
  std::pair<bool, double> locate(Vec2 q) const {
    bool in = true;
    double d = 1e300;
    for (const auto& c : comps_) {
      const double sd = c.enclosed_signed_distance(q);
      if (c.orientation > 0 ? sd > tol_ : sd < -tol_) in = false;
      d = std::min(d, std::abs(sd));
    }
    return {in, d};
  }

  Vec2 outward_normal(Vec2 q) const {
    std::size_t best = 0;
    double d = 1e300;
    for (std::size_t i = 0; i < comps_.size(); ++i) {
      const double di = comps_[i].distance(q);
      if (di < d) {
        d = di;
        best = i;
      }
    }
    if (!(d < tol_)) {
      std::ostringstream os;
      os << "point (" << q.x << ", " << q.y << ") is not on the boundary (distance " << d << ")";
      fail(ErrorKind::domain, os.str());
    }
    return component_normal(comps_[best], q);
  }

  bool is_corner(Vec2 q) const {
    for (const auto& c : comps_)
      if (!c.is_circle)
        for (const auto& v : c.vertices)
          if (norm(q - v) < tol_) return true;
    return false;
  }

  double perimeter() const {
    double s = 0.0;
    for (const auto& c : comps_) s += c.length();
    return s;
  }

  double area() const {
    double s = 0.0;
    for (const auto& c : comps_) {
      const double a = c.is_circle ? kPi * c.radius * c.radius : polygon_area(c.vertices);
      s += c.orientation * a;
    }
    return s;
  }

  // Smallest pairwise distance between boundary components (inf if one).
  double min_separation(std::size_t* ia = nullptr, std::size_t* ib = nullptr) const {
    double s = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < comps_.size(); ++i)
      for (std::size_t j = i + 1; j < comps_.size(); ++j) {
        const double d = component_separation(comps_[i], comps_[j]);
        if (d < s) {
          s = d;
          if (ia) *ia = i;
          if (ib) *ib = j;
        }
      }
    return s;
  }

  double parallel_set_area(double r) const {
    require(r > 0.0, ErrorKind::domain, "parallel_set_area needs r > 0");
    std::size_t i = 0, j = 0;
    const double sep = min_separation(&i, &j);
    if (!(r < sep / 2.0)) {
      std::ostringstream os;
      os << "boundary components " << i << " and " << j << " merge at r = " << r
         << " (separation " << sep << ")";
      fail(ErrorKind::geometry, os.str());
    }
    double s = 0.0;
    for (const auto& c : comps_) s += c.parallel_area(r);
    return s;
  }

  // lim_{r->0} Leb((dR)_{+r}) / r by Richardson extrapolation on r0 2^-k.
  MinkowskiResult minkowski_content() const {
    double r0 = 0.05 * diameter_;
    const double sep = min_separation();
    if (std::isfinite(sep)) r0 = std::min(r0, 0.45 * sep);
    MinkowskiResult res;
    double prev_ext = std::numeric_limits<double>::quiet_NaN();
    double prev_ratio = parallel_set_area(r0) / r0;
    res.radii.push_back(r0);
    res.ratios.push_back(prev_ratio);
    for (int k = 1; k <= 30; ++k) {
      const double r = r0 * std::pow(0.5, k);
      const double ratio = parallel_set_area(r) / r;
      res.radii.push_back(r);
      res.ratios.push_back(ratio);
      const double ext = 2.0 * ratio - prev_ratio;
      if (std::isfinite(prev_ext) && std::abs(ext - prev_ext) <= 1e-10 * std::abs(ext)) {
        res.value = ext;
        return res;
      }
      prev_ext = ext;
      prev_ratio = ratio;
    }
    throw NumericalError("Minkowski content sequence did not converge", prev_ext, res.ratios);
  }

  BoundaryDiscretization discretize_boundary(double ell) const {
    require(ell > 0.0, ErrorKind::domain, "discretize_boundary needs a positive mesh");
    BoundaryDiscretization out;
    out.mesh = ell;
    for (std::size_t ci = 0; ci < comps_.size(); ++ci) {
      const auto& c = comps_[ci];
      if (c.is_circle) {
        const double L = c.length();
        const int n = std::max(1, static_cast<int>(std::ceil(L / ell - 1e-9)));
        for (int k = 0; k < n; ++k) {
          const double th = 2.0 * kPi * (k + 0.5) / n;
          const Vec2 e = unit_at(th);
          const Vec2 nrm = e * static_cast<double>(c.orientation);
          out.arcs.push_back({c.center + e * c.radius, L / n, nrm, perp(nrm), ci});
        }
      } else {
        const auto& v = c.vertices;
        for (std::size_t i = 0; i < v.size(); ++i) {
          const Vec2 a = v[i], b = v[(i + 1) % v.size()];
          const double len = norm(b - a);
          const int n = std::max(1, static_cast<int>(std::ceil(len / ell - 1e-9)));
          const Vec2 nrm = edge_normal(v, i) * static_cast<double>(c.orientation);
          for (int k = 0; k < n; ++k) {
            const Vec2 m = a + (b - a) * ((k + 0.5) / n);
            out.arcs.push_back({m, len / n, nrm, perp(nrm), ci});
          }
        }
      }
    }
    return out;
  }

  Assumption1Report assumption1_diagnostic() const {
    Assumption1Report rep;
    for (const auto& c : comps_) {
      ComponentDiagnostic d;
      d.kind = c.is_circle ? (c.orientation > 0 ? "circle" : "circle-hole")
                           : (c.orientation > 0 ? "polygon" : "polygon-hole");
      d.length = c.length();
      d.reach_lower_bound = c.is_circle ? c.radius : 0.0;
      if (!c.is_circle) d.corners = c.vertices;
      rep.components.push_back(d);
    }
    rep.pass = true;
    rep.note = "circles have positive reach; convex polygons are piecewise C^{1,1} with finitely many corners";
    return rep;
  }

  // Axis-aligned bounding box of R.
  std::pair<Vec2, Vec2> bounding_box() const {
    Vec2 lo{1e300, 1e300}, hi{-1e300, -1e300};
    for (const auto& c : comps_) {
      if (c.orientation < 0) continue;
      if (c.is_circle) {
        lo = {std::min(lo.x, c.center.x - c.radius), std::min(lo.y, c.center.y - c.radius)};
        hi = {std::max(hi.x, c.center.x + c.radius), std::max(hi.y, c.center.y + c.radius)};
      } else {
        for (const auto& v : c.vertices) {
          lo = {std::min(lo.x, v.x), std::min(lo.y, v.y)};
          hi = {std::max(hi.x, v.x), std::max(hi.y, v.y)};
        }
      }
    }
    return {lo, hi};
  }

  // max |q| over q in R.
  double max_radius() const {
    double m = 0.0;
    for (const auto& c : comps_) {
      if (c.orientation < 0) continue;
      if (c.is_circle) m = std::max(m, norm(c.center) + c.radius);
      else
        for (const auto& v : c.vertices) m = std::max(m, norm(v));
    }
    return m;
  }

  // Rotation invariance about the origin (disks and annuli centred at 0).
  bool rotation_invariant() const {
    for (const auto& c : comps_)
      if (!c.is_circle || norm(c.center) > tol_) return false;
    return true;
  }

  Vec2 component_normal(const BoundaryComponent& c, Vec2 q) const {
    if (c.is_circle) {
      const Vec2 d = q - c.center;
      return d / norm(d) * static_cast<double>(c.orientation);
    }
    const auto& v = c.vertices;
    for (const auto& x : v)
      if (norm(q - x) < tol_) return {0.0, 0.0};
    std::size_t best = 0;
    double dmin = 1e300;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double d = segment_distance(q, v[i], v[(i + 1) % v.size()]);
      if (d < dmin) {
        dmin = d;
        best = i;
      }
    }
    return edge_normal(v, best) * static_cast<double>(c.orientation);
  }

 private:
  static ConvexPolygon checked_polygon(ConvexPolygon p) {
    auto& v = p.vertices;
    require(v.size() >= 3, ErrorKind::config, "polygon needs at least 3 vertices");
    int sign = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double c = cross(v[(i + 1) % v.size()] - v[i], v[(i + 2) % v.size()] - v[(i + 1) % v.size()]);
      const int s = c > 0 ? 1 : (c < 0 ? -1 : 0);
      require(s != 0, ErrorKind::config, "polygon has collinear consecutive vertices");
      if (sign == 0) sign = s;
      require(s == sign, ErrorKind::config, "polygon vertices are not in strictly convex order");
    }
    if (sign < 0) std::reverse(v.begin(), v.end());
    return p;
  }

  void add_simple(const SimpleShape& s, int orientation) {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          BoundaryComponent c;
          c.orientation = orientation;
          if constexpr (std::is_same_v<T, Disk>) {
            require(x.radius > 0.0, ErrorKind::config, "disk radius must be positive");
            c.is_circle = true;
            c.center = x.center;
            c.radius = x.radius;
          } else {
            c.is_circle = false;
            c.vertices = checked_polygon(x).vertices;
          }
          comps_.push_back(c);
        },
        s);
  }

  void build(const Disk& d) { add_simple(d, +1); }
  void build(const ConvexPolygon& p) { add_simple(p, +1); }
  void build(const Annulus& a) {
    require(a.inner >= 0.0 && a.outer > a.inner, ErrorKind::config,
            "annulus needs 0 <= inner < outer");
    add_simple(Disk{a.center, a.outer}, +1);
    if (a.inner > 0.0) add_simple(Disk{a.center, a.inner}, -1);
  }
  void build(const SetDifference& d) {
    add_simple(d.outer, +1);
    for (const auto& h : d.holes) add_simple(h, -1);
  }

  double compute_diameter() const {
    const auto& c = comps_.front();
    if (c.is_circle) return 2.0 * c.radius;
    double m = 0.0;
    for (const auto& a : c.vertices)
      for (const auto& b : c.vertices) m = std::max(m, norm(a - b));
    return m;
  }

  void validate_components() {
    // Holes strictly inside the outer curve and pairwise disjoint, checked on
    // boundary samples plus exact separations.
    if (comps_.size() < 2) return;
    const auto& outer = comps_.front();
    auto samples = [](const BoundaryComponent& c) {
      std::vector<Vec2> pts;
      if (c.is_circle) {
        for (int k = 0; k < 256; ++k) pts.push_back(c.center + unit_at(2 * kPi * k / 256) * c.radius);
      } else {
        for (std::size_t i = 0; i < c.vertices.size(); ++i)
          for (int k = 0; k < 32; ++k)
            pts.push_back(c.vertices[i] + (c.vertices[(i + 1) % c.vertices.size()] - c.vertices[i]) * (k / 32.0));
      }
      return pts;
    };
    for (std::size_t i = 1; i < comps_.size(); ++i) {
      for (const auto& q : samples(comps_[i]))
        require(outer.enclosed_signed_distance(q) < -tol_, ErrorKind::config,
                "hole " + std::to_string(i - 1) + " is not strictly inside the outer domain");
      require(component_separation(outer, comps_[i]) > tol_, ErrorKind::config,
              "hole " + std::to_string(i - 1) + " touches the outer boundary");
      for (std::size_t j = i + 1; j < comps_.size(); ++j) {
        require(component_separation(comps_[i], comps_[j]) > tol_, ErrorKind::config,
                "holes " + std::to_string(i - 1) + " and " + std::to_string(j - 1) + " intersect");
        for (const auto& q : samples(comps_[i]))
          require(comps_[j].enclosed_signed_distance(q) > tol_, ErrorKind::config,
                  "holes " + std::to_string(i - 1) + " and " + std::to_string(j - 1) + " overlap");
      }
    }
  }

  JordanDomainSpec spec_;
  std::vector<BoundaryComponent> comps_;
  double diameter_ = 0.0;
  double tol_ = 0.0;
};

// Shape translated by p (R + p).
inline SimpleShape translated(const SimpleShape& s, Vec2 p) {
  return std::visit(
      [p](const auto& x) -> SimpleShape {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Disk>) {
          return Disk{x.center + p, x.radius};
        } else {
          ConvexPolygon q = x;
          for (auto& v : q.vertices) v += p;
          return q;
        }
      },
      s);
}

inline AmbitSet unit_disk() { return AmbitSet(Disk{{0, 0}, 1.0}); }
inline AmbitSet unit_square() { return AmbitSet(ConvexPolygon{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}}); }

}  // namespace ambit
