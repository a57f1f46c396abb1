#pragma once
// Flux and circulation of an ambit field on circles rS^1(p), their split
// into interior and boundary parts, the classical limits sigma and omega,
// partial circle integrals near the boundary, the boundary limit fields and
// exact characteristic-function oracles.
//
// Flux weight. For the field X(p) = int_{R+p} F(p - q) L(dq) the flux is
// linear in L: flux = int g(q - p) L(dq) with
//
//   g(y) = r (2 pi / N) sum_k 1_R(y - r u_k) F(-(y - r u_k)) . u_k,
//
// u_k = u(theta_k). For y deep inside R (distance > r) g(y) is the circle
// flux of F around -y, which is pi r^2 div F(-y) up to trapezoid error. In
// the r-collar of the boundary g(y) ~ 2 r sqrt(1 - s^2) F(-q) . u_A(q) with
// s the signed offset over r, on either side of the boundary.

#include <algorithm>
#include <complex>
#include <functional>
#include <optional>
#include <vector>

#include "ambit_geometry.hpp"
#include "field_engine.hpp"
#include "kernels.hpp"
#include "levy_basis.hpp"
#include "parallel.hpp"
#include "quadrature2d.hpp"
#include "rng.hpp"

namespace ambit {

enum class LineMode { flux, circulation };

inline const char* to_string(LineMode m) { return m == LineMode::flux ? "flux" : "circulation"; }

// Direction paired with the field: u for the flux, u^perp for circulation.
inline Vec2 line_direction(Vec2 u, LineMode m) { return m == LineMode::flux ? u : perp(u); }

class CircleQuadrature {
 public:
  CircleQuadrature(Vec2 p, double r, int n) : p_(p), r_(r), n_(n) {
    require(n >= 16, ErrorKind::domain, "circle quadrature needs at least 16 nodes");
    require(r > 0.0, ErrorKind::domain, "circle radius must be positive");
    u_.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) u_.push_back(unit_at(2.0 * kPi * k / n));
  }
  Vec2 center() const { return p_; }
  double radius() const { return r_; }
  int nodes() const { return n_; }
  double weight() const { return 2.0 * kPi / n_; }
  const std::vector<Vec2>& directions() const { return u_; }
  Vec2 node(int k) const { return p_ + u_[static_cast<std::size_t>(k)] * r_; }

 private:
  Vec2 p_;
  double r_;
  int n_;
  std::vector<Vec2> u_;
};

// r (2 pi / N) sum_k X(p + r u_k) . u_k (or u_k^perp) for any vector field.
inline double line_functional(const std::function<Vec2(Vec2)>& X, Vec2 p, double r, int n, LineMode m) {
  CircleQuadrature cq(p, r, n);
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += dot(X(cq.node(k)), line_direction(cq.directions()[k], m));
  return r * cq.weight() * s;
}

// ---------------------------------------------------------------------------
// Flux weights

// Trapezoid flux weight g(y) as defined in the header comment.
inline double line_weight(const Kernel& k, const AmbitSet& set, const CircleQuadrature& cq, Vec2 y, LineMode m) {
  double s = 0.0;
  const double r = cq.radius();
  for (const auto& u : cq.directions()) {
    const Vec2 w = y - u * r;
    if (!set.contains(w)) continue;
    s += dot(k.eval(-w), line_direction(u, m));
  }
  return r * cq.weight() * s;
}

// Weight with the interior shortcut: affine kernels integrate exactly to
// pi r^2 div (resp. curl) under the trapezoid rule.
inline double line_weight_fast(const Kernel& k, const AmbitSet& set, const CircleQuadrature& cq, Vec2 y,
                               LineMode m, bool* interior = nullptr) {
  const auto [in, d] = set.locate(y);
  const double r = cq.radius();
  if (interior) *interior = in && d > r * (1.0 + 1e-12);
  if (!in && d > r * (1.0 + 1e-12)) return 0.0;
  if (in && d > r * (1.0 + 1e-12) && k.affine()) {
    const auto& a = *k.affine();
    return kPi * r * r * (m == LineMode::flux ? a.div() : a.curl());
  }
  return line_weight(k, set, cq, y, m);
}

// Sparse list of lattice cells with nonzero weight for one (p, r). Collar
// cells come first; interior cells follow. Interior cells may be dropped
// and summarised by their first two weight sums.
struct FluxStencil {
  Vec2 p{};
  double r = 0.0;
  double h = 0.0;
  int n_theta = 0;
  LineMode mode = LineMode::flux;
  std::vector<std::int64_t> I, J;
  std::vector<double> w;
  std::size_t n_collar = 0;
  bool interior_stored = true;
  std::size_t n_interior = 0;
  double interior_s1 = 0.0;  // sum of interior weights
  double interior_s2 = 0.0;  // sum of squared interior weights
  Vec2 lo{}, hi{};           // extent of cell centres touched
};

inline FluxStencil compile_stencil(const Kernel& k, const AmbitSet& set, Vec2 p, double r, double h, int n,
                                   LineMode m, bool store_interior = true, int threads = 1) {
  require(h > 0.0, ErrorKind::domain, "cell size must be positive");
  CircleQuadrature cq({0, 0}, r, n);
  FluxStencil st;
  st.p = p;
  st.r = r;
  st.h = h;
  st.n_theta = n;
  st.mode = m;
  st.interior_stored = store_interior;
  auto [blo, bhi] = set.bounding_box();
  st.lo = blo + p - Vec2{r, r};
  st.hi = bhi + p + Vec2{r, r};
  const auto ia = static_cast<std::int64_t>(std::ceil(st.lo.x / h - 0.5));
  const auto ib = static_cast<std::int64_t>(std::floor(st.hi.x / h - 0.5));
  const auto ja = static_cast<std::int64_t>(std::ceil(st.lo.y / h - 0.5));
  const auto jb = static_cast<std::int64_t>(std::floor(st.hi.y / h - 0.5));
  const std::size_t rows = jb >= ja ? static_cast<std::size_t>(jb - ja + 1) : 0;

  struct Row {
    std::vector<std::int64_t> ci, ii;
    std::vector<double> cw, iw;
    double s1 = 0.0, s2 = 0.0;
    std::size_t ni = 0;
  };
  std::vector<Row> out(rows);
  parallel_for(rows, threads, [&](std::size_t rj) {
    Row& row = out[rj];
    const std::int64_t j = ja + static_cast<std::int64_t>(rj);
    for (std::int64_t i = ia; i <= ib; ++i) {
      const Vec2 y = Vec2{(i + 0.5) * h, (j + 0.5) * h} - p;
      bool interior = false;
      const double g = line_weight_fast(k, set, cq, y, m, &interior);
      if (g == 0.0) continue;
      if (interior) {
        row.s1 += g;
        row.s2 += g * g;
        ++row.ni;
        if (store_interior) {
          row.ii.push_back(i);
          row.iw.push_back(g);
        }
      } else {
        row.ci.push_back(i);
        row.cw.push_back(g);
      }
    }
  });
  for (std::size_t rj = 0; rj < rows; ++rj) {
    const std::int64_t j = ja + static_cast<std::int64_t>(rj);
    for (std::size_t t = 0; t < out[rj].ci.size(); ++t) {
      st.I.push_back(out[rj].ci[t]);
      st.J.push_back(j);
      st.w.push_back(out[rj].cw[t]);
    }
  }
  st.n_collar = st.w.size();
  for (std::size_t rj = 0; rj < rows; ++rj) {
    const std::int64_t j = ja + static_cast<std::int64_t>(rj);
    st.interior_s1 += out[rj].s1;
    st.interior_s2 += out[rj].s2;
    st.n_interior += out[rj].ni;
    for (std::size_t t = 0; t < out[rj].ii.size(); ++t) {
      st.I.push_back(out[rj].ii[t]);
      st.J.push_back(j);
      st.w.push_back(out[rj].iw[t]);
    }
  }
  return st;
}

inline void check_stencil_window(const FluxStencil& st, const GridRealization& g) {
  require(std::abs(st.h - g.h()) <= 1e-12 * g.h(), ErrorKind::config, "stencil and grid use different cell sizes");
  std::int64_t ia, ib, ja, jb;
  g.center_range(st.lo, st.hi, ia, ib, ja, jb);
  if (!g.in_window(ia, ja) || !g.in_window(ib, jb)) fail(ErrorKind::range, "circle leaves the realization window");
}

// sum_c w_c V(c) L_c over the stencil.
inline double apply_stencil(const FluxStencil& st, const GridRealization& g, const Volatility& vol = {}) {
  require(st.interior_stored, ErrorKind::config, "stencil was compiled without interior cells");
  check_stencil_window(st, g);
  double s = 0.0;
  const bool cv = vol.is_constant();
  const double c = cv ? vol.at({0, 0}) : 1.0;
  for (std::size_t t = 0; t < st.w.size(); ++t) {
    const double v = g.value(st.I[t], st.J[t]);
    s += st.w[t] * v * (cv ? c : vol.at(g.center(st.I[t], st.J[t])));
  }
  return s;
}

// Atoms: sum_i x_i V(q_i) g(q_i - p), plus the drift term which vanishes
// for constant volatility (int g = 0 because sum_k u_k = 0).
inline double line_functional_atoms(const AtomRealization& a, const Kernel& k, const AmbitSet& set, Vec2 p,
                                    double r, int n, LineMode m, const Volatility& vol = {}) {
  CircleQuadrature cq({0, 0}, r, n);
  const auto [blo, bhi] = set.bounding_box();
  if (!a.window.covers(blo + p - Vec2{r, r}, bhi + p + Vec2{r, r}))
    fail(ErrorKind::range, "circle leaves the realization window");
  double s = 0.0;
  for (const auto& at : a.atoms) {
    const double g = line_weight_fast(k, set, cq, at.q - p, m);
    if (g != 0.0) s += at.x * vol.at(at.q) * g;
  }
  if (a.drift != 0.0 && !vol.is_constant()) {
    CircleQuadrature c2(p, r, n);
    double d = 0.0;
    for (int t = 0; t < n; ++t)
      d += dot(drift_field_integral(k, set, c2.node(t), vol), line_direction(c2.directions()[t], m));
    s += a.drift * r * c2.weight() * d;
  }
  return s;
}

inline double line_functional(const LevyRealization& real, const Kernel& k, const AmbitSet& set, Vec2 p, double r,
                              int n, LineMode m, const Volatility& vol = {}) {
  return std::visit(
      [&](const auto& x) -> double {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, AtomRealization>) {
          return line_functional_atoms(x, k, set, p, r, n, m, vol);
        } else {
          return apply_stencil(compile_stencil(k, set, p, r, x.h(), n, m), x, vol);
        }
      },
      real);
}

inline double flux(const LevyRealization& real, const Kernel& k, const AmbitSet& set, Vec2 p, double r, int n = 256,
                   const Volatility& vol = {}) {
  return line_functional(real, k, set, p, r, n, LineMode::flux, vol);
}
inline double circulation(const LevyRealization& real, const Kernel& k, const AmbitSet& set, Vec2 p, double r,
                          int n = 256, const Volatility& vol = {}) {
  return line_functional(real, k, set, p, r, n, LineMode::circulation, vol);
}

// Literal route: evaluate the field at every circle node.
inline double line_functional_direct(const LevyRealization& real, const Kernel& k, const AmbitSet& set, Vec2 p,
                                     double r, int n, LineMode m, const Volatility& vol = {}) {
  return line_functional([&](Vec2 q) { return eval_field_modulated(real, k, set, vol, q); }, p, r, n, m);
}

// ---------------------------------------------------------------------------
// Exact arcs of a circle inside (or outside) a set

struct Arc {
  double a;
  double b;
};

namespace detail {

inline void circle_crossings(const BoundaryComponent& comp, Vec2 c, double r, std::vector<double>& out) {
  if (comp.is_circle) {
    const Vec2 d = comp.center - c;
    const double D = norm(d), R = comp.radius;
    if (D == 0.0 || D > r + R || D < std::abs(r - R)) return;
    const double ca = std::clamp((r * r + D * D - R * R) / (2.0 * r * D), -1.0, 1.0);
    const double b = std::acos(ca), a = std::atan2(d.y, d.x);
    out.push_back(a - b);
    out.push_back(a + b);
    return;
  }
  const auto& v = comp.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2 A = v[i] - c, E = v[(i + 1) % v.size()] - v[i];
    const double qa = dot(E, E), qb = 2.0 * dot(A, E), qc = dot(A, A) - r * r;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) continue;
    const double sq = std::sqrt(disc);
    for (double t : {(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)}) {
      if (t < 0.0 || t > 1.0) continue;
      const Vec2 w = A + E * t;
      out.push_back(std::atan2(w.y, w.x));
    }
  }
}

}  // namespace detail

// Angular intervals phi with c + r e(phi) in the set (inside = true) or in
// its complement. Intervals are ascending and may exceed 2 pi at the end.
inline std::vector<Arc> circle_arcs(const AmbitSet& set, Vec2 c, double r, bool inside) {
  std::vector<double> ang;
  for (const auto& comp : set.components()) detail::circle_crossings(comp, c, r, ang);
  for (auto& a : ang) {
    a = std::fmod(a, 2.0 * kPi);
    if (a < 0) a += 2.0 * kPi;
  }
  std::sort(ang.begin(), ang.end());
  std::vector<double> uniq;
  for (double a : ang)
    if (uniq.empty() || a - uniq.back() > 1e-13) uniq.push_back(a);
  if (uniq.size() > 1 && uniq.front() + 2.0 * kPi - uniq.back() <= 1e-13) uniq.pop_back();
  std::vector<Arc> arcs;
  if (uniq.empty()) {
    if (set.contains(c + Vec2{r, 0}) == inside) arcs.push_back({0.0, 2.0 * kPi});
    return arcs;
  }
  for (std::size_t i = 0; i < uniq.size(); ++i) {
    const double a = uniq[i];
    const double b = i + 1 < uniq.size() ? uniq[i + 1] : uniq[0] + 2.0 * kPi;
    if (b - a <= 0.0) continue;
    if (set.contains(c + unit_at(0.5 * (a + b)) * r) == inside) arcs.push_back({a, b});
  }
  return arcs;
}

// int over the arcs of fn(phi) d phi: periodic trapezoid on a full circle,
// Gauss-Legendre on partial arcs.
template <class Fn>
double arc_integral(const std::vector<Arc>& arcs, Fn&& fn, int n_full = 64, int n_gl = 24) {
  double s = 0.0;
  for (const auto& arc : arcs) {
    const double len = arc.b - arc.a;
    if (len >= 2.0 * kPi - 1e-14) {
      for (int k = 0; k < n_full; ++k) s += fn(arc.a + 2.0 * kPi * k / n_full);
      s *= 2.0 * kPi / n_full;
      continue;
    }
    const int n = std::max(8, static_cast<int>(std::ceil(n_gl * len / kPi)));
    const auto& gl = GaussLegendre::get(n);
    double t = 0.0;
    for (int i = 0; i < n; ++i) t += gl.w[i] * fn(0.5 * (arc.a + arc.b) + 0.5 * len * gl.x[i]);
    s += 0.5 * len * t;
  }
  return s;
}

// Flux weight g(y) with exact arc boundaries instead of the trapezoid
// indicator.
inline double line_weight_exact(const Kernel& k, const AmbitSet& set, Vec2 y, double r, LineMode m) {
  const auto arcs = circle_arcs(set, y, r, true);
  return -r * arc_integral(arcs, [&](double phi) {
    const Vec2 e = unit_at(phi);
    return dot(k.eval(-(y + e * r)), line_direction(e, m));
  });
}

// ---------------------------------------------------------------------------
// Interior / boundary decomposition on atoms

struct FluxDecomposition {
  double total = 0.0;
  double interior = 0.0;
  double boundary = 0.0;
  double interior_drift = 0.0;
  double boundary_drift = 0.0;
  std::size_t interior_atoms = 0;
  std::size_t boundary_atoms = 0;
  double r = 0.0;
  Vec2 p{};
  int n_theta = 0;
  LineMode mode = LineMode::flux;

  double residual() const { return std::abs(total - (interior + interior_drift) - (boundary + boundary_drift)); }
  double relative_residual() const { return residual() / std::max(std::abs(total), 1e-300); }
};

// int_{D_r(c)} div F (resp. curl F), tensor polar rule.
inline double disk_integral(const Kernel& k, Vec2 c, double r, LineMode m, int n_rho = 16, int n_theta = 32) {
  double s = 0.0;
  for (const auto& nd : polar_rule(c, 0.0, r, n_rho, n_theta))
    s += nd.w * (m == LineMode::flux ? k.div(nd.q) : k.curl(nd.q));
  return s;
}

// Split of the flux (or circulation) on an atom realization. Interior atoms
// contribute x_i int_{D_r(p - q_i)} div F, collar atoms x_i g(q_i - p). The
// total is recomputed through field evaluations at the circle nodes.
inline FluxDecomposition flux_decomposition(const LevyRealization& real, const Kernel& k, const AmbitSet& set, Vec2 p,
                                            double r, int n = 256, LineMode m = LineMode::flux);

// ---------------------------------------------------------------------------
// Classical limits

// Drift removed from L in the classical limit: gamma when the kernel
// vanishes on the boundary, gamma - int_{|x|<=1} x nu(dx) otherwise.
inline double classical_drift(const CharacteristicTriplet& t, bool kernel_vanishes_on_boundary) {
  if (kernel_vanishes_on_boundary) return t.gamma;
  return t.gamma - truncated_first_moment(t.nu);
}

// int_{R+p} D(p - q) (L - gamma_d Leb)(dq) with D = div F (sigma) or curl F
// (omega).
inline double limit_field(const LevyRealization& real, const Kernel& k, const AmbitSet& set, Vec2 p, double gamma_d,
                          LineMode m, const Volatility& vol = {}) {
  auto D = [&](Vec2 q) { return m == LineMode::flux ? k.div(q) : k.curl(q); };
  const auto [blo, bhi] = set.bounding_box();
  return std::visit(
      [&](const auto& x) -> double {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, AtomRealization>) {
          if (!x.window.covers(blo + p, bhi + p)) fail(ErrorKind::range, "R + p leaves the realization window");
          double s = 0.0;
          for (const auto& a : x.atoms)
            if (set.contains(a.q - p)) s += D(p - a.q) * a.x * vol.at(a.q);
          const double dd = x.drift - gamma_d;
          if (dd != 0.0) {
            double I = 0.0;
            for (const auto& nd : set_rule(set, 48)) I += nd.w * D(-nd.q) * vol.at(nd.q + p);
            s += dd * I;
          }
          return s;
        } else {
          std::int64_t ia, ib, ja, jb;
          x.center_range(blo + p, bhi + p, ia, ib, ja, jb);
          if (!x.in_window(ia, ja) || !x.in_window(ib, jb))
            fail(ErrorKind::range, "R + p leaves the realization window");
          const double hh = x.h() * x.h();
          double s = 0.0;
          for (std::int64_t j = ja; j <= jb; ++j)
            for (std::int64_t i = ia; i <= ib; ++i) {
              const Vec2 c = x.center(i, j);
              if (!set.contains(c - p)) continue;
              s += D(p - c) * (x.value(i, j) - gamma_d * hh) * vol.at(c);
            }
          return s;
        }
      },
      real);
}

inline double limit_sigma(const LevyRealization& real, const Kernel& k, const AmbitSet& set, Vec2 p, double gamma_d,
                          const Volatility& vol = {}) {
  return limit_field(real, k, set, p, gamma_d, LineMode::flux, vol);
}
inline double limit_omega(const LevyRealization& real, const Kernel& k, const AmbitSet& set, Vec2 p, double gamma_d,
                          const Volatility& vol = {}) {
  return limit_field(real, k, set, p, gamma_d, LineMode::circulation, vol);
}

// Drift read off the realization's triplet.
inline double limit_sigma(const LevyRealization& real, const Kernel& k, const AmbitSet& set, Vec2 p) {
  const auto& t = std::visit([](const auto& x) -> const CharacteristicTriplet& {
    if constexpr (std::is_same_v<std::decay_t<decltype(x)>, AtomRealization>) return x.triplet;
    else return x.triplet();
  }, real);
  return limit_sigma(real, k, set, p, classical_drift(t, vanishes_on_boundary(k, set)));
}

// ---------------------------------------------------------------------------
// Partial circle integrals near a boundary point

// G^i_r(s, q): integral of F . n (flux) or F . tau (circulation) over the
// part of the circle of radius r centred at q + r s u_A(q) lying in A
// (side 1) or in its complement (side 2).
inline double partial_circle_integral(const Kernel& k, const AmbitSet& A, Vec2 q, double s, double r, int side,
                                      LineMode m) {
  require(s >= -1.0 && s <= 1.0, ErrorKind::domain, "offset s must lie in [-1, 1]");
  require(side == 1 || side == 2, ErrorKind::domain, "side must be 1 or 2");
  require(r > 0.0, ErrorKind::domain, "radius must be positive");
  if (A.is_corner(q)) fail(ErrorKind::domain, "partial circle integral is undefined at a corner");
  const Vec2 n = A.outward_normal(q);
  const Vec2 c = q + n * (r * s);
  const auto arcs = circle_arcs(A, c, r, side == 1);
  return r * arc_integral(arcs, [&](double phi) {
    const Vec2 e = unit_at(phi);
    return dot(k.eval(c + e * r), line_direction(e, m));
  }, 256, 64);
}

// ---------------------------------------------------------------------------
// Boundary limit fields

// Independent seed increments on the arcs of a boundary mesh, keyed by the
// evaluation point and arc index:
//   value(p) = sign * sum_k F(p - q_k) . u(q_k) xi_k,  q_k on the boundary of R + p,
// with xi_k of cumulant len_k * psi_seed.
inline std::vector<double> simulate_limit_field(const AmbitSet& set, const Kernel& k, const SeedStableParams& seed,
                                                double ell, std::uint64_t rng_seed, std::uint32_t replicate,
                                                const std::vector<Vec2>& points, LineMode m, double sign = 1.0) {
  validate(seed);
  const auto disc = set.discretize_boundary(ell);
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const std::uint64_t ph = fnv1a(fmt_double(p.x) + "," + fmt_double(p.y));
    CounterRng rng(rng_seed ^ ph, Purpose::limit_seed, static_cast<std::uint32_t>(ph >> 32), 0, replicate);
    double s = 0.0;
    for (const auto& a : disc.arcs) {
      const double xi = sample_seed(seed, a.length, rng);
      s += dot(k.eval(-a.midpoint), m == LineMode::flux ? a.normal : a.tangent) * xi;
    }
    out.push_back(sign * s);
  }
  return out;
}

// Boundary nodes for H^1 integrals: trapezoid on circles, Gauss-Legendre on
// polygon edges.
struct BoundaryNode {
  Vec2 q;
  Vec2 normal;
  double w;
};

inline std::vector<BoundaryNode> boundary_nodes(const AmbitSet& set, int n_circle = 512, int n_edge = 64) {
  std::vector<BoundaryNode> out;
  for (const auto& c : set.components()) {
    if (c.is_circle) {
      for (int t = 0; t < n_circle; ++t) {
        const Vec2 e = unit_at(2.0 * kPi * (t + 0.5) / n_circle);
        out.push_back({c.center + e * c.radius, e * static_cast<double>(c.orientation),
                       2.0 * kPi * c.radius / n_circle});
      }
    } else {
      const auto& v = c.vertices;
      const auto& gl = GaussLegendre::get(n_edge);
      for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec2 a = v[i], b = v[(i + 1) % v.size()];
        const double len = norm(b - a);
        const Vec2 nrm = edge_normal(v, i) * static_cast<double>(c.orientation);
        for (int t = 0; t < n_edge; ++t)
          out.push_back({a + (b - a) * (0.5 * (1.0 + gl.x[t])), nrm, 0.5 * len * gl.w[t]});
      }
    }
  }
  return out;
}

// int_{boundary of R} psi_seed(side_sign z F(-q) . u(q)) H^1(dq).
inline cplx cf_limit_exact(const SeedStableParams& seed, const Kernel& k, const AmbitSet& set, double z,
                           LineMode m = LineMode::flux, double side_sign = 1.0) {
  validate(seed);
  if (z == 0.0) return 0.0;
  cplx s = 0.0;
  for (const auto& nd : boundary_nodes(set)) {
    const double a = dot(k.eval(-nd.q), m == LineMode::flux ? nd.normal : perp(nd.normal));
    s += nd.w * psi_stable_seed(seed, side_sign * z * a);
  }
  return s;
}

// Cumulant of sigma(p) (or omega(p)): int_R [psi(z D(-q)) - i gamma_d z D(-q)] dq.
inline cplx cf_sigma_exact(const CharacteristicTriplet& t, const Kernel& k, const AmbitSet& set, double z,
                           double gamma_d, LineMode m = LineMode::flux, int n = 48) {
  if (z == 0.0) return 0.0;
  cplx s = 0.0;
  for (const auto& nd : set_rule(set, n)) {
    const double D = m == LineMode::flux ? k.div(-nd.q) : k.curl(-nd.q);
    s += nd.w * (psi(t, z * D) - cplx(0.0, gamma_d * z * D));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Region rules for I_r = (R shrunk by r) plus the two-sided r-collar of the
// boundary. Node coordinates are relative to p.

struct RegionRules {
  Rule2D interior;
  Rule2D collar;
};

namespace detail {

// Points within r of a closed convex polyline, both sides: inner
// trapezoids, outer rectangles and corner sectors.
inline Rule2D polygon_collar(const std::vector<Vec2>& v, double r, int n_edge, int n_off) {
  const std::size_t m = v.size();
  std::vector<Vec2> nrm(m), inner(m);
  for (std::size_t i = 0; i < m; ++i) nrm[i] = edge_normal(v, i);
  for (std::size_t i = 0; i < m; ++i) {
    const Vec2 a = nrm[(i + m - 1) % m], b = nrm[i];
    inner[i] = v[i] - (a + b) * (r / (1.0 + dot(a, b)));
  }
  const auto ip = inner_parallel_polygon(v, r);
  require(ip.size() == m, ErrorKind::unsupported, "collar radius too large for the polygon");
  Rule2D out;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = (i + 1) % m;
    // Edge is the u-side, v runs from the edge outwards (or inwards).
    append(out, quad_rule(v[i], v[j], v[j] + nrm[i] * r, v[i] + nrm[i] * r, n_edge, n_off, true));
    append(out, quad_rule(v[j], v[i], inner[i], inner[j], n_edge, n_off, true));
    const double t0 = std::atan2(nrm[(i + m - 1) % m].y, nrm[(i + m - 1) % m].x);
    double t1 = std::atan2(nrm[i].y, nrm[i].x);
    while (t1 <= t0) t1 += 2.0 * kPi;
    append(out, polar_rule(v[i], 0.0, r, n_off, std::max(4, n_off / 2), t0, t1, true));
  }
  return out;
}

// Both-sided band r-collar of a circle, offsets sine-mapped.
inline Rule2D circle_collar(Vec2 c, double rho, double r, int n_arc, int n_off) {
  Rule2D out;
  const double r0 = std::max(0.0, rho - r);
  const auto band = polar_rule(c, r0, rho + r, n_off, n_arc, 0.0, 2.0 * kPi, true);
  append(out, band);
  return out;
}

// Rule for a simple shape grown by r (shape plus its outer collar half).
inline Rule2D grown_rule(const BoundaryComponent& c, double r, int n) {
  if (c.is_circle) return polar_rule(c.center, 0.0, c.radius + r, n, 2 * n);
  Rule2D out = polygon_rule(c.vertices, n);
  const auto& v = c.vertices;
  const std::size_t m = v.size();
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = (i + 1) % m;
    const Vec2 ni = edge_normal(v, i);
    append(out, quad_rule(v[i], v[j], v[j] + ni * r, v[i] + ni * r, n, n));
    const Vec2 np = edge_normal(v, (i + m - 1) % m);
    const double t0 = std::atan2(np.y, np.x);
    double t1 = std::atan2(ni.y, ni.x);
    while (t1 <= t0) t1 += 2.0 * kPi;
    append(out, polar_rule(v[i], 0.0, r, n, n / 2 + 2, t0, t1));
  }
  return out;
}

}  // namespace detail

inline RegionRules region_rules(const AmbitSet& set, double r, int n_arc, int n_off, int n_int) {
  RegionRules rr;
  const auto& comps = set.components();
  for (const auto& c : comps) {
    if (c.is_circle)
      append(rr.collar, detail::circle_collar(c.center, c.radius, r, n_arc, n_off));
    else
      append(rr.collar, detail::polygon_collar(c.vertices, r, std::max(8, n_arc / static_cast<int>(c.vertices.size())), n_off));
  }
  const auto& outer = comps.front();
  if (outer.is_circle && comps.size() == 2 && comps[1].is_circle && norm(comps[1].center - outer.center) == 0.0) {
    rr.interior = polar_rule(outer.center, comps[1].radius + r, outer.radius - r, n_int, 2 * n_int);
    return rr;
  }
  if (outer.is_circle) {
    if (outer.radius > r) rr.interior = polar_rule(outer.center, 0.0, outer.radius - r, n_int, 2 * n_int);
  } else {
    const auto ip = inner_parallel_polygon(outer.vertices, r);
    if (!ip.empty()) rr.interior = polygon_rule(ip, n_int);
  }
  for (std::size_t i = 1; i < comps.size(); ++i) append(rr.interior, detail::grown_rule(comps[i], r, n_int), -1.0);
  return rr;
}

// ---------------------------------------------------------------------------
// Exact characteristic function of the flux

struct CfOptions {
  int n_arc = 64;
  int n_off = 32;
  int n_int = 24;
  bool refine_check = true;
  double abs_tol = 1e-5;
  double rel_tol = 1e-3;
};

// Precomputes g on the I_r nodes once; cumulant(z) = sum w psi(z g).
// The cumulant is compared with a refined rule and a numerical error
// carrying both values is raised when they disagree.
class CfFluxOracle {
 public:
  CfFluxOracle(CharacteristicTriplet t, const Kernel& k, const AmbitSet& set, double r, LineMode m = LineMode::flux,
               CfOptions opt = {})
      : t_(std::move(t)), opt_(opt) {
    validate(t_);
    build(coarse_, k, set, r, m, opt.n_arc, opt.n_off, opt.n_int);
    if (opt.refine_check) build(fine_, k, set, r, m, 2 * opt.n_arc, opt.n_off * 3 / 2, opt.n_int * 3 / 2);
  }

  cplx cumulant(double z) const {
    if (z == 0.0) return 0.0;
    const cplx a = eval(coarse_, z);
    if (!opt_.refine_check) return a;
    const cplx b = eval(fine_, z);
    if (std::abs(a - b) > std::max(opt_.abs_tol, opt_.rel_tol * std::abs(b)))
      throw NumericalError("flux cumulant quadrature did not settle under refinement", b.real(),
                           {a.real(), a.imag(), b.real(), b.imag()});
    return b;
  }

  cplx cf(double z) const { return std::exp(cumulant(z)); }

  // int g^2 over I_r: the flux variance per unit b^2.
  double g2_integral() const {
    const auto& src = opt_.refine_check ? fine_ : coarse_;
    double s = 0.0;
    for (std::size_t i = 0; i < src.w.size(); ++i) s += src.w[i] * src.g[i] * src.g[i];
    return s;
  }

 private:
  struct Nodes {
    std::vector<double> w, g;
  };

  static void build(Nodes& n, const Kernel& k, const AmbitSet& set, double r, LineMode m, int na, int no, int ni) {
    const auto rr = region_rules(set, r, na, no, ni);
    auto add = [&](const Rule2D& rule, bool exact) {
      for (const auto& nd : rule) {
        double g;
        if (!exact && k.affine()) {
          g = kPi * r * r * (m == LineMode::flux ? k.affine()->div() : k.affine()->curl());
        } else {
          g = line_weight_exact(k, set, nd.q, r, m);
        }
        if (g == 0.0) continue;
        n.w.push_back(nd.w);
        n.g.push_back(g);
      }
    };
    add(rr.interior, false);
    add(rr.collar, true);
  }

  cplx eval(const Nodes& n, double z) const {
    cplx s = 0.0;
    for (std::size_t i = 0; i < n.w.size(); ++i) s += n.w[i] * psi(t_, z * n.g[i]);
    return s;
  }

  CharacteristicTriplet t_;
  CfOptions opt_;
  Nodes coarse_, fine_;
};

// Exact cumulant of the flux at p (the law does not depend on p).
inline cplx cf_flux_exact(const CharacteristicTriplet& t, const Kernel& k, const AmbitSet& set, Vec2 /*p*/, double r,
                          double z, LineMode m = LineMode::flux, CfOptions opt = {}) {
  if (z == 0.0) return 0.0;
  return CfFluxOracle(t, k, set, r, m, opt).cumulant(z);
}

// ---------------------------------------------------------------------------

inline FluxDecomposition flux_decomposition(const LevyRealization& real, const Kernel& k, const AmbitSet& set, Vec2 p,
                                            double r, int n, LineMode m) {
  const auto* at = std::get_if<AtomRealization>(&real);
  if (!at)
    fail(ErrorKind::unsupported, "flux decomposition is exact only on atom realizations");
  CircleQuadrature cq({0, 0}, r, n);
  FluxDecomposition d;
  d.r = r;
  d.p = p;
  d.n_theta = n;
  d.mode = m;
  for (const auto& a : at->atoms) {
    const Vec2 y = a.q - p;
    const auto [in, dist] = set.locate(y);
    if (in && dist > r * (1.0 + 1e-12)) {
      d.interior += a.x * disk_integral(k, -y, r, m);
      ++d.interior_atoms;
    } else if (dist <= r * (1.0 + 1e-12)) {
      d.boundary += a.x * line_weight(k, set, cq, y, m);
      ++d.boundary_atoms;
    }
  }
  if (at->drift != 0.0) {
    const auto rr = region_rules(set, r, 64, 32, 24);
    for (const auto& nd : rr.interior) d.interior_drift += nd.w * disk_integral(k, -nd.q, r, m, 8, 16);
    for (const auto& nd : rr.collar) d.boundary_drift += nd.w * line_weight_exact(k, set, nd.q, r, m);
    d.interior_drift *= at->drift;
    d.boundary_drift *= at->drift;
  }
  d.total = line_functional_direct(real, k, set, p, r, n, m);
  return d;
}

}  // namespace ambit
