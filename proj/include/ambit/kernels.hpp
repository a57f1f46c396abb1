#pragma once
// Vector kernels F : R^2 -> R^2.
//
// Curl convention: curl F = -d_y F1 + d_x F2.

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ambit_geometry.hpp"
#include "numeric.hpp"

namespace ambit {

// -- radial profiles --------------------------------------------------------

struct PowerLaw {
  double K = 1.0;
  double p = 0.0;
};

struct PolynomialRadial {
  std::vector<double> coeffs;  // f(x) = sum_k c_k x^k
};

// f(x) = exp(1 - w^2 / ((x - a)(b - x))) on (a, b), w = (b - a)/2, zero outside.
// Smooth, peak value 1 at the midpoint, f(a) = f(b) = 0.
struct BumpVanishing {
  double a = 0.5;
  double b = 1.0;
};

using RadialProfile = std::variant<PowerLaw, PolynomialRadial, BumpVanishing>;

inline std::pair<double, double> profile_value_and_slope(const RadialProfile& prof, double x) {
  return std::visit(
      [x](const auto& f) -> std::pair<double, double> {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PowerLaw>) {
          if (f.p == 0.0) return {f.K, 0.0};
          if (x == 0.0) {
            if (f.p < 0.0) fail(ErrorKind::domain, "power-law profile is singular at radius 0");
            return {0.0, f.p == 1.0 ? f.K : 0.0};
          }
          const double v = f.K * std::pow(x, f.p);
          return {v, f.p * v / x};
        } else if constexpr (std::is_same_v<T, PolynomialRadial>) {
          double v = 0.0, d = 0.0;
          for (std::size_t k = f.coeffs.size(); k-- > 0;) {
            d = d * x + v;
            v = v * x + f.coeffs[k];
          }
          return {v, d};
        } else {
          if (x <= f.a || x >= f.b) return {0.0, 0.0};
          const double w = 0.5 * (f.b - f.a);
          const double u = (x - f.a) * (f.b - x);
          const double v = std::exp(1.0 - w * w / u);
          return {v, v * w * w * (f.a + f.b - 2.0 * x) / (u * u)};
        }
      },
      prof);
}

inline bool profile_singular_at_zero(const RadialProfile& prof) {
  if (const auto* p = std::get_if<PowerLaw>(&prof)) return p->p < 0.0;
  return false;
}

// -- kernel variants --------------------------------------------------------

struct IsotropicKernel {
  double phi = 0.0;
  RadialProfile profile = PolynomialRadial{{1.0}};
};

struct Monomial {
  double coef = 0.0;
  int i = 0;  // power of x
  int j = 0;  // power of y
};

struct PolynomialKernel {
  std::vector<Monomial> F1;
  std::vector<Monomial> F2;
};

// Values on a regular grid, interpolated bicubically (Catmull-Rom).
struct TabulatedKernel {
  Vec2 origin{};
  double dx = 0.1, dy = 0.1;
  int nx = 0, ny = 0;
  std::vector<double> F1, F2;  // row-major, index j * nx + i

  static TabulatedKernel sample(const std::function<Vec2(Vec2)>& f, Vec2 origin, double dx,
                                double dy, int nx, int ny) {
    TabulatedKernel t{origin, dx, dy, nx, ny, {}, {}};
    t.F1.resize(static_cast<std::size_t>(nx) * ny);
    t.F2.resize(t.F1.size());
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const Vec2 v = f(origin + Vec2{i * dx, j * dy});
        t.F1[j * nx + i] = v.x;
        t.F2[j * nx + i] = v.y;
      }
    return t;
  }
};

namespace detail {

inline double poly_eval(const std::vector<Monomial>& p, Vec2 q) {
  double s = 0.0;
  for (const auto& m : p) s += m.coef * std::pow(q.x, m.i) * std::pow(q.y, m.j);
  return s;
}
inline double poly_dx(const std::vector<Monomial>& p, Vec2 q) {
  double s = 0.0;
  for (const auto& m : p)
    if (m.i > 0) s += m.coef * m.i * std::pow(q.x, m.i - 1) * std::pow(q.y, m.j);
  return s;
}
inline double poly_dy(const std::vector<Monomial>& p, Vec2 q) {
  double s = 0.0;
  for (const auto& m : p)
    if (m.j > 0) s += m.coef * m.j * std::pow(q.x, m.i) * std::pow(q.y, m.j - 1);
  return s;
}

inline double catmull_rom(double p0, double p1, double p2, double p3, double t) {
  return p1 + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
}

inline double bicubic(const TabulatedKernel& k, const std::vector<double>& v, Vec2 q) {
  const double fx = (q.x - k.origin.x) / k.dx, fy = (q.y - k.origin.y) / k.dy;
  if (fx < 0 || fy < 0 || fx > k.nx - 1 || fy > k.ny - 1)
    fail(ErrorKind::domain, "tabulated kernel evaluated outside its grid");
  const int i = std::min(static_cast<int>(fx), k.nx - 2), j = std::min(static_cast<int>(fy), k.ny - 2);
  const double tx = fx - i, ty = fy - j;
  auto at = [&](int a, int b) {
    a = std::clamp(a, 0, k.nx - 1);
    b = std::clamp(b, 0, k.ny - 1);
    return v[static_cast<std::size_t>(b) * k.nx + a];
  };
  double col[4];
  for (int m = -1; m <= 2; ++m)
    col[m + 1] = catmull_rom(at(i - 1, j + m), at(i, j + m), at(i + 1, j + m), at(i + 2, j + m), tx);
  return catmull_rom(col[0], col[1], col[2], col[3], ty);
}

}  // namespace detail

using KernelSpec = std::variant<IsotropicKernel, PolynomialKernel, TabulatedKernel>;

// Affine kernels F(q) = A q + c integrate exactly under the periodic
// trapezoid rule on circles; interior circle sums then reduce to pi r^2 div.
struct AffineForm {
  double a11, a12, a21, a22, c1, c2;
  double div() const { return a11 + a22; }
  double curl() const { return a21 - a12; }
};

class Kernel {
 public:
  Kernel() : spec_(IsotropicKernel{}) {}
  Kernel(KernelSpec spec) : spec_(std::move(spec)) { init(); }

  const KernelSpec& spec() const { return spec_; }

  Vec2 eval(Vec2 q) const {
    return std::visit(
        [q](const auto& k) -> Vec2 {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, IsotropicKernel>) {
            const double x = norm(q);
            const double f = profile_value_and_slope(k.profile, x).first;
            return rotate(q, k.phi) * f;
          } else if constexpr (std::is_same_v<T, PolynomialKernel>) {
            return {detail::poly_eval(k.F1, q), detail::poly_eval(k.F2, q)};
          } else {
            return {detail::bicubic(k, k.F1, q), detail::bicubic(k, k.F2, q)};
          }
        },
        spec_);
  }

  double div(Vec2 q) const {
    return std::visit(
        [q, this](const auto& k) -> double {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, IsotropicKernel>) {
            const double x = norm(q);
            const auto [f, fp] = profile_value_and_slope(k.profile, x);
            return std::cos(k.phi) * (2.0 * f + fp * x);
          } else if constexpr (std::is_same_v<T, PolynomialKernel>) {
            return detail::poly_dx(k.F1, q) + detail::poly_dy(k.F2, q);
          } else {
            return fd_div(q);
          }
        },
        spec_);
  }

  double curl(Vec2 q) const {
    return std::visit(
        [q, this](const auto& k) -> double {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, IsotropicKernel>) {
            const double x = norm(q);
            const auto [f, fp] = profile_value_and_slope(k.profile, x);
            return std::sin(k.phi) * (2.0 * f + fp * x);
          } else if constexpr (std::is_same_v<T, PolynomialKernel>) {
            return detail::poly_dx(k.F2, q) - detail::poly_dy(k.F1, q);
          } else {
            return fd_curl(q);
          }
        },
        spec_);
  }

  // Central differences with step h (default max(1e-5, 1e-4 |q|)).
  double fd_div(Vec2 q, double h = 0.0) const {
    if (h <= 0.0) h = std::max(1e-5, 1e-4 * norm(q));
    return (eval(q + Vec2{h, 0}).x - eval(q - Vec2{h, 0}).x + eval(q + Vec2{0, h}).y -
            eval(q - Vec2{0, h}).y) /
           (2.0 * h);
  }
  double fd_curl(Vec2 q, double h = 0.0) const {
    if (h <= 0.0) h = std::max(1e-5, 1e-4 * norm(q));
    return (eval(q + Vec2{h, 0}).y - eval(q - Vec2{h, 0}).y - eval(q + Vec2{0, h}).x +
            eval(q - Vec2{0, h}).x) /
           (2.0 * h);
  }

  // Operator-norm bound of the Jacobian, by central differences.
  double jacobian_norm(Vec2 q) const {
    const double h = std::max(1e-5, 1e-4 * norm(q));
    const Vec2 gx = (eval(q + Vec2{h, 0}) - eval(q - Vec2{h, 0})) / (2 * h);
    const Vec2 gy = (eval(q + Vec2{0, h}) - eval(q - Vec2{0, h})) / (2 * h);
    return std::sqrt(norm2(gx) + norm2(gy));
  }

  const std::optional<AffineForm>& affine() const { return affine_; }

  // The kernel blows up at q = 0 (power-law profiles with negative exponent).
  bool singular_at_origin() const {
    if (const auto* k = std::get_if<IsotropicKernel>(&spec_)) return profile_singular_at_zero(k->profile);
    return false;
  }

 private:
  void init() {
    if (const auto* k = std::get_if<IsotropicKernel>(&spec_)) {
      double c = 0.0;
      bool constant = false;
      if (const auto* p = std::get_if<PowerLaw>(&k->profile)) {
        constant = p->p == 0.0;
        c = p->K;
      } else if (const auto* p = std::get_if<PolynomialRadial>(&k->profile)) {
        constant = true;
        for (std::size_t i = 1; i < p->coeffs.size(); ++i) constant = constant && p->coeffs[i] == 0.0;
        c = p->coeffs.empty() ? 0.0 : p->coeffs[0];
      }
      if (constant) {
        const double co = std::cos(k->phi) * c, si = std::sin(k->phi) * c;
        affine_ = AffineForm{co, -si, si, co, 0.0, 0.0};
      }
    } else if (const auto* k = std::get_if<PolynomialKernel>(&spec_)) {
      AffineForm a{0, 0, 0, 0, 0, 0};
      bool ok = true;
      auto take = [&](const std::vector<Monomial>& p, double& cx, double& cy, double& c0) {
        for (const auto& m : p) {
          if (m.i + m.j > 1) {
            if (m.coef != 0.0) ok = false;
          } else if (m.i == 1) {
            cx += m.coef;
          } else if (m.j == 1) {
            cy += m.coef;
          } else {
            c0 += m.coef;
          }
        }
      };
      take(k->F1, a.a11, a.a12, a.c1);
      take(k->F2, a.a21, a.a22, a.c2);
      if (ok) affine_ = a;
    } else if (const auto* k = std::get_if<TabulatedKernel>(&spec_)) {
      require(k->nx >= 4 && k->ny >= 4, ErrorKind::config, "tabulated kernel needs a 4x4 grid at least");
      require(k->F1.size() == static_cast<std::size_t>(k->nx) * k->ny && k->F2.size() == k->F1.size(),
              ErrorKind::config, "tabulated kernel value count does not match nx*ny");
    }
  }

  KernelSpec spec_;
  std::optional<AffineForm> affine_;
};

// Convenience constructors.
inline Kernel constant_kernel(Vec2 v) {
  return Kernel(PolynomialKernel{{{v.x, 0, 0}}, {{v.y, 0, 0}}});
}
inline Kernel isotropic_kernel(double phi, RadialProfile f) { return Kernel(IsotropicKernel{phi, std::move(f)}); }

// max over boundary samples of |F(-q)| < tol.
inline bool vanishes_on_boundary(const Kernel& k, const AmbitSet& set, double tol = 1e-10) {
  const auto disc = set.discretize_boundary(set.perimeter() / 4096.0);
  double m = 0.0;
  for (const auto& a : disc.arcs) m = std::max(m, norm(k.eval(-a.midpoint)));
  for (const auto& c : set.components())
    for (const auto& v : c.vertices) m = std::max(m, norm(k.eval(-v)));
  return m < tol;
}

// Max of |curl F(-q)| (resp. |div F(-q)|) over a polar sample of R.
inline double max_abs_curl_on(const Kernel& k, const AmbitSet& set, bool divergence) {
  const auto [lo, hi] = set.bounding_box();
  double m = 0.0;
  const int n = 64;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      const Vec2 q{lo.x + (hi.x - lo.x) * i / n, lo.y + (hi.y - lo.y) * j / n};
      if (!set.contains(q)) continue;
      if (k.singular_at_origin() && norm(q) < 1e-12) continue;
      m = std::max(m, std::abs(divergence ? k.div(-q) : k.curl(-q)));
    }
  return m;
}

}  // namespace ambit
