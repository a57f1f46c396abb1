#pragma once
// Small numeric toolkit shared by every module: planar vectors, error types,
// Gauss-Legendre rules, adaptive quadrature wrappers and hashing.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace ambit {

using cplx = std::complex<double>;
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kEulerGamma = std::numbers::egamma;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(Vec2 o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Vec2& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
constexpr double norm2(Vec2 a) { return a.x * a.x + a.y * a.y; }
// Counter-clockwise quarter turn: u -> u^perp.
constexpr Vec2 perp(Vec2 a) { return {-a.y, a.x}; }
inline Vec2 rotate(Vec2 a, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * a.x - s * a.y, s * a.x + c * a.y};
}
inline Vec2 unit_at(double theta) { return {std::cos(theta), std::sin(theta)}; }

// ---------------------------------------------------------------------------
// Errors. Each carries a kind so the command line can map it to an exit code.

enum class ErrorKind {
  config,
  domain,
  numerical,
  geometry,
  range,
  unsupported,
  unclassifiable
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return "config";
    case ErrorKind::domain: return "domain";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::range: return "range";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::unclassifiable: return "unclassifiable";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + msg), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Quadrature or iteration that failed to reach its tolerance. The partial
// estimate and the refinement trace travel with the exception.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& msg, double partial, std::vector<double> trace = {})
      : Error(ErrorKind::numerical, msg), partial_(partial), trace_(std::move(trace)) {}
  double partial_estimate() const noexcept { return partial_; }
  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  double partial_;
  std::vector<double> trace_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

// ---------------------------------------------------------------------------
// Gauss-Legendre nodes on [-1, 1], computed by Newton iteration on P_n and
// cached per order.

struct GaussLegendre {
  std::vector<double> x;
  std::vector<double> w;

  static const GaussLegendre& get(int n) {
    static std::mutex mu;
    static std::map<int, GaussLegendre> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    return cache.emplace(n, build(n)).first->second;
  }

 private:
  static GaussLegendre build(int n) {
    require(n >= 1, ErrorKind::domain, "Gauss-Legendre order must be positive");
    GaussLegendre g;
    g.x.resize(n);
    g.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
      double pp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p1 = 1.0, p2 = 0.0;
        for (int j = 1; j <= n; ++j) {
          const double p3 = p2;
          p2 = p1;
          p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
        }
        pp = n * (z * p1 - p2) / (z * z - 1.0);
        const double dz = p1 / pp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      g.x[i] = -z;
      g.x[n - 1 - i] = z;
      g.w[i] = g.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
    return g;
  }
};

// ---------------------------------------------------------------------------
// Adaptive quadrature wrappers. Tolerances follow the library-wide defaults:
// absolute 1e-10 and at most 20 bisection levels.

struct QuadOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  unsigned max_depth = 20;
};

template <class F>
double integrate_gk(F&& f, double a, double b, const QuadOptions& opt = {}) {
  if (a == b) return 0.0;
  double err = 0.0;
  double l1 = 0.0;
  const double val = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, opt.max_depth, std::max(opt.rel_tol * 1e-2, 1e-15), &err, &l1);
  if (!std::isfinite(val) || err > std::max(opt.abs_tol, opt.rel_tol * std::abs(val)) * 1e3) {
    std::ostringstream os;
    os << "adaptive Gauss-Kronrod did not converge on [" << a << ", " << b << "], error " << err;
    throw NumericalError(os.str(), val, {val, err});
  }
  return val;
}

// Endpoint-singular integrands on a finite interval.
template <class F>
double integrate_ts(F&& f, double a, double b, const QuadOptions& opt = {}) {
  if (a == b) return 0.0;
  boost::math::quadrature::tanh_sinh<double> ts(15);
  double err = 0.0, l1 = 0.0;
  std::size_t levels = 0;
  const double val = ts.integrate(f, a, b, opt.rel_tol * 1e-2, &err, &l1, &levels);
  if (!std::isfinite(val) || err > std::max(opt.abs_tol, opt.rel_tol * std::abs(val)) * 1e3) {
    std::ostringstream os;
    os << "tanh-sinh quadrature did not converge on [" << a << ", " << b << "], error " << err;
    throw NumericalError(os.str(), val, {val, err});
  }
  return val;
}

// Half-infinite interval [a, inf).
template <class F>
double integrate_inf(F&& f, double a, const QuadOptions& opt = {}) {
  boost::math::quadrature::exp_sinh<double> es(9);
  double err = 0.0, l1 = 0.0;
  std::size_t levels = 0;
  auto g = [&](double t) { return f(a + t); };
  const double val = es.integrate(g, 0.0, std::numeric_limits<double>::infinity(),
                                  opt.rel_tol * 1e-2, &err, &l1, &levels);
  if (!std::isfinite(val) || err > std::max(opt.abs_tol, opt.rel_tol * std::abs(val)) * 1e3) {
    std::ostringstream os;
    os << "exp-sinh quadrature did not converge on [" << a << ", inf), error " << err;
    throw NumericalError(os.str(), val, {val, err});
  }
  return val;
}

// ---------------------------------------------------------------------------
// Hashing: FNV-1a, 64 bit. Used for config and triplet fingerprints.

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

// Shortest round-trip decimal for deterministic text output.
inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace ambit
