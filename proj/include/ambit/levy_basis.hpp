#pragma once
// Homogeneous Levy bases described by characteristic triplets (gamma, b, nu).
//
// Truncation conventions: the triplet drift gamma is always taken with the
// indicator 1{|x| <= 1}. The modular Phi0 uses tau(x) = x / max(1, |x|) and
// converts internally.

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "numeric.hpp"
#include "rng.hpp"

namespace ambit {

// ---------------------------------------------------------------------------
// Levy measure catalogue

struct NoJumps {};

struct StableDensity {
  double K_plus = 0.0;
  double K_minus = 0.0;
  double beta = 1.5;
};

struct DiscreteJumps {
  std::vector<double> values;
  std::vector<double> weights;  // normalised on validation
};
struct NormalJumps {
  double mean = 0.0;
  double sd = 1.0;
};
struct ExponentialJumps {
  double rate = 1.0;  // positive jumps with density rate * exp(-rate x)
};
using JumpLaw = std::variant<DiscreteJumps, NormalJumps, ExponentialJumps>;

struct CompoundPoisson {
  double rate = 1.0;
  JumpLaw jumps = NormalJumps{};
};

struct GHDensity {
  double lambda = -0.5;
  double alpha = 1.0;
  double theta = 0.0;
  double delta = 1.0;
};

using LevyMeasureSpec = std::variant<NoJumps, StableDensity, CompoundPoisson, GHDensity>;

struct CharacteristicTriplet {
  double gamma = 0.0;
  double b = 0.0;
  LevyMeasureSpec nu = NoJumps{};
};

// Limit seed of the boundary regimes. beta == 2 encodes a Gaussian seed whose
// scale is gauss_b; otherwise a strictly beta-stable seed.
struct SeedStableParams {
  double K_plus = 0.0;
  double K_minus = 0.0;
  double beta = 2.0;
  double gamma_hat = 0.0;
  double gauss_b = 0.0;
  bool operator==(const SeedStableParams&) const = default;
};

struct SamplingOptions {
  bool allow_gh_approximation = true;
  double gh_epsilon = 1e-3;
};

// ---------------------------------------------------------------------------
// Validation

inline void validate(const JumpLaw& law) {
  std::visit(
      [](const auto& j) {
        using T = std::decay_t<decltype(j)>;
        if constexpr (std::is_same_v<T, DiscreteJumps>) {
          require(!j.values.empty() && j.values.size() == j.weights.size(), ErrorKind::domain,
                  "discrete jump law needs matching non-empty values and weights");
          for (double w : j.weights) require(w >= 0.0, ErrorKind::domain, "negative jump weight");
        } else if constexpr (std::is_same_v<T, NormalJumps>) {
          require(j.sd > 0.0, ErrorKind::domain, "normal jump sd must be positive");
        } else {
          require(j.rate > 0.0, ErrorKind::domain, "exponential jump rate must be positive");
        }
      },
      law);
}

inline void validate(const CharacteristicTriplet& t) {
  require(std::isfinite(t.gamma), ErrorKind::domain, "gamma must be finite");
  require(t.b >= 0.0 && std::isfinite(t.b), ErrorKind::domain, "b must be finite and >= 0");
  std::visit(
      [](const auto& nu) {
        using T = std::decay_t<decltype(nu)>;
        if constexpr (std::is_same_v<T, StableDensity>) {
          require(nu.K_plus >= 0.0 && nu.K_minus >= 0.0, ErrorKind::domain,
                  "stable K_plus and K_minus must be >= 0");
          require(nu.K_plus + nu.K_minus > 0.0, ErrorKind::domain,
                  "stable density needs K_plus + K_minus > 0");
          require(nu.beta > 0.0 && nu.beta < 2.0, ErrorKind::domain, "stable beta must lie in (0,2)");
        } else if constexpr (std::is_same_v<T, CompoundPoisson>) {
          require(nu.rate > 0.0 && std::isfinite(nu.rate), ErrorKind::domain,
                  "compound Poisson rate must be positive");
          validate(nu.jumps);
        } else if constexpr (std::is_same_v<T, GHDensity>) {
          require(nu.delta > 0.0, ErrorKind::domain, "GH delta must be positive");
          require(nu.alpha > std::abs(nu.theta), ErrorKind::domain, "GH requires alpha > |theta|");
        }
      },
      t.nu);
}

inline void validate(const SeedStableParams& s) {
  require(s.beta > 0.0 && s.beta <= 2.0, ErrorKind::domain, "seed beta must lie in (0,2]");
  if (s.beta == 2.0) {
    require(s.gauss_b >= 0.0, ErrorKind::domain, "Gaussian seed scale must be >= 0");
    return;
  }
  require(s.K_plus >= 0.0 && s.K_minus >= 0.0, ErrorKind::domain, "seed K's must be >= 0");
  if (s.beta == 1.0) {
    require(s.K_plus == s.K_minus, ErrorKind::domain,
            "beta = 1 seed requires K_plus == K_minus");
  } else {
    require(s.gamma_hat == 0.0, ErrorKind::domain,
            "a strictly stable seed with beta != 1 carries no drift");
  }
}

// ---------------------------------------------------------------------------
// Jump-law helpers

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

inline DiscreteJumps normalized(const DiscreteJumps& d) {
  DiscreteJumps out = d;
  double s = 0.0;
  for (double w : d.weights) s += w;
  require(s > 0.0, ErrorKind::domain, "discrete jump weights sum to zero");
  for (double& w : out.weights) w /= s;
  return out;
}

inline cplx jump_cf(const JumpLaw& law, double t) {
  return std::visit(
      [t](const auto& j) -> cplx {
        using T = std::decay_t<decltype(j)>;
        if constexpr (std::is_same_v<T, DiscreteJumps>) {
          const auto d = normalized(j);
          cplx s = 0.0;
          for (std::size_t i = 0; i < d.values.size(); ++i)
            s += d.weights[i] * std::exp(cplx(0.0, t * d.values[i]));
          return s;
        } else if constexpr (std::is_same_v<T, NormalJumps>) {
          return std::exp(cplx(-0.5 * j.sd * j.sd * t * t, j.mean * t));
        } else {
          return j.rate / cplx(j.rate, -t);
        }
      },
      law);
}

// E[J ; |J| <= 1]
inline double jump_truncated_mean(const JumpLaw& law) {
  return std::visit(
      [](const auto& j) -> double {
        using T = std::decay_t<decltype(j)>;
        if constexpr (std::is_same_v<T, DiscreteJumps>) {
          const auto d = normalized(j);
          double s = 0.0;
          for (std::size_t i = 0; i < d.values.size(); ++i)
            if (std::abs(d.values[i]) <= 1.0) s += d.weights[i] * d.values[i];
          return s;
        } else if constexpr (std::is_same_v<T, NormalJumps>) {
          const double a = (-1.0 - j.mean) / j.sd, b = (1.0 - j.mean) / j.sd;
          return j.mean * (normal_cdf(b) - normal_cdf(a)) - j.sd * (normal_pdf(b) - normal_pdf(a));
        } else {
          const double k = j.rate;
          return (1.0 - std::exp(-k) * (1.0 + k)) / k;
        }
      },
      law);
}

// P(J > x) for sign = +1, P(J < -x) for sign = -1, x > 0.
inline double jump_tail(const JumpLaw& law, double x, int sign) {
  return std::visit(
      [x, sign](const auto& j) -> double {
        using T = std::decay_t<decltype(j)>;
        if constexpr (std::is_same_v<T, DiscreteJumps>) {
          const auto d = normalized(j);
          double s = 0.0;
          for (std::size_t i = 0; i < d.values.size(); ++i)
            if (sign * d.values[i] > x) s += d.weights[i];
          return s;
        } else if constexpr (std::is_same_v<T, NormalJumps>) {
          return sign > 0 ? 1.0 - normal_cdf((x - j.mean) / j.sd)
                          : normal_cdf((-x - j.mean) / j.sd);
        } else {
          return sign > 0 ? std::exp(-j.rate * x) : 0.0;
        }
      },
      law);
}

// E[f(J)]; f must be integrable against the jump law.
template <class F>
double jump_expect(const JumpLaw& law, F&& f) {
  return std::visit(
      [&f](const auto& j) -> double {
        using T = std::decay_t<decltype(j)>;
        if constexpr (std::is_same_v<T, DiscreteJumps>) {
          const auto d = normalized(j);
          double s = 0.0;
          for (std::size_t i = 0; i < d.values.size(); ++i) s += d.weights[i] * f(d.values[i]);
          return s;
        } else if constexpr (std::is_same_v<T, NormalJumps>) {
          auto g = [&](double x) { return f(x) * normal_pdf((x - j.mean) / j.sd) / j.sd; };
          const double lo = j.mean - 12.0 * j.sd, hi = j.mean + 12.0 * j.sd;
          std::vector<double> cuts{lo};
          for (double c : {-1.0, 0.0, 1.0})
            if (c > lo && c < hi) cuts.push_back(c);
          cuts.push_back(hi);
          double s = 0.0;
          for (std::size_t i = 0; i + 1 < cuts.size(); ++i) s += integrate_gk(g, cuts[i], cuts[i + 1]);
          return s;
        } else {
          auto g = [&](double x) { return f(x) * j.rate * std::exp(-j.rate * x); };
          return integrate_gk(g, 0.0, 1.0) + integrate_inf(g, 1.0);
        }
      },
      law);
}

inline double sample_jump(const JumpLaw& law, CounterRng& rng) {
  return std::visit(
      [&rng](const auto& j) -> double {
        using T = std::decay_t<decltype(j)>;
        if constexpr (std::is_same_v<T, DiscreteJumps>) {
          double u = rng.uniform();
          double total = 0.0;
          for (double w : j.weights) total += w;
          u *= total;
          for (std::size_t i = 0; i < j.values.size(); ++i) {
            if (u < j.weights[i]) return j.values[i];
            u -= j.weights[i];
          }
          return j.values.back();
        } else if constexpr (std::is_same_v<T, NormalJumps>) {
          return j.mean + j.sd * rng.normal();
        } else {
          return rng.exponential() / j.rate;
        }
      },
      law);
}

// ---------------------------------------------------------------------------
// Generalised hyperbolic Levy density
//
//   nu(x) = exp(theta x) / |x| * k(|x|),
//   k(x)  = int_0^inf 2 exp(-sqrt(t^2 + alpha^2) x) / (pi^2 t (J^2 + Y^2)(delta t)) dt
//           + lambda exp(-alpha x) 1{lambda >= 0},
//
// written in the variable t = sqrt(2y). J, Y are Bessel functions of order
// |lambda|.

namespace detail {

inline double gh_weight(const GHDensity& g, double t) {
  if (t <= 0.0) return 0.0;
  const double nu = std::abs(g.lambda);
  const double u = g.delta * t;
  double j, y;
  if (nu == 0.5) {
    // J^2 + Y^2 = 2 / (pi u) exactly at order 1/2.
    return g.delta / kPi;
  }
  j = std::cyl_bessel_j(nu, u);
  y = std::cyl_neumann(nu, u);
  const double m = j * j + y * y;
  if (!std::isfinite(m) || m <= 0.0) return 0.0;
  return 2.0 / (kPi * kPi * t * m);
}

// int_0^inf w(t) h(sqrt(t^2 + alpha^2)) dt with h decaying in its argument.
template <class H>
double gh_t_integral(const GHDensity& g, double scale, H&& h) {
  auto f = [&](double t) {
    const double w = gh_weight(g, t);
    if (w == 0.0) return 0.0;
    return w * h(std::sqrt(t * t + g.alpha * g.alpha));
  };
  // Split at the natural scale of the exponential factor.
  const double split = std::max(1e-300, scale);
  QuadOptions opt;
  opt.abs_tol = 1e-13;
  double lo = integrate_ts(f, 0.0, split, opt);
  // Rescale so exp-sinh sees a unit-scale problem even when split is huge.
  double hi = split * integrate_inf([&](double s) { return f(split * s); }, 1.0, opt);
  return lo + hi;
}

}  // namespace detail

inline double gh_k(const GHDensity& g, double x) {
  require(x > 0.0, ErrorKind::domain, "gh_k needs x > 0");
  const double scale = std::max(1.0 / x, g.alpha);
  double v = detail::gh_t_integral(g, scale, [x](double w) { return std::exp(-w * x); });
  if (g.lambda >= 0.0) v += g.lambda * std::exp(-g.alpha * x);
  return v;
}

inline double gh_density(const GHDensity& g, double x) {
  if (x == 0.0) return std::numeric_limits<double>::infinity();
  return std::exp(g.theta * x) / std::abs(x) * gh_k(g, std::abs(x));
}

// Tail nu((x, inf)) (sign +1) or nu((-inf, -x)) (sign -1), via
// int_x^inf exp(-c y) / y dy = E1(c x).
inline double gh_tail(const GHDensity& g, double x, int sign) {
  const double th = sign > 0 ? g.theta : -g.theta;
  const double scale = std::max(1.0 / x, g.alpha);
  double v = detail::gh_t_integral(
      g, scale, [x, th](double w) { return boost::math::expint(1, (w - th) * x); });
  if (g.lambda >= 0.0) v += g.lambda * boost::math::expint(1, (g.alpha - th) * x);
  return v;
}

// ---------------------------------------------------------------------------
// Generic integration against nu: int f(x) nu(dx).
// `cuts` lists interior break points on the positive half line (e.g. 1).
// f must be O(x^2) at 0 when nu has infinite mass.

template <class F>
double levy_expect(const LevyMeasureSpec& nu, F&& f, std::vector<double> cuts = {1.0}) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NoJumps>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, CompoundPoisson>) {
          return m.rate * jump_expect(m.jumps, f);
        } else {
          std::sort(cuts.begin(), cuts.end());
          cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [](double c) { return !(c > 0.0); }),
                     cuts.end());
          cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
          auto side = [&](int sign) {
            auto density = [&](double x) -> double {
              if constexpr (std::is_same_v<T, StableDensity>) {
                const double K = sign > 0 ? m.K_plus : m.K_minus;
                return K * std::pow(x, -1.0 - m.beta);
              } else {
                return gh_density(m, sign * x);
              }
            };
            if constexpr (std::is_same_v<T, StableDensity>) {
              if ((sign > 0 ? m.K_plus : m.K_minus) == 0.0) return 0.0;
            }
            // f = O(x^2) near 0, so the mass below 1e-100 is far below rounding.
            auto g = [&](double x) {
              if (x < 1e-100) return 0.0;
              const double fx = f(sign * x);
              return fx == 0.0 ? 0.0 : fx * density(x);
            };
            double s = integrate_ts(g, 0.0, cuts.front());
            for (std::size_t i = 0; i + 1 < cuts.size(); ++i) s += integrate_gk(g, cuts[i], cuts[i + 1]);
            if constexpr (std::is_same_v<T, GHDensity>) {
              const double decay = m.alpha - sign * m.theta;
              const double top = cuts.back() + 45.0 / decay;
              s += integrate_gk(g, cuts.back(), top);
            } else {
              s += integrate_inf(g, cuts.back());
            }
            return s;
          };
          return side(+1) + side(-1);
        }
      },
      nu);
}

// ---------------------------------------------------------------------------
// Tails nu^{+/-}

inline double nu_tail(const LevyMeasureSpec& nu, double x, int sign) {
  require(x > 0.0, ErrorKind::domain, "nu_tail needs x > 0");
  return std::visit(
      [x, sign](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NoJumps>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, StableDensity>) {
          const double K = sign > 0 ? m.K_plus : m.K_minus;
          return K / m.beta * std::pow(x, -m.beta);
        } else if constexpr (std::is_same_v<T, CompoundPoisson>) {
          return m.rate * jump_tail(m.jumps, x, sign);
        } else {
          return gh_tail(m, x, sign);
        }
      },
      nu);
}

// int_{|x|<=1} x nu(dx) when nu has finite first absolute moment near zero;
// for symmetric infinite-variation measures the principal value, 0.
inline double truncated_first_moment(const LevyMeasureSpec& nu) {
  return std::visit(
      [](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NoJumps>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, CompoundPoisson>) {
          return m.rate * jump_truncated_mean(m.jumps);
        } else if constexpr (std::is_same_v<T, StableDensity>) {
          if (m.beta < 1.0) return (m.K_plus - m.K_minus) / (1.0 - m.beta);
          require(m.K_plus == m.K_minus, ErrorKind::domain,
                  "first moment on [-1,1] diverges for asymmetric stable with beta >= 1");
          return 0.0;
        } else {
          // Principal value: int_0^1 x (nu(x) - nu(-x)) dx = int_0^1 2 sinh(theta x) k(x) dx.
          if (m.theta == 0.0) return 0.0;
          auto g = [&](double x) { return 2.0 * std::sinh(m.theta * x) * gh_k(m, x); };
          return integrate_ts(g, 0.0, 1.0);
        }
      },
      nu);
}

// ---------------------------------------------------------------------------
// Levy-Khintchine exponent

inline bool is_symmetric(const StableDensity& s) { return s.K_plus == s.K_minus; }

// Drift (under 1{|x|<=1}) of the strictly stable law with this density.
inline double strict_stable_drift(const StableDensity& s) {
  if (s.beta == 1.0) return 0.0;
  return (s.K_plus - s.K_minus) / (1.0 - s.beta);
}

// int (e^{izx} - 1 - izx 1{|x|<=1}) nu(dx) for a stable density, closed form.
inline cplx stable_levy_integral(const StableDensity& s, double z) {
  if (z == 0.0) return 0.0;
  const double az = std::abs(z);
  const double sg = z > 0 ? 1.0 : -1.0;
  if (s.beta == 1.0) {
    const double c = 1.0 - kEulerGamma;
    return cplx(-(s.K_plus + s.K_minus) * kPi / 2.0 * az,
                -(s.K_plus - s.K_minus) * z * (std::log(az) - c));
  }
  const double g = std::tgamma(-s.beta);
  const double zb = std::pow(az, s.beta);
  const double ph = kPi * s.beta / 2.0;
  // (-iz)^beta = |z|^beta e^{-i pi beta sgn(z)/2}, (iz)^beta its conjugate.
  const cplx m(std::cos(ph), -sg * std::sin(ph));
  const cplx strict = g * zb * (s.K_plus * m + s.K_minus * std::conj(m));
  return strict + cplx(0.0, -strict_stable_drift(s) * z);
}

inline cplx levy_integral(const LevyMeasureSpec& nu, double z) {
  return std::visit(
      [z, &nu](const auto& m) -> cplx {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NoJumps>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, StableDensity>) {
          return stable_levy_integral(m, z);
        } else if constexpr (std::is_same_v<T, CompoundPoisson>) {
          return m.rate * (jump_cf(m.jumps, z) - 1.0) -
                 cplx(0.0, z * m.rate * jump_truncated_mean(m.jumps));
        } else {
          if (z == 0.0) return 0.0;
          const double re = levy_expect(nu, [z](double x) { return std::cos(z * x) - 1.0; });
          const double im = levy_expect(nu, [z](double x) {
            return std::sin(z * x) - (std::abs(x) <= 1.0 ? z * x : 0.0);
          });
          return {re, im};
        }
      },
      nu);
}

inline cplx psi(const CharacteristicTriplet& t, double z) {
  require(std::isfinite(z), ErrorKind::domain, "psi needs finite z");
  if (z == 0.0) return cplx(0.0, 0.0);
  return cplx(-0.5 * t.b * t.b * z * z, t.gamma * z) + levy_integral(t.nu, z);
}

inline cplx psi_stable_seed(const SeedStableParams& s, double z) {
  validate(s);
  if (s.beta == 2.0) return -0.5 * s.gauss_b * s.gauss_b * z * z;
  StableDensity d{s.K_plus, s.K_minus, s.beta};
  if (s.K_plus + s.K_minus == 0.0) return cplx(0.0, s.gamma_hat * z);
  cplx v = stable_levy_integral(d, z);
  if (s.beta != 1.0) v += cplx(0.0, strict_stable_drift(d) * z);  // strip the truncation drift
  return v + cplx(0.0, s.gamma_hat * z);
}

// ---------------------------------------------------------------------------
// Stable variates (Chambers-Mallows-Stuck)

struct StableScaleSkew {
  double sigma;  // scale for unit area
  double skew;   // in [-1, 1]
};

inline StableScaleSkew stable_scale_skew(double K_plus, double K_minus, double beta) {
  const double Ks = K_plus + K_minus;
  StableScaleSkew out{0.0, Ks > 0 ? (K_plus - K_minus) / Ks : 0.0};
  if (beta == 1.0) {
    out.sigma = Ks * kPi / 2.0;
  } else {
    out.sigma = std::pow(-std::tgamma(-beta) * std::cos(kPi * beta / 2.0) * Ks, 1.0 / beta);
  }
  return out;
}

// Standard S_alpha(1, skew, 0) variate.
inline double cms_standard(double alpha, double skew, CounterRng& rng) {
  const double V = kPi * (rng.uniform() - 0.5);
  const double W = rng.exponential();
  if (alpha == 1.0) {
    const double h = kPi / 2.0 + skew * V;
    return (2.0 / kPi) * (h * std::tan(V) - skew * std::log((kPi / 2.0) * W * std::cos(V) / h));
  }
  const double tq = std::tan(kPi * alpha / 2.0);
  const double B = std::atan(skew * tq) / alpha;
  const double S = std::pow(1.0 + skew * skew * tq * tq, 1.0 / (2.0 * alpha));
  const double a = alpha * (V + B);
  return S * std::sin(a) / std::pow(std::cos(V), 1.0 / alpha) *
         std::pow(std::cos(V - a) / W, (1.0 - alpha) / alpha);
}

// Draw with cumulant area * (stable Levy integral) for a stable density, i.e.
// the strictly stable law plus the truncation drift offset.
inline double sample_stable_area(const StableDensity& s, double area, CounterRng& rng) {
  const auto ss = stable_scale_skew(s.K_plus, s.K_minus, s.beta);
  const double Z = cms_standard(s.beta, ss.skew, rng);
  if (s.beta == 1.0) {
    const double sig = area * ss.sigma;
    const double mu = area * (s.K_plus - s.K_minus) * (1.0 - kEulerGamma);
    return sig * Z + (2.0 / kPi) * ss.skew * sig * std::log(sig) + mu;
  }
  return ss.sigma * std::pow(area, 1.0 / s.beta) * Z - strict_stable_drift(s) * area;
}

// Increment of the limit seed over a set of measure `length`.
inline double sample_seed(const SeedStableParams& s, double length, CounterRng& rng) {
  if (s.beta == 2.0) return s.gauss_b * std::sqrt(length) * rng.normal();
  if (s.K_plus + s.K_minus == 0.0) return s.gamma_hat * length;
  StableDensity d{s.K_plus, s.K_minus, s.beta};
  double x = sample_stable_area(d, length, rng);
  if (s.beta != 1.0) x += strict_stable_drift(d) * length;
  return x + s.gamma_hat * length;
}

// ---------------------------------------------------------------------------
// GH small-jump / large-jump sampler (approximate, flagged)

class GhSampler {
 public:
  GhSampler(const GHDensity& g, double eps) : g_(g), eps_(eps) {
    tail_pos_eps_ = gh_tail(g, eps, +1);
    tail_neg_eps_ = gh_tail(g, eps, -1);
    LevyMeasureSpec nu = g;
    small_var_ = levy_expect(nu, [eps](double x) { return std::abs(x) <= eps ? x * x : 0.0; },
                             {eps, 1.0});
    mid_mean_ = levy_expect(
        nu, [eps](double x) { return (std::abs(x) > eps && std::abs(x) <= 1.0) ? x : 0.0; },
        {eps, 1.0});
    build_table(+1, pos_x_, pos_t_);
    build_table(-1, neg_x_, neg_t_);
  }

  double large_rate() const { return tail_pos_eps_ + tail_neg_eps_; }
  double small_variance() const { return small_var_; }
  double mid_mean() const { return mid_mean_; }
  double epsilon() const { return eps_; }

  double sample(double gamma, double b, double area, CounterRng& rng) const {
    double x = (gamma - mid_mean_) * area;
    x += std::sqrt(area * (small_var_ + b * b)) * rng.normal();
    const std::uint64_t n = rng.poisson(large_rate() * area);
    for (std::uint64_t i = 0; i < n; ++i) {
      const bool pos = rng.uniform() * large_rate() < tail_pos_eps_;
      x += pos ? draw(pos_x_, pos_t_, rng) : -draw(neg_x_, neg_t_, rng);
    }
    return x;
  }

 private:
  void build_table(int sign, std::vector<double>& xs, std::vector<double>& ts) {
    const double decay = g_.alpha - sign * g_.theta;
    const double xmax = eps_ + 40.0 / decay;
    const int n = 400;
    const double l0 = std::log(eps_), l1 = std::log(xmax);
    for (int i = 0; i <= n; ++i) {
      const double x = std::exp(l0 + (l1 - l0) * i / n);
      xs.push_back(x);
      ts.push_back(gh_tail(g_, x, sign));
    }
  }

  static double draw(const std::vector<double>& xs, const std::vector<double>& ts, CounterRng& rng) {
    const double target = rng.uniform() * ts.front();
    // ts is decreasing; find i with ts[i] >= target > ts[i+1].
    std::size_t lo = 0, hi = ts.size() - 1;
    if (target <= ts.back()) return xs.back();
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (ts[mid] >= target) lo = mid;
      else hi = mid;
    }
    const double a = std::log(ts[lo]), b = std::log(std::max(ts[hi], 1e-300));
    const double f = (std::log(target) - a) / (b - a);
    return std::exp(std::log(xs[lo]) + f * (std::log(xs[hi]) - std::log(xs[lo])));
  }

  GHDensity g_;
  double eps_;
  double tail_pos_eps_ = 0, tail_neg_eps_ = 0, small_var_ = 0, mid_mean_ = 0;
  std::vector<double> pos_x_, pos_t_, neg_x_, neg_t_;
};

inline std::shared_ptr<const GhSampler> gh_sampler(const GHDensity& g, double eps) {
  static std::mutex mu;
  static std::vector<std::pair<std::array<double, 5>, std::shared_ptr<const GhSampler>>> cache;
  const std::array<double, 5> key{g.lambda, g.alpha, g.theta, g.delta, eps};
  {
    std::lock_guard<std::mutex> lock(mu);
    for (auto& [k, v] : cache)
      if (k == key) return v;
  }
  auto s = std::make_shared<const GhSampler>(g, eps);
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace_back(key, s);
  return s;
}

// True when sample_cell is exact in law for this triplet.
inline bool sampling_is_exact(const CharacteristicTriplet& t) {
  return !std::holds_alternative<GHDensity>(t.nu);
}

// One draw of L(A) for Leb(A) = area.
inline double sample_cell(const CharacteristicTriplet& t, double area, CounterRng& rng,
                          const SamplingOptions& opt = {}) {
  require(area > 0.0, ErrorKind::domain, "sample_cell needs area > 0");
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, GHDensity>) {
          if (!opt.allow_gh_approximation)
            fail(ErrorKind::unsupported,
                 "exact GH cell increments are not available; enable the small-jump approximation");
          return gh_sampler(m, opt.gh_epsilon)->sample(t.gamma, t.b, area, rng);
        } else {
          double x = t.gamma * area;
          if (t.b > 0.0) x += t.b * std::sqrt(area) * rng.normal();
          if constexpr (std::is_same_v<T, StableDensity>) {
            x += sample_stable_area(m, area, rng);
          } else if constexpr (std::is_same_v<T, CompoundPoisson>) {
            x -= m.rate * jump_truncated_mean(m.jumps) * area;
            const std::uint64_t n = rng.poisson(m.rate * area);
            for (std::uint64_t i = 0; i < n; ++i) x += sample_jump(m.jumps, rng);
          }
          return x;
        }
      },
      t.nu);
}

// ---------------------------------------------------------------------------
// Modular Phi0(y) = U_tau(y) + b^2 y^2 + int (1 ^ |yx|^2) nu(dx)

namespace detail {

// int_lo^hi x^a dx
inline double powint(double a, double lo, double hi) {
  if (hi <= lo) return 0.0;
  if (a == -1.0) return std::log(hi / lo);
  return (std::pow(hi, a + 1.0) - std::pow(lo, a + 1.0)) / (a + 1.0);
}

// int_0^inf [tau(yx) - y tau(x)] x^{-1-beta} dx for unit K.
inline double stable_tau_gap(double y, double beta) {
  if (y == 0.0) return 0.0;
  const double sg = y > 0 ? 1.0 : -1.0;
  const double m = 1.0 / std::abs(y);
  if (m >= 1.0) {
    return y * (powint(-beta, 1.0, m) - powint(-1.0 - beta, 1.0, m)) +
           (sg - y) * std::pow(m, -beta) / beta;
  }
  return sg * powint(-1.0 - beta, m, 1.0) - y * powint(-beta, m, 1.0) + (sg - y) / beta;
}

inline double tau(double x) { return x / std::max(1.0, std::abs(x)); }

}  // namespace detail

// gamma_tau = gamma + nu+(1) - nu-(1): the drift under tau truncation.
inline double gamma_tau(const CharacteristicTriplet& t) {
  return t.gamma + nu_tail(t.nu, 1.0, +1) - nu_tail(t.nu, 1.0, -1);
}

inline double modular_phi0(const CharacteristicTriplet& t, double y) {
  require(std::isfinite(y), ErrorKind::domain, "modular_phi0 needs finite y");
  if (y == 0.0) return 0.0;
  const double ay = std::abs(y);
  double gap = 0.0, sq = 0.0;
  if (const auto* s = std::get_if<StableDensity>(&t.nu)) {
    gap = (s->K_plus - s->K_minus) * detail::stable_tau_gap(y, s->beta);
    sq = (s->K_plus + s->K_minus) * std::pow(ay, s->beta) * (1.0 / (2.0 - s->beta) + 1.0 / s->beta);
  } else if (!std::holds_alternative<NoJumps>(t.nu)) {
    const std::vector<double> cuts{1.0, 1.0 / ay};
    gap = levy_expect(t.nu, [y](double x) { return detail::tau(y * x) - y * detail::tau(x); }, cuts);
    sq = levy_expect(t.nu, [y](double x) { return std::min(1.0, y * y * x * x); }, cuts);
  }
  const double U = std::abs(y * gamma_tau(t) + gap);
  return U + t.b * t.b * y * y + sq;
}

// ---------------------------------------------------------------------------
// v_beta = 2 { int_{-1}^{1} (1 - s^2)^{beta/2} ds }^{1/beta}

inline double v_beta(double beta) {
  require(beta >= 1.0 && beta <= 2.0, ErrorKind::domain, "v_beta needs beta in [1,2]");
  // s = sin t turns the integrand into cos(t)^{beta+1}; tanh-sinh absorbs the
  // fractional power at the end points.
  QuadOptions opt;
  opt.abs_tol = 1e-14;
  opt.rel_tol = 1e-13;
  const double I = integrate_ts(
      [beta](double t) { return std::pow(std::cos(t), beta + 1.0); }, -kPi / 2.0, kPi / 2.0, opt);
  return 2.0 * std::pow(I, 1.0 / beta);
}

// ---------------------------------------------------------------------------
// Regime classification

enum class RegimeTag { GaussianAttractor, StableAttractor, Classical };

inline const char* to_string(RegimeTag t) {
  switch (t) {
    case RegimeTag::GaussianAttractor: return "GaussianAttractor";
    case RegimeTag::StableAttractor: return "StableAttractor";
    case RegimeTag::Classical: return "Classical";
  }
  return "?";
}

struct Regime {
  RegimeTag tag = RegimeTag::Classical;
  double beta = 2.0;           // tail index of the attractor (2 for Gaussian)
  double rate_exponent = 2.0;  // 1.5, 1 + 1/beta, or 2
  double v = kPi;              // v_beta, or pi for the classical regime
  SeedStableParams seed;       // limit seed for the boundary regimes

  double normalizer(double r) const { return v * std::pow(r, rate_exponent); }
  bool operator==(const Regime&) const = default;
};

struct TailFit {
  double beta = 0.0;       // minus the mean log-log slope
  double K_tilde = 0.0;    // nu(x) x^beta at the smallest abscissa
  double spread = 0.0;     // max - min of the local slopes
  bool regular = false;
};

// Tail index from nu^{sign}(x) at x = 1e-2 ... 1e-6; regular when the local
// slopes agree within 0.05.
inline TailFit fit_tail_index(const LevyMeasureSpec& nu, int sign) {
  std::vector<double> lx, ly;
  for (int k = 2; k <= 6; ++k) {
    const double x = std::pow(10.0, -k);
    const double v = nu_tail(nu, x, sign);
    if (!(v > 0.0)) return {};
    lx.push_back(std::log(x));
    ly.push_back(std::log(v));
  }
  double smin = 1e300, smax = -1e300, ssum = 0.0;
  for (std::size_t i = 0; i + 1 < lx.size(); ++i) {
    const double s = (ly[i + 1] - ly[i]) / (lx[i + 1] - lx[i]);
    smin = std::min(smin, s);
    smax = std::max(smax, s);
    ssum += s;
  }
  TailFit f;
  f.beta = -ssum / static_cast<double>(lx.size() - 1);
  f.spread = smax - smin;
  f.regular = f.spread <= 0.05;
  f.K_tilde = std::exp(ly.back()) * std::exp(f.beta * lx.back());
  return f;
}

inline Regime make_regime(RegimeTag tag, double beta) {
  Regime r;
  r.tag = tag;
  if (tag == RegimeTag::Classical) {
    r.beta = 2.0;
    r.rate_exponent = 2.0;
    r.v = kPi;
  } else {
    r.beta = beta;
    r.rate_exponent = 1.0 + 1.0 / beta;
    r.v = v_beta(beta);
  }
  return r;
}

inline Regime classify_regime(const CharacteristicTriplet& t, bool kernel_nonzero_on_boundary) {
  validate(t);
  if (!kernel_nonzero_on_boundary) return make_regime(RegimeTag::Classical, 2.0);
  if (t.b > 0.0) {
    Regime r = make_regime(RegimeTag::GaussianAttractor, 2.0);
    r.seed.beta = 2.0;
    r.seed.gauss_b = t.b;
    return r;
  }
  return std::visit(
      [&](const auto& m) -> Regime {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NoJumps> || std::is_same_v<T, CompoundPoisson>) {
          return make_regime(RegimeTag::Classical, 2.0);
        } else if constexpr (std::is_same_v<T, StableDensity>) {
          if (m.beta < 1.0) return make_regime(RegimeTag::Classical, 2.0);
          if (m.beta == 1.0 && m.K_plus != m.K_minus)
            fail(ErrorKind::unclassifiable,
                 "asymmetric 1-stable basis: no limit seed with K_plus == K_minus");
          Regime r = make_regime(RegimeTag::StableAttractor, m.beta);
          r.seed = SeedStableParams{m.K_plus, m.K_minus, m.beta, 0.0, 0.0};
          if (m.beta == 1.0) r.seed.gamma_hat = t.gamma - truncated_first_moment(t.nu);
          return r;
        } else {
          const TailFit fp = fit_tail_index(t.nu, +1);
          const TailFit fm = fit_tail_index(t.nu, -1);
          if (!fp.regular || !fm.regular || std::abs(fp.beta - fm.beta) > 0.05)
            fail(ErrorKind::unclassifiable, "Levy measure has no regular tail index near 0");
          double beta = 0.5 * (fp.beta + fm.beta);
          if (beta < 1.0 - 0.05) return make_regime(RegimeTag::Classical, 2.0);
          if (beta >= 2.0) fail(ErrorKind::unclassifiable, "fitted tail index >= 2");
          if (std::abs(beta - 1.0) <= 0.05) beta = 1.0;
          Regime r = make_regime(RegimeTag::StableAttractor, beta);
          // Re-anchor the tail constants at the averaged (possibly snapped) index.
          const double x0 = 1e-6;
          double Kp = beta * nu_tail(t.nu, x0, +1) * std::pow(x0, beta);
          double Km = beta * nu_tail(t.nu, x0, -1) * std::pow(x0, beta);
          if (beta == 1.0) {
            if (std::abs(Kp - Km) > 0.01 * (Kp + Km))
              fail(ErrorKind::unclassifiable, "1-stable attractor needs symmetric tails");
            Kp = Km = 0.5 * (Kp + Km);
          }
          r.seed = SeedStableParams{Kp, Km, beta, 0.0, 0.0};
          if (beta == 1.0) r.seed.gamma_hat = t.gamma - truncated_first_moment(t.nu);
          return r;
        }
      },
      t.nu);
}

// A triplet whose boundary attractor has infinite variance.
inline bool heavy_tailed(const CharacteristicTriplet& t) {
  return t.b == 0.0 &&
         (std::holds_alternative<StableDensity>(t.nu) || std::holds_alternative<GHDensity>(t.nu));
}

}  // namespace ambit
