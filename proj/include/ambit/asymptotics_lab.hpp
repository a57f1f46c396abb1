#pragma once
// Monte Carlo harness: rate scans, limit-law checks against characteristic
// function oracles, the incompressibility / irrotationality / isotropy
// battery, and the decomposition audit.

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ambit_geometry.hpp"
#include "field_engine.hpp"
#include "functionals.hpp"
#include "integrability.hpp"
#include "kernels.hpp"
#include "levy_basis.hpp"
#include "parallel.hpp"

namespace ambit {

enum class ScaleStatistic { iqr, median_abs, std_dev };

inline const char* to_string(ScaleStatistic s) {
  switch (s) {
    case ScaleStatistic::iqr: return "iqr";
    case ScaleStatistic::median_abs: return "median_abs";
    case ScaleStatistic::std_dev: return "std";
  }
  return "?";
}

// Cell size per radius: h = r / ratio, or a fixed h.
struct HRule {
  bool per_radius = true;
  double ratio = 10.0;
  double fixed = 0.0;
  double h(double r) const { return per_radius ? r / ratio : fixed; }
};

struct ExperimentConfig {
  CharacteristicTriplet triplet;
  Kernel kernel;
  AmbitSet set;
  VolatilitySpec volatility = ConstantVol{};
  std::vector<Vec2> points{{0.0, 0.0}};
  std::vector<double> r_grid{0.04, 0.028, 0.02, 0.014, 0.01};
  int replicates = 1000;
  int n_theta = 256;
  HRule h_rule;
  std::uint64_t seed = 1;
  ScaleStatistic statistic = ScaleStatistic::iqr;
  LineMode mode = LineMode::flux;
  int threads = 0;
  SamplingOptions sampling;
  double slope_tolerance = 0.1;
  std::optional<double> expected_slope;  // overrides the regime prediction
  double cf_allowance = 0.03;
  // Pure Gaussian bases: draw the interior part of a flux in one Gaussian
  // variate with the exact variance instead of cell by cell. Exact for the
  // marginal law of each functional.
  bool aggregate_gaussian_interior = true;
};

inline void validate(const ExperimentConfig& c) {
  validate(c.triplet);
  require(!c.r_grid.empty(), ErrorKind::config, "r_grid must not be empty");
  for (std::size_t i = 0; i < c.r_grid.size(); ++i) {
    require(c.r_grid[i] > 0.0, ErrorKind::config, "r_grid entries must be positive");
    if (i > 0) require(c.r_grid[i] < c.r_grid[i - 1], ErrorKind::config, "r_grid must be strictly decreasing");
  }
  require(c.replicates >= 100, ErrorKind::config, "replicates must be at least 100");
  require(c.n_theta >= 16, ErrorKind::config, "n_theta must be at least 16");
  require(!c.points.empty(), ErrorKind::config, "points must not be empty");
  const double rmin = c.r_grid.back();
  require(c.h_rule.h(rmin) > 0.0 && c.h_rule.h(rmin) <= rmin / 10.0 * (1.0 + 1e-12), ErrorKind::config,
          "h_rule must keep h <= r_min / 10");
  if (heavy_tailed(c.triplet))
    require(c.statistic != ScaleStatistic::std_dev, ErrorKind::config,
            "statistic 'std' is not allowed for infinite-variance bases");
  Volatility(c.volatility, c.seed, 0);
}

// ---------------------------------------------------------------------------
// Small statistics helpers

inline double quantile_sorted(const std::vector<double>& s, double q) {
  if (s.empty()) return std::nan("");
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double f = pos - static_cast<double>(i);
  return i + 1 < s.size() ? s[i] * (1 - f) + s[i + 1] * f : s[i];
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

inline double median_abs(const std::vector<double>& v) {
  std::vector<double> a(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::abs(v[i]);
  return median_of(std::move(a));
}

inline double scale_statistic(const std::vector<double>& v, ScaleStatistic s) {
  switch (s) {
    case ScaleStatistic::iqr: {
      std::vector<double> t = v;
      std::sort(t.begin(), t.end());
      return quantile_sorted(t, 0.75) - quantile_sorted(t, 0.25);
    }
    case ScaleStatistic::median_abs: return median_abs(v);
    case ScaleStatistic::std_dev: {
      double m = 0.0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      double s2 = 0.0;
      for (double x : v) s2 += (x - m) * (x - m);
      return std::sqrt(s2 / static_cast<double>(v.size() - 1));
    }
  }
  return 0.0;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

// Ordinary least squares with a 95% Student-t interval on the slope.
inline LinearFit ols(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  require(n >= 2 && y.size() == n, ErrorKind::domain, "ols needs at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = y[i] - f.intercept - f.slope * x[i];
      sse += e * e;
    }
    f.se = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
    const boost::math::students_t dist(static_cast<double>(n - 2));
    const double tq = boost::math::quantile(dist, 0.975);
    f.ci_lo = f.slope - tq * f.se;
    f.ci_hi = f.slope + tq * f.se;
  } else {
    f.ci_lo = f.ci_hi = f.slope;
  }
  return f;
}

inline cplx empirical_cf(const std::vector<double>& v, double z) {
  double c = 0, s = 0;
  for (double x : v) {
    c += std::cos(z * x);
    s += std::sin(z * x);
  }
  return {c / static_cast<double>(v.size()), s / static_cast<double>(v.size())};
}

// ---------------------------------------------------------------------------
// Replicate sampling

struct LineSamples {
  std::size_t points = 0;
  std::vector<double> flux, circ;    // index m * points + i
  std::vector<double> sigma, omega;  // classical limits on the same realization
  std::vector<double> jac;           // sum |L| |DF| over R + p
};

struct SampleRequest {
  bool flux = true;
  bool circ = false;
  bool limits = false;
  bool jacobian = false;
  bool allow_aggregate = true;
};

inline std::uint32_t replicate_id(std::size_t r_index, int M, int m) {
  return static_cast<std::uint32_t>(r_index * static_cast<std::size_t>(M) + static_cast<std::size_t>(m));
}

inline double grid_jacobian_scale(const GridRealization& g, const Kernel& k, const AmbitSet& set, Vec2 p) {
  const auto [blo, bhi] = set.bounding_box();
  std::int64_t ia, ib, ja, jb;
  g.center_range(blo + p, bhi + p, ia, ib, ja, jb);
  double s = 0.0;
  for (std::int64_t j = ja; j <= jb; ++j)
    for (std::int64_t i = ia; i <= ib; ++i) {
      const Vec2 c = g.center(i, j);
      if (set.contains(c - p)) s += std::abs(g.value(i, j)) * k.jacobian_norm(p - c);
    }
  return s;
}

inline LineSamples sample_lines(const ExperimentConfig& cfg, std::size_t r_index, double r, SampleRequest req) {
  const double h = cfg.h_rule.h(r);
  const Window win = make_window(cfg.set, cfg.points, r, h);
  const bool atoms = atoms_representable(cfg.triplet);
  const int threads = resolve_threads(cfg.threads);
  const std::size_t P = cfg.points.size();
  const auto M = static_cast<std::size_t>(cfg.replicates);
  const bool const_vol = std::holds_alternative<ConstantVol>(cfg.volatility);
  const bool aggregate = req.allow_aggregate && cfg.aggregate_gaussian_interior && !atoms &&
                         std::holds_alternative<NoJumps>(cfg.triplet.nu) && const_vol;
  const double gamma_d = (req.limits) ? classical_drift(cfg.triplet, vanishes_on_boundary(cfg.kernel, cfg.set)) : 0.0;

  std::vector<FluxStencil> st_flux, st_circ;
  if (!atoms) {
    for (const auto& p : cfg.points) {
      if (req.flux)
        st_flux.push_back(compile_stencil(cfg.kernel, cfg.set, p, r, h, cfg.n_theta, LineMode::flux, !aggregate, threads));
      if (req.circ)
        st_circ.push_back(
            compile_stencil(cfg.kernel, cfg.set, p, r, h, cfg.n_theta, LineMode::circulation, !aggregate, threads));
    }
  }

  LineSamples out;
  out.points = P;
  if (req.flux) out.flux.assign(M * P, 0.0);
  if (req.circ) out.circ.assign(M * P, 0.0);
  if (req.limits) {
    out.sigma.assign(M * P, 0.0);
    out.omega.assign(M * P, 0.0);
  }
  if (req.jacobian) out.jac.assign(M * P, 0.0);

  const double cvol = const_vol ? std::get<ConstantVol>(cfg.volatility).c : 1.0;
  auto aggregated = [&](const FluxStencil& st, const GridRealization& g, std::uint32_t rep, std::uint32_t tag) {
    check_stencil_window(st, g);
    double s = 0.0;
    for (std::size_t t = 0; t < st.n_collar; ++t) s += st.w[t] * g.value(st.I[t], st.J[t]);
    CounterRng rng(cfg.seed, Purpose::auxiliary, tag, static_cast<std::uint32_t>(r_index), rep);
    const double hh = h * h;
    s += cfg.triplet.gamma * hh * st.interior_s1 + cfg.triplet.b * h * std::sqrt(st.interior_s2) * rng.normal();
    return cvol * s;
  };

  parallel_for(M, threads, [&](std::size_t m) {
    const std::uint32_t rep = replicate_id(r_index, cfg.replicates, static_cast<int>(m));
    const Volatility vol(cfg.volatility, cfg.seed, rep);
    if (atoms) {
      const LevyRealization real = realize_atoms(cfg.triplet, win, cfg.seed, rep);
      const auto& a = std::get<AtomRealization>(real);
      for (std::size_t i = 0; i < P; ++i) {
        const Vec2 p = cfg.points[i];
        if (req.flux) out.flux[m * P + i] = line_functional_atoms(a, cfg.kernel, cfg.set, p, r, cfg.n_theta, LineMode::flux, vol);
        if (req.circ)
          out.circ[m * P + i] = line_functional_atoms(a, cfg.kernel, cfg.set, p, r, cfg.n_theta, LineMode::circulation, vol);
        if (req.limits) {
          out.sigma[m * P + i] = limit_field(real, cfg.kernel, cfg.set, p, gamma_d, LineMode::flux, vol);
          out.omega[m * P + i] = limit_field(real, cfg.kernel, cfg.set, p, gamma_d, LineMode::circulation, vol);
        }
        if (req.jacobian) {
          double s = 0.0;
          for (const auto& at : a.atoms)
            if (cfg.set.contains(at.q - p)) s += std::abs(at.x) * cfg.kernel.jacobian_norm(p - at.q);
          out.jac[m * P + i] = s;
        }
      }
    } else {
      const auto g = GridRealization::over(cfg.triplet, win, h, cfg.seed, rep, cfg.sampling);
      const LevyRealization real = g;
      for (std::size_t i = 0; i < P; ++i) {
        const Vec2 p = cfg.points[i];
        if (req.flux)
          out.flux[m * P + i] = aggregate ? aggregated(st_flux[i], g, rep, static_cast<std::uint32_t>(2 * i))
                                          : apply_stencil(st_flux[i], g, vol);
        if (req.circ)
          out.circ[m * P + i] = aggregate ? aggregated(st_circ[i], g, rep, static_cast<std::uint32_t>(2 * i + 1))
                                          : apply_stencil(st_circ[i], g, vol);
        if (req.limits) {
          out.sigma[m * P + i] = limit_field(real, cfg.kernel, cfg.set, p, gamma_d, LineMode::flux, vol);
          out.omega[m * P + i] = limit_field(real, cfg.kernel, cfg.set, p, gamma_d, LineMode::circulation, vol);
        }
        if (req.jacobian) out.jac[m * P + i] = grid_jacobian_scale(g, cfg.kernel, cfg.set, p);
      }
    }
  });
  for (const auto* v : {&out.flux, &out.circ})
    for (double x : *v)
      if (!std::isfinite(x)) throw NumericalError("line functional is not finite at r = " + std::to_string(r), x);
  return out;
}

// ---------------------------------------------------------------------------
// Rate scan

struct RatePoint {
  double r = 0.0;
  double h = 0.0;
  double scale = 0.0;
  double median_abs = 0.0;
  std::size_t samples = 0;
};

struct RawSample {
  double r;
  int replicate;
  std::size_t point;
  double value;
  double normalized;
};

struct RateReport {
  Regime regime;
  double predicted_slope = 0.0;
  LinearFit fit;
  double tolerance = 0.0;
  bool pass = false;
  std::vector<RatePoint> per_r;
  std::vector<RawSample> raw;
  std::optional<double> pathwise_median_rel_error;  // classical regime on atoms
  std::size_t pathwise_count = 0;
  double runtime_s = 0.0;
  std::string statistic;
  LineMode mode = LineMode::flux;
};

inline Regime experiment_regime(const ExperimentConfig& cfg) {
  return classify_regime(cfg.triplet, !vanishes_on_boundary(cfg.kernel, cfg.set));
}

inline void require_integrable(const ExperimentConfig& cfg) {
  const auto rep = integrability_report(cfg.triplet, cfg.kernel, cfg.set);
  if (!rep.integrable) fail(ErrorKind::domain, "kernel is not integrable against the basis on R: " + rep.note);
}

inline RateReport rate_scan(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  validate(cfg);
  require(cfg.r_grid.size() >= 4, ErrorKind::config, "rate scans need at least 4 radii");
  require_integrable(cfg);
  RateReport rep;
  rep.regime = experiment_regime(cfg);
  rep.predicted_slope = cfg.expected_slope.value_or(rep.regime.rate_exponent);
  rep.tolerance = cfg.slope_tolerance;
  rep.statistic = to_string(cfg.statistic);
  rep.mode = cfg.mode;
  const bool pathwise = rep.regime.tag == RegimeTag::Classical && atoms_representable(cfg.triplet);
  std::vector<double> lx, ly;
  for (std::size_t ri = 0; ri < cfg.r_grid.size(); ++ri) {
    const double r = cfg.r_grid[ri];
    const bool last = ri + 1 == cfg.r_grid.size();
    SampleRequest req;
    req.flux = cfg.mode == LineMode::flux;
    req.circ = cfg.mode == LineMode::circulation;
    req.limits = pathwise && last;
    const auto s = sample_lines(cfg, ri, r, req);
    const auto& v = req.flux ? s.flux : s.circ;
    const double norm_r = rep.regime.tag == RegimeTag::Classical ? kPi * r * r : rep.regime.normalizer(r);
    for (std::size_t m = 0; m < static_cast<std::size_t>(cfg.replicates); ++m)
      for (std::size_t i = 0; i < s.points; ++i) {
        const double x = v[m * s.points + i];
        rep.raw.push_back({r, static_cast<int>(m), i, x, x / norm_r});
      }
    RatePoint rp;
    rp.r = r;
    rp.h = cfg.h_rule.h(r);
    rp.scale = scale_statistic(v, cfg.statistic);
    rp.median_abs = median_abs(v);
    rp.samples = v.size();
    rep.per_r.push_back(rp);
    if (rp.scale > 0.0) {
      lx.push_back(std::log(r));
      ly.push_back(std::log(rp.scale));
    }
    if (req.limits) {
      const auto& lim = req.flux ? s.sigma : s.omega;
      std::vector<double> rel;
      for (std::size_t j = 0; j < v.size(); ++j)
        if (lim[j] != 0.0) rel.push_back(std::abs(v[j] / (kPi * r * r) - lim[j]) / std::abs(lim[j]));
      rep.pathwise_count = rel.size();
      if (!rel.empty()) rep.pathwise_median_rel_error = median_of(rel);
    }
  }
  if (lx.size() >= 2) {
    rep.fit = ols(lx, ly);
    rep.pass = std::abs(rep.fit.slope - rep.predicted_slope) <= rep.tolerance;
  }
  rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ---------------------------------------------------------------------------
// Limit law check

struct CfRow {
  double z;
  cplx empirical;
  cplx oracle;
};

struct LimitReport {
  Regime regime;
  double r = 0.0;
  double normalizer = 0.0;
  std::vector<CfRow> rows;
  double sup_distance = 0.0;
  double threshold = 0.0;
  bool pass = false;
  double sample_variance = 0.0;
  double oracle_variance = std::nan("");  // finite-variance limits only
  std::vector<double> normalized;
  double runtime_s = 0.0;
};

// Cumulant of the limit law of the normalized functional.
inline cplx limit_cumulant(const ExperimentConfig& cfg, const Regime& reg, double z) {
  const double gd = classical_drift(cfg.triplet, vanishes_on_boundary(cfg.kernel, cfg.set));
  switch (reg.tag) {
    case RegimeTag::Classical: return cf_sigma_exact(cfg.triplet, cfg.kernel, cfg.set, z, gd, cfg.mode);
    case RegimeTag::GaussianAttractor: return cf_limit_exact(reg.seed, cfg.kernel, cfg.set, z, cfg.mode);
    case RegimeTag::StableAttractor: {
      cplx c = cf_limit_exact(reg.seed, cfg.kernel, cfg.set, z, cfg.mode);
      if (reg.beta == 1.0) c += cf_sigma_exact(cfg.triplet, cfg.kernel, cfg.set, z, gd, cfg.mode);
      return c;
    }
  }
  return 0.0;
}

inline LimitReport limit_distribution_test(const ExperimentConfig& cfg, const std::vector<double>& zs) {
  const auto t0 = std::chrono::steady_clock::now();
  validate(cfg);
  require_integrable(cfg);
  require(std::holds_alternative<ConstantVol>(cfg.volatility), ErrorKind::config,
          "limit law checks need a deterministic kernel (constant volatility)");
  LimitReport rep;
  rep.regime = experiment_regime(cfg);
  const double c = std::get<ConstantVol>(cfg.volatility).c;
  rep.r = cfg.r_grid.back();
  rep.normalizer = rep.regime.tag == RegimeTag::Classical ? kPi * rep.r * rep.r : rep.regime.normalizer(rep.r);
  ExperimentConfig one = cfg;
  one.points = {cfg.points.front()};
  SampleRequest req;
  req.flux = cfg.mode == LineMode::flux;
  req.circ = !req.flux;
  const auto s = sample_lines(one, cfg.r_grid.size() - 1, rep.r, req);
  const auto& v = req.flux ? s.flux : s.circ;
  rep.normalized.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) rep.normalized[i] = v[i] / rep.normalizer / c;
  rep.sample_variance = scale_statistic(rep.normalized, ScaleStatistic::std_dev);
  rep.sample_variance *= rep.sample_variance;
  if (rep.regime.tag == RegimeTag::GaussianAttractor) {
    // Variance of the Gaussian boundary limit: b^2 int (F . u)^2 dH^1.
    double s2 = 0.0;
    for (const auto& nd : boundary_nodes(cfg.set)) {
      const double a = dot(cfg.kernel.eval(-nd.q), cfg.mode == LineMode::flux ? nd.normal : perp(nd.normal));
      s2 += nd.w * a * a;
    }
    rep.oracle_variance = cfg.triplet.b * cfg.triplet.b * s2;
  }
  for (double z : zs) {
    CfRow row{z, empirical_cf(rep.normalized, z), std::exp(limit_cumulant(cfg, rep.regime, z))};
    rep.sup_distance = std::max(rep.sup_distance, std::abs(row.empirical - row.oracle));
    rep.rows.push_back(row);
  }
  rep.threshold = 3.0 / std::sqrt(static_cast<double>(v.size())) + cfg.cf_allowance;
  rep.pass = rep.sup_distance <= rep.threshold;
  rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ---------------------------------------------------------------------------
// Incompressibility and irrotationality

struct VanishingReport {
  LineMode vanishing = LineMode::flux;
  std::vector<double> r;
  std::vector<double> median_abs_vanishing;  // per r, normalized by pi r^2
  std::vector<double> median_abs_other;      // per r, normalized by pi r^2
  double reference_scale = 0.0;
  std::string reference_kind;  // "circulation", "flux" or "jacobian"
  double ratio = 0.0;
  bool decreasing = false;
  std::optional<double> limit_match_median_rel_error;  // other functional vs omega/sigma
  bool pass = false;
  double threshold = 0.05;
  double runtime_s = 0.0;
};

// The normalized `vanishing` functional must be small at r_min compared
// with the scale of the other functional; when that scale is itself zero
// (kernels with div = curl = 0) the Jacobian scale sum |L| |DF| is used.
inline VanishingReport vanishing_test(const ExperimentConfig& cfg, LineMode vanishing, double threshold = 0.05) {
  const auto t0 = std::chrono::steady_clock::now();
  validate(cfg);
  require_integrable(cfg);
  VanishingReport rep;
  rep.vanishing = vanishing;
  rep.threshold = threshold;
  std::vector<double> last_other, last_lim, last_jac;
  for (std::size_t ri = 0; ri < cfg.r_grid.size(); ++ri) {
    const double r = cfg.r_grid[ri];
    const bool last = ri + 1 == cfg.r_grid.size();
    SampleRequest req;
    req.flux = req.circ = true;
    req.limits = last && atoms_representable(cfg.triplet);
    req.jacobian = last;
    req.allow_aggregate = true;
    const auto s = sample_lines(cfg, ri, r, req);
    const double a = kPi * r * r;
    std::vector<double> nv, no;
    for (std::size_t j = 0; j < s.flux.size(); ++j) {
      const double f = s.flux[j] / a, c = s.circ[j] / a;
      nv.push_back(vanishing == LineMode::flux ? f : c);
      no.push_back(vanishing == LineMode::flux ? c : f);
    }
    rep.r.push_back(r);
    rep.median_abs_vanishing.push_back(median_abs(nv));
    rep.median_abs_other.push_back(median_abs(no));
    if (last) {
      last_other = no;
      if (req.limits) last_lim = vanishing == LineMode::flux ? s.omega : s.sigma;
      last_jac = s.jac;
    }
  }
  const double other = rep.median_abs_other.back();
  const double jac = median_of(last_jac);
  if (other > 1e-6 * jac) {
    rep.reference_scale = other;
    rep.reference_kind = vanishing == LineMode::flux ? "circulation" : "flux";
  } else {
    rep.reference_scale = jac;
    rep.reference_kind = "jacobian";
  }
  rep.ratio = rep.median_abs_vanishing.back() / std::max(rep.reference_scale, 1e-300);
  rep.decreasing = rep.median_abs_vanishing.back() <= rep.median_abs_vanishing.front();
  if (!last_lim.empty()) {
    std::vector<double> rel;
    for (std::size_t j = 0; j < last_lim.size(); ++j)
      if (last_lim[j] != 0.0) rel.push_back(std::abs(last_other[j] - last_lim[j]) / std::abs(last_lim[j]));
    if (!rel.empty()) rep.limit_match_median_rel_error = median_of(rel);
  }
  rep.pass = rep.reference_scale > 0.0 && rep.ratio < threshold;
  rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

inline VanishingReport incompressibility_test(const ExperimentConfig& cfg) { return vanishing_test(cfg, LineMode::flux); }
inline VanishingReport irrotationality_test(const ExperimentConfig& cfg) {
  return vanishing_test(cfg, LineMode::circulation);
}

// ---------------------------------------------------------------------------
// Isotropy of increments

struct IsotropyConfig {
  ExperimentConfig base;
  double theta = kPi / 2.0;
  Vec2 p{0.1, 0.0};
  Vec2 p0{0.3, 0.2};
  double h = 0.02;
  bool allow_non_isotropic = false;  // for negative controls only
  double z_threshold = 3.0;
};

struct IsotropyStat {
  std::string name;
  double a = 0.0;
  double b = 0.0;
  double z = 0.0;
};

struct IsotropyReport {
  std::vector<IsotropyStat> stats;
  double max_abs_z = 0.0;
  bool pass = false;
  double runtime_s = 0.0;
};

inline IsotropyReport isotropy_test(const IsotropyConfig& ic) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& cfg = ic.base;
  validate(cfg.triplet);
  require(cfg.replicates >= 100, ErrorKind::config, "replicates must be at least 100");
  if (!ic.allow_non_isotropic)
    require(cfg.set.rotation_invariant(), ErrorKind::config,
            "isotropy test needs a rotation-invariant ambit set (disk or annulus centred at 0)");
  require(ic.h > 0.0, ErrorKind::config, "isotropy test needs h > 0");
  const Vec2 q1 = ic.p, q2 = ic.p + ic.p0;
  const Vec2 r1 = rotate(q1, ic.theta), r2 = rotate(q2, ic.theta);
  const Window win = make_window(cfg.set, {q1, q2, r1, r2}, 0.0, ic.h);
  const auto M = static_cast<std::size_t>(cfg.replicates);
  std::vector<Vec2> d1(M), d2(M);
  const int threads = resolve_threads(cfg.threads);
  parallel_for(M, threads, [&](std::size_t m) {
    const Volatility vol(cfg.volatility, cfg.seed, static_cast<std::uint32_t>(m));
    const Volatility vol2(cfg.volatility, cfg.seed, static_cast<std::uint32_t>(M + m));
    const LevyRealization a = realize(cfg.triplet, win, ic.h, cfg.seed, static_cast<std::uint32_t>(m), cfg.sampling);
    const LevyRealization b = realize(cfg.triplet, win, ic.h, cfg.seed, static_cast<std::uint32_t>(M + m), cfg.sampling);
    d1[m] = eval_field_modulated(a, cfg.kernel, cfg.set, vol, q2) - eval_field_modulated(a, cfg.kernel, cfg.set, vol, q1);
    const Vec2 y = eval_field_modulated(b, cfg.kernel, cfg.set, vol2, r2) -
                   eval_field_modulated(b, cfg.kernel, cfg.set, vol2, r1);
    d2[m] = rotate(y, -ic.theta);
  });
  IsotropyReport rep;
  const double n = static_cast<double>(M);
  auto mean_se = [n](const std::vector<double>& v) {
    double m = 0, s2 = 0;
    for (double x : v) m += x;
    m /= n;
    for (double x : v) s2 += (x - m) * (x - m);
    return std::pair<double, double>{m, std::sqrt(s2 / (n - 1) / n)};
  };
  auto compare = [&](const std::string& name, const std::vector<double>& a, const std::vector<double>& b) {
    const auto [ma, sa] = mean_se(a);
    const auto [mb, sb] = mean_se(b);
    const double se = std::sqrt(sa * sa + sb * sb);
    IsotropyStat st{name, ma, mb, se > 0 ? (ma - mb) / se : (ma == mb ? 0.0 : 1e300)};
    rep.stats.push_back(st);
    rep.max_abs_z = std::max(rep.max_abs_z, std::abs(st.z));
  };
  auto column = [](const std::vector<Vec2>& d, auto f) {
    std::vector<double> v;
    v.reserve(d.size());
    for (const auto& x : d) v.push_back(f(x));
    return v;
  };
  const auto x1 = column(d1, [](Vec2 v) { return v.x; }), y1 = column(d1, [](Vec2 v) { return v.y; });
  const auto x2 = column(d2, [](Vec2 v) { return v.x; }), y2 = column(d2, [](Vec2 v) { return v.y; });
  compare("mean_x", x1, x2);
  compare("mean_y", y1, y2);
  const double mx1 = mean_se(x1).first, my1 = mean_se(y1).first, mx2 = mean_se(x2).first, my2 = mean_se(y2).first;
  auto prod = [](const std::vector<double>& a, double ma, const std::vector<double>& b, double mb) {
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[i] = (a[i] - ma) * (b[i] - mb);
    return v;
  };
  compare("var_x", prod(x1, mx1, x1, mx1), prod(x2, mx2, x2, mx2));
  compare("var_y", prod(y1, my1, y1, my1), prod(y2, my2, y2, my2));
  compare("cov_xy", prod(x1, mx1, y1, my1), prod(x2, mx2, y2, my2));
  // Marginal characteristic functions at one frequency per component.
  auto sd = [&](const std::vector<double>& v) { return mean_se(v).second * std::sqrt(n); };
  const double zx = 1.0 / std::max(1e-300, 0.5 * (sd(x1) + sd(x2)));
  const double zy = 1.0 / std::max(1e-300, 0.5 * (sd(y1) + sd(y2)));
  auto trig = [](const std::vector<double>& v, double z, bool cosine) {
    std::vector<double> o(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) o[i] = cosine ? std::cos(z * v[i]) : std::sin(z * v[i]);
    return o;
  };
  compare("cf_x_re", trig(x1, zx, true), trig(x2, zx, true));
  compare("cf_x_im", trig(x1, zx, false), trig(x2, zx, false));
  compare("cf_y_re", trig(y1, zy, true), trig(y2, zy, true));
  compare("cf_y_im", trig(y1, zy, false), trig(y2, zy, false));
  rep.pass = rep.max_abs_z <= ic.z_threshold;
  rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ---------------------------------------------------------------------------
// Decomposition audit

struct AuditRow {
  double r = 0.0;
  double max_residual = 0.0;           // relative identity residual
  double median_interior_rel_error = 0.0;  // |(pi r^2)^{-1} interior - sigma| / |sigma|
  double median_abs_boundary_over_r2 = 0.0;
  std::size_t sigma_nonzero = 0;
};

struct AuditReport {
  std::vector<AuditRow> rows;
  double max_residual = 0.0;
  bool pass = false;
  double runtime_s = 0.0;
};

inline AuditReport decomposition_audit(const ExperimentConfig& cfg, double residual_tol = 1e-10,
                                       double interior_tol = 0.02) {
  const auto t0 = std::chrono::steady_clock::now();
  validate(cfg);
  require(atoms_representable(cfg.triplet), ErrorKind::config,
          "decomposition audit needs a compound Poisson basis without Gaussian part");
  const double gamma_d = classical_drift(cfg.triplet, vanishes_on_boundary(cfg.kernel, cfg.set));
  const int threads = resolve_threads(cfg.threads);
  AuditReport rep;
  const std::size_t P = cfg.points.size();
  const auto M = static_cast<std::size_t>(cfg.replicates);
  for (std::size_t ri = 0; ri < cfg.r_grid.size(); ++ri) {
    const double r = cfg.r_grid[ri];
    const Window win = make_window(cfg.set, cfg.points, r, cfg.h_rule.h(r));
    std::vector<double> resid(M * P), rel(M * P, -1.0), bnd(M * P);
    parallel_for(M, threads, [&](std::size_t m) {
      const std::uint32_t rep_id = replicate_id(ri, cfg.replicates, static_cast<int>(m));
      const LevyRealization real = realize_atoms(cfg.triplet, win, cfg.seed, rep_id);
      for (std::size_t i = 0; i < P; ++i) {
        const Vec2 p = cfg.points[i];
        const auto d = flux_decomposition(real, cfg.kernel, cfg.set, p, r, cfg.n_theta, cfg.mode);
        const double lim = limit_field(real, cfg.kernel, cfg.set, p, gamma_d, cfg.mode);
        const double scale = std::max({std::abs(d.total), std::abs(d.interior), std::abs(d.boundary)});
        resid[m * P + i] = scale > 0 ? d.residual() / scale : d.residual();
        if (lim != 0.0) rel[m * P + i] = std::abs(d.interior / (kPi * r * r) - lim) / std::abs(lim);
        bnd[m * P + i] = std::abs(d.boundary) / (r * r);
      }
    });
    AuditRow row;
    row.r = r;
    row.max_residual = *std::max_element(resid.begin(), resid.end());
    std::vector<double> good;
    for (double x : rel)
      if (x >= 0.0) good.push_back(x);
    row.sigma_nonzero = good.size();
    row.median_interior_rel_error = good.empty() ? 0.0 : median_of(good);
    row.median_abs_boundary_over_r2 = median_of(bnd);
    rep.max_residual = std::max(rep.max_residual, row.max_residual);
    rep.rows.push_back(row);
  }
  rep.pass = rep.max_residual < residual_tol && rep.rows.back().median_interior_rel_error < interior_tol;
  rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace ambit
