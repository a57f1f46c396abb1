#pragma once
// JSON configuration for experiments. Every parse error is reported as a
// config error naming the offending field by its dotted path.

#include <cstdint>
#include <cstdio>
#include "json.hpp"
#include <string>

#include "asymptotics_lab.hpp"

#ifndef AMBIT_GIT_REV
#define AMBIT_GIT_REV "unknown"
#endif

namespace ambit {

inline std::string version_string() { return std::string("0.1.0+g") + AMBIT_GIT_REV; }

namespace cfg {

using json = nlohmann::json;

[[noreturn]] inline void bad(const std::string& path, const std::string& what) {
  fail(ErrorKind::config, "config field '" + path + "': " + what);
}

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) bad(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) bad(join(path, key), "missing");
  return *it;
}

inline bool has(const json& j, const std::string& key) { return j.is_object() && j.contains(key); }

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) bad(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad(path, "must be finite");
  return x;
}

inline double number(const json& j, const std::string& key, const std::string& path) {
  return as_number(need(j, key, path), join(path, key));
}
inline double number(const json& j, const std::string& key, const std::string& path, double def) {
  return has(j, key) ? number(j, key, path) : def;
}

inline std::int64_t integer(const json& j, const std::string& key, const std::string& path, std::int64_t def) {
  if (!has(j, key)) return def;
  const json& v = j.at(key);
  if (!v.is_number_integer()) bad(join(path, key), "expected an integer");
  return v.get<std::int64_t>();
}

inline bool boolean(const json& j, const std::string& key, const std::string& path, bool def) {
  if (!has(j, key)) return def;
  const json& v = j.at(key);
  if (!v.is_boolean()) bad(join(path, key), "expected true or false");
  return v.get<bool>();
}

inline std::string string(const json& j, const std::string& key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_string()) bad(join(path, key), "expected a string");
  return v.get<std::string>();
}
inline std::string string(const json& j, const std::string& key, const std::string& path, const std::string& def) {
  return has(j, key) ? string(j, key, path) : def;
}

inline std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array()) bad(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline Vec2 point(const json& v, const std::string& path) {
  const auto x = numbers(v, path);
  if (x.size() != 2) bad(path, "expected a point [x, y]");
  return {x[0], x[1]};
}

inline std::vector<Vec2> points(const json& v, const std::string& path) {
  if (!v.is_array()) bad(path, "expected an array of points");
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(point(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

// Re-throws library errors raised while building an object as config errors
// attributed to `path`.
template <class F>
auto attributed(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::numerical) throw;
    bad(path, e.what());
  }
}

// ---------------------------------------------------------------------------

inline JumpLaw parse_jumps(const json& j, const std::string& path) {
  const std::string kind = string(j, "kind", path);
  if (kind == "normal") return NormalJumps{number(j, "mean", path, 0.0), number(j, "sd", path, 1.0)};
  if (kind == "exponential") return ExponentialJumps{number(j, "rate", path, 1.0)};
  if (kind == "discrete") {
    DiscreteJumps d;
    d.values = numbers(need(j, "values", path), join(path, "values"));
    d.weights = has(j, "weights") ? numbers(j.at("weights"), join(path, "weights"))
                                  : std::vector<double>(d.values.size(), 1.0);
    return d;
  }
  bad(join(path, "kind"), "unknown jump law '" + kind + "' (normal, exponential, discrete)");
}

inline LevyMeasureSpec parse_nu(const json& j, const std::string& path) {
  const std::string kind = string(j, "kind", path);
  if (kind == "none") return NoJumps{};
  if (kind == "stable") {
    StableDensity s;
    s.beta = number(j, "beta", path);
    s.K_plus = number(j, "K_plus", path);
    s.K_minus = number(j, "K_minus", path, s.K_plus);
    return s;
  }
  if (kind == "cp") {
    CompoundPoisson c;
    c.rate = number(j, "rate", path);
    c.jumps = parse_jumps(need(j, "jumps", path), join(path, "jumps"));
    return c;
  }
  if (kind == "gh") {
    GHDensity g;
    g.lambda = number(j, "lambda", path, g.lambda);
    g.alpha = number(j, "alpha", path, g.alpha);
    g.theta = number(j, "theta", path, g.theta);
    g.delta = number(j, "delta", path, g.delta);
    return g;
  }
  bad(join(path, "kind"), "unknown Levy measure '" + kind + "' (none, stable, cp, gh)");
}

inline CharacteristicTriplet parse_triplet(const json& j, const std::string& path = "triplet") {
  CharacteristicTriplet t;
  t.gamma = number(j, "gamma", path, 0.0);
  t.b = number(j, "b", path, 0.0);
  t.nu = has(j, "nu") ? parse_nu(j.at("nu"), join(path, "nu")) : LevyMeasureSpec{NoJumps{}};
  attributed(path, [&] {
    validate(t);
    return 0;
  });
  return t;
}

inline SimpleShape parse_simple(const json& j, const std::string& path) {
  const std::string kind = string(j, "kind", path);
  if (kind == "disk")
    return Disk{has(j, "center") ? point(j.at("center"), join(path, "center")) : Vec2{0, 0}, number(j, "radius", path)};
  if (kind == "polygon") return ConvexPolygon{points(need(j, "vertices", path), join(path, "vertices"))};
  bad(join(path, "kind"), "expected 'disk' or 'polygon' here");
}

inline AmbitSet parse_shape(const json& j, const std::string& path = "shape") {
  const std::string kind = string(j, "kind", path);
  JordanDomainSpec spec;
  if (kind == "disk" || kind == "polygon") {
    spec = std::visit([](const auto& s) -> JordanDomainSpec { return s; }, parse_simple(j, path));
  } else if (kind == "annulus") {
    Annulus a;
    a.center = has(j, "center") ? point(j.at("center"), join(path, "center")) : Vec2{0, 0};
    a.inner = number(j, "inner", path);
    a.outer = number(j, "outer", path);
    spec = a;
  } else if (kind == "difference") {
    SetDifference d;
    d.outer = parse_simple(need(j, "outer", path), join(path, "outer"));
    const json& holes = need(j, "holes", path);
    if (!holes.is_array()) bad(join(path, "holes"), "expected an array of shapes");
    for (std::size_t i = 0; i < holes.size(); ++i)
      d.holes.push_back(parse_simple(holes[i], join(path, "holes") + "[" + std::to_string(i) + "]"));
    spec = d;
  } else {
    bad(join(path, "kind"), "unknown shape '" + kind + "' (disk, annulus, polygon, difference)");
  }
  return attributed(path, [&] { return AmbitSet(spec); });
}

inline RadialProfile parse_profile(const json& j, const std::string& path) {
  const std::string kind = string(j, "kind", path);
  if (kind == "power") return PowerLaw{number(j, "K", path, 1.0), number(j, "p", path)};
  if (kind == "polynomial") return PolynomialRadial{numbers(need(j, "coeffs", path), join(path, "coeffs"))};
  if (kind == "bump") {
    BumpVanishing b{number(j, "a", path), number(j, "b", path)};
    if (!(b.a >= 0.0 && b.b > b.a)) bad(path, "bump needs 0 <= a < b");
    return b;
  }
  bad(join(path, "kind"), "unknown profile '" + kind + "' (power, polynomial, bump)");
}

inline std::vector<Monomial> parse_monomials(const json& v, const std::string& path) {
  if (!v.is_array()) bad(path, "expected an array of [coef, i, j] triples");
  std::vector<Monomial> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const std::string p = path + "[" + std::to_string(k) + "]";
    const auto x = numbers(v[k], p);
    if (x.size() != 3 || x[1] < 0 || x[2] < 0 || x[1] != std::floor(x[1]) || x[2] != std::floor(x[2]))
      bad(p, "expected [coef, i, j] with non-negative integer powers");
    out.push_back({x[0], static_cast<int>(x[1]), static_cast<int>(x[2])});
  }
  return out;
}

inline Kernel parse_kernel(const json& j, const std::string& path = "kernel") {
  const std::string kind = string(j, "kind", path);
  if (kind == "isotropic") {
    IsotropicKernel k;
    k.phi = number(j, "phi", path, 0.0);
    k.profile = parse_profile(need(j, "profile", path), join(path, "profile"));
    return attributed(path, [&] { return Kernel(k); });
  }
  if (kind == "constant") {
    const Vec2 v = point(need(j, "value", path), join(path, "value"));
    return constant_kernel(v);
  }
  if (kind == "polynomial") {
    PolynomialKernel k;
    k.F1 = parse_monomials(need(j, "F1", path), join(path, "F1"));
    k.F2 = parse_monomials(need(j, "F2", path), join(path, "F2"));
    return attributed(path, [&] { return Kernel(k); });
  }
  bad(join(path, "kind"), "unknown kernel '" + kind + "' (isotropic, constant, polynomial)");
}

inline VolatilitySpec parse_volatility(const json& j, const std::string& path = "volatility") {
  const std::string kind = string(j, "kind", path);
  if (kind == "constant") return ConstantVol{number(j, "c", path, 1.0)};
  if (kind == "independent_grid")
    return IndependentGridVol{number(j, "lo", path, 0.5), number(j, "hi", path, 1.5), number(j, "cell", path, 0.05)};
  if (kind == "lattice") {
    UserLatticeVol u;
    u.origin = has(j, "origin") ? point(j.at("origin"), join(path, "origin")) : Vec2{0, 0};
    u.h = number(j, "h", path);
    u.nx = static_cast<int>(integer(j, "nx", path, 0));
    u.ny = static_cast<int>(integer(j, "ny", path, 0));
    u.values = numbers(need(j, "values", path), join(path, "values"));
    if (u.values.size() != static_cast<std::size_t>(u.nx) * static_cast<std::size_t>(u.ny))
      bad(join(path, "values"), "expected nx * ny entries");
    return u;
  }
  bad(join(path, "kind"), "unknown volatility '" + kind + "' (constant, independent_grid, lattice)");
}

inline ScaleStatistic parse_statistic(const std::string& s, const std::string& path) {
  if (s == "iqr") return ScaleStatistic::iqr;
  if (s == "median_abs") return ScaleStatistic::median_abs;
  if (s == "std") return ScaleStatistic::std_dev;
  bad(path, "unknown statistic '" + s + "' (iqr, median_abs, std)");
}

inline LineMode parse_mode(const std::string& s, const std::string& path) {
  if (s == "flux") return LineMode::flux;
  if (s == "circulation") return LineMode::circulation;
  bad(path, "unknown mode '" + s + "' (flux, circulation)");
}

// Top-level experiment document. The seed comes from the command line.
inline ExperimentConfig parse_experiment(const json& j, std::uint64_t seed) {
  if (!j.is_object()) bad("", "the configuration must be a JSON object");
  ExperimentConfig c;
  c.seed = seed;
  c.triplet = parse_triplet(need(j, "triplet", ""));
  c.kernel = parse_kernel(need(j, "kernel", ""));
  c.set = parse_shape(need(j, "shape", ""));
  if (has(j, "volatility")) c.volatility = parse_volatility(j.at("volatility"));
  if (has(j, "points")) c.points = points(j.at("points"), "points");
  if (has(j, "r_grid")) c.r_grid = numbers(j.at("r_grid"), "r_grid");
  c.replicates = static_cast<int>(integer(j, "replicates", "", c.replicates));
  c.n_theta = static_cast<int>(integer(j, "n_theta", "", c.n_theta));
  if (has(j, "h_rule")) {
    const json& h = j.at("h_rule");
    const std::string kind = string(h, "kind", "h_rule");
    if (kind == "per_radius") {
      c.h_rule = HRule{true, number(h, "ratio", "h_rule", 10.0), 0.0};
      if (!(c.h_rule.ratio > 0.0)) bad("h_rule.ratio", "must be positive");
    } else if (kind == "fixed") {
      c.h_rule = HRule{false, 0.0, number(h, "h", "h_rule")};
    } else {
      bad("h_rule.kind", "expected 'per_radius' or 'fixed'");
    }
  }
  c.statistic = parse_statistic(string(j, "statistic", "", "iqr"), "statistic");
  c.mode = parse_mode(string(j, "mode", "", "flux"), "mode");
  c.slope_tolerance = number(j, "slope_tolerance", "", c.slope_tolerance);
  if (has(j, "expected_slope")) c.expected_slope = number(j, "expected_slope", "");
  c.cf_allowance = number(j, "cf_allowance", "", c.cf_allowance);
  c.aggregate_gaussian_interior = boolean(j, "aggregate_gaussian_interior", "", c.aggregate_gaussian_interior);
  if (has(j, "sampling")) {
    const json& s = j.at("sampling");
    c.sampling.allow_gh_approximation =
        boolean(s, "allow_gh_approximation", "sampling", c.sampling.allow_gh_approximation);
    c.sampling.gh_epsilon = number(s, "gh_epsilon", "sampling", c.sampling.gh_epsilon);
  }
  try {
    validate(c);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::numerical) throw;
    const std::string msg = e.what();
    std::string field = "experiment";
    for (const char* k : {"r_grid", "replicates", "n_theta", "points", "h_rule", "statistic", "volatility"})
      if (msg.find(k) != std::string::npos) {
        field = k;
        break;
      }
    bad(field, msg);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Provenance

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

// Canonical form: keys sorted, compact separators, shortest round-trip numbers.
inline std::string canonical(const json& j) { return j.dump(); }

inline std::uint64_t config_hash(const json& j, std::optional<std::uint64_t> seed) {
  std::string s = canonical(j);
  s += seed ? "|seed=" + std::to_string(*seed) : std::string("|seed=none");
  return fnv1a64(s);
}

inline std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cfg
}  // namespace ambit
