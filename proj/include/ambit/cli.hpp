#pragma once
// Command-line driver. run() parses argv, executes one subcommand and maps
// outcomes to exit codes: 0 pass, 1 failing verdict, 2 configuration error,
// 3 numerical error.
//
// Deterministic outputs (CSV and report.json) carry the config hash and the
// version string; wall-clock data goes to metadata.json only.

#include <CLI11.hpp>
#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "config.hpp"

namespace ambit::cli {

enum ExitCode { kPass = 0, kVerdictFailure = 1, kConfigError = 2, kNumericalError = 3 };

struct Options {
  std::string subcommand;
  std::string config_path;
  std::string out_dir = "ambit_out";
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string dump_path;
  std::string replay_path;
};

inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

// Deterministic output sink for one subcommand invocation.
class Output {
 public:
  Output(std::filesystem::path dir, std::string hash) : dir_(std::move(dir)), hash_(std::move(hash)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    require(!ec, ErrorKind::config, "cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  const std::string& hash() const { return hash_; }
  const std::filesystem::path& dir() const { return dir_; }

  // CSV with a provenance comment line, then the header, then rows.
  void csv(const std::string& name, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows) const {
    std::ostringstream os;
    os << "# ambit " << version_string() << " config_hash=" << hash_ << "\n";
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
      os << "\n";
    }
    write(name, os.str());
  }

  void report(cfg::json j) const {
    j["config_hash"] = hash_;
    j["version"] = version_string();
    write("report.json", j.dump(2) + "\n");
  }

  void write(const std::string& name, const std::string& content) const {
    std::ofstream f(dir_ / name, std::ios::binary);
    require(static_cast<bool>(f), ErrorKind::config, "cannot write " + (dir_ / name).string());
    f << content;
  }

 private:
  std::filesystem::path dir_;
  std::string hash_;
};

inline cfg::json vec_json(Vec2 v) { return cfg::json::array({v.x, v.y}); }

// JSON numbers cannot hold nan or inf; those become null.
inline cfg::json num(double x) { return std::isfinite(x) ? cfg::json(x) : cfg::json(nullptr); }

inline cfg::json regime_json(const Regime& r) {
  return {{"tag", to_string(r.tag)}, {"beta", r.beta}, {"rate_exponent", r.rate_exponent}, {"v", r.v}};
}

inline cfg::json load_config(const std::string& path) {
  require(!path.empty(), ErrorKind::config, "config field '--config': a configuration file is required");
  std::ifstream f(path);
  require(static_cast<bool>(f), ErrorKind::config, "config field '--config': cannot read " + path);
  try {
    return cfg::json::parse(f);
  } catch (const cfg::json::parse_error& e) {
    fail(ErrorKind::config, "config field '--config': invalid JSON in " + path + ": " + e.what());
  }
}

inline std::uint64_t need_seed(const Options& o) {
  require(o.seed.has_value(), ErrorKind::config, "config field '--seed': required for stochastic subcommands");
  return *o.seed;
}

inline const cfg::json& section(const cfg::json& j, const std::string& key) {
  static const cfg::json empty = cfg::json::object();
  if (!cfg::has(j, key)) return empty;
  if (!j.at(key).is_object()) cfg::bad(key, "expected an object");
  return j.at(key);
}

// ---------------------------------------------------------------------------
// Subcommands

inline int cmd_geometry(const cfg::json& j, const Output& out) {
  const AmbitSet set = cfg::parse_shape(cfg::need(j, "shape", ""));
  const cfg::json& g = section(j, "geometry");
  const std::vector<double> radii =
      cfg::has(g, "parallel_radii") ? cfg::numbers(g.at("parallel_radii"), "geometry.parallel_radii")
                                    : std::vector<double>{1e-2, 1e-3};
  const double tol = cfg::number(g, "minkowski_tolerance", "geometry", 5e-3);
  const auto a1 = set.assumption1_diagnostic();
  cfg::json comps = cfg::json::array();
  for (const auto& c : a1.components) {
    cfg::json corners = cfg::json::array();
    for (const auto& v : c.corners) corners.push_back(vec_json(v));
    comps.push_back({{"kind", c.kind},
                     {"length", c.length},
                     {"reach_lower_bound", num(c.reach_lower_bound)},
                     {"corners", corners}});
  }
  const auto mk = set.minkowski_content();
  const double h1 = set.perimeter();
  const double mk_rel = std::abs(mk.value - 2.0 * h1) / (2.0 * h1);
  std::vector<std::vector<std::string>> rows;
  cfg::json par = cfg::json::array();
  for (double r : radii) {
    const double a = cfg::attributed("geometry.parallel_radii", [&] { return set.parallel_set_area(r); });
    par.push_back({{"r", r}, {"area", a}});
    rows.push_back({fmt(r), fmt(a)});
  }
  std::vector<std::vector<std::string>> mrows;
  for (std::size_t i = 0; i < mk.radii.size(); ++i) mrows.push_back({fmt(mk.radii[i]), fmt(mk.ratios[i])});
  out.csv("parallel_areas.csv", {"r", "area"}, rows);
  out.csv("minkowski.csv", {"r", "ratio"}, mrows);
  const bool pass = a1.pass && mk_rel < tol;
  out.report({{"subcommand", "geometry"},
              {"area", set.area()},
              {"H1", h1},
              {"diameter", set.diameter()},
              {"min_separation", num(set.min_separation())},
              {"components", comps},
              {"assumption1", {{"pass", a1.pass}, {"note", a1.note}}},
              {"minkowski_content", mk.value},
              {"two_H1", 2.0 * h1},
              {"minkowski_relative_error", mk_rel},
              {"parallel_areas", par},
              {"pass", pass}});
  return pass ? kPass : kVerdictFailure;
}

inline int cmd_simulate(const cfg::json& j, const Options& o, const Output& out) {
  const std::uint64_t seed = need_seed(o);
  ExperimentConfig c = cfg::parse_experiment(j, seed);
  c.threads = o.threads;
  const cfg::json& s = section(j, "simulate");
  const double r = cfg::number(s, "r", "simulate", c.r_grid.back());
  const double h = cfg::number(s, "h", "simulate", c.h_rule.h(r));
  const int M = static_cast<int>(cfg::integer(s, "replicates", "simulate", 10));
  if (!(r > 0.0)) cfg::bad("simulate.r", "must be positive");
  if (!(h > 0.0)) cfg::bad("simulate.h", "must be positive");
  if (M < 1) cfg::bad("simulate.replicates", "must be at least 1");
  const Regime reg = experiment_regime(c);
  const double normalizer = reg.tag == RegimeTag::Classical ? kPi * r * r : reg.normalizer(r);
  const Window win = make_window(c.set, c.points, r, h);
  const bool grid = !o.dump_path.empty() || !o.replay_path.empty() || !atoms_representable(c.triplet);
  const std::uint64_t hash = cfg::config_hash(j, seed);

  std::optional<GridRealization> replayed;
  if (!o.replay_path.empty()) {
    DumpHeader hd;
    replayed = cfg::attributed("--replay", [&] { return read_dump(o.replay_path, c.triplet, &hd); });
    require(replayed->window().covers(win.lo, win.hi), ErrorKind::config,
            "config field '--replay': dumped window does not cover the evaluation window");
  }
  const std::size_t P = c.points.size();
  const int count = replayed ? 1 : M;
  std::vector<double> values(static_cast<std::size_t>(count) * P);
  parallel_for(static_cast<std::size_t>(count), resolve_threads(c.threads), [&](std::size_t m) {
    const auto rep = replayed ? replayed->replicate() : static_cast<std::uint32_t>(m);
    const Volatility vol(c.volatility, seed, rep);
    LevyRealization real = AtomRealization{};
    if (replayed) {
      real = *replayed;
    } else if (grid) {
      auto g = GridRealization::over(c.triplet, win, h, seed, rep, c.sampling);
      if (!o.dump_path.empty() && m == 0) {
        g.materialize();
        write_dump(o.dump_path, g, hash, version_string());
      }
      real = std::move(g);
    } else {
      real = realize_atoms(c.triplet, win, seed, rep);
    }
    for (std::size_t i = 0; i < P; ++i)
      values[m * P + i] = line_functional(real, c.kernel, c.set, c.points[i], r, c.n_theta, c.mode, vol);
  });
  for (double x : values)
    if (!std::isfinite(x)) throw NumericalError("line functional is not finite at r = " + fmt(r), x);
  std::vector<std::vector<std::string>> rows;
  for (int m = 0; m < count; ++m)
    for (std::size_t i = 0; i < P; ++i) {
      const int rep = replayed ? static_cast<int>(replayed->replicate()) : m;
      rows.push_back({std::to_string(rep), fmt(c.points[i].x), fmt(c.points[i].y), fmt(r),
                      fmt(values[static_cast<std::size_t>(m) * P + i]), fmt(normalizer), std::to_string(c.n_theta),
                      std::to_string(seed)});
    }
  out.csv("batch.csv", {"replicate", "p_x", "p_y", "r", "value", "normalizer", "N_theta", "seed"}, rows);
  out.report({{"subcommand", "simulate"},
              {"regime", regime_json(reg)},
              {"r", r},
              {"h", h},
              {"replicates", count},
              {"mode", to_string(c.mode)},
              {"realization", grid ? "grid" : "atoms"},
              {"replayed", replayed.has_value()}});
  return kPass;
}

inline int cmd_flux_scan(const cfg::json& j, const Options& o, const Output& out) {
  ExperimentConfig c = cfg::parse_experiment(j, need_seed(o));
  c.threads = o.threads;
  const RateReport rep = rate_scan(c);
  std::vector<std::vector<std::string>> raw, per;
  for (const auto& s : rep.raw)
    raw.push_back({fmt(s.r), std::to_string(static_cast<std::size_t>(s.replicate) * c.points.size() + s.point),
                   fmt(s.value), fmt(s.normalized)});
  cfg::json per_r = cfg::json::array();
  for (const auto& p : rep.per_r) {
    per.push_back({fmt(p.r), fmt(p.h), fmt(p.scale), fmt(p.median_abs), std::to_string(p.samples)});
    per_r.push_back({{"r", p.r}, {"h", p.h}, {"scale", p.scale}, {"median_abs", p.median_abs}, {"samples", p.samples}});
  }
  out.csv("rates.csv", {"r", "replicate", "value", "normalized_value"}, raw);
  out.csv("scale_vs_r.csv", {"r", "h", "scale", "median_abs", "samples"}, per);
  cfg::json rj = {{"subcommand", "flux-scan"},
                  {"mode", to_string(rep.mode)},
                  {"regime", regime_json(rep.regime)},
                  {"statistic", rep.statistic},
                  {"predicted_slope", rep.predicted_slope},
                  {"slope", rep.fit.slope},
                  {"slope_ci95", {rep.fit.ci_lo, rep.fit.ci_hi}},
                  {"intercept", rep.fit.intercept},
                  {"tolerance", rep.tolerance},
                  {"per_r", per_r},
                  {"pass", rep.pass}};
  if (rep.pathwise_median_rel_error) {
    rj["pathwise_median_rel_error"] = *rep.pathwise_median_rel_error;
    rj["pathwise_count"] = rep.pathwise_count;
  }
  out.report(rj);
  return rep.pass ? kPass : kVerdictFailure;
}

inline int cmd_limit_check(const cfg::json& j, const Options& o, const Output& out) {
  ExperimentConfig c = cfg::parse_experiment(j, need_seed(o));
  c.threads = o.threads;
  const cfg::json& l = section(j, "limit_check");
  std::vector<double> zs;
  if (cfg::has(l, "z")) {
    zs = cfg::numbers(l.at("z"), "limit_check.z");
  } else {
    const double lo = cfg::number(l, "z_min", "limit_check", -3.0);
    const double hi = cfg::number(l, "z_max", "limit_check", 3.0);
    const auto n = cfg::integer(l, "z_count", "limit_check", 61);
    if (n < 2 || !(hi > lo)) cfg::bad("limit_check", "need z_count >= 2 and z_max > z_min");
    for (std::int64_t i = 0; i < n; ++i) zs.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  const double var_tol = cfg::number(l, "variance_tolerance", "limit_check", 0.1);
  const LimitReport rep = limit_distribution_test(c, zs);
  std::vector<std::vector<std::string>> rows, samples;
  for (const auto& r : rep.rows)
    rows.push_back({fmt(r.z), fmt(r.empirical.real()), fmt(r.empirical.imag()), fmt(r.oracle.real()),
                    fmt(r.oracle.imag())});
  for (std::size_t m = 0; m < rep.normalized.size(); ++m)
    samples.push_back({std::to_string(m), fmt(rep.normalized[m])});
  out.csv("cf.csv", {"z", "cf_emp_re", "cf_emp_im", "cf_oracle_re", "cf_oracle_im"}, rows);
  out.csv("normalized_samples.csv", {"replicate", "normalized_value"}, samples);
  bool pass = rep.pass;
  cfg::json rj = {{"subcommand", "limit-check"},
                  {"regime", regime_json(rep.regime)},
                  {"r", rep.r},
                  {"normalizer", rep.normalizer},
                  {"sup_cf_distance", rep.sup_distance},
                  {"threshold", rep.threshold},
                  {"cf_pass", rep.pass},
                  {"sample_variance", rep.sample_variance}};
  if (std::isfinite(rep.oracle_variance)) {
    const double rel = std::abs(rep.sample_variance - rep.oracle_variance) / rep.oracle_variance;
    rj["oracle_variance"] = rep.oracle_variance;
    rj["variance_relative_error"] = rel;
    rj["variance_pass"] = rel < var_tol;
    pass = pass && rel < var_tol;
  }
  rj["pass"] = pass;
  out.report(rj);
  return pass ? kPass : kVerdictFailure;
}

inline int cmd_model_demo(const cfg::json& j, const Options& o, const Output& out) {
  ExperimentConfig c = cfg::parse_experiment(j, need_seed(o));
  c.threads = o.threads;
  const cfg::json& d = cfg::need(j, "model_demo", "");
  const std::string test = cfg::string(d, "test", "model_demo");
  if (test == "incompressibility" || test == "irrotationality") {
    const double thr = cfg::number(d, "threshold", "model_demo", 0.05);
    const LineMode m = test == "incompressibility" ? LineMode::flux : LineMode::circulation;
    const VanishingReport rep = vanishing_test(c, m, thr);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < rep.r.size(); ++i)
      rows.push_back({fmt(rep.r[i]), fmt(rep.median_abs_vanishing[i]), fmt(rep.median_abs_other[i])});
    out.csv("vanishing.csv", {"r", "median_abs_vanishing_normalized", "median_abs_other_normalized"}, rows);
    cfg::json rj = {{"subcommand", "model-demo"},
                    {"test", test},
                    {"vanishing_functional", to_string(rep.vanishing)},
                    {"reference_scale", rep.reference_scale},
                    {"reference_kind", rep.reference_kind},
                    {"ratio", rep.ratio},
                    {"threshold", rep.threshold},
                    {"decreasing", rep.decreasing},
                    {"pass", rep.pass}};
    if (rep.limit_match_median_rel_error) rj["limit_match_median_rel_error"] = *rep.limit_match_median_rel_error;
    out.report(rj);
    return rep.pass ? kPass : kVerdictFailure;
  }
  if (test == "isotropy") {
    IsotropyConfig ic;
    ic.base = c;
    ic.theta = cfg::number(d, "theta", "model_demo", ic.theta);
    if (cfg::has(d, "p")) ic.p = cfg::point(d.at("p"), "model_demo.p");
    if (cfg::has(d, "p0")) ic.p0 = cfg::point(d.at("p0"), "model_demo.p0");
    ic.h = cfg::number(d, "h", "model_demo", ic.h);
    ic.allow_non_isotropic = cfg::boolean(d, "allow_non_isotropic", "model_demo", false);
    ic.z_threshold = cfg::number(d, "z_threshold", "model_demo", ic.z_threshold);
    const IsotropyReport rep = cfg::attributed("model_demo", [&] { return isotropy_test(ic); });
    std::vector<std::vector<std::string>> rows;
    cfg::json stats = cfg::json::array();
    for (const auto& s : rep.stats) {
      rows.push_back({s.name, fmt(s.a), fmt(s.b), fmt(s.z)});
      stats.push_back({{"name", s.name}, {"original", s.a}, {"rotated", s.b}, {"z", num(s.z)}});
    }
    out.csv("isotropy.csv", {"statistic", "original", "rotated", "z"}, rows);
    out.report({{"subcommand", "model-demo"},
                {"test", test},
                {"theta", ic.theta},
                {"stats", stats},
                {"max_abs_z", num(rep.max_abs_z)},
                {"z_threshold", ic.z_threshold},
                {"pass", rep.pass}});
    return rep.pass ? kPass : kVerdictFailure;
  }
  cfg::bad("model_demo.test", "unknown test '" + test + "' (incompressibility, irrotationality, isotropy)");
}

inline int cmd_audit(const cfg::json& j, const Options& o, const Output& out) {
  ExperimentConfig c = cfg::parse_experiment(j, need_seed(o));
  c.threads = o.threads;
  const cfg::json& a = section(j, "audit");
  const double res_tol = cfg::number(a, "residual_tolerance", "audit", 1e-10);
  const double int_tol = cfg::number(a, "interior_tolerance", "audit", 0.02);
  const AuditReport rep = decomposition_audit(c, res_tol, int_tol);
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : rep.rows)
    rows.push_back({fmt(r.r), fmt(r.max_residual), fmt(r.median_interior_rel_error),
                    fmt(r.median_abs_boundary_over_r2), std::to_string(r.sigma_nonzero)});
  out.csv("audit.csv",
          {"r", "max_residual", "median_interior_rel_error", "median_abs_boundary_over_r2", "sigma_nonzero"}, rows);
  out.report({{"subcommand", "decomposition-audit"},
              {"max_residual", rep.max_residual},
              {"residual_tolerance", res_tol},
              {"final_interior_rel_error", rep.rows.back().median_interior_rel_error},
              {"interior_tolerance", int_tol},
              {"pass", rep.pass}});
  return rep.pass ? kPass : kVerdictFailure;
}

// ---------------------------------------------------------------------------

inline std::string iso_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline int dispatch(const Options& o, std::ostream& log) {
  const cfg::json j = load_config(o.config_path);
  const bool stochastic = o.subcommand != "geometry";
  std::optional<std::uint64_t> seed;
  if (stochastic) seed = need_seed(o);
  const Output out(o.out_dir, cfg::hex(cfg::config_hash(j, seed)));
  const auto t0 = std::chrono::steady_clock::now();
  int code = kPass;
  if (o.subcommand == "geometry") code = cmd_geometry(j, out);
  else if (o.subcommand == "simulate") code = cmd_simulate(j, o, out);
  else if (o.subcommand == "flux-scan") code = cmd_flux_scan(j, o, out);
  else if (o.subcommand == "limit-check") code = cmd_limit_check(j, o, out);
  else if (o.subcommand == "model-demo") code = cmd_model_demo(j, o, out);
  else if (o.subcommand == "decomposition-audit") code = cmd_audit(j, o, out);
  const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  cfg::json meta = {{"subcommand", o.subcommand},
                    {"config_hash", out.hash()},
                    {"version", version_string()},
                    {"timestamp_utc", iso_now()},
                    {"runtime_s", runtime},
                    {"threads", resolve_threads(o.threads)},
                    {"exit_code", code}};
  out.write("metadata.json", meta.dump(2) + "\n");
  log << o.subcommand << ": " << (code == kPass ? "PASS" : "FAIL") << " (config_hash " << out.hash() << ", "
      << (out.dir() / "report.json").string() << ")\n";
  return code;
}

inline int run(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Flux and circulation of ambit fields: simulation and asymptotics laboratory", "ambit"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1, 1);
  Options o;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sc, bool stochastic) {
    sc->add_option("-c,--config", o.config_path, "JSON configuration file")->required();
    sc->add_option("-o,--out", o.out_dir, "output directory (created if absent)");
    if (stochastic) {
      sc->add_option("--seed", seed, "master seed (required)");
      sc->add_option("--threads", o.threads, "worker threads (0 = all cores; AMBIT_THREADS overrides)");
    }
  };
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"geometry", "ambit-set diagnostics: reach, H1, Minkowski content, parallel areas"},
      {"simulate", "per-replicate flux or circulation values at one radius"},
      {"flux-scan", "log-log slope of the flux scale statistic against r"},
      {"limit-check", "characteristic-function distance to the limit law"},
      {"model-demo", "incompressibility, irrotationality or isotropy battery"},
      {"decomposition-audit", "interior/boundary decomposition residuals on atomic bases"}};
  for (const auto& [name, help] : subs) {
    CLI::App* sc = app.add_subcommand(name, help);
    add_common(sc, name != "geometry");
    if (name == "simulate") {
      sc->add_option("--dump", o.dump_path, "write the replicate-0 cell grid to this binary file");
      sc->add_option("--replay", o.replay_path, "evaluate on a grid read from this binary file");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, log, err);
    return rc == 0 ? kPass : kConfigError;
  }
  for (const auto* sc : app.get_subcommands()) {
    o.subcommand = sc->get_name();
    if (const auto* opt = sc->get_option_no_throw("--seed"); opt != nullptr && opt->count() > 0) o.seed = seed;
  }
  try {
    return dispatch(o, log);
  } catch (const NumericalError& e) {
    err << e.what() << "\n";
    return kNumericalError;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::numerical) {
      err << e.what() << "\n";
      return kNumericalError;
    }
    err << e.what() << "\n";
    return kConfigError;
  } catch (const cfg::json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumericalError;
  }
}

}  // namespace ambit::cli
