#pragma once
// Realizations of a Levy basis on a window and evaluation of the ambit field
//   X(p) = int_{R+p} F(p - q) L(dq)
// and of its volatility-modulated version with V(q) L(dq).

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "ambit_geometry.hpp"
#include "kernels.hpp"
#include "levy_basis.hpp"
#include "quadrature2d.hpp"
#include "rng.hpp"

namespace ambit {

struct Window {
  Vec2 lo{};
  Vec2 hi{};
  double area() const { return (hi.x - lo.x) * (hi.y - lo.y); }
  bool covers(Vec2 a, Vec2 b) const { return a.x >= lo.x && a.y >= lo.y && b.x <= hi.x && b.y <= hi.y; }
};

// Window holding R + p and the circles of radius r_max around every p, with
// the default margin max|R| + r_max + 5h.
inline Window make_window(const AmbitSet& set, const std::vector<Vec2>& points, double r_max, double h) {
  require(!points.empty(), ErrorKind::config, "at least one evaluation point is needed");
  const double m = set.max_radius() + r_max + 5.0 * h;
  Window w{{1e300, 1e300}, {-1e300, -1e300}};
  for (const auto& p : points) {
    w.lo = {std::min(w.lo.x, p.x - m), std::min(w.lo.y, p.y - m)};
    w.hi = {std::max(w.hi.x, p.x + m), std::max(w.hi.y, p.y + m)};
  }
  return w;
}

// Hash of a triplet, written into dumps and reports.
inline std::uint64_t triplet_hash(const CharacteristicTriplet& t) {
  std::string s = "g=" + fmt_double(t.gamma) + ";b=" + fmt_double(t.b) + ";";
  std::visit(
      [&s](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NoJumps>) {
          s += "none";
        } else if constexpr (std::is_same_v<T, StableDensity>) {
          s += "stable:" + fmt_double(m.K_plus) + "," + fmt_double(m.K_minus) + "," + fmt_double(m.beta);
        } else if constexpr (std::is_same_v<T, CompoundPoisson>) {
          s += "cp:" + fmt_double(m.rate) + ":";
          std::visit(
              [&s](const auto& j) {
                using J = std::decay_t<decltype(j)>;
                if constexpr (std::is_same_v<J, DiscreteJumps>) {
                  s += "discrete";
                  for (std::size_t i = 0; i < j.values.size(); ++i)
                    s += "," + fmt_double(j.values[i]) + "/" + fmt_double(j.weights[i]);
                } else if constexpr (std::is_same_v<J, NormalJumps>) {
                  s += "normal," + fmt_double(j.mean) + "," + fmt_double(j.sd);
                } else {
                  s += "exp," + fmt_double(j.rate);
                }
              },
              m.jumps);
        } else {
          s += "gh:" + fmt_double(m.lambda) + "," + fmt_double(m.alpha) + "," + fmt_double(m.theta) + "," +
               fmt_double(m.delta);
        }
      },
      t.nu);
  return fnv1a(s);
}

// ---------------------------------------------------------------------------
// Grid realization. Cells live on the global lattice with centres
// ((i + 1/2) h, (j + 1/2) h); each cell value is a pure function of
// (seed, replicate, i, j), so unmaterialised grids are sampled lazily and
// agree with materialised ones cell by cell.

class GridRealization {
 public:
  GridRealization(CharacteristicTriplet triplet, double h, std::int64_t i0, std::int64_t j0,
                  std::int64_t nx, std::int64_t ny, std::uint64_t seed, std::uint32_t replicate,
                  SamplingOptions opt = {})
      : triplet_(std::move(triplet)), h_(h), i0_(i0), j0_(j0), nx_(nx), ny_(ny), seed_(seed),
        replicate_(replicate), opt_(opt) {
    gaussian_ = std::holds_alternative<NoJumps>(triplet_.nu);
    mean_ = triplet_.gamma * h_ * h_;
    sd_ = triplet_.b * h_;
  }

  static GridRealization over(const CharacteristicTriplet& t, const Window& w, double h, std::uint64_t seed,
                              std::uint32_t replicate, SamplingOptions opt = {}) {
    require(h > 0.0, ErrorKind::domain, "cell size must be positive");
    const auto i0 = static_cast<std::int64_t>(std::floor(w.lo.x / h));
    const auto j0 = static_cast<std::int64_t>(std::floor(w.lo.y / h));
    const auto i1 = static_cast<std::int64_t>(std::ceil(w.hi.x / h));
    const auto j1 = static_cast<std::int64_t>(std::ceil(w.hi.y / h));
    return GridRealization(t, h, i0, j0, std::max<std::int64_t>(1, i1 - i0),
                           std::max<std::int64_t>(1, j1 - j0), seed, replicate, opt);
  }

  double h() const { return h_; }
  std::int64_t i0() const { return i0_; }
  std::int64_t j0() const { return j0_; }
  std::int64_t nx() const { return nx_; }
  std::int64_t ny() const { return ny_; }
  std::uint64_t seed() const { return seed_; }
  std::uint32_t replicate() const { return replicate_; }
  const CharacteristicTriplet& triplet() const { return triplet_; }
  bool materialized() const { return !values_.empty(); }
  const std::vector<double>& values() const { return values_; }

  Window window() const {
    return {{i0_ * h_, j0_ * h_}, {(i0_ + nx_) * h_, (j0_ + ny_) * h_}};
  }

  Vec2 center(std::int64_t i, std::int64_t j) const { return {(i + 0.5) * h_, (j + 0.5) * h_}; }

  bool in_window(std::int64_t i, std::int64_t j) const {
    return i >= i0_ && j >= j0_ && i < i0_ + nx_ && j < j0_ + ny_;
  }

  double draw(std::int64_t i, std::int64_t j) const {
    CounterRng rng(seed_, Purpose::cells, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                   replicate_);
    if (gaussian_) return sd_ > 0.0 ? mean_ + sd_ * rng.normal() : mean_;
    return sample_cell(triplet_, h_ * h_, rng, opt_);
  }

  double value(std::int64_t i, std::int64_t j) const {
    if (!values_.empty()) return values_[static_cast<std::size_t>((j - j0_) * nx_ + (i - i0_))];
    return draw(i, j);
  }

  void materialize() {
    if (!values_.empty()) return;
    values_.resize(static_cast<std::size_t>(nx_ * ny_));
    for (std::int64_t j = 0; j < ny_; ++j)
      for (std::int64_t i = 0; i < nx_; ++i) values_[static_cast<std::size_t>(j * nx_ + i)] = draw(i0_ + i, j0_ + j);
  }

  void set_values(std::vector<double> v) {
    require(v.size() == static_cast<std::size_t>(nx_ * ny_), ErrorKind::config,
            "cell value count does not match the window");
    values_ = std::move(v);
  }

  // Index range of cells whose centres lie in [lo, hi].
  void center_range(Vec2 lo, Vec2 hi, std::int64_t& ia, std::int64_t& ib, std::int64_t& ja,
                    std::int64_t& jb) const {
    ia = static_cast<std::int64_t>(std::ceil(lo.x / h_ - 0.5));
    ib = static_cast<std::int64_t>(std::floor(hi.x / h_ - 0.5));
    ja = static_cast<std::int64_t>(std::ceil(lo.y / h_ - 0.5));
    jb = static_cast<std::int64_t>(std::floor(hi.y / h_ - 0.5));
  }

 private:
  CharacteristicTriplet triplet_;
  double h_;
  std::int64_t i0_, j0_, nx_, ny_;
  std::uint64_t seed_;
  std::uint32_t replicate_;
  SamplingOptions opt_;
  bool gaussian_ = false;
  double mean_ = 0.0, sd_ = 0.0;
  std::vector<double> values_;
};

struct Atom {
  Vec2 q;
  double x;
};

// Exact compound-Poisson realization: L(A) = drift * Leb(A) + sum of atoms in A.
struct AtomRealization {
  Window window;
  std::vector<Atom> atoms;
  double drift = 0.0;
  CharacteristicTriplet triplet;
};

using LevyRealization = std::variant<GridRealization, AtomRealization>;

inline bool atoms_representable(const CharacteristicTriplet& t) {
  return t.b == 0.0 && std::holds_alternative<CompoundPoisson>(t.nu);
}

inline AtomRealization realize_atoms(const CharacteristicTriplet& t, const Window& w, std::uint64_t seed,
                                     std::uint32_t replicate) {
  require(atoms_representable(t), ErrorKind::unsupported,
          "atom realizations need a compound Poisson triplet without Gaussian part");
  const auto& cp = std::get<CompoundPoisson>(t.nu);
  AtomRealization a;
  a.window = w;
  a.triplet = t;
  a.drift = t.gamma - cp.rate * jump_truncated_mean(cp.jumps);
  CounterRng rng(seed, Purpose::atoms, 0, 0, replicate);
  const std::uint64_t n = rng.poisson(cp.rate * w.area());
  a.atoms.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    const Vec2 q{w.lo.x + (w.hi.x - w.lo.x) * rng.uniform(), w.lo.y + (w.hi.y - w.lo.y) * rng.uniform()};
    a.atoms.push_back({q, sample_jump(cp.jumps, rng)});
  }
  return a;
}

// Atoms for compound Poisson triplets (exact), lazily sampled grids otherwise.
inline LevyRealization realize(const CharacteristicTriplet& t, const Window& w, double h, std::uint64_t seed,
                               std::uint32_t replicate, SamplingOptions opt = {}) {
  validate(t);
  if (atoms_representable(t)) return realize_atoms(t, w, seed, replicate);
  if (!opt.allow_gh_approximation && !sampling_is_exact(t))
    fail(ErrorKind::unsupported, "GH basis requires the small-jump approximation to be enabled");
  return GridRealization::over(t, w, h, seed, replicate, opt);
}

// ---------------------------------------------------------------------------
// Volatility fields

struct ConstantVol {
  double c = 1.0;
};
// Piecewise-constant field with iid Uniform[lo, hi] values on a lattice of
// spacing `cell`, drawn from a stream independent of the basis.
struct IndependentGridVol {
  double lo = 0.5;
  double hi = 1.5;
  double cell = 0.05;
};
struct UserLatticeVol {
  Vec2 origin{};
  double h = 0.1;
  int nx = 0, ny = 0;
  std::vector<double> values;  // row-major
};
using VolatilitySpec = std::variant<ConstantVol, IndependentGridVol, UserLatticeVol>;

class Volatility {
 public:
  Volatility() = default;
  Volatility(VolatilitySpec spec, std::uint64_t seed = 0, std::uint32_t replicate = 0)
      : spec_(std::move(spec)), seed_(seed), replicate_(replicate) {
    if (const auto* g = std::get_if<IndependentGridVol>(&spec_))
      require(g->cell > 0.0 && g->lo > 0.0 && g->hi >= g->lo, ErrorKind::config,
              "independent volatility grid needs cell > 0 and 0 < lo <= hi");
    if (const auto* u = std::get_if<UserLatticeVol>(&spec_))
      require(u->values.size() == static_cast<std::size_t>(u->nx) * u->ny && u->h > 0, ErrorKind::config,
              "user volatility lattice has inconsistent size");
  }

  const VolatilitySpec& spec() const { return spec_; }
  bool is_constant() const { return std::holds_alternative<ConstantVol>(spec_); }

  double at(Vec2 q) const {
    return std::visit(
        [&](const auto& v) -> double {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, ConstantVol>) {
            return v.c;
          } else if constexpr (std::is_same_v<T, IndependentGridVol>) {
            const auto i = static_cast<std::int64_t>(std::floor(q.x / v.cell));
            const auto j = static_cast<std::int64_t>(std::floor(q.y / v.cell));
            CounterRng rng(seed_, Purpose::volatility, static_cast<std::uint32_t>(i),
                           static_cast<std::uint32_t>(j), replicate_);
            return v.lo + (v.hi - v.lo) * rng.uniform();
          } else {
            const auto i = static_cast<std::int64_t>(std::floor((q.x - v.origin.x) / v.h));
            const auto j = static_cast<std::int64_t>(std::floor((q.y - v.origin.y) / v.h));
            if (i < 0 || j < 0 || i >= v.nx || j >= v.ny)
              fail(ErrorKind::range, "point outside the user volatility lattice");
            return v.values[static_cast<std::size_t>(j) * v.nx + i];
          }
        },
        spec_);
  }

  double bound() const {
    return std::visit(
        [](const auto& v) -> double {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, ConstantVol>) {
            return std::abs(v.c);
          } else if constexpr (std::is_same_v<T, IndependentGridVol>) {
            return v.hi;
          } else {
            double m = 0.0;
            for (double x : v.values) m = std::max(m, std::abs(x));
            return m;
          }
        },
        spec_);
  }

 private:
  VolatilitySpec spec_ = ConstantVol{};
  std::uint64_t seed_ = 0;
  std::uint32_t replicate_ = 0;
};

// ---------------------------------------------------------------------------
// Field evaluation

// int_{R+p} F(p - q) V(q) dq by quadrature on R.
inline Vec2 drift_field_integral(const Kernel& k, const AmbitSet& set, Vec2 p, const Volatility& vol, int n = 48) {
  const Rule2D rule = set_rule(set, n);
  Vec2 s{0, 0};
  for (const auto& nd : rule) s += k.eval(-nd.q) * (nd.w * vol.at(nd.q + p));
  return s;
}

inline Vec2 eval_field_modulated(const LevyRealization& real, const Kernel& k, const AmbitSet& set,
                                 const Volatility& vol, Vec2 p) {
  const auto [blo, bhi] = set.bounding_box();
  const Vec2 lo = blo + p, hi = bhi + p;
  return std::visit(
      [&](const auto& r) -> Vec2 {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, GridRealization>) {
          std::int64_t ia, ib, ja, jb;
          r.center_range(lo, hi, ia, ib, ja, jb);
          if (!r.in_window(ia, ja) || !r.in_window(ib, jb))
            fail(ErrorKind::range, "R + p leaves the realization window");
          Vec2 s{0, 0};
          for (std::int64_t j = ja; j <= jb; ++j)
            for (std::int64_t i = ia; i <= ib; ++i) {
              const Vec2 c = r.center(i, j);
              if (!set.contains(c - p)) continue;
              const double v = r.value(i, j) * vol.at(c);
              s += k.eval(p - c) * v;
            }
          return s;
        } else {
          if (!r.window.covers(lo, hi)) fail(ErrorKind::range, "R + p leaves the realization window");
          Vec2 s{0, 0};
          for (const auto& a : r.atoms)
            if (set.contains(a.q - p)) s += k.eval(p - a.q) * (a.x * vol.at(a.q));
          if (r.drift != 0.0) s += drift_field_integral(k, set, p, vol) * r.drift;
          return s;
        }
      },
      real);
}

inline Vec2 eval_field(const LevyRealization& real, const Kernel& k, const AmbitSet& set, Vec2 p) {
  return eval_field_modulated(real, k, set, Volatility{}, p);
}

// ---------------------------------------------------------------------------
// Binary dump: little-endian header then row-major cell values.

struct DumpHeader {
  std::int64_t i0 = 0, j0 = 0, nx = 0, ny = 0;
  double h = 0.0;
  std::uint64_t triplet_hash = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::uint32_t replicate = 0;
  std::string version;
};

inline constexpr char kDumpMagic[8] = {'A', 'M', 'B', 'I', 'T', 'D', 'M', 'P'};

inline void write_dump(const std::string& path, const GridRealization& g, std::uint64_t config_hash,
                       const std::string& version) {
  require(g.materialized(), ErrorKind::config, "only materialised grids can be dumped");
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::config, "cannot open dump file " + path);
  auto put = [&os](const auto& v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); };
  os.write(kDumpMagic, 8);
  put(std::uint32_t{1});
  put(g.i0());
  put(g.j0());
  put(g.nx());
  put(g.ny());
  put(g.h());
  put(triplet_hash(g.triplet()));
  put(config_hash);
  put(g.seed());
  put(g.replicate());
  put(static_cast<std::uint32_t>(version.size()));
  os.write(version.data(), static_cast<std::streamsize>(version.size()));
  os.write(reinterpret_cast<const char*>(g.values().data()),
           static_cast<std::streamsize>(g.values().size() * sizeof(double)));
  require(static_cast<bool>(os), ErrorKind::config, "failed writing dump file " + path);
}

inline DumpHeader read_dump_header(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  require(is && std::memcmp(magic, kDumpMagic, 8) == 0, ErrorKind::config, "not an ambit dump file");
  auto get = [&is](auto& v) { is.read(reinterpret_cast<char*>(&v), sizeof v); };
  std::uint32_t fmt = 0;
  get(fmt);
  require(fmt == 1, ErrorKind::config, "unsupported dump format version");
  DumpHeader h;
  get(h.i0);
  get(h.j0);
  get(h.nx);
  get(h.ny);
  get(h.h);
  get(h.triplet_hash);
  get(h.config_hash);
  get(h.seed);
  get(h.replicate);
  std::uint32_t len = 0;
  get(len);
  require(is && len < 4096, ErrorKind::config, "corrupt dump header");
  h.version.resize(len);
  is.read(h.version.data(), len);
  require(static_cast<bool>(is), ErrorKind::config, "corrupt dump header");
  return h;
}

// Reads a dump and checks it was produced under the same triplet.
inline GridRealization read_dump(const std::string& path, const CharacteristicTriplet& t, DumpHeader* out = nullptr) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::config, "cannot open dump file " + path);
  const DumpHeader h = read_dump_header(is);
  require(h.triplet_hash == triplet_hash(t), ErrorKind::config,
          "dump triplet hash does not match the configured triplet");
  GridRealization g(t, h.h, h.i0, h.j0, h.nx, h.ny, h.seed, h.replicate);
  std::vector<double> v(static_cast<std::size_t>(h.nx * h.ny));
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  require(static_cast<bool>(is), ErrorKind::config, "dump payload is truncated");
  g.set_values(std::move(v));
  if (out) *out = h;
  return g;
}

}  // namespace ambit
