#pragma once
// Integrability of a deterministic kernel against a Levy basis:
// int_R Phi0(|F(-q)|) dq < infinity.

#include <optional>
#include <string>

#include "ambit_geometry.hpp"
#include "kernels.hpp"
#include "levy_basis.hpp"
#include "quadrature2d.hpp"

namespace ambit {

struct IntegrabilityReport {
  bool integrable = true;
  double value = 0.0;                     // estimate of the integral (partial sum if divergent)
  std::optional<Vec2> divergence_at;      // location of the blow-up
  std::vector<double> shell_increments;   // dyadic shell contributions near the singularity
  std::string note;
};

// Bounded kernels: plain quadrature at two resolutions. Kernels singular at
// the origin with 0 in the closure of R: dyadic polar shells around 0; the
// integral is declared divergent when the shell contributions stop decaying
// (last five successive ratios >= 0.99).
inline IntegrabilityReport integrability_report(const CharacteristicTriplet& t, const Kernel& k, const AmbitSet& set) {
  validate(t);
  IntegrabilityReport rep;
  auto phi = [&](Vec2 q) { return modular_phi0(t, norm(k.eval(-q))); };
  const bool origin_close = set.contains({0, 0}) || set.boundary_distance({0, 0}) <= set.tol_boundary();
  if (!k.singular_at_origin() || !origin_close) {
    const double a = integrate_rule(set_rule(set, 24), phi);
    const double b = integrate_rule(set_rule(set, 48), phi);
    rep.value = b;
    rep.integrable = std::isfinite(a) && std::isfinite(b);
    rep.note = rep.integrable ? "bounded kernel on a compact set" : "quadrature produced a non-finite value";
    if (!rep.integrable) rep.divergence_at = Vec2{0, 0};
    return rep;
  }
  // Polar rule restricted to R away from the origin, then dyadic shells.
  const double rho0 = 0.25 * set.diameter();
  double outer = 0.0;
  for (const auto& nd : polar_rule({0, 0}, rho0, set.max_radius(), 64, 256))
    if (set.contains(nd.q)) outer += nd.w * phi(nd.q);
  double total = outer;
  double hi = rho0;
  std::vector<double>& inc = rep.shell_increments;
  for (int s = 0; s < 40; ++s) {
    const double lo = 0.5 * hi;
    double v = 0.0;
    for (const auto& nd : polar_rule({0, 0}, lo, hi, 12, 64))
      if (set.contains(nd.q)) v += nd.w * phi(nd.q);
    inc.push_back(v);
    total += v;
    hi = lo;
    if (inc.size() >= 6) {
      bool flat = true;
      for (std::size_t i = inc.size() - 5; i < inc.size(); ++i)
        if (!(inc[i - 1] > 0.0) || inc[i] / inc[i - 1] < 0.99) flat = false;
      if (flat) {
        rep.integrable = false;
        rep.value = total;
        rep.divergence_at = Vec2{0, 0};
        rep.note = "shell contributions do not decay near the kernel singularity at the origin";
        return rep;
      }
      if (v <= 1e-14 * std::abs(total)) break;
    }
  }
  rep.value = total;
  rep.integrable = std::isfinite(total);
  rep.note = "shell contributions decay near the kernel singularity";
  return rep;
}

inline bool integrability_check(const CharacteristicTriplet& t, const Kernel& k, const AmbitSet& set) {
  return integrability_report(t, k, set).integrable;
}

}  // namespace ambit
