#pragma once

namespace qlvib::units {

// CODATA 2018 exact / recommended values, SI units.
namespace codata {
inline constexpr double hbar = 1.054571817e-34;                // J s
inline constexpr double electron_volt = 1.602176634e-19;       // J
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double angstrom = 1.0e-10;                    // m
}  // namespace codata

namespace detail {
constexpr double sqrt_newton(double x) {
  if (x <= 0.0) return 0.0;
  double r = x > 1.0 ? x : 1.0;
  for (int it = 0; it < 512; ++it) {
    const double next = 0.5 * (r + x / r);
    if (next == r) break;
    r = next;
  }
  return r;
}
}  // namespace detail

/// hbar * sqrt(1 eV / (Å² amu)) expressed in meV. Multiplying sqrt(λ) of a
/// dynamical matrix in eV Å⁻² amu⁻¹ by this gives the phonon energy in meV.
inline constexpr double kMeVPerSqrtDynUnit =
    codata::hbar *
    detail::sqrt_newton(codata::electron_volt /
                        (codata::angstrom * codata::angstrom * codata::atomic_mass_unit)) /
    codata::electron_volt * 1.0e3;

static_assert(kMeVPerSqrtDynUnit > 64.6 && kMeVPerSqrtDynUnit < 64.7);

}  // namespace qlvib::units
