// Fits the force-model presets: k_stretch from the pristine top phonon of the
// N=3 cell, then the excited Si scale so the N=3 a2u resonance sits a fixed
// factor above the ground one. Prints the constants for presets.cpp.
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdio>
#include <memory>

#include "qlvib/analysis.hpp"
#include "qlvib/crystal.hpp"
#include "qlvib/embed.hpp"
#include "qlvib/force_model.hpp"
#include "qlvib/modes.hpp"
#include "qlvib/symmetry.hpp"

namespace {

constexpr double kTargetTopPhonon = 167.0;  // meV
constexpr double kExcitedA2uFactor = 1.25;

double top_phonon(double k_stretch) {
  auto cell = std::make_shared<const qlvib::Supercell>(qlvib::build_diamond_supercell(3));
  qlvib::ForceModelParams p{k_stretch, qlvib::kBendToStretchRatio * k_stretch, 1.0,
                            qlvib::ElectronicState::Ground};
  auto modes = qlvib::solve_modes(qlvib::model_force_constants(cell, p),
                                  qlvib::MassTable::from_cell(*cell));
  return modes.frequencies.maxCoeff();
}

double a2u_resonance(double k_stretch, double scale) {
  auto cell = std::make_shared<const qlvib::Supercell>(
      qlvib::make_siv_defect(qlvib::build_diamond_supercell(3)));
  qlvib::ForceModelParams p{k_stretch, qlvib::kBendToStretchRatio * k_stretch, scale,
                            qlvib::ElectronicState::Ground};
  auto fc = qlvib::model_force_constants(cell, p);
  auto labeled = qlvib::solve_symmetrized(fc, qlvib::MassTable::from_cell(*cell),
                                          qlvib::build_d3d_ops(*cell));
  auto res = qlvib::resonance(qlvib::describe_modes(labeled), qlvib::Irrep::A2u);
  if (!res.found()) return std::nan("");
  return res.omega;
}

}  // namespace

int main() {
  // Frequencies scale as sqrt(k) at a fixed bend/stretch ratio.
  const double k0 = 25.0;
  double k = k0 * std::pow(kTargetTopPhonon / top_phonon(k0), 2);
  k = std::round(k * 1e6) / 1e6;
  std::printf("k_stretch = %.6f eV/A^2 (top phonon %.6f meV)\n", k, top_phonon(k));

  const double ground_scale = qlvib::ForceModelParams::ground().defect_scale;
  const double target = kExcitedA2uFactor * a2u_resonance(k, ground_scale);
  auto f = [&](double s) { return a2u_resonance(k, s) - target; };
  std::uintmax_t iters = 40;
  auto [lo, hi] = boost::math::tools::toms748_solve(
      f, ground_scale, 4.0 * ground_scale, boost::math::tools::eps_tolerance<double>(20), iters);
  const double scale = 0.5 * (lo + hi);
  std::printf("excited defect_scale = %.6f (a2u %.6f meV, target %.6f meV, %ju iterations)\n",
              scale, a2u_resonance(k, scale), target, iters);
  return 0;
}
