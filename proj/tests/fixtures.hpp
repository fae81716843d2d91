#pragma once

#include <array>
#include <vector>

#include "qlvib/analysis.hpp"

namespace qlvib::test {

// Synthetic a2u channel of the 999-atom cell, digitized to two decimals: five
// contributing modes per isotope whose most-localized member sits at the
// published single-mode energies, plus two modes the window/threshold must drop.
struct IsotopeFixture {
  double mass;
  std::vector<ModeDescriptor> modes;
};

inline std::vector<ModeDescriptor> fixture_channel(std::array<double, 5> omega,
                                                   std::array<double, 5> beta) {
  constexpr std::size_t kAtoms = 999;
  std::vector<ModeDescriptor> out;
  std::size_t index = 0;
  auto push = [&](double w, double b, Irrep r) {
    out.push_back({index++, w, r, static_cast<double>(kAtoms) / b, b});
  };
  push(30.10, 2.10, Irrep::A2u);  // below threshold
  for (std::size_t k = 0; k < 5; ++k) push(omega[k], beta[k], Irrep::A2u);
  push(52.00, 40.0, Irrep::Eu);   // other channel
  push(81.30, 60.0, Irrep::A2u);  // outside the window
  return out;
}

inline std::vector<IsotopeFixture> table_n5_fixture() {
  return {
      {28.0, fixture_channel({39.60, 41.90, 43.70, 46.40, 48.95}, {3.85, 8.0, 12.0, 20.0, 6.0})},
      {29.0, fixture_channel({37.40, 41.05, 42.80, 46.11, 48.30}, {5.32, 8.0, 12.0, 20.0, 6.0})},
      {30.0, fixture_channel({36.85, 40.50, 41.95, 45.88, 47.10}, {9.14, 8.0, 12.0, 20.0, 6.0})},
  };
}

// Published per-cell resonance energies, N = 3..8.
inline constexpr std::array<int, 6> kTableCells{3, 4, 5, 6, 7, 8};
inline constexpr std::array<std::array<double, 6>, 3> kA2uColumns{{
    {42.28, 42.90, 44.81, 43.34, 43.04, 43.59},
    {41.66, 42.29, 43.90, 42.79, 41.85, 42.98},
    {41.07, 41.72, 42.88, 42.27, 40.94, 42.33},
}};
inline constexpr std::array<std::array<double, 6>, 3> kEuColumns{{
    {59.63, 61.15, 58.22, 61.14, 59.47, 60.71},
    {58.45, 60.49, 56.81, 60.12, 58.05, 59.06},
    {57.34, 59.84, 55.99, 58.84, 56.44, 58.18},
}};
inline constexpr std::array<double, 3> kA2uAverages{43.41, 42.64, 41.92};
inline constexpr std::array<double, 3> kEuAverages{60.11, 58.82, 57.72};

}  // namespace qlvib::test
