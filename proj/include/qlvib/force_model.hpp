#pragma once

#include <memory>
#include <string>

#include "qlvib/force_constants.hpp"

namespace qlvib {

enum class ElectronicState { Ground, Excited };

std::string state_name(ElectronicState s);
ElectronicState state_from_name(const std::string& name);

/// Nearest-neighbor valence model. Each bond with unit vector e contributes
/// K = s·(k_stretch·eeᵀ + k_bend·(I − eeᵀ)), where s = defect_scale for bonds
/// touching the Si atom and 1 otherwise. Φ_ij = −K for the bonded pair;
/// self blocks follow from the acoustic sum rule.
struct ForceModelParams {
  double k_stretch = 0.0;     // eV/Å²
  double k_bend = 0.0;        // eV/Å²
  double defect_scale = 1.0;  // multiplies every Si term
  ElectronicState state = ElectronicState::Ground;

  void validate() const;

  /// Calibrated presets, see presets.cpp.
  static ForceModelParams ground();
  static ForceModelParams excited();
  static ForceModelParams preset(ElectronicState s);
};

inline constexpr double kCarbonBondCutoff = 1.8;   // Å, C–C first shell (1.535 Å)
inline constexpr double kSiliconBondCutoff = 2.0;  // Å, split-vacancy Si–C (1.931 Å unrelaxed)
inline constexpr double kBendToStretchRatio = 0.1;

ForceConstants model_force_constants(std::shared_ptr<const Supercell> cell,
                                     const ForceModelParams& params);

}  // namespace qlvib
