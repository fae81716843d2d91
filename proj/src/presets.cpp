#include "qlvib/force_model.hpp"

namespace qlvib {

// Values written by `qlvib-calibrate`; rerun it after any change to the force model.
namespace {
constexpr double kCalibratedStretch = 25.019083;  // eV/Å², pristine top phonon 167 meV
constexpr double kGroundDefectScale = 0.08;
constexpr double kExcitedDefectScale = 0.138133;  // N=3 a2u resonance 1.25× ground
}  // namespace

ForceModelParams ForceModelParams::ground() {
  return {kCalibratedStretch, kBendToStretchRatio * kCalibratedStretch, kGroundDefectScale,
          ElectronicState::Ground};
}

ForceModelParams ForceModelParams::excited() {
  return {kCalibratedStretch, kBendToStretchRatio * kCalibratedStretch, kExcitedDefectScale,
          ElectronicState::Excited};
}

}  // namespace qlvib
