#include "qlvib/force_model.hpp"

#include <cmath>

#include "qlvib/error.hpp"

namespace qlvib {

std::string state_name(ElectronicState s) {
  return s == ElectronicState::Ground ? "ground" : "excited";
}

ElectronicState state_from_name(const std::string& name) {
  if (name == "ground") return ElectronicState::Ground;
  if (name == "excited") return ElectronicState::Excited;
  throw ValidationError("unknown electronic state '" + name + "'");
}

void ForceModelParams::validate() const {
  if (!(k_stretch > 0.0) || !std::isfinite(k_stretch))
    throw ValidationError("k_stretch must be positive");
  if (!(k_bend >= 0.0) || !std::isfinite(k_bend)) throw ValidationError("k_bend must be >= 0");
  if (!(defect_scale > 0.0) || !std::isfinite(defect_scale))
    throw ValidationError("defect_scale must be positive");
}

ForceModelParams ForceModelParams::preset(ElectronicState s) {
  return s == ElectronicState::Ground ? ground() : excited();
}

ForceConstants model_force_constants(std::shared_ptr<const Supercell> cell,
                                     const ForceModelParams& params) {
  if (!cell) throw ValidationError("model_force_constants: null cell");
  params.validate();
  const double cutoff = cell->is_defected() ? kSiliconBondCutoff : kCarbonBondCutoff;

  const int n = static_cast<int>(cell->size());
  const int si = cell->is_defected() ? cell->defect()->si_index : -1;
  const double edge = cell->edge();
  BlockAssembler asm_(cell->size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const bool touches_si = (i == si || j == si);
      const double rmax = touches_si ? kSiliconBondCutoff : kCarbonBondCutoff;
      // Snapped to a fixed grid so equivalent bonds in different cells give identical blocks.
      const Eigen::Vector3d d =
          cell->min_image_vector(i, j).unaryExpr([](double x) { return std::round(x * 1e9) / 1e9; });
      const double r = d.norm();
      if (r >= rmax) continue;
      for (int sx = -1; sx <= 1; ++sx)
        for (int sy = -1; sy <= 1; ++sy)
          for (int sz = -1; sz <= 1; ++sz) {
            if (sx == 0 && sy == 0 && sz == 0) continue;
            if ((d + edge * Eigen::Vector3d(sx, sy, sz)).norm() < rmax)
              throw ValidationError("model_force_constants: bond has several periodic images");
          }
      const Eigen::Vector3d e = d / r;
      const Block para = e * e.transpose();
      Block k = params.k_stretch * para + params.k_bend * (Block::Identity() - para);
      if (touches_si) k *= params.defect_scale;
      asm_.set_pair(i, j, -k);
    }
  }
  return enforce_asr(std::move(asm_).finish(std::move(cell), cutoff));
}

}  // namespace qlvib
