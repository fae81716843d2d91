#pragma once

#include <memory>

#include "qlvib/crystal.hpp"
#include "qlvib/embed.hpp"
#include "qlvib/force_model.hpp"
#include "qlvib/modes.hpp"
#include "qlvib/symmetry.hpp"

namespace qlvib::test {

inline std::shared_ptr<const Supercell> pristine(int n) {
  return std::make_shared<const Supercell>(build_diamond_supercell(n));
}

inline std::shared_ptr<const Supercell> siv(int n, double si_mass = kSilicon28Mass) {
  return std::make_shared<const Supercell>(make_siv_defect(build_diamond_supercell(n), si_mass));
}

inline ForceConstants bulk_model(std::shared_ptr<const Supercell> cell) {
  return model_force_constants(std::move(cell), ForceModelParams::ground());
}

/// Ground-state spliced SiV force constants on an N cell from N=3 sources.
inline ForceConstants spliced_siv(std::shared_ptr<const Supercell> target,
                                  ForceModelParams params = ForceModelParams::ground()) {
  auto small_defect = siv(3);
  auto small_bulk = pristine(3);
  return splice(model_force_constants(small_defect, params), bulk_model(small_bulk),
                std::move(target));
}

inline int count_if_abs_below(const Eigen::VectorXd& v, double tol) {
  int c = 0;
  for (Eigen::Index k = 0; k < v.size(); ++k) c += std::abs(v[k]) < tol;
  return c;
}

}  // namespace qlvib::test
