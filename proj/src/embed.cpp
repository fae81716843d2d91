#include "qlvib/embed.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "qlvib/error.hpp"

namespace qlvib {

void EmbeddingRule::validate() const {
  if (!(r_defect > 0.0) || !(r_zero > r_defect) || !std::isfinite(r_zero))
    throw ValidationError("embedding rule requires 0 < r_defect < r_zero");
}

namespace {

struct Source {
  const ForceConstants* fc;
  SiteLocator locator;
};

[[noreturn]] void unmatched(int i, int j, const char* which) {
  std::ostringstream msg;
  msg << "splice: target pair (" << i << ", " << j << ") has no counterpart in the " << which
      << " cell";
  throw ValidationError(msg.str());
}

}  // namespace

ForceConstants splice(const ForceConstants& defect_fc, const ForceConstants& bulk_fc,
                      std::shared_ptr<const Supercell> target, const EmbeddingRule& rule) {
  if (!target) throw ValidationError("splice: null target cell");
  rule.validate();
  const Supercell& dcell = defect_fc.cell();
  const Supercell& bcell = bulk_fc.cell();
  const double a = target->lattice().a;
  for (const Supercell* c : {&dcell, &bcell})
    if (std::abs(c->lattice().a - a) > 1.0e-10)
      throw ValidationError("splice: lattice-constant mismatch between source and target cells");
  if (bcell.is_defected()) throw ValidationError("splice: bulk source cell must be pristine");
  for (const Supercell* c : {&dcell, &bcell}) {
    if (c->multiplicity() > target->multiplicity())
      throw ValidationError("splice: source cell larger than target");
    if (rule.r_zero >= c->edge() / 2.0)
      throw ValidationError("splice: r_zero exceeds half the source cell edge");
  }
  const bool defected = target->is_defected();
  if (defected && !dcell.is_defected())
    throw ValidationError("splice: defect source cell carries no defect annotation");

  const int n = static_cast<int>(target->size());
  const SiteLocator dloc(dcell);
  const SiteLocator bloc(bcell);

  std::vector<double> dist_si(target->size(), std::numeric_limits<double>::infinity());
  Eigen::Vector3d si_target = Eigen::Vector3d::Zero();
  Eigen::Vector3d si_source = Eigen::Vector3d::Zero();
  if (defected) {
    const int si = target->defect()->si_index;
    si_target = target->cartesian(si);
    si_source = dcell.cartesian(dcell.defect()->si_index);
    for (int i = 0; i < n; ++i) dist_si[i] = min_image_distance(*target, i, si);
  }

  BlockAssembler asm_(target->size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Eigen::Vector3d dij = target->min_image_vector(i, j);
      if (dij.norm() > rule.r_zero) continue;

      const bool use_defect = defected && std::min(dist_si[i], dist_si[j]) < rule.r_defect;
      // Anchor at the member nearest the Si (ties: i); map anchor, then partner.
      int anchor = i;
      int partner = j;
      Eigen::Vector3d d = dij;
      if (use_defect && dist_si[j] < dist_si[i]) {
        anchor = j;
        partner = i;
        d = -dij;
      }
      const ForceConstants& src = use_defect ? defect_fc : bulk_fc;
      const SiteLocator& loc = use_defect ? dloc : bloc;
      const Supercell& scell = src.cell();
      Eigen::Vector3d anchor_pos;
      if (use_defect) {
        anchor_pos = si_source + target->wrap_displacement(target->cartesian(anchor) - si_target);
      } else {
        anchor_pos = target->cartesian(anchor);
      }
      const auto sa = loc.find(anchor_pos);
      if (!sa) unmatched(i, j, use_defect ? "defect" : "bulk");
      const auto sp = loc.find(scell.cartesian(*sa) + d);
      if (!sp) unmatched(i, j, use_defect ? "defect" : "bulk");
      if (scell.atom(*sa).species != target->atom(anchor).species ||
          scell.atom(*sp).species != target->atom(partner).species)
        unmatched(i, j, use_defect ? "defect" : "bulk");

      const Block* b = src.find(*sa, *sp);
      if (!b) continue;
      // block(anchor, partner) = source(sa, sp); the transpose partner is stored too.
      asm_.set(anchor, partner, *b);
      asm_.set(partner, anchor, src.block(*sp, *sa));
    }
  }
  return enforce_asr(std::move(asm_).finish(std::move(target), rule.r_zero));
}

}  // namespace qlvib
