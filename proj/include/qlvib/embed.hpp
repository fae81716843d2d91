#pragma once

#include <memory>

#include "qlvib/force_constants.hpp"

namespace qlvib {

/// Two-radius splicing rule. Pairs farther apart than r_zero get no block;
/// pairs with at least one member closer than r_defect to the Si atom take
/// their block from the defect source; all others from the bulk source.
struct EmbeddingRule {
  double r_zero = 4.2;     // Å
  double r_defect = 2.75;  // Å

  void validate() const;
};

/// Builds force constants for `target` from small-cell defect and bulk sets.
/// Each target pair is matched to a source pair by its minimum-image relative
/// vector, anchored at the pair member nearest the Si atom for defect lookups.
/// The acoustic sum rule is re-enforced on the result.
///
/// A pristine target (no defect annotation) draws every block from `bulk_fc`.
ForceConstants splice(const ForceConstants& defect_fc, const ForceConstants& bulk_fc,
                      std::shared_ptr<const Supercell> target, const EmbeddingRule& rule = {});

}  // namespace qlvib
