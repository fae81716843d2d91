#include <doctest.h>

#include "qlvib/analysis.hpp"
#include "qlvib/embed.hpp"
#include "qlvib/error.hpp"
#include "support.hpp"

using namespace qlvib;
using qlvib::test::pristine;
using qlvib::test::siv;

TEST_SUITE("embed") {
  TEST_CASE("rule validation") {
    CHECK_NOTHROW(EmbeddingRule{}.validate());
    CHECK_THROWS_AS((EmbeddingRule{2.0, 2.75}.validate()), ValidationError);
    CHECK_THROWS_AS((EmbeddingRule{4.2, 0.0}.validate()), ValidationError);
    CHECK_THROWS_AS((EmbeddingRule{4.2, 4.2}.validate()), ValidationError);
  }

  TEST_CASE("bulk-as-defect splice reproduces the direct bulk spectrum") {
    auto small = pristine(3);
    auto target = pristine(4);
    const auto bulk = test::bulk_model(small);
    const auto spliced = splice(bulk, bulk, target);
    const auto direct = test::bulk_model(target);
    CHECK(max_block_difference(spliced, direct) == 0.0);
    const auto masses = MassTable::from_cell(*target);
    const auto a = solve_modes(spliced, masses);
    const auto b = solve_modes(direct, masses);
    CHECK((a.frequencies - b.frequencies).cwiseAbs().maxCoeff() < 1e-6);
  }

  TEST_CASE("r_zero at the model cutoff reproduces the model on pristine targets") {
    auto small = pristine(3);
    auto target = pristine(5);
    const auto bulk = test::bulk_model(small);
    const auto spliced = splice(bulk, bulk, target, EmbeddingRule{kCarbonBondCutoff, 1.0});
    CHECK(max_block_difference(spliced, test::bulk_model(target)) == 0.0);
  }

  TEST_CASE("self embedding returns the defect matrix up to the sum rule") {
    auto small = siv(3);
    const auto defect = model_force_constants(small, ForceModelParams::ground());
    const auto spliced = splice(defect, test::bulk_model(pristine(3)), small);
    CHECK(max_block_difference(spliced, defect) == 0.0);
  }

  TEST_CASE("spliced matrix is symmetric, sum-rule clean, and bulk-like away from Si") {
    auto target = siv(4);
    const auto fc = test::spliced_siv(target);
    CHECK(fc.symmetry_residual() < 1e-12);
    CHECK(fc.asr_residual() < 1e-8);
    const auto direct = model_force_constants(target, ForceModelParams::ground());
    const int si = target->defect()->si_index;
    for (int i = 0; i < static_cast<int>(target->size()); ++i) {
      for (int j : fc.row(i).cols) {
        if (j == i || std::min(min_image_distance(*target, i, si), min_image_distance(*target, j, si)) < 2.75)
          continue;
        CHECK((fc.block(i, j) - direct.block(i, j)).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
    for (int i = 0; i < static_cast<int>(target->size()); i += 11)
      for (int j : fc.row(i).cols) CHECK(min_image_distance(*target, i, j) <= 4.2);
  }

  TEST_CASE("a2u resonance appears after embedding into N=5") {
    auto target = siv(5);
    const auto fc = test::spliced_siv(target);
    const auto group = build_d3d_ops(*target);
    const auto labeled = solve_symmetrized(fc, MassTable::from_cell(*target), group);
    const auto d = describe_modes(labeled);
    const auto peak = most_localized(d, Irrep::A2u);
    REQUIRE(peak);
    CHECK(peak->omega >= 20.0);
    CHECK(peak->omega <= 70.0);
    CHECK(peak->beta > 10.0 * channel_median_beta(d, Irrep::A2u));
  }

  TEST_CASE("precondition failures") {
    auto small_d = siv(3);
    auto small_b = pristine(3);
    const auto d = model_force_constants(small_d, ForceModelParams::ground());
    const auto b = test::bulk_model(small_b);
    CHECK_THROWS_AS(splice(d, b, siv(2)), ValidationError);            // target smaller
    CHECK_THROWS_AS(splice(d, d, siv(4)), ValidationError);            // defected bulk
    CHECK_THROWS_AS(splice(b, b, siv(4)), ValidationError);            // no defect source
    auto other = std::make_shared<const Supercell>(make_siv_defect(build_diamond_supercell(4, 3.6)));
    CHECK_THROWS_AS(splice(d, b, other), ValidationError);             // lattice constant
    CHECK_THROWS_AS(splice(d, b, siv(4), EmbeddingRule{6.0, 2.75}), ValidationError);  // r_zero > L/2
  }
}
