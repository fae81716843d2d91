#include <doctest.h>

#include <cmath>
#include <sstream>

#include "qlvib/error.hpp"
#include "qlvib/force_constants.hpp"
#include "qlvib/force_model.hpp"
#include "qlvib/modes.hpp"
#include "support.hpp"

using namespace qlvib;
using qlvib::test::pristine;
using qlvib::test::siv;

TEST_SUITE("forcefield") {
  TEST_CASE("model blocks are symmetric, satisfy the sum rule and stop at the first shell") {
    for (auto cell : {pristine(2), siv(3)}) {
      const auto fc = model_force_constants(cell, ForceModelParams::ground());
      CHECK(fc.symmetry_residual() < 1e-10);
      CHECK(fc.asr_residual() < 1e-8);
      for (int i = 0; i < static_cast<int>(fc.natoms()); ++i) {
        const auto row = fc.row(i);
        const bool is_si = cell->is_defected() && i == cell->defect()->si_index;
        CHECK(row.cols.size() == (is_si ? 7u : 5u));  // self + bonds
        for (int j : row.cols)
          if (j != i) CHECK(min_image_distance(*cell, i, j) < 2.0);
      }
    }
  }

  TEST_CASE("si blocks carry the defect scale") {
    auto cell = siv(3);
    auto p = ForceModelParams::ground();
    auto one = p;
    one.defect_scale = 1.0;
    const auto scaled = model_force_constants(cell, p);
    const auto plain = model_force_constants(cell, one);
    const int si = cell->defect()->si_index;
    for (int j : plain.row(si).cols) {
      if (j == si) continue;
      CHECK((scaled.block(si, j) - p.defect_scale * plain.block(si, j)).cwiseAbs().maxCoeff() < 1e-14);
    }
    CHECK(plain.row(si).cols.size() == 7);  // self + six carbons
  }

  TEST_CASE("defect_scale = 1 matches an unscaled construction") {
    auto cell = siv(3);
    auto p = ForceModelParams::ground();
    p.defect_scale = 1.0;
    const auto fc = model_force_constants(cell, p);
    const int si = cell->defect()->si_index;
    for (int j : fc.row(si).cols) {
      if (j == si) continue;
      const Eigen::Vector3d e = cell->min_image_vector(si, j).normalized();
      const Block k = p.k_stretch * e * e.transpose() +
                      p.k_bend * (Block::Identity() - e * e.transpose());
      CHECK((fc.block(si, j) + k).cwiseAbs().maxCoeff() < 1e-13);
    }
  }

  TEST_CASE("doubling k_stretch with k_bend = 0 scales frequencies by sqrt 2") {
    auto cell = pristine(2);
    ForceModelParams p{20.0, 0.0, 1.0, ElectronicState::Ground};
    auto q = p;
    q.k_stretch *= 2.0;
    const auto masses = MassTable::from_cell(*cell);
    const auto a = solve_modes(model_force_constants(cell, p), masses);
    const auto b = solve_modes(model_force_constants(cell, q), masses);
    for (Eigen::Index k = 0; k < a.frequencies.size(); ++k)
      if (a.frequencies[k] > 1.0)
        CHECK(b.frequencies[k] == doctest::Approx(std::sqrt(2.0) * a.frequencies[k]).epsilon(1e-9));
  }

  TEST_CASE("model is invariant under lattice translations") {
    auto cell = pristine(3);
    const auto fc = model_force_constants(cell, ForceModelParams::ground());
    SiteLocator loc(*cell);
    const Eigen::Vector3d shift(0.5 * 3.544, 0.5 * 3.544, 0.0);  // fcc translation
    for (int i = 0; i < 216; i += 7) {
      const int ti = *loc.find(cell->cartesian(i) + shift);
      for (int j : fc.row(i).cols) {
        const int tj = *loc.find(cell->cartesian(j) + shift);
        CHECK((fc.block(i, j) - fc.block(ti, tj)).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }

  TEST_CASE("params validation") {
    ForceModelParams p{0.0, 1.0, 1.0, ElectronicState::Ground};
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = {1.0, -1.0, 1.0, ElectronicState::Ground};
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = {1.0, 0.0, 0.0, ElectronicState::Ground};
    CHECK_THROWS_AS(p.validate(), ValidationError);
    CHECK_NOTHROW(ForceModelParams::excited().validate());
    CHECK(ForceModelParams::excited().defect_scale > ForceModelParams::ground().defect_scale);
    CHECK(ForceModelParams::ground().k_bend == doctest::Approx(0.1 * ForceModelParams::ground().k_stretch));
  }

  TEST_CASE("enforce_asr is idempotent and zeroes self blocks of an empty matrix") {
    auto cell = siv(3);
    const auto fc = model_force_constants(cell, ForceModelParams::excited());
    const auto again = enforce_asr(fc);
    CHECK(max_block_difference(fc, again) < 1e-12);

    BlockAssembler empty(cell->size());
    for (int i = 0; i < static_cast<int>(cell->size()); ++i) empty.set(i, i, Block::Constant(3.0));
    const auto zeroed = enforce_asr(std::move(empty).finish(cell, 2.0));
    for (int i = 0; i < static_cast<int>(cell->size()); ++i) CHECK(zeroed.block(i, i).isZero(0.0));
  }

  TEST_CASE("asr leaves translations in the null space") {
    auto cell = siv(2);
    const auto fc = model_force_constants(cell, ForceModelParams::ground());
    const auto masses = MassTable::with_silicon(*cell, 29.0);
    const Eigen::MatrixXd d = mass_weight(fc, masses);
    for (int c = 0; c < 3; ++c) {
      Eigen::VectorXd t = Eigen::VectorXd::Zero(d.rows());
      for (std::size_t a = 0; a < masses.size(); ++a) t[3 * a + c] = std::sqrt(masses[a]);
      t.normalize();
      CHECK((d * t).norm() < 1e-8);
    }
  }

  TEST_CASE("text format round trip") {
    auto cell = siv(3);
    const auto fc = model_force_constants(cell, ForceModelParams::ground());
    std::stringstream s;
    write_force_constants(fc, s);
    const auto back = read_force_constants(s, cell);
    CHECK(max_block_difference(fc, back) < 1e-12);
    CHECK(back.cutoff() == fc.cutoff());
    CHECK(back.stored_blocks() == fc.stored_blocks());
  }

  TEST_CASE("asymmetric record is loaded and reported") {
    auto cell = pristine(1);
    const auto fc = model_force_constants(cell, ForceModelParams::ground());
    std::stringstream s;
    write_force_constants(fc, s);
    const int j = fc.row(0).cols[1];
    std::string text = s.str();
    text += std::to_string(j) + " 0 1 2 3 4 5 6 7 8 9\n";
    std::stringstream in(text);
    const auto loaded = read_force_constants(in, cell);
    CHECK(loaded.symmetry_residual() > 0.0);
    CHECK(symmetrize(loaded).symmetry_residual() < 1e-15);
    CHECK(loaded.asr_residual() > 0.0);  // not silently re-enforced
  }

  TEST_CASE("reader rejects malformed input") {
    auto cell = pristine(1);
    auto parse = [&](const std::string& text) {
      std::stringstream in(text);
      return read_force_constants(in, cell);
    };
    const std::string head = "natoms 8\ncutoff_ang 1.8\n";
    CHECK_THROWS_AS(parse(head + "0 8 1 0 0 0 1 0 0 0 1\n"), ValidationError);      // index 8N^3
    CHECK_THROWS_AS(parse("natoms 9\ncutoff_ang 1.8\n"), ValidationError);          // count
    CHECK_THROWS_AS(parse(head + "0 1 1 0 0 0 1 0 0 0\n"), ValidationError);         // short
    CHECK_THROWS_AS(parse(head + "0 1 1 0 0 0 nan 0 0 0 1\n"), ValidationError);     // non-finite
    CHECK_THROWS_AS(parse(head + "0 1 1 0 0 0 1 0 0 0 1\n0 1 1 0 0 0 1 0 0 0 1\n"), ValidationError);
    CHECK_THROWS_AS(parse("cutoff_ang 1.8\n"), ValidationError);
    CHECK_NOTHROW(parse(head + "# comment\n0 1 1 0 0 0 1 0 0 0 1\n"));
    CHECK_THROWS_AS(read_force_constants(std::filesystem::path("/nonexistent/x.fc"), cell), IoError);
  }
}
