#include <doctest.h>

#include <map>
#include <numeric>
#include <set>

#include "qlvib/error.hpp"
#include "qlvib/symmetry.hpp"
#include "qlvib/units.hpp"
#include "support.hpp"

using namespace qlvib;
using qlvib::test::pristine;
using qlvib::test::siv;

namespace {

std::vector<int> cycle_lengths(const std::vector<int>& perm) {
  std::vector<int> out;
  std::vector<char> seen(perm.size(), 0);
  for (std::size_t s = 0; s < perm.size(); ++s) {
    if (seen[s]) continue;
    int len = 0;
    for (std::size_t a = s; !seen[a]; a = static_cast<std::size_t>(perm[a])) {
      seen[a] = 1;
      ++len;
    }
    out.push_back(len);
  }
  return out;
}

}  // namespace

TEST_SUITE("symmetry") {
  TEST_CASE("character table rows are orthogonal with weight of class sizes") {
    const std::array<OpClass, 6> classes{OpClass::E, OpClass::C3, OpClass::C2,
                                         OpClass::Inversion, OpClass::S6, OpClass::SigmaD};
    const std::array<double, 6> sizes{1, 2, 3, 1, 2, 3};
    for (Irrep a : kAllIrreps)
      for (Irrep b : kAllIrreps) {
        double s = 0;
        for (int c = 0; c < 6; ++c) s += sizes[c] * character(a, classes[c]) * character(b, classes[c]);
        CHECK(s == doctest::Approx(a == b ? 12.0 : 0.0));
      }
    for (Irrep r : kAllIrreps) {
      CHECK(irrep_from_name(irrep_name(r)) == r);
      CHECK(degeneracy(r) == ((r == Irrep::Eg || r == Irrep::Eu) ? 2 : 1));
    }
  }

  TEST_CASE("operations of the N=3 SiV cell") {
    auto cell = siv(3);
    const auto g = build_d3d_ops(*cell);
    REQUIRE(g.ops.size() == 12);
    const int si = cell->defect()->si_index;
    for (const auto& op : g.ops) {
      CHECK((op.rotation.transpose() * op.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-10);
      CHECK(op.perm[si] == si);
      std::vector<int> sorted = op.perm;
      std::sort(sorted.begin(), sorted.end());
      std::vector<int> iota(sorted.size());
      std::iota(iota.begin(), iota.end(), 0);
      CHECK(sorted == iota);
      for (std::size_t a = 0; a < op.perm.size(); ++a)
        CHECK(cell->atom(op.perm[a]).species == cell->atom(static_cast<int>(a)).species);
    }
    for (int len : cycle_lengths(g.op("C3").perm)) CHECK((len == 1 || len == 3));
    const auto& inv = g.op("i").perm;
    for (std::size_t a = 0; a < inv.size(); ++a) {
      CHECK(inv[static_cast<std::size_t>(inv[a])] == static_cast<int>(a));
      if (static_cast<int>(a) != si) CHECK(inv[a] != static_cast<int>(a));
    }
    // The reference mirror holds the defect axis.
    CHECK((g.op("sigma_d").rotation * g.axis - g.axis).norm() < 1e-12);
  }

  TEST_CASE("pristine cell without a defect is rejected") {
    CHECK_THROWS_AS(build_d3d_ops(*pristine(3)), ValidationError);
  }

  TEST_CASE("apply_op identities") {
    auto cell = siv(3);
    const auto g = build_d3d_ops(*cell);
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(3 * cell->size(), -1.0, 2.0);
    CHECK(apply_op(g.op("E"), v) == v);
    const auto& c3 = g.op("C3");
    CHECK((apply_op(c3, apply_op(c3, apply_op(c3, v))) - v).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(apply_op(c3, v).norm() == doctest::Approx(v.norm()).epsilon(1e-10));
    Eigen::VectorXd si_axis = Eigen::VectorXd::Zero(v.size());
    si_axis.segment<3>(3 * cell->defect()->si_index) = cell->defect()->axis;
    CHECK((apply_op(c3, si_axis) - si_axis).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((apply_op(g.op("i"), si_axis) + si_axis).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(apply_op(c3, Eigen::VectorXd::Zero(5)), ValidationError);
  }

  TEST_CASE("projector of a pure Si axial displacement is a2u") {
    auto cell = siv(3);
    const auto g = build_d3d_ops(*cell);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(3 * cell->size());
    v.segment<3>(3 * cell->defect()->si_index) = cell->defect()->axis;
    for (Irrep r : kAllIrreps) {
      const double w = project(g, r, v).norm();
      CHECK(w == doctest::Approx(r == Irrep::A2u ? 1.0 : 0.0));
    }
  }

  TEST_CASE("dense classification of the N=3 SiV cell is complete") {
    auto cell = siv(3);
    const auto fc = test::spliced_siv(cell);
    const auto modes = solve_modes(fc, MassTable::from_cell(*cell));
    const auto g = build_d3d_ops(*cell);
    const auto labeled = classify_modes(modes, g);
    REQUIRE(labeled.labels.size() == 645);
    CHECK(labeled.max_character_residual < 1e-3);
    CHECK(labeled.fallback_clusters == 0);
    std::map<int, std::map<Irrep, int>> per_cluster;
    for (std::size_t k = 0; k < 645; ++k) per_cluster[labeled.cluster[k]][labeled.labels[k]]++;
    for (const auto& [c, counts] : per_cluster)
      for (const auto& [r, n] : counts)
        if (degeneracy(r) == 2) CHECK(n % 2 == 0);
    std::multiset<Irrep> acoustic;
    for (std::size_t k = 0; k < 645; ++k)
      if (std::abs(modes.frequencies[static_cast<Eigen::Index>(k)]) < 0.1) acoustic.insert(labeled.labels[k]);
    CHECK(acoustic.size() == 3);
    CHECK(acoustic.count(Irrep::A2u) == 1);
    CHECK(acoustic.count(Irrep::Eu) == 2);

    // Different labels have vanishing projected overlap.
    for (std::size_t k = 0; k < 645; k += 37) {
      const Eigen::VectorXd pk = project(g, labeled.labels[k], labeled.modes.vectors.col(static_cast<Eigen::Index>(k)));
      for (std::size_t q = 1; q < 645; q += 41)
        if (labeled.labels[q] != labeled.labels[k])
          CHECK(std::abs(pk.dot(labeled.modes.vectors.col(static_cast<Eigen::Index>(q)))) < 1e-6);
    }
  }

  TEST_CASE("symmetry-adapted solve equals dense solve + classification") {
    for (int n : {2, 3}) {
      auto cell = siv(n);
      const auto fc = n == 2 ? model_force_constants(cell, ForceModelParams::excited())
                             : test::spliced_siv(cell, ForceModelParams::excited());
      const auto masses = MassTable::with_silicon(*cell, 29.0);
      const auto g = build_d3d_ops(*cell);
      const auto dense = classify_modes(solve_modes(fc, masses), g);
      const auto fast = solve_symmetrized(fc, masses, g);
      REQUIRE(fast.modes.size() == dense.modes.size());
      CHECK((fast.modes.frequencies - dense.modes.frequencies).cwiseAbs().maxCoeff() < 1e-8);
      std::map<Irrep, int> a, b;
      for (auto r : dense.labels) a[r]++;
      for (auto r : fast.labels) b[r]++;
      CHECK(a == b);
      const Eigen::MatrixXd& v = fast.modes.vectors;
      CHECK((v.transpose() * v - Eigen::MatrixXd::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff() < 1e-8);
      const Eigen::MatrixXd d = mass_weight(fc, masses);
      const Eigen::MatrixXd r = v * fast.modes.frequencies.unaryExpr([](double w) {
        return (w < 0 ? -1.0 : 1.0) * (w / units::kMeVPerSqrtDynUnit) * (w / units::kMeVPerSqrtDynUnit);
      }).asDiagonal() * v.transpose();
      CHECK((r - d).cwiseAbs().maxCoeff() < 1e-7 * d.cwiseAbs().maxCoeff());
    }
  }

  TEST_CASE("bond-centered pristine classification covers all 3M modes") {
    auto cell = pristine(2);
    const auto base = make_siv_defect(*cell);
    const auto g = build_d3d_ops(*cell, base.defect()->center, base.defect()->axis);
    const auto modes = solve_modes(test::bulk_model(cell), MassTable::from_cell(*cell));
    const auto labeled = classify_modes(modes, g);
    std::size_t total = 0;
    std::map<Irrep, int> counts;
    for (auto r : labeled.labels) counts[r]++;
    for (const auto& [r, n] : counts) total += static_cast<std::size_t>(n);
    CHECK(total == 3 * cell->size());
    CHECK(labeled.max_character_residual < 1e-3);
  }

  TEST_CASE("degenerate clusters") {
    Eigen::VectorXd f(6);
    f << 0.0, 1e-5, 2e-5, 10.0, 10.00005, 11.0;
    const auto c = degenerate_clusters(f, 1e-4);
    CHECK(c[0] == c[1]);
    CHECK(c[1] == c[2]);
    CHECK(c[3] == c[4]);
    CHECK(c[4] != c[5]);
    CHECK(c[2] != c[3]);
  }
}
