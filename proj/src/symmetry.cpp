#include "qlvib/symmetry.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "qlvib/error.hpp"

namespace qlvib {

namespace {

// Rows: a1g a2g eg a1u a2u eu. Columns: E 2C3 3C2 i 2S6 3σd.
constexpr double kCharacters[6][6] = {
    {1, 1, 1, 1, 1, 1},  {1, 1, -1, 1, 1, -1}, {2, -1, 0, 2, -1, 0},
    {1, 1, 1, -1, -1, -1}, {1, 1, -1, -1, -1, 1}, {2, -1, 0, -2, 1, 0},
};
constexpr const char* kIrrepNames[6] = {"a1g", "a2g", "eg", "a1u", "a2u", "eu"};
constexpr double kPermutationTolerance = 1.0e-6;  // Å

Eigen::Matrix3d axis_rotation(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Eigen::Matrix3d half_turn(const Eigen::Vector3d& u) {
  const Eigen::Vector3d n = u.normalized();
  return 2.0 * n * n.transpose() - Eigen::Matrix3d::Identity();
}

}  // namespace

std::string irrep_name(Irrep r) { return kIrrepNames[static_cast<int>(r)]; }

Irrep irrep_from_name(const std::string& name) {
  for (Irrep r : kAllIrreps)
    if (irrep_name(r) == name) return r;
  throw ValidationError("unknown irrep '" + name + "'");
}

int degeneracy(Irrep r) { return (r == Irrep::Eg || r == Irrep::Eu) ? 2 : 1; }

double character(Irrep r, OpClass c) {
  return kCharacters[static_cast<int>(r)][static_cast<int>(c)];
}

const SymmetryOp& D3dGroup::op(const std::string& name) const {
  for (const auto& o : ops)
    if (o.name == name) return o;
  throw ValidationError("no symmetry op named '" + name + "'");
}

std::array<const SymmetryOp*, 3> D3dGroup::generators() const {
  return {&op("C3"), &op("sigma_d"), &op("i")};
}

D3dGroup build_d3d_ops(const Supercell& cell) {
  if (!cell.is_defected())
    throw ValidationError("build_d3d_ops: cell has no defect geometry");
  const auto& d = *cell.defect();
  return build_d3d_ops(cell, cell.cartesian(d.si_index), d.axis);
}

D3dGroup build_d3d_ops(const Supercell& cell, const Eigen::Vector3d& center,
                       const Eigen::Vector3d& axis) {
  if (!(axis.norm() > 0.0)) throw ValidationError("build_d3d_ops: zero axis");
  D3dGroup g;
  g.center = center;
  g.axis = axis.normalized();
  Eigen::Vector3d u0 = g.axis.cross(Eigen::Vector3d::UnitZ());
  if (u0.norm() < 1.0e-6) u0 = g.axis.cross(Eigen::Vector3d::UnitX());
  u0.normalize();

  const double third = 2.0 * std::numbers::pi / 3.0;
  const Eigen::Matrix3d c3 = axis_rotation(g.axis, third);
  const Eigen::Matrix3d c3sq = c3 * c3;
  const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
  const std::array<Eigen::Vector3d, 3> c2_axes{u0, c3 * u0, c3sq * u0};

  auto push = [&](std::string name, OpClass cls, const Eigen::Matrix3d& r) {
    SymmetryOp op;
    op.name = std::move(name);
    op.op_class = cls;
    op.rotation = r;
    g.ops.push_back(std::move(op));
  };
  push("E", OpClass::E, id);
  push("C3", OpClass::C3, c3);
  push("C3^2", OpClass::C3, c3sq);
  push("C2", OpClass::C2, half_turn(c2_axes[0]));
  push("C2'", OpClass::C2, half_turn(c2_axes[1]));
  push("C2''", OpClass::C2, half_turn(c2_axes[2]));
  push("i", OpClass::Inversion, -id);
  push("S6", OpClass::S6, -c3sq);
  push("S6^5", OpClass::S6, -c3);
  push("sigma_d", OpClass::SigmaD, -half_turn(c2_axes[0]));
  push("sigma_d'", OpClass::SigmaD, -half_turn(c2_axes[1]));
  push("sigma_d''", OpClass::SigmaD, -half_turn(c2_axes[2]));

  const SiteLocator locator(cell, kPermutationTolerance);
  const int n = static_cast<int>(cell.size());
  for (auto& op : g.ops) {
    op.perm.assign(cell.size(), -1);
    std::vector<char> hit(cell.size(), 0);
    for (int a = 0; a < n; ++a) {
      const Eigen::Vector3d rel = cell.wrap_displacement(cell.cartesian(a) - center);
      const auto b = locator.find(center + op.rotation * rel);
      if (!b || cell.atom(*b).species != cell.atom(a).species || hit[*b]) {
        std::ostringstream msg;
        msg << "build_d3d_ops: atom " << a << " has no image under " << op.name
            << " (cell is not symmetric about the chosen center)";
        throw ValidationError(msg.str());
      }
      hit[*b] = 1;
      op.perm[a] = *b;
    }
  }
  verify_group_closure(g);
  return g;
}

void verify_group_closure(const D3dGroup& group) {
  const std::size_t n = group.ops.front().perm.size();
  for (const auto& a : group.ops)
    for (const auto& b : group.ops) {
      const Eigen::Matrix3d r = a.rotation * b.rotation;
      const SymmetryOp* prod = nullptr;
      for (const auto& c : group.ops)
        if ((c.rotation - r).cwiseAbs().maxCoeff() < 1.0e-10) prod = &c;
      if (!prod) throw NumericalError("symmetry ops do not close under composition");
      for (std::size_t k = 0; k < n; ++k)
        if (a.perm[b.perm[k]] != prod->perm[k])
          throw NumericalError("permutation of " + a.name + "*" + b.name + " inconsistent with " +
                               prod->name);
    }
}

Eigen::MatrixXd apply_op(const SymmetryOp& op, const Eigen::Ref<const Eigen::MatrixXd>& v) {
  const auto n = static_cast<Eigen::Index>(op.perm.size());
  if (v.rows() != 3 * n) throw ValidationError("apply_op: vector length does not match the cell");
  Eigen::MatrixXd out(v.rows(), v.cols());
  for (Eigen::Index b = 0; b < n; ++b)
    out.middleRows<3>(3 * op.perm[b]).noalias() = op.rotation * v.middleRows<3>(3 * b);
  return out;
}

Eigen::MatrixXd project(const D3dGroup& group, Irrep r,
                        const Eigen::Ref<const Eigen::MatrixXd>& v) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(v.rows(), v.cols());
  for (const auto& op : group.ops) {
    const double chi = character(r, op.op_class);
    if (chi != 0.0) out += chi * apply_op(op, v);
  }
  return out * (degeneracy(r) / 12.0);
}

std::vector<int> degenerate_clusters(const Eigen::VectorXd& f, double tol) {
  std::vector<int> cluster(static_cast<std::size_t>(f.size()), 0);
  int id = 0;
  for (Eigen::Index k = 1; k < f.size(); ++k) {
    const double dw = std::abs(f[k] - f[k - 1]);
    const double dw2 = std::abs(f[k] * std::abs(f[k]) - f[k - 1] * std::abs(f[k - 1]));
    if (!(dw < tol || dw2 < tol * tol)) ++id;
    cluster[k] = id;
  }
  return cluster;
}

LabeledModes classify_modes(const ModeSet& modes, const D3dGroup& group,
                            const ClassifyOptions& options) {
  const auto dim = modes.vectors.rows();
  if (group.ops.empty() || static_cast<Eigen::Index>(3 * group.ops.front().perm.size()) != dim)
    throw ValidationError("classify_modes: symmetry ops do not match the mode dimension");

  LabeledModes out;
  out.modes = modes;
  out.cluster = degenerate_clusters(modes.frequencies, options.degeneracy_tol);
  out.labels.assign(modes.size(), Irrep::A1g);

  std::size_t begin = 0;
  while (begin < modes.size()) {
    std::size_t end = begin;
    while (end < modes.size() && out.cluster[end] == out.cluster[begin]) ++end;
    const auto m = static_cast<Eigen::Index>(end - begin);
    const Eigen::MatrixXd vc = out.modes.vectors.middleCols(static_cast<Eigen::Index>(begin), m);

    // Per-op overlap matrices VᵀÔV; their traces are the cluster characters.
    std::vector<Eigen::MatrixXd> overlaps;
    overlaps.reserve(group.ops.size());
    std::array<double, 12> chi{};
    for (std::size_t g = 0; g < group.ops.size(); ++g) {
      overlaps.push_back(vc.transpose() * apply_op(group.ops[g], vc));
      chi[g] = overlaps.back().trace();
    }

    std::array<double, 6> mult{};
    std::array<int, 6> count{};
    double residual = 0.0;
    int total = 0;
    for (Irrep r : kAllIrreps) {
      double s = 0.0;
      for (std::size_t g = 0; g < group.ops.size(); ++g)
        s += character(r, group.ops[g].op_class) * chi[g];
      const int idx = static_cast<int>(r);
      mult[idx] = s / 12.0;
      count[idx] = static_cast<int>(std::lround(mult[idx]));
      residual = std::max(residual, std::abs(mult[idx] - count[idx]));
      total += count[idx] * degeneracy(r);
    }
    for (std::size_t g = 0; g < group.ops.size(); ++g) {
      double rebuilt = 0.0;
      for (Irrep r : kAllIrreps)
        rebuilt += count[static_cast<int>(r)] * character(r, group.ops[g].op_class);
      residual = std::max(residual, std::abs(chi[g] - rebuilt));
    }

    auto restricted_projector = [&](Irrep r) {
      Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m, m);
      for (std::size_t g = 0; g < group.ops.size(); ++g)
        q += character(r, group.ops[g].op_class) * overlaps[g];
      q *= degeneracy(r) / 12.0;
      return Eigen::MatrixXd(0.5 * (q + q.transpose()));
    };

    const bool decomposes = residual < options.character_tol && total == m;
    if (decomposes) {
      out.max_character_residual = std::max(out.max_character_residual, residual);
      int distinct = 0;
      for (int c : count) distinct += c > 0 ? 1 : 0;
      if (distinct == 1) {
        Irrep only = Irrep::A1g;
        for (Irrep r : kAllIrreps)
          if (count[static_cast<int>(r)] > 0) only = r;
        for (std::size_t k = begin; k < end; ++k) out.labels[k] = only;
      } else {
        // Rotate the cluster onto the eigenbasis of each irrep projector.
        Eigen::MatrixXd rot(m, m);
        Eigen::Index col = 0;
        for (Irrep r : kAllIrreps) {
          const int want = count[static_cast<int>(r)] * degeneracy(r);
          if (want == 0) continue;
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(restricted_projector(r));
          rot.middleCols(col, want) = es.eigenvectors().rightCols(want);
          for (int k = 0; k < want; ++k) out.labels[begin + static_cast<std::size_t>(col + k)] = r;
          col += want;
        }
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(rot);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
        // Keep column orientation consistent with rot.
        for (Eigen::Index c = 0; c < m; ++c)
          if (q.col(c).dot(rot.col(c)) < 0.0) q.col(c) *= -1.0;
        out.modes.vectors.middleCols(static_cast<Eigen::Index>(begin), m) = vc * q;
      }
    } else {
      ++out.fallback_clusters;
      out.max_character_residual = std::max(out.max_character_residual, residual);
      std::array<Eigen::VectorXd, 6> weight;
      for (Irrep r : kAllIrreps) weight[static_cast<int>(r)] = restricted_projector(r).diagonal();
      std::array<int, 6> assigned{};
      for (Eigen::Index k = 0; k < m; ++k) {
        int best = 0;
        for (int r = 1; r < 6; ++r)
          if (weight[r][k] > weight[best][k]) best = r;
        out.labels[begin + static_cast<std::size_t>(k)] = static_cast<Irrep>(best);
        ++assigned[best];
      }
      if (assigned[static_cast<int>(Irrep::Eg)] % 2 != 0 ||
          assigned[static_cast<int>(Irrep::Eu)] % 2 != 0) {
        std::ostringstream msg;
        msg << "classify_modes: cluster at " << modes.frequencies[static_cast<Eigen::Index>(begin)]
            << " meV does not decompose into D3d irreps (character residual " << residual << ")";
        throw NumericalError(msg.str());
      }
    }
    begin = end;
  }
  return out;
}

}  // namespace qlvib
