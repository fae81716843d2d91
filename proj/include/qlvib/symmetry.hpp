#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "qlvib/modes.hpp"

namespace qlvib {

/// Irreducible representations of D3d, in character-table row order.
enum class Irrep { A1g = 0, A2g, Eg, A1u, A2u, Eu };

inline constexpr std::array<Irrep, 6> kAllIrreps{Irrep::A1g, Irrep::A2g, Irrep::Eg,
                                                 Irrep::A1u, Irrep::A2u, Irrep::Eu};

std::string irrep_name(Irrep r);  // "a1g", ..., "eu"
Irrep irrep_from_name(const std::string& name);
int degeneracy(Irrep r);

/// Conjugacy classes: E, 2C3, 3C2, i, 2S6, 3σd.
enum class OpClass { E = 0, C3, C2, Inversion, S6, SigmaD };

/// χ_Γ(class) for D3d.
double character(Irrep r, OpClass c);

struct SymmetryOp {
  std::string name;
  OpClass op_class = OpClass::E;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  /// perm[α] is the atom that α is carried onto.
  std::vector<int> perm;
};

/// All twelve elements of D3d acting on one cell about `center`.
struct D3dGroup {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d axis = Eigen::Vector3d::Ones().normalized();
  std::vector<SymmetryOp> ops;

  const SymmetryOp& op(const std::string& name) const;
  /// {C3, σd, i}.
  std::array<const SymmetryOp*, 3> generators() const;
};

/// Group about the Si site of a defected cell. The σd reference mirror has
/// normal axis × ẑ (for a [111] axis: the (1 −1 0) plane, which holds [111]
/// and [1 1 −2]); the C2 axes are the mirror normals.
D3dGroup build_d3d_ops(const Supercell& cell);
/// Same construction about an arbitrary center (e.g. a bond center of a pristine cell).
D3dGroup build_d3d_ops(const Supercell& cell, const Eigen::Vector3d& center,
                       const Eigen::Vector3d& axis);

/// Checks that composing any two ops reproduces the op with the product
/// rotation, including its permutation. Throws NumericalError otherwise.
void verify_group_closure(const D3dGroup& group);

/// (Ô v)_{π(β)} = R v_β.
Eigen::MatrixXd apply_op(const SymmetryOp& op, const Eigen::Ref<const Eigen::MatrixXd>& v);

/// P_Γ v = (d_Γ/12) Σ_g χ_Γ(g) Ô_g v.
Eigen::MatrixXd project(const D3dGroup& group, Irrep r, const Eigen::Ref<const Eigen::MatrixXd>& v);

/// Modes with one irrep label each. Degenerate clusters may have had their
/// basis rotated into symmetry-adapted partners.
struct LabeledModes {
  ModeSet modes;
  std::vector<Irrep> labels;
  std::vector<int> cluster;  // degenerate-cluster id per mode
  double max_character_residual = 0.0;
  int fallback_clusters = 0;
};

struct ClassifyOptions {
  double degeneracy_tol = 1.0e-4;  // meV
  double character_tol = 1.0e-3;
};

/// Groups modes into clusters with |ω − ω'| < tol (or |ω² − ω'²| < tol², which
/// keeps the acoustic null space together). Returns a cluster id per mode.
std::vector<int> degenerate_clusters(const Eigen::VectorXd& frequencies, double tol);

/// Labels every mode from cluster-traced characters over the full group.
/// Clusters holding several irreps are rotated onto projector eigenbases;
/// clusters whose characters do not decompose are labelled by dominant
/// projector weight and counted in `fallback_clusters`.
LabeledModes classify_modes(const ModeSet& modes, const D3dGroup& group,
                            const ClassifyOptions& options = {});

/// Builds the dynamical matrix directly in a symmetry-adapted basis and
/// diagonalizes one block per irrep (one partner row for e irreps). Returns
/// the same spectrum as `solve_modes` + `classify_modes`, at a fraction of
/// the cost, with labels exact by construction.
LabeledModes solve_symmetrized(const ForceConstants& fc, const MassTable& masses,
                               const D3dGroup& group, std::string state = {},
                               double degeneracy_tol = 1.0e-4);

}  // namespace qlvib
