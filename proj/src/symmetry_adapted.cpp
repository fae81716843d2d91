#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include "qlvib/error.hpp"
#include "qlvib/symmetry.hpp"
#include "qlvib/units.hpp"

namespace qlvib {

namespace {

struct Orbit {
  std::vector<int> atoms;
};

// Symmetry-adapted columns living on one orbit: `local` is 3s × r.
struct Piece {
  int orbit = 0;
  Eigen::MatrixXd local;
  Eigen::Index offset = 0;
};

std::vector<Orbit> atom_orbits(const D3dGroup& group, std::vector<int>& orbit_of,
                               std::vector<int>& slot_of) {
  const std::size_t n = group.ops.front().perm.size();
  orbit_of.assign(n, -1);
  slot_of.assign(n, -1);
  std::vector<Orbit> orbits;
  for (std::size_t a = 0; a < n; ++a) {
    if (orbit_of[a] >= 0) continue;
    Orbit o;
    for (const auto& op : group.ops) o.atoms.push_back(op.perm[a]);
    std::sort(o.atoms.begin(), o.atoms.end());
    o.atoms.erase(std::unique(o.atoms.begin(), o.atoms.end()), o.atoms.end());
    const int id = static_cast<int>(orbits.size());
    for (std::size_t s = 0; s < o.atoms.size(); ++s) {
      orbit_of[o.atoms[s]] = id;
      slot_of[o.atoms[s]] = static_cast<int>(s);
    }
    orbits.push_back(std::move(o));
  }
  return orbits;
}

// Op restricted to one orbit's 3s-dimensional displacement space.
Eigen::MatrixXd local_operator(const SymmetryOp& op, const Orbit& orbit,
                               const std::vector<int>& slot_of) {
  const auto s = static_cast<Eigen::Index>(orbit.atoms.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3 * s, 3 * s);
  for (Eigen::Index k = 0; k < s; ++k) {
    const int to = slot_of[op.perm[orbit.atoms[k]]];
    m.block<3, 3>(3 * to, 3 * k) = op.rotation;
  }
  return m;
}

// Orthonormal basis of the range of a symmetric projector.
Eigen::MatrixXd projector_range(const Eigen::MatrixXd& p) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p);
  const auto& ev = es.eigenvalues();
  Eigen::Index rank = 0;
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (std::abs(ev[k]) > 1.0e-8 && std::abs(ev[k] - 1.0) > 1.0e-8)
      throw NumericalError("symmetry projector is not idempotent on an atom orbit");
    if (ev[k] > 0.5) ++rank;
  }
  return es.eigenvectors().rightCols(rank);
}

struct ModeEntry {
  double omega;
  int irrep;
  Eigen::Index block_index;
  int partner;
};

}  // namespace

LabeledModes solve_symmetrized(const ForceConstants& fc, const MassTable& masses,
                               const D3dGroup& group, std::string state, double degeneracy_tol) {
  const auto natoms = fc.natoms();
  if (masses.size() != natoms) throw ValidationError("mass table does not match the force constants");
  if (group.ops.empty() || group.ops.front().perm.size() != natoms)
    throw ValidationError("symmetry ops do not match the force constants");

  std::vector<int> orbit_of, slot_of;
  const auto orbits = atom_orbits(group, orbit_of, slot_of);

  // Mass-weighted, D3d-invariant masses are required for the blocks to decouple.
  for (const auto& op : group.ops)
    for (std::size_t a = 0; a < natoms; ++a)
      if (masses[a] != masses[static_cast<std::size_t>(op.perm[a])])
        throw ValidationError("solve_symmetrized: masses break the point-group symmetry");

  const SymmetryOp& mirror = group.op("sigma_d");
  std::array<std::vector<Piece>, 6> pieces;
  std::array<Eigen::Index, 6> block_dim{};
  for (std::size_t o = 0; o < orbits.size(); ++o) {
    std::vector<Eigen::MatrixXd> local_ops;
    for (const auto& op : group.ops) local_ops.push_back(local_operator(op, orbits[o], slot_of));
    const Eigen::MatrixXd local_mirror = local_operator(mirror, orbits[o], slot_of);
    const auto dim = local_ops.front().rows();
    for (Irrep r : kAllIrreps) {
      Eigen::MatrixXd p = Eigen::MatrixXd::Zero(dim, dim);
      for (std::size_t g = 0; g < group.ops.size(); ++g)
        p += character(r, group.ops[g].op_class) * local_ops[g];
      p *= degeneracy(r) / 12.0;
      if (degeneracy(r) == 2) {
        // Keep only the mirror-even partner row.
        p = p * 0.5 * (Eigen::MatrixXd::Identity(dim, dim) + local_mirror);
      }
      p = 0.5 * (p + p.transpose());
      Eigen::MatrixXd range = projector_range(p);
      if (range.cols() == 0) continue;
      const int idx = static_cast<int>(r);
      pieces[idx].push_back({static_cast<int>(o), std::move(range), block_dim[idx]});
      block_dim[idx] += pieces[idx].back().local.cols();
    }
  }
  Eigen::Index total = 0;
  for (Irrep r : kAllIrreps) total += degeneracy(r) * block_dim[static_cast<int>(r)];
  if (total != static_cast<Eigen::Index>(3 * natoms))
    throw NumericalError("symmetry-adapted basis does not span the displacement space");

  // Piece lookup per (irrep, orbit).
  std::array<std::vector<int>, 6> piece_of_orbit;
  for (int r = 0; r < 6; ++r) {
    piece_of_orbit[r].assign(orbits.size(), -1);
    for (std::size_t p = 0; p < pieces[r].size(); ++p)
      piece_of_orbit[r][static_cast<std::size_t>(pieces[r][p].orbit)] = static_cast<int>(p);
  }

  std::array<Eigen::MatrixXd, 6> blocks;
  for (int r = 0; r < 6; ++r) blocks[r] = Eigen::MatrixXd::Zero(block_dim[r], block_dim[r]);

  for (std::size_t o1 = 0; o1 < orbits.size(); ++o1) {
    const auto& atoms1 = orbits[o1].atoms;
    const auto s1 = static_cast<Eigen::Index>(atoms1.size());
    std::map<int, Eigen::MatrixXd> coupled;  // orbit o2 -> mass-weighted 3s1 × 3s2
    for (Eigen::Index k = 0; k < s1; ++k) {
      const int a = atoms1[static_cast<std::size_t>(k)];
      const auto row = fc.row(a);
      for (std::size_t c = 0; c < row.cols.size(); ++c) {
        const int b = row.cols[c];
        const int o2 = orbit_of[b];
        auto it = coupled.find(o2);
        if (it == coupled.end()) {
          const auto s2 = static_cast<Eigen::Index>(orbits[o2].atoms.size());
          it = coupled.emplace(o2, Eigen::MatrixXd::Zero(3 * s1, 3 * s2)).first;
        }
        it->second.block<3, 3>(3 * k, 3 * slot_of[b]) =
            row.blocks[c] / std::sqrt(masses[a] * masses[b]);
      }
    }
    for (const auto& [o2, m] : coupled) {
      for (int r = 0; r < 6; ++r) {
        const int p1 = piece_of_orbit[r][o1];
        const int p2 = piece_of_orbit[r][static_cast<std::size_t>(o2)];
        if (p1 < 0 || p2 < 0) continue;
        const Piece& a = pieces[r][p1];
        const Piece& b = pieces[r][p2];
        blocks[r].block(a.offset, b.offset, a.local.cols(), b.local.cols()).noalias() =
            a.local.transpose() * m * b.local;
      }
    }
  }

  const double conv2 = units::kMeVPerSqrtDynUnit * units::kMeVPerSqrtDynUnit;
  double max_abs = 0.0;
  for (int i = 0; i < static_cast<int>(natoms); ++i) {
    const auto row = fc.row(i);
    for (std::size_t c = 0; c < row.cols.size(); ++c)
      max_abs = std::max(max_abs, row.blocks[c].cwiseAbs().maxCoeff() /
                                      std::sqrt(masses[static_cast<std::size_t>(i)] *
                                                masses[static_cast<std::size_t>(row.cols[c])]));
  }
  const double zero_floor = eigenvalue_zero_floor(static_cast<Eigen::Index>(3 * natoms), max_abs);
  std::array<SymmetricEigen, 6> eig;
  std::vector<ModeEntry> entries;
  entries.reserve(3 * natoms);
  for (int r = 0; r < 6; ++r) {
    const Eigen::MatrixXd& b = blocks[r];
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1.0e-10 * scale)
      throw ValidationError("symmetry block of " + irrep_name(static_cast<Irrep>(r)) +
                            " not symmetric: force constants break the point group");
    eig[r] = symmetric_eigen(Eigen::MatrixXd(0.5 * (b + b.transpose())));
    for (Eigen::Index k = 0; k < eig[r].values.size(); ++k) {
      const double lambda = eig[r].values[k];
      if (lambda * conv2 < -kStabilityToleranceMeV2)
        throw NumericalError("unstable force model: eigenvalue " + std::to_string(lambda * conv2) +
                             " meV^2");
      const double w = eigenvalue_to_mev(lambda, zero_floor);
      for (int p = 0; p < degeneracy(static_cast<Irrep>(r)); ++p) entries.push_back({w, r, k, p});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const ModeEntry& x, const ModeEntry& y) {
    return std::tie(x.omega, x.irrep, x.block_index, x.partner) <
           std::tie(y.omega, y.irrep, y.block_index, y.partner);
  });

  const auto dim = static_cast<Eigen::Index>(3 * natoms);
  LabeledModes out;
  out.modes.frequencies.resize(dim);
  out.modes.vectors = Eigen::MatrixXd::Zero(dim, dim);
  out.labels.resize(static_cast<std::size_t>(dim));
  const SymmetryOp& c3 = group.op("C3");
  const SymmetryOp& c3sq = group.op("C3^2");
  const double inv_sqrt3 = 1.0 / std::sqrt(3.0);
  for (Eigen::Index col = 0; col < dim; ++col) {
    const auto& e = entries[static_cast<std::size_t>(col)];
    out.modes.frequencies[col] = e.omega;
    out.labels[static_cast<std::size_t>(col)] = static_cast<Irrep>(e.irrep);
    auto v = out.modes.vectors.col(col);
    for (const Piece& p : pieces[e.irrep]) {
      const Eigen::VectorXd local = p.local * eig[e.irrep].vectors.col(e.block_index).segment(p.offset, p.local.cols());
      const auto& atoms = orbits[static_cast<std::size_t>(p.orbit)].atoms;
      for (std::size_t s = 0; s < atoms.size(); ++s)
        v.segment<3>(3 * atoms[s]) = local.segment<3>(3 * static_cast<Eigen::Index>(s));
    }
    if (e.partner == 1) {
      // Mirror-odd partner from the even one: y = (Ĉ3 − Ĉ3²) x / √3.
      const Eigen::VectorXd x = out.modes.vectors.col(col - 1);
      v = (apply_op(c3, x) - apply_op(c3sq, x)) * inv_sqrt3;
    }
  }
  out.modes.cell = fc.cell_ptr();
  out.modes.masses = masses;
  out.modes.state = std::move(state);
  out.cluster = degenerate_clusters(out.modes.frequencies, degeneracy_tol);
  return out;
}

}  // namespace qlvib
