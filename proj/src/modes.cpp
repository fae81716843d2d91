#include "qlvib/modes.hpp"

#include <lapacke.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>

#include "qlvib/error.hpp"
#include "qlvib/units.hpp"

namespace qlvib {

MassTable::MassTable(std::vector<double> masses) : masses_(std::move(masses)) {
  for (double m : masses_)
    if (!(m > 0.0) || !std::isfinite(m)) throw ValidationError("masses must be positive");
}

MassTable MassTable::from_cell(const Supercell& cell) {
  std::vector<double> m;
  m.reserve(cell.size());
  for (const auto& at : cell.atoms()) m.push_back(at.mass);
  return MassTable(std::move(m));
}

MassTable MassTable::with_silicon(const Supercell& cell, double si_mass) {
  if (!cell.is_defected()) throw ValidationError("cell has no Si atom to substitute");
  auto m = from_cell(cell).masses_;
  m[cell.defect()->si_index] = si_mass;
  return MassTable(std::move(m));
}

MassTable MassTable::scaled(double factor) const {
  auto m = masses_;
  for (double& v : m) v *= factor;
  return MassTable(std::move(m));
}

Eigen::MatrixXd mass_weight(const ForceConstants& fc, const MassTable& masses) {
  if (masses.size() != fc.natoms())
    throw ValidationError("mass table has " + std::to_string(masses.size()) +
                          " entries for " + std::to_string(fc.natoms()) + " atoms");
  const auto n = static_cast<Eigen::Index>(fc.natoms());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  for (int i = 0; i < n; ++i) {
    const auto r = fc.row(i);
    for (std::size_t k = 0; k < r.cols.size(); ++k) {
      const int j = r.cols[k];
      d.block<3, 3>(3 * i, 3 * j) = r.blocks[k] / std::sqrt(masses[i] * masses[j]);
    }
  }
  return d;
}

SymmetricEigen symmetric_eigen(Eigen::MatrixXd matrix) {
  if (matrix.rows() != matrix.cols()) throw ValidationError("eigenproblem matrix not square");
  const auto n = static_cast<lapack_int>(matrix.rows());
  SymmetricEigen out;
  out.values.resize(n);
  if (n == 0) {
    out.vectors = std::move(matrix);
    return out;
  }
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, matrix.data(), n, out.values.data());
  if (info != 0)
    throw NumericalError("symmetric eigensolver failed to converge (info " + std::to_string(info) + ")");
  out.vectors = std::move(matrix);
  return out;
}

double eigenvalue_zero_floor(Eigen::Index dim, double max_abs_entry) {
  return static_cast<double>(dim) * std::numeric_limits<double>::epsilon() * max_abs_entry;
}

double eigenvalue_to_mev(double lambda, double zero_floor) {
  if (std::abs(lambda) <= zero_floor) return 0.0;
  const double w = std::sqrt(std::abs(lambda)) * units::kMeVPerSqrtDynUnit;
  return lambda < 0.0 ? -w : w;
}

double ModeSet::reported_frequency(std::size_t k) const {
  return std::max(0.0, frequencies[static_cast<Eigen::Index>(k)]);
}

ModeSet diagonalize(const Eigen::MatrixXd& dyn, std::shared_ptr<const Supercell> cell,
                    MassTable masses, std::string state) {
  if (dyn.rows() != dyn.cols()) throw ValidationError("dynamical matrix not square");
  const double max_abs = dyn.cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, max_abs);
  const double asym = (dyn - dyn.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1.0e-10 * scale)
    throw ValidationError("dynamical matrix not symmetric (residual " + std::to_string(asym) + ")");

  auto eig = symmetric_eigen(dyn);
  const double conv2 = units::kMeVPerSqrtDynUnit * units::kMeVPerSqrtDynUnit;
  ModeSet modes;
  modes.frequencies.resize(eig.values.size());
  for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
    const double lambda = eig.values[k];
    if (lambda * conv2 < -kStabilityToleranceMeV2)
      throw NumericalError("unstable force model: eigenvalue " + std::to_string(lambda * conv2) +
                           " meV^2");
    modes.frequencies[k] = eigenvalue_to_mev(lambda, eigenvalue_zero_floor(dyn.rows(), max_abs));
  }
  modes.vectors = std::move(eig.vectors);
  modes.cell = std::move(cell);
  modes.masses = std::move(masses);
  modes.state = std::move(state);
  return modes;
}

ModeSet solve_modes(const ForceConstants& fc, const MassTable& masses, std::string state) {
  return diagonalize(mass_weight(fc, masses), fc.cell_ptr(), masses, std::move(state));
}

void write_frequency_table(const ModeSet& modes, std::ostream& out) {
  char buf[64];
  out << "# index\tomega_mev\n";
  for (std::size_t k = 0; k < modes.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\n", k, modes.reported_frequency(k));
    out << buf;
  }
}

namespace {
constexpr char kEigenMagic[8] = {'Q', 'L', 'V', 'I', 'B', 'E', 'V', '1'};
static_assert(std::endian::native == std::endian::little, "binary dumps assume little-endian");
}  // namespace

void write_eigenvectors(const ModeSet& modes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const std::uint64_t count = static_cast<std::uint64_t>(modes.vectors.cols());
  const std::uint64_t len = static_cast<std::uint64_t>(modes.vectors.rows());
  out.write(kEigenMagic, sizeof kEigenMagic);
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  // Column-major storage makes each mode's row contiguous.
  out.write(reinterpret_cast<const char*>(modes.vectors.data()),
            static_cast<std::streamsize>(count * len * sizeof(double)));
  if (!out) throw IoError("write failed: " + path.string());
}

Eigen::MatrixXd read_eigenvectors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  std::uint64_t count = 0, len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kEigenMagic, sizeof magic) != 0)
    throw ValidationError(path.string() + ": not an eigenvector dump");
  Eigen::MatrixXd v(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(count));
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * len * sizeof(double)));
  if (!in) throw ValidationError(path.string() + ": truncated eigenvector dump");
  return v;
}

}  // namespace qlvib
