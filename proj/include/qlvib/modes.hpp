#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "qlvib/force_constants.hpp"

namespace qlvib {

namespace isotopes {
inline constexpr double kCarbon12 = 12.0;
inline constexpr double kSilicon28 = 28.0;
inline constexpr double kSilicon29 = 29.0;
inline constexpr double kSilicon30 = 30.0;
}  // namespace isotopes

/// Per-atom masses in amu.
class MassTable {
 public:
  MassTable() = default;
  explicit MassTable(std::vector<double> masses);

  /// Masses recorded on the cell's atom sites.
  static MassTable from_cell(const Supercell& cell);
  /// Cell masses with the defect Si replaced by `si_mass`.
  static MassTable with_silicon(const Supercell& cell, double si_mass);

  std::size_t size() const { return masses_.size(); }
  double operator[](std::size_t i) const { return masses_[i]; }
  const std::vector<double>& values() const { return masses_; }
  MassTable scaled(double factor) const;

 private:
  std::vector<double> masses_;
};

/// Dense D[(i,a),(j,b)] = Φ[(i,a),(j,b)] / sqrt(m_i m_j), eV Å⁻² amu⁻¹.
Eigen::MatrixXd mass_weight(const ForceConstants& fc, const MassTable& masses);

/// Eigen-decomposition of a real symmetric matrix via LAPACK dsyevd.
/// Eigenvalues ascending; columns of `vectors` orthonormal.
struct SymmetricEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};
SymmetricEigen symmetric_eigen(Eigen::MatrixXd matrix);

/// Signed phonon energy in meV for a dynamical-matrix eigenvalue (negative
/// eigenvalues map to −sqrt|λ|). Eigenvalues with |λ| <= zero_floor are
/// indistinguishable from zero at working precision and map to exactly 0.
double eigenvalue_to_mev(double lambda, double zero_floor = 0.0);

/// Backward-error scale of a dense symmetric eigensolve: dim · ε · max|D|.
double eigenvalue_zero_floor(Eigen::Index dim, double max_abs_entry);

/// Vibrational modes of one (cell, masses, state) combination.
/// Column k of `vectors` is the mass-weighted displacement pattern of mode k,
/// atom-major: entries 3α..3α+2 belong to atom α.
struct ModeSet {
  Eigen::VectorXd frequencies;  // meV, ascending
  Eigen::MatrixXd vectors;
  std::shared_ptr<const Supercell> cell;
  MassTable masses;
  std::string state;

  std::size_t size() const { return static_cast<std::size_t>(frequencies.size()); }
  /// Frequency with acoustic round-off negatives clamped to zero.
  double reported_frequency(std::size_t k) const;
};

inline constexpr double kStabilityToleranceMeV2 = 1.0e-4;

/// Full spectrum of `dyn`. Rejects asymmetric input (beyond 1e-10 relative to
/// max |D|) and eigenvalues below −1e-4 meV² (unstable force model).
ModeSet diagonalize(const Eigen::MatrixXd& dyn, std::shared_ptr<const Supercell> cell = nullptr,
                    MassTable masses = {}, std::string state = {});

/// mass_weight + diagonalize.
ModeSet solve_modes(const ForceConstants& fc, const MassTable& masses, std::string state = {});

/// "index<TAB>omega_mev" lines, 17 significant digits.
void write_frequency_table(const ModeSet& modes, std::ostream& out);
/// Binary dump: 8-byte magic "QLVIBEV1", uint64 mode count, uint64 row length
/// (3M), then mode-major rows of little-endian doubles (atom-major within a row).
void write_eigenvectors(const ModeSet& modes, const std::filesystem::path& path);
Eigen::MatrixXd read_eigenvectors(const std::filesystem::path& path);

}  // namespace qlvib
