#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace qlvib {

inline constexpr double kDiamondLatticeConstant = 3.544;  // Å
inline constexpr double kCarbonMass = 12.0;               // amu
inline constexpr double kSilicon28Mass = 28.0;            // amu

enum class Species { C, Si };

std::string species_name(Species s);
Species species_from_name(const std::string& name);

/// Cubic lattice: conventional constant `a` and multiplicity `n`, giving a
/// supercell edge of a·n along each Cartesian axis.
struct Lattice {
  double a = kDiamondLatticeConstant;
  int n = 1;

  double edge() const { return a * n; }
  Eigen::Matrix3d cell_vectors() const { return Eigen::Matrix3d::Identity() * edge(); }
};

struct AtomSite {
  int index = 0;
  Species species = Species::C;
  Eigen::Vector3d frac = Eigen::Vector3d::Zero();  // wrapped to [0,1)
  double mass = kCarbonMass;
};

/// Split-vacancy annotation. `center` is the Cartesian Si position; it is
/// the inversion center of the defected atom set.
struct DefectGeometry {
  int si_index = -1;
  Eigen::Vector3d axis = Eigen::Vector3d::Ones().normalized();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
};

/// Immutable periodic cell. Atom `index` fields equal their position in the list.
class Supercell {
 public:
  Supercell(Lattice lattice, std::vector<AtomSite> atoms,
            std::optional<DefectGeometry> defect = std::nullopt);

  const Lattice& lattice() const { return lattice_; }
  int multiplicity() const { return lattice_.n; }
  double edge() const { return lattice_.edge(); }
  std::size_t size() const { return atoms_.size(); }
  std::span<const AtomSite> atoms() const { return atoms_; }
  const AtomSite& atom(int i) const;
  const std::optional<DefectGeometry>& defect() const { return defect_; }
  bool is_defected() const { return defect_.has_value(); }

  Eigen::Vector3d cartesian(int i) const;
  /// Minimum-image displacement r_j − r_i.
  Eigen::Vector3d min_image_vector(int i, int j) const;
  /// Minimum image of an arbitrary Cartesian displacement.
  Eigen::Vector3d wrap_displacement(const Eigen::Vector3d& d) const;
  /// Cartesian position folded into [0, edge)³.
  Eigen::Vector3d wrap_position(const Eigen::Vector3d& r) const;

 private:
  void check_index(int i) const;

  Lattice lattice_;
  std::vector<AtomSite> atoms_;
  std::optional<DefectGeometry> defect_;
};

/// Pristine diamond supercell with 8n³ carbons ordered lexicographically by
/// fractional coordinate (x, then y, then z).
Supercell build_diamond_supercell(int n, double a = kDiamondLatticeConstant);

/// Removes the [111] C–C pair whose bond midpoint is nearest the cell center
/// and places one Si at that midpoint. Remaining carbons keep their relative
/// order; the Si atom is appended last.
Supercell make_siv_defect(const Supercell& pristine, double si_mass = kSilicon28Mass);

double min_image_distance(const Supercell& cell, int i, int j);

/// Periodic spatial hash answering "which atom sits at this position".
class SiteLocator {
 public:
  explicit SiteLocator(const Supercell& cell, double tolerance = 1.0e-5);
  std::optional<int> find(const Eigen::Vector3d& cartesian) const;

 private:
  std::size_t bin_of(const Eigen::Vector3d& wrapped) const;

  const Supercell* cell_;
  double tolerance_;
  int bins_per_axis_;
  std::vector<std::vector<int>> bins_;
};

nlohmann::json supercell_to_json(const Supercell& cell);
Supercell supercell_from_json(const nlohmann::json& doc);
void write_supercell(const Supercell& cell, const std::filesystem::path& path);
Supercell read_supercell(const std::filesystem::path& path);

}  // namespace qlvib
