#include "qlvib/crystal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <tuple>

#include <nlohmann/json.hpp>

#include "qlvib/error.hpp"

namespace qlvib {

namespace {

constexpr double kMinSeparation = 0.5;  // Å

double wrap_unit(double x) {
  double w = x - std::floor(x);
  if (w >= 1.0) w -= 1.0;  // floor rounding for x just below an integer
  return w;
}

Eigen::Vector3d wrap_frac(const Eigen::Vector3d& f) {
  return {wrap_unit(f.x()), wrap_unit(f.y()), wrap_unit(f.z())};
}

}  // namespace

std::string species_name(Species s) { return s == Species::C ? "C" : "Si"; }

Species species_from_name(const std::string& name) {
  if (name == "C") return Species::C;
  if (name == "Si") return Species::Si;
  throw ValidationError("unknown species '" + name + "'");
}

Supercell::Supercell(Lattice lattice, std::vector<AtomSite> atoms,
                     std::optional<DefectGeometry> defect)
    : lattice_(lattice), atoms_(std::move(atoms)), defect_(std::move(defect)) {
  if (!(std::isfinite(lattice_.a) && lattice_.a > 0.0))
    throw ValidationError("lattice constant must be positive and finite");
  if (lattice_.n < 1) throw ValidationError("supercell multiplicity must be >= 1");
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    auto& at = atoms_[k];
    if (at.index != static_cast<int>(k))
      throw ValidationError("atom index " + std::to_string(at.index) + " stored at position " +
                            std::to_string(k));
    if (!(at.mass > 0.0) || !std::isfinite(at.mass))
      throw ValidationError("atom " + std::to_string(k) + " has non-positive mass");
    if (!at.frac.allFinite())
      throw ValidationError("atom " + std::to_string(k) + " has non-finite coordinates");
    at.frac = wrap_frac(at.frac);
  }
  if (defect_) {
    const int si = defect_->si_index;
    if (si < 0 || si >= static_cast<int>(atoms_.size()) || atoms_[si].species != Species::Si)
      throw ValidationError("defect annotation does not point at a Si atom");
  }
  // Pairwise separation check; quadratic but cheap for the cell sizes in use.
  const double min2 = kMinSeparation * kMinSeparation;
  for (std::size_t i = 0; i < atoms_.size(); ++i)
    for (std::size_t j = i + 1; j < atoms_.size(); ++j)
      if (min_image_vector(static_cast<int>(i), static_cast<int>(j)).squaredNorm() < min2)
        throw ValidationError("atoms " + std::to_string(i) + " and " + std::to_string(j) +
                              " are closer than 0.5 Å");
}

const AtomSite& Supercell::atom(int i) const {
  check_index(i);
  return atoms_[i];
}

void Supercell::check_index(int i) const {
  if (i < 0 || i >= static_cast<int>(atoms_.size()))
    throw ValidationError("atom index " + std::to_string(i) + " out of range [0, " +
                          std::to_string(atoms_.size()) + ")");
}

Eigen::Vector3d Supercell::cartesian(int i) const {
  check_index(i);
  return atoms_[i].frac * edge();
}

Eigen::Vector3d Supercell::min_image_vector(int i, int j) const {
  check_index(i);
  check_index(j);
  Eigen::Vector3d d = atoms_[j].frac - atoms_[i].frac;
  for (int k = 0; k < 3; ++k) d[k] -= std::round(d[k]);
  return d * edge();
}

Eigen::Vector3d Supercell::wrap_displacement(const Eigen::Vector3d& d) const {
  Eigen::Vector3d f = d / edge();
  for (int k = 0; k < 3; ++k) f[k] -= std::round(f[k]);
  return f * edge();
}

Eigen::Vector3d Supercell::wrap_position(const Eigen::Vector3d& r) const {
  return wrap_frac(r / edge()) * edge();
}

double min_image_distance(const Supercell& cell, int i, int j) {
  if (i == j) {
    (void)cell.atom(i);
    return 0.0;
  }
  return cell.min_image_vector(i, j).norm();
}

Supercell build_diamond_supercell(int n, double a) {
  if (n < 1) throw ValidationError("supercell multiplicity N must be >= 1");
  if (!(std::isfinite(a) && a > 0.0)) throw ValidationError("lattice constant must be positive");

  // Sites in units of a/4 within the conventional cell: fcc A + fcc B shifted by (1,1,1).
  static constexpr std::array<std::array<int, 3>, 8> kBasis{{{0, 0, 0},
                                                            {0, 2, 2},
                                                            {2, 0, 2},
                                                            {2, 2, 0},
                                                            {1, 1, 1},
                                                            {1, 3, 3},
                                                            {3, 1, 3},
                                                            {3, 3, 1}}};
  std::vector<std::array<int, 3>> sites;
  sites.reserve(8 * static_cast<std::size_t>(n) * n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (const auto& b : kBasis) sites.push_back({b[0] + 4 * i, b[1] + 4 * j, b[2] + 4 * k});
  std::sort(sites.begin(), sites.end());

  const double denom = 4.0 * n;
  std::vector<AtomSite> atoms;
  atoms.reserve(sites.size());
  for (const auto& s : sites) {
    AtomSite at;
    at.index = static_cast<int>(atoms.size());
    at.species = Species::C;
    at.frac = Eigen::Vector3d(s[0] / denom, s[1] / denom, s[2] / denom);
    at.mass = kCarbonMass;
    atoms.push_back(at);
  }
  return Supercell(Lattice{a, n}, std::move(atoms));
}

Supercell make_siv_defect(const Supercell& pristine, double si_mass) {
  const int n = pristine.multiplicity();
  if (pristine.is_defected()) throw ValidationError("make_siv_defect: input cell already defected");
  if (pristine.size() != 8 * static_cast<std::size_t>(n) * n * n)
    throw ValidationError("make_siv_defect: input cell is not a pristine 8N^3 cell");
  for (const auto& at : pristine.atoms())
    if (at.species != Species::C)
      throw ValidationError("make_siv_defect: input cell contains non-carbon atoms");
  if (n < 2)
    throw ValidationError("make_siv_defect: N >= 2 required (interaction range exceeds half cell)");
  if (!(si_mass > 0.0) || !std::isfinite(si_mass))
    throw ValidationError("make_siv_defect: Si mass must be positive");

  const double a = pristine.lattice().a;
  const Eigen::Vector3d bond = Eigen::Vector3d::Ones() * (a / 4.0);
  const Eigen::Vector3d center = Eigen::Vector3d::Ones() * (pristine.edge() / 2.0);
  SiteLocator locator(pristine);

  int best_a = -1;
  int best_b = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  Eigen::Vector3d best_mid = Eigen::Vector3d::Zero();
  for (int i = 0; i < static_cast<int>(pristine.size()); ++i) {
    const Eigen::Vector3d ri = pristine.cartesian(i);
    const auto j = locator.find(ri + bond);
    if (!j) continue;
    const Eigen::Vector3d mid = ri + bond / 2.0;
    const double d2 = pristine.wrap_displacement(mid - center).squaredNorm();
    // Strict improvement beyond round-off keeps the lowest index on ties.
    if (d2 < best_d2 - 1.0e-9) {
      best_d2 = d2;
      best_a = i;
      best_b = *j;
      best_mid = mid;
    }
  }
  if (best_a < 0) throw ValidationError("make_siv_defect: no [111] bond found");

  std::vector<AtomSite> atoms;
  atoms.reserve(pristine.size() - 1);
  for (const auto& at : pristine.atoms()) {
    if (at.index == best_a || at.index == best_b) continue;
    AtomSite copy = at;
    copy.index = static_cast<int>(atoms.size());
    atoms.push_back(copy);
  }
  AtomSite si;
  si.index = static_cast<int>(atoms.size());
  si.species = Species::Si;
  si.frac = pristine.wrap_position(best_mid) / pristine.edge();
  si.mass = si_mass;
  atoms.push_back(si);

  DefectGeometry geom;
  geom.si_index = si.index;
  geom.axis = Eigen::Vector3d::Ones().normalized();
  geom.center = pristine.wrap_position(best_mid);
  return Supercell(pristine.lattice(), std::move(atoms), geom);
}

SiteLocator::SiteLocator(const Supercell& cell, double tolerance)
    : cell_(&cell), tolerance_(tolerance) {
  bins_per_axis_ = static_cast<int>(std::floor(cell.edge() / 1.0));
  if (bins_per_axis_ < 3) bins_per_axis_ = 1;
  bins_.resize(static_cast<std::size_t>(bins_per_axis_) * bins_per_axis_ * bins_per_axis_);
  for (int i = 0; i < static_cast<int>(cell.size()); ++i)
    bins_[bin_of(cell.cartesian(i))].push_back(i);
}

std::size_t SiteLocator::bin_of(const Eigen::Vector3d& wrapped) const {
  std::array<int, 3> b{};
  for (int k = 0; k < 3; ++k) {
    int v = static_cast<int>(std::floor(wrapped[k] / cell_->edge() * bins_per_axis_));
    b[k] = ((v % bins_per_axis_) + bins_per_axis_) % bins_per_axis_;
  }
  return (static_cast<std::size_t>(b[0]) * bins_per_axis_ + b[1]) * bins_per_axis_ + b[2];
}

std::optional<int> SiteLocator::find(const Eigen::Vector3d& cartesian) const {
  const Eigen::Vector3d r = cell_->wrap_position(cartesian);
  const double width = cell_->edge() / bins_per_axis_;
  std::array<int, 3> base{};
  for (int k = 0; k < 3; ++k) base[k] = static_cast<int>(std::floor(r[k] / width));
  const int reach = bins_per_axis_ > 1 ? 1 : 0;
  std::optional<int> hit;
  for (int dx = -reach; dx <= reach; ++dx)
    for (int dy = -reach; dy <= reach; ++dy)
      for (int dz = -reach; dz <= reach; ++dz) {
        std::array<int, 3> b{base[0] + dx, base[1] + dy, base[2] + dz};
        std::size_t idx = 0;
        for (int k = 0; k < 3; ++k) {
          const int v = ((b[k] % bins_per_axis_) + bins_per_axis_) % bins_per_axis_;
          idx = idx * bins_per_axis_ + v;
        }
        for (int i : bins_[idx]) {
          if (cell_->wrap_displacement(cell_->cartesian(i) - r).norm() < tolerance_) {
            if (!hit || i < *hit) hit = i;
          }
        }
      }
  return hit;
}

nlohmann::json supercell_to_json(const Supercell& cell) {
  nlohmann::json doc;
  doc["format"] = "qlvib-supercell-1";
  doc["lattice_constant"] = cell.lattice().a;
  doc["n"] = cell.multiplicity();
  auto& atoms = doc["atoms"] = nlohmann::json::array();
  for (const auto& at : cell.atoms()) {
    atoms.push_back({{"index", at.index},
                     {"species", species_name(at.species)},
                     {"frac", {at.frac.x(), at.frac.y(), at.frac.z()}},
                     {"mass", at.mass}});
  }
  if (const auto& d = cell.defect()) {
    doc["defect"] = {{"si_index", d->si_index},
                     {"axis", {d->axis.x(), d->axis.y(), d->axis.z()}},
                     {"center", {d->center.x(), d->center.y(), d->center.z()}}};
  }
  return doc;
}

Supercell supercell_from_json(const nlohmann::json& doc) {
  try {
    Lattice lat{doc.at("lattice_constant").get<double>(), doc.at("n").get<int>()};
    std::vector<AtomSite> atoms;
    for (const auto& a : doc.at("atoms")) {
      AtomSite at;
      at.index = a.at("index").get<int>();
      at.species = species_from_name(a.at("species").get<std::string>());
      const auto& f = a.at("frac");
      at.frac = Eigen::Vector3d(f.at(0).get<double>(), f.at(1).get<double>(), f.at(2).get<double>());
      at.mass = a.at("mass").get<double>();
      atoms.push_back(at);
    }
    std::optional<DefectGeometry> defect;
    if (doc.contains("defect")) {
      const auto& d = doc.at("defect");
      DefectGeometry g;
      g.si_index = d.at("si_index").get<int>();
      const auto& ax = d.at("axis");
      const auto& c = d.at("center");
      g.axis = Eigen::Vector3d(ax.at(0).get<double>(), ax.at(1).get<double>(), ax.at(2).get<double>());
      g.center = Eigen::Vector3d(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
      defect = g;
    }
    return Supercell(lat, std::move(atoms), defect);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("supercell document: ") + e.what());
  }
}

void write_supercell(const Supercell& cell, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << supercell_to_json(cell).dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

Supercell read_supercell(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return supercell_from_json(doc);
}

}  // namespace qlvib
