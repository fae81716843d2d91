#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "qlvib/symmetry.hpp"

namespace qlvib {

/// Participation p_α = Σ_i v²_{αi}, one entry per atom.
Eigen::VectorXd atom_participation(const Eigen::Ref<const Eigen::VectorXd>& v);

/// IPR = (Σ_α p_α)² / Σ_α p_α², which is 1/Σp² for a normalized vector.
double ipr(const Eigen::Ref<const Eigen::VectorXd>& v);

/// IPR of the averaged participation over an orthonormal set spanning a
/// degenerate subspace; independent of the basis chosen inside it.
double subspace_ipr(const Eigen::Ref<const Eigen::MatrixXd>& vectors);

/// β = M / IPR.
double localization_ratio(double ipr_value, std::size_t atom_count);

struct ModeDescriptor {
  std::size_t index = 0;
  double omega = 0.0;  // meV
  Irrep label = Irrep::A1g;
  double ipr = 1.0;
  double beta = 1.0;
};

/// IPR and β for every mode. Modes sharing label and degenerate cluster get
/// the subspace value, so e partners carry identical β.
std::vector<ModeDescriptor> describe_modes(const LabeledModes& labeled);

struct EnergyWindow {
  double min = 20.0;  // meV
  double max = 70.0;  // meV

  bool contains(double w) const { return w >= min && w <= max; }
};

inline constexpr double kDefaultBetaThreshold = 3.0;

struct WeightedMode {
  double omega;
  double beta;
};

/// Ω = Σβω/Σβ and w = sqrt(Σβ(ω − Ω)²/Σβ).
struct ResonanceMoments {
  double omega;
  double width;
};
ResonanceMoments resonance_moments(std::span<const WeightedMode> modes);

struct ResonanceSummary {
  Irrep label = Irrep::A2u;
  EnergyWindow window;
  double beta_threshold = kDefaultBetaThreshold;
  std::vector<ModeDescriptor> contributing;
  double omega = 0.0;  // meV; meaningful only if found()
  double width = 0.0;  // meV

  bool found() const { return !contributing.empty(); }
  double max_beta() const;
};

/// Resonance of one channel: modes of `label` inside `window` with β > threshold.
ResonanceSummary resonance(std::span<const ModeDescriptor> modes, Irrep label,
                           EnergyWindow window = {},
                           double beta_threshold = kDefaultBetaThreshold);

/// Median β over every mode of one channel.
double channel_median_beta(std::span<const ModeDescriptor> modes, Irrep label);

/// Most localized `label` mode inside the window, or nullopt.
std::optional<ModeDescriptor> most_localized(std::span<const ModeDescriptor> modes, Irrep label,
                                             EnergyWindow window = {});

/// The most-localized `label` mode of `reference` followed into every `others`
/// set. Levels of one symmetry channel do not cross under a mass change, so
/// the same vibration keeps its ordinal within the channel. Element 0 is the
/// reference mode. Throws when the reference has no `label` mode in the window.
std::vector<ModeDescriptor> tracked_peak(std::span<const ModeDescriptor> reference,
                                         std::span<const std::vector<ModeDescriptor>> others,
                                         Irrep label, EnergyWindow window = {});

/// Frequency ratios ω_ref/ω_other of the single most-localized vibration (see
/// tracked_peak), one entry per `others` set.
std::vector<double> naive_peak_shift(std::span<const ModeDescriptor> reference,
                                     std::span<const std::vector<ModeDescriptor>> others,
                                     Irrep label, EnergyWindow window = {});

struct CellValue {
  int n;
  double omega;
};
/// Σ N·Ω_N / Σ N.
double cross_cell_average(std::span<const CellValue> cells);

struct IsotopeRatio {
  double mass_ref;
  double mass_other;
  double ratio;       // Ω_ref / Ω_other
  double ideal;       // sqrt(m_other / m_ref)
  double deviation;   // (ratio − ideal) / ideal
};
/// Ratios of `omegas[0]` to every later entry; masses give the ideal values.
std::vector<IsotopeRatio> isotope_ratios(std::span<const double> omegas,
                                         std::span<const double> masses);

/// ½ Σ ω over the full spectrum (meV), Neumaier-compensated.
double zero_point_energy(const ModeSet& modes);
/// ½ Σ ω^e − ½ Σ ω^g.
double zpv_difference(const ModeSet& ground, const ModeSet& excited);
double zpv_difference(std::span<const double> ground, std::span<const double> excited);

/// ½(Ω^e_a2u + 2Ω^e_eu − Ω^g_a2u − 2Ω^g_eu)(1 − sqrt(m/m')).
double zpl_shift_quasilocal(double ground_a2u, double ground_eu, double excited_a2u,
                            double excited_eu, double mass, double mass_other);

struct ZpvReport {
  std::vector<double> masses;
  std::vector<double> zpv;            // per isotope, meV
  std::vector<double> shift;          // zpv[0] − zpv[k], k >= 1
  std::vector<double> quasilocal;     // zpl_shift_quasilocal per k >= 1
};

/// Compensated Σ of a sequence.
double neumaier_sum(std::span<const double> values);

}  // namespace qlvib
