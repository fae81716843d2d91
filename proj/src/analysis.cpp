#include "qlvib/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "qlvib/error.hpp"

namespace qlvib {

Eigen::VectorXd atom_participation(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() % 3 != 0) throw ValidationError("mode vector length not a multiple of 3");
  const auto n = v.size() / 3;
  Eigen::VectorXd p(n);
  for (Eigen::Index a = 0; a < n; ++a) p[a] = v.segment<3>(3 * a).squaredNorm();
  return p;
}

namespace {

double ipr_from_participation(const Eigen::VectorXd& p) {
  const double total = p.sum();
  const double sq = p.squaredNorm();
  if (!(total > 0.0) || !(sq > 0.0)) throw ValidationError("ipr of a zero vector");
  return total * total / sq;
}

}  // namespace

double ipr(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return ipr_from_participation(atom_participation(v));
}

double subspace_ipr(const Eigen::Ref<const Eigen::MatrixXd>& vectors) {
  if (vectors.cols() == 0) throw ValidationError("ipr of an empty subspace");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(vectors.rows() / 3);
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) p += atom_participation(vectors.col(c));
  return ipr_from_participation(p / static_cast<double>(vectors.cols()));
}

double localization_ratio(double ipr_value, std::size_t atom_count) {
  const double m = static_cast<double>(atom_count);
  if (atom_count < 1) throw ValidationError("localization_ratio: M must be >= 1");
  const double slack = 1.0e-9 * m;
  if (!(ipr_value >= 1.0 - slack) || !(ipr_value <= m + slack))
    throw ValidationError("localization_ratio: ipr outside [1, M]");
  return m / ipr_value;
}

std::vector<ModeDescriptor> describe_modes(const LabeledModes& labeled) {
  const auto& modes = labeled.modes;
  const std::size_t count = modes.size();
  const std::size_t atoms = static_cast<std::size_t>(modes.vectors.rows() / 3);
  std::vector<ModeDescriptor> out(count);
  std::vector<char> done(count, 0);
  for (std::size_t k = 0; k < count; ++k) {
    if (done[k]) continue;
    std::vector<std::size_t> group;
    for (std::size_t q = k; q < count && labeled.cluster[q] == labeled.cluster[k]; ++q)
      if (!done[q] && labeled.labels[q] == labeled.labels[k]) group.push_back(q);
    Eigen::MatrixXd vecs(modes.vectors.rows(), static_cast<Eigen::Index>(group.size()));
    for (std::size_t g = 0; g < group.size(); ++g)
      vecs.col(static_cast<Eigen::Index>(g)) = modes.vectors.col(static_cast<Eigen::Index>(group[g]));
    const double value = group.size() == 1 ? ipr(vecs.col(0)) : subspace_ipr(vecs);
    const double clamped = std::clamp(value, 1.0, static_cast<double>(atoms));
    for (std::size_t q : group) {
      out[q].index = q;
      out[q].omega = modes.reported_frequency(q);
      out[q].label = labeled.labels[q];
      out[q].ipr = clamped;
      out[q].beta = localization_ratio(clamped, atoms);
      done[q] = 1;
    }
  }
  return out;
}

ResonanceMoments resonance_moments(std::span<const WeightedMode> modes) {
  if (modes.empty()) throw ValidationError("resonance_moments: no modes");
  std::vector<double> bw, b;
  for (const auto& m : modes) {
    if (!(m.beta > 0.0)) throw ValidationError("resonance_moments: weights must be positive");
    bw.push_back(m.beta * m.omega);
    b.push_back(m.beta);
  }
  const double sb = neumaier_sum(b);
  const double omega = neumaier_sum(bw) / sb;
  std::vector<double> dev;
  for (const auto& m : modes) dev.push_back(m.beta * (m.omega - omega) * (m.omega - omega));
  return {omega, std::sqrt(neumaier_sum(dev) / sb)};
}

double ResonanceSummary::max_beta() const {
  double best = 0.0;
  for (const auto& m : contributing) best = std::max(best, m.beta);
  return best;
}

ResonanceSummary resonance(std::span<const ModeDescriptor> modes, Irrep label, EnergyWindow window,
                           double beta_threshold) {
  ResonanceSummary out;
  out.label = label;
  out.window = window;
  out.beta_threshold = beta_threshold;
  std::vector<WeightedMode> weights;
  for (const auto& m : modes) {
    if (m.label != label || !window.contains(m.omega) || !(m.beta > beta_threshold)) continue;
    out.contributing.push_back(m);
    weights.push_back({m.omega, m.beta});
  }
  if (!weights.empty()) {
    const auto mom = resonance_moments(weights);
    out.omega = mom.omega;
    out.width = mom.width;
  }
  return out;
}

double channel_median_beta(std::span<const ModeDescriptor> modes, Irrep label) {
  std::vector<double> b;
  for (const auto& m : modes)
    if (m.label == label) b.push_back(m.beta);
  if (b.empty()) return 0.0;
  std::sort(b.begin(), b.end());
  const std::size_t h = b.size() / 2;
  return b.size() % 2 ? b[h] : 0.5 * (b[h - 1] + b[h]);
}

std::optional<ModeDescriptor> most_localized(std::span<const ModeDescriptor> modes, Irrep label,
                                             EnergyWindow window) {
  std::optional<ModeDescriptor> best;
  for (const auto& m : modes) {
    if (m.label != label || !window.contains(m.omega)) continue;
    if (!best || m.beta > best->beta) best = m;
  }
  return best;
}

namespace {

// Position of `mode` among the `label` modes of its set, in ascending frequency.
std::size_t channel_ordinal(std::span<const ModeDescriptor> modes, Irrep label, std::size_t index) {
  std::size_t k = 0;
  for (const auto& m : modes) {
    if (m.index == index) return k;
    if (m.label == label) ++k;
  }
  throw ValidationError("channel_ordinal: mode not found");
}

}  // namespace

std::vector<ModeDescriptor> tracked_peak(std::span<const ModeDescriptor> reference,
                                         std::span<const std::vector<ModeDescriptor>> others,
                                         Irrep label, EnergyWindow window) {
  const auto ref = most_localized(reference, label, window);
  if (!ref) throw ValidationError("naive_peak_shift: no localized mode in the window");
  const std::size_t ordinal = channel_ordinal(reference, label, ref->index);
  std::vector<ModeDescriptor> out{*ref};
  for (const auto& set : others) {
    std::size_t k = 0;
    std::optional<ModeDescriptor> hit;
    for (const auto& m : set) {
      if (m.label != label) continue;
      if (k++ == ordinal) {
        hit = m;
        break;
      }
    }
    if (!hit) throw ValidationError("naive_peak_shift: channel sizes differ between mode sets");
    out.push_back(*hit);
  }
  return out;
}

std::vector<double> naive_peak_shift(std::span<const ModeDescriptor> reference,
                                     std::span<const std::vector<ModeDescriptor>> others,
                                     Irrep label, EnergyWindow window) {
  const auto modes = tracked_peak(reference, others, label, window);
  std::vector<double> ratios;
  for (std::size_t k = 1; k < modes.size(); ++k) ratios.push_back(modes[0].omega / modes[k].omega);
  return ratios;
}

double cross_cell_average(std::span<const CellValue> cells) {
  if (cells.empty()) throw ValidationError("cross_cell_average: no cells");
  std::vector<double> num, den;
  for (const auto& c : cells) {
    if (c.n < 1) throw ValidationError("cross_cell_average: N must be >= 1");
    num.push_back(c.n * c.omega);
    den.push_back(c.n);
  }
  return neumaier_sum(num) / neumaier_sum(den);
}

std::vector<IsotopeRatio> isotope_ratios(std::span<const double> omegas,
                                         std::span<const double> masses) {
  if (omegas.size() != masses.size() || omegas.size() < 2)
    throw ValidationError("isotope_ratios: need matching Ω and mass lists of length >= 2");
  for (std::size_t k = 0; k < omegas.size(); ++k)
    if (!(omegas[k] > 0.0) || !(masses[k] > 0.0))
      throw ValidationError("isotope_ratios: inputs must be positive");
  std::vector<IsotopeRatio> out;
  for (std::size_t k = 1; k < omegas.size(); ++k) {
    IsotopeRatio r;
    r.mass_ref = masses[0];
    r.mass_other = masses[k];
    r.ratio = omegas[0] / omegas[k];
    r.ideal = std::sqrt(masses[k] / masses[0]);
    r.deviation = (r.ratio - r.ideal) / r.ideal;
    out.push_back(r);
  }
  return out;
}

double neumaier_sum(std::span<const double> values) {
  double sum = 0.0;
  double comp = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

double zero_point_energy(const ModeSet& modes) {
  std::vector<double> w(modes.frequencies.data(), modes.frequencies.data() + modes.frequencies.size());
  return 0.5 * neumaier_sum(w);
}

double zpv_difference(std::span<const double> ground, std::span<const double> excited) {
  if (ground.size() != excited.size())
    throw ValidationError("zpv_difference: spectra differ in length");
  std::vector<double> d(ground.size());
  for (std::size_t k = 0; k < ground.size(); ++k) d[k] = excited[k] - ground[k];
  return 0.5 * neumaier_sum(d);
}

double zpv_difference(const ModeSet& ground, const ModeSet& excited) {
  return zpv_difference(std::span<const double>(ground.frequencies.data(), ground.size()),
                        std::span<const double>(excited.frequencies.data(), excited.size()));
}

double zpl_shift_quasilocal(double ground_a2u, double ground_eu, double excited_a2u,
                            double excited_eu, double mass, double mass_other) {
  if (!(mass > 0.0) || !(mass_other > 0.0))
    throw ValidationError("zpl_shift_quasilocal: masses must be positive");
  for (double v : {ground_a2u, ground_eu, excited_a2u, excited_eu})
    if (!(v > 0.0)) throw ValidationError("zpl_shift_quasilocal: resonance energies must be positive");
  return 0.5 * (excited_a2u + 2.0 * excited_eu - ground_a2u - 2.0 * ground_eu) *
         (1.0 - std::sqrt(mass / mass_other));
}

}  // namespace qlvib
