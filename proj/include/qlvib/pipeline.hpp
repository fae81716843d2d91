#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qlvib/analysis.hpp"
#include "qlvib/embed.hpp"
#include "qlvib/force_model.hpp"

namespace qlvib {

/// Everything a batch run depends on. Serialized into the manifest.
struct RunConfig {
  double lattice_constant = kDiamondLatticeConstant;
  int small_n = 3;
  std::vector<int> cells{3, 4, 5, 6};
  std::vector<double> isotopes{28.0, 29.0, 30.0};
  /// "ground", "excited", or a path to a defect force-constant file for the
  /// small SiV cell (indices as produced by `build`).
  std::vector<std::string> states{"ground", "excited"};
  std::optional<std::filesystem::path> bulk_fc;
  EmbeddingRule rule;
  EnergyWindow window;
  double beta_threshold = kDefaultBetaThreshold;
  double degeneracy_tol = 1.0e-4;
  std::filesystem::path out = "qlvib-out";
  std::optional<std::filesystem::path> reference_data;
  int jobs = 0;  // 0: hardware concurrency
  bool deterministic = true;

  void validate() const;
};

nlohmann::json config_to_json(const RunConfig& c);
RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Source force constants for one state on the small cells.
struct SourceSet {
  std::shared_ptr<const Supercell> small_defect;
  std::shared_ptr<const Supercell> small_bulk;
  ForceConstants bulk;
  ForceConstants defect;
};
SourceSet load_sources(const RunConfig& config, const std::string& state);

/// One (cell, state, isotope) run.
struct CellRun {
  int n = 0;
  std::size_t atoms = 0;
  std::string state;
  double si_mass = 0.0;
  std::vector<ModeDescriptor> descriptors;
  std::vector<double> frequencies;  // full spectrum, meV, signed
  std::map<Irrep, ResonanceSummary> resonances;
  std::map<Irrep, double> median_beta;
  std::map<Irrep, std::optional<ModeDescriptor>> peak;  // most localized in window
  int fallback_clusters = 0;
};

CellRun run_cell(const RunConfig& config, const SourceSet& sources, int n, double si_mass,
                 const std::string& state);

struct ChannelSummary {
  std::string state;
  Irrep label = Irrep::A2u;
  std::vector<double> average_omega;   // per isotope, N-weighted over cells with a resonance
  std::vector<double> average_width;   // per isotope
  std::vector<double> naive_average;   // per isotope, N-weighted most-localized ω
  std::vector<IsotopeRatio> ratios;
  std::vector<double> naive_ratios;
};

struct AnalysisResult {
  RunConfig config;
  std::vector<CellRun> runs;
  std::vector<ChannelSummary> channels;
  std::optional<ZpvReport> zpv;                 // needs ground + excited
  std::map<int, std::vector<double>> zpv_per_cell;  // N -> per isotope
  std::vector<std::string> written;             // files relative to out
};

void cmd_build(const RunConfig& config);
AnalysisResult cmd_analyze(const RunConfig& config);
void cmd_report(const std::filesystem::path& analysis_dir,
                const std::optional<std::filesystem::path>& reference_data = std::nullopt);

/// `splice` / `diag` / `classify` on explicit files.
void cmd_splice(const std::filesystem::path& defect_cell, const std::filesystem::path& defect_fc,
                const std::filesystem::path& bulk_cell, const std::filesystem::path& bulk_fc,
                const std::filesystem::path& target_cell, const EmbeddingRule& rule,
                const std::filesystem::path& out);
void cmd_diag(const std::filesystem::path& cell, const std::filesystem::path& fc,
              const std::vector<double>& si_masses, bool dense, bool dump_vectors,
              const std::filesystem::path& out);
void cmd_classify(const std::filesystem::path& cell, const std::filesystem::path& fc,
                  double si_mass, bool dense, double degeneracy_tol,
                  const std::filesystem::path& out);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_string(const std::string& bytes);

/// "%.17g".
std::string fmt17(double v);

}  // namespace qlvib
