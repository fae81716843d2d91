#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "qlvib/error.hpp"
#include "qlvib/pipeline.hpp"

namespace {

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    std::istringstream is(item);
    T v;
    if (!(is >> v) || !(is >> std::ws).eof())
      throw qlvib::ValidationError(std::string("cannot parse ") + what + " '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw qlvib::ValidationError(std::string("empty ") + what + " list");
  return out;
}

struct RunFlags {
  std::string config;
  std::string cells, isotopes, window;
  std::vector<std::string> states;
  std::optional<double> beta_threshold;
  std::string out;
  std::optional<int> jobs;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON run configuration");
    app->add_option("--cells", cells, "comma-separated target N list, e.g. 3,4,5");
    app->add_option("--isotopes", isotopes, "comma-separated Si masses in amu");
    app->add_option("--state", states, "ground, excited, or a defect FC file (repeatable)")
        ->delimiter(',');
    app->add_option("--window", window, "energy window min,max in meV");
    app->add_option("--beta-threshold", beta_threshold, "localization threshold");
    app->add_option("--out", out, "output directory");
    app->add_option("--jobs", jobs, "parallel tasks (0 = all cores)");
  }

  qlvib::RunConfig resolve() const {
    qlvib::RunConfig c = config.empty() ? qlvib::RunConfig{} : qlvib::load_config(config);
    if (!cells.empty()) c.cells = parse_list<int>(cells, "cell");
    if (!isotopes.empty()) c.isotopes = parse_list<double>(isotopes, "isotope");
    if (!states.empty()) c.states = states;
    if (!window.empty()) {
      auto w = parse_list<double>(window, "window");
      if (w.size() != 2) throw qlvib::ValidationError("--window needs min,max");
      c.window = {w[0], w[1]};
    }
    if (beta_threshold) c.beta_threshold = *beta_threshold;
    if (!out.empty()) c.out = out;
    if (jobs) c.jobs = *jobs;
    c.validate();
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasi-local vibrational mode analysis of split-vacancy defects in diamond"};
  app.require_subcommand(1);

  RunFlags build_flags, analyze_flags;
  auto* build = app.add_subcommand("build", "write cells and spliced force constants");
  build_flags.attach(build);
  auto* analyze = app.add_subcommand("analyze", "run the full scan and write result tables");
  analyze_flags.attach(analyze);

  auto* report = app.add_subcommand("report", "summarize an analyze output directory");
  std::string report_dir = "qlvib-out", report_config, reference;
  report->add_option("--out", report_dir, "analysis directory");
  report->add_option("--config", report_config, "run configuration (its out directory is used)");
  report->add_option("--reference", reference, "reference data file");

  auto* splice = app.add_subcommand("splice", "embed small-cell force constants into a target cell");
  std::string sp_dcell, sp_dfc, sp_bcell, sp_bfc, sp_target, sp_out;
  qlvib::EmbeddingRule sp_rule;
  splice->add_option("--defect-cell", sp_dcell)->required();
  splice->add_option("--defect-fc", sp_dfc)->required();
  splice->add_option("--bulk-cell", sp_bcell)->required();
  splice->add_option("--bulk-fc", sp_bfc)->required();
  splice->add_option("--target-cell", sp_target)->required();
  splice->add_option("--r-zero", sp_rule.r_zero, "pair cutoff in Angstrom");
  splice->add_option("--r-defect", sp_rule.r_defect, "defect radius in Angstrom");
  splice->add_option("--out", sp_out, "output FC file")->required();

  auto* diag = app.add_subcommand("diag", "full phonon spectrum of one cell");
  std::string dg_cell, dg_fc, dg_iso, dg_out = "qlvib-diag";
  bool dg_dense = false, dg_vectors = false;
  diag->add_option("--cell", dg_cell)->required();
  diag->add_option("--fc", dg_fc)->required();
  diag->add_option("--isotopes", dg_iso, "comma-separated Si masses");
  diag->add_flag("--dense", dg_dense, "dense diagonalization instead of symmetry blocks");
  diag->add_flag("--vectors", dg_vectors, "also write binary eigenvectors");
  diag->add_option("--out", dg_out, "output directory");

  auto* classify = app.add_subcommand("classify", "irrep labels for every mode of a SiV cell");
  std::string cl_cell, cl_fc, cl_out = "classification.tsv";
  double cl_mass = 28.0, cl_tol = 1.0e-4;
  bool cl_dense = false;
  classify->add_option("--cell", cl_cell)->required();
  classify->add_option("--fc", cl_fc)->required();
  classify->add_option("--isotope", cl_mass, "Si mass in amu");
  classify->add_option("--degeneracy-tol", cl_tol, "meV");
  classify->add_flag("--dense", cl_dense, "dense solve + projector classification");
  classify->add_option("--out", cl_out, "output table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*build) {
      qlvib::cmd_build(build_flags.resolve());
    } else if (*analyze) {
      const auto result = qlvib::cmd_analyze(analyze_flags.resolve());
      std::cout << "wrote " << result.written.size() << " files to " << result.config.out.string()
                << '\n';
    } else if (*report) {
      std::filesystem::path dir = report_dir;
      if (!report_config.empty()) dir = qlvib::load_config(report_config).out;
      qlvib::cmd_report(dir, reference.empty() ? std::nullopt
                                               : std::optional<std::filesystem::path>(reference));
      std::cout << "wrote " << (dir / "report.txt").string() << '\n';
    } else if (*splice) {
      qlvib::cmd_splice(sp_dcell, sp_dfc, sp_bcell, sp_bfc, sp_target, sp_rule, sp_out);
    } else if (*diag) {
      std::vector<double> masses;
      if (!dg_iso.empty()) masses = parse_list<double>(dg_iso, "isotope");
      qlvib::cmd_diag(dg_cell, dg_fc, masses, dg_dense, dg_vectors, dg_out);
    } else if (*classify) {
      qlvib::cmd_classify(cl_cell, cl_fc, cl_mass, cl_dense, cl_tol, cl_out);
    }
  } catch (const qlvib::Error& e) {
    std::cerr << "qlvib: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "qlvib: internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
