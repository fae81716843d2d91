#include "qlvib/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "qlvib/error.hpp"
#include "qlvib/modes.hpp"
#include "qlvib/symmetry.hpp"

#ifndef QLVIB_DATA_DIR
#define QLVIB_DATA_DIR "data"
#endif

namespace qlvib {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string to_hex(const unsigned char* p, unsigned n) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < n; ++i) {
    s += digits[p[i] >> 4];
    s += digits[p[i] & 15];
  }
  return s;
}

// Rethrows a library error with the stage name prepended, preserving its kind.
template <class F>
auto staged(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), stage + ": " + e.what());
  } catch (const std::bad_alloc&) {
    throw NumericalError(stage + ": out of memory");
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_dir(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string mass_tag(double m) {
  std::ostringstream s;
  s << m;
  return s.str();
}

bool is_preset(const std::string& s) { return s == "ground" || s == "excited"; }

std::string state_tag(const std::string& s) {
  return is_preset(s) ? s : fs::path(s).stem().string();
}

std::string cell_tag(const std::string& state, int n, double mass) {
  return state_tag(state) + "_N" + std::to_string(n) + "_m" + mass_tag(mass);
}

// Runs every task; with more than one job, tasks are pulled from a shared
// counter. The first error (by task index) is rethrown after all finish.
void run_tasks(std::size_t count, int jobs, const std::function<void(std::size_t)>& task) {
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
  std::vector<std::exception_ptr> errors(count);
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            task(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

int effective_jobs(const RunConfig& c) {
  if (c.jobs > 0) return c.jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

std::string sha256_string(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned n = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &n, EVP_sha256(), nullptr) != 1)
    throw NumericalError("sha256 failed");
  return to_hex(md, n);
}

std::string sha256_file(const fs::path& path) { return sha256_string(read_text(path)); }

// ---------------------------------------------------------------- config

void RunConfig::validate() const {
  if (!(lattice_constant > 0.0) || !std::isfinite(lattice_constant))
    throw ValidationError("lattice_constant must be positive");
  auto check_n = [](int n, const char* what) {
    if (n < 2 || n > 8)
      throw ValidationError(std::string(what) + " N=" + std::to_string(n) + " outside 2..8");
  };
  check_n(small_n, "small cell");
  if (cells.empty()) throw ValidationError("cells list is empty");
  std::set<int> seen_n;
  for (int n : cells) {
    check_n(n, "target cell");
    if (n < small_n)
      throw ValidationError("target cell N=" + std::to_string(n) + " smaller than small cell");
    if (!seen_n.insert(n).second) throw ValidationError("duplicate cell N=" + std::to_string(n));
  }
  if (isotopes.empty()) throw ValidationError("isotope list is empty");
  std::set<double> seen_m;
  for (double m : isotopes) {
    if (!(m > 0.0) || !std::isfinite(m)) throw ValidationError("isotope masses must be positive");
    if (!seen_m.insert(m).second) throw ValidationError("duplicate isotope " + mass_tag(m));
  }
  if (states.empty()) throw ValidationError("state list is empty");
  std::set<std::string> seen_s;
  for (const auto& s : states) {
    if (!is_preset(s) && !fs::is_regular_file(s))
      throw ValidationError("state '" + s + "' is neither a preset nor an existing file");
    if (!seen_s.insert(state_tag(s)).second) throw ValidationError("duplicate state " + s);
  }
  if (bulk_fc && !fs::is_regular_file(*bulk_fc))
    throw ValidationError("bulk force-constant file not found: " + bulk_fc->string());
  if (reference_data && !fs::is_regular_file(*reference_data))
    throw ValidationError("reference data file not found: " + reference_data->string());
  rule.validate();
  if (!std::isfinite(window.min) || !std::isfinite(window.max) || window.min < 0.0 ||
      !(window.min < window.max))
    throw ValidationError("window must satisfy 0 <= min < max");
  if (!(beta_threshold > 0.0) || !std::isfinite(beta_threshold))
    throw ValidationError("beta_threshold must be positive");
  if (!(degeneracy_tol > 0.0)) throw ValidationError("degeneracy_tol must be positive");
  if (jobs < 0) throw ValidationError("jobs must be >= 0");
  if (!deterministic) throw ValidationError("deterministic must be true");
}

json config_to_json(const RunConfig& c) {
  json j;
  j["lattice_constant"] = c.lattice_constant;
  j["small_n"] = c.small_n;
  j["cells"] = c.cells;
  j["isotopes"] = c.isotopes;
  j["states"] = c.states;
  j["bulk_fc"] = c.bulk_fc ? json(c.bulk_fc->string()) : json(nullptr);
  j["embedding"] = {{"r_zero", c.rule.r_zero}, {"r_defect", c.rule.r_defect}};
  j["window"] = {c.window.min, c.window.max};
  j["beta_threshold"] = c.beta_threshold;
  j["degeneracy_tol"] = c.degeneracy_tol;
  j["out"] = c.out.string();
  j["reference_data"] = c.reference_data ? json(c.reference_data->string()) : json(nullptr);
  j["jobs"] = c.jobs;
  j["deterministic"] = c.deterministic;
  return j;
}

RunConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  static const std::set<std::string> known{
      "lattice_constant", "small_n", "cells", "isotopes", "states", "bulk_fc", "embedding",
      "window", "beta_threshold", "degeneracy_tol", "out", "reference_data", "jobs",
      "deterministic"};
  for (const auto& [key, _] : doc.items())
    if (!known.count(key)) throw ValidationError("unknown config key '" + key + "'");
  RunConfig c;
  try {
    if (doc.contains("lattice_constant")) c.lattice_constant = doc.at("lattice_constant").get<double>();
    if (doc.contains("small_n")) c.small_n = doc.at("small_n").get<int>();
    if (doc.contains("cells")) c.cells = doc.at("cells").get<std::vector<int>>();
    if (doc.contains("isotopes")) c.isotopes = doc.at("isotopes").get<std::vector<double>>();
    if (doc.contains("states")) c.states = doc.at("states").get<std::vector<std::string>>();
    if (doc.contains("bulk_fc") && !doc.at("bulk_fc").is_null())
      c.bulk_fc = doc.at("bulk_fc").get<std::string>();
    if (doc.contains("embedding")) {
      const auto& e = doc.at("embedding");
      if (e.contains("r_zero")) c.rule.r_zero = e.at("r_zero").get<double>();
      if (e.contains("r_defect")) c.rule.r_defect = e.at("r_defect").get<double>();
    }
    if (doc.contains("window")) {
      auto w = doc.at("window").get<std::vector<double>>();
      if (w.size() != 2) throw ValidationError("window needs two numbers");
      c.window = {w[0], w[1]};
    }
    if (doc.contains("beta_threshold")) c.beta_threshold = doc.at("beta_threshold").get<double>();
    if (doc.contains("degeneracy_tol")) c.degeneracy_tol = doc.at("degeneracy_tol").get<double>();
    if (doc.contains("out")) c.out = doc.at("out").get<std::string>();
    if (doc.contains("reference_data") && !doc.at("reference_data").is_null())
      c.reference_data = doc.at("reference_data").get<std::string>();
    if (doc.contains("jobs")) c.jobs = doc.at("jobs").get<int>();
    if (doc.contains("deterministic")) c.deterministic = doc.at("deterministic").get<bool>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  RunConfig c = config_from_json(doc);
  // Relative file references resolve against the config's directory.
  const fs::path base = path.parent_path();
  auto rebase = [&](fs::path p) { return p.is_relative() && !base.empty() ? base / p : p; };
  for (auto& s : c.states)
    if (!is_preset(s)) s = rebase(s).string();
  if (c.bulk_fc) c.bulk_fc = rebase(*c.bulk_fc);
  if (c.reference_data) c.reference_data = rebase(*c.reference_data);
  return c;
}

// ---------------------------------------------------------------- stages

SourceSet load_sources(const RunConfig& config, const std::string& state) {
  return staged("sources[" + state_tag(state) + "]", [&] {
    auto pristine = build_diamond_supercell(config.small_n, config.lattice_constant);
    auto small_defect = std::make_shared<const Supercell>(make_siv_defect(pristine));
    auto small_bulk = std::make_shared<const Supercell>(std::move(pristine));
    ForceConstants bulk =
        config.bulk_fc ? read_force_constants(*config.bulk_fc, small_bulk)
                       : model_force_constants(small_bulk, ForceModelParams::ground());
    ForceConstants defect =
        is_preset(state) ? model_force_constants(small_defect,
                                                 ForceModelParams::preset(state_from_name(state)))
                         : read_force_constants(fs::path(state), small_defect);
    return SourceSet{small_defect, small_bulk, std::move(bulk), std::move(defect)};
  });
}

namespace {

std::map<Irrep, ResonanceSummary> all_resonances(const std::vector<ModeDescriptor>& d,
                                                 const RunConfig& c) {
  std::map<Irrep, ResonanceSummary> out;
  for (Irrep r : kAllIrreps) out[r] = resonance(d, r, c.window, c.beta_threshold);
  return out;
}

}  // namespace

CellRun run_cell(const RunConfig& config, const SourceSet& sources, int n, double si_mass,
                 const std::string& state) {
  const std::string tag = cell_tag(state, n, si_mass);
  auto target = staged("build[" + tag + "]", [&] {
    return std::make_shared<const Supercell>(
        make_siv_defect(build_diamond_supercell(n, config.lattice_constant), si_mass));
  });
  auto fc = staged("splice[" + tag + "]",
                   [&] { return splice(sources.defect, sources.bulk, target, config.rule); });
  auto group = staged("symmetry[" + tag + "]", [&] { return build_d3d_ops(*target); });
  auto labeled = staged("modes[" + tag + "]", [&] {
    return solve_symmetrized(fc, MassTable::with_silicon(*target, si_mass), group,
                             state_tag(state), config.degeneracy_tol);
  });
  return staged("analysis[" + tag + "]", [&] {
    CellRun run;
    run.n = n;
    run.atoms = target->size();
    run.state = state;
    run.si_mass = si_mass;
    run.descriptors = describe_modes(labeled);
    run.frequencies.assign(labeled.modes.frequencies.data(),
                           labeled.modes.frequencies.data() + labeled.modes.frequencies.size());
    run.resonances = all_resonances(run.descriptors, config);
    for (Irrep r : kAllIrreps) {
      run.median_beta[r] = channel_median_beta(run.descriptors, r);
      run.peak[r] = most_localized(run.descriptors, r, config.window);
    }
    run.fallback_clusters = labeled.fallback_clusters;
    return run;
  });
}

// ---------------------------------------------------------------- build

namespace {

struct Manifest {
  json inputs;
  std::vector<std::pair<std::string, std::string>> files;  // relative path, sha256

  void add(const fs::path& root, const fs::path& rel) {
    files.emplace_back(rel.generic_string(), sha256_file(root / rel));
  }
  void write(const fs::path& root, const std::string& command) const {
    json j;
    j["format"] = "qlvib-manifest-1";
    j["command"] = command;
    j["inputs"] = inputs;
    json f = json::object();
    for (const auto& [p, h] : files) f[p] = h;
    j["outputs"] = f;
    write_text(root / "manifest.json", j.dump(1) + "\n");
  }
};

json input_hashes(const RunConfig& c) {
  json j = json::object();
  for (const auto& s : c.states)
    if (!is_preset(s)) j[s] = sha256_file(s);
  if (c.bulk_fc) j[c.bulk_fc->string()] = sha256_file(*c.bulk_fc);
  return j;
}

json manifest_inputs(const RunConfig& c) {
  json j = config_to_json(c);
  j.erase("out");
  j.erase("jobs");
  j["file_hashes"] = input_hashes(c);
  for (auto st : {ElectronicState::Ground, ElectronicState::Excited}) {
    const auto p = ForceModelParams::preset(st);
    j["presets"][state_name(st)] = {{"k_stretch", p.k_stretch},
                                    {"k_bend", p.k_bend},
                                    {"defect_scale", p.defect_scale}};
  }
  return j;
}

}  // namespace

void cmd_build(const RunConfig& config) {
  config.validate();
  const fs::path root = config.out;
  ensure_dir(root);
  Manifest manifest;
  manifest.inputs = manifest_inputs(config);

  const int ns = config.small_n;
  std::vector<std::pair<fs::path, std::function<void(const fs::path&)>>> jobs;

  auto sources_keep = std::make_shared<std::vector<SourceSet>>();
  for (const auto& s : config.states) sources_keep->push_back(load_sources(config, s));
  const SourceSet& first = sources_keep->front();

  const fs::path small_bulk_cell = "cells/bulk_N" + std::to_string(ns) + ".json";
  const fs::path small_defect_cell = "cells/siv_N" + std::to_string(ns) + ".json";
  const fs::path small_bulk_fc = "fc/bulk_N" + std::to_string(ns) + ".fc";
  ensure_dir(root / "cells");
  ensure_dir(root / "fc");
  staged("build", [&] {
    write_supercell(*first.small_bulk, root / small_bulk_cell);
    write_supercell(*first.small_defect, root / small_defect_cell);
    write_force_constants(first.bulk, root / small_bulk_fc);
  });
  manifest.add(root, small_bulk_cell);
  manifest.add(root, small_defect_cell);
  manifest.add(root, small_bulk_fc);
  for (std::size_t k = 0; k < config.states.size(); ++k) {
    const fs::path rel = "fc/" + state_tag(config.states[k]) + "_siv_N" + std::to_string(ns) + ".fc";
    staged("build", [&] { write_force_constants((*sources_keep)[k].defect, root / rel); });
    manifest.add(root, rel);
  }

  std::vector<std::pair<int, std::size_t>> tasks;  // (N, state index)
  for (int n : config.cells)
    for (std::size_t k = 0; k < config.states.size(); ++k) tasks.emplace_back(n, k);
  std::vector<std::vector<fs::path>> written(tasks.size());
  run_tasks(tasks.size(), effective_jobs(config), [&](std::size_t t) {
    const auto [n, k] = tasks[t];
    const std::string stag = state_tag(config.states[k]);
    const std::string tag = stag + "_N" + std::to_string(n);
    staged("build[" + tag + "]", [&] {
      auto target = std::make_shared<const Supercell>(
          make_siv_defect(build_diamond_supercell(n, config.lattice_constant)));
      const fs::path cell_rel = "cells/siv_N" + std::to_string(n) + ".json";
      if (k == 0) {
        write_supercell(*target, root / cell_rel);
        written[t].push_back(cell_rel);
      }
      auto fc = splice((*sources_keep)[k].defect, (*sources_keep)[k].bulk, target, config.rule);
      const fs::path fc_rel = "fc/" + tag + ".fc";
      write_force_constants(fc, root / fc_rel);
      written[t].push_back(fc_rel);
    });
  });
  for (const auto& w : written)
    for (const auto& p : w) manifest.add(root, p);
  manifest.write(root, "build");
}

// ---------------------------------------------------------------- analyze

namespace {

std::string resonance_header() {
  return "# state\tN\tatoms\tsi_mass\tirrep\tstatus\tn_modes\tomega_mev\twidth_mev\tmax_beta\t"
         "median_beta\n";
}

std::string resonance_row(const CellRun& run, Irrep r) {
  const auto& res = run.resonances.at(r);
  std::ostringstream s;
  s << state_tag(run.state) << '\t' << run.n << '\t' << run.atoms << '\t' << fmt17(run.si_mass)
    << '\t' << irrep_name(r) << '\t';
  if (res.found())
    s << "ok\t" << res.contributing.size() << '\t' << fmt17(res.omega) << '\t' << fmt17(res.width)
      << '\t' << fmt17(res.max_beta());
  else
    s << "no resonance\t0\tnan\tnan\tnan";
  s << '\t' << fmt17(run.median_beta.at(r)) << '\n';
  return s.str();
}

std::string beta_table(const CellRun& run) {
  std::ostringstream s;
  s << "# state " << state_tag(run.state) << " N " << run.n << " atoms " << run.atoms
    << " si_mass " << fmt17(run.si_mass) << '\n';
  s << "# index\tomega_mev\tirrep\tipr\tbeta\n";
  for (const auto& d : run.descriptors)
    s << d.index << '\t' << fmt17(d.omega) << '\t' << irrep_name(d.label) << '\t' << fmt17(d.ipr)
      << '\t' << fmt17(d.beta) << '\n';
  return s.str();
}

json resonance_json(const ResonanceSummary& r) {
  json j;
  j["found"] = r.found();
  j["n_modes"] = r.contributing.size();
  if (r.found()) {
    j["omega"] = r.omega;
    j["width"] = r.width;
    j["max_beta"] = r.max_beta();
  } else {
    j["omega"] = nullptr;
    j["width"] = nullptr;
    j["max_beta"] = nullptr;
  }
  return j;
}

}  // namespace

AnalysisResult cmd_analyze(const RunConfig& config) {
  config.validate();
  AnalysisResult result;
  result.config = config;
  const fs::path root = config.out;
  ensure_dir(root / "beta");

  std::vector<SourceSet> sources;
  for (const auto& s : config.states) sources.push_back(load_sources(config, s));

  struct Task {
    int n;
    std::size_t state;
    std::size_t iso;
  };
  std::vector<Task> tasks;
  for (std::size_t k = 0; k < config.states.size(); ++k)
    for (int n : config.cells)
      for (std::size_t m = 0; m < config.isotopes.size(); ++m) tasks.push_back({n, k, m});
  result.runs.resize(tasks.size());
  run_tasks(tasks.size(), effective_jobs(config), [&](std::size_t t) {
    const auto& task = tasks[t];
    result.runs[t] = run_cell(config, sources[task.state], task.n, config.isotopes[task.iso],
                             config.states[task.state]);
    const fs::path rel = fs::path("beta") /
                         (cell_tag(config.states[task.state], task.n, config.isotopes[task.iso]) +
                          ".tsv");
    write_text(root / rel, beta_table(result.runs[t]));
  });

  auto find_run = [&](std::size_t k, int n, std::size_t m) -> const CellRun& {
    for (std::size_t t = 0; t < tasks.size(); ++t)
      if (tasks[t].state == k && tasks[t].n == n && tasks[t].iso == m) return result.runs[t];
    throw ValidationError("missing run");
  };

  return staged("summary", [&] {
    std::vector<std::string> written;
    for (const auto& t : tasks)
      written.push_back(
          (fs::path("beta") / (cell_tag(config.states[t.state], t.n, config.isotopes[t.iso]) + ".tsv"))
              .generic_string());

    // Resonance rows.
    std::string rows = resonance_header();
    for (const auto& run : result.runs)
      for (Irrep r : kAllIrreps) rows += resonance_row(run, r);
    write_text(root / "resonances.tsv", rows);
    written.push_back("resonances.tsv");

    // Isotope table per state: a2u and eu rows per cell plus an average row.
    const bool multi_cell = config.cells.size() > 1;
    std::ostringstream iso;
    iso << "# state\tirrep\tcell\tatoms";
    for (double m : config.isotopes) iso << "\tomega_m" << mass_tag(m);
    iso << "\twidth_m" << mass_tag(config.isotopes.front()) << '\n';
    for (std::size_t k = 0; k < config.states.size(); ++k) {
      for (Irrep r : {Irrep::A2u, Irrep::Eu}) {
        ChannelSummary ch;
        ch.state = state_tag(config.states[k]);
        ch.label = r;
        std::vector<std::vector<CellValue>> om(config.isotopes.size()), wd(config.isotopes.size()),
            nv(config.isotopes.size());
        for (int n : config.cells) {
          iso << ch.state << '\t' << irrep_name(r) << '\t' << n << '\t'
              << find_run(k, n, 0).atoms;
          if (find_run(k, n, 0).peak.at(r)) {
            std::vector<std::vector<ModeDescriptor>> others;
            for (std::size_t m = 1; m < config.isotopes.size(); ++m)
              others.push_back(find_run(k, n, m).descriptors);
            const auto tracked = tracked_peak(find_run(k, n, 0).descriptors, others, r, config.window);
            for (std::size_t m = 0; m < tracked.size(); ++m) nv[m].push_back({n, tracked[m].omega});
          }
          for (std::size_t m = 0; m < config.isotopes.size(); ++m) {
            const auto& run = find_run(k, n, m);
            const auto& res = run.resonances.at(r);
            iso << '\t' << (res.found() ? fmt17(res.omega) : std::string("nan"));
            if (res.found()) {
              om[m].push_back({n, res.omega});
              wd[m].push_back({n, res.width});
            }
          }
          const auto& r0 = find_run(k, n, 0).resonances.at(r);
          iso << '\t' << (r0.found() ? fmt17(r0.width) : std::string("nan")) << '\n';
        }
        bool complete = true;
        for (std::size_t m = 0; m < config.isotopes.size(); ++m) {
          complete = complete && om[m].size() == config.cells.size() &&
                     nv[m].size() == config.cells.size();
          ch.average_omega.push_back(om[m].empty() ? std::nan("") : cross_cell_average(om[m]));
          ch.average_width.push_back(wd[m].empty() ? std::nan("") : cross_cell_average(wd[m]));
          ch.naive_average.push_back(nv[m].empty() ? std::nan("") : cross_cell_average(nv[m]));
        }
        if (multi_cell) {
          iso << ch.state << '\t' << irrep_name(r) << "\taverage\t-";
          for (double v : ch.average_omega) iso << '\t' << fmt17(v);
          iso << '\t' << fmt17(ch.average_width.front()) << '\n';
        }
        if (complete && config.isotopes.size() > 1) {
          ch.ratios = isotope_ratios(ch.average_omega, config.isotopes);
          for (std::size_t m = 1; m < config.isotopes.size(); ++m)
            ch.naive_ratios.push_back(ch.naive_average[0] / ch.naive_average[m]);
        }
        result.channels.push_back(std::move(ch));
      }
    }
    write_text(root / "isotope_table.tsv", iso.str());
    written.push_back("isotope_table.tsv");

    std::ostringstream ratios;
    ratios << "# state\tirrep\tmass_ref\tmass_other\tratio\tideal\tdeviation\tnaive_ratio\n";
    for (const auto& ch : result.channels)
      for (std::size_t q = 0; q < ch.ratios.size(); ++q) {
        const auto& r = ch.ratios[q];
        ratios << ch.state << '\t' << irrep_name(ch.label) << '\t' << fmt17(r.mass_ref) << '\t'
               << fmt17(r.mass_other) << '\t' << fmt17(r.ratio) << '\t' << fmt17(r.ideal) << '\t'
               << fmt17(r.deviation) << '\t' << fmt17(ch.naive_ratios[q]) << '\n';
      }
    write_text(root / "isotope_ratios.tsv", ratios.str());
    written.push_back("isotope_ratios.tsv");

    // Zero-point report: needs both presets.
    std::optional<std::size_t> g, e;
    for (std::size_t k = 0; k < config.states.size(); ++k) {
      if (state_tag(config.states[k]) == "ground") g = k;
      if (state_tag(config.states[k]) == "excited") e = k;
    }
    if (g && e) {
      std::ostringstream z;
      z << "# N\tsi_mass\tzpv_mev\tshift_mev\n";
      for (int n : config.cells) {
        std::vector<double> per;
        for (std::size_t m = 0; m < config.isotopes.size(); ++m)
          per.push_back(zpv_difference(find_run(*g, n, m).frequencies, find_run(*e, n, m).frequencies));
        result.zpv_per_cell[n] = per;
        for (std::size_t m = 0; m < per.size(); ++m)
          z << n << '\t' << fmt17(config.isotopes[m]) << '\t' << fmt17(per[m]) << '\t'
            << (m == 0 ? std::string("0") : fmt17(per[0] - per[m])) << '\n';
      }
      // Summary from the largest cell plus the quasi-local estimate from
      // cross-cell averaged resonances.
      const int nmax = *std::max_element(config.cells.begin(), config.cells.end());
      ZpvReport rep;
      rep.masses = config.isotopes;
      rep.zpv = result.zpv_per_cell[nmax];
      for (std::size_t m = 1; m < rep.zpv.size(); ++m) rep.shift.push_back(rep.zpv[0] - rep.zpv[m]);
      auto avg = [&](const std::string& s, Irrep r) {
        for (const auto& ch : result.channels)
          if (ch.state == s && ch.label == r) return ch.average_omega[0];
        return std::nan("");
      };
      for (std::size_t m = 1; m < rep.zpv.size(); ++m) {
        const double ga = avg("ground", Irrep::A2u), ge = avg("ground", Irrep::Eu);
        const double ea = avg("excited", Irrep::A2u), ee = avg("excited", Irrep::Eu);
        const bool ok = std::isfinite(ga) && std::isfinite(ge) && std::isfinite(ea) && std::isfinite(ee);
        rep.quasilocal.push_back(ok ? zpl_shift_quasilocal(ga, ge, ea, ee, config.isotopes[0],
                                                           config.isotopes[m])
                                    : std::nan(""));
      }
      z << "# summary N=" << nmax << '\n';
      z << "# si_mass\tzpv_mev\tshift_mev\tquasilocal_shift_mev\n";
      for (std::size_t m = 0; m < rep.zpv.size(); ++m)
        z << "#\t" << fmt17(rep.masses[m]) << '\t' << fmt17(rep.zpv[m]) << '\t'
          << (m == 0 ? std::string("0") : fmt17(rep.shift[m - 1])) << '\t'
          << (m == 0 ? std::string("0") : fmt17(rep.quasilocal[m - 1])) << '\n';
      result.zpv = rep;
      write_text(root / "zpv.tsv", z.str());
      written.push_back("zpv.tsv");
    }

    // Machine-readable summary.
    json doc;
    doc["format"] = "qlvib-results-1";
    doc["config"] = manifest_inputs(config);
    json runs = json::array();
    for (const auto& run : result.runs) {
      json jr;
      jr["state"] = state_tag(run.state);
      jr["n"] = run.n;
      jr["atoms"] = run.atoms;
      jr["si_mass"] = run.si_mass;
      jr["beta_table"] = (fs::path("beta") / (cell_tag(run.state, run.n, run.si_mass) + ".tsv")).generic_string();
      jr["fallback_clusters"] = run.fallback_clusters;
      json ch = json::object();
      for (Irrep r : kAllIrreps) {
        json c = resonance_json(run.resonances.at(r));
        c["median_beta"] = run.median_beta.at(r);
        const auto& p = run.peak.at(r);
        c["peak"] = p ? json{{"index", p->index}, {"omega", p->omega}, {"beta", p->beta}} : json(nullptr);
        ch[irrep_name(r)] = c;
      }
      jr["channels"] = ch;
      runs.push_back(jr);
    }
    doc["runs"] = runs;
    json chs = json::array();
    for (const auto& ch : result.channels) {
      json c;
      c["state"] = ch.state;
      c["irrep"] = irrep_name(ch.label);
      auto nums = [](const std::vector<double>& v) {
        json a = json::array();
        for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
        return a;
      };
      c["average_omega"] = nums(ch.average_omega);
      c["average_width"] = nums(ch.average_width);
      c["naive_average"] = nums(ch.naive_average);
      json rs = json::array();
      for (std::size_t q = 0; q < ch.ratios.size(); ++q)
        rs.push_back({{"mass_ref", ch.ratios[q].mass_ref},
                      {"mass_other", ch.ratios[q].mass_other},
                      {"ratio", ch.ratios[q].ratio},
                      {"ideal", ch.ratios[q].ideal},
                      {"deviation", ch.ratios[q].deviation},
                      {"naive_ratio", ch.naive_ratios[q]}});
      c["ratios"] = rs;
      chs.push_back(c);
    }
    doc["channels"] = chs;
    if (result.zpv) {
      const auto& z = *result.zpv;
      doc["zpv"] = {{"masses", z.masses}, {"zpv", z.zpv}, {"shift", z.shift}};
      json q = json::array();
      for (double v : z.quasilocal) q.push_back(std::isfinite(v) ? json(v) : json(nullptr));
      doc["zpv"]["quasilocal"] = q;
    } else {
      doc["zpv"] = nullptr;
    }
    write_text(root / "results.json", doc.dump(1) + "\n");
    written.push_back("results.json");

    Manifest manifest;
    manifest.inputs = manifest_inputs(config);
    for (const auto& w : written) manifest.add(root, w);
    manifest.write(root, "analyze");
    result.written = written;
    return std::move(result);
  });
}

// ---------------------------------------------------------------- report

namespace {

struct BetaRow {
  double omega;
  std::string irrep;
  double beta;
};

std::vector<BetaRow> read_beta_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing beta table " + path.string());
  std::vector<BetaRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream s(line);
    std::size_t idx;
    BetaRow r;
    double ipr_v;
    if (!(s >> idx >> r.omega >> r.irrep >> ipr_v >> r.beta))
      throw ValidationError("malformed beta table line in " + path.string());
    rows.push_back(r);
  }
  return rows;
}

std::string value_or_nan(const json& v) {
  return v.is_number() ? fmt17(v.get<double>()) : std::string("nan");
}

}  // namespace

void cmd_report(const fs::path& dir, const std::optional<fs::path>& reference_path) {
  const fs::path results = dir / "results.json";
  if (!fs::is_regular_file(results))
    throw IoError("report: no analysis outputs in " + dir.string() + " (results.json missing)");
  json doc;
  try {
    doc = json::parse(read_text(results));
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("report: results.json: ") + e.what());
  }
  ensure_dir(dir / "scatter");
  std::vector<std::string> written;
  std::ostringstream rep;
  rep << "qlvib report\n============\n\n";

  rep << "Resonances (beta-weighted, window " << value_or_nan(doc["config"]["window"][0]) << ".."
      << value_or_nan(doc["config"]["window"][1]) << " meV, beta > "
      << value_or_nan(doc["config"]["beta_threshold"]) << ")\n";
  rep << "state\tN\tsi_mass\tirrep\tomega_mev\twidth_mev\tmax_beta\tmedian_beta\n";
  for (const auto& run : doc.at("runs")) {
    const auto table = read_beta_table(dir / run.at("beta_table").get<std::string>());
    const std::string stem = fs::path(run.at("beta_table").get<std::string>()).stem().string();
    for (Irrep label : kAllIrreps) {
      const std::string irrep = irrep_name(label);
      const auto& ch = run.at("channels").at(irrep);
      rep << run.at("state").get<std::string>() << '\t' << run.at("n").get<int>() << '\t'
          << value_or_nan(run.at("si_mass")) << '\t' << irrep << '\t';
      if (ch.at("found").get<bool>())
        rep << value_or_nan(ch.at("omega")) << '\t' << value_or_nan(ch.at("width")) << '\t'
            << value_or_nan(ch.at("max_beta"));
      else
        rep << "no resonance\t-\t-";
      rep << '\t' << value_or_nan(ch.at("median_beta")) << '\n';

      std::ostringstream sc;
      sc << "# channel " << irrep << " " << stem << '\n';
      sc << "# x: omega_mev (linear)\n# y: beta (log scale)\n";
      sc << "# omega_mev\tbeta\n";
      for (const auto& row : table)
        if (row.irrep == irrep) sc << fmt17(row.omega) << '\t' << fmt17(row.beta) << '\n';
      const fs::path rel = fs::path("scatter") / (stem + "_" + irrep + ".tsv");
      write_text(dir / rel, sc.str());
      written.push_back(rel.generic_string());
    }
  }

  rep << "\nIsotope ratios (cross-cell averaged)\n";
  rep << "state\tirrep\tmass_ref\tmass_other\tratio\tideal\tdeviation_from_ideal\tnaive_ratio\n";
  for (const auto& ch : doc.at("channels"))
    for (const auto& r : ch.at("ratios"))
      rep << ch.at("state").get<std::string>() << '\t' << ch.at("irrep").get<std::string>() << '\t'
          << value_or_nan(r.at("mass_ref")) << '\t' << value_or_nan(r.at("mass_other")) << '\t'
          << value_or_nan(r.at("ratio")) << '\t' << value_or_nan(r.at("ideal")) << '\t'
          << value_or_nan(r.at("deviation")) << '\t' << value_or_nan(r.at("naive_ratio")) << '\n';

  if (!doc.at("zpv").is_null()) {
    const auto& z = doc.at("zpv");
    rep << "\nZero-point vibration (excited - ground)\n";
    rep << "si_mass\tzpv_mev\tshift_mev\tquasilocal_shift_mev\n";
    for (std::size_t m = 0; m < z.at("masses").size(); ++m)
      rep << value_or_nan(z["masses"][m]) << '\t' << value_or_nan(z["zpv"][m]) << '\t'
          << (m == 0 ? std::string("0") : value_or_nan(z["shift"][m - 1])) << '\t'
          << (m == 0 ? std::string("0") : value_or_nan(z["quasilocal"][m - 1])) << '\n';
  }

  // Published reference values, printed next to the computed ones.
  fs::path ref = reference_path ? *reference_path : fs::path(QLVIB_DATA_DIR) / "reference_data.json";
  if (!reference_path && doc["config"].contains("reference_data") &&
      doc["config"]["reference_data"].is_string())
    ref = doc["config"]["reference_data"].get<std::string>();
  if (fs::is_regular_file(ref)) {
    json refs;
    try {
      refs = json::parse(read_text(ref));
    } catch (const json::parse_error& e) {
      throw ValidationError("reference data " + ref.string() + ": " + e.what());
    }
    rep << "\nComparison with published reference values (reference, not model output)\n";
    rep << "quantity\tcomputed\treference\treference_source\n";
    auto computed = [&](const std::string& key) -> std::string {
      // key: "<state>.<irrep>.omega.<k>" | "zpv.<k>" | "zpv_shift.<k>" | "quasilocal.<k>"
      std::vector<std::string> parts;
      std::stringstream ss(key);
      for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
      try {
        if (parts.size() == 4 && parts[2] == "omega") {
          for (const auto& ch : doc.at("channels"))
            if (ch.at("state") == parts[0] && ch.at("irrep") == parts[1])
              return value_or_nan(ch.at("average_omega").at(std::stoul(parts[3])));
        } else if (parts.size() == 4 && parts[2] == "ratio") {
          for (const auto& ch : doc.at("channels"))
            if (ch.at("state") == parts[0] && ch.at("irrep") == parts[1])
              return value_or_nan(ch.at("ratios").at(std::stoul(parts[3])).at("ratio"));
        } else if (parts.size() == 2 && !doc.at("zpv").is_null()) {
          const auto& z = doc.at("zpv");
          const auto k = std::stoul(parts[1]);
          if (parts[0] == "zpv") return value_or_nan(z.at("zpv").at(k));
          if (parts[0] == "zpv_shift") return value_or_nan(z.at("shift").at(k));
          if (parts[0] == "quasilocal") return value_or_nan(z.at("quasilocal").at(k));
        }
      } catch (const std::exception&) {
      }
      return "-";
    };
    for (const auto& e : refs.at("values"))
      rep << e.at("quantity").get<std::string>() << '\t' << computed(e.value("key", "")) << '\t'
          << value_or_nan(e.at("value")) << '\t' << e.at("source").get<std::string>() << '\n';
  }
  write_text(dir / "report.txt", rep.str());
  written.push_back("report.txt");

  Manifest manifest;
  manifest.inputs = {{"results_sha256", sha256_file(results)}};
  for (const auto& w : written) manifest.add(dir, w);
  json j;
  j["format"] = "qlvib-manifest-1";
  j["command"] = "report";
  j["inputs"] = manifest.inputs;
  json f = json::object();
  for (const auto& [p, h] : manifest.files) f[p] = h;
  j["outputs"] = f;
  write_text(dir / "report_manifest.json", j.dump(1) + "\n");
}

// ---------------------------------------------------------------- file verbs

void cmd_splice(const fs::path& defect_cell, const fs::path& defect_fc, const fs::path& bulk_cell,
                const fs::path& bulk_fc, const fs::path& target_cell, const EmbeddingRule& rule,
                const fs::path& out) {
  auto dc = std::make_shared<const Supercell>(staged("splice", [&] { return read_supercell(defect_cell); }));
  auto bc = std::make_shared<const Supercell>(staged("splice", [&] { return read_supercell(bulk_cell); }));
  auto tc = std::make_shared<const Supercell>(staged("splice", [&] { return read_supercell(target_cell); }));
  staged("splice", [&] {
    auto d = read_force_constants(defect_fc, dc);
    auto b = read_force_constants(bulk_fc, bc);
    auto fc = splice(d, b, tc, rule);
    if (!out.parent_path().empty()) ensure_dir(out.parent_path());
    write_force_constants(fc, out);
  });
}

void cmd_diag(const fs::path& cell_path, const fs::path& fc_path,
              const std::vector<double>& si_masses, bool dense, bool dump_vectors,
              const fs::path& out) {
  auto cell = std::make_shared<const Supercell>(staged("diag", [&] { return read_supercell(cell_path); }));
  auto fc = staged("diag", [&] { return read_force_constants(fc_path, cell); });
  ensure_dir(out);
  std::vector<double> masses = si_masses;
  if (masses.empty() || !cell->is_defected()) masses = {0.0};
  for (double m : masses) {
    staged("diag", [&] {
      MassTable table = cell->is_defected() && m > 0.0 ? MassTable::with_silicon(*cell, m)
                                                       : MassTable::from_cell(*cell);
      ModeSet modes;
      if (dense || !cell->is_defected()) {
        modes = solve_modes(fc, table);
      } else {
        modes = solve_symmetrized(fc, table, build_d3d_ops(*cell)).modes;
      }
      const std::string stem = m > 0.0 ? "modes_m" + mass_tag(m) : std::string("modes");
      std::ostringstream s;
      write_frequency_table(modes, s);
      write_text(out / (stem + ".tsv"), s.str());
      if (dump_vectors) write_eigenvectors(modes, out / (stem + ".evec"));
    });
  }
}

void cmd_classify(const fs::path& cell_path, const fs::path& fc_path, double si_mass, bool dense,
                  double degeneracy_tol, const fs::path& out) {
  auto cell = std::make_shared<const Supercell>(staged("classify", [&] { return read_supercell(cell_path); }));
  auto fc = staged("classify", [&] { return read_force_constants(fc_path, cell); });
  staged("classify", [&] {
    const auto group = build_d3d_ops(*cell);
    MassTable table = MassTable::with_silicon(*cell, si_mass);
    LabeledModes labeled;
    if (dense) {
      ClassifyOptions opt;
      opt.degeneracy_tol = degeneracy_tol;
      labeled = classify_modes(solve_modes(fc, table), group, opt);
    } else {
      labeled = solve_symmetrized(fc, table, group, {}, degeneracy_tol);
    }
    std::ostringstream s;
    s << "# max_character_residual " << fmt17(labeled.max_character_residual) << '\n';
    s << "# fallback_clusters " << labeled.fallback_clusters << '\n';
    s << "# index\tomega_mev\tirrep\n";
    for (std::size_t k = 0; k < labeled.modes.size(); ++k)
      s << k << '\t' << fmt17(labeled.modes.reported_frequency(k)) << '\t'
        << irrep_name(labeled.labels[k]) << '\n';
    if (!out.parent_path().empty()) ensure_dir(out.parent_path());
    write_text(out, s.str());
  });
}

}  // namespace qlvib
