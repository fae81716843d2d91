#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qlvib/error.hpp"
#include "qlvib/pipeline.hpp"

using namespace qlvib;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qlvib_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> rows(const fs::path& p) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, '\t');) cols.push_back(c);
    out.push_back(cols);
  }
  return out;
}

RunConfig small_config(const std::string& name) {
  RunConfig c;
  c.cells = {3};
  c.isotopes = {28.0};
  c.states = {"ground"};
  c.out = scratch(name);
  return c;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("build writes geometry, force constants and a manifest into a new directory") {
    auto c = small_config("build");
    c.out /= "nested";
    cmd_build(c);
    CHECK(fs::is_regular_file(c.out / "cells/siv_N3.json"));
    CHECK(fs::is_regular_file(c.out / "fc/ground_N3.fc"));
    const auto manifest = nlohmann::json::parse(slurp(c.out / "manifest.json"));
    CHECK(manifest["outputs"]["fc/ground_N3.fc"].get<std::string>() ==
          sha256_file(c.out / "fc/ground_N3.fc"));
    const auto cell = nlohmann::json::parse(slurp(c.out / "cells/siv_N3.json"));
    CHECK(cell["atoms"].size() == 215);
  }

  TEST_CASE("config validation") {
    auto c = small_config("bad");
    c.cells = {1};
    CHECK_THROWS_AS(cmd_build(c), ValidationError);
    c.cells = {9};
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.cells = {3, 3};
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.cells = {3};
    c.states = {"/nonexistent.fc"};
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.states = {"ground"};
    c.window = {70.0, 20.0};
    CHECK_THROWS_AS(c.validate(), ValidationError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"celz", {3}}}), ValidationError);
    const auto round = config_from_json(config_to_json(small_config("x")));
    CHECK(round.cells == std::vector<int>{3});
  }

  TEST_CASE("single cell, single isotope analysis has no average row") {
    auto c = small_config("single");
    const auto result = cmd_analyze(c);
    CHECK(result.runs.size() == 1);
    for (const auto& r : rows(c.out / "isotope_table.tsv")) CHECK(r[2] != "average");
    CHECK(rows(c.out / "resonances.tsv").size() == 6);
  }

  TEST_CASE("empty window gives no-resonance rows") {
    auto c = small_config("window");
    c.window = {200.0, 300.0};
    cmd_analyze(c);
    for (const auto& r : rows(c.out / "resonances.tsv")) CHECK(r[5] == "no resonance");
  }

  TEST_CASE("multi-cell scan mirrors the isotope table layout and is deterministic") {
    auto c = small_config("scan");
    c.cells = {3, 4};
    c.isotopes = {28.0, 29.0, 30.0};
    c.states = {"ground", "excited"};
    cmd_analyze(c);
    const auto table = rows(c.out / "isotope_table.tsv");
    int averages = 0, a2u = 0, eu = 0;
    for (const auto& r : table) {
      averages += r[2] == "average";
      a2u += r[1] == "a2u";
      eu += r[1] == "eu";
    }
    CHECK(averages == 4);
    CHECK(a2u == 6);
    CHECK(eu == 6);
    CHECK(fs::is_regular_file(c.out / "zpv.tsv"));

    const auto first = slurp(c.out / "results.json");
    const auto manifest = slurp(c.out / "manifest.json");
    cmd_analyze(c);
    CHECK(slurp(c.out / "results.json") == first);
    CHECK(slurp(c.out / "manifest.json") == manifest);

    cmd_report(c.out);
    const auto rep = slurp(c.out / "report.txt");
    CHECK(rep.find("deviation_from_ideal") != std::string::npos);
    CHECK(rep.find("not model output") != std::string::npos);
    // Ratio lines carry eight columns, the deviation among them.
    std::istringstream in(rep);
    int ratio_lines = 0;
    for (std::string line; std::getline(in, line);)
      if (line.rfind("ground\ta2u\t28\t", 0) == 0) {
        ++ratio_lines;
        CHECK(std::count(line.begin(), line.end(), '\t') == 7);
      }
    CHECK(ratio_lines == 2);

    const auto scatter = rows(c.out / "scatter/ground_N4_m28_a2u.tsv");
    REQUIRE(!scatter.empty());
    double best = -1, best_w = 0;
    for (const auto& r : scatter)
      if (std::stod(r[1]) > best) {
        best = std::stod(r[1]);
        best_w = std::stod(r[0]);
      }
    CHECK(best_w >= 20.0);
    CHECK(best_w <= 70.0);
    CHECK(slurp(c.out / "scatter/ground_N4_m28_a2u.tsv").find("log scale") != std::string::npos);
  }

  TEST_CASE("manifest hashes track inputs") {
    auto c = small_config("hash_a");
    cmd_analyze(c);
    auto d = small_config("hash_b");
    cmd_analyze(d);
    auto e = small_config("hash_c");
    e.beta_threshold = 4.0;
    cmd_analyze(e);
    const auto ma = nlohmann::json::parse(slurp(c.out / "manifest.json"));
    const auto mb = nlohmann::json::parse(slurp(d.out / "manifest.json"));
    const auto me = nlohmann::json::parse(slurp(e.out / "manifest.json"));
    CHECK(ma == mb);
    CHECK(ma["inputs"] != me["inputs"]);
  }

  TEST_CASE("external defect force constants are accepted as a state") {
    auto c = small_config("external");
    cmd_build(c);
    auto d = small_config("external_run");
    d.states = {(c.out / "fc/ground_siv_N3.fc").string()};
    const auto r = cmd_analyze(d);
    CHECK(r.runs.front().state == d.states.front());
    const auto ref = cmd_analyze(small_config("external_ref"));
    CHECK(r.runs.front().resonances.at(Irrep::A2u).omega ==
          ref.runs.front().resonances.at(Irrep::A2u).omega);
  }

  TEST_CASE("report without analysis outputs fails") {
    const auto dir = scratch("empty");
    fs::create_directories(dir);
    CHECK_THROWS_AS(cmd_report(dir), IoError);
  }

  TEST_CASE("formatting uses 17 significant digits") {
    CHECK(fmt17(0.1) == "0.10000000000000001");
    CHECK(fmt17(28.0) == "28");
    CHECK(sha256_string("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }
}
