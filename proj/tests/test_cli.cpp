#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "gridseam/cli.hpp"
#include "gridseam/grid.hpp"
#include "gridseam/io.hpp"
#include "test_support.hpp"

using namespace gridseam;
using testsup::fixture_path;
using testsup::read_file;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int rc = 0;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int rc = run_cli(args, out, err);
  return {rc, out.str(), err.str()};
}

// Fresh directory under the system temp root, unique per call.
fs::path temp_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  fs::path p = fs::temp_directory_path() / ("gridseam_cli_" + tag + "_" + std::to_string(++counter));
  fs::remove_all(p);
  return p;
}

std::string write_scenario(const Scenario& s, const std::string& tag) {
  fs::path dir = temp_dir(tag);
  fs::create_directories(dir);
  fs::path file = dir / (s.name + ".json");
  atomic_write_file(file.string(), emit_scenario(s));
  return file.string();
}

Scenario transmission_only() {
  Scenario s;
  s.name = "wires-only";
  s.transmission.buses = {{"b1", 3.0}};
  s.transmission.generators = {{"g1", "b1", {{10.0, 18.0}}}};
  s.transmission.reference_bus = "b1";
  return s;
}

// One healthy feeder plus one whose firm load can never be served: the
// downstream branch is too small and the only aggregator sits upstream.
Scenario mixed_feasibility() {
  Scenario s = load_scenario_file(fixture_path("illustrative.json"));
  DistributionSystem bad = s.distributions[0];
  bad.id = "ds_bad";
  bad.nodes[1].firm_load_p = 5.0;
  bad.aggregators.resize(1);  // keep only the n1 aggregator
  s.distributions.push_back(bad);
  s.name = "mixed";
  return s;
}

}  // namespace

TEST_CASE("validate accepts a good scenario") {
  CliRun r = cli({"validate", "--scenario", fixture_path("illustrative.json")});
  CHECK(r.rc == 0);
  CHECK(r.out == "ok: illustrative\n");
  CHECK(r.err.empty());
}

TEST_CASE("validate reports violations and exits 1") {
  CliRun r = cli({"validate", "--scenario", fixture_path("cyclic_feeder.json")});
  CHECK(r.rc == 1);
  CHECK_MESSAGE(r.err.find("cyclic branch") != std::string::npos, r.err);
  CHECK_MESSAGE(r.err.find("radiality violated") != std::string::npos, r.err);
}

TEST_CASE("missing scenario file exits 2") {
  CliRun r = cli({"validate", "--scenario", "/no/such/file.json"});
  CHECK(r.rc == 2);
  CHECK(r.err.find("cannot open scenario file") != std::string::npos);
}

TEST_CASE("usage errors exit 2, help exits 0") {
  CHECK(cli({"validate", "--bogus"}).rc == 2);
  CHECK(cli({}).rc == 2);
  CHECK(cli({"frobnicate"}).rc == 2);
  CliRun help = cli({"--help"});
  CHECK(help.rc == 0);
  CHECK(help.out.find("validate") != std::string::npos);
  CHECK(help.out.find("generate") != std::string::npos);
}

TEST_CASE("run prints the coordination summary") {
  CliRun r = cli({"run", "--scenario", fixture_path("illustrative.json")});
  CHECK(r.rc == 0);
  CHECK(r.err.empty());
  CHECK(r.out.find("scenario illustrative") != std::string::npos);
  CHECK(r.out.find("ds1: bid range [0, 0.6] MW") != std::string::npos);
  CHECK(r.out.find("market objective 104 $/h") != std::string::npos);
  CHECK(r.out.find("g1 = 5 MW") != std::string::npos);
  CHECK(r.out.find("p* = 0.2 MW, LMP = 25 $/MWh") != std::string::npos);
  CHECK(r.out.find("dlmp = (25, 15) $/MWh") != std::string::npos);
  CHECK(r.out.find("net position 1 $/h") != std::string::npos);
  CHECK(r.out.find("total cost 104 $/h") != std::string::npos);
  CHECK(r.out.find("wrote") == std::string::npos);  // no --out, no files
}

TEST_CASE("run --out writes the full artifact set") {
  fs::path dir = temp_dir("run");
  CliRun r = cli({"run", "--scenario", fixture_path("illustrative.json"), "--out", dir.string()});
  REQUIRE(r.rc == 0);
  for (const char* name :
       {"curve_ds1.csv", "marginal_ds1.csv", "settlement_ds1.csv", "dlmps_ds1.csv",
        "settlement_ds1.json", "lmps.csv", "dispatch.csv", "market.json"}) {
    CHECK_MESSAGE(fs::exists(dir / name), name);
    CHECK(r.out.find(name) != std::string::npos);
  }

  SUBCASE("rerun reproduces byte-identical files") {
    std::vector<std::pair<fs::path, std::string>> before;
    for (const auto& e : fs::directory_iterator(dir))
      before.emplace_back(e.path(), read_file(e.path().string()));
    CliRun again =
        cli({"run", "--scenario", fixture_path("illustrative.json"), "--out", dir.string()});
    REQUIRE(again.rc == 0);
    CHECK(again.out == r.out);
    for (const auto& [path, content] : before) CHECK(read_file(path.string()) == content);
  }
}

TEST_CASE("run on a pure transmission scenario emits no feeder files") {
  std::string file = write_scenario(transmission_only(), "wires");
  fs::path dir = temp_dir("wires_out");
  CliRun r = cli({"run", "--scenario", file, "--out", dir.string()});
  REQUIRE(r.rc == 0);
  CHECK(r.out.find("market objective 54 $/h") != std::string::npos);
  CHECK(fs::exists(dir / "lmps.csv"));
  CHECK(fs::exists(dir / "dispatch.csv"));
  CHECK(fs::exists(dir / "market.json"));
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string name = e.path().filename().string();
    CHECK_MESSAGE(name.find("settlement") == std::string::npos, name);
    CHECK_MESSAGE(name.find("curve") == std::string::npos, name);
  }
}

TEST_CASE("run writes one settlement per feeder") {
  Scenario s = load_scenario_file(fixture_path("illustrative.json"));
  DistributionSystem twin = s.distributions[0];
  twin.id = "ds2";
  s.distributions.push_back(twin);
  s.name = "two-feeders";
  std::string file = write_scenario(s, "twofeeders");
  fs::path dir = temp_dir("twofeeders_out");
  CliRun r = cli({"run", "--scenario", file, "--out", dir.string()});
  REQUIRE(r.rc == 0);
  CHECK(fs::exists(dir / "settlement_ds1.json"));
  CHECK(fs::exists(dir / "settlement_ds2.json"));
  CHECK(fs::exists(dir / "dlmps_ds2.csv"));
}

TEST_CASE("bidcurve keeps going past an infeasible feeder") {
  std::string file = write_scenario(mixed_feasibility(), "mixed");
  fs::path dir = temp_dir("mixed_out");
  CliRun r = cli({"bidcurve", "--scenario", file, "--out", dir.string()});
  CHECK(r.rc == 1);
  CHECK(r.out.find("ds1: range [0, 0.6] MW") != std::string::npos);
  CHECK(r.err.find("ds_bad") != std::string::npos);
  CHECK(r.err.find("empty bid range") != std::string::npos);
  CHECK(fs::exists(dir / "curve_ds1.csv"));       // healthy feeder still exported
  CHECK(fs::exists(dir / "marginal_ds1.csv"));
  CHECK(!fs::exists(dir / "curve_ds_bad.csv"));
}

TEST_CASE("compare reports the equivalence audit") {
  CliRun r = cli({"compare", "--scenario", fixture_path("illustrative.json")});
  CHECK(r.rc == 0);
  CHECK(r.out.find("\"pass\": true") != std::string::npos);
  CHECK(r.out.find("\"degenerate\": false") != std::string::npos);
  CHECK(r.out.find("\"objectives_match\": true") != std::string::npos);

  SUBCASE("tol flag is honored in the report") {
    CliRun tight = cli(
        {"compare", "--scenario", fixture_path("illustrative.json"), "--tol", "1e-7"});
    CHECK(tight.rc == 0);
    CHECK(tight.out.find("\"tol\": 1e-07") != std::string::npos);
  }

  SUBCASE("--out writes comparison.json") {
    fs::path dir = temp_dir("cmp");
    CliRun w = cli({"compare", "--scenario", fixture_path("illustrative.json"), "--out",
                    dir.string()});
    CHECK(w.rc == 0);
    CHECK(read_file((dir / "comparison.json").string()).find("\"pass\": true") !=
          std::string::npos);
  }
}

TEST_CASE("generate is deterministic per seed") {
  CliRun a = cli({"generate", "--seed", "42"});
  CliRun b = cli({"generate", "--seed", "42"});
  REQUIRE(a.rc == 0);
  CHECK(a.out == b.out);
  CHECK(a.out != cli({"generate", "--seed", "43"}).out);

  Scenario s = load_scenario(a.out);
  CHECK(s.name == "random-42");
  CHECK(validate(s).empty());

  SUBCASE("--out writes the same bytes") {
    fs::path dir = temp_dir("gen");
    fs::path file = dir / "nested" / "s.json";
    CliRun w = cli({"generate", "--seed", "42", "--out", file.string()});
    REQUIRE(w.rc == 0);
    CHECK(read_file(file.string()) == a.out);
  }
}

TEST_CASE("generate honors the sizing flags") {
  CliRun r = cli({"generate", "--seed", "5", "--buses-min", "9", "--buses-max", "9",
                  "--feeders-min", "3", "--feeders-max", "3", "--nodes-min", "6",
                  "--nodes-max", "8"});
  REQUIRE(r.rc == 0);
  Scenario s = load_scenario(r.out);
  CHECK(s.transmission.buses.size() == 9);
  REQUIRE(s.distributions.size() == 3);
  for (const DistributionSystem& d : s.distributions) {
    CHECK(d.nodes.size() >= 6);
    CHECK(d.nodes.size() <= 8);
  }
}

TEST_CASE("generated scenarios round-trip through run and compare") {
  CliRun gen = cli({"generate", "--seed", "7"});
  REQUIRE(gen.rc == 0);
  fs::path dir = temp_dir("roundtrip");
  fs::create_directories(dir);
  fs::path file = dir / "s.json";
  atomic_write_file(file.string(), gen.out);
  CHECK(cli({"validate", "--scenario", file.string()}).rc == 0);
  CHECK(cli({"run", "--scenario", file.string()}).rc == 0);
  CliRun cmp = cli({"compare", "--scenario", file.string()});
  CHECK(cmp.rc == 0);
  CHECK(cmp.out.find("\"objectives_match\": true") != std::string::npos);
}
