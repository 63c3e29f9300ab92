#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "gridseam/generate.hpp"
#include "gridseam/grid.hpp"
#include "gridseam/ideal.hpp"
#include "test_support.hpp"

using namespace gridseam;

namespace {

Scenario illustrative() {
  return load_scenario_file(testsup::fixture_path("illustrative.json"));
}

// Single node, one generating aggregator: curve is one segment at its price.
DistributionSystem hub_feeder(const std::string& id, const std::string& bus, double width,
                              double price) {
  DistributionSystem d;
  d.id = id;
  d.coupling_bus = bus;
  d.substation_node = "n1";
  d.nodes.push_back({"n1", 0.0, 0.0, 0.81, 1.21});
  d.aggregators.push_back({"ddg", AggKind::generating, "n1", {{width, price}}, 0.0, 0.0});
  return d;
}

int distribution_rows(const Scenario& s) {
  int rows = 0;
  for (const DistributionSystem& d : s.distributions)
    rows += 2 * int(d.nodes.size()) + int(d.branches.size());
  return rows;
}

}  // namespace

TEST_CASE("illustrative scenario: the two stages reproduce the whole-system solution") {
  Scenario s = illustrative();
  IdealResult ideal = solve_ideal(s);

  CHECK(std::abs(ideal.gen_dispatch[0] - 5.0) <= 1e-8);
  CHECK(std::abs(ideal.substation_injections[0] - 0.2) <= 1e-8);
  CHECK(std::abs(ideal.bus_lmps[0] - 25.0) <= 1e-8);
  CHECK(std::abs(ideal.bus_lmps[1] - 25.0) <= 1e-8);
  CHECK(std::abs(ideal.node_dlmps[0][0] - 25.0) <= 1e-8);
  CHECK(std::abs(ideal.node_dlmps[0][1] - 15.0) <= 1e-8);
  CHECK(std::abs(ideal.agg_dispatch[0][0] - 0.1) <= 1e-8);
  CHECK(std::abs(ideal.agg_dispatch[0][1] - 0.1) <= 1e-8);
  CHECK(ideal.objective == doctest::Approx(104.0).epsilon(1e-10));

  CoordinationResult coord = run_coordination(s);
  ComparisonReport rep = compare(s, coord, ideal, 1e-8);
  CHECK(rep.pass);
  CHECK(!rep.degenerate);
  CHECK(rep.objectives_match);
  CHECK(rep.gen_dev <= 1e-8);
  CHECK(rep.agg_dev <= 1e-8);
  CHECK(rep.price_dev <= 1e-8);
  CHECK(rep.payment_dev <= 1e-8);
}

TEST_CASE("a transmission-only scenario reduces to the market LP") {
  Scenario s;
  s.name = "flat";
  s.transmission.buses.push_back({"b1", 6.0});
  s.transmission.reference_bus = "b1";
  s.transmission.generators.push_back({"g1", "b1", {{8.0, 10.0}}});

  IdealModel m = build_ideal_lp(s);
  CHECK(m.lp.debug_dump() == build_iso_lp(s.transmission, {}).debug_dump());

  ComparisonReport rep = audit(s);
  CHECK(rep.pass);
  CHECK(rep.objectives_match);
  CHECK(rep.gen_dev == 0.0);
}

TEST_CASE("zero-load scenario dispatches nothing") {
  Scenario s;
  s.name = "idle";
  s.transmission.buses.push_back({"b1", 0.0});
  s.transmission.reference_bus = "b1";
  s.transmission.generators.push_back({"g1", "b1", {{4.0, 12.0}}});
  s.distributions.push_back(hub_feeder("ds1", "b1", 0.5, 9.0));

  IdealResult r = solve_ideal(s);
  CHECK(r.objective == doctest::Approx(0.0));
  CHECK(r.gen_dispatch[0] == doctest::Approx(0.0));
  CHECK(r.substation_injections[0] == doctest::Approx(0.0));
  CHECK(r.agg_dispatch[0][0] == doctest::Approx(0.0));
}

TEST_CASE("mismatched scenario names are rejected") {
  Scenario s = illustrative();
  CoordinationResult coord = run_coordination(s);
  IdealResult ideal = solve_ideal(s);
  ideal.scenario = "someone-else";
  CHECK_THROWS_WITH_AS(compare(s, coord, ideal),
                       doctest::Contains("different scenarios"), IdealError);
}

TEST_CASE("row and variable counts: whole-system = market + distribution rows") {
  for (std::uint64_t seed : {70, 71, 72, 73, 74}) {
    CAPTURE(seed);
    Scenario s = generate_scenario(seed);
    IdealModel ideal = build_ideal_lp(s);
    LinearProgram iso = build_iso_lp(s.transmission, {});

    CHECK(int(iso.constraints.size()) ==
          int(ideal.lp.constraints.size()) - distribution_rows(s));

    int expect_vars = iso.num_vars;
    for (const DistributionSystem& d : s.distributions)
      expect_vars += build_dso_model(d, DsoMode::free_p).lp.num_vars;
    CHECK(ideal.lp.num_vars == expect_vars);
  }
}

TEST_CASE("duplicated-price tie is flagged degenerate, objective still matches") {
  Scenario s;
  s.name = "tie";
  s.transmission.buses.push_back({"b1", 5.0});
  s.transmission.reference_bus = "b1";
  s.transmission.generators.push_back({"ga", "b1", {{4.0, 20.0}}});
  s.transmission.generators.push_back({"gb", "b1", {{4.0, 20.0}}});

  CHECK(ideal_degenerate(s));
  ComparisonReport rep = audit(s);
  CHECK(rep.degenerate);
  CHECK(rep.objectives_match);
  CHECK(rep.objective_rel <= 1e-8);
}

TEST_CASE("identical feeders on two buses: symmetric optima are advisory, not failures") {
  Scenario s;
  s.name = "twins";
  s.transmission.buses.push_back({"b1", 0.0});
  s.transmission.buses.push_back({"b2", 0.3});
  s.transmission.lines.push_back({"tie", "b1", "b2", 0.1, 10.0});
  s.transmission.reference_bus = "b1";
  s.transmission.generators.push_back({"g1", "b1", {{1.0, 30.0}}});
  s.distributions.push_back(hub_feeder("ds1", "b1", 0.5, 12.0));
  s.distributions.push_back(hub_feeder("ds2", "b2", 0.5, 12.0));

  CHECK(ideal_degenerate(s));
  ComparisonReport rep = audit(s);
  CHECK(rep.degenerate);
  CHECK(rep.objectives_match);
  // The two stages may pick different splits of the tie, but never a
  // different total cost.
  CHECK(rep.objective_rel <= 1e-8);
}

TEST_CASE("randomized equivalence audit") {
  for (std::uint64_t seed : {80, 81, 82, 83, 84, 85, 86, 87}) {
    CAPTURE(seed);
    Scenario s = generate_scenario(seed);
    ComparisonReport rep = audit(s);
    CHECK(rep.objectives_match);
    CHECK((rep.pass || rep.degenerate));
    if (!rep.degenerate) {
      CHECK(rep.gen_dev <= 1e-5);
      CHECK(rep.agg_dev <= 1e-5);
      CHECK(rep.price_dev <= 1e-5);
      CHECK(rep.payment_dev <= 1e-5);
    }
  }
}

TEST_CASE("wide synthetic system: total generation matches the benchmark") {
  GeneratorParams params;
  params.buses_min = params.buses_max = 118;
  params.feeders_min = params.feeders_max = 2;
  Scenario s = generate_scenario(118, params);

  CoordinationResult coord = run_coordination(s);
  IdealResult ideal = solve_ideal(s);
  ComparisonReport rep = compare(s, coord, ideal);
  REQUIRE(!rep.degenerate);
  CHECK(rep.pass);

  double coord_mw = 0.0, ideal_mw = 0.0;
  for (double p : coord.market.gen_dispatch) coord_mw += p;
  for (double p : ideal.gen_dispatch) ideal_mw += p;
  CHECK(std::abs(coord_mw - ideal_mw) <= 1e-5);
}

TEST_CASE("relaxed limits turn every feeder into a pass-through") {
  for (std::uint64_t seed : {90, 91, 92}) {
    CAPTURE(seed);
    Scenario s = relax_limits(generate_scenario(seed), 100.0);
    CoordinationResult coord = run_coordination(s);
    for (const DsoSettlement& st : coord.settlements) {
      for (double dlmp : st.node_dlmp)
        CHECK(std::abs(dlmp - st.lmp_star) <= 1e-6);
      CHECK(std::abs(st.dso_net_position) <= 1e-6);
    }
  }
}

TEST_CASE("comparison report serializes its verdict") {
  Scenario s = illustrative();
  ComparisonReport rep = audit(s, 1e-8);
  std::string j = comparison_json(rep);
  CHECK(j.find("\"pass\": true") != std::string::npos);
  CHECK(j.find("\"degenerate\": false") != std::string::npos);
  CHECK(j.find("\"objectives_match\": true") != std::string::npos);
  CHECK(j.find("\"generator_mw\"") != std::string::npos);
  CHECK(j.find("\"scenario\": \"illustrative\"") != std::string::npos);
}
