#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <set>

#include "doctest.h"
#include "gridseam/dso.hpp"
#include "gridseam/generate.hpp"
#include "gridseam/grid.hpp"
#include "gridseam/iso.hpp"
#include "test_support.hpp"

using namespace gridseam;

TEST_CASE("same seed reproduces the scenario byte for byte") {
  std::string a = emit_scenario(generate_scenario(7));
  std::string b = emit_scenario(generate_scenario(7));
  CHECK(a == b);
  CHECK(a != emit_scenario(generate_scenario(8)));
}

TEST_CASE("generated scenarios are valid and inside the requested ranges") {
  GeneratorParams gp;  // defaults: 5-15 buses, 1-3 feeders, 6-30 nodes
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CAPTURE(seed);
    Scenario s = generate_scenario(seed, gp);
    CHECK(validate(s).empty());
    CHECK(s.name == "random-" + std::to_string(seed));

    const auto& t = s.transmission;
    CHECK(t.buses.size() >= 5);
    CHECK(t.buses.size() <= 15);
    CHECK(t.lines.size() >= t.buses.size() - 1);  // spanning tree at minimum
    CHECK(s.distributions.size() >= 1);
    CHECK(s.distributions.size() <= 3);

    std::set<std::string> coupling;
    for (const auto& d : s.distributions) {
      CHECK(d.nodes.size() >= 6);
      CHECK(d.nodes.size() <= 30);
      CHECK(d.branches.size() == d.nodes.size() - 1);
      CHECK(coupling.insert(d.coupling_bus).second);  // distinct buses
      for (const auto& br : d.branches) {
        CHECK(br.pl_max > 0.0);
        CHECK(br.ql_max > 0.0);
        CHECK(br.r > 0.0);
        CHECK(br.x > 0.0);
      }
    }
    for (const auto& l : t.lines) {
      CHECK(l.reactance > 0.0);
      CHECK(l.flow_limit > 0.0);
      CHECK(l.flow_limit < kInfBound);
    }
  }
}

TEST_CASE("every feeder admits a bid range and the deepest-import point clears") {
  for (std::uint64_t seed : {50u, 51u, 52u, 53u, 54u}) {
    CAPTURE(seed);
    Scenario s = generate_scenario(seed);
    std::vector<DsoOfferAt> floor_offers;
    for (const auto& d : s.distributions) {
      auto [lo, hi] = feasible_range(d);
      CHECK(lo <= hi + 1e-12);
      DsoOffer point;
      point.p_min = point.p_max = lo;
      floor_offers.push_back({d.id, d.coupling_bus, point});
    }
    IsoResult r = clear_market(s.transmission, floor_offers);  // must not throw
    CHECK(r.total_gen_mw >= 0.0);
  }
}

TEST_CASE("feeder count of zero gives a transmission-only scenario") {
  GeneratorParams gp;
  gp.feeders_min = gp.feeders_max = 0;
  Scenario s = generate_scenario(99, gp);
  CHECK(s.distributions.empty());
  CHECK(validate(s).empty());
  IsoResult r = clear_market(s.transmission, {});
  double load = 0.0;
  for (const auto& b : s.transmission.buses) load += b.firm_load;
  CHECK(r.total_gen_mw == doctest::Approx(load).epsilon(1e-9));
}

TEST_CASE("node-count bounds are honored when narrowed") {
  GeneratorParams gp;
  gp.feeder_nodes_min = 3;
  gp.feeder_nodes_max = 4;
  Scenario s = generate_scenario(5, gp);
  for (const auto& d : s.distributions) {
    CHECK(d.nodes.size() >= 3);
    CHECK(d.nodes.size() <= 4);
  }
}

TEST_CASE("unusable parameter ranges are rejected") {
  GeneratorParams gp;
  gp.buses_min = 0;
  CHECK_THROWS_AS(generate_scenario(1, gp), GenerationError);

  gp = {};
  gp.feeders_min = 3;
  gp.feeders_max = 1;
  CHECK_THROWS_AS(generate_scenario(1, gp), GenerationError);

  gp = {};
  gp.price_min = -5.0;
  CHECK_THROWS_AS(generate_scenario(1, gp), GenerationError);

  gp = {};
  gp.price_jitter = 0.5;  // half the price is not "jitter"
  CHECK_THROWS_AS(generate_scenario(1, gp), GenerationError);
}
