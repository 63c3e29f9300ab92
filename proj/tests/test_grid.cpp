#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>

#include "doctest.h"
#include "gridseam/grid.hpp"
#include "test_support.hpp"

using namespace gridseam;

namespace {

bool has_violation(const std::vector<Violation>& vs, const std::string& code) {
  return std::any_of(vs.begin(), vs.end(),
                     [&](const Violation& v) { return v.code == code; });
}

Scenario illustrative() {
  return load_scenario_file(testsup::fixture_path("illustrative.json"));
}

}  // namespace

TEST_CASE("illustrative fixture loads clean with expected structure") {
  Scenario s = illustrative();
  CHECK(validate(s).empty());
  CHECK(s.name == "illustrative");
  CHECK(s.base_mva == 1.0);
  REQUIRE(s.transmission.buses.size() == 2);
  CHECK(s.transmission.buses[1].firm_load == 5.2);
  REQUIRE(s.transmission.generators.size() == 1);
  CHECK(s.transmission.generators[0].blocks[0].width == 5.0);
  CHECK(s.transmission.generators[0].blocks[0].price == 20.0);
  REQUIRE(s.distributions.size() == 1);
  const DistributionSystem& d = s.distributions[0];
  CHECK(d.coupling_bus == "b2");
  CHECK(d.substation_node == "n1");
  REQUIRE(d.aggregators.size() == 2);
  CHECK(d.aggregators[0].kind == AggKind::generating);
  CHECK(d.aggregators[1].blocks[0].price == 15.0);
  CHECK(d.branches[0].pl_max == 0.1);
  CHECK(d.base_mva == 1.0);  // copied from metadata
}

TEST_CASE("emit/load round-trip is the identity") {
  Scenario s = illustrative();
  std::string text = emit_scenario(s);
  Scenario s2 = load_scenario(text);
  CHECK(emit_scenario(s2) == text);  // byte-stable after one cycle
  CHECK(s2.transmission.buses[1].firm_load == s.transmission.buses[1].firm_load);
  CHECK(s2.distributions[0].branches[0].r == s.distributions[0].branches[0].r);
  CHECK(s2.distributions[0].aggregators[1].blocks[0].price ==
        s.distributions[0].aggregators[1].blocks[0].price);
  CHECK(s2.distributions[0].q_dso_min == s.distributions[0].q_dso_min);
}

TEST_CASE("round-trip preserves awkward doubles exactly") {
  Scenario s = illustrative();
  s.transmission.buses[1].firm_load = 0.1 + 0.2;            // 0.30000000000000004
  s.distributions[0].branches[0].r = 1.0 / 3.0;
  s.distributions[0].aggregators[0].blocks[0].price = 25.000000000000004;
  Scenario s2 = load_scenario(emit_scenario(s));
  CHECK(s2.transmission.buses[1].firm_load == s.transmission.buses[1].firm_load);
  CHECK(s2.distributions[0].branches[0].r == s.distributions[0].branches[0].r);
  CHECK(s2.distributions[0].aggregators[0].blocks[0].price ==
        s.distributions[0].aggregators[0].blocks[0].price);
}

TEST_CASE("transmission-only scenario is valid") {
  Scenario s = illustrative();
  s.distributions.clear();
  CHECK(validate(s).empty());
  Scenario s2 = load_scenario(emit_scenario(s));
  CHECK(s2.distributions.empty());
}

TEST_CASE("cyclic feeder is rejected naming the offending branch") {
  std::string text = testsup::read_file(testsup::fixture_path("cyclic_feeder.json"));
  try {
    load_scenario(text);
    FAIL("expected a validation error");
  } catch (const ScenarioValidationError& e) {
    CHECK(has_violation(e.violations, "cyclic branch"));
    CHECK(has_violation(e.violations, "radiality violated"));
    bool names_branch = std::any_of(
        e.violations.begin(), e.violations.end(), [](const Violation& v) {
          return v.code == "cyclic branch" && v.detail.find("br3") != std::string::npos;
        });
    CHECK(names_branch);
  }
}

TEST_CASE("offer convexity violations are reported") {
  Scenario s = illustrative();
  SUBCASE("generating blocks with decreasing prices") {
    s.distributions[0].aggregators[0].blocks = {{1.0, 20.0}, {1.0, 10.0}};
    CHECK(has_violation(validate(s), "non-convex generating offer"));
  }
  SUBCASE("demand blocks with increasing prices") {
    Aggregator drag;
    drag.id = "dr1";
    drag.kind = AggKind::demand_response;
    drag.node = "n2";
    drag.blocks = {{1.0, 10.0}, {1.0, 20.0}};
    s.distributions[0].aggregators.push_back(drag);
    CHECK(has_violation(validate(s), "non-convex demand offer"));
  }
  SUBCASE("generator offer at the transmission level") {
    s.transmission.generators[0].blocks = {{1.0, 30.0}, {1.0, 5.0}};
    CHECK(has_violation(validate(s), "non-convex generating offer"));
  }
}

TEST_CASE("structural violations carry machine-readable codes") {
  Scenario base = illustrative();
  {
    Scenario s = base;
    s.distributions[0].nodes[1].u_min = s.distributions[0].nodes[1].u_max;
    CHECK(has_violation(validate(s), "empty voltage band"));
  }
  {
    Scenario s = base;
    s.distributions[0].substation_u = 1.5;  // outside [0.81, 1.21]
    CHECK(has_violation(validate(s), "substation voltage outside band"));
  }
  {
    Scenario s = base;
    s.distributions[0].aggregators[0].node = "nope";
    CHECK(has_violation(validate(s), "unknown aggregator node"));
  }
  {
    Scenario s = base;
    s.distributions[0].coupling_bus = "b9";
    CHECK(has_violation(validate(s), "unknown coupling bus"));
  }
  {
    Scenario s = base;
    s.distributions[0].branches[0].pl_max = 0.0;
    CHECK(has_violation(validate(s), "nonpositive branch limit"));
  }
  {
    Scenario s = base;
    s.transmission.reference_bus = "zz";
    CHECK(has_violation(validate(s), "unknown reference bus"));
  }
  {
    Scenario s = base;
    s.transmission.buses.push_back({"b3", 0.0});  // no line reaches it
    CHECK(has_violation(validate(s), "transmission graph disconnected"));
  }
  {
    Scenario s = base;
    s.distributions[0].nodes.push_back({"n2", 0, 0, 0.81, 1.21});
    auto vs = validate(s);
    CHECK(has_violation(vs, "duplicate node id"));
  }
  {
    Scenario s = base;
    Aggregator reag;
    reag.id = "re1";
    reag.kind = AggKind::renewable;
    reag.node = "n2";
    reag.fixed_profile = -1.0;
    s.distributions[0].aggregators.push_back(reag);
    CHECK(has_violation(validate(s), "negative renewable profile"));
  }
  {
    Scenario s = base;
    Aggregator reag;
    reag.id = "re1";
    reag.kind = AggKind::renewable;
    reag.node = "n2";
    reag.blocks = {{1.0, 0.0}};
    s.distributions[0].aggregators.push_back(reag);
    CHECK(has_violation(validate(s), "renewable with blocks"));
  }
}

TEST_CASE("schema problems are collected and reported together") {
  std::string text = R"({
    "schema": "gridseam/1",
    "metadata": {},
    "transmission": {
      "buses": [ { "firm_load_mw": 1.0 } ],
      "lines": [],
      "generators": [ { "id": "g", "bus": "b", "blocks": [ { "width_mw": "wide" } ] } ]
    },
    "distributions": []
  })";
  try {
    parse_scenario(text);
    FAIL("expected a schema error");
  } catch (const ScenarioSchemaError& e) {
    std::string msg = e.what();
    CHECK(msg.find("buses[0].id") != std::string::npos);
    CHECK(msg.find("width_mw") != std::string::npos);
    CHECK(msg.find("price_per_mwh") != std::string::npos);
  }
}

TEST_CASE("schema version is mandatory") {
  CHECK_THROWS_AS(parse_scenario(R"({"metadata":{},"transmission":{"buses":[],"lines":[],"generators":[]},"distributions":[]})"),
                  ScenarioSchemaError);
  CHECK_THROWS_AS(parse_scenario(R"({"schema":"gridseam/2","metadata":{},"transmission":{"buses":[],"lines":[],"generators":[]},"distributions":[]})"),
                  ScenarioSchemaError);
}

TEST_CASE("io errors are distinct from schema errors") {
  CHECK_THROWS_AS(load_scenario_file("/nonexistent/path.json"), ScenarioIoError);
  CHECK_THROWS_AS(parse_scenario("{ not json"), ScenarioIoError);
}

TEST_CASE("defaults are applied on load") {
  std::string text = R"({
    "schema": "gridseam/1",
    "metadata": { "name": "tiny" },
    "transmission": {
      "buses": [ { "id": "b1" } ],
      "lines": [],
      "generators": [ { "id": "g", "bus": "b1", "blocks": [ { "width_mw": 1.0, "price_per_mwh": 5.0 } ] } ]
    },
    "distributions": [
      {
        "id": "d", "coupling_bus": "b1", "substation_node": "r",
        "nodes": [ { "id": "r" } ],
        "branches": [],
        "aggregators": [ { "id": "a", "kind": "generating", "node": "r",
                           "blocks": [ { "width_mw": 1.0, "price_per_mwh": 2.0 } ] } ]
      }
    ]
  })";
  Scenario s = load_scenario(text);
  CHECK(s.base_mva == 1.0);
  CHECK(s.transmission.reference_bus == "b1");
  CHECK(s.transmission.buses[0].firm_load == 0.0);
  const DistributionSystem& d = s.distributions[0];
  CHECK(d.substation_u == 1.0);
  CHECK(d.nodes[0].u_min == 0.81);
  CHECK(d.nodes[0].u_max == 1.21);
  CHECK(d.q_dso_min <= -kInfBound);
  CHECK(d.q_dso_max >= kInfBound);
  CHECK(d.aggregators[0].tan_phi == 0.0);
  CHECK(d.aggregators[0].fixed_profile == 0.0);
}

TEST_CASE("relax_limits widens every operating limit and stays valid") {
  Scenario s = relax_limits(illustrative(), 100.0);
  CHECK(s.transmission.lines[0].flow_limit == doctest::Approx(600.0));
  CHECK(s.distributions[0].branches[0].pl_max == doctest::Approx(10.0));
  const DistNode& n = s.distributions[0].nodes[0];
  CHECK(n.u_max - n.u_min == doctest::Approx(100.0 * 0.4));
  CHECK(n.u_min < 0.0);  // band is now huge; that is the point
  CHECK(validate(s).empty());
}

TEST_CASE("index_feeder maps the illustrative topology") {
  Scenario s = illustrative();
  FeederIndex fi = index_feeder(s.distributions[0]);
  CHECK(fi.substation == 0);
  REQUIRE(fi.branch_parent.size() == 1);
  CHECK(fi.branch_parent[0] == 0);
  CHECK(fi.branch_child[0] == 1);
  CHECK(fi.in_branch[0] == -1);
  CHECK(fi.in_branch[1] == 0);
  REQUIRE(fi.out_branches[0].size() == 1);
  CHECK(fi.out_branches[1].empty());
  CHECK(fi.node_index("n2") == 1);
  CHECK(fi.node_index("zz") == -1);
}

TEST_CASE("validate is pure") {
  Scenario s = illustrative();
  std::string before = emit_scenario(s);
  auto v1 = validate(s);
  auto v2 = validate(s);
  CHECK(v1.size() == v2.size());
  CHECK(emit_scenario(s) == before);
}
