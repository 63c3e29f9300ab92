// Data model for transmission and radial distribution systems, aggregator
// offers, and scenario files, plus validated JSON ingestion/emission.
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "gridseam/lp.hpp"

namespace gridseam {

struct OfferBlock {
  double width = 0.0;  // MW
  double price = 0.0;  // $/MWh
};

enum class AggKind { generating, demand_response, renewable };

std::string to_string(AggKind k);

struct Aggregator {
  std::string id;
  AggKind kind = AggKind::generating;
  std::string node;
  std::vector<OfferBlock> blocks;  // empty for renewables
  double tan_phi = 0.0;            // reactive draw/injection per MW of active
  double fixed_profile = 0.0;      // MW, renewables only
};

struct DistNode {
  std::string id;
  double firm_load_p = 0.0;  // MW
  double firm_load_q = 0.0;  // MVAr
  double u_min = 0.81;       // squared p.u. voltage band
  double u_max = 1.21;
};

struct DistBranch {
  std::string id;
  std::string parent_node;
  std::string child_node;
  double r = 0.0;       // p.u.
  double x = 0.0;       // p.u.
  double pl_max = 0.0;  // MW
  double ql_max = 0.0;  // MVAr
};

struct DistributionSystem {
  std::string id;
  std::string coupling_bus;      // transmission bus at the T&D interface
  std::string substation_node;
  double substation_u = 1.0;     // squared p.u., fixed at the root
  double q_dso_min = -kInfBound; // optional substation reactive bounds, MVAr
  double q_dso_max = kInfBound;
  std::vector<DistNode> nodes;
  std::vector<DistBranch> branches;
  std::vector<Aggregator> aggregators;
  double base_mva = 1.0;         // copied from scenario metadata
};

struct Bus {
  std::string id;
  double firm_load = 0.0;  // MW
};

struct Line {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  double reactance = 0.0;   // p.u.
  double flow_limit = 0.0;  // MW, symmetric
};

struct Generator {
  std::string id;
  std::string bus;
  std::vector<OfferBlock> blocks;
};

struct TransmissionSystem {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> generators;
  std::string reference_bus;
};

struct Scenario {
  std::string name;
  double base_mva = 1.0;
  TransmissionSystem transmission;
  std::vector<DistributionSystem> distributions;
};

struct Violation {
  std::string code;    // stable machine-readable phrase
  std::string detail;  // offending ids and values
};

// File unreadable or not JSON at all.
struct ScenarioIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// JSON parsed but does not match the schema; message lists every bad field.
struct ScenarioSchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Schema-clean but semantically invalid; carries the violation list.
struct ScenarioValidationError : std::runtime_error {
  std::vector<Violation> violations;
  explicit ScenarioValidationError(std::vector<Violation> v);
};

/// Schema check + defaults only; no semantic validation.
Scenario parse_scenario(const std::string& text);

/// parse_scenario + validate; throws ScenarioValidationError when dirty.
Scenario load_scenario(const std::string& text);
Scenario load_scenario_file(const std::string& path);

/// Full-precision JSON; load_scenario(emit_scenario(s)) reproduces s exactly.
std::string emit_scenario(const Scenario& s);

/// Pure. Empty result iff every invariant holds.
std::vector<Violation> validate(const Scenario& s);

/// Feeder-local checks only (everything except coupling-bus resolution).
std::vector<Violation> validate_feeder(const DistributionSystem& d);

/// Scales every flow limit by `factor` and widens each voltage band about its
/// midpoint by the same factor. Used for congestion-free studies.
Scenario relax_limits(Scenario s, double factor);

// Topology index of a (valid) feeder for model builders.
struct FeederIndex {
  std::vector<std::string> node_ids;      // position = node index
  int substation = -1;
  std::vector<int> branch_parent;         // per branch: parent node index
  std::vector<int> branch_child;          // per branch: child node index
  std::vector<std::vector<int>> out_branches;  // per node: branches it parents
  std::vector<int> in_branch;             // per node: branch above it, -1 at root

  int node_index(const std::string& id) const;
};

FeederIndex index_feeder(const DistributionSystem& d);

}  // namespace gridseam
