// Whole-system benchmark: one LP spanning the transmission grid and every
// feeder at once. The two-stage pipeline (bid curves -> market -> settlement)
// is audited against it; on instances with a unique optimum the two must
// agree dispatch-for-dispatch and price-for-price.
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "gridseam/dso.hpp"
#include "gridseam/grid.hpp"
#include "gridseam/iso.hpp"
#include "gridseam/lp.hpp"
#include "gridseam/settlement.hpp"

namespace gridseam {

struct IdealError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The monolithic LP plus bookkeeping. `grid` and `feeders` index into `lp`;
/// their own lp members stay empty.
struct IdealModel {
  LinearProgram lp;
  IsoModel grid;
  std::vector<DsoModel> feeders;  // one per distribution, free interchange
};

/// Single LP: the DC-OPF rows plus every feeder's rows, coupled through each
/// feeder's substation export variable at its coupling bus. No bid-curve
/// abstraction anywhere. Throws ScenarioValidationError when s is invalid.
IdealModel build_ideal_lp(const Scenario& s);

struct IdealResult {
  std::string scenario;
  double objective = 0.0;                         // $/h
  std::vector<double> gen_dispatch;               // MW per generator
  std::vector<double> substation_injections;      // MW per distribution
  std::vector<double> bus_lmps;                   // $/MWh per bus
  std::vector<double> line_flows;                 // MW per line
  std::vector<std::vector<double>> agg_dispatch;  // net MW, [dist][aggregator]
  std::vector<std::vector<double>> node_dlmps;    // $/MWh, [dist][node]
};

/// Solves the monolithic LP. Prices are the balance-row duals.
IdealResult solve_ideal(const Scenario& s, const SolveOptions& opts = {});

/// Multiple-optima probe: re-solves with block costs nudged by +/-1e-7 along
/// a fixed pseudo-random direction (and again with balance rhs nudged the
/// same way) and reports true when any dispatch or price moves by more than
/// 1e-5. Deterministic for a given scenario.
bool ideal_degenerate(const Scenario& s, const SolveOptions& opts = {});

/// Everything the two-stage pipeline produces for one scenario.
struct CoordinationResult {
  std::string scenario;
  std::vector<PwlConvexCost> curves;  // per distribution
  std::vector<DsoOfferAt> offers;
  IsoResult market;
  std::vector<DsoSettlement> settlements;
  double total_cost = 0.0;  // market objective + feeder fixed costs, $/h
};

/// Traces every feeder's bid curve, clears the market, settles every feeder.
CoordinationResult run_coordination(const Scenario& s, const TraceOptions& opts = {});

struct ComparisonReport {
  std::string scenario;
  double tol = 1e-5;
  bool pass = false;        // all four deviation categories <= tol
  bool degenerate = false;  // advisory: the benchmark LP has multiple optima
  bool objectives_match = false;  // 1e-6 relative; holds even when degenerate
  double gen_dev = 0.0;           // max |coordination - benchmark|, MW
  double agg_dev = 0.0;           // aggregators and interchanges, MW
  double price_dev = 0.0;         // bus LMPs and node D-LMPs, $/MWh
  double payment_dev = 0.0;       // every participant payment, $/h
  double objective_rel = 0.0;     // |total_cost - objective| / max(1, |objective|)
};

/// Max per-category deviations between the two solutions. Throws IdealError
/// when the results carry different scenario names.
ComparisonReport compare(const Scenario& s, const CoordinationResult& coord,
                         const IdealResult& ideal, double tol = 1e-5);

/// run_coordination + solve_ideal + compare in one call.
ComparisonReport audit(const Scenario& s, double tol = 1e-5,
                       const TraceOptions& opts = {});

/// JSON with the per-category deviations and flags.
std::string comparison_json(const ComparisonReport& r);

}  // namespace gridseam
