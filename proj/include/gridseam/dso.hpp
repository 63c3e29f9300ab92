// DSO-level feeder LP and the parametric trace of its value function
// c^dso(p^dso) — the convex piecewise-linear bid the DSO submits upstream.
#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gridseam/grid.hpp"
#include "gridseam/lp.hpp"

namespace gridseam {

// Domain failures of the DSO layer (empty bid range, trace non-convergence,
// dispatch requests outside the offered range).
struct DsoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PwlPoint {
  double p = 0.0;  // MW
  double c = 0.0;  // $/h
};

/// Piecewise-linear convex cost curve. A single-point curve (empty slopes)
/// represents a fixed-injection feeder whose feasible range is one value.
struct PwlConvexCost {
  std::vector<PwlPoint> breakpoints;  // p strictly increasing
  std::vector<double> slopes;         // one per segment, $/MWh

  double p_min() const { return breakpoints.front().p; }
  double p_max() const { return breakpoints.back().p; }
  /// Linear interpolation; p is clamped to [p_min, p_max].
  double value_at(double p) const;
};

/// Block-decomposed marginal-cost offer derived from a curve.
struct DsoOffer {
  double p_min = 0.0;
  double p_max = 0.0;
  double fixed_cost = 0.0;            // c(p_min), $/h
  std::vector<OfferBlock> blocks;     // nondecreasing prices
};

enum class DsoMode {
  fixed_p,  // p^dso enters the substation balance rhs as a constant
  free_p,   // p^dso is a free variable (range scans, price-taking solves)
};

/// Feeder LP plus the variable/row bookkeeping callers need to read
/// dispatches and duals back out of a solution.
struct DsoModel {
  LinearProgram lp;
  std::vector<std::vector<int>> agg_block_vars;  // per aggregator (empty: REAG)
  std::vector<int> balance_row;                  // per node, active power
  std::vector<int> qbalance_row;                 // per node, reactive power
  int coupling_row = -1;                         // substation active balance
  int p_var = -1;                                // only in free_p mode
  std::vector<int> pl_vars, ql_vars;             // per branch
  std::vector<int> u_vars;                       // per node
  int q_var = -1;                                // substation reactive

  /// Per-aggregator total dispatch (REAG: its fixed profile).
  std::vector<double> aggregate_dispatch(const DistributionSystem& d,
                                         const LpSolution& sol) const;
};

/// Throws ScenarioValidationError when the feeder is invalid.
DsoModel build_dso_model(const DistributionSystem& d, DsoMode mode, double p_dso = 0.0);

/// Appends the feeder's variables and rows onto an existing LP (whole-system
/// builds). The returned bookkeeping indexes into `lp`; the returned model's
/// own lp member stays empty.
DsoModel append_dso_model(LinearProgram& lp, const DistributionSystem& d, DsoMode mode,
                          double p_dso = 0.0);

/// Convenience: the LP of build_dso_model(d, fixed_p, p_dso).
LinearProgram build_dso_lp(const DistributionSystem& d, double p_dso);

/// Min/max substation export over the feeder constraint set.
/// Throws DsoError("empty bid range") when nothing is feasible.
std::pair<double, double> feasible_range(const DistributionSystem& d,
                                         const SolveOptions& lp_opts = {});

struct TraceOptions {
  double slope_merge_tol = 1e-7;  // $/MWh
  double curve_tol = 1e-8;        // scaled by (1 + |value|)
  double x_tol = 1e-9;            // scaled by (p_max - p_min)
  int max_recursion = 64;
  SolveOptions lp;
};

/// Exact value function of the feeder LP on [p_min, p_max] via recursive
/// supporting-line bisection on (optimal value, coupling-row dual) pairs.
PwlConvexCost trace_bid_curve(const DistributionSystem& d, const TraceOptions& opts = {});

/// One block per segment; adjacent slopes closer than slope_merge_tol merge.
DsoOffer to_offer_blocks(const PwlConvexCost& curve, double slope_merge_tol = 1e-7);

struct ConvexityReport {
  bool pass = true;
  double max_slope_decrease = 0.0;  // $/MWh, 0 when nondecreasing
};

ConvexityReport convexity_check(const PwlConvexCost& curve, double slope_merge_tol = 1e-7);

/// CSV "breakpoint_index,p_mw,cost_per_h".
std::string curve_breakpoints_csv(const PwlConvexCost& curve);
/// CSV "segment_index,marginal_cost_per_mwh".
std::string curve_marginals_csv(const PwlConvexCost& curve);

}  // namespace gridseam
