// Minimal linear-programming kernel: bounded-variable primal simplex with
// exact dual extraction. Every optimization problem in this project is
// formulated as a LinearProgram and passed to solve().
#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gridseam {

// Bound magnitudes at or above this sentinel are treated as infinite.
inline constexpr double kInfBound = 1e30;

enum class Relation { eq, le, ge };

struct ConstraintRow {
  std::vector<std::pair<int, double>> coeffs;  // sparse (variable index, value)
  Relation rel = Relation::eq;
  double rhs = 0.0;
  std::string name;
};

/// min c'x  subject to the rows and  lower <= x <= upper.
struct LinearProgram {
  int num_vars = 0;
  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<ConstraintRow> constraints;
  std::vector<std::string> var_names;

  int add_var(const std::string& name, double lo, double hi, double cost);
  int add_constraint(ConstraintRow row);

  // Throws LpFormatError listing every malformed field.
  void check_valid() const;

  // Plain-text listing, one constraint per line.
  std::string debug_dump() const;
};

enum class SolveStatus { optimal, infeasible, unbounded };

/// Dual convention, fixed project-wide: for the minimization LP, duals[i] is
/// the sensitivity d(objective)/d(rhs_i). Power-balance rows therefore price
/// in $/MWh when the rhs is in MW.
struct LpSolution {
  SolveStatus status = SolveStatus::optimal;
  std::vector<double> primal;         // structural variables
  std::vector<double> duals;          // one per constraint
  std::vector<double> reduced_costs;  // one per structural variable
  double objective_value = 0.0;
};

struct SolveOptions {
  double feas_tol = 1e-8;
  double opt_tol = 1e-8;
  double pivot_tol = 1e-10;
  int refactor_interval = 100;  // dense refactorization cadence, in pivots
};

// Malformed input; never reported as a solver status.
struct LpFormatError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raised after anti-cycling safeguards are exhausted or the final solution
// fails its own residual check. Never a silent wrong answer.
struct NumericalBreakdown : std::runtime_error {
  using std::runtime_error::runtime_error;
};

LpSolution solve(const LinearProgram& lp, const SolveOptions& opts = {});

struct ResidualReport {
  double max_primal = 0.0;  // worst constraint or bound violation
  double max_dual = 0.0;    // worst dual-feasibility violation
  double max_comp = 0.0;    // worst complementary-slackness product
  bool pass = false;
};

/// Recomputes all KKT residuals of (lp, sol) from scratch, independent of the
/// solver's internal state. sol.status must be optimal.
ResidualReport verify_kkt(const LinearProgram& lp, const LpSolution& sol,
                          const SolveOptions& opts = {});

}  // namespace gridseam
