// Bounded-variable primal simplex, two-phase, with dense basis inverse and
// periodic refactorization. Dantzig pricing with a Bland's-rule fallback
// after a pivot-count threshold (anti-cycling).
#include "gridseam/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gridseam {

namespace {

bool is_free_lo(double lo) { return lo <= -kInfBound; }
bool is_free_up(double up) { return up >= kInfBound; }

enum VarState : signed char { kAtLower = 0, kAtUpper = 1, kBasic = 2, kFreeNb = 3 };

struct Simplex {
  const SolveOptions& opt;
  int m;        // rows
  int n_struct; // structural variables
  int n_slack;  // == m
  int n_total;  // structural + slack + artificial

  std::vector<std::vector<std::pair<int, double>>> cols;
  std::vector<double> lo, up, cost, x;
  std::vector<double> rhs;
  std::vector<int> basic;              // row -> column
  std::vector<signed char> state;      // per column
  std::vector<double> binv;            // m*m, row-major
  long iterations = 0;
  long bland_threshold = 0;
  long hard_cap = 0;
  int pivots_since_refactor = 0;
  bool bland = false;

  explicit Simplex(const LinearProgram& lp, const SolveOptions& o) : opt(o) {
    m = static_cast<int>(lp.constraints.size());
    n_struct = lp.num_vars;
    n_slack = m;
    n_total = n_struct + n_slack;  // artificials appended in start_basis()

    cols.resize(n_total);
    lo.assign(n_total, 0.0);
    up.assign(n_total, 0.0);
    cost.assign(n_total, 0.0);
    rhs.resize(m);

    for (int j = 0; j < n_struct; ++j) {
      lo[j] = lp.lower[j];
      up[j] = lp.upper[j];
    }
    for (int i = 0; i < m; ++i) {
      const ConstraintRow& row = lp.constraints[i];
      rhs[i] = row.rhs;
      for (const auto& [j, v] : row.coeffs) {
        if (v != 0.0) cols[j].push_back({i, v});
      }
      int s = n_struct + i;
      cols[s].push_back({i, 1.0});
      switch (row.rel) {
        case Relation::eq:
          lo[s] = 0.0;
          up[s] = 0.0;
          break;
        case Relation::le:  // a'x + s = b, s >= 0
          lo[s] = 0.0;
          up[s] = kInfBound;
          break;
        case Relation::ge:  // a'x + s = b, s <= 0
          lo[s] = -kInfBound;
          up[s] = 0.0;
          break;
      }
    }
    bland_threshold = 50L * (m + n_total) + 1000;
    hard_cap = 10 * bland_threshold + 20000;
  }

  bool fixed_var(int j) const { return up[j] - lo[j] <= 0.0; }

  double nearest_bound_value(int j) const {
    if (!is_free_lo(lo[j]) && !is_free_up(up[j]))
      return (std::abs(lo[j]) <= std::abs(up[j])) ? lo[j] : up[j];
    if (!is_free_lo(lo[j])) return lo[j];
    if (!is_free_up(up[j])) return up[j];
    return 0.0;
  }

  // Starting basis: one artificial per row, sized to close the residual left
  // by structural variables at their bounds and slacks clamped into bounds.
  void start_basis() {
    x.assign(n_total, 0.0);
    state.assign(n_total, kAtLower);
    std::vector<double> act(m, 0.0);
    for (int j = 0; j < n_total; ++j) {
      double v = nearest_bound_value(j);
      if (is_free_lo(lo[j]) && is_free_up(up[j])) {
        x[j] = 0.0;
        state[j] = kFreeNb;
      } else {
        x[j] = v;
        state[j] = (v == lo[j]) ? kAtLower : kAtUpper;
      }
      if (x[j] != 0.0)
        for (const auto& [i, a] : cols[j]) act[i] += a * x[j];
    }
    basic.resize(m);
    binv.assign(static_cast<size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i) {
      double r = rhs[i] - act[i];
      double sigma = (r >= 0.0) ? 1.0 : -1.0;
      int aj = n_total + i;
      cols.push_back({{i, sigma}});
      lo.push_back(0.0);
      up.push_back(kInfBound);
      cost.push_back(0.0);
      x.push_back(std::abs(r));
      state.push_back(kBasic);
      basic[i] = aj;
      binv[static_cast<size_t>(i) * m + i] = sigma;
    }
  }

  int num_cols() const { return static_cast<int>(cols.size()); }
  bool is_artificial(int j) const { return j >= n_total; }

  std::vector<double> ftran(int j) const {
    std::vector<double> alpha(m, 0.0);
    for (const auto& [r, v] : cols[j]) {
      const double* bc = binv.data() + r;  // column r of binv, stride m
      for (int i = 0; i < m; ++i) alpha[i] += v * bc[static_cast<size_t>(i) * m];
    }
    return alpha;
  }

  std::vector<double> btran() const {
    std::vector<double> y(m, 0.0);
    for (int i = 0; i < m; ++i) {
      double cb = cost[basic[i]];
      if (cb == 0.0) continue;
      const double* br = binv.data() + static_cast<size_t>(i) * m;
      for (int r = 0; r < m; ++r) y[r] += cb * br[r];
    }
    return y;
  }

  void refactor() {
    // Dense Gauss-Jordan inverse of the basis matrix.
    std::vector<double> a(static_cast<size_t>(m) * m, 0.0);
    std::vector<double> inv(static_cast<size_t>(m) * m, 0.0);
    for (int k = 0; k < m; ++k) {
      for (const auto& [i, v] : cols[basic[k]]) a[static_cast<size_t>(i) * m + k] += v;
      inv[static_cast<size_t>(k) * m + k] = 1.0;
    }
    for (int c = 0; c < m; ++c) {
      int piv = -1;
      double best = 0.0;
      for (int i = c; i < m; ++i) {
        double v = std::abs(a[static_cast<size_t>(i) * m + c]);
        if (v > best) {
          best = v;
          piv = i;
        }
      }
      if (piv < 0 || best < opt.pivot_tol)
        throw NumericalBreakdown("singular basis during refactorization");
      if (piv != c) {
        for (int k = 0; k < m; ++k) {
          std::swap(a[static_cast<size_t>(piv) * m + k], a[static_cast<size_t>(c) * m + k]);
          std::swap(inv[static_cast<size_t>(piv) * m + k], inv[static_cast<size_t>(c) * m + k]);
        }
      }
      double d = a[static_cast<size_t>(c) * m + c];
      for (int k = 0; k < m; ++k) {
        a[static_cast<size_t>(c) * m + k] /= d;
        inv[static_cast<size_t>(c) * m + k] /= d;
      }
      for (int i = 0; i < m; ++i) {
        if (i == c) continue;
        double f = a[static_cast<size_t>(i) * m + c];
        if (f == 0.0) continue;
        for (int k = 0; k < m; ++k) {
          a[static_cast<size_t>(i) * m + k] -= f * a[static_cast<size_t>(c) * m + k];
          inv[static_cast<size_t>(i) * m + k] -= f * inv[static_cast<size_t>(c) * m + k];
        }
      }
    }
    binv = std::move(inv);
    pivots_since_refactor = 0;
  }

  void recompute_basic_values() {
    std::vector<double> r = rhs;
    for (int j = 0; j < num_cols(); ++j) {
      if (state[j] == kBasic || x[j] == 0.0) continue;
      for (const auto& [i, v] : cols[j]) r[i] -= v * x[j];
    }
    for (int i = 0; i < m; ++i) {
      double xb = 0.0;
      const double* br = binv.data() + static_cast<size_t>(i) * m;
      for (int k = 0; k < m; ++k) xb += br[k] * r[k];
      x[basic[i]] = xb;
    }
  }

  // Product-form update of binv for a pivot on (row r, entering direction alpha).
  void update_binv(const std::vector<double>& alpha, int r) {
    double piv = alpha[r];
    double* rowr = binv.data() + static_cast<size_t>(r) * m;
    for (int k = 0; k < m; ++k) rowr[k] /= piv;
    for (int i = 0; i < m; ++i) {
      if (i == r) continue;
      double f = alpha[i];
      if (f == 0.0) continue;
      double* rowi = binv.data() + static_cast<size_t>(i) * m;
      for (int k = 0; k < m; ++k) rowi[k] -= f * rowr[k];
    }
  }

  double reduced_cost(int j, const std::vector<double>& y) const {
    double d = cost[j];
    for (const auto& [i, v] : cols[j]) d -= y[i] * v;
    return d;
  }

  // Returns entering column or -1 when the current basis is optimal.
  int choose_entering(const std::vector<double>& y) const {
    int best = -1;
    double best_score = opt.opt_tol;
    for (int j = 0; j < num_cols(); ++j) {
      if (state[j] == kBasic || fixed_var(j)) continue;
      double d = reduced_cost(j, y);
      double score = 0.0;
      if (state[j] == kAtLower && d < -opt.opt_tol) score = -d;
      else if (state[j] == kAtUpper && d > opt.opt_tol) score = d;
      else if (state[j] == kFreeNb && std::abs(d) > opt.opt_tol) score = std::abs(d);
      else continue;
      if (bland) return j;  // first eligible index
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    return best;
  }

  struct Ratio {
    double theta = std::numeric_limits<double>::infinity();
    int row = -1;        // blocking basic row, or -1
    bool bound_flip = false;
    bool to_upper = false;  // bound the leaving basic variable hits
  };

  Ratio ratio_test(int q, double dir, const std::vector<double>& alpha) const {
    Ratio res;
    // The entering variable's own opposite bound.
    if (!is_free_lo(lo[q]) && !is_free_up(up[q])) {
      res.theta = up[q] - lo[q];
      res.bound_flip = true;
    }
    for (int i = 0; i < m; ++i) {
      double delta = -dir * alpha[i];  // d x_B[i] / d theta
      if (std::abs(delta) <= opt.pivot_tol) continue;
      int bj = basic[i];
      double t;
      bool hits_upper;
      if (delta > 0.0) {
        if (is_free_up(up[bj])) continue;
        t = (up[bj] - x[bj]) / delta;
        hits_upper = true;
      } else {
        if (is_free_lo(lo[bj])) continue;
        t = (lo[bj] - x[bj]) / delta;
        hits_upper = false;
      }
      if (t < 0.0) t = 0.0;  // basic value marginally past its bound
      bool better;
      if (t < res.theta - 1e-12) {
        better = true;
      } else if (t <= res.theta + 1e-12 && res.row >= 0) {
        // Tie-break: Bland wants the lowest leaving index; otherwise prefer
        // the largest pivot magnitude for stability.
        better = bland ? (bj < basic[res.row])
                       : (std::abs(alpha[i]) > std::abs(alpha[res.row]));
      } else {
        better = t < res.theta;
      }
      if (better) {
        res.theta = t;
        res.row = i;
        res.bound_flip = false;
        res.to_upper = hits_upper;
      }
    }
    return res;
  }

  void apply_step(int q, double dir, const std::vector<double>& alpha, const Ratio& r) {
    for (int i = 0; i < m; ++i) {
      double delta = -dir * alpha[i];
      if (delta != 0.0) x[basic[i]] += delta * r.theta;
    }
    x[q] += dir * r.theta;
    if (r.bound_flip) {
      state[q] = (state[q] == kAtLower) ? kAtUpper : kAtLower;
      x[q] = (state[q] == kAtLower) ? lo[q] : up[q];
      return;
    }
    int leave = basic[r.row];
    x[leave] = r.to_upper ? up[leave] : lo[leave];
    state[leave] = r.to_upper ? kAtUpper : kAtLower;
    if (is_artificial(leave)) {  // freeze: artificials never re-enter
      x[leave] = 0.0;
      up[leave] = 0.0;
    }
    basic[r.row] = q;
    state[q] = kBasic;
    update_binv(alpha, r.row);
    if (++pivots_since_refactor >= opt.refactor_interval) {
      refactor();
      recompute_basic_values();
    }
  }

  // Runs the simplex loop for the current cost vector.
  // Returns true if optimal, false if unbounded.
  bool iterate() {
    while (true) {
      if (++iterations > hard_cap)
        throw NumericalBreakdown("pivot limit exceeded after Bland fallback");
      if (iterations > bland_threshold) bland = true;
      std::vector<double> y = btran();
      int q = choose_entering(y);
      if (q < 0) return true;
      std::vector<double> alpha = ftran(q);
      double d = reduced_cost(q, y);
      double dir;
      if (state[q] == kAtLower) dir = 1.0;
      else if (state[q] == kAtUpper) dir = -1.0;
      else dir = (d < 0.0) ? 1.0 : -1.0;
      Ratio r = ratio_test(q, dir, alpha);
      if (!std::isfinite(r.theta)) return false;
      apply_step(q, dir, alpha, r);
    }
  }

  double phase1_objective() const {
    double s = 0.0;
    for (int j = n_total; j < num_cols(); ++j) s += std::max(0.0, x[j]);
    return s;
  }

  // After phase 1: pivot artificials out of the basis where possible and
  // freeze every artificial at zero.
  void retire_artificials() {
    for (int i = 0; i < m; ++i) {
      int bj = basic[i];
      if (!is_artificial(bj)) continue;
      const double* rowi = binv.data() + static_cast<size_t>(i) * m;
      int repl = -1;
      double best = opt.pivot_tol;
      for (int j = 0; j < n_total; ++j) {
        if (state[j] == kBasic) continue;
        double a = 0.0;
        for (const auto& [r, v] : cols[j]) a += rowi[r] * v;
        if (std::abs(a) > best) {
          best = std::abs(a);
          repl = j;
        }
      }
      if (repl >= 0) {
        std::vector<double> alpha = ftran(repl);
        double saved = x[repl];
        basic[i] = repl;
        state[repl] = kBasic;
        x[repl] = saved;  // degenerate pivot, values unchanged
        state[bj] = kAtLower;
        x[bj] = 0.0;
        update_binv(alpha, i);
      }
      // else: redundant row, keep the artificial basic pinned at zero.
    }
    for (int j = n_total; j < num_cols(); ++j) {
      lo[j] = 0.0;
      up[j] = 0.0;
      cost[j] = 0.0;
      if (state[j] != kBasic) x[j] = 0.0;
    }
    refactor();
    recompute_basic_values();
  }

  double data_scale() const {
    double s = 0.0;
    for (double v : rhs) s = std::max(s, std::abs(v));
    return 1.0 + s;
  }
};

double constraint_activity(const ConstraintRow& row, const std::vector<double>& x) {
  double a = 0.0;
  for (const auto& [j, v] : row.coeffs) a += v * x[j];
  return a;
}

}  // namespace

int LinearProgram::add_var(const std::string& name, double lo, double hi, double cost) {
  var_names.push_back(name);
  lower.push_back(lo);
  upper.push_back(hi);
  objective.push_back(cost);
  return num_vars++;
}

int LinearProgram::add_constraint(ConstraintRow row) {
  constraints.push_back(std::move(row));
  return static_cast<int>(constraints.size()) - 1;
}

void LinearProgram::check_valid() const {
  std::vector<std::string> problems;
  if (static_cast<int>(objective.size()) != num_vars)
    problems.push_back("objective length != num_vars");
  if (static_cast<int>(lower.size()) != num_vars || static_cast<int>(upper.size()) != num_vars)
    problems.push_back("bound vector length != num_vars");
  for (int j = 0; j < num_vars && j < static_cast<int>(objective.size()); ++j) {
    if (std::isnan(objective[j]))
      problems.push_back("objective[" + std::to_string(j) + "] is NaN");
  }
  int nb = static_cast<int>(std::min(lower.size(), upper.size()));
  for (int j = 0; j < nb; ++j) {
    if (std::isnan(lower[j]) || std::isnan(upper[j]))
      problems.push_back("bound[" + std::to_string(j) + "] is NaN");
    else if (lower[j] > upper[j])
      problems.push_back("lower > upper for variable " + std::to_string(j));
  }
  for (size_t i = 0; i < constraints.size(); ++i) {
    const ConstraintRow& row = constraints[i];
    if (std::isnan(row.rhs) || std::abs(row.rhs) >= kInfBound)
      problems.push_back("constraint " + std::to_string(i) + " rhs not finite");
    for (const auto& [j, v] : row.coeffs) {
      if (j < 0 || j >= num_vars)
        problems.push_back("constraint " + std::to_string(i) + " references variable " +
                           std::to_string(j) + " out of range");
      if (std::isnan(v) || std::abs(v) >= kInfBound)
        problems.push_back("constraint " + std::to_string(i) + " coefficient not finite");
    }
  }
  if (!problems.empty()) {
    std::string msg = "malformed LP:";
    for (const std::string& p : problems) msg += "\n  - " + p;
    throw LpFormatError(msg);
  }
}

std::string LinearProgram::debug_dump() const {
  std::ostringstream os;
  os.precision(12);
  auto vname = [&](int j) {
    return (j < static_cast<int>(var_names.size()) && !var_names[j].empty())
               ? var_names[j]
               : "x" + std::to_string(j);
  };
  os << "min";
  for (int j = 0; j < num_vars; ++j)
    if (objective[j] != 0.0) os << " + " << objective[j] << "*" << vname(j);
  os << "\n";
  for (const ConstraintRow& row : constraints) {
    os << (row.name.empty() ? "row" : row.name) << ":";
    for (const auto& [j, v] : row.coeffs) os << " + " << v << "*" << vname(j);
    switch (row.rel) {
      case Relation::eq: os << " == "; break;
      case Relation::le: os << " <= "; break;
      case Relation::ge: os << " >= "; break;
    }
    os << row.rhs << "\n";
  }
  for (int j = 0; j < num_vars; ++j)
    os << vname(j) << " in [" << lower[j] << ", " << upper[j] << "]\n";
  return os.str();
}

LpSolution solve(const LinearProgram& lp, const SolveOptions& opts) {
  lp.check_valid();
  LpSolution sol;
  int m = static_cast<int>(lp.constraints.size());
  int n = lp.num_vars;
  if (m == 0 && n == 0) {
    sol.status = SolveStatus::optimal;
    return sol;
  }

  Simplex s(lp, opts);
  s.start_basis();

  // Phase 1: minimize the artificial total.
  for (int j = s.n_total; j < s.num_cols(); ++j) s.cost[j] = 1.0;
  s.refactor();
  s.recompute_basic_values();
  if (!s.iterate())
    throw NumericalBreakdown("phase-1 objective reported unbounded");
  if (s.phase1_objective() > opts.feas_tol * s.data_scale()) {
    sol.status = SolveStatus::infeasible;
    return sol;
  }
  s.retire_artificials();

  // Phase 2: the real objective.
  for (int j = 0; j < s.n_struct; ++j) s.cost[j] = lp.objective[j];
  s.bland = false;
  s.iterations = 0;
  if (!s.iterate()) {
    sol.status = SolveStatus::unbounded;
    return sol;
  }

  sol.status = SolveStatus::optimal;
  sol.primal.assign(s.x.begin(), s.x.begin() + n);
  std::vector<double> y = s.btran();
  sol.duals = y;
  sol.reduced_costs.resize(n);
  for (int j = 0; j < n; ++j) sol.reduced_costs[j] = s.reduced_cost(j, y);
  sol.objective_value = 0.0;
  for (int j = 0; j < n; ++j) sol.objective_value += lp.objective[j] * sol.primal[j];

  // Residual self-check: fail loudly instead of returning a wrong answer.
  ResidualReport rep = verify_kkt(lp, sol, opts);
  if (!rep.pass)
    throw NumericalBreakdown("solution failed its KKT residual check (primal " +
                             std::to_string(rep.max_primal) + ", dual " +
                             std::to_string(rep.max_dual) + ", comp " +
                             std::to_string(rep.max_comp) + ")");
  return sol;
}

ResidualReport verify_kkt(const LinearProgram& lp, const LpSolution& sol,
                          const SolveOptions& opts) {
  if (sol.status != SolveStatus::optimal)
    throw LpFormatError("verify_kkt requires an optimal solution");
  if (static_cast<int>(sol.primal.size()) != lp.num_vars ||
      sol.duals.size() != lp.constraints.size())
    throw LpFormatError("verify_kkt: solution dimensions do not match the LP");

  ResidualReport rep;
  double scale = 1.0;
  for (const ConstraintRow& row : lp.constraints) scale = std::max(scale, std::abs(row.rhs));
  for (int j = 0; j < lp.num_vars; ++j) {
    if (!is_free_lo(lp.lower[j])) scale = std::max(scale, std::abs(lp.lower[j]));
    if (!is_free_up(lp.upper[j])) scale = std::max(scale, std::abs(lp.upper[j]));
  }
  double cscale = 1.0;
  for (double c : lp.objective) cscale = std::max(cscale, std::abs(c));

  const std::vector<double>& x = sol.primal;
  const std::vector<double>& y = sol.duals;

  // Primal feasibility: rows then bounds.
  for (size_t i = 0; i < lp.constraints.size(); ++i) {
    const ConstraintRow& row = lp.constraints[i];
    double act = constraint_activity(row, x);
    double viol = 0.0;
    double slack = 0.0;  // signed distance to binding
    switch (row.rel) {
      case Relation::eq:
        viol = std::abs(act - row.rhs);
        break;
      case Relation::le:
        viol = std::max(0.0, act - row.rhs);
        slack = row.rhs - act;
        break;
      case Relation::ge:
        viol = std::max(0.0, row.rhs - act);
        slack = act - row.rhs;
        break;
    }
    rep.max_primal = std::max(rep.max_primal, viol);
    // Row dual feasibility and complementarity.
    if (row.rel == Relation::le)
      rep.max_dual = std::max(rep.max_dual, std::max(0.0, y[i]));
    else if (row.rel == Relation::ge)
      rep.max_dual = std::max(rep.max_dual, std::max(0.0, -y[i]));
    if (row.rel != Relation::eq)
      rep.max_comp = std::max(rep.max_comp, std::abs(y[i] * std::max(0.0, slack)));
  }
  for (int j = 0; j < lp.num_vars; ++j) {
    if (!is_free_lo(lp.lower[j]))
      rep.max_primal = std::max(rep.max_primal, lp.lower[j] - x[j]);
    if (!is_free_up(lp.upper[j]))
      rep.max_primal = std::max(rep.max_primal, x[j] - lp.upper[j]);
  }

  // Variable dual feasibility and complementarity via reduced costs.
  double bound_eps = opts.feas_tol * scale * 10.0;
  for (int j = 0; j < lp.num_vars; ++j) {
    double z = lp.objective[j];
    for (size_t i = 0; i < lp.constraints.size(); ++i) {
      for (const auto& [k, v] : lp.constraints[i].coeffs)
        if (k == j) z -= y[i] * v;
    }
    bool has_lo = !is_free_lo(lp.lower[j]);
    bool has_up = !is_free_up(lp.upper[j]);
    bool at_lo = has_lo && x[j] <= lp.lower[j] + bound_eps;
    bool at_up = has_up && x[j] >= lp.upper[j] - bound_eps;
    if (at_lo && at_up) continue;  // fixed variable: any z admissible
    if (at_lo) {
      rep.max_dual = std::max(rep.max_dual, std::max(0.0, -z));
    } else if (at_up) {
      rep.max_dual = std::max(rep.max_dual, std::max(0.0, z));
    } else {
      rep.max_dual = std::max(rep.max_dual, std::abs(z));
    }
    if (has_lo && !at_lo && z > 0.0)
      rep.max_comp = std::max(rep.max_comp, z * (x[j] - lp.lower[j]));
    if (has_up && !at_up && z < 0.0)
      rep.max_comp = std::max(rep.max_comp, -z * (lp.upper[j] - x[j]));
  }

  rep.pass = rep.max_primal <= opts.feas_tol * scale &&
             rep.max_dual <= opts.opt_tol * cscale * 10.0 &&
             rep.max_comp <= opts.opt_tol * scale * cscale * 10.0;
  return rep;
}

}  // namespace gridseam
