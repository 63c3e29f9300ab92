#include "gridseam/dso.hpp"

#include <algorithm>
#include <cmath>

#include "gridseam/io.hpp"

namespace gridseam {

namespace {

double curve_tol_at(const TraceOptions& o, double v) {
  return o.curve_tol * (1.0 + std::abs(v));
}

struct Probe {
  double v = 0.0;  // optimal value, $/h
  double s = 0.0;  // coupling-row dual, $/MWh
};

class Tracer {
 public:
  Tracer(const DistributionSystem& d, const TraceOptions& opts, double range)
      : d_(d), opts_(opts), x_tol_(opts.x_tol * range) {}

  Probe eval(double p) const {
    DsoModel m = build_dso_model(d_, DsoMode::fixed_p, p);
    LpSolution sol = solve(m.lp, opts_.lp);
    if (sol.status == SolveStatus::infeasible)
      throw DsoError("feeder LP infeasible inside the bid range at p = " +
                     format_double(p));
    if (sol.status == SolveStatus::unbounded)
      throw DsoError("feeder LP unbounded at p = " + format_double(p) +
                     " (offer data admits unlimited profit)");
    return {sol.objective_value, sol.duals[m.coupling_row]};
  }

  // Supporting-line bisection on [a, b]; appends interior breakpoints (only)
  // to out_, in increasing p order.
  void refine(double a, Probe pa, double b, Probe pb, int depth, bool reprobed) {
    if (b - a <= x_tol_) return;
    if (std::abs(pa.s - pb.s) <= opts_.slope_merge_tol) return;
    if (depth > opts_.max_recursion)
      throw DsoError("bid curve trace did not converge on [" + format_double(a) +
                     ", " + format_double(b) + "]");

    double x = (pa.v - pa.s * a - pb.v + pb.s * b) / (pb.s - pa.s);
    if (!(x > a + x_tol_ && x < b - x_tol_)) {
      if (!reprobed) {
        // A dual at a domain endpoint (or a kink) is only a subgradient; take
        // one-sided slopes from short finite differences and retry.
        double delta = std::min(10.0 * x_tol_, 0.25 * (b - a));
        if (delta > 0.0) {
          Probe ra{pa.v, (eval(a + delta).v - pa.v) / delta};
          Probe rb{pb.v, (pb.v - eval(b - delta).v) / delta};
          refine(a, ra, b, rb, depth + 1, true);
          return;
        }
      }
      x = 0.5 * (a + b);  // plain bisection fallback
    }

    Probe px = eval(x);
    double la = pa.v + pa.s * (x - a);
    double lb = pb.v + pb.s * (x - b);
    if (px.v <= la + curve_tol_at(opts_, px.v) &&
        px.v <= lb + curve_tol_at(opts_, px.v)) {
      // Both supporting lines meet the curve here: v is linear on each side,
      // so x is the single breakpoint inside (a, b).
      out_.push_back({x, px.v});
      return;
    }
    refine(a, pa, x, px, depth + 1, false);
    out_.push_back({x, px.v});
    refine(x, px, b, pb, depth + 1, false);
  }

  std::vector<PwlPoint> take() { return std::move(out_); }
  double x_tol() const { return x_tol_; }

 private:
  const DistributionSystem& d_;
  const TraceOptions& opts_;
  double x_tol_;
  std::vector<PwlPoint> out_;
};

}  // namespace

double PwlConvexCost::value_at(double p) const {
  const auto& bp = breakpoints;
  if (bp.empty()) return 0.0;
  if (p <= bp.front().p) return bp.front().c;
  if (p >= bp.back().p) return bp.back().c;
  for (size_t i = 1; i < bp.size(); ++i) {
    if (p <= bp[i].p) {
      double t = (p - bp[i - 1].p) / (bp[i].p - bp[i - 1].p);
      return bp[i - 1].c + t * (bp[i].c - bp[i - 1].c);
    }
  }
  return bp.back().c;
}

DsoModel append_dso_model(LinearProgram& lp, const DistributionSystem& d, DsoMode mode,
                          double p_dso) {
  std::vector<Violation> viol = validate_feeder(d);
  if (!viol.empty()) throw ScenarioValidationError(std::move(viol));

  FeederIndex fi = index_feeder(d);
  int nn = static_cast<int>(d.nodes.size());
  int nb = static_cast<int>(d.branches.size());

  // Renewable injections net against nodal firm load.
  std::vector<double> load_p(nn), load_q(nn);
  for (int n = 0; n < nn; ++n) {
    load_p[n] = d.nodes[n].firm_load_p;
    load_q[n] = d.nodes[n].firm_load_q;
  }
  for (const Aggregator& a : d.aggregators) {
    if (a.kind != AggKind::renewable) continue;
    int n = fi.node_index(a.node);
    load_p[n] -= a.fixed_profile;
    load_q[n] -= a.fixed_profile * a.tan_phi;
  }

  DsoModel m;
  m.agg_block_vars.resize(d.aggregators.size());
  for (size_t i = 0; i < d.aggregators.size(); ++i) {
    const Aggregator& a = d.aggregators[i];
    if (a.kind == AggKind::renewable) continue;
    double sign = (a.kind == AggKind::generating) ? 1.0 : -1.0;
    for (size_t b = 0; b < a.blocks.size(); ++b)
      m.agg_block_vars[i].push_back(lp.add_var(
          a.id + "#" + std::to_string(b), 0.0, a.blocks[b].width,
          sign * a.blocks[b].price));
  }
  for (int j = 0; j < nb; ++j) {
    const DistBranch& br = d.branches[j];
    m.pl_vars.push_back(lp.add_var("Pl:" + br.id, -br.pl_max, br.pl_max, 0.0));
    m.ql_vars.push_back(lp.add_var("Ql:" + br.id, -br.ql_max, br.ql_max, 0.0));
  }
  for (int n = 0; n < nn; ++n) {
    double lo = d.nodes[n].u_min, hi = d.nodes[n].u_max;
    if (n == fi.substation) lo = hi = d.substation_u;  // root voltage pinned
    m.u_vars.push_back(lp.add_var("U:" + d.nodes[n].id, lo, hi, 0.0));
  }
  m.q_var = lp.add_var("Qdso", d.q_dso_min, d.q_dso_max, 0.0);
  if (mode == DsoMode::free_p)
    m.p_var = lp.add_var("p_dso", -kInfBound, kInfBound, 0.0);

  // Active- and reactive-power balance per node. Export convention: the
  // substation serves p^dso on top of local load, so p lands on the rhs
  // (fixed mode) or as a -1 column (free mode); either way the row's dual is
  // the marginal cost of one more exported MW.
  for (int n = 0; n < nn; ++n) {
    ConstraintRow rp, rq;
    rp.name = "p_balance:" + d.nodes[n].id;
    rq.name = "q_balance:" + d.nodes[n].id;
    rp.rel = rq.rel = Relation::eq;
    for (size_t i = 0; i < d.aggregators.size(); ++i) {
      const Aggregator& a = d.aggregators[i];
      if (a.kind == AggKind::renewable || fi.node_index(a.node) != n) continue;
      double sign = (a.kind == AggKind::generating) ? 1.0 : -1.0;
      for (int v : m.agg_block_vars[i]) {
        rp.coeffs.push_back({v, sign});
        if (a.tan_phi != 0.0) rq.coeffs.push_back({v, sign * a.tan_phi});
      }
    }
    for (int j : fi.out_branches[n]) {
      rp.coeffs.push_back({m.pl_vars[j], -1.0});
      rq.coeffs.push_back({m.ql_vars[j], -1.0});
    }
    if (fi.in_branch[n] >= 0) {
      rp.coeffs.push_back({m.pl_vars[fi.in_branch[n]], 1.0});
      rq.coeffs.push_back({m.ql_vars[fi.in_branch[n]], 1.0});
    }
    rp.rhs = load_p[n];
    rq.rhs = load_q[n];
    if (n == fi.substation) {
      if (mode == DsoMode::fixed_p)
        rp.rhs += p_dso;
      else
        rp.coeffs.push_back({m.p_var, -1.0});
      rq.coeffs.push_back({m.q_var, 1.0});  // reactive support from the grid
    }
    m.balance_row.push_back(lp.add_constraint(std::move(rp)));
    m.qbalance_row.push_back(lp.add_constraint(std::move(rq)));
  }
  m.coupling_row = m.balance_row[fi.substation];

  // Linearized voltage drop along each branch (squared-voltage form).
  double k = 2.0 / d.base_mva;
  for (int j = 0; j < nb; ++j) {
    const DistBranch& br = d.branches[j];
    ConstraintRow row;
    row.name = "vdrop:" + br.id;
    row.rel = Relation::eq;
    row.rhs = 0.0;
    row.coeffs.push_back({m.u_vars[fi.branch_child[j]], 1.0});
    row.coeffs.push_back({m.u_vars[fi.branch_parent[j]], -1.0});
    if (br.r != 0.0) row.coeffs.push_back({m.pl_vars[j], k * br.r});
    if (br.x != 0.0) row.coeffs.push_back({m.ql_vars[j], k * br.x});
    lp.add_constraint(std::move(row));
  }
  return m;
}

DsoModel build_dso_model(const DistributionSystem& d, DsoMode mode, double p_dso) {
  LinearProgram lp;
  DsoModel m = append_dso_model(lp, d, mode, p_dso);
  m.lp = std::move(lp);
  return m;
}

LinearProgram build_dso_lp(const DistributionSystem& d, double p_dso) {
  return build_dso_model(d, DsoMode::fixed_p, p_dso).lp;
}

std::vector<double> DsoModel::aggregate_dispatch(const DistributionSystem& d,
                                                 const LpSolution& sol) const {
  std::vector<double> out(d.aggregators.size(), 0.0);
  for (size_t i = 0; i < d.aggregators.size(); ++i) {
    if (d.aggregators[i].kind == AggKind::renewable) {
      out[i] = d.aggregators[i].fixed_profile;
      continue;
    }
    for (int v : agg_block_vars[i]) out[i] += sol.primal[v];
  }
  return out;
}

std::pair<double, double> feasible_range(const DistributionSystem& d,
                                         const SolveOptions& lp_opts) {
  DsoModel m = build_dso_model(d, DsoMode::free_p);
  for (double& c : m.lp.objective) c = 0.0;

  m.lp.objective[m.p_var] = 1.0;
  LpSolution lo = solve(m.lp, lp_opts);
  if (lo.status == SolveStatus::infeasible)
    throw DsoError("empty bid range: feeder constraints are infeasible for every p");
  if (lo.status == SolveStatus::unbounded)
    throw DsoError("bid range unbounded below");

  m.lp.objective[m.p_var] = -1.0;
  LpSolution hi = solve(m.lp, lp_opts);
  if (hi.status == SolveStatus::unbounded) throw DsoError("bid range unbounded above");

  double p_min = lo.objective_value;
  double p_max = -hi.objective_value;
  if (p_min > p_max) {  // solver noise on a pinched range
    double mid = 0.5 * (p_min + p_max);
    p_min = p_max = mid;
  }
  return {p_min, p_max};
}

PwlConvexCost trace_bid_curve(const DistributionSystem& d, const TraceOptions& opts) {
  auto [p_min, p_max] = feasible_range(d, opts.lp);
  double range = p_max - p_min;

  Tracer tracer(d, opts, range);
  Probe at_min = tracer.eval(p_min);

  PwlConvexCost curve;
  if (range <= std::max(tracer.x_tol(), 1e-12)) {
    curve.breakpoints = {{p_min, at_min.v}};
    return curve;
  }

  Probe at_max = tracer.eval(p_max);
  tracer.refine(p_min, at_min, p_max, at_max, 0, false);

  std::vector<PwlPoint> pts;
  pts.push_back({p_min, at_min.v});
  for (const PwlPoint& p : tracer.take()) pts.push_back(p);
  pts.push_back({p_max, at_max.v});

  // Assemble: drop near-duplicate abscissae, then merge collinear segments.
  std::vector<PwlPoint> merged;
  for (const PwlPoint& p : pts) {
    if (!merged.empty() && p.p - merged.back().p <= tracer.x_tol()) {
      if (&p == &pts.back()) merged.back() = p;  // keep the exact right endpoint
      continue;
    }
    merged.push_back(p);
    while (merged.size() >= 3) {
      size_t k = merged.size();
      double s1 = (merged[k - 2].c - merged[k - 3].c) / (merged[k - 2].p - merged[k - 3].p);
      double s2 = (merged[k - 1].c - merged[k - 2].c) / (merged[k - 1].p - merged[k - 2].p);
      if (std::abs(s2 - s1) <= opts.slope_merge_tol)
        merged.erase(merged.end() - 2);
      else
        break;
    }
  }
  curve.breakpoints = std::move(merged);
  for (size_t i = 1; i < curve.breakpoints.size(); ++i) {
    const PwlPoint& a = curve.breakpoints[i - 1];
    const PwlPoint& b = curve.breakpoints[i];
    curve.slopes.push_back((b.c - a.c) / (b.p - a.p));
  }
  return curve;
}

DsoOffer to_offer_blocks(const PwlConvexCost& curve, double slope_merge_tol) {
  DsoOffer offer;
  const auto& bp = curve.breakpoints;
  offer.p_min = bp.front().p;
  offer.p_max = bp.back().p;
  offer.fixed_cost = bp.front().c;
  std::vector<PwlPoint> kept{bp.front()};
  for (size_t i = 1; i < bp.size(); ++i) {
    kept.push_back(bp[i]);
    while (kept.size() >= 3) {
      size_t k = kept.size();
      double s1 = (kept[k - 2].c - kept[k - 3].c) / (kept[k - 2].p - kept[k - 3].p);
      double s2 = (kept[k - 1].c - kept[k - 2].c) / (kept[k - 1].p - kept[k - 2].p);
      if (std::abs(s2 - s1) <= slope_merge_tol)
        kept.erase(kept.end() - 2);
      else
        break;
    }
  }
  for (size_t i = 1; i < kept.size(); ++i)
    offer.blocks.push_back({kept[i].p - kept[i - 1].p,
                            (kept[i].c - kept[i - 1].c) / (kept[i].p - kept[i - 1].p)});
  return offer;
}

ConvexityReport convexity_check(const PwlConvexCost& curve, double slope_merge_tol) {
  ConvexityReport rep;
  for (size_t i = 1; i < curve.slopes.size(); ++i)
    rep.max_slope_decrease =
        std::max(rep.max_slope_decrease, curve.slopes[i - 1] - curve.slopes[i]);
  rep.pass = rep.max_slope_decrease <= slope_merge_tol;
  return rep;
}

std::string curve_breakpoints_csv(const PwlConvexCost& curve) {
  std::string out = "breakpoint_index,p_mw,cost_per_h\n";
  for (size_t i = 0; i < curve.breakpoints.size(); ++i)
    out += std::to_string(i) + "," + format_double(curve.breakpoints[i].p) + "," +
           format_double(curve.breakpoints[i].c) + "\n";
  return out;
}

std::string curve_marginals_csv(const PwlConvexCost& curve) {
  std::string out = "segment_index,marginal_cost_per_mwh\n";
  for (size_t i = 0; i < curve.slopes.size(); ++i)
    out += std::to_string(i) + "," + format_double(curve.slopes[i]) + "\n";
  return out;
}

}  // namespace gridseam
