#include "gridseam/ideal.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <unordered_map>

#include "json.hpp"

namespace gridseam {

namespace {

std::unordered_map<std::string, int> bus_index(const TransmissionSystem& t) {
  std::unordered_map<std::string, int> idx;
  for (size_t b = 0; b < t.buses.size(); ++b) idx[t.buses[b].id] = int(b);
  return idx;
}

// Portable symmetric uniform on [-1, 1); std::uniform_real_distribution is
// not bit-stable across standard libraries.
double sym(std::mt19937_64& g) { return 2.0 * double(g() >> 11) * 0x1.0p-53 - 1.0; }

}  // namespace

IdealModel build_ideal_lp(const Scenario& s) {
  std::vector<Violation> v = validate(s);
  if (!v.empty()) throw ScenarioValidationError(std::move(v));

  IdealModel m;
  m.grid = append_transmission(m.lp, s.transmission);
  std::unordered_map<std::string, int> bidx = bus_index(s.transmission);
  for (const DistributionSystem& d : s.distributions) {
    DsoModel f = append_dso_model(m.lp, d, DsoMode::free_p);
    ConstraintRow& balance = m.lp.constraints[m.grid.balance_row[bidx.at(d.coupling_bus)]];
    balance.coeffs.push_back({f.p_var, 1.0});  // feeder export feeds its bus
    m.feeders.push_back(std::move(f));
  }
  return m;
}

IdealResult solve_ideal(const Scenario& s, const SolveOptions& opts) {
  IdealModel m = build_ideal_lp(s);
  LpSolution sol = solve(m.lp, opts);
  if (sol.status == SolveStatus::infeasible)
    throw IdealError("whole-system LP infeasible");
  if (sol.status == SolveStatus::unbounded)
    throw IdealError("whole-system LP unbounded");

  IdealResult r;
  r.scenario = s.name;
  r.objective = sol.objective_value;
  for (const std::vector<int>& blocks : m.grid.gen_block_vars) {
    double p = 0.0;
    for (int v : blocks) p += sol.primal[v];
    r.gen_dispatch.push_back(p);
  }
  for (int v : m.grid.flow_vars) r.line_flows.push_back(sol.primal[v]);
  for (int row : m.grid.balance_row) r.bus_lmps.push_back(sol.duals[row]);

  for (size_t j = 0; j < s.distributions.size(); ++j) {
    const DistributionSystem& d = s.distributions[j];
    const DsoModel& f = m.feeders[j];
    r.substation_injections.push_back(sol.primal[f.p_var]);
    std::vector<double> agg = f.aggregate_dispatch(d, sol);
    for (size_t i = 0; i < d.aggregators.size(); ++i)
      if (d.aggregators[i].kind == AggKind::demand_response) agg[i] = -agg[i];
    r.agg_dispatch.push_back(std::move(agg));
    std::vector<double> dlmp;
    for (int row : f.balance_row) dlmp.push_back(sol.duals[row]);
    r.node_dlmps.push_back(std::move(dlmp));
  }
  return r;
}

bool ideal_degenerate(const Scenario& s, const SolveOptions& opts) {
  IdealModel m = build_ideal_lp(s);
  LpSolution base = solve(m.lp, opts);
  if (base.status != SolveStatus::optimal)
    throw IdealError("whole-system LP did not solve; degeneracy probe aborted");

  // Block variables carry the economics; interchanges are watched but get no
  // cost nudge (their cost is structurally zero).
  std::vector<int> block_vars;
  for (const std::vector<int>& g : m.grid.gen_block_vars)
    block_vars.insert(block_vars.end(), g.begin(), g.end());
  for (const DsoModel& f : m.feeders)
    for (const std::vector<int>& a : f.agg_block_vars)
      block_vars.insert(block_vars.end(), a.begin(), a.end());
  std::vector<int> watch_vars = block_vars;
  for (const DsoModel& f : m.feeders) watch_vars.push_back(f.p_var);

  std::vector<int> price_rows;  // every row whose dual is a published price
  price_rows.insert(price_rows.end(), m.grid.balance_row.begin(), m.grid.balance_row.end());
  for (const DsoModel& f : m.feeders)
    price_rows.insert(price_rows.end(), f.balance_row.begin(), f.balance_row.end());

  std::mt19937_64 rng(0x1dea1u);  // fixed: the probe must be reproducible
  std::vector<double> dc(block_vars.size());
  for (size_t i = 0; i < dc.size(); ++i)
    dc[i] = 1e-7 * (1.0 + std::abs(m.lp.objective[block_vars[i]])) * sym(rng);
  std::vector<double> db(price_rows.size());
  for (size_t i = 0; i < db.size(); ++i)
    db[i] = 1e-7 * (1.0 + std::abs(m.lp.constraints[price_rows[i]].rhs)) * sym(rng);

  for (double sign : {1.0, -1.0}) {
    LinearProgram pert = m.lp;
    for (size_t i = 0; i < block_vars.size(); ++i)
      pert.objective[block_vars[i]] += sign * dc[i];
    try {
      LpSolution ps = solve(pert, opts);
      if (ps.status != SolveStatus::optimal) return true;
      for (int v : watch_vars)
        if (std::abs(ps.primal[v] - base.primal[v]) > 1e-5) return true;
    } catch (const NumericalBreakdown&) {
      return true;
    }
  }
  for (double sign : {1.0, -1.0}) {
    LinearProgram pert = m.lp;
    for (size_t i = 0; i < price_rows.size(); ++i)
      pert.constraints[price_rows[i]].rhs += sign * db[i];
    try {
      LpSolution ps = solve(pert, opts);
      if (ps.status != SolveStatus::optimal) return true;
      for (int row : price_rows)
        if (std::abs(ps.duals[row] - base.duals[row]) > 1e-5) return true;
    } catch (const NumericalBreakdown&) {
      return true;
    }
  }
  return false;
}

CoordinationResult run_coordination(const Scenario& s, const TraceOptions& opts) {
  std::vector<Violation> v = validate(s);
  if (!v.empty()) throw ScenarioValidationError(std::move(v));

  CoordinationResult r;
  r.scenario = s.name;
  for (const DistributionSystem& d : s.distributions) {
    PwlConvexCost curve = trace_bid_curve(d, opts);
    r.offers.push_back({d.id, d.coupling_bus, to_offer_blocks(curve, opts.slope_merge_tol)});
    r.curves.push_back(std::move(curve));
  }
  r.market = clear_market(s.transmission, r.offers, opts.lp);

  std::unordered_map<std::string, int> bidx = bus_index(s.transmission);
  r.total_cost = r.market.objective;
  for (size_t j = 0; j < s.distributions.size(); ++j) {
    const DistributionSystem& d = s.distributions[j];
    double p_star = r.market.dso_dispatch[j];
    double lmp_star = r.market.lmps[bidx.at(d.coupling_bus)];
    r.settlements.push_back(settle(d, p_star, lmp_star, opts.lp));
    r.total_cost += r.offers[j].offer.fixed_cost;
  }
  return r;
}

ComparisonReport compare(const Scenario& s, const CoordinationResult& coord,
                         const IdealResult& ideal, double tol) {
  if (coord.scenario != ideal.scenario || ideal.scenario != s.name)
    throw IdealError("comparison across different scenarios: '" + coord.scenario +
                     "' vs '" + ideal.scenario + "' vs '" + s.name + "'");
  const TransmissionSystem& t = s.transmission;
  if (coord.market.gen_dispatch.size() != t.generators.size() ||
      ideal.gen_dispatch.size() != t.generators.size() ||
      coord.settlements.size() != s.distributions.size() ||
      ideal.agg_dispatch.size() != s.distributions.size())
    throw IdealError("result shape does not match the scenario");

  ComparisonReport r;
  r.scenario = s.name;
  r.tol = tol;
  r.degenerate = ideal_degenerate(s);

  auto bump = [](double& acc, double a, double b) {
    double dev = std::abs(a - b);
    if (dev > acc) acc = dev;
  };

  std::unordered_map<std::string, int> bidx = bus_index(t);
  for (size_t g = 0; g < t.generators.size(); ++g) {
    bump(r.gen_dev, coord.market.gen_dispatch[g], ideal.gen_dispatch[g]);
    double lmp_c = coord.market.lmps[bidx.at(t.generators[g].bus)];
    double lmp_i = ideal.bus_lmps[bidx.at(t.generators[g].bus)];
    bump(r.payment_dev, lmp_c * coord.market.gen_dispatch[g], lmp_i * ideal.gen_dispatch[g]);
  }
  for (size_t b = 0; b < t.buses.size(); ++b)
    bump(r.price_dev, coord.market.lmps[b], ideal.bus_lmps[b]);

  for (size_t j = 0; j < s.distributions.size(); ++j) {
    const DistributionSystem& d = s.distributions[j];
    const DsoSettlement& st = coord.settlements[j];
    FeederIndex fi = index_feeder(d);
    bump(r.agg_dev, st.p_star, ideal.substation_injections[j]);
    double lmp_i = ideal.bus_lmps[bidx.at(d.coupling_bus)];
    bump(r.payment_dev, st.iso_to_dso, lmp_i * ideal.substation_injections[j]);
    for (size_t n = 0; n < d.nodes.size(); ++n)
      bump(r.price_dev, st.node_dlmp[n], ideal.node_dlmps[j][n]);
    for (size_t i = 0; i < d.aggregators.size(); ++i) {
      bump(r.agg_dev, st.lines[i].dispatch_mw, ideal.agg_dispatch[j][i]);
      double dlmp_i = ideal.node_dlmps[j][fi.node_index(d.aggregators[i].node)];
      bump(r.payment_dev, st.lines[i].payment_per_h, dlmp_i * ideal.agg_dispatch[j][i]);
    }
  }

  r.objective_rel =
      std::abs(coord.total_cost - ideal.objective) / std::max(1.0, std::abs(ideal.objective));
  r.objectives_match = r.objective_rel <= 1e-6;
  r.pass = r.gen_dev <= tol && r.agg_dev <= tol && r.price_dev <= tol && r.payment_dev <= tol;
  return r;
}

ComparisonReport audit(const Scenario& s, double tol, const TraceOptions& opts) {
  return compare(s, run_coordination(s, opts), solve_ideal(s, opts.lp), tol);
}

std::string comparison_json(const ComparisonReport& r) {
  nlohmann::ordered_json j;
  j["scenario"] = r.scenario;
  j["pass"] = r.pass;
  j["degenerate"] = r.degenerate;
  j["objectives_match"] = r.objectives_match;
  j["tol"] = r.tol;
  j["max_deviation"] = {{"generator_mw", r.gen_dev},
                        {"aggregator_mw", r.agg_dev},
                        {"price_per_mwh", r.price_dev},
                        {"payment_per_h", r.payment_dev}};
  j["objective_rel"] = r.objective_rel;
  return j.dump(2) + "\n";
}

}  // namespace gridseam
