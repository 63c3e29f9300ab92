#include "gridseam/settlement.hpp"

#include <cmath>

#include "gridseam/io.hpp"
#include "json.hpp"

namespace gridseam {

DsoDispatch dso_dispatch(const DistributionSystem& d, double p_star,
                         const SolveOptions& opts) {
  DsoModel m = build_dso_model(d, DsoMode::fixed_p, p_star);
  LpSolution sol = solve(m.lp, opts);
  if (sol.status == SolveStatus::infeasible)
    throw DsoError("dispatch outside bid range: the feeder cannot deliver p = " +
                   format_double(p_star) + " MW");
  if (sol.status == SolveStatus::unbounded)
    throw DsoError("feeder LP unbounded at p = " + format_double(p_star));

  DsoDispatch out;
  out.agg_mw = m.aggregate_dispatch(d, sol);
  for (size_t i = 0; i < d.aggregators.size(); ++i)
    if (d.aggregators[i].kind == AggKind::demand_response) out.agg_mw[i] = -out.agg_mw[i];
  for (int v : m.pl_vars) out.branch_pl.push_back(sol.primal[v]);
  for (int v : m.ql_vars) out.branch_ql.push_back(sol.primal[v]);
  out.cost = sol.objective_value;
  return out;
}

std::vector<double> dso_prices(const DistributionSystem& d, double lmp_star,
                               const SolveOptions& opts) {
  DsoModel m = build_dso_model(d, DsoMode::free_p);
  m.lp.objective[m.p_var] = -lmp_star;  // price taker: min cost - lmp * p
  LpSolution sol = solve(m.lp, opts);
  if (sol.status != SolveStatus::optimal)
    throw DsoError("price-taking feeder solve failed against lmp = " +
                   format_double(lmp_star));

  std::vector<double> dlmp;
  for (size_t n = 0; n < d.nodes.size(); ++n) dlmp.push_back(sol.duals[m.balance_row[n]]);
  return dlmp;
}

DsoSettlement compute_payments(const DistributionSystem& d, const DsoDispatch& dispatch,
                               std::vector<double> dlmp, double lmp_star, double p_star) {
  FeederIndex fi = index_feeder(d);

  DsoSettlement s;
  s.dso_id = d.id;
  s.p_star = p_star;
  s.lmp_star = lmp_star;
  s.node_dlmp = std::move(dlmp);
  s.branch_pl = dispatch.branch_pl;
  s.dispatch_cost = dispatch.cost;
  s.iso_to_dso = lmp_star * p_star;

  double payout = 0.0;
  for (size_t i = 0; i < d.aggregators.size(); ++i) {
    const Aggregator& a = d.aggregators[i];
    AggregatorSettlement line;
    line.aggregator = a.id;
    line.node = a.node;
    line.dispatch_mw = dispatch.agg_mw[i];
    line.dlmp_per_mwh = s.node_dlmp[fi.node_index(a.node)];
    line.payment_per_h = line.dlmp_per_mwh * line.dispatch_mw;
    payout += line.payment_per_h;
    s.lines.push_back(std::move(line));
  }
  for (size_t n = 0; n < d.nodes.size(); ++n)
    s.firm_load_charge += s.node_dlmp[n] * d.nodes[n].firm_load_p;

  s.dso_net_position = s.iso_to_dso + s.firm_load_charge - payout;
  return s;
}

DsoSettlement settle(const DistributionSystem& d, double p_star, double lmp_star,
                     const SolveOptions& opts) {
  return compute_payments(d, dso_dispatch(d, p_star, opts),
                          dso_prices(d, lmp_star, opts), lmp_star, p_star);
}

std::string settlement_csv(const DsoSettlement& s) {
  std::string out = "aggregator,node,dispatch_mw,dlmp_per_mwh,payment_per_h\n";
  for (const AggregatorSettlement& l : s.lines)
    out += l.aggregator + "," + l.node + "," + format_double(l.dispatch_mw) + "," +
           format_double(l.dlmp_per_mwh) + "," + format_double(l.payment_per_h) + "\n";
  return out;
}

std::string dlmps_csv(const DistributionSystem& d, const DsoSettlement& s) {
  std::string out = "node,dlmp_per_mwh\n";
  for (size_t n = 0; n < d.nodes.size(); ++n)
    out += d.nodes[n].id + "," + format_double(s.node_dlmp[n]) + "\n";
  return out;
}

std::string settlement_json(const DistributionSystem& d, const DsoSettlement& s) {
  nlohmann::ordered_json j;
  j["dso"] = d.id;
  j["p_star_mw"] = s.p_star;
  j["lmp_star_per_mwh"] = s.lmp_star;
  j["dispatch_cost"] = s.dispatch_cost;
  j["iso_to_dso"] = s.iso_to_dso;
  j["firm_load_charge"] = s.firm_load_charge;
  j["dso_net_position"] = s.dso_net_position;
  j["dlmps_per_mwh"] = nlohmann::ordered_json::object();
  for (size_t n = 0; n < d.nodes.size(); ++n)
    j["dlmps_per_mwh"][d.nodes[n].id] = s.node_dlmp[n];
  j["aggregators"] = nlohmann::ordered_json::array();
  for (const AggregatorSettlement& l : s.lines)
    j["aggregators"].push_back({{"id", l.aggregator},
                                {"node", l.node},
                                {"dispatch_mw", l.dispatch_mw},
                                {"dlmp_per_mwh", l.dlmp_per_mwh},
                                {"payment_per_h", l.payment_per_h}});
  return j.dump(2) + "\n";
}

}  // namespace gridseam
