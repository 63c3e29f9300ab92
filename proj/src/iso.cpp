#include "gridseam/iso.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "gridseam/io.hpp"
#include "json.hpp"

namespace gridseam {

namespace {

std::unordered_map<std::string, int> bus_index(const TransmissionSystem& t) {
  std::unordered_map<std::string, int> idx;
  for (size_t i = 0; i < t.buses.size(); ++i) idx.emplace(t.buses[i].id, static_cast<int>(i));
  return idx;
}

}  // namespace

IsoModel append_transmission(LinearProgram& lp, const TransmissionSystem& t) {
  auto bidx = bus_index(t);
  if (!bidx.count(t.reference_bus))
    throw MarketError("reference bus \"" + t.reference_bus + "\" is not in the bus list");
  for (const Generator& g : t.generators)
    if (!bidx.count(g.bus))
      throw MarketError("generator \"" + g.id + "\" sits on unknown bus \"" + g.bus + "\"");
  for (const Line& l : t.lines) {
    if (!bidx.count(l.from_bus) || !bidx.count(l.to_bus))
      throw MarketError("line \"" + l.id + "\" has an endpoint outside the bus list");
    if (!(l.reactance > 0.0))
      throw MarketError("line \"" + l.id + "\" needs a positive reactance");
  }

  IsoModel m;
  for (const Generator& g : t.generators) {
    std::vector<int> vars;
    for (size_t b = 0; b < g.blocks.size(); ++b)
      vars.push_back(lp.add_var(g.id + "#" + std::to_string(b), 0.0,
                                g.blocks[b].width, g.blocks[b].price));
    m.gen_block_vars.push_back(std::move(vars));
  }
  for (const Bus& b : t.buses)
    m.theta_vars.push_back(lp.add_var("theta:" + b.id, -kInfBound, kInfBound, 0.0));
  for (const Line& l : t.lines)
    m.flow_vars.push_back(lp.add_var("F:" + l.id, -l.flow_limit, l.flow_limit, 0.0));

  // Nodal balance: generation + net inflow = firm load.
  for (size_t b = 0; b < t.buses.size(); ++b) {
    ConstraintRow row;
    row.name = "balance:" + t.buses[b].id;
    row.rel = Relation::eq;
    row.rhs = t.buses[b].firm_load;
    for (size_t g = 0; g < t.generators.size(); ++g)
      if (bidx[t.generators[g].bus] == static_cast<int>(b))
        for (int v : m.gen_block_vars[g]) row.coeffs.push_back({v, 1.0});
    for (size_t l = 0; l < t.lines.size(); ++l) {
      if (bidx[t.lines[l].to_bus] == static_cast<int>(b))
        row.coeffs.push_back({m.flow_vars[l], 1.0});
      if (bidx[t.lines[l].from_bus] == static_cast<int>(b))
        row.coeffs.push_back({m.flow_vars[l], -1.0});
    }
    m.balance_row.push_back(lp.add_constraint(std::move(row)));
  }

  // DC flow definition per line: F = (theta_from - theta_to) / x.
  for (size_t l = 0; l < t.lines.size(); ++l) {
    const Line& ln = t.lines[l];
    ConstraintRow row;
    row.name = "flow:" + ln.id;
    row.rel = Relation::eq;
    row.rhs = 0.0;
    row.coeffs.push_back({m.flow_vars[l], 1.0});
    row.coeffs.push_back({m.theta_vars[bidx[ln.from_bus]], -1.0 / ln.reactance});
    row.coeffs.push_back({m.theta_vars[bidx[ln.to_bus]], 1.0 / ln.reactance});
    lp.add_constraint(std::move(row));
  }

  {
    ConstraintRow row;
    row.name = "ref";
    row.rel = Relation::eq;
    row.rhs = 0.0;
    row.coeffs.push_back({m.theta_vars[bidx[t.reference_bus]], 1.0});
    m.ref_row = lp.add_constraint(std::move(row));
  }
  return m;
}

IsoModel build_iso_model(const TransmissionSystem& t, const std::vector<DsoOfferAt>& offers) {
  auto bidx = bus_index(t);
  for (const DsoOfferAt& o : offers)
    if (!bidx.count(o.coupling_bus))
      throw MarketError("offer \"" + o.dso_id + "\" names unknown bus \"" +
                        o.coupling_bus + "\"");

  LinearProgram lp;
  IsoModel m = append_transmission(lp, t);

  // Stitch each offer into its coupling bus: blocks add injection above the
  // base point p_min, which lands on the rhs as fixed injection.
  for (const DsoOfferAt& o : offers) {
    std::vector<int> vars;
    for (size_t b = 0; b < o.offer.blocks.size(); ++b)
      vars.push_back(lp.add_var(o.dso_id + "#" + std::to_string(b), 0.0,
                                o.offer.blocks[b].width, o.offer.blocks[b].price));
    ConstraintRow& row = lp.constraints[m.balance_row[bidx[o.coupling_bus]]];
    for (int v : vars) row.coeffs.push_back({v, 1.0});
    row.rhs -= o.offer.p_min;
    m.dso_block_vars.push_back(std::move(vars));
  }
  m.lp = std::move(lp);
  return m;
}

LinearProgram build_iso_lp(const TransmissionSystem& t, const std::vector<DsoOfferAt>& offers) {
  return build_iso_model(t, offers).lp;
}

IsoResult clear_market(const TransmissionSystem& t, const std::vector<DsoOfferAt>& offers,
                       const SolveOptions& lp_opts) {
  IsoModel m = build_iso_model(t, offers);
  LpSolution sol = solve(m.lp, lp_opts);
  if (sol.status == SolveStatus::infeasible) {
    double load = 0.0, cap = 0.0;
    for (const Bus& b : t.buses) load += b.firm_load;
    for (const DsoOfferAt& o : offers) load -= o.offer.p_min;
    for (const Generator& g : t.generators)
      for (const OfferBlock& blk : g.blocks) cap += blk.width;
    for (const DsoOfferAt& o : offers)
      for (const OfferBlock& blk : o.offer.blocks) cap += blk.width;
    throw MarketError("market infeasible: fixed load " + format_double(load) +
                      " MW vs dispatchable capability " + format_double(cap) + " MW");
  }
  if (sol.status == SolveStatus::unbounded)
    throw MarketError("market model unbounded: an offer is missing a bound");

  IsoResult r;
  for (size_t g = 0; g < t.generators.size(); ++g) {
    double d = 0.0;
    for (int v : m.gen_block_vars[g]) d += sol.primal[v];
    r.gen_dispatch.push_back(d);
    r.total_gen_mw += d;
  }
  for (size_t o = 0; o < offers.size(); ++o) {
    double d = offers[o].offer.p_min;
    for (int v : m.dso_block_vars[o]) d += sol.primal[v];
    r.dso_dispatch.push_back(d);
  }
  for (size_t b = 0; b < t.buses.size(); ++b) r.lmps.push_back(sol.duals[m.balance_row[b]]);
  for (int v : m.flow_vars) r.line_flows.push_back(sol.primal[v]);
  r.objective = sol.objective_value;
  return r;
}

std::string lmps_csv(const TransmissionSystem& t, const IsoResult& r) {
  std::string out = "bus,lmp_per_mwh\n";
  for (size_t b = 0; b < t.buses.size(); ++b)
    out += t.buses[b].id + "," + format_double(r.lmps[b]) + "\n";
  return out;
}

std::string dispatch_csv(const TransmissionSystem& t, const std::vector<DsoOfferAt>& offers,
                         const IsoResult& r) {
  std::string out = "participant,dispatch_mw\n";
  for (size_t g = 0; g < t.generators.size(); ++g)
    out += t.generators[g].id + "," + format_double(r.gen_dispatch[g]) + "\n";
  for (size_t o = 0; o < offers.size(); ++o)
    out += offers[o].dso_id + "," + format_double(r.dso_dispatch[o]) + "\n";
  return out;
}

std::string iso_result_json(const TransmissionSystem& t, const std::vector<DsoOfferAt>& offers,
                            const IsoResult& r) {
  nlohmann::ordered_json j;
  j["objective_per_h"] = r.objective;
  j["total_gen_mw"] = r.total_gen_mw;
  j["generators"] = nlohmann::ordered_json::object();
  for (size_t g = 0; g < t.generators.size(); ++g)
    j["generators"][t.generators[g].id] = r.gen_dispatch[g];
  j["dso_dispatch_mw"] = nlohmann::ordered_json::object();
  for (size_t o = 0; o < offers.size(); ++o)
    j["dso_dispatch_mw"][offers[o].dso_id] = r.dso_dispatch[o];
  j["lmps_per_mwh"] = nlohmann::ordered_json::object();
  for (size_t b = 0; b < t.buses.size(); ++b) j["lmps_per_mwh"][t.buses[b].id] = r.lmps[b];
  j["line_flows_mw"] = nlohmann::ordered_json::object();
  for (size_t l = 0; l < t.lines.size(); ++l) j["line_flows_mw"][t.lines[l].id] = r.line_flows[l];
  return j.dump(2) + "\n";
}

}  // namespace gridseam
