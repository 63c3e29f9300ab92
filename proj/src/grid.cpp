#include "gridseam/grid.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace gridseam {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

struct ParseCtx {
  std::vector<std::string> errs;

  void fail(const std::string& path, const std::string& what) {
    errs.push_back(path + ": " + what);
  }

  const json* member(const json& j, const std::string& path, const char* key,
                     bool required) {
    if (!j.is_object()) {
      if (required) fail(path, "expected an object");
      return nullptr;
    }
    auto it = j.find(key);
    if (it == j.end()) {
      if (required) fail(path + "." + key, "missing");
      return nullptr;
    }
    return &*it;
  }

  std::string req_str(const json& j, const std::string& path, const char* key) {
    const json* v = member(j, path, key, true);
    if (!v) return {};
    if (!v->is_string()) {
      fail(path + "." + key, "expected a string");
      return {};
    }
    return v->get<std::string>();
  }

  double req_num(const json& j, const std::string& path, const char* key) {
    const json* v = member(j, path, key, true);
    if (!v) return 0.0;
    if (!v->is_number()) {
      fail(path + "." + key, "expected a number");
      return 0.0;
    }
    return v->get<double>();
  }

  double opt_num(const json& j, const std::string& path, const char* key, double dflt) {
    const json* v = member(j, path, key, false);
    if (!v) return dflt;
    if (!v->is_number()) {
      fail(path + "." + key, "expected a number");
      return dflt;
    }
    return v->get<double>();
  }

  std::string opt_str(const json& j, const std::string& path, const char* key,
                      const std::string& dflt) {
    const json* v = member(j, path, key, false);
    if (!v) return dflt;
    if (!v->is_string()) {
      fail(path + "." + key, "expected a string");
      return dflt;
    }
    return v->get<std::string>();
  }

  const json* req_arr(const json& j, const std::string& path, const char* key) {
    const json* v = member(j, path, key, true);
    if (!v) return nullptr;
    if (!v->is_array()) {
      fail(path + "." + key, "expected an array");
      return nullptr;
    }
    return v;
  }

  std::vector<OfferBlock> blocks(const json& j, const std::string& path, const char* key,
                                 bool required) {
    std::vector<OfferBlock> out;
    const json* arr = required ? req_arr(j, path, key) : member(j, path, key, false);
    if (!arr) return out;
    if (!arr->is_array()) {
      fail(path + "." + key, "expected an array");
      return out;
    }
    for (size_t b = 0; b < arr->size(); ++b) {
      std::string bp = path + "." + key + "[" + std::to_string(b) + "]";
      OfferBlock blk;
      blk.width = req_num((*arr)[b], bp, "width_mw");
      blk.price = req_num((*arr)[b], bp, "price_per_mwh");
      out.push_back(blk);
    }
    return out;
  }
};

void check_convex_offer(const std::string& owner, AggKind kind,
                        const std::vector<OfferBlock>& blocks,
                        std::vector<Violation>& out) {
  for (size_t b = 0; b < blocks.size(); ++b) {
    if (!(blocks[b].width > 0.0))
      out.push_back({"nonpositive block width",
                     owner + " block " + std::to_string(b)});
    if (!std::isfinite(blocks[b].price))
      out.push_back({"non-finite block price",
                     owner + " block " + std::to_string(b)});
  }
  for (size_t b = 1; b < blocks.size(); ++b) {
    if (kind == AggKind::demand_response) {
      if (blocks[b].price > blocks[b - 1].price + 0.0)
        out.push_back({"non-convex demand offer", owner});
    } else {
      if (blocks[b].price < blocks[b - 1].price - 0.0)
        out.push_back({"non-convex generating offer", owner});
    }
  }
}

}  // namespace

std::string to_string(AggKind k) {
  switch (k) {
    case AggKind::generating: return "generating";
    case AggKind::demand_response: return "demand_response";
    case AggKind::renewable: return "renewable";
  }
  return "?";
}

ScenarioValidationError::ScenarioValidationError(std::vector<Violation> v)
    : std::runtime_error([&] {
        std::string msg = "scenario validation failed:";
        for (const Violation& x : v) msg += "\n  [" + x.code + "] " + x.detail;
        return msg;
      }()),
      violations(std::move(v)) {}

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioIoError(std::string("invalid JSON: ") + e.what());
  }

  ParseCtx c;
  Scenario s;

  std::string schema = c.req_str(doc, "$", "schema");
  if (!schema.empty() && schema != "gridseam/1")
    c.fail("$.schema", "unsupported value \"" + schema + "\" (expected \"gridseam/1\")");

  if (const json* meta = c.member(doc, "$", "metadata", true)) {
    s.name = c.opt_str(*meta, "metadata", "name", "");
    s.base_mva = c.opt_num(*meta, "metadata", "base_mva", 1.0);
  }

  if (const json* tr = c.member(doc, "$", "transmission", true)) {
    if (const json* buses = c.req_arr(*tr, "transmission", "buses")) {
      for (size_t i = 0; i < buses->size(); ++i) {
        std::string p = "transmission.buses[" + std::to_string(i) + "]";
        Bus b;
        b.id = c.req_str((*buses)[i], p, "id");
        b.firm_load = c.opt_num((*buses)[i], p, "firm_load_mw", 0.0);
        s.transmission.buses.push_back(std::move(b));
      }
    }
    if (const json* lines = c.req_arr(*tr, "transmission", "lines")) {
      for (size_t i = 0; i < lines->size(); ++i) {
        std::string p = "transmission.lines[" + std::to_string(i) + "]";
        Line l;
        l.id = c.opt_str((*lines)[i], p, "id", "L" + std::to_string(i));
        l.from_bus = c.req_str((*lines)[i], p, "from_bus");
        l.to_bus = c.req_str((*lines)[i], p, "to_bus");
        l.reactance = c.req_num((*lines)[i], p, "reactance_pu");
        l.flow_limit = c.req_num((*lines)[i], p, "flow_limit_mw");
        s.transmission.lines.push_back(std::move(l));
      }
    }
    if (const json* gens = c.req_arr(*tr, "transmission", "generators")) {
      for (size_t i = 0; i < gens->size(); ++i) {
        std::string p = "transmission.generators[" + std::to_string(i) + "]";
        Generator g;
        g.id = c.req_str((*gens)[i], p, "id");
        g.bus = c.req_str((*gens)[i], p, "bus");
        g.blocks = c.blocks((*gens)[i], p, "blocks", true);
        s.transmission.generators.push_back(std::move(g));
      }
    }
    s.transmission.reference_bus =
        c.opt_str(*tr, "transmission", "reference_bus",
                  s.transmission.buses.empty() ? "" : s.transmission.buses[0].id);
  }

  if (const json* dists = c.req_arr(doc, "$", "distributions")) {
    for (size_t d = 0; d < dists->size(); ++d) {
      std::string dp = "distributions[" + std::to_string(d) + "]";
      const json& jd = (*dists)[d];
      DistributionSystem ds;
      ds.id = c.req_str(jd, dp, "id");
      ds.coupling_bus = c.req_str(jd, dp, "coupling_bus");
      ds.substation_node = c.req_str(jd, dp, "substation_node");
      ds.substation_u = c.opt_num(jd, dp, "substation_u", 1.0);
      ds.q_dso_min = c.opt_num(jd, dp, "q_dso_min_mvar", -kInfBound);
      ds.q_dso_max = c.opt_num(jd, dp, "q_dso_max_mvar", kInfBound);
      ds.base_mva = s.base_mva;
      if (const json* nodes = c.req_arr(jd, dp, "nodes")) {
        for (size_t i = 0; i < nodes->size(); ++i) {
          std::string p = dp + ".nodes[" + std::to_string(i) + "]";
          DistNode n;
          n.id = c.req_str((*nodes)[i], p, "id");
          n.firm_load_p = c.opt_num((*nodes)[i], p, "firm_load_mw", 0.0);
          n.firm_load_q = c.opt_num((*nodes)[i], p, "firm_load_mvar", 0.0);
          n.u_min = c.opt_num((*nodes)[i], p, "u_min", 0.81);
          n.u_max = c.opt_num((*nodes)[i], p, "u_max", 1.21);
          ds.nodes.push_back(std::move(n));
        }
      }
      if (const json* branches = c.req_arr(jd, dp, "branches")) {
        for (size_t i = 0; i < branches->size(); ++i) {
          std::string p = dp + ".branches[" + std::to_string(i) + "]";
          DistBranch b;
          b.id = c.opt_str((*branches)[i], p, "id", "B" + std::to_string(i));
          b.parent_node = c.req_str((*branches)[i], p, "parent_node");
          b.child_node = c.req_str((*branches)[i], p, "child_node");
          b.r = c.req_num((*branches)[i], p, "r_pu");
          b.x = c.req_num((*branches)[i], p, "x_pu");
          b.pl_max = c.req_num((*branches)[i], p, "pl_max_mw");
          b.ql_max = c.req_num((*branches)[i], p, "ql_max_mvar");
          ds.branches.push_back(std::move(b));
        }
      }
      if (const json* aggs = c.req_arr(jd, dp, "aggregators")) {
        for (size_t i = 0; i < aggs->size(); ++i) {
          std::string p = dp + ".aggregators[" + std::to_string(i) + "]";
          Aggregator a;
          a.id = c.req_str((*aggs)[i], p, "id");
          std::string kind = c.req_str((*aggs)[i], p, "kind");
          if (kind == "generating") a.kind = AggKind::generating;
          else if (kind == "demand_response") a.kind = AggKind::demand_response;
          else if (kind == "renewable") a.kind = AggKind::renewable;
          else if (!kind.empty())
            c.fail(p + ".kind", "unknown kind \"" + kind + "\"");
          a.node = c.req_str((*aggs)[i], p, "node");
          a.blocks = c.blocks((*aggs)[i], p, "blocks", false);
          a.tan_phi = c.opt_num((*aggs)[i], p, "tan_phi", 0.0);
          a.fixed_profile = c.opt_num((*aggs)[i], p, "fixed_profile_mw", 0.0);
          ds.aggregators.push_back(std::move(a));
        }
      }
      s.distributions.push_back(std::move(ds));
    }
  }

  if (!c.errs.empty()) {
    std::string msg = "scenario schema violations:";
    for (const std::string& e : c.errs) msg += "\n  - " + e;
    throw ScenarioSchemaError(msg);
  }
  return s;
}

Scenario load_scenario(const std::string& text) {
  Scenario s = parse_scenario(text);
  std::vector<Violation> v = validate(s);
  if (!v.empty()) throw ScenarioValidationError(std::move(v));
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioIoError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return load_scenario(buf.str());
  } catch (const ScenarioIoError& e) {
    throw ScenarioIoError(path + ": " + e.what());
  }
}

std::string emit_scenario(const Scenario& s) {
  ordered_json doc;
  doc["schema"] = "gridseam/1";
  doc["metadata"] = {{"name", s.name}, {"base_mva", s.base_mva}};

  ordered_json tr;
  tr["reference_bus"] = s.transmission.reference_bus;
  tr["buses"] = ordered_json::array();
  for (const Bus& b : s.transmission.buses)
    tr["buses"].push_back({{"id", b.id}, {"firm_load_mw", b.firm_load}});
  tr["lines"] = ordered_json::array();
  for (const Line& l : s.transmission.lines)
    tr["lines"].push_back({{"id", l.id},
                           {"from_bus", l.from_bus},
                           {"to_bus", l.to_bus},
                           {"reactance_pu", l.reactance},
                           {"flow_limit_mw", l.flow_limit}});
  tr["generators"] = ordered_json::array();
  for (const Generator& g : s.transmission.generators) {
    ordered_json blocks = ordered_json::array();
    for (const OfferBlock& b : g.blocks)
      blocks.push_back({{"width_mw", b.width}, {"price_per_mwh", b.price}});
    tr["generators"].push_back({{"id", g.id}, {"bus", g.bus}, {"blocks", blocks}});
  }
  doc["transmission"] = std::move(tr);

  doc["distributions"] = ordered_json::array();
  for (const DistributionSystem& d : s.distributions) {
    ordered_json jd;
    jd["id"] = d.id;
    jd["coupling_bus"] = d.coupling_bus;
    jd["substation_node"] = d.substation_node;
    jd["substation_u"] = d.substation_u;
    if (d.q_dso_min > -kInfBound) jd["q_dso_min_mvar"] = d.q_dso_min;
    if (d.q_dso_max < kInfBound) jd["q_dso_max_mvar"] = d.q_dso_max;
    jd["nodes"] = ordered_json::array();
    for (const DistNode& n : d.nodes)
      jd["nodes"].push_back({{"id", n.id},
                             {"firm_load_mw", n.firm_load_p},
                             {"firm_load_mvar", n.firm_load_q},
                             {"u_min", n.u_min},
                             {"u_max", n.u_max}});
    jd["branches"] = ordered_json::array();
    for (const DistBranch& b : d.branches)
      jd["branches"].push_back({{"id", b.id},
                                {"parent_node", b.parent_node},
                                {"child_node", b.child_node},
                                {"r_pu", b.r},
                                {"x_pu", b.x},
                                {"pl_max_mw", b.pl_max},
                                {"ql_max_mvar", b.ql_max}});
    jd["aggregators"] = ordered_json::array();
    for (const Aggregator& a : d.aggregators) {
      ordered_json blocks = ordered_json::array();
      for (const OfferBlock& b : a.blocks)
        blocks.push_back({{"width_mw", b.width}, {"price_per_mwh", b.price}});
      jd["aggregators"].push_back({{"id", a.id},
                                   {"kind", to_string(a.kind)},
                                   {"node", a.node},
                                   {"blocks", blocks},
                                   {"tan_phi", a.tan_phi},
                                   {"fixed_profile_mw", a.fixed_profile}});
    }
    doc["distributions"].push_back(std::move(jd));
  }
  return doc.dump(2) + "\n";
}

std::vector<Violation> validate(const Scenario& s) {
  std::vector<Violation> out;
  const TransmissionSystem& t = s.transmission;

  if (!(s.base_mva > 0.0) || !std::isfinite(s.base_mva))
    out.push_back({"nonpositive base power", "base_mva = " + std::to_string(s.base_mva)});

  std::unordered_map<std::string, int> bus_idx;
  for (size_t i = 0; i < t.buses.size(); ++i) {
    if (!bus_idx.emplace(t.buses[i].id, static_cast<int>(i)).second)
      out.push_back({"duplicate bus id", t.buses[i].id});
    if (!std::isfinite(t.buses[i].firm_load))
      out.push_back({"non-finite firm load", "bus " + t.buses[i].id});
  }
  if (!t.buses.empty() && !bus_idx.count(t.reference_bus))
    out.push_back({"unknown reference bus", t.reference_bus});

  for (const Line& l : t.lines) {
    if (!bus_idx.count(l.from_bus) || !bus_idx.count(l.to_bus))
      out.push_back({"unknown line endpoint", "line " + l.id});
    if (!(l.reactance > 0.0))
      out.push_back({"nonpositive line reactance", "line " + l.id});
    if (!(l.flow_limit > 0.0))
      out.push_back({"nonpositive line limit", "line " + l.id});
  }

  // Transmission connectivity (undirected), only meaningful when ids resolve.
  if (!t.buses.empty()) {
    std::vector<std::vector<int>> adj(t.buses.size());
    for (const Line& l : t.lines) {
      auto a = bus_idx.find(l.from_bus), b = bus_idx.find(l.to_bus);
      if (a == bus_idx.end() || b == bus_idx.end()) continue;
      adj[a->second].push_back(b->second);
      adj[b->second].push_back(a->second);
    }
    std::vector<char> seen(t.buses.size(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : adj[u])
        if (!seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
    }
    for (size_t i = 0; i < seen.size(); ++i)
      if (!seen[i])
        out.push_back({"transmission graph disconnected", "bus " + t.buses[i].id});
  }

  std::unordered_map<std::string, int> gen_ids;
  for (const Generator& g : t.generators) {
    if (!gen_ids.emplace(g.id, 1).second)
      out.push_back({"duplicate generator id", g.id});
    if (!bus_idx.count(g.bus))
      out.push_back({"unknown generator bus", "generator " + g.id});
    check_convex_offer("generator " + g.id, AggKind::generating, g.blocks, out);
  }

  std::unordered_set<std::string> dist_ids;
  for (const DistributionSystem& d : s.distributions) {
    std::string who = "distribution " + d.id;
    if (!dist_ids.insert(d.id).second) out.push_back({"duplicate distribution id", d.id});
    if (!bus_idx.count(d.coupling_bus))
      out.push_back({"unknown coupling bus", who + " -> " + d.coupling_bus});
    std::vector<Violation> local = validate_feeder(d);
    out.insert(out.end(), local.begin(), local.end());
  }
  return out;
}

std::vector<Violation> validate_feeder(const DistributionSystem& d) {
  std::vector<Violation> out;
  {
    std::string who = "distribution " + d.id;
    if (!(d.base_mva > 0.0) || !std::isfinite(d.base_mva))
      out.push_back({"nonpositive base power", who});

    std::unordered_map<std::string, int> node_idx;
    for (size_t i = 0; i < d.nodes.size(); ++i) {
      const DistNode& n = d.nodes[i];
      if (!node_idx.emplace(n.id, static_cast<int>(i)).second)
        out.push_back({"duplicate node id", who + " node " + n.id});
      if (!(n.u_min < n.u_max))
        out.push_back({"empty voltage band", who + " node " + n.id});
      if (!std::isfinite(n.firm_load_p) || !std::isfinite(n.firm_load_q))
        out.push_back({"non-finite firm load", who + " node " + n.id});
    }
    auto sub = node_idx.find(d.substation_node);
    if (sub == node_idx.end()) {
      out.push_back({"unknown substation node", who + " -> " + d.substation_node});
    } else {
      const DistNode& n = d.nodes[sub->second];
      if (d.substation_u < n.u_min || d.substation_u > n.u_max)
        out.push_back({"substation voltage outside band", who});
    }
    if (d.q_dso_min > d.q_dso_max)
      out.push_back({"empty reactive band", who});

    bool ids_ok = true;
    std::vector<int> parent_count(d.nodes.size(), 0);
    for (const DistBranch& b : d.branches) {
      if (!node_idx.count(b.parent_node) || !node_idx.count(b.child_node)) {
        out.push_back({"unknown branch endpoint", who + " branch " + b.id});
        ids_ok = false;
        continue;
      }
      if (b.r < 0.0 || b.x < 0.0)
        out.push_back({"negative branch impedance", who + " branch " + b.id});
      if (!(b.pl_max > 0.0) || !(b.ql_max > 0.0))
        out.push_back({"nonpositive branch limit", who + " branch " + b.id});
      if (b.child_node == d.substation_node)
        out.push_back({"cyclic branch", who + " branch " + b.id + " re-enters the substation"});
      else if (++parent_count[node_idx[b.child_node]] > 1)
        out.push_back({"cyclic branch", who + " branch " + b.id + " gives node " +
                                            b.child_node + " a second parent"});
    }
    if (d.branches.size() + 1 != d.nodes.size())
      out.push_back({"radiality violated",
                     who + " has " + std::to_string(d.nodes.size()) + " nodes but " +
                         std::to_string(d.branches.size()) + " branches"});
    if (ids_ok && sub != node_idx.end()) {
      // Reachability from the substation along parent->child arcs.
      std::vector<std::vector<int>> children(d.nodes.size());
      for (const DistBranch& b : d.branches)
        children[node_idx[b.parent_node]].push_back(node_idx[b.child_node]);
      std::vector<char> seen(d.nodes.size(), 0);
      std::vector<int> stack{sub->second};
      seen[sub->second] = 1;
      while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int v : children[u])
          if (!seen[v]) {
            seen[v] = 1;
            stack.push_back(v);
          }
      }
      for (size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
          out.push_back({"unreachable node", who + " node " + d.nodes[i].id});
    }

    std::unordered_set<std::string> agg_ids;
    for (const Aggregator& a : d.aggregators) {
      std::string aw = who + " aggregator " + a.id;
      if (!agg_ids.insert(a.id).second) out.push_back({"duplicate aggregator id", aw});
      if (!node_idx.count(a.node)) out.push_back({"unknown aggregator node", aw});
      if (!std::isfinite(a.tan_phi)) out.push_back({"non-finite tan_phi", aw});
      if (a.kind == AggKind::renewable) {
        if (!a.blocks.empty()) out.push_back({"renewable with blocks", aw});
        if (!(a.fixed_profile >= 0.0) || !std::isfinite(a.fixed_profile))
          out.push_back({"negative renewable profile", aw});
      } else {
        if (a.fixed_profile != 0.0)
          out.push_back({"fixed profile on dispatchable aggregator", aw});
        check_convex_offer(aw, a.kind, a.blocks, out);
      }
    }
  }
  return out;
}

Scenario relax_limits(Scenario s, double factor) {
  for (Line& l : s.transmission.lines) l.flow_limit *= factor;
  for (DistributionSystem& d : s.distributions) {
    for (DistBranch& b : d.branches) {
      b.pl_max *= factor;
      b.ql_max *= factor;
    }
    for (DistNode& n : d.nodes) {
      double mid = 0.5 * (n.u_min + n.u_max);
      double half = 0.5 * (n.u_max - n.u_min);
      n.u_min = mid - factor * half;
      n.u_max = mid + factor * half;
    }
    if (d.q_dso_min > -kInfBound) d.q_dso_min *= factor;
    if (d.q_dso_max < kInfBound) d.q_dso_max *= factor;
  }
  return s;
}

int FeederIndex::node_index(const std::string& id) const {
  for (size_t i = 0; i < node_ids.size(); ++i)
    if (node_ids[i] == id) return static_cast<int>(i);
  return -1;
}

FeederIndex index_feeder(const DistributionSystem& d) {
  FeederIndex fi;
  for (const DistNode& n : d.nodes) fi.node_ids.push_back(n.id);
  fi.substation = fi.node_index(d.substation_node);
  fi.out_branches.resize(d.nodes.size());
  fi.in_branch.assign(d.nodes.size(), -1);
  for (size_t j = 0; j < d.branches.size(); ++j) {
    int p = fi.node_index(d.branches[j].parent_node);
    int c = fi.node_index(d.branches[j].child_node);
    fi.branch_parent.push_back(p);
    fi.branch_child.push_back(c);
    fi.out_branches[p].push_back(static_cast<int>(j));
    fi.in_branch[c] = static_cast<int>(j);
  }
  return fi;
}

}  // namespace gridseam
