#include "gridseam/generate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gridseam/dso.hpp"
#include "gridseam/iso.hpp"

namespace gridseam {
namespace {

// std::uniform_* distributions are implementation-defined; these are not.
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uni(double a, double b) {
    return a + (b - a) * ((gen() >> 11) * 0x1.0p-53);
  }
  int uni_int(int a, int b) {  // inclusive
    return a + static_cast<int>(gen() % static_cast<std::uint64_t>(b - a + 1));
  }
};

void check_params(const GeneratorParams& p) {
  auto bad = [](const std::string& what) { throw GenerationError("generator parameters: " + what); };
  if (p.buses_min < 1 || p.buses_max < p.buses_min) bad("bus count range is empty");
  if (p.feeders_min < 0 || p.feeders_max < p.feeders_min) bad("feeder count range is empty");
  if (p.feeder_nodes_min < 1 || p.feeder_nodes_max < p.feeder_nodes_min)
    bad("feeder node count range is empty");
  if (p.feeder_aggs_min < 0 || p.feeder_aggs_max < p.feeder_aggs_min)
    bad("aggregator count range is empty");
  if (!(p.price_min > 0.0) || !(p.price_max > p.price_min)) bad("price range is empty");
  if (!(p.price_jitter >= 0.0) || p.price_jitter > 0.01) bad("price jitter outside [0, 1%]");
}

double jittered(Rng& rng, double price, double jitter) {
  return price * (1.0 + jitter * rng.uni(-1.0, 1.0));
}

std::vector<OfferBlock> gen_blocks(Rng& rng, const GeneratorParams& p, int count,
                                   double width_lo, double width_hi, bool increasing) {
  std::vector<OfferBlock> blocks(count);
  double price = increasing ? rng.uni(p.price_min, 0.8 * p.price_max)
                            : rng.uni(p.price_min + 5.0, p.price_max);
  for (auto& b : blocks) {
    b.width = rng.uni(width_lo, width_hi);
    b.price = jittered(rng, price, p.price_jitter);
    price = increasing ? price + rng.uni(0.5, 8.0)
                       : std::max(1.0, price - rng.uni(0.5, 6.0));
  }
  return blocks;
}

double block_sum(const std::vector<OfferBlock>& blocks) {
  double s = 0.0;
  for (const auto& b : blocks) s += b.width;
  return s;
}

DistributionSystem make_feeder(Rng& rng, const GeneratorParams& p, int ordinal,
                               const std::string& coupling_bus) {
  DistributionSystem d;
  d.id = "ds" + std::to_string(ordinal);
  d.coupling_bus = coupling_bus;
  d.base_mva = 1.0;

  const int n = rng.uni_int(p.feeder_nodes_min, p.feeder_nodes_max);
  const std::string stem = "d" + std::to_string(ordinal) + "n";
  for (int i = 0; i < n; ++i) {
    DistNode node;
    node.id = stem + std::to_string(i + 1);
    if (i > 0) {
      node.firm_load_p = rng.uni(0.0, 0.35);
      node.firm_load_q = node.firm_load_p * rng.uni(0.15, 0.45);
    }
    d.nodes.push_back(node);
  }
  d.substation_node = d.nodes[0].id;

  // Random tree; parent index always below child index.
  std::vector<int> parent(n, -1);
  for (int i = 1; i < n; ++i) parent[i] = rng.uni_int(0, i - 1);

  const int n_agg = rng.uni_int(p.feeder_aggs_min, p.feeder_aggs_max);
  for (int a = 0; a < n_agg; ++a) {
    Aggregator agg;
    agg.id = "d" + std::to_string(ordinal) + "a" + std::to_string(a + 1);
    agg.node = d.nodes[rng.uni_int(0, n - 1)].id;
    agg.tan_phi = rng.uni(0.05, 0.35);
    const double roll = rng.uni(0.0, 1.0);
    if (roll < 0.6) {
      agg.kind = AggKind::generating;
      agg.blocks = gen_blocks(rng, p, rng.uni_int(1, 3), 0.15, 1.0, true);
    } else if (roll < 0.85) {
      agg.kind = AggKind::demand_response;
      agg.blocks = gen_blocks(rng, p, rng.uni_int(1, 2), 0.1, 0.6, false);
    } else {
      agg.kind = AggKind::renewable;
      agg.fixed_profile = rng.uni(0.05, 0.5);
    }
    d.aggregators.push_back(agg);
  }

  // Subtree totals drive branch ratings. The floor covers the one mandatory
  // flow pattern — firm load down, must-run renewable output up — so the
  // all-idle point is always feasible; the "activity" sum (loads plus every
  // aggregator capability) bounds any flow the LP could route, so a loose
  // draw can never bind while a tight draw stays serviceable.
  std::vector<double> must_p(n, 0.0), act_p(n, 0.0), act_q(n, 0.0);
  for (int i = 0; i < n; ++i) {
    must_p[i] = d.nodes[i].firm_load_p;
    act_p[i] = d.nodes[i].firm_load_p;
    act_q[i] = d.nodes[i].firm_load_q;
  }
  for (const auto& agg : d.aggregators) {
    int idx = 0;
    while (d.nodes[idx].id != agg.node) ++idx;
    const double cap = agg.kind == AggKind::renewable ? agg.fixed_profile : block_sum(agg.blocks);
    if (agg.kind == AggKind::renewable) must_p[idx] += cap;
    act_p[idx] += cap;
    act_q[idx] += cap * agg.tan_phi;
  }
  for (int i = n - 1; i >= 1; --i) {
    must_p[parent[i]] += must_p[i];
    act_p[parent[i]] += act_p[i];
    act_q[parent[i]] += act_q[i];
  }

  const bool tight = rng.uni(0.0, 1.0) < 0.5;
  for (int i = 1; i < n; ++i) {
    DistBranch br;
    br.id = "d" + std::to_string(ordinal) + "b" + std::to_string(i);
    br.parent_node = d.nodes[parent[i]].id;
    br.child_node = d.nodes[i].id;
    const double floor_p = 1.15 * must_p[i] + 0.05;
    const double draw = tight ? rng.uni(0.25, 0.7) * act_p[i] : rng.uni(1.1, 1.6) * act_p[i];
    br.pl_max = std::max(draw, floor_p);
    br.ql_max = 1.25 * act_q[i] + 0.3;
    // Impedance shrinks with rating so voltage stays comfortably inside the
    // band at any feasible loading; voltage-binding cases are handcrafted.
    br.r = rng.uni(0.5, 2.0) * 1e-3 / std::max(1.0, br.pl_max);
    br.x = rng.uni(0.5, 2.0) * 1e-3 / std::max(1.0, br.pl_max);
    d.branches.push_back(br);
  }
  return d;
}

}  // namespace

Scenario generate_scenario(std::uint64_t seed, const GeneratorParams& params) {
  check_params(params);
  Rng rng(seed);

  Scenario s;
  s.name = "random-" + std::to_string(seed);
  s.base_mva = 1.0;
  auto& t = s.transmission;

  const int n_bus = rng.uni_int(params.buses_min, params.buses_max);
  for (int i = 0; i < n_bus; ++i) {
    Bus b;
    b.id = "b" + std::to_string(i + 1);
    b.firm_load = rng.uni(0.0, 20.0);
    t.buses.push_back(b);
  }
  t.reference_bus = t.buses[0].id;

  int line_no = 0;
  auto add_line = [&](int a, int b) {
    Line l;
    l.id = "l" + std::to_string(++line_no);
    l.from_bus = t.buses[a].id;
    l.to_bus = t.buses[b].id;
    l.reactance = rng.uni(0.05, 0.25);
    l.flow_limit = kInfBound;  // provisional; rated after the stress solve
    t.lines.push_back(l);
  };
  for (int i = 1; i < n_bus; ++i) add_line(rng.uni_int(0, i - 1), i);
  const int extras = rng.uni_int(0, std::max(1, n_bus / 4));
  for (int e = 0; e < extras; ++e) {
    const int a = rng.uni_int(0, n_bus - 1);
    const int b = rng.uni_int(0, n_bus - 1);
    if (a != b) add_line(a, b);
  }

  const int n_feeder = std::min(rng.uni_int(params.feeders_min, params.feeders_max), n_bus);
  std::vector<int> order(n_bus);
  for (int i = 0; i < n_bus; ++i) order[i] = i;
  for (int i = n_bus - 1; i > 0; --i) std::swap(order[i], order[rng.uni_int(0, i)]);
  for (int f = 0; f < n_feeder; ++f)
    s.distributions.push_back(make_feeder(rng, params, f + 1, t.buses[order[f]].id));

  // Worst-case interchange per feeder: most negative = deepest import.
  std::vector<double> feeder_p_min;
  for (const auto& d : s.distributions) feeder_p_min.push_back(feasible_range(d).first);

  double import_need = 0.0, forced_injection = 0.0;
  for (double pm : feeder_p_min) {
    import_need += std::max(0.0, -pm);
    forced_injection += std::max(0.0, pm);
  }
  double total_load = 0.0;
  for (const auto& b : t.buses) total_load += b.firm_load;
  if (total_load < forced_injection + 1.0) {
    // Must-run feeder exports need a sink even with every generator off.
    t.buses[0].firm_load += forced_injection + 1.0 - total_load;
    total_load = forced_injection + 1.0;
  }

  const int n_gen = std::max(2, n_bus / 3) + rng.uni_int(0, 2);
  for (int g = 0; g < n_gen; ++g) {
    Generator gen;
    gen.id = "g" + std::to_string(g + 1);
    gen.bus = t.buses[rng.uni_int(0, n_bus - 1)].id;
    gen.blocks = gen_blocks(rng, params, rng.uni_int(1, 3), 3.0, 25.0, true);
    t.generators.push_back(gen);
  }
  double capacity = 0.0;
  for (const auto& g : t.generators) capacity += block_sum(g.blocks);
  const double need = 1.3 * (total_load + import_need) + 5.0;
  if (capacity < need) {
    Generator slack;
    slack.id = "gslack";
    slack.bus = t.reference_bus;
    slack.blocks = {{need - capacity,
                     jittered(rng, rng.uni(0.85, 1.0) * params.price_max, params.price_jitter)}};
    t.generators.push_back(slack);
  }

  // Rate the lines around the all-feeders-at-max-import flow pattern so that
  // point stays inside every limit; the market can then congest from there.
  std::vector<DsoOfferAt> stress;
  for (size_t f = 0; f < s.distributions.size(); ++f) {
    DsoOffer offer;
    offer.p_min = offer.p_max = feeder_p_min[f];
    stress.push_back({s.distributions[f].id, s.distributions[f].coupling_bus, offer});
  }
  const IsoResult flows = clear_market(t, stress);
  const bool uncongested = rng.uni(0.0, 1.0) < 0.4;
  for (size_t l = 0; l < t.lines.size(); ++l) {
    const double h = uncongested ? rng.uni(1.8, 2.6) : rng.uni(1.06, 1.9);
    t.lines[l].flow_limit = std::max(h * std::abs(flows.line_flows[l]), 0.75);
  }

  if (params.verify) {
    const auto violations = validate(s);
    if (!violations.empty()) {
      std::string msg = "generated scenario failed validation:";
      for (const auto& v : violations) msg += " [" + v.code + ": " + v.detail + "]";
      throw GenerationError(msg);
    }
  }
  return s;
}

}  // namespace gridseam
