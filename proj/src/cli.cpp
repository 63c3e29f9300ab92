#include "gridseam/cli.hpp"

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <ostream>

#include "CLI11.hpp"
#include "gridseam/generate.hpp"
#include "gridseam/grid.hpp"
#include "gridseam/ideal.hpp"
#include "gridseam/io.hpp"
#include "gridseam/iso.hpp"
#include "gridseam/lp.hpp"
#include "gridseam/settlement.hpp"

namespace gridseam {

namespace {

namespace fs = std::filesystem;

std::string safe_name(const std::string& id) {
  std::string s;
  for (char c : id)
    s += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return s;
}

// All write failures surface as I/O errors (exit 2), never as internal ones.
void emit_file(const std::string& dir, const std::string& name, const std::string& text,
               std::ostream& out) {
  try {
    fs::create_directories(dir);
    std::string path = (fs::path(dir) / name).string();
    atomic_write_file(path, text);
    out << "wrote " << path << "\n";
  } catch (const std::runtime_error& e) {
    throw ScenarioIoError(e.what());
  }
}

// Console display rounding; emitted files keep full precision.
std::string disp(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string joined(const std::vector<double>& v) {
  std::string s = "(";
  for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + disp(v[i]);
  return s + ")";
}

// Runs one pipeline stage, naming it on the way out when it fails.
template <class F>
auto stage(std::ostream& err, const char* name, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    err << "stage " << name << " failed: " << e.what() << "\n";
    throw;
  }
}

int cmd_validate(const RunConfig& cfg, std::ostream& out) {
  Scenario s = load_scenario_file(cfg.scenario_path);  // throws when dirty
  out << "ok: " << s.name << "\n";
  return 0;
}

int cmd_bidcurve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Scenario s = load_scenario_file(cfg.scenario_path);
  int failed = 0;
  for (const DistributionSystem& d : s.distributions) {
    try {
      PwlConvexCost curve = trace_bid_curve(d, cfg.trace);
      DsoOffer offer = to_offer_blocks(curve, cfg.trace.slope_merge_tol);
      out << d.id << ": range [" << disp(offer.p_min) << ", " << disp(offer.p_max)
          << "] MW, " << offer.blocks.size() << " segments, fixed cost "
          << disp(offer.fixed_cost) << " $/h\n";
      if (!cfg.out.empty()) {
        emit_file(cfg.out, "curve_" + safe_name(d.id) + ".csv", curve_breakpoints_csv(curve),
                  out);
        emit_file(cfg.out, "marginal_" + safe_name(d.id) + ".csv", curve_marginals_csv(curve),
                  out);
      }
    } catch (const DsoError& e) {
      err << d.id << ": " << e.what() << "\n";
      ++failed;
    }
  }
  return failed ? 1 : 0;
}

int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Scenario s = load_scenario_file(cfg.scenario_path);
  out << "scenario " << s.name << "\n";

  std::vector<PwlConvexCost> curves;
  std::vector<DsoOfferAt> offers;
  stage(err, "bid tracing", [&] {
    for (const DistributionSystem& d : s.distributions) {
      curves.push_back(trace_bid_curve(d, cfg.trace));
      offers.push_back({d.id, d.coupling_bus,
                        to_offer_blocks(curves.back(), cfg.trace.slope_merge_tol)});
      out << offers.back().dso_id << ": bid range [" << disp(offers.back().offer.p_min)
          << ", " << disp(offers.back().offer.p_max) << "] MW\n";
    }
  });

  IsoResult market = stage(err, "market clearing",
                           [&] { return clear_market(s.transmission, offers, cfg.trace.lp); });
  out << "market objective " << disp(market.objective) << " $/h\n";
  for (size_t g = 0; g < s.transmission.generators.size(); ++g)
    out << "  " << s.transmission.generators[g].id << " = " << disp(market.gen_dispatch[g])
        << " MW\n";
  std::vector<double> lmp_at(s.distributions.size());
  for (size_t j = 0; j < s.distributions.size(); ++j) {
    for (size_t b = 0; b < s.transmission.buses.size(); ++b)
      if (s.transmission.buses[b].id == s.distributions[j].coupling_bus)
        lmp_at[j] = market.lmps[b];
    out << "  " << s.distributions[j].id << ": p* = " << disp(market.dso_dispatch[j])
        << " MW, LMP = " << disp(lmp_at[j]) << " $/MWh\n";
  }

  std::vector<DsoSettlement> settlements = stage(err, "settlement", [&] {
    std::vector<DsoSettlement> res;
    for (size_t j = 0; j < s.distributions.size(); ++j)
      res.push_back(settle(s.distributions[j], market.dso_dispatch[j], lmp_at[j],
                           cfg.trace.lp));
    return res;
  });
  double total = market.objective;
  for (const DsoOfferAt& o : offers) total += o.offer.fixed_cost;
  for (const DsoSettlement& st : settlements)
    out << st.dso_id << " settlement: dlmp = " << joined(st.node_dlmp)
        << " $/MWh, net position " << disp(st.dso_net_position) << " $/h\n";
  out << "total cost " << disp(total) << " $/h\n";

  if (!cfg.out.empty()) {
    for (size_t j = 0; j < s.distributions.size(); ++j) {
      std::string id = safe_name(s.distributions[j].id);
      emit_file(cfg.out, "curve_" + id + ".csv", curve_breakpoints_csv(curves[j]), out);
      emit_file(cfg.out, "marginal_" + id + ".csv", curve_marginals_csv(curves[j]), out);
      emit_file(cfg.out, "settlement_" + id + ".csv", settlement_csv(settlements[j]), out);
      emit_file(cfg.out, "dlmps_" + id + ".csv", dlmps_csv(s.distributions[j], settlements[j]),
                out);
      emit_file(cfg.out, "settlement_" + id + ".json",
                settlement_json(s.distributions[j], settlements[j]), out);
    }
    emit_file(cfg.out, "lmps.csv", lmps_csv(s.transmission, market), out);
    emit_file(cfg.out, "dispatch.csv", dispatch_csv(s.transmission, offers, market), out);
    emit_file(cfg.out, "market.json", iso_result_json(s.transmission, offers, market), out);
  }
  return 0;
}

int cmd_compare(const RunConfig& cfg, std::ostream& out) {
  Scenario s = load_scenario_file(cfg.scenario_path);
  ComparisonReport rep = audit(s, cfg.tol, cfg.trace);
  out << comparison_json(rep);
  if (!cfg.out.empty()) emit_file(cfg.out, "comparison.json", comparison_json(rep), out);
  return (rep.pass || (rep.degenerate && rep.objectives_match)) ? 0 : 1;
}

int cmd_generate(const RunConfig& cfg, std::ostream& out) {
  Scenario s = generate_scenario(cfg.seed, cfg.gen);
  std::string text = emit_scenario(s);
  if (cfg.out.empty()) {
    out << text;
    return 0;
  }
  try {
    if (fs::path(cfg.out).has_parent_path())
      fs::create_directories(fs::path(cfg.out).parent_path());
    atomic_write_file(cfg.out, text);
    out << "wrote " << cfg.out << "\n";
  } catch (const std::runtime_error& e) {
    throw ScenarioIoError(e.what());
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"transmission-distribution market coordination toolkit"};
  app.name("gridseam");
  app.require_subcommand(1);

  auto add_scenario = [&](CLI::App* c) {
    c->add_option("--scenario", cfg.scenario_path, "scenario JSON file")->required();
  };
  auto add_tols = [&](CLI::App* c) {
    c->add_option("--slope-merge-tol", cfg.trace.slope_merge_tol,
                  "merge curve segments closer than this ($/MWh)");
    c->add_option("--curve-tol", cfg.trace.curve_tol, "bisection value tolerance");
    c->add_option("--x-tol", cfg.trace.x_tol, "breakpoint position tolerance");
    c->add_option("--feas-tol", cfg.trace.lp.feas_tol, "LP feasibility tolerance");
    c->add_option("--opt-tol", cfg.trace.lp.opt_tol, "LP optimality tolerance");
  };

  CLI::App* validate = app.add_subcommand("validate", "check a scenario file");
  add_scenario(validate);

  CLI::App* bidcurve =
      app.add_subcommand("bidcurve", "trace each feeder's bid curve to CSV");
  add_scenario(bidcurve);
  bidcurve->add_option("--out", cfg.out, "directory for curve CSVs");
  add_tols(bidcurve);

  CLI::App* run = app.add_subcommand("run", "trace bids, clear the market, settle");
  add_scenario(run);
  run->add_option("--out", cfg.out, "directory for result files");
  add_tols(run);

  CLI::App* compare = app.add_subcommand(
      "compare", "audit the two-stage run against the whole-system benchmark");
  add_scenario(compare);
  compare->add_option("--out", cfg.out, "directory for the comparison report");
  compare->add_option("--tol", cfg.tol, "comparison tolerance (default 1e-5)");
  add_tols(compare);

  CLI::App* generate = app.add_subcommand("generate", "emit a random scenario");
  generate->add_option("--seed", cfg.seed, "random seed (default 1)");
  generate->add_option("--out", cfg.out, "output file (default: stdout)");
  generate->add_option("--buses-min", cfg.gen.buses_min, "minimum transmission buses");
  generate->add_option("--buses-max", cfg.gen.buses_max, "maximum transmission buses");
  generate->add_option("--feeders-min", cfg.gen.feeders_min, "minimum feeders");
  generate->add_option("--feeders-max", cfg.gen.feeders_max, "maximum feeders");
  generate->add_option("--nodes-min", cfg.gen.feeder_nodes_min, "minimum nodes per feeder");
  generate->add_option("--nodes-max", cfg.gen.feeder_nodes_max, "maximum nodes per feeder");
  generate->add_option("--aggs-min", cfg.gen.feeder_aggs_min,
                       "minimum aggregators per feeder");
  generate->add_option("--aggs-max", cfg.gen.feeder_aggs_max,
                       "maximum aggregators per feeder");
  generate->add_option("--price-min", cfg.gen.price_min, "price range floor ($/MWh)");
  generate->add_option("--price-max", cfg.gen.price_max, "price range ceiling ($/MWh)");

  std::vector<const char*> argv{"gridseam"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }
  cfg.command = app.get_subcommands().front()->get_name();

  try {
    if (cfg.command == "validate") return cmd_validate(cfg, out);
    if (cfg.command == "bidcurve") return cmd_bidcurve(cfg, out, err);
    if (cfg.command == "run") return cmd_run(cfg, out, err);
    if (cfg.command == "compare") return cmd_compare(cfg, out);
    return cmd_generate(cfg, out);
  } catch (const ScenarioIoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ScenarioSchemaError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalBreakdown& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const LpFormatError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const ScenarioValidationError& e) {
    err << e.what() << "\n";
    return 1;
  } catch (const DsoError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const MarketError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const IdealError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const GenerationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace gridseam
