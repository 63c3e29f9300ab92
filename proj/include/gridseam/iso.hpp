// Wholesale market clearing: DC-OPF over the transmission system with
// generator block offers and one block-decomposed offer per DSO.
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "gridseam/dso.hpp"
#include "gridseam/grid.hpp"
#include "gridseam/lp.hpp"

namespace gridseam {

struct MarketError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A DSO offer placed at its coupling bus.
struct DsoOfferAt {
  std::string dso_id;
  std::string coupling_bus;
  DsoOffer offer;
};

struct IsoModel {
  LinearProgram lp;
  std::vector<std::vector<int>> gen_block_vars;  // per generator
  std::vector<std::vector<int>> dso_block_vars;  // per offer
  std::vector<int> theta_vars;                   // per bus
  std::vector<int> flow_vars;                    // per line
  std::vector<int> balance_row;                  // per bus
  int ref_row = -1;
};

struct IsoResult {
  std::vector<double> gen_dispatch;  // MW per generator
  std::vector<double> dso_dispatch;  // MW per offer, + = injection into grid
  std::vector<double> lmps;          // $/MWh per bus
  std::vector<double> line_flows;    // MW per line, from->to positive
  double objective = 0.0;            // $/h, excluding DSO fixed costs
  double total_gen_mw = 0.0;
};

/// Throws MarketError when an offer's bus or the reference bus is unknown.
IsoModel build_iso_model(const TransmissionSystem& t, const std::vector<DsoOfferAt>& offers);

/// Appends the transmission skeleton — generator blocks, angles, flows,
/// balance/flow-definition/reference rows, no offers — onto an existing LP.
/// The returned bookkeeping indexes into `lp`; its own lp member stays empty.
IsoModel append_transmission(LinearProgram& lp, const TransmissionSystem& t);

LinearProgram build_iso_lp(const TransmissionSystem& t, const std::vector<DsoOfferAt>& offers);

/// Clears the market. Infeasible/unbounded models raise MarketError.
IsoResult clear_market(const TransmissionSystem& t, const std::vector<DsoOfferAt>& offers,
                       const SolveOptions& lp_opts = {});

/// CSV "bus,lmp_per_mwh".
std::string lmps_csv(const TransmissionSystem& t, const IsoResult& r);
/// CSV "participant,dispatch_mw" — generators first, then DSO offers.
std::string dispatch_csv(const TransmissionSystem& t, const std::vector<DsoOfferAt>& offers,
                         const IsoResult& r);
/// JSON aggregate: objective, dispatches, prices, flows.
std::string iso_result_json(const TransmissionSystem& t, const std::vector<DsoOfferAt>& offers,
                            const IsoResult& r);

}  // namespace gridseam
