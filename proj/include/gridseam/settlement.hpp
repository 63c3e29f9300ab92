// Distribution-side settlement: re-dispatch the feeder at the cleared
// interchange, price every node with a price-taking solve against the
// coupling-bus LMP, and account for all money flows.
#pragma once

#include <string>
#include <vector>

#include "gridseam/dso.hpp"
#include "gridseam/grid.hpp"

namespace gridseam {

struct DsoDispatch {
  std::vector<double> agg_mw;    // per aggregator, net injection (DR negative)
  std::vector<double> branch_pl; // MW, parent->child positive
  std::vector<double> branch_ql; // MVAr
  double cost = 0.0;             // feeder LP objective at p_star, $/h
};

/// Feeder dispatch pinned at interchange p_star. Throws
/// DsoError("dispatch outside bid range ...") when p_star is infeasible.
DsoDispatch dso_dispatch(const DistributionSystem& d, double p_star,
                         const SolveOptions& opts = {});

/// Nodal distribution prices from the price-taking feeder solve
/// min c(x) - lmp_star * p. The substation price always equals lmp_star.
std::vector<double> dso_prices(const DistributionSystem& d, double lmp_star,
                               const SolveOptions& opts = {});

struct AggregatorSettlement {
  std::string aggregator;
  std::string node;
  double dispatch_mw = 0.0;  // net injection
  double dlmp_per_mwh = 0.0;
  double payment_per_h = 0.0;  // dlmp * dispatch; negative = pays the DSO
};

struct DsoSettlement {
  std::string dso_id;
  double p_star = 0.0;
  double lmp_star = 0.0;
  std::vector<double> node_dlmp;            // per node, $/MWh
  std::vector<AggregatorSettlement> lines;  // per aggregator
  std::vector<double> branch_pl;            // from the dispatch solve
  double dispatch_cost = 0.0;     // feeder LP objective at p_star
  double iso_to_dso = 0.0;        // lmp_star * p_star
  double firm_load_charge = 0.0;  // sum over nodes of dlmp * firm load
  double dso_net_position = 0.0;  // iso_to_dso + firm_load_charge - payouts:
                                  // exactly the feeder's congestion rent
};

/// Pure assembly of the money flows from an already-solved dispatch and
/// price vector.
DsoSettlement compute_payments(const DistributionSystem& d, const DsoDispatch& dispatch,
                               std::vector<double> dlmp, double lmp_star, double p_star);

/// dso_dispatch + dso_prices + compute_payments in one call.
DsoSettlement settle(const DistributionSystem& d, double p_star, double lmp_star,
                     const SolveOptions& opts = {});

/// CSV "aggregator,node,dispatch_mw,dlmp_per_mwh,payment_per_h".
std::string settlement_csv(const DsoSettlement& s);
/// CSV "node,dlmp_per_mwh".
std::string dlmps_csv(const DistributionSystem& d, const DsoSettlement& s);
/// JSON summary of the money flows.
std::string settlement_json(const DistributionSystem& d, const DsoSettlement& s);

}  // namespace gridseam
