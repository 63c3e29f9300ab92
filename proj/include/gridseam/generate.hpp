// Seeded random-scenario builder: random meshed transmission over random
// radial feeders, sized so every emitted scenario is feasible by
// construction. Fuels the randomized equivalence audits.
#pragma once

#include <cstdint>
#include <stdexcept>

#include "gridseam/grid.hpp"

namespace gridseam {

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GeneratorParams {
  int buses_min = 5, buses_max = 15;
  int feeders_min = 1, feeders_max = 3;
  int feeder_nodes_min = 6, feeder_nodes_max = 30;
  int feeder_aggs_min = 1, feeder_aggs_max = 4;
  double price_min = 5.0, price_max = 60.0;
  double price_jitter = 1e-3;  // i.i.d. +-0.1% on every price: keeps optima unique
  bool verify = true;          // re-validate before returning
};

/// Deterministic for a fixed (seed, params): identical scenarios across
/// platforms and runs. Throws GenerationError on unusable parameters.
Scenario generate_scenario(std::uint64_t seed, const GeneratorParams& params = {});

}  // namespace gridseam
