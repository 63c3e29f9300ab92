// Command-line front end. All logic lives in the library; this layer parses
// flags, runs one subcommand, and maps failures onto stable exit codes.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gridseam/dso.hpp"
#include "gridseam/generate.hpp"

namespace gridseam {

/// Everything a subcommand needs, filled from flags.
struct RunConfig {
  std::string command;
  std::string scenario_path;
  std::string out;     // output directory (generate: output file); empty =
                       // print to stdout, write nothing
  double tol = 1e-5;   // comparison tolerance (compare)
  std::uint64_t seed = 1;
  TraceOptions trace;  // also carries the LP tolerances
  GeneratorParams gen;
};

/// Parses args (program name excluded) and runs one subcommand.
/// Exit codes: 0 success, 1 domain failure (validation, empty bid range,
/// failed audit), 2 usage or I/O, 3 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gridseam
