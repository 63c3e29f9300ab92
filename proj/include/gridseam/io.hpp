// Small I/O helpers shared by the exporters and the CLI.
#pragma once

#include <string>

namespace gridseam {

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

/// Writes via a temp file in the same directory, then renames into place.
void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace gridseam
