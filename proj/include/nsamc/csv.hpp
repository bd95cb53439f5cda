#pragma once

#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace nsamc::csv {

/// Round-trip-exact decimal rendering (%.17g).
std::string format(double value);

/// Writes "# columns: a,b,c" followed by the plain header row.
void write_header(std::ostream& out, const std::vector<std::string>& columns);

/// Joins already-formatted cells with commas and ends the line.
void write_row(std::ostream& out, const std::vector<std::string>& cells);

}  // namespace nsamc::csv
