#include "nsamc/csv.hpp"

#include <cstdio>

namespace nsamc::csv {

std::string format(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

void write_header(std::ostream& out, const std::vector<std::string>& columns) {
  out << "# columns: ";
  write_row(out, columns);
  write_row(out, columns);
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out << ',';
    out << cells[i];
  }
  out << '\n';
}

}  // namespace nsamc::csv
