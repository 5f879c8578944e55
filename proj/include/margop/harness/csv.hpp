#pragma once

#include <string>
#include <vector>

#include "margop/linalg/matrix.hpp"

namespace margop::harness {

// Shortest round-trip decimal form, '.' separator regardless of locale.
std::string format_double(double v);

// Header plus rows, '\n' line endings.
std::string csv_text(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows);
// Grid rows without a header.
std::string grid_csv_text(const Matrix& grid);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace margop::harness
