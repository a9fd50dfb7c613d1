#pragma once

#include <string>

#include "wasscert/measures.hpp"

namespace wasscert {

/// Shortest decimal that round-trips to the same double; NaN prints as "".
std::string format_number(double value);

/// Point files: one point per row, d comma-separated columns, no header.
void write_points(const std::string& path, const PointCloud& cloud);
PointCloud read_points(const std::string& path);

}  // namespace wasscert
