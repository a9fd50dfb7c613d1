#include "wasscert/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "wasscert/errors.hpp"

namespace wasscert {

std::string format_number(double value) {
  if (std::isnan(value)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_points(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open point file for writing: " + path);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto x = cloud.point(i);
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (k) out << ',';
      out << format_number(x[k]);
    }
    out << '\n';
  }
}

PointCloud read_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read point file: " + path);
  std::vector<double> coords;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t columns = 0;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      const std::string field = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      double v = 0.0;
      const char* first = field.data();
      while (*first == ' ') ++first;
      const auto res = std::from_chars(first, field.data() + field.size(), v);
      if (res.ec != std::errc() || !std::isfinite(v)) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": not a finite number: '" + field + "'");
      }
      coords.push_back(v);
      ++columns;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (dim == 0) dim = columns;
    if (columns != dim) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) + " columns");
    }
  }
  if (dim == 0) throw ConfigError(path + ": no points");
  return PointCloud(dim, std::move(coords));
}

}  // namespace wasscert
