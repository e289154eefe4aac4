#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "otrank/error.hpp"
#include "otrank/point_cloud.hpp"

namespace otrank {

// Shortest decimal that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Locale-independent strict parse; surrounding blanks are allowed.
inline bool parse_double(std::string_view text, double& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

/// Parses comma-separated rows into a point cloud.
///
/// Blank lines are skipped. Ragged rows, unparsable fields and non-finite
/// values raise ParseError/DataError naming the 1-based row and column
/// (rows counted in the file, header included).
inline PointCloud parse_csv_text(std::string_view text, bool has_header = false) {
  std::vector<double> values;
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t line_no = 0;
  bool header_pending = has_header;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    std::size_t fields = 0;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      const std::string_view field = line.substr(
          start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      ++fields;
      double v = 0.0;
      if (!parse_double(field, v)) {
        throw ParseError("csv: row " + std::to_string(line_no) + ", column " +
                         std::to_string(fields) + ": cannot parse '" + std::string(field) +
                         "'");
      }
      if (!std::isfinite(v)) {
        throw DataError("csv: row " + std::to_string(line_no) + ", column " +
                        std::to_string(fields) + ": non-finite value");
      }
      values.push_back(v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (n == 0) {
      d = fields;
    } else if (fields != d) {
      throw ParseError("csv: row " + std::to_string(line_no) + " has " +
                       std::to_string(fields) + " fields, expected " + std::to_string(d));
    }
    ++n;
  }
  if (n == 0) throw ParseError("csv: no data rows");
  return PointCloud(n, d, std::move(values));
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline PointCloud parse_csv(const std::string& path, bool has_header = false) {
  try {
    return parse_csv_text(read_file(path), has_header);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline std::string to_csv(const PointCloud& cloud) {
  std::string out;
  for (std::size_t i = 0; i < cloud.n(); ++i) {
    for (std::size_t j = 0; j < cloud.d(); ++j) {
      if (j) out += ',';
      out += format_double(cloud(i, j));
    }
    out += '\n';
  }
  return out;
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << contents;
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace otrank
