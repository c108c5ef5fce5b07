#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mqrlr/common.hpp"

namespace mqrlr {

// Shortest exact decimal form: parses back to the identical double, and the
// same double always prints the same bytes (file-level determinism).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline double parse_double(const std::string& field, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || *end != '\0')
    throw DataError("could not parse number '" + field + "' in " + context);
  return v;
}

}  // namespace detail

struct SeriesFile {
  std::vector<double> values;
  std::vector<std::string> timestamps;  // empty when the column is absent
};

// Reads a series CSV: header row, required column `value`, optional column
// `timestamp` (ISO-8601). Extra columns are ignored. Rows are chronological.
inline SeriesFile read_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file '" + path + "'");

  std::string line;
  if (!std::getline(in, line))
    throw DataError("input file '" + path + "' is empty");
  const auto header = detail::split_csv_line(line);

  int value_col = -1, ts_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "value") value_col = static_cast<int>(i);
    if (header[i] == "timestamp") ts_col = static_cast<int>(i);
  }
  if (value_col < 0)
    throw DataError("input file '" + path + "' has no 'value' column");

  SeriesFile out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() <= static_cast<std::size_t>(value_col))
      throw DataError("row " + std::to_string(lineno) + " of '" + path + "' is too short");
    out.values.push_back(detail::parse_double(
        fields[value_col], "'" + path + "' line " + std::to_string(lineno)));
    if (ts_col >= 0) {
      if (fields.size() <= static_cast<std::size_t>(ts_col))
        throw DataError("row " + std::to_string(lineno) + " of '" + path + "' is too short");
      out.timestamps.push_back(fields[ts_col]);
    }
  }
  if (out.values.empty())
    throw DataError("input file '" + path + "' has no data rows");
  return out;
}

inline void write_series_csv(const std::string& path, const std::vector<double>& values,
                             const std::vector<std::string>& timestamps = {}) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file '" + path + "'");
  const bool with_ts = !timestamps.empty();
  if (with_ts && timestamps.size() != values.size())
    throw DataError("timestamp/value length mismatch writing '" + path + "'");
  out << (with_ts ? "timestamp,value\n" : "value\n");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (with_ts) out << timestamps[i] << ',';
    out << format_double(values[i]) << '\n';
  }
}

}  // namespace mqrlr
