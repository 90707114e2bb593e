#ifndef QOE_DATASET_IO_HPP
#define QOE_DATASET_IO_HPP

// Dataset and point-set file I/O.
//
// CSV datasets carry a header row naming the columns, one observation per
// row. The binary format is: 8-byte magic "QOEBIN01", then n and d as
// little-endian uint64, then n*d float64 values row-major (little-endian).
// Point CSVs (for the `solve` subcommand) hold one point per row with an
// optional header, detected by attempting to parse the first row as numbers.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qoe/common.hpp"
#include "qoe/qoe.hpp"
#include "qoe/quantile_core.hpp"

namespace qoe {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline bool parse_double(const std::string& token, double& out) {
  const char* begin = token.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  return *end == '\0';
}

inline std::string strip_cr(std::string line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
  return line;
}

inline void put_u64_le(std::ofstream& os, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(bytes), 8);
}

inline std::uint64_t get_u64_le(std::ifstream& is, const std::string& path) {
  unsigned char bytes[8];
  is.read(reinterpret_cast<char*>(bytes), 8);
  if (!is) throw config_error("binary dataset truncated: " + path);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline constexpr char kBinaryMagic[8] = {'Q', 'O', 'E', 'B', 'I', 'N', '0', '1'};

// Reads a CSV dataset: mandatory header row, one observation per row.
inline Dataset read_csv_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(is, line)) throw config_error("empty dataset file: " + path);
  Dataset data;
  data.names = detail::split_csv_line(detail::strip_cr(line));
  const std::size_t d = data.names.size();
  if (d == 0) throw config_error(path + ":1: empty header row");

  std::vector<double> values;
  std::size_t n = 0;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string clean = detail::strip_cr(line);
    if (clean.empty()) continue;
    const auto fields = detail::split_csv_line(clean);
    if (fields.size() != d)
      throw config_error(path + ":" + std::to_string(lineno) + ": expected " +
                         std::to_string(d) + " fields, got " + std::to_string(fields.size()));
    for (std::size_t c = 0; c < d; ++c) {
      double v = 0.0;
      if (!detail::parse_double(fields[c], v))
        throw config_error(path + ":" + std::to_string(lineno) + ": field '" + fields[c] +
                           "' is not a number");
      values.push_back(v);
    }
    ++n;
  }
  if (n == 0) throw config_error(path + ": no data rows");
  data.rows.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c)
      data.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          values[i * d + c];
  data.validate();
  return data;
}

inline void write_csv_dataset(const Dataset& data, const std::string& path) {
  data.validate();
  std::ofstream os(path);
  if (!os) throw config_error("cannot open for writing: " + path);
  const std::size_t d = data.dim();
  for (std::size_t c = 0; c < d; ++c) {
    if (c) os << ',';
    os << (data.names.empty() ? "x" + std::to_string(c) : data.names[c]);
  }
  os << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < data.rows.rows(); ++i) {
    for (Eigen::Index c = 0; c < data.rows.cols(); ++c) {
      if (c) os << ',';
      std::snprintf(buf, sizeof buf, "%.17g", data.rows(i, c));
      os << buf;
    }
    os << '\n';
  }
}

inline Dataset read_binary_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw config_error("cannot open dataset file: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kBinaryMagic, 8) != 0)
    throw config_error(path + ": bad magic (expected QOEBIN01)");
  const std::uint64_t n = detail::get_u64_le(is, path);
  const std::uint64_t d = detail::get_u64_le(is, path);
  if (n == 0 || d == 0) throw config_error(path + ": empty dimensions in header");
  Dataset data;
  data.rows.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  // Row-major on disk; Eigen matrices are column-major, so read row by row.
  std::vector<double> row(d);
  for (std::uint64_t i = 0; i < n; ++i) {
    is.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(d * sizeof(double)));
    if (!is) throw config_error("binary dataset truncated: " + path);
    for (std::uint64_t c = 0; c < d; ++c)
      data.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          row[static_cast<std::size_t>(c)];
  }
  data.validate();
  return data;
}

inline void write_binary_dataset(const Dataset& data, const std::string& path) {
  data.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw config_error("cannot open for writing: " + path);
  os.write(kBinaryMagic, 8);
  detail::put_u64_le(os, data.n());
  detail::put_u64_le(os, data.dim());
  std::vector<double> row(data.dim());
  for (Eigen::Index i = 0; i < data.rows.rows(); ++i) {
    for (Eigen::Index c = 0; c < data.rows.cols(); ++c)
      row[static_cast<std::size_t>(c)] = data.rows(i, c);
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
}

// Dispatch on the file's leading bytes: binary datasets start with the magic,
// anything else is treated as CSV.
inline Dataset read_dataset(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw config_error("cannot open dataset file: " + path);
  char magic[8] = {};
  probe.read(magic, 8);
  probe.close();
  if (std::memcmp(magic, kBinaryMagic, 8) == 0) return read_binary_dataset(path);
  return read_csv_dataset(path);
}

// Point CSV for the solver CLI: one point per row, optional header detected
// by whether the first row parses as numbers.
inline PointSet read_points_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open points file: " + path);
  PointSet out;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  std::size_t d = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string clean = detail::strip_cr(line);
    if (clean.empty()) continue;
    const auto fields = detail::split_csv_line(clean);
    std::vector<double> values(fields.size());
    bool numeric = !fields.empty();
    for (std::size_t c = 0; c < fields.size() && numeric; ++c)
      numeric = detail::parse_double(fields[c], values[c]);
    if (first) {
      first = false;
      if (!numeric) continue;  // header row
      d = fields.size();
    } else if (!numeric) {
      throw config_error(path + ":" + std::to_string(lineno) + ": non-numeric row");
    }
    if (d == 0) d = fields.size();
    if (fields.size() != d)
      throw config_error(path + ":" + std::to_string(lineno) + ": inconsistent width");
    Vec point(static_cast<Eigen::Index>(d));
    for (std::size_t c = 0; c < d; ++c) point(static_cast<Eigen::Index>(c)) = values[c];
    out.points.push_back(std::move(point));
  }
  if (out.points.empty()) throw config_error(path + ": no points");
  out.validate();
  return out;
}

}  // namespace qoe

#endif  // QOE_DATASET_IO_HPP
