#pragma once

// Samples and records files.
//
//   samples:  gm,sm,cc,mbw,l2c,m,n,k,label      (label is -1 or 1)
//   records:  m,n,k,p_nn,p_nt,p_tnn,t_nt,t_tnn
//
// Floating-point fields are written in shortest round-trip form.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <stdexcept>
#include <system_error>
#include <vector>

#include "mtnn/bench.hpp"
#include "mtnn/errors.hpp"

namespace mtnn {

inline constexpr std::string_view kSamplesHeader = "gm,sm,cc,mbw,l2c,m,n,k,label";
inline constexpr std::string_view kRecordsHeader = "m,n,k,p_nn,p_nt,p_tnn,t_nt,t_tnn";

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                      : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view field, std::size_t line, std::size_t column) {
  field = trim(field);
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size() || field.empty()) {
    throw ParseError("expected a number, got '" + std::string(field) + "'", line, column);
  }
  return v;
}

inline std::size_t parse_extent(std::string_view field, std::size_t line, std::size_t column) {
  field = trim(field);
  std::size_t v = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size() || field.empty() || v == 0) {
    throw ParseError("expected a positive integer, got '" + std::string(field) + "'", line, column);
  }
  return v;
}

// Reads non-blank lines, checks the header, hands each data row to `row`.
template <typename Row>
void read_csv(std::istream& in, std::string_view header, std::size_t columns, Row&& row) {
  std::string line;
  std::size_t lineno = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty()) continue;
    if (!seen_header) {
      if (text != header) {
        throw ParseError("expected header '" + std::string(header) + "'", lineno, 1);
      }
      seen_header = true;
      continue;
    }
    const auto fields = split_fields(text);
    if (fields.size() != columns) {
      throw ParseError("expected " + std::to_string(columns) + " fields, found " +
                           std::to_string(fields.size()),
                       lineno);
    }
    row(fields, lineno);
  }
  if (!seen_header) throw ParseError("missing header '" + std::string(header) + "'", 1);
}

}  // namespace detail

inline void write_samples(std::ostream& out, const std::vector<Sample>& samples) {
  out << kSamplesHeader << '\n';
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) out << format_double(s.features[i]) << ',';
    out << (s.label > 0 ? "1" : "-1") << '\n';
  }
}

inline std::vector<Sample> read_samples(std::istream& in) {
  std::vector<Sample> out;
  detail::read_csv(in, kSamplesHeader, kFeatureCount + 1, [&](const auto& f, std::size_t line) {
    Sample s;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      s.features[i] = detail::parse_double(f[i], line, i + 1);
      if (!std::isfinite(s.features[i])) throw ParseError("non-finite feature", line, i + 1);
    }
    const auto label = detail::trim(f[kFeatureCount]);
    if (label == "1" || label == "+1") {
      s.label = 1;
    } else if (label == "-1") {
      s.label = -1;
    } else {
      throw ParseError("label must be -1 or 1, got '" + std::string(label) + "'", line,
                       kFeatureCount + 1);
    }
    out.push_back(s);
  });
  return out;
}

inline void write_records(std::ostream& out, const std::vector<BenchRecord>& records) {
  out << kRecordsHeader << '\n';
  for (const auto& r : records) {
    out << r.shape.m << ',' << r.shape.n << ',' << r.shape.k << ',' << format_double(r.p_nn) << ','
        << format_double(r.p_nt) << ',' << format_double(r.p_tnn) << ',' << format_double(r.t_nt)
        << ',' << format_double(r.t_tnn) << '\n';
  }
}

inline std::vector<BenchRecord> read_records(std::istream& in) {
  std::vector<BenchRecord> out;
  detail::read_csv(in, kRecordsHeader, 8, [&](const auto& f, std::size_t line) {
    BenchRecord r;
    r.shape = {detail::parse_extent(f[0], line, 1), detail::parse_extent(f[1], line, 2),
               detail::parse_extent(f[2], line, 3)};
    double* values[] = {&r.p_nn, &r.p_nt, &r.p_tnn, &r.t_nt, &r.t_tnn};
    for (std::size_t i = 0; i < 5; ++i) {
      *values[i] = detail::parse_double(f[3 + i], line, 4 + i);
      if (!(*values[i] > 0.0) || !std::isfinite(*values[i])) {
        throw ParseError("performance values must be positive and finite", line, 4 + i);
      }
    }
    out.push_back(r);
  });
  return out;
}

template <typename T, typename Reader>
std::vector<T> read_file(const std::string& path, Reader&& reader) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return reader(in);
}

inline std::vector<Sample> load_samples(const std::string& path) {
  return read_file<Sample>(path, [](std::istream& in) { return read_samples(in); });
}

inline std::vector<BenchRecord> load_records(const std::string& path) {
  return read_file<BenchRecord>(path, [](std::istream& in) { return read_records(in); });
}

template <typename Writer>
void write_file(const std::string& path, Writer&& writer) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  writer(out);
  out.flush();
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace mtnn
