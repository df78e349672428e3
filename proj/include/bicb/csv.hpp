#pragma once

// Minimal CSV helpers shared by the traffic, log and report formats.
// Decimal '.', LF line endings, required headers, errors carry line numbers.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "bicb/core.hpp"

namespace bicb::csv {

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

inline double parse_double(std::string_view s, const std::string& context) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ParseError(context + ": bad number '" + std::string(s) + "'");
  return v;
}

inline int parse_int(std::string_view s, const std::string& context) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ParseError(context + ": bad integer '" + std::string(s) + "'");
  return v;
}

/// Shortest-ish round-trippable decimal; deterministic for a given build.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary keeps LF endings
  if (!out) throw Error("cannot write " + path);
  return out;
}

inline void expect_header(std::istream& in, const std::string& expected, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected)
    throw ParseError(path + ": expected header '" + expected + "', got '" + line + "'");
}

}  // namespace bicb::csv
