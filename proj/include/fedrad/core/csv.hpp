#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fedrad/core/error.hpp"

namespace fedrad::csv {

// Shortest decimal text that parses back to the identical double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorCode::Format,
          "not a number: '" + std::string(s) + "'");
  return v;
}

// Fields never contain commas or quotes in this project, so splitting is plain.
inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    fail(ErrorCode::Format, "missing CSV column '" + std::string(name) + "'");
  }
};

inline Table read(const std::filesystem::path& p) {
  std::ifstream is(p);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot open " + p.string());
  Table t;
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorCode::Format, p.string() + ": empty CSV");
  t.header = split_line(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto row = split_line(line);
    require(row.size() == t.header.size(), ErrorCode::Format,
            p.string() + ": row has " + std::to_string(row.size()) + " fields, header has " +
                std::to_string(t.header.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void write_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) os << ',';
    os << fields[i];
  }
  os << '\n';
}

inline std::ofstream open(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::trunc);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot open for writing: " + p.string());
  return os;
}

}  // namespace fedrad::csv
