#pragma once

// Minimal numeric CSV reader/writer. Columns are addressed by header name so
// column order in files is free. Doubles are written in shortest round-trip
// form, so a write/read cycle reproduces values bit for bit.

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "takeover/errors.hpp"

namespace takeover::csv {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) return std::to_string(v);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a named column, or -1.
  int find(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  }

  /// Index of a named column; throws IoError naming the missing column.
  int require(std::string_view name, std::string_view source = "csv") const {
    const int i = find(name);
    if (i < 0) {
      throw IoError(std::string(source) + ": missing required column '" +
                    std::string(name) + "'");
    }
    return i;
  }

  std::vector<double> column(std::string_view name) const {
    const int i = require(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[static_cast<std::size_t>(i)]);
    return out;
  }
};

inline Table parse(std::istream& in, std::string_view source = "csv") {
  Table table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto cells = split(view);
    if (!have_header) {
      for (auto c : cells) {
        if (c.empty()) {
          throw IoError(std::string(source) + ":" + std::to_string(line_no) +
                        ": empty column name in header");
        }
        table.header.emplace_back(c);
      }
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw IoError(std::string(source) + ":" + std::to_string(line_no) +
                    ": expected " + std::to_string(table.header.size()) +
                    " fields, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      double v = 0.0;
      const auto c = cells[i];
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size()) {
        throw IoError(std::string(source) + ":" + std::to_string(line_no) +
                      ": column '" + table.header[i] +
                      "' is not a number: '" + std::string(c) + "'");
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (!have_header) throw IoError(std::string(source) + ": empty file, no header");
  return table;
}

inline Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return parse(in, path);
}

inline void write(std::ostream& out, const std::vector<std::string>& header,
                  const std::vector<std::vector<double>>& rows) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out << ',';
      out << format_double(r[i]);
    }
    out << '\n';
  }
}

inline void write_file(const std::string& path,
                       const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write(out, header, rows);
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace takeover::csv
