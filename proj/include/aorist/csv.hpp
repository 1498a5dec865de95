#pragma once

// Plain-CSV readers and writers for the file formats the CLI speaks:
// observations, borough adjacency, dwellings, ground-truth dates. No quoting
// or escaping -- identifiers are plain tokens, everything else is numeric.
// Date columns accept either integer study days or ISO dates; output always
// uses integer days.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aorist/calendar.hpp"
#include "aorist/domain.hpp"

namespace aorist {

struct CsvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

inline void expect_header(const std::string& got, const std::string& want,
                          const std::string& path) {
  if (got != want)
    throw CsvError(path + ": expected header '" + want + "', got '" + got + "'");
}

inline long parse_long(const std::string& s, const std::string& path, std::size_t line) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw CsvError(path + ":" + std::to_string(line) + ": not an integer: '" + s + "'");
  }
}

inline double parse_double(const std::string& s, const std::string& path,
                           std::size_t line) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw CsvError(path + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

// integer study day, or an ISO date resolved against the span
inline int parse_day_field(const std::string& s, const CalendarSpan& span,
                           const std::string& path, std::size_t line) {
  if (s.size() == 10 && s[4] == '-' && s[7] == '-') {
    try {
      return date_to_day(parse_iso_date(s), span);
    } catch (const std::exception& e) {
      throw CsvError(path + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  return int(parse_long(s, path, line));
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path);
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot write " + path);
  return out;
}

inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

}  // namespace detail

inline std::vector<Observation> read_observations(const std::string& path,
                                                  const CalendarSpan& span) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw CsvError(path + ": empty file");
  detail::expect_header(detail::strip_cr(line), "id,x,y,borough,t_from,t_to,y", path);
  std::vector<Observation> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 7)
      throw CsvError(path + ":" + std::to_string(lineno) + ": expected 7 fields, got " +
                     std::to_string(f.size()));
    Observation obs;
    obs.id = f[0];
    obs.x = detail::parse_double(f[1], path, lineno);
    obs.y_coord = detail::parse_double(f[2], path, lineno);
    obs.borough = int(detail::parse_long(f[3], path, lineno));
    obs.window.t_from = detail::parse_day_field(f[4], span, path, lineno);
    obs.window.t_to = detail::parse_day_field(f[5], span, path, lineno);
    obs.label = int(detail::parse_long(f[6], path, lineno));
    out.push_back(std::move(obs));
  }
  return out;
}

inline void write_observations(const std::string& path,
                               const std::vector<Observation>& obs) {
  auto out = detail::open_out(path);
  out << "id,x,y,borough,t_from,t_to,y\n";
  for (const auto& o : obs)
    out << o.id << ',' << detail::fmt_double(o.x) << ',' << detail::fmt_double(o.y_coord)
        << ',' << o.borough << ',' << o.window.t_from << ',' << o.window.t_to << ','
        << o.label << '\n';
}

inline std::vector<std::pair<int, int>> read_adjacency(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw CsvError(path + ": empty file");
  detail::expect_header(detail::strip_cr(line), "borough_a,borough_b", path);
  std::vector<std::pair<int, int>> edges;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 2)
      throw CsvError(path + ":" + std::to_string(lineno) + ": expected 2 fields");
    edges.emplace_back(int(detail::parse_long(f[0], path, lineno)),
                       int(detail::parse_long(f[1], path, lineno)));
  }
  return edges;
}

inline void write_adjacency(const std::string& path, const BoroughGraph& graph) {
  auto out = detail::open_out(path);
  out << "borough_a,borough_b\n";
  for (const auto& [a, b] : graph.edges) out << a << ',' << b << '\n';
}

inline DwellingSet read_dwellings(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw CsvError(path + ": empty file");
  detail::expect_header(detail::strip_cr(line), "x,y,borough,n_units", path);
  DwellingSet set;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 4)
      throw CsvError(path + ":" + std::to_string(lineno) + ": expected 4 fields");
    DwellingLocation loc;
    loc.x = detail::parse_double(f[0], path, lineno);
    loc.y_coord = detail::parse_double(f[1], path, lineno);
    loc.borough = int(detail::parse_long(f[2], path, lineno));
    loc.n_units = detail::parse_long(f[3], path, lineno);
    set.locations.push_back(loc);
  }
  return set;
}

inline void write_dwellings(const std::string& path, const DwellingSet& set) {
  auto out = detail::open_out(path);
  out << "x,y,borough,n_units\n";
  for (const auto& l : set.locations)
    out << detail::fmt_double(l.x) << ',' << detail::fmt_double(l.y_coord) << ','
        << l.borough << ',' << l.n_units << '\n';
}

inline std::vector<std::pair<std::string, int>> read_truth(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw CsvError(path + ": empty file");
  detail::expect_header(detail::strip_cr(line), "id,true_day", path);
  std::vector<std::pair<std::string, int>> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 2)
      throw CsvError(path + ":" + std::to_string(lineno) + ": expected 2 fields");
    out.emplace_back(f[0], int(detail::parse_long(f[1], path, lineno)));
  }
  return out;
}

inline void write_truth(const std::string& path,
                        const std::vector<std::pair<std::string, int>>& truth) {
  auto out = detail::open_out(path);
  out << "id,true_day\n";
  for (const auto& [id, day] : truth) out << id << ',' << day << '\n';
}

}  // namespace aorist
