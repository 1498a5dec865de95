#pragma once

// Core data model: observations with censoring windows, borough adjacency,
// dwelling sets, and whole-study designs with an invariant checker.

#include <algorithm>
#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "aorist/calendar.hpp"

namespace aorist {

// Censoring window in study days. Exact events have t_from == t_to.
struct CensorWindow {
  int t_from = 0;
  int t_to = 0;

  bool exact() const { return t_from == t_to; }
  int width() const { return t_to - t_from + 1; }  // candidate day count

  bool operator==(const CensorWindow&) const = default;
};

inline CensorWindow exact_window(int day) { return {day, day}; }

struct Observation {
  std::string id;
  double x = 0.0;
  double y_coord = 0.0;
  int borough = 0;  // 1-based borough index
  CensorWindow window;
  int label = 0;  // 1 = case, 0 = control

  bool is_case() const { return label == 1; }
};

// Undirected borough adjacency. Edges are stored as ordered pairs (a < b);
// neighbor counts define the row-normalized weights 1/N_b.
struct BoroughGraph {
  int n_boroughs = 0;
  std::vector<std::pair<int, int>> edges;  // 1-based, first < second
  std::vector<int> neighbor_counts;        // N_b, index 0 = borough 1
  std::vector<std::vector<int>> neighbors;

  BoroughGraph() = default;

  BoroughGraph(int n, std::vector<std::pair<int, int>> edge_list) : n_boroughs(n) {
    std::set<std::pair<int, int>> dedup;
    for (auto [a, b] : edge_list) {
      if (a > b) std::swap(a, b);
      dedup.emplace(a, b);
    }
    edges.assign(dedup.begin(), dedup.end());
    neighbor_counts.assign(std::size_t(n > 0 ? n : 0), 0);
    neighbors.assign(std::size_t(n > 0 ? n : 0), {});
    for (auto [a, b] : edges) {
      if (a < 1 || b > n || a == b) continue;  // reported by validate()
      neighbor_counts[std::size_t(a - 1)]++;
      neighbor_counts[std::size_t(b - 1)]++;
      neighbors[std::size_t(a - 1)].push_back(b);
      neighbors[std::size_t(b - 1)].push_back(a);
    }
  }
};

struct DwellingLocation {
  double x = 0.0;
  double y_coord = 0.0;
  int borough = 0;
  long n_units = 0;
};

struct DwellingSet {
  std::vector<DwellingLocation> locations;

  long total_units() const {
    long t = 0;
    for (const auto& l : locations) t += l.n_units;
    return t;
  }
};

struct StudyDesign {
  std::vector<Observation> observations;
  BoroughGraph graph;
  CalendarSpan span;
};

struct Violation {
  std::string id;    // observation id, or "graph"/"design" for structural rules
  std::string rule;
  std::string message;
};

// Checks every design invariant and reports each breach; never mutates and
// never throws on bad data.
inline std::vector<Violation> validate(const StudyDesign& design) {
  std::vector<Violation> out;
  const int T = design.span.n_days;
  const int B = design.graph.n_boroughs;

  if (B < 1) out.push_back({"graph", "graph_nonempty", "graph has no boroughs"});
  for (auto [a, b] : design.graph.edges) {
    if (a == b)
      out.push_back({"graph", "no_self_loop",
                     "borough " + std::to_string(a) + " adjacent to itself"});
    if (a < 1 || b < 1 || a > B || b > B)
      out.push_back({"graph", "edge_in_range",
                     "edge (" + std::to_string(a) + "," + std::to_string(b) +
                         ") outside 1.." + std::to_string(B)});
  }
  for (int b = 1; b <= B; ++b) {
    if (design.graph.neighbor_counts[std::size_t(b - 1)] < 1)
      out.push_back({"graph", "no_island",
                     "borough " + std::to_string(b) + " has no neighbors"});
  }

  std::unordered_set<std::string> seen;
  for (const auto& obs : design.observations) {
    if (!seen.insert(obs.id).second)
      out.push_back({obs.id, "unique_id", "duplicate observation id"});
    if (obs.window.t_from > obs.window.t_to)
      out.push_back({obs.id, "window_ordered",
                     "t_from " + std::to_string(obs.window.t_from) + " > t_to " +
                         std::to_string(obs.window.t_to)});
    if (obs.window.t_from < 1 || obs.window.t_to > T)
      out.push_back({obs.id, "window_in_span",
                     "window [" + std::to_string(obs.window.t_from) + "," +
                         std::to_string(obs.window.t_to) + "] outside [1," +
                         std::to_string(T) + "]"});
    if (obs.borough < 1 || obs.borough > B)
      out.push_back({obs.id, "borough_in_range",
                     "borough " + std::to_string(obs.borough) + " outside 1.." +
                         std::to_string(B)});
    if (obs.label != 0 && obs.label != 1)
      out.push_back({obs.id, "label_binary", "label must be 0 or 1"});
    if (obs.label == 0 && !obs.window.exact())
      out.push_back({obs.id, "control_exact", "control must be exact"});
  }
  return out;
}

struct UncertaintySummary {
  long n_exact = 0;
  long n_censored = 0;
  double fraction_exact = 1.0;
};

// Counts over cases only; controls are exact by construction.
inline UncertaintySummary uncertainty_summary(const StudyDesign& design) {
  UncertaintySummary s;
  for (const auto& obs : design.observations) {
    if (!obs.is_case()) continue;
    if (obs.window.exact())
      s.n_exact++;
    else
      s.n_censored++;
  }
  long n_cases = s.n_exact + s.n_censored;
  s.fraction_exact = n_cases > 0 ? double(s.n_exact) / double(n_cases) : 1.0;
  return s;
}

}  // namespace aorist
