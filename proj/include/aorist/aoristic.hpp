#pragma once

// Aoristic tabulation: each event spreads unit mass uniformly over the days
// of its censoring window; masses are accumulated by day of week and by week.
// The exact-only variant drops censored events instead, which is the biased
// picture the aoristic one corrects.

#include <cstddef>
#include <map>
#include <vector>

#include "aorist/calendar.hpp"
#include "aorist/domain.hpp"

namespace aorist {

struct AoristicTable {
  std::vector<double> by_dow;   // 7 bins, Monday first
  std::vector<double> by_week;  // n_weeks bins
  long n_events = 0;

  explicit AoristicTable(int n_weeks = 0)
      : by_dow(7, 0.0), by_week(std::size_t(n_weeks), 0.0) {}
};

// Uniform weight 1/width on every candidate day; weights sum to 1.
inline std::map<int, double> aoristic_weights(const CensorWindow& window) {
  std::map<int, double> w;
  const double share = 1.0 / double(window.width());
  for (int d = window.t_from; d <= window.t_to; ++d) w[d] = share;
  return w;
}

namespace detail {
inline void accumulate_window(AoristicTable& table, const CensorWindow& window,
                              const CalendarSpan& span) {
  const double share = 1.0 / double(window.width());
  for (int d = window.t_from; d <= window.t_to; ++d) {
    table.by_dow[std::size_t(day_of_week(d, span) - 1)] += share;
    table.by_week[std::size_t(week_of(d, span) - 1)] += share;
  }
  ++table.n_events;
}
}  // namespace detail

// Accumulates aoristic weights for every observation (or only the cases) into
// day-of-week and week bins. Exact events contribute whole counts.
inline AoristicTable aoristic_aggregate(const StudyDesign& design, bool cases_only) {
  AoristicTable table(design.span.n_weeks);
  for (const auto& obs : design.observations) {
    if (cases_only && !obs.is_case()) continue;
    detail::accumulate_window(table, obs.window, design.span);
  }
  return table;
}

// Same bins, but censored cases are dropped entirely (the complete-cases
// view of the temporal distribution). Controls are excluded: the comparison
// of interest is over events.
inline AoristicTable exact_only_aggregate(const StudyDesign& design) {
  AoristicTable table(design.span.n_weeks);
  for (const auto& obs : design.observations) {
    if (!obs.is_case() || !obs.window.exact()) continue;
    detail::accumulate_window(table, obs.window, design.span);
  }
  return table;
}

}  // namespace aorist
