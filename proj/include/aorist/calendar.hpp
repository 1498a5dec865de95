#pragma once

// Deterministic arithmetic between integer study days, calendar dates,
// days of week, and week indices. Day 1 is the first day of the study
// period; weeks are fixed 7-day blocks anchored at day 1, with any short
// trailing remainder folded into the last full week.

#include <chrono>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace aorist {

struct CalendarDate {
  int year;
  int month;  // 1..12
  int day;    // 1..31

  bool operator==(const CalendarDate&) const = default;
};

inline std::string to_iso(const CalendarDate& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

inline CalendarDate parse_iso_date(const std::string& s) {
  int y = 0, m = 0, d = 0;
  if (std::sscanf(s.c_str(), "%d-%d-%d", &y, &m, &d) != 3)
    throw std::invalid_argument("not an ISO date (YYYY-MM-DD): " + s);
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                                  std::chrono::day{unsigned(d)}};
  if (!ymd.ok()) throw std::invalid_argument("invalid calendar date: " + s);
  return {y, m, d};
}

namespace detail {
inline std::chrono::sys_days to_sys_days(const CalendarDate& d) {
  return std::chrono::sys_days{std::chrono::year_month_day{
      std::chrono::year{d.year}, std::chrono::month{unsigned(d.month)},
      std::chrono::day{unsigned(d.day)}}};
}
inline CalendarDate from_sys_days(std::chrono::sys_days sd) {
  std::chrono::year_month_day ymd{sd};
  return {int(ymd.year()), int(unsigned(ymd.month())), int(unsigned(ymd.day()))};
}
}  // namespace detail

// Study span: start date plus length in days. Week count uses fixed 7-day
// blocks; a trailing remainder shorter than 7 days belongs to the last week,
// so a 731-day span has 104 weeks.
struct CalendarSpan {
  CalendarDate start_date{1970, 1, 1};
  int n_days = 0;  // default-constructed spans are placeholders; assign before use
  int n_weeks = 0;

  CalendarSpan() = default;
  CalendarSpan(CalendarDate start, int days)
      : start_date(start), n_days(days), n_weeks(days >= 7 ? days / 7 : 1) {
    if (days < 1) throw std::domain_error("span must cover at least one day");
  }

  static CalendarSpan from_iso(const std::string& start, int days) {
    return CalendarSpan(parse_iso_date(start), days);
  }
};

inline void check_day(int d, const CalendarSpan& span) {
  if (d < 1 || d > span.n_days)
    throw std::domain_error("study day " + std::to_string(d) + " outside [1, " +
                            std::to_string(span.n_days) + "]");
}

inline CalendarDate day_to_date(int d, const CalendarSpan& span) {
  check_day(d, span);
  return detail::from_sys_days(detail::to_sys_days(span.start_date) + std::chrono::days{d - 1});
}

inline int date_to_day(const CalendarDate& date, const CalendarSpan& span) {
  auto diff = detail::to_sys_days(date) - detail::to_sys_days(span.start_date);
  int d = int(diff.count()) + 1;
  check_day(d, span);
  return d;
}

// ISO weekday of a study day: Monday = 1 ... Sunday = 7.
inline int day_of_week(int d, const CalendarSpan& span) {
  check_day(d, span);
  std::chrono::weekday wd{detail::to_sys_days(span.start_date) + std::chrono::days{d - 1}};
  return int(wd.iso_encoding());
}

// Week index in {1..n_weeks}; ceil(d/7) with the remainder clamped into the
// final week.
inline int week_of(int d, const CalendarSpan& span) {
  check_day(d, span);
  int w = (d + 6) / 7;
  return w > span.n_weeks ? span.n_weeks : w;
}

}  // namespace aorist
