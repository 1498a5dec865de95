#include <catch2/catch_amalgamated.hpp>

#include "aorist/calendar.hpp"

using namespace aorist;

TEST_CASE("span week count folds a short remainder into the last week") {
  CHECK(CalendarSpan::from_iso("2016-01-01", 731).n_weeks == 104);
  CHECK(CalendarSpan::from_iso("2016-01-01", 728).n_weeks == 104);
  CHECK(CalendarSpan::from_iso("2016-01-01", 7).n_weeks == 1);
  CHECK(CalendarSpan::from_iso("2016-01-01", 6).n_weeks == 1);
  CHECK(CalendarSpan::from_iso("2016-01-01", 1).n_weeks == 1);
  CHECK(CalendarSpan::from_iso("2016-01-01", 14).n_weeks == 2);
  CHECK_THROWS_AS(CalendarSpan::from_iso("2016-01-01", 0), std::domain_error);
}

TEST_CASE("day_to_date anchors day 1 at the span start") {
  auto span = CalendarSpan::from_iso("2016-01-01", 731);
  CHECK(day_to_date(1, span) == CalendarDate{2016, 1, 1});
  CHECK(day_to_date(2, span) == CalendarDate{2016, 1, 2});
  // 2016 is a leap year, so 731 days = 366 + 365 end on the last day of 2017
  CHECK(day_to_date(731, span) == CalendarDate{2017, 12, 31});
  CHECK(day_to_date(60, span) == CalendarDate{2016, 2, 29});
  CHECK_THROWS_AS(day_to_date(0, span), std::domain_error);
  CHECK_THROWS_AS(day_to_date(732, span), std::domain_error);
}

TEST_CASE("day_of_week uses the real calendar, Monday=1") {
  auto span = CalendarSpan::from_iso("2016-01-01", 731);
  CHECK(day_of_week(1, span) == 5);   // 2016-01-01 was a Friday
  CHECK(day_of_week(4, span) == 1);   // 2016-01-04 was a Monday
  CHECK(day_of_week(11, span) == 1);  // periodicity
  CHECK(day_of_week(731, span) == 7); // 2017-12-31 was a Sunday
  CHECK_THROWS_AS(day_of_week(-3, span), std::domain_error);

  // arbitrary start dates work too: 2017-03-01 was a Wednesday
  auto other = CalendarSpan::from_iso("2017-03-01", 30);
  CHECK(day_of_week(1, other) == 3);
}

TEST_CASE("day_of_week has period 7 across the whole span") {
  auto span = CalendarSpan::from_iso("2016-01-01", 731);
  for (int d = 1; d + 7 <= span.n_days; ++d)
    REQUIRE(day_of_week(d, span) == day_of_week(d + 7, span));
}

TEST_CASE("week_of covers 1..n_weeks in 7-day blocks with a clamped tail") {
  auto span = CalendarSpan::from_iso("2016-01-01", 731);
  CHECK(week_of(1, span) == 1);
  CHECK(week_of(7, span) == 1);
  CHECK(week_of(8, span) == 2);
  CHECK(week_of(728, span) == 104);
  CHECK(week_of(729, span) == 104);  // remainder days fold into the last week
  CHECK(week_of(731, span) == 104);
  CHECK_THROWS_AS(week_of(0, span), std::domain_error);
}

TEST_CASE("week_of is non-decreasing with unit steps and hits every week") {
  auto span = CalendarSpan::from_iso("2016-01-01", 731);
  std::vector<bool> seen(std::size_t(span.n_weeks) + 1, false);
  int prev = week_of(1, span);
  seen[std::size_t(prev)] = true;
  for (int d = 2; d <= span.n_days; ++d) {
    int w = week_of(d, span);
    REQUIRE(w >= prev);
    REQUIRE(w - prev <= 1);
    seen[std::size_t(w)] = true;
    prev = w;
  }
  for (int w = 1; w <= span.n_weeks; ++w) REQUIRE(seen[std::size_t(w)]);
}

TEST_CASE("date round-trip holds on every study day") {
  auto span = CalendarSpan::from_iso("2016-01-01", 731);
  for (int d = 1; d <= span.n_days; ++d)
    REQUIRE(date_to_day(day_to_date(d, span), span) == d);
}

TEST_CASE("ISO date parsing and formatting") {
  CHECK(to_iso({2016, 1, 1}) == "2016-01-01");
  CHECK(to_iso({2017, 12, 31}) == "2017-12-31");
  auto d = parse_iso_date("2016-02-29");
  CHECK(d == CalendarDate{2016, 2, 29});
  CHECK_THROWS_AS(parse_iso_date("2017-02-29"), std::invalid_argument);
  CHECK_THROWS_AS(parse_iso_date("2016-13-01"), std::invalid_argument);
  CHECK_THROWS_AS(parse_iso_date("not-a-date"), std::invalid_argument);
}

TEST_CASE("date_to_day rejects dates outside the span") {
  auto span = CalendarSpan::from_iso("2016-01-01", 731);
  CHECK_THROWS_AS(date_to_day({2015, 12, 31}, span), std::domain_error);
  CHECK_THROWS_AS(date_to_day({2018, 1, 1}, span), std::domain_error);
}
