#pragma once

// Case-control design construction and the synthetic censoring scenarios:
// dwelling-weighted control sampling, flat case resampling, and the six
// interval-censoring mechanisms (day-of-week- or week-driven).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aorist/calendar.hpp"
#include "aorist/domain.hpp"

namespace aorist {

struct ControlSpec {
  int ratio = 5;  // controls per case
  std::uint64_t seed = 0;
};

// Censoring mechanism for one scenario. Exactly one of dow_probs/week_probs
// is active: scenarios 1-3 censor by the true day of week, 4-6 by the true
// week of the study period.
struct ScenarioSpec {
  int scenario_id = 1;
  long n_cases = 3000;
  // Scale (mean, in days) of the exponential draw u behind the censoring
  // half-width Round(u + 1). At 0.2 nearly all censored windows span 3 days
  // and the rest 5; such short windows keep enough day-of-week information
  // for the latent-date model to undo the complete-cases bias, which is the
  // effect the synthetic scenarios exist to demonstrate.
  double censor_rate_exp_lambda = 0.2;
  std::vector<double> dow_probs;   // 7 entries when active
  std::vector<double> week_probs;  // n_weeks entries when active
  std::uint64_t seed = 0;

  void check() const {
    if (dow_probs.empty() == week_probs.empty())
      throw std::invalid_argument("exactly one of dow_probs/week_probs must be set");
    for (double p : dow_probs.empty() ? week_probs : dow_probs)
      if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("censoring probabilities must lie in [0,1]");
    if (!dow_probs.empty() && dow_probs.size() != 7)
      throw std::invalid_argument("dow_probs needs 7 entries");
    if (!(censor_rate_exp_lambda > 0.0))
      throw std::invalid_argument("exponential scale must be positive");
  }
};

inline bool is_q4_week(int w) { return (w >= 40 && w <= 52) || (w >= 92 && w <= 104); }

// The six censoring mechanisms: 1-3 by day of week, 4-6 by week with higher
// censoring in the fourth quarter of each year.
inline ScenarioSpec make_scenario(int id, long n_cases, std::uint64_t seed, int n_weeks) {
  ScenarioSpec spec;
  spec.scenario_id = id;
  spec.n_cases = n_cases;
  spec.seed = seed;
  switch (id) {
    case 1: spec.dow_probs.assign(7, 0.4); break;
    case 2: spec.dow_probs = {0.3, 0.3, 0.3, 0.3, 0.5, 0.5, 0.5}; break;
    case 3: spec.dow_probs = {0.2, 0.2, 0.2, 0.2, 0.6, 0.6, 0.6}; break;
    case 4: spec.week_probs.assign(std::size_t(n_weeks), 0.4); break;
    case 5:
    case 6:
      spec.week_probs.resize(std::size_t(n_weeks));
      for (int w = 1; w <= n_weeks; ++w)
        spec.week_probs[std::size_t(w - 1)] =
            is_q4_week(w) ? (id == 5 ? 0.5 : 0.6) : (id == 5 ? 0.3 : 0.2);
      break;
    default:
      throw std::invalid_argument("scenario id must be in 1..6");
  }
  return spec;
}

namespace detail {
inline std::mt19937_64 seeded_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq sseq{std::uint32_t(seed), std::uint32_t(seed >> 32),
                     std::uint32_t(stream), std::uint32_t(stream >> 32)};
  return std::mt19937_64(sseq);
}

inline std::string padded_id(const char* prefix, long k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%06ld", prefix, k);
  return buf;
}
}  // namespace detail

// Samples ratio * n_cases control locations with replacement, selection
// probability proportional to the dwelling-unit count, each with an exact
// date uniform over the study span.
inline std::vector<Observation> sample_controls(const DwellingSet& dwellings, long n_cases,
                                                const ControlSpec& spec,
                                                const CalendarSpan& span) {
  if (dwellings.locations.empty()) throw std::domain_error("empty dwelling set");
  if (spec.ratio < 1) throw std::invalid_argument("control ratio must be >= 1");

  std::vector<long> cum;
  cum.reserve(dwellings.locations.size());
  long total = 0;
  for (const auto& loc : dwellings.locations) {
    if (loc.n_units < 1) throw std::domain_error("dwelling location with n_units < 1");
    total += loc.n_units;
    cum.push_back(total);
  }

  auto rng = detail::seeded_rng(spec.seed, 0x636f6e74726f6cULL);
  std::uniform_int_distribution<long> pick_unit(0, total - 1);
  std::uniform_int_distribution<int> pick_day(1, span.n_days);

  std::vector<Observation> controls;
  long n = long(spec.ratio) * n_cases;
  controls.reserve(std::size_t(n));
  for (long k = 0; k < n; ++k) {
    long unit = pick_unit(rng);
    std::size_t idx =
        std::size_t(std::upper_bound(cum.begin(), cum.end(), unit) - cum.begin());
    const auto& loc = dwellings.locations[idx];
    Observation obs;
    obs.id = detail::padded_id("ctrl-", k + 1);
    obs.x = loc.x;
    obs.y_coord = loc.y_coord;
    obs.borough = loc.borough;
    obs.window = exact_window(pick_day(rng));
    obs.label = 0;
    controls.push_back(std::move(obs));
  }
  return controls;
}

// Resamples space-time locations from the controls and relabels them as
// cases, giving a flat intensity over days of week and (population-weighted)
// space.
inline std::vector<Observation> simulate_flat_cases(const std::vector<Observation>& controls,
                                                    long n_cases, std::uint64_t seed) {
  if (controls.empty()) throw std::domain_error("empty control list");
  auto rng = detail::seeded_rng(seed, 0x6361736573ULL);
  std::uniform_int_distribution<std::size_t> pick(0, controls.size() - 1);

  std::vector<Observation> cases;
  cases.reserve(std::size_t(n_cases));
  for (long k = 0; k < n_cases; ++k) {
    const auto& src = controls[pick(rng)];
    Observation obs;
    obs.id = detail::padded_id("case-", k + 1);
    obs.x = src.x;
    obs.y_coord = src.y_coord;
    obs.borough = src.borough;
    obs.window = src.window;  // exact date inherited from the control
    obs.label = 1;
    cases.push_back(std::move(obs));
  }
  return cases;
}

struct CensoredCases {
  std::vector<Observation> cases;
  std::vector<std::pair<std::string, int>> truth;  // id -> true day, censored cases only
};

// Widens a fraction of the case windows. Each case is censored independently
// with the scenario probability at its true date; censored cases get a
// symmetric window of half-width Round(u + 1), where u is exponential with
// mean censor_rate_exp_lambda days, clipped to the study span. True dates of
// censored cases go to the truth sidecar.
inline CensoredCases apply_censoring(const std::vector<Observation>& cases,
                                     const ScenarioSpec& spec, const CalendarSpan& span) {
  spec.check();
  auto rng = detail::seeded_rng(spec.seed, 0x63656e736f72ULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // std::exponential_distribution takes the rate, i.e. 1 / mean
  std::exponential_distribution<double> expo(1.0 / spec.censor_rate_exp_lambda);

  CensoredCases out;
  out.cases.reserve(cases.size());
  for (const auto& src : cases) {
    if (!src.window.exact())
      throw std::domain_error("apply_censoring expects exact cases: " + src.id);
    const int t = src.window.t_from;
    double p = spec.dow_probs.empty()
                   ? spec.week_probs[std::size_t(week_of(t, span) - 1)]
                   : spec.dow_probs[std::size_t(day_of_week(t, span) - 1)];
    Observation obs = src;
    if (unif(rng) < p) {
      double u = expo(rng);
      int h = int(std::round(u + 1.0));  // >= 1, so uncertainty is at least one day
      obs.window.t_from = std::max(1, t - h);
      obs.window.t_to = std::min(span.n_days, t + h);
      out.truth.emplace_back(obs.id, t);
    }
    out.cases.push_back(std::move(obs));
  }
  return out;
}

// Drops every case with a non-exact window; controls and ordering are kept.
inline StudyDesign complete_cases_filter(const StudyDesign& design) {
  StudyDesign out{{}, design.graph, design.span};
  out.observations.reserve(design.observations.size());
  for (const auto& obs : design.observations)
    if (!obs.is_case() || obs.window.exact()) out.observations.push_back(obs);
  return out;
}

// Synthetic stand-in study region: boroughs on a rook-adjacent grid with
// dwelling locations scattered inside them and uneven unit counts. Used in
// place of the (non-public) real dwelling and borough data.
inline std::pair<DwellingSet, BoroughGraph> synth_region(int n_boroughs, long n_locations,
                                                         double mean_units,
                                                         std::uint64_t seed) {
  if (n_boroughs < 2) throw std::invalid_argument("need at least two boroughs");
  if (n_locations < n_boroughs) throw std::invalid_argument("need locations >= boroughs");

  int cols = int(std::ceil(std::sqrt(double(n_boroughs))));
  int rows = (n_boroughs + cols - 1) / cols;
  const double cell = 400.0;  // meters

  std::vector<std::pair<int, int>> edges;
  for (int b = 1; b <= n_boroughs; ++b) {
    int r = (b - 1) / cols, c = (b - 1) % cols;
    if (c + 1 < cols && b + 1 <= n_boroughs) edges.emplace_back(b, b + 1);
    if (r + 1 < rows && b + cols <= n_boroughs) edges.emplace_back(b, b + cols);
  }
  BoroughGraph graph(n_boroughs, edges);

  auto rng = detail::seeded_rng(seed, 0x726567696f6eULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> weight_cum(std::size_t(n_boroughs), 0.0);
  double wsum = 0.0;
  for (int b = 0; b < n_boroughs; ++b) {
    wsum += 0.5 + unif(rng);  // uneven borough sizes
    weight_cum[std::size_t(b)] = wsum;
  }

  std::poisson_distribution<long> extra_units(std::max(0.0, mean_units - 1.0));
  DwellingSet dwellings;
  dwellings.locations.reserve(std::size_t(n_locations));
  // one location per borough first, so no borough is empty
  for (long k = 0; k < n_locations; ++k) {
    int b;
    if (k < n_boroughs) {
      b = int(k) + 1;
    } else {
      double u = unif(rng) * wsum;
      b = int(std::upper_bound(weight_cum.begin(), weight_cum.end(), u) -
              weight_cum.begin()) + 1;
    }
    int r = (b - 1) / cols, c = (b - 1) % cols;
    DwellingLocation loc;
    loc.x = (double(c) + unif(rng)) * cell;
    loc.y_coord = (double(r) + unif(rng)) * cell;
    loc.borough = b;
    loc.n_units = 1 + extra_units(rng);
    dwellings.locations.push_back(loc);
  }
  return {std::move(dwellings), std::move(graph)};
}

}  // namespace aorist
