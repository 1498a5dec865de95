#pragma once

// Shared builders for the unit tests and the acceptance runner: small graphs,
// hand-rolled observations, and full synthetic scenario designs.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "aorist/aoristic.hpp"
#include "aorist/calendar.hpp"
#include "aorist/criticism.hpp"
#include "aorist/domain.hpp"
#include "aorist/model.hpp"
#include "aorist/sampler.hpp"
#include "aorist/studygen.hpp"

namespace th {

inline aorist::CalendarSpan paper_span() {
  return aorist::CalendarSpan::from_iso("2016-01-01", 731);
}

inline aorist::CalendarSpan short_span(int days) {
  return aorist::CalendarSpan::from_iso("2016-01-01", days);
}

inline aorist::BoroughGraph line_graph(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int b = 1; b < n; ++b) edges.emplace_back(b, b + 1);
  return aorist::BoroughGraph(n, edges);
}

inline aorist::Observation obs(std::string id, int borough, int t_from, int t_to,
                               int label) {
  aorist::Observation o;
  o.id = std::move(id);
  o.borough = borough;
  o.window = {t_from, t_to};
  o.label = label;
  return o;
}

struct SimData {
  aorist::StudyDesign design;
  std::vector<std::pair<std::string, int>> truth;  // censored cases only
  long n_cases = 0;
};

// End-to-end synthetic dataset: synthetic region, dwelling-weighted controls,
// flat cases, scenario censoring; observations ordered cases-then-controls.
inline SimData simulate_design(int scenario, long n_cases, long base_cases,
                               std::uint64_t seed, int n_boroughs, long n_locations,
                               const aorist::CalendarSpan& span) {
  auto [dwellings, graph] = aorist::synth_region(n_boroughs, n_locations, 13.34, seed);
  auto controls = aorist::sample_controls(dwellings, base_cases, {5, seed}, span);
  auto cases = aorist::simulate_flat_cases(controls, n_cases, seed);
  auto spec = aorist::make_scenario(scenario, n_cases, seed, span.n_weeks);
  auto censored = aorist::apply_censoring(cases, spec, span);

  SimData out;
  out.n_cases = n_cases;
  out.truth = std::move(censored.truth);
  out.design.span = span;
  out.design.graph = std::move(graph);
  out.design.observations = std::move(censored.cases);
  out.design.observations.insert(out.design.observations.end(), controls.begin(),
                                 controls.end());
  return out;
}

// Simpson-rule posterior mean for the intercept-only logistic model:
// p(a) ∝ N(a; 0, prior_var) * prod_i Bernoulli(y_i | logistic(a)).
inline double alpha_only_quadrature_mean(long n_cases, long n_total, double prior_var,
                                         double lo = -12.0, double hi = 12.0,
                                         int n_grid = 24000) {
  auto log_post = [&](double a) {
    double ll = double(n_cases) * a - double(n_total) * aorist::detail::log1pexp(a);
    return ll - 0.5 * a * a / prior_var;
  };
  // n_grid even; Simpson weights 1,4,2,...,4,1
  double h = (hi - lo) / double(n_grid);
  double max_lp = -1e300;
  std::vector<double> lp(std::size_t(n_grid) + 1);
  for (int k = 0; k <= n_grid; ++k) {
    double a = lo + h * double(k);
    lp[std::size_t(k)] = log_post(a);
    if (lp[std::size_t(k)] > max_lp) max_lp = lp[std::size_t(k)];
  }
  double z = 0.0, za = 0.0;
  for (int k = 0; k <= n_grid; ++k) {
    double w = (k == 0 || k == n_grid) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    double f = w * std::exp(lp[std::size_t(k)] - max_lp);
    double a = lo + h * double(k);
    z += f;
    za += f * a;
  }
  return za / z;
}

// Kolmogorov-Smirnov distance between sorted draws and a CDF evaluated on a
// grid (linear interpolation between grid nodes).
inline double ks_distance_sorted(const std::vector<double>& sorted_draws,
                                 const std::vector<double>& grid_x,
                                 const std::vector<double>& grid_cdf) {
  double ks = 0.0;
  std::size_t g = 0;
  const double n = double(sorted_draws.size());
  for (std::size_t i = 0; i < sorted_draws.size(); ++i) {
    double x = sorted_draws[i];
    while (g + 1 < grid_x.size() && grid_x[g + 1] < x) ++g;
    double cdf;
    if (x <= grid_x.front())
      cdf = 0.0;
    else if (x >= grid_x.back())
      cdf = 1.0;
    else {
      double x0 = grid_x[g], x1 = grid_x[g + 1];
      double frac = (x - x0) / (x1 - x0);
      cdf = grid_cdf[g] + frac * (grid_cdf[g + 1] - grid_cdf[g]);
    }
    double lo = double(i) / n, hi = double(i + 1) / n;
    ks = std::max({ks, std::abs(cdf - lo), std::abs(cdf - hi)});
  }
  return ks;
}

// Grid CDF of an (unnormalized) density via trapezoid accumulation.
template <class Density>
inline std::pair<std::vector<double>, std::vector<double>> grid_cdf(Density&& dens,
                                                                    double lo, double hi,
                                                                    int n_grid) {
  std::vector<double> x(std::size_t(n_grid) + 1), cdf(std::size_t(n_grid) + 1, 0.0);
  double h = (hi - lo) / double(n_grid);
  std::vector<double> f(std::size_t(n_grid) + 1);
  for (int k = 0; k <= n_grid; ++k) {
    x[std::size_t(k)] = lo + h * double(k);
    f[std::size_t(k)] = dens(x[std::size_t(k)]);
  }
  for (int k = 1; k <= n_grid; ++k)
    cdf[std::size_t(k)] =
        cdf[std::size_t(k - 1)] + 0.5 * h * (f[std::size_t(k - 1)] + f[std::size_t(k)]);
  double z = cdf.back();
  for (auto& c : cdf) c /= z;
  return {std::move(x), std::move(cdf)};
}

}  // namespace th
