#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "aorist/calendar.hpp"
#include "aorist/domain.hpp"
#include "aorist/model.hpp"
#include "aorist/sampler.hpp"
#include "aorist/studygen.hpp"
#include "helpers.hpp"

using namespace aorist;

namespace {

Observation censored_case(const std::string& id, int borough, int from, int to) {
  return th::obs(id, borough, from, to, 1);
}

struct SmallFit {
  StudyDesign design;
  PosteriorSamples samples;
};

// One moderately sized censored-data fit shared by several tests below.
const SmallFit& small_fit() {
  static const SmallFit fit = [] {
    SmallFit f;
    f.design = th::simulate_design(2, 200, 100, 7117, 5, 60, th::paper_span()).design;
    SamplerConfig cfg;
    cfg.n_chains = 2;
    cfg.n_iterations = 3000;
    cfg.n_burnin = 600;
    cfg.thin = 4;
    cfg.seed = 311;
    f.samples = run(f.design, PriorSpec{}, cfg);
    return f;
  }();
  return fit;
}

}  // namespace

TEST_CASE("latent date updates require a censored case") {
  auto span = th::paper_span();
  auto s = ModelState::zeros(span.n_weeks, 2);
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(update_latent_date(th::obs("e", 1, 5, 5, 1), s, span, rng),
                  std::domain_error);
  CHECK_THROWS_AS(update_latent_date(th::obs("c", 1, 5, 9, 0), s, span, rng),
                  std::domain_error);
}

TEST_CASE("a flat model imputes uniformly over the window") {
  auto span = th::paper_span();
  auto s = ModelState::zeros(span.n_weeks, 2);
  s.latent_days = {13};
  auto obs = censored_case("c", 1, 10, 16);
  std::mt19937_64 rng(42);

  const long n = 21000;
  std::map<int, long> counts;
  for (long i = 0; i < n; ++i) counts[update_latent_date(obs, s, span, rng)]++;
  REQUIRE(counts.size() == 7);
  double p = 1.0 / 7.0;
  double se = std::sqrt(p * (1.0 - p) / double(n));
  for (int d = 10; d <= 16; ++d)
    CHECK(double(counts[d]) / double(n) == Catch::Approx(p).margin(3.0 * se));
}

TEST_CASE("imputation weights are proportional to the event probability") {
  // two-day window across a week boundary; the second week carries log 3, so
  // pi(day 8) / pi(day 7) = 1.5 and P(day 8) = 0.75 / 1.25 = 0.6
  auto span = th::short_span(14);
  auto s = ModelState::zeros(span.n_weeks, 1);
  s.epsilon[1] = std::log(3.0);
  s.latent_days = {7};
  auto obs = censored_case("c", 1, 7, 8);
  std::mt19937_64 rng(7);

  const long n = 100000;
  long hits = 0;
  for (long i = 0; i < n; ++i) hits += (update_latent_date(obs, s, span, rng) == 8);
  CHECK(double(hits) / double(n) == Catch::Approx(0.6).margin(0.005));
}

TEST_CASE("a positive Saturday contrast pulls imputations onto Saturdays") {
  auto span = th::paper_span();
  auto s = ModelState::zeros(span.n_weeks, 2);
  s.beta[5] = 2.0;
  s.latent_days = {6};
  auto obs = censored_case("c", 1, 4, 10);  // Monday through Sunday; day 9 is Saturday
  std::mt19937_64 rng(9);

  const long n = 20000;
  std::map<int, long> counts;
  for (long i = 0; i < n; ++i) counts[update_latent_date(obs, s, span, rng)]++;
  for (int d = 4; d <= 10; ++d) {
    if (d == 9) continue;
    CHECK(counts[9] > counts[d]);
  }
  // logistic(2) / (logistic(2) + 6 * 0.5) with logistic(2) ~ 0.8808
  double expect = 0.88079707797788 / (0.88079707797788 + 3.0);
  double se = std::sqrt(expect * (1.0 - expect) / double(n));
  CHECK(double(counts[9]) / double(n) == Catch::Approx(expect).margin(4.0 * se));
}

TEST_CASE("precision draws follow the conjugate gamma laws") {
  // fields chosen so each penalty is a known constant
  StudyDesign d;
  d.span = th::short_span(35);  // 5 weeks
  d.graph = th::line_graph(4);
  PriorSpec priors;

  auto s = ModelState::zeros(5, 4);
  for (int w = 0; w < 5; ++w) s.delta[std::size_t(w)] = 1.0 + double(w);  // linear
  s.epsilon = {0.3, -0.2, 0.5, 0.1, -0.4};                               // ss 0.55
  s.u = {0.5, 0.5, 0.5, 0.5};                                            // constant
  s.v = {0.1, -0.1, 0.2, 0.0};                                           // ss 0.06

  const long n = 100000;
  std::vector<double> t_delta, t_eps, t_u, t_v;
  t_delta.reserve(n);
  t_eps.reserve(n);
  t_u.reserve(n);
  t_v.reserve(n);
  std::mt19937_64 rng(1357);
  auto st = s;
  for (long i = 0; i < n; ++i) {
    update_precisions(st, d, priors, rng);
    t_delta.push_back(st.tau_delta);
    t_eps.push_back(st.tau_epsilon);
    t_u.push_back(st.tau_u);
    t_v.push_back(st.tau_v);
  }

  struct GammaCase {
    std::vector<double>* draws;
    double shape, rate, hi;
  };
  // shapes: prior 1 plus half the penalty rank (3 for the walk on 5 weeks,
  // 5 for iid weeks, 3 for the 4-borough tree, 4 for iid boroughs)
  std::vector<GammaCase> cases = {
      {&t_delta, 2.5, 0.5, 60.0},
      {&t_eps, 3.5, 0.5 + 0.275, 60.0},
      {&t_u, 2.5, 0.01, 2500.0},
      {&t_v, 3.0, 0.01 + 0.03, 700.0},
  };
  for (auto& gc : cases) {
    double mean_expect = gc.shape / gc.rate;
    double sd_expect = std::sqrt(gc.shape) / gc.rate;
    double got = 0.0;
    for (double x : *gc.draws) got += x;
    got /= double(n);
    CHECK(got == Catch::Approx(mean_expect).margin(4.0 * sd_expect / std::sqrt(double(n))));

    std::sort(gc.draws->begin(), gc.draws->end());
    auto [gx, gc_cdf] = th::grid_cdf(
        [&](double t) {
          return t <= 0.0 ? 0.0
                          : std::exp((gc.shape - 1.0) * std::log(t) - gc.rate * t);
        },
        1e-9, gc.hi, 40000);
    CHECK(th::ks_distance_sorted(*gc.draws, gx, gc_cdf) < 0.02);
  }
}

TEST_CASE("precision shapes grow with the long design dimensions") {
  StudyDesign d;
  d.span = th::paper_span();  // 104 weeks
  d.graph = th::line_graph(4);
  auto s = ModelState::zeros(104, 4);
  for (int w = 0; w < 104; ++w) s.delta[std::size_t(w)] = 0.1 + 0.02 * double(w);

  const long n = 60000;
  double sum_d = 0.0, sum_e = 0.0;
  std::mt19937_64 rng(2468);
  auto st = s;
  for (long i = 0; i < n; ++i) {
    update_precisions(st, d, PriorSpec{}, rng);
    sum_d += st.tau_delta;
    sum_e += st.tau_epsilon;
  }
  // linear walk on 104 weeks: Ga(52, 0.5) -> mean 104; flat iid weeks:
  // Ga(53, 0.5) -> mean 106
  CHECK(sum_d / double(n) ==
        Catch::Approx(104.0).margin(4.0 * (std::sqrt(52.0) / 0.5) / std::sqrt(double(n))));
  CHECK(sum_e / double(n) ==
        Catch::Approx(106.0).margin(4.0 * (std::sqrt(53.0) / 0.5) / std::sqrt(double(n))));
}

TEST_CASE("vanishing proposal scales leave every block fixed") {
  StudyDesign d;
  d.span = th::short_span(21);  // 3 weeks
  d.graph = th::line_graph(4);
  std::mt19937_64 mk(4);
  std::uniform_int_distribution<int> day(1, 21), borough(1, 4), lab(0, 1);
  for (int i = 0; i < 30; ++i) {
    int t = day(mk);
    d.observations.push_back(th::obs("o" + std::to_string(i), borough(mk), t, t, lab(mk)));
  }

  auto s = ModelState::zeros(3, 4);
  s.alpha = -0.7;
  s.beta = {0.0, 0.2, -0.1, 0.3, 0.15, 0.4, -0.2};
  s.delta = {0.5, -0.25, -0.25};  // sums to zero exactly
  s.epsilon = {0.125, -0.5, 0.75};
  s.u = {0.5, -0.5, 0.25, -0.25};  // sums to zero exactly
  s.v = {0.375, -0.125, 0.0625, 0.25};

  StepSizes steps;
  steps.fixed_effects = steps.delta = steps.epsilon = steps.u = steps.v = 1e-30;
  std::mt19937_64 rng(17);
  auto before = pack_state(s);
  for (auto block : {FieldBlock::fixed_effects, FieldBlock::delta, FieldBlock::epsilon,
                     FieldBlock::u, FieldBlock::v}) {
    update_field_block(block, s, d, PriorSpec{}, steps, rng);
  }
  auto after = pack_state(s);
  for (std::size_t p = 0; p < before.size(); ++p)
    CHECK(std::abs(after[p] - before[p]) <= 1e-12);
}

TEST_CASE("nonzero proposal scales actually move the chain") {
  StudyDesign d;
  d.span = th::short_span(21);
  d.graph = th::line_graph(3);
  for (int i = 0; i < 10; ++i)
    d.observations.push_back(th::obs("o" + std::to_string(i), 1 + i % 3, 1 + i * 2,
                                     1 + i * 2, i % 2));
  auto s = ModelState::zeros(3, 3);
  std::mt19937_64 rng(5);
  auto before = pack_state(s);
  for (int rep = 0; rep < 20; ++rep)
    update_field_block(FieldBlock::fixed_effects, s, d, PriorSpec{}, StepSizes{}, rng);
  CHECK(pack_state(s) != before);
}

TEST_CASE("kept draws store recentred week and borough fields") {
  const auto& fit = small_fit();
  REQUIRE(!fit.samples.draws.empty());
  for (const auto& draw : fit.samples.draws) {
    double sd = 0.0, su = 0.0;
    for (double x : draw.delta) sd += x;
    for (double x : draw.u) su += x;
    CHECK(std::abs(sd) <= 1e-10);
    CHECK(std::abs(su) <= 1e-10);
  }
}

TEST_CASE("latent dates stay inside their windows in every draw") {
  const auto& fit = small_fit();
  REQUIRE(!fit.samples.censored_ids.empty());
  REQUIRE(fit.samples.censored_windows.size() == fit.samples.censored_ids.size());
  for (const auto& draw : fit.samples.draws) {
    REQUIRE(draw.latent_days.size() == fit.samples.censored_ids.size());
    for (std::size_t k = 0; k < draw.latent_days.size(); ++k) {
      const auto& w = fit.samples.censored_windows[k];
      REQUIRE(draw.latent_days[k] >= w.t_from);
      REQUIRE(draw.latent_days[k] <= w.t_to);
    }
  }
}

TEST_CASE("imputation posteriors are proper distributions on the window") {
  const auto& fit = small_fit();
  auto all = all_imputation_posteriors(fit.samples);
  REQUIRE(all.size() == fit.samples.censored_ids.size());
  for (std::size_t k = 0; k < all.size(); ++k) {
    double total = 0.0;
    const auto& w = fit.samples.censored_windows[k];
    for (const auto& [day, p] : all[k]) {
      REQUIRE(day >= w.t_from);
      REQUIRE(day <= w.t_to);
      REQUIRE(p > 0.0);
      total += p;
    }
    CHECK(total == Catch::Approx(1.0).margin(1e-12));
  }
  // the one-id accessor agrees with the batch pass
  auto one = imputation_posterior(fit.samples, fit.samples.censored_ids.front());
  CHECK(one == all.front());
  CHECK_THROWS_AS(imputation_posterior(fit.samples, "nobody"), std::domain_error);
}

TEST_CASE("argmax imputation picks the most probable day, earliest on ties") {
  CHECK(argmax_day({{5, 0.3}, {6, 0.3}, {7, 0.4}}) == 7);
  CHECK(argmax_day({{5, 0.5}, {9, 0.5}}) == 5);
  CHECK(argmax_day({{11, 1.0}}) == 11);
  CHECK_THROWS_AS(argmax_day({}), std::domain_error);
}

TEST_CASE("runs are reproducible and seed-sensitive") {
  auto design = th::simulate_design(1, 40, 10, 88, 3, 20, th::short_span(56)).design;
  SamplerConfig cfg;
  cfg.n_chains = 2;
  cfg.n_iterations = 400;
  cfg.n_burnin = 100;
  cfg.thin = 3;
  cfg.seed = 5;

  auto a = run(design, PriorSpec{}, cfg);
  auto b = run(design, PriorSpec{}, cfg);
  REQUIRE(a.draws.size() == b.draws.size());
  for (std::size_t i = 0; i < a.draws.size(); ++i) {
    REQUIRE(pack_state(a.draws[i]) == pack_state(b.draws[i]));
    REQUIRE(a.draws[i].latent_days == b.draws[i].latent_days);
  }

  cfg.seed = 6;
  auto c = run(design, PriorSpec{}, cfg);
  bool differs = false;
  for (std::size_t i = 0; i < a.draws.size() && !differs; ++i)
    differs = pack_state(a.draws[i]) != pack_state(c.draws[i]);
  CHECK(differs);
}

TEST_CASE("chains in one run use distinct deterministic streams") {
  auto r1 = detail::chain_rng(5, 0);
  auto r2 = detail::chain_rng(5, 0);
  CHECK(r1() == r2());
  CHECK(detail::chain_rng(5, 0)() != detail::chain_rng(5, 1)());
  CHECK(detail::chain_rng(5, 0)() != detail::chain_rng(6, 0)());
}

TEST_CASE("a design with no censored cases fits identically to its filtered copy") {
  // censoring off: scenario probabilities only apply to cases, so build a
  // design whose cases all carry exact dates
  auto span = th::short_span(56);
  auto [dwellings, graph] = synth_region(3, 20, 8.0, 91);
  auto controls = sample_controls(dwellings, 30, {5, 91}, span);
  auto cases = simulate_flat_cases(controls, 30, 91);
  StudyDesign d;
  d.span = span;
  d.graph = graph;
  d.observations = cases;
  d.observations.insert(d.observations.end(), controls.begin(), controls.end());
  REQUIRE(validate(d).empty());

  auto filtered = complete_cases_filter(d);
  REQUIRE(filtered.observations.size() == d.observations.size());

  SamplerConfig cfg;
  cfg.n_chains = 2;
  cfg.n_iterations = 300;
  cfg.n_burnin = 50;
  cfg.thin = 2;
  cfg.seed = 14;
  auto full = run(d, PriorSpec{}, cfg);
  auto cc = run(filtered, PriorSpec{}, cfg);
  REQUIRE(full.draws.size() == cc.draws.size());
  for (std::size_t i = 0; i < full.draws.size(); ++i)
    REQUIRE(pack_state(full.draws[i]) == pack_state(cc.draws[i]));
  CHECK(full.censored_ids.empty());
}

TEST_CASE("short and long runs agree within Monte Carlo error") {
  const auto& fit = small_fit();

  SamplerConfig longer;
  longer.n_chains = 2;
  longer.n_iterations = 15000;
  longer.n_burnin = 3000;
  longer.thin = 10;
  longer.seed = 1222;
  auto ref = run(fit.design, PriorSpec{}, longer);

  for (std::size_t coord : {std::size_t(0), std::size_t(5)}) {  // alpha, beta_Sat
    auto a = diagnose_series(coord_series(fit.samples, coord));
    auto b = diagnose_series(coord_series(ref, coord));
    double mcse_a = a.sd / std::sqrt(a.ess);
    double mcse_b = b.sd / std::sqrt(b.ess);
    CHECK(std::abs(a.mean - b.mean) <= 3.0 * std::hypot(mcse_a, mcse_b) + 1e-12);
  }
}

TEST_CASE("intercept-only posterior matches deterministic quadrature") {
  // every observation shares one Monday in borough 1, so only alpha has a
  // likelihood; all other blocks are frozen
  auto span = th::paper_span();
  StudyDesign d;
  d.span = span;
  d.graph = BoroughGraph(2, {{1, 2}});
  const long n_total = 200, n_cases = 60;
  for (long i = 0; i < n_total; ++i)
    d.observations.push_back(
        th::obs("o" + std::to_string(i), 1, 4, 4, i < n_cases ? 1 : 0));

  SamplerConfig cfg;
  cfg.n_chains = 2;
  cfg.n_iterations = 20000;
  cfg.n_burnin = 2000;
  cfg.thin = 10;
  cfg.seed = 404;
  cfg.blocks.latent = false;
  cfg.blocks.delta = false;
  cfg.blocks.epsilon = false;
  cfg.blocks.u = false;
  cfg.blocks.v = false;
  cfg.blocks.precisions = false;
  auto samples = run(d, PriorSpec{}, cfg);

  auto alpha = diagnose_series(coord_series(samples, 0));
  double truth = th::alpha_only_quadrature_mean(n_cases, n_total, 1000.0);
  double mcse = alpha.sd / std::sqrt(alpha.ess);
  INFO("alpha mean " << alpha.mean << " truth " << truth << " mcse " << mcse);
  CHECK(std::abs(alpha.mean - truth) <= 3.0 * mcse);

  // frozen blocks never move off their initial values
  for (const auto& draw : samples.draws) {
    CHECK(draw.delta[0] == 0.0);
    CHECK(draw.u[0] == 0.0);
    CHECK(draw.tau_delta == 2.0);  // prior mean: shape 1 over rate 0.5
  }
}

TEST_CASE("the default initial state matches the design") {
  StudyDesign d;
  d.span = th::short_span(28);
  d.graph = th::line_graph(3);
  d.observations = {
      th::obs("c1", 1, 3, 3, 1),
      censored_case("c2", 2, 5, 9),
      th::obs("e1", 3, 8, 8, 0),
      th::obs("e2", 1, 20, 20, 0),
  };
  auto s = initial_state(d, PriorSpec{});
  CHECK(s.alpha == Catch::Approx(0.0).margin(1e-12));  // case fraction 1/2
  REQUIRE(s.latent_days.size() == 1);
  CHECK(s.latent_days[0] == 7);  // midpoint of [5, 9]
  CHECK(s.tau_delta == Catch::Approx(2.0));
  CHECK(s.tau_epsilon == Catch::Approx(2.0));
  CHECK(s.tau_u == Catch::Approx(100.0));
  CHECK(s.tau_v == Catch::Approx(100.0));
  for (double x : s.delta) CHECK(x == 0.0);
}

TEST_CASE("sampler configuration is validated") {
  SamplerConfig cfg;
  cfg.n_chains = 0;
  CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
  cfg = {};
  cfg.n_burnin = cfg.n_iterations;
  CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
  cfg = {};
  cfg.thin = 0;
  CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
  cfg = {};
  cfg.adapt_target = 1.0;
  CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
  cfg = {};
  cfg.steps.delta = 0.0;
  CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
}

TEST_CASE("run refuses invalid designs and inconsistent overrides") {
  StudyDesign d;
  d.span = th::short_span(28);
  d.graph = th::line_graph(2);
  d.observations = {th::obs("dup", 1, 3, 3, 1), th::obs("dup", 2, 4, 4, 0)};
  SamplerConfig cfg;
  cfg.n_chains = 1;
  cfg.n_iterations = 10;
  cfg.n_burnin = 2;
  cfg.thin = 1;
  CHECK_THROWS_WITH(run(d, PriorSpec{}, cfg),
                    Catch::Matchers::ContainsSubstring("unique_id"));

  StudyDesign ok;
  ok.span = th::short_span(28);
  ok.graph = th::line_graph(2);
  ok.observations = {censored_case("c", 1, 5, 9), th::obs("e", 2, 4, 4, 0)};
  auto bad_init = ModelState::zeros(ok.span.n_weeks, 2);
  bad_init.latent_days = {20};  // outside the only window
  cfg.init_override = bad_init;
  CHECK_THROWS_AS(run(ok, PriorSpec{}, cfg), std::domain_error);
}
