// aorist: case-control spatio-temporal logistic regression with
// interval-censored event dates.
//
// Subcommands: simulate, fit, aoristic, criticize, impute-eval, compare.
// Exit codes: 0 success, 1 usage, 2 data validation, 3 runtime failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "aorist/aoristic.hpp"
#include "aorist/calendar.hpp"
#include "aorist/config.hpp"
#include "aorist/criticism.hpp"
#include "aorist/csv.hpp"
#include "aorist/domain.hpp"
#include "aorist/manifest.hpp"
#include "aorist/model.hpp"
#include "aorist/sampler.hpp"
#include "aorist/studygen.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double x) { return aorist::detail::fmt_double(x); }

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

// ---- shared option groups ---------------------------------------------------

struct SpanOpts {
  std::string start_date = "2016-01-01";
  int n_days = 731;

  void attach(CLI::App* cmd) {
    cmd->add_option("--start-date", start_date, "first study day (ISO date)")
        ->capture_default_str();
    cmd->add_option("--n-days", n_days, "study length in days")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  }

  aorist::CalendarSpan make() const {
    return aorist::CalendarSpan::from_iso(start_date, n_days);
  }
};

struct SamplerOpts {
  std::string config_path;
  std::optional<long> chains, iterations, burnin, thin;
  std::optional<std::uint64_t> seed;
  std::optional<double> adapt_target;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value run configuration file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--chains", chains, "number of MCMC chains");
    cmd->add_option("--iterations", iterations, "iterations per chain");
    cmd->add_option("--burnin", burnin, "burn-in iterations");
    cmd->add_option("--thin", thin, "thinning interval");
    cmd->add_option("--seed", seed, "RNG seed");
    cmd->add_option("--adapt-target", adapt_target, "proposal acceptance target");
  }

  // defaults <- config file <- explicit flags
  std::pair<aorist::SamplerConfig, aorist::PriorSpec> resolve() const {
    aorist::SamplerConfig cfg;
    aorist::PriorSpec priors;
    if (!config_path.empty()) {
      auto cm = aorist::parse_config(config_path);
      static const std::set<std::string> known = {
          "chains",          "iterations",          "burnin",
          "thin",            "seed",                "adapt_target",
          "step_fixed_effects", "step_delta",       "step_epsilon",
          "step_u",          "step_v",              "fixed_effect_variance",
          "gamma_delta_shape", "gamma_delta_rate",  "gamma_epsilon_shape",
          "gamma_epsilon_rate", "gamma_u_shape",    "gamma_u_rate",
          "gamma_v_shape",   "gamma_v_rate"};
      for (const auto& [k, v] : cm)
        if (!known.count(k)) throw aorist::ConfigError("unknown config key: " + k);
      cfg.n_chains = int(aorist::config_long(cm, "chains", cfg.n_chains));
      cfg.n_iterations = aorist::config_long(cm, "iterations", cfg.n_iterations);
      cfg.n_burnin = aorist::config_long(cm, "burnin", cfg.n_burnin);
      cfg.thin = int(aorist::config_long(cm, "thin", cfg.thin));
      cfg.seed = std::uint64_t(aorist::config_long(cm, "seed", long(cfg.seed)));
      cfg.adapt_target = aorist::config_double(cm, "adapt_target", cfg.adapt_target);
      cfg.steps.fixed_effects =
          aorist::config_double(cm, "step_fixed_effects", cfg.steps.fixed_effects);
      cfg.steps.delta = aorist::config_double(cm, "step_delta", cfg.steps.delta);
      cfg.steps.epsilon = aorist::config_double(cm, "step_epsilon", cfg.steps.epsilon);
      cfg.steps.u = aorist::config_double(cm, "step_u", cfg.steps.u);
      cfg.steps.v = aorist::config_double(cm, "step_v", cfg.steps.v);
      priors.fixed_effect_variance = aorist::config_double(
          cm, "fixed_effect_variance", priors.fixed_effect_variance);
      priors.gamma_delta_shape =
          aorist::config_double(cm, "gamma_delta_shape", priors.gamma_delta_shape);
      priors.gamma_delta_rate =
          aorist::config_double(cm, "gamma_delta_rate", priors.gamma_delta_rate);
      priors.gamma_epsilon_shape =
          aorist::config_double(cm, "gamma_epsilon_shape", priors.gamma_epsilon_shape);
      priors.gamma_epsilon_rate =
          aorist::config_double(cm, "gamma_epsilon_rate", priors.gamma_epsilon_rate);
      priors.gamma_u_shape = aorist::config_double(cm, "gamma_u_shape", priors.gamma_u_shape);
      priors.gamma_u_rate = aorist::config_double(cm, "gamma_u_rate", priors.gamma_u_rate);
      priors.gamma_v_shape = aorist::config_double(cm, "gamma_v_shape", priors.gamma_v_shape);
      priors.gamma_v_rate = aorist::config_double(cm, "gamma_v_rate", priors.gamma_v_rate);
    }
    if (chains) cfg.n_chains = int(*chains);
    if (iterations) cfg.n_iterations = *iterations;
    if (burnin) cfg.n_burnin = *burnin;
    if (thin) cfg.thin = int(*thin);
    if (seed) cfg.seed = *seed;
    if (adapt_target) cfg.adapt_target = *adapt_target;
    cfg.check();
    priors.check();
    return {cfg, priors};
  }

  ordered_json echo(const aorist::SamplerConfig& cfg, const aorist::PriorSpec& priors) const {
    ordered_json j;
    j["chains"] = cfg.n_chains;
    j["iterations"] = cfg.n_iterations;
    j["burnin"] = cfg.n_burnin;
    j["thin"] = cfg.thin;
    j["seed"] = cfg.seed;
    j["adapt_target"] = cfg.adapt_target;
    j["steps"] = {{"fixed_effects", cfg.steps.fixed_effects},
                  {"delta", cfg.steps.delta},
                  {"epsilon", cfg.steps.epsilon},
                  {"u", cfg.steps.u},
                  {"v", cfg.steps.v}};
    j["priors"] = {{"fixed_effect_variance", priors.fixed_effect_variance},
                   {"gamma_delta", {priors.gamma_delta_shape, priors.gamma_delta_rate}},
                   {"gamma_epsilon", {priors.gamma_epsilon_shape, priors.gamma_epsilon_rate}},
                   {"gamma_u", {priors.gamma_u_shape, priors.gamma_u_rate}},
                   {"gamma_v", {priors.gamma_v_shape, priors.gamma_v_rate}}};
    return j;
  }
};

// ---- design loading ----------------------------------------------------------

aorist::StudyDesign load_design(const std::string& obs_path, const std::string& adj_path,
                                const aorist::CalendarSpan& span) {
  auto obs = aorist::read_observations(obs_path, span);
  auto edges = aorist::read_adjacency(adj_path);
  int n_boroughs = 0;
  for (const auto& [a, b] : edges) n_boroughs = std::max({n_boroughs, a, b});
  for (const auto& o : obs) n_boroughs = std::max(n_boroughs, o.borough);
  aorist::StudyDesign design{std::move(obs), aorist::BoroughGraph(n_boroughs, edges), span};
  auto violations = aorist::validate(design);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << violations.size() << " violation(s) in " << obs_path << " / " << adj_path;
    std::size_t show = std::min<std::size_t>(violations.size(), 10);
    for (std::size_t i = 0; i < show; ++i)
      msg << "\n  [" << violations[i].rule << "] " << violations[i].id << ": "
          << violations[i].message;
    if (violations.size() > show) msg << "\n  ...";
    throw ValidationFailure(msg.str());
  }
  return design;
}

ordered_json span_echo(const aorist::CalendarSpan& span) {
  return {{"start_date", aorist::to_iso(span.start_date)},
          {"n_days", span.n_days},
          {"n_weeks", span.n_weeks}};
}

// ---- fit output files --------------------------------------------------------

void write_summary_csv(const std::string& path,
                       const std::vector<aorist::ParamSummary>& summaries) {
  auto out = aorist::detail::open_out(path);
  out << "param,mean,sd,q025,q975,rhat,ess\n";
  for (const auto& s : summaries)
    out << s.name << ',' << fmt(s.mean) << ',' << fmt(s.sd) << ',' << fmt(s.q025) << ','
        << fmt(s.q975) << ',' << fmt(s.rhat) << ',' << fmt(s.ess) << '\n';
}

void write_draws_csv(const std::string& path, const aorist::PosteriorSamples& samples) {
  auto out = aorist::detail::open_out(path);
  auto names = aorist::param_names(samples.n_weeks, samples.n_boroughs);
  out << "chain,draw";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (int c = 0; c < samples.n_chains; ++c)
    for (long k = 0; k < samples.kept_per_chain; ++k) {
      const auto& s = samples.draw(c, k);
      out << (c + 1) << ',' << (k + 1);
      for (std::size_t p = 0; p < names.size(); ++p)
        out << ',' << fmt(aorist::state_coord(s, p));
      out << '\n';
    }
}

void write_latent_csv(const std::string& path, const aorist::PosteriorSamples& samples) {
  auto out = aorist::detail::open_out(path);
  out << "chain,draw";
  for (const auto& id : samples.censored_ids) out << ',' << id;
  out << '\n';
  for (int c = 0; c < samples.n_chains; ++c)
    for (long k = 0; k < samples.kept_per_chain; ++k) {
      const auto& s = samples.draw(c, k);
      out << (c + 1) << ',' << (k + 1);
      for (int d : s.latent_days) out << ',' << d;
      out << '\n';
    }
}

void write_imputation_csv(const std::string& path,
                          const aorist::PosteriorSamples& samples) {
  auto out = aorist::detail::open_out(path);
  out << "case_id,day,probability\n";
  auto posts = aorist::all_imputation_posteriors(samples);
  for (std::size_t k = 0; k < posts.size(); ++k) {
    const auto& win = samples.censored_windows[k];
    for (int d = win.t_from; d <= win.t_to; ++d) {
      auto it = posts[k].find(d);
      double p = it == posts[k].end() ? 0.0 : it->second;
      out << samples.censored_ids[k] << ',' << d << ',' << fmt(p) << '\n';
    }
  }
}

void write_pi_hat_csv(const std::string& path, const aorist::StudyDesign& design,
                      const std::vector<double>& pi_hat) {
  auto out = aorist::detail::open_out(path);
  out << "id,pi_hat\n";
  for (std::size_t i = 0; i < design.observations.size(); ++i)
    out << design.observations[i].id << ',' << fmt(pi_hat[i]) << '\n';
}

// ---- fit loading (criticize / impute-eval read a fit directory) ---------------

aorist::PosteriorSamples load_samples(const std::string& fit_dir,
                                      const aorist::StudyDesign& design) {
  aorist::PosteriorSamples samples;
  samples.n_weeks = design.span.n_weeks;
  samples.n_boroughs = design.graph.n_boroughs;
  for (std::size_t i : aorist::censored_case_indices(design)) {
    samples.censored_ids.push_back(design.observations[i].id);
    samples.censored_windows.push_back(design.observations[i].window);
  }

  const std::string draws_path = fit_dir + "/draws.csv";
  auto in = aorist::detail::open_in(draws_path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationFailure(draws_path + " is empty");
  auto names = aorist::param_names(samples.n_weeks, samples.n_boroughs);
  {
    std::string want = "chain,draw";
    for (const auto& n : names) want += "," + n;
    if (aorist::detail::strip_cr(line) != want)
      throw ValidationFailure(draws_path + ": header does not match this design (" +
                              std::to_string(samples.n_weeks) + " weeks, " +
                              std::to_string(samples.n_boroughs) + " boroughs)");
  }
  std::vector<int> chain_of_row;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = aorist::detail::strip_cr(line);
    if (line.empty()) continue;
    auto f = aorist::detail::split_csv_line(line);
    if (f.size() != names.size() + 2)
      throw ValidationFailure(draws_path + ":" + std::to_string(lineno) +
                              ": wrong field count");
    chain_of_row.push_back(int(aorist::detail::parse_long(f[0], draws_path, lineno)));
    std::vector<double> packed(names.size());
    for (std::size_t p = 0; p < names.size(); ++p)
      packed[p] = aorist::detail::parse_double(f[p + 2], draws_path, lineno);
    aorist::ModelState s =
        aorist::ModelState::zeros(samples.n_weeks, samples.n_boroughs);
    aorist::unpack_state(packed, s);
    samples.draws.push_back(std::move(s));
  }
  if (samples.draws.empty()) throw ValidationFailure(draws_path + " has no draws");
  samples.n_chains = chain_of_row.back();
  if (samples.draws.size() % std::size_t(samples.n_chains) != 0)
    throw ValidationFailure(draws_path + ": chains have unequal draw counts");
  samples.kept_per_chain = long(samples.draws.size()) / samples.n_chains;

  const std::string latent_path = fit_dir + "/latent_draws.csv";
  if (!samples.censored_ids.empty()) {
    std::ifstream lin(latent_path);
    if (!lin)
      throw ValidationFailure(latent_path +
                              " missing but the design has censored cases (was the fit "
                              "run in complete-cases mode?)");
    if (!std::getline(lin, line)) throw ValidationFailure(latent_path + " is empty");
    std::string want = "chain,draw";
    for (const auto& id : samples.censored_ids) want += "," + id;
    if (aorist::detail::strip_cr(line) != want)
      throw ValidationFailure(latent_path + ": censored case ids do not match the design");
    std::size_t row = 0;
    lineno = 1;
    while (std::getline(lin, line)) {
      ++lineno;
      line = aorist::detail::strip_cr(line);
      if (line.empty()) continue;
      auto f = aorist::detail::split_csv_line(line);
      if (f.size() != samples.censored_ids.size() + 2)
        throw ValidationFailure(latent_path + ":" + std::to_string(lineno) +
                                ": wrong field count");
      if (row >= samples.draws.size())
        throw ValidationFailure(latent_path + ": more rows than draws.csv");
      auto& s = samples.draws[row];
      s.latent_days.resize(samples.censored_ids.size());
      for (std::size_t k = 0; k < samples.censored_ids.size(); ++k)
        s.latent_days[k] = int(aorist::detail::parse_long(f[k + 2], latent_path, lineno));
      ++row;
    }
    if (row != samples.draws.size())
      throw ValidationFailure(latent_path + ": fewer rows than draws.csv");
  }
  return samples;
}

// ---- commands -----------------------------------------------------------------

struct SimulateOpts {
  int scenario = 1;
  std::uint64_t seed = 1;
  std::string out;
  long n_cases = 3000;
  long base_cases = 2626;
  int control_ratio = 5;
  int n_boroughs = 70;
  long n_locations = 28682;
  double mean_units = 13.34;
  std::string dwellings_path, adjacency_path;
  SpanOpts span;
};

void run_simulate(const SimulateOpts& o) {
  Stopwatch watch;
  auto span = o.span.make();
  if (o.dwellings_path.empty() != o.adjacency_path.empty())
    throw std::invalid_argument(
        "--dwellings and --adjacency must be given together (or neither)");

  aorist::DwellingSet dwellings;
  aorist::BoroughGraph graph;
  bool synthesized = o.dwellings_path.empty();
  if (synthesized) {
    auto region = aorist::synth_region(o.n_boroughs, o.n_locations, o.mean_units, o.seed);
    dwellings = std::move(region.first);
    graph = std::move(region.second);
  } else {
    dwellings = aorist::read_dwellings(o.dwellings_path);
    auto edges = aorist::read_adjacency(o.adjacency_path);
    int nb = 0;
    for (const auto& [a, b] : edges) nb = std::max({nb, a, b});
    for (const auto& l : dwellings.locations) nb = std::max(nb, l.borough);
    graph = aorist::BoroughGraph(nb, edges);
  }

  auto controls = aorist::sample_controls(dwellings, o.base_cases,
                                          {o.control_ratio, o.seed}, span);
  auto cases = aorist::simulate_flat_cases(controls, o.n_cases, o.seed);
  auto scenario = aorist::make_scenario(o.scenario, o.n_cases, o.seed, span.n_weeks);
  auto censored = aorist::apply_censoring(cases, scenario, span);

  aorist::StudyDesign design;
  design.span = span;
  design.graph = graph;
  design.observations = censored.cases;
  design.observations.insert(design.observations.end(), controls.begin(), controls.end());
  auto violations = aorist::validate(design);
  if (!violations.empty())
    throw ValidationFailure("generated design failed validation: " +
                            violations.front().rule);

  fs::create_directories(o.out);
  aorist::write_observations(o.out + "/observations.csv", design.observations);
  aorist::write_truth(o.out + "/truth.csv", censored.truth);
  if (synthesized) {
    aorist::write_dwellings(o.out + "/dwellings.csv", dwellings);
    aorist::write_adjacency(o.out + "/adjacency.csv", graph);
  }

  ordered_json cfg;
  cfg["scenario"] = o.scenario;
  cfg["seed"] = o.seed;
  cfg["n_cases"] = o.n_cases;
  cfg["base_cases"] = o.base_cases;
  cfg["control_ratio"] = o.control_ratio;
  cfg["censor_rate_exp_lambda"] = scenario.censor_rate_exp_lambda;
  if (!scenario.dow_probs.empty()) cfg["dow_probs"] = scenario.dow_probs;
  if (!scenario.week_probs.empty()) cfg["week_probs"] = scenario.week_probs;
  cfg["span"] = span_echo(span);
  ordered_json region;
  region["synthesized"] = synthesized;
  if (synthesized) {
    region["n_boroughs"] = o.n_boroughs;
    region["n_locations"] = o.n_locations;
    region["mean_units"] = o.mean_units;
  } else {
    region["dwellings"] = o.dwellings_path;
    region["adjacency"] = o.adjacency_path;
  }
  cfg["region"] = region;

  std::vector<std::string> inputs;
  if (!synthesized) inputs = {o.dwellings_path, o.adjacency_path};
  auto manifest = aorist::make_manifest("simulate", cfg, inputs);
  manifest["counts"] = {{"cases", o.n_cases},
                        {"controls", long(controls.size())},
                        {"censored_cases", long(censored.truth.size())}};
  aorist::write_manifest(o.out + "/manifest.json", manifest);

  std::cerr << "simulate: " << design.observations.size() << " observations ("
            << censored.truth.size() << " censored cases) in " << watch.seconds()
            << " s\n";
}

struct FitOpts {
  std::string in_path, adj_path, mode = "full", out;
  SpanOpts span;
  SamplerOpts sampler;
};

void write_fit_outputs(const std::string& out_dir, const aorist::StudyDesign& design,
                       const aorist::PosteriorSamples& samples) {
  write_summary_csv(out_dir + "/summary.csv", aorist::summarize(samples));
  write_draws_csv(out_dir + "/draws.csv", samples);
  if (!samples.censored_ids.empty()) {
    write_latent_csv(out_dir + "/latent_draws.csv", samples);
    write_imputation_csv(out_dir + "/imputation.csv", samples);
  }
  write_pi_hat_csv(out_dir + "/pi_hat.csv", design,
                   aorist::posterior_mean_pi(samples, design));
}

void run_fit(const FitOpts& o) {
  Stopwatch watch;
  auto span = o.span.make();
  auto design = load_design(o.in_path, o.adj_path, span);
  if (o.mode == "complete-cases") design = aorist::complete_cases_filter(design);
  auto [cfg, priors] = o.sampler.resolve();

  auto samples = aorist::run(design, priors, cfg);
  fs::create_directories(o.out);
  write_fit_outputs(o.out, design, samples);

  ordered_json cfgj;
  cfgj["mode"] = o.mode;
  cfgj["span"] = span_echo(span);
  cfgj["sampler"] = o.sampler.echo(cfg, priors);
  cfgj["draws_format"] =
      "draws.csv: chain,draw then one column per parameter; latent_draws.csv: "
      "chain,draw then one column per censored case id holding the sampled day";
  std::vector<std::string> inputs = {o.in_path, o.adj_path};
  if (!o.sampler.config_path.empty()) inputs.push_back(o.sampler.config_path);
  auto manifest = aorist::make_manifest("fit", cfgj, inputs);
  long n_cases = 0;
  for (const auto& obs : design.observations) n_cases += obs.is_case();
  manifest["counts"] = {{"observations", long(design.observations.size())},
                        {"cases", n_cases},
                        {"censored_cases", long(samples.censored_ids.size())},
                        {"kept_draws", long(samples.draws.size())}};
  aorist::write_manifest(o.out + "/manifest.json", manifest);
  std::cerr << "fit(" << o.mode << "): " << samples.draws.size() << " draws in "
            << watch.seconds() << " s\n";
}

struct AoristicOpts {
  std::string in_path, out;
  SpanOpts span;
};

void run_aoristic(const AoristicOpts& o) {
  Stopwatch watch;
  auto span = o.span.make();
  auto obs = aorist::read_observations(o.in_path, span);
  for (const auto& ob : obs) {
    if (ob.window.t_from > ob.window.t_to || ob.window.t_from < 1 ||
        ob.window.t_to > span.n_days)
      throw ValidationFailure("bad window on " + ob.id);
    if (ob.label != 0 && ob.label != 1)
      throw ValidationFailure("label not 0/1 on " + ob.id);
  }
  aorist::StudyDesign design{std::move(obs), aorist::BoroughGraph(), span};
  auto aoristic = aorist::aoristic_aggregate(design, /*cases_only=*/true);
  auto exact = aorist::exact_only_aggregate(design);

  fs::create_directories(o.out);
  {
    auto f = aorist::detail::open_out(o.out + "/aoristic_dow.csv");
    f << "bin,exact_only,aoristic\n";
    for (int d = 0; d < 7; ++d)
      f << (d + 1) << ',' << fmt(exact.by_dow[std::size_t(d)]) << ','
        << fmt(aoristic.by_dow[std::size_t(d)]) << '\n';
  }
  {
    auto f = aorist::detail::open_out(o.out + "/aoristic_week.csv");
    f << "bin,exact_only,aoristic\n";
    for (int w = 0; w < span.n_weeks; ++w)
      f << (w + 1) << ',' << fmt(exact.by_week[std::size_t(w)]) << ','
        << fmt(aoristic.by_week[std::size_t(w)]) << '\n';
  }
  ordered_json cfg;
  cfg["span"] = span_echo(span);
  cfg["events"] = "cases only; controls excluded from both tables";
  auto manifest = aorist::make_manifest("aoristic", cfg, {o.in_path});
  manifest["counts"] = {{"aoristic_events", aoristic.n_events},
                        {"exact_only_events", exact.n_events}};
  aorist::write_manifest(o.out + "/manifest.json", manifest);
  std::cerr << "aoristic: " << aoristic.n_events << " events in " << watch.seconds()
            << " s\n";
}

std::vector<double> parse_cutoffs(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ':')) parts.push_back(tok);
  try {
    if (parts.size() == 1) return {std::stod(parts[0])};
    if (parts.size() == 3) {
      double start = std::stod(parts[0]), stop = std::stod(parts[1]),
             step = std::stod(parts[2]);
      if (!(step > 0.0) || stop < start)
        throw std::invalid_argument("cutoff range must satisfy start <= stop, step > 0");
      std::vector<double> out;
      for (int k = 0;; ++k) {
        double c = start + k * step;
        if (c > stop + 1e-9) break;
        out.push_back(c);
      }
      return out;
    }
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("cutoffs must be 'value' or 'start:stop:step': " + spec);
}

struct CriticizeOpts {
  std::string fit_dir, in_path, adj_path, out;
  std::string cutoffs = "0.05:0.35:0.05";
  SpanOpts span;
};

void run_criticize(const CriticizeOpts& o) {
  Stopwatch watch;
  auto span = o.span.make();
  auto design = load_design(o.in_path, o.adj_path, span);
  auto samples = load_samples(o.fit_dir, design);
  auto cutoffs = parse_cutoffs(o.cutoffs);

  auto mcc_dist = aorist::metric_posterior(samples, design, cutoffs, aorist::Metric::mcc);
  auto f1_dist = aorist::metric_posterior(samples, design, cutoffs, aorist::Metric::f1);

  fs::create_directories(o.out);
  {
    auto f = aorist::detail::open_out(o.out + "/metrics.csv");
    f << "cutoff,metric,q025,mean,q975\n";
    auto emit = [&](const std::vector<aorist::MetricDistribution>& dists,
                    const char* name) {
      for (const auto& d : dists) {
        double mean = 0.0;
        for (double x : d.samples) mean += x;
        mean /= double(d.samples.size());
        f << fmt(d.cutoff) << ',' << name << ',' << fmt(d.q025) << ',' << fmt(mean) << ','
          << fmt(d.q975) << '\n';
      }
    };
    emit(mcc_dist, "mcc");
    emit(f1_dist, "f1");
  }
  {
    auto pi_hat = aorist::posterior_mean_pi(samples, design);
    std::vector<int> labels;
    labels.reserve(design.observations.size());
    for (const auto& obs : design.observations) labels.push_back(obs.label);
    auto f = aorist::detail::open_out(o.out + "/confusion.csv");
    f << "cutoff,tp,fp,fn,tn,mcc,f1\n";
    for (double c : cutoffs) {
      auto m = aorist::confusion(labels, pi_hat, c);
      f << fmt(c) << ',' << m.tp << ',' << m.fp << ',' << m.fn << ',' << m.tn << ','
        << fmt(aorist::mcc(m)) << ',' << fmt(aorist::f1(m)) << '\n';
    }
  }
  {
    auto f = aorist::detail::open_out(o.out + "/pi_hat_split.csv");
    f << "split,group,stat,value\n";
    auto emit_group = [&](const char* split, const aorist::PiGroupSummary& g) {
      f << split << ',' << g.group << ",n," << g.n << '\n';
      f << split << ',' << g.group << ",mean," << fmt(g.mean) << '\n';
      f << split << ',' << g.group << ",q025," << fmt(g.q025) << '\n';
      f << split << ',' << g.group << ",q500," << fmt(g.q500) << '\n';
      f << split << ',' << g.group << ",q975," << fmt(g.q975) << '\n';
      for (std::size_t b = 0; b < g.hist.size(); ++b)
        f << split << ',' << g.group << ",hist_" << b << ',' << g.hist[b] << '\n';
    };
    auto cc = aorist::pi_hat_split(samples, design, aorist::PiSplit::case_vs_control);
    emit_group("case_vs_control", cc.first);
    emit_group("case_vs_control", cc.second);
    auto cu = aorist::pi_hat_split(samples, design, aorist::PiSplit::certain_vs_uncertain);
    emit_group("certain_vs_uncertain", cu.first);
    emit_group("certain_vs_uncertain", cu.second);
  }

  ordered_json cfg;
  cfg["fit_dir"] = o.fit_dir;
  cfg["cutoffs"] = cutoffs;
  cfg["span"] = span_echo(span);
  cfg["latent_dates"] =
      "censored cases classified at each draw's sampled date, not a point imputation";
  std::vector<std::string> inputs = {o.in_path, o.adj_path, o.fit_dir + "/draws.csv"};
  if (!samples.censored_ids.empty()) inputs.push_back(o.fit_dir + "/latent_draws.csv");
  auto manifest = aorist::make_manifest("criticize", cfg, inputs);
  aorist::write_manifest(o.out + "/manifest.json", manifest);
  std::cerr << "criticize: " << samples.draws.size() << " draws x " << cutoffs.size()
            << " cutoffs in " << watch.seconds() << " s\n";
}

struct ImputeEvalOpts {
  std::string fit_dir, truth_path, in_path, out;
  SpanOpts span;
};

void run_impute_eval(const ImputeEvalOpts& o) {
  Stopwatch watch;
  auto span = o.span.make();
  auto obs = aorist::read_observations(o.in_path, span);
  std::map<std::string, aorist::CensorWindow> windows;
  for (const auto& ob : obs) windows[ob.id] = ob.window;
  auto truth = aorist::read_truth(o.truth_path);

  // argmax of the per-case imputation posterior; rows are written in
  // ascending day order, so keeping the first strict maximum breaks ties
  // toward the earliest day
  std::map<std::string, std::pair<int, double>> best;
  {
    const std::string path = o.fit_dir + "/imputation.csv";
    auto in = aorist::detail::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationFailure(path + " is empty");
    aorist::detail::expect_header(aorist::detail::strip_cr(line), "case_id,day,probability",
                                  path);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      line = aorist::detail::strip_cr(line);
      if (line.empty()) continue;
      auto f = aorist::detail::split_csv_line(line);
      if (f.size() != 3)
        throw ValidationFailure(path + ":" + std::to_string(lineno) + ": wrong field count");
      int day = int(aorist::detail::parse_long(f[1], path, lineno));
      double p = aorist::detail::parse_double(f[2], path, lineno);
      auto it = best.find(f[0]);
      if (it == best.end())
        best.emplace(f[0], std::make_pair(day, p));
      else if (p > it->second.second)
        it->second = {day, p};
    }
  }

  long n = 0, argmax_hits = 0, mid_hits = 0;
  double argmax_abs = 0.0, mid_abs = 0.0;
  std::vector<std::string> missing;
  for (const auto& [id, true_day] : truth) {
    auto bit = best.find(id);
    auto wit = windows.find(id);
    if (bit == best.end() || wit == windows.end()) {
      missing.push_back(id);
      continue;
    }
    int am = bit->second.first;
    int mid = (wit->second.t_from + wit->second.t_to) / 2;
    ++n;
    argmax_abs += std::abs(am - true_day);
    mid_abs += std::abs(mid - true_day);
    argmax_hits += (am == true_day);
    mid_hits += (mid == true_day);
  }
  if (!missing.empty())
    throw ValidationFailure(std::to_string(missing.size()) +
                            " truth ids missing from the fit's imputation output "
                            "(first: " +
                            missing.front() + "); was the fit complete-cases?");
  if (n == 0) throw ValidationFailure("truth file has no evaluable cases");

  fs::create_directories(o.out);
  {
    auto f = aorist::detail::open_out(o.out + "/impute_report.csv");
    f << "method,n,mean_abs_error,hit_rate\n";
    f << "argmax," << n << ',' << fmt(argmax_abs / double(n)) << ','
      << fmt(double(argmax_hits) / double(n)) << '\n';
    f << "midpoint," << n << ',' << fmt(mid_abs / double(n)) << ','
      << fmt(double(mid_hits) / double(n)) << '\n';
  }
  ordered_json cfg;
  cfg["fit_dir"] = o.fit_dir;
  cfg["span"] = span_echo(span);
  cfg["tie_break"] = "argmax ties resolved to the earliest day";
  auto manifest = aorist::make_manifest(
      "impute-eval", cfg, {o.in_path, o.truth_path, o.fit_dir + "/imputation.csv"});
  manifest["counts"] = {{"evaluated_cases", n}};
  aorist::write_manifest(o.out + "/manifest.json", manifest);
  std::cerr << "impute-eval: " << n << " cases in " << watch.seconds() << " s\n";
}

struct CompareOpts {
  std::string in_path, adj_path, out;
  SpanOpts span;
  SamplerOpts sampler;
};

void run_compare(const CompareOpts& o) {
  Stopwatch watch;
  auto span = o.span.make();
  auto design = load_design(o.in_path, o.adj_path, span);
  auto [cfg, priors] = o.sampler.resolve();

  auto full = aorist::run(design, priors, cfg);
  auto cc_design = aorist::complete_cases_filter(design);
  auto cc = aorist::run(cc_design, priors, cfg);

  auto full_sum = aorist::summarize(full);
  auto cc_sum = aorist::summarize(cc);

  fs::create_directories(o.out);
  auto emit_rows = [&](std::ofstream& f, const std::vector<aorist::ParamSummary>& sums,
                       const char* model, std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p)
      f << sums[p].name << ',' << model << ',' << fmt(sums[p].mean) << ','
        << fmt(sums[p].q025) << ',' << fmt(sums[p].q975) << '\n';
  };
  {
    auto f = aorist::detail::open_out(o.out + "/dow_effects.csv");
    f << "term,model,mean,q025,q975\n";
    emit_rows(f, cc_sum, "complete-cases", 1, 7);
    emit_rows(f, full_sum, "full", 1, 7);
  }
  {
    auto f = aorist::detail::open_out(o.out + "/week_effects.csv");
    f << "term,model,mean,q025,q975\n";
    std::size_t W = std::size_t(span.n_weeks);
    emit_rows(f, cc_sum, "complete-cases", 7, 7 + W);
    emit_rows(f, full_sum, "full", 7, 7 + W);
  }
  write_summary_csv(o.out + "/summary_full.csv", full_sum);
  write_summary_csv(o.out + "/summary_complete_cases.csv", cc_sum);

  ordered_json cfgj;
  cfgj["span"] = span_echo(span);
  cfgj["sampler"] = o.sampler.echo(cfg, priors);
  std::vector<std::string> inputs = {o.in_path, o.adj_path};
  if (!o.sampler.config_path.empty()) inputs.push_back(o.sampler.config_path);
  auto manifest = aorist::make_manifest("compare", cfgj, inputs);
  long cc_cases = 0, full_cases = 0;
  for (const auto& ob : design.observations) full_cases += ob.is_case();
  for (const auto& ob : cc_design.observations) cc_cases += ob.is_case();
  manifest["counts"] = {{"full_cases", full_cases}, {"complete_cases", cc_cases}};
  aorist::write_manifest(o.out + "/manifest.json", manifest);
  std::cerr << "compare: full=" << full_cases << " cases, complete-cases=" << cc_cases
            << " in " << watch.seconds() << " s\n";
}

std::string scenario_menu() {
  return "valid scenarios:\n"
         "  1  censor by day of week, p = 0.4 every day\n"
         "  2  censor by day of week, p = {0.3 Mon-Thu, 0.5 Fri-Sun}\n"
         "  3  censor by day of week, p = {0.2 Mon-Thu, 0.6 Fri-Sun}\n"
         "  4  censor by week, p = 0.4 every week\n"
         "  5  censor by week, p = 0.5 in fourth-quarter weeks, 0.3 otherwise\n"
         "  6  censor by week, p = 0.6 in fourth-quarter weeks, 0.2 otherwise";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Spatio-temporal case-control modeling with interval-censored event dates"};
  app.require_subcommand(1);

  SimulateOpts sim;
  auto* csim = app.add_subcommand("simulate", "generate a synthetic censoring scenario");
  csim->add_option("--scenario", sim.scenario, "scenario id (1-6)")
      ->required()
      ->check([](const std::string& s) -> std::string {
        try {
          int v = std::stoi(s);
          if (v >= 1 && v <= 6) return "";
        } catch (...) {
        }
        return "scenario must be an integer in 1..6\n" + scenario_menu();
      });
  csim->add_option("--seed", sim.seed, "RNG seed")->capture_default_str();
  csim->add_option("--out", sim.out, "output directory")->required();
  csim->add_option("--n-cases", sim.n_cases, "simulated cases")->capture_default_str();
  csim->add_option("--base-cases", sim.base_cases,
                   "case count that scales the control sample")
      ->capture_default_str();
  csim->add_option("--control-ratio", sim.control_ratio, "controls per base case")
      ->capture_default_str();
  csim->add_option("--n-boroughs", sim.n_boroughs, "boroughs in the synthetic region")
      ->capture_default_str();
  csim->add_option("--n-locations", sim.n_locations,
                   "dwelling locations in the synthetic region")
      ->capture_default_str();
  csim->add_option("--mean-units", sim.mean_units, "mean dwelling units per location")
      ->capture_default_str();
  csim->add_option("--dwellings", sim.dwellings_path,
                   "use this dwellings CSV instead of a synthetic region")
      ->check(CLI::ExistingFile);
  csim->add_option("--adjacency", sim.adjacency_path,
                   "borough adjacency CSV (with --dwellings)")
      ->check(CLI::ExistingFile);
  sim.span.attach(csim);
  csim->callback([&]() { run_simulate(sim); });

  FitOpts fit;
  auto* cfit = app.add_subcommand("fit", "run the MCMC sampler on a design");
  cfit->add_option("--in", fit.in_path, "observations CSV")->required()
      ->check(CLI::ExistingFile);
  cfit->add_option("--adjacency", fit.adj_path, "borough adjacency CSV")->required()
      ->check(CLI::ExistingFile);
  cfit->add_option("--mode", fit.mode, "full or complete-cases")
      ->capture_default_str()
      ->check(CLI::IsMember({"full", "complete-cases"}));
  cfit->add_option("--out", fit.out, "output directory")->required();
  fit.span.attach(cfit);
  fit.sampler.attach(cfit);
  cfit->callback([&]() { run_fit(fit); });

  AoristicOpts aor;
  auto* caor = app.add_subcommand("aoristic",
                                  "tabulate aoristic vs exact-only event distributions");
  caor->add_option("--in", aor.in_path, "observations CSV")->required()
      ->check(CLI::ExistingFile);
  caor->add_option("--out", aor.out, "output directory")->required();
  aor.span.attach(caor);
  caor->callback([&]() { run_aoristic(aor); });

  CriticizeOpts crit;
  auto* ccrit = app.add_subcommand("criticize", "classification metrics from a fit");
  ccrit->add_option("--fit", crit.fit_dir, "fit output directory")->required()
      ->check(CLI::ExistingDirectory);
  ccrit->add_option("--in", crit.in_path, "observations CSV the fit used")->required()
      ->check(CLI::ExistingFile);
  ccrit->add_option("--adjacency", crit.adj_path, "borough adjacency CSV")->required()
      ->check(CLI::ExistingFile);
  ccrit->add_option("--cutoffs", crit.cutoffs, "cutoff value or start:stop:step sweep")
      ->capture_default_str();
  ccrit->add_option("--out", crit.out, "output directory")->required();
  crit.span.attach(ccrit);
  ccrit->callback([&]() { run_criticize(crit); });

  ImputeEvalOpts imp;
  auto* cimp = app.add_subcommand("impute-eval",
                                  "compare imputed event dates against ground truth");
  cimp->add_option("--fit", imp.fit_dir, "fit output directory")->required()
      ->check(CLI::ExistingDirectory);
  cimp->add_option("--truth", imp.truth_path, "ground-truth CSV from simulate")
      ->required()
      ->check(CLI::ExistingFile);
  cimp->add_option("--in", imp.in_path, "observations CSV the fit used")->required()
      ->check(CLI::ExistingFile);
  cimp->add_option("--out", imp.out, "output directory")->required();
  imp.span.attach(cimp);
  cimp->callback([&]() { run_impute_eval(imp); });

  CompareOpts cmp;
  auto* ccmp = app.add_subcommand("compare",
                                  "fit both models and emit side-by-side effect tables");
  ccmp->add_option("--in", cmp.in_path, "observations CSV")->required()
      ->check(CLI::ExistingFile);
  ccmp->add_option("--adjacency", cmp.adj_path, "borough adjacency CSV")->required()
      ->check(CLI::ExistingFile);
  ccmp->add_option("--out", cmp.out, "output directory")->required();
  cmp.span.attach(ccmp);
  cmp.sampler.attach(ccmp);
  ccmp->callback([&]() { run_compare(cmp); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  } catch (const ValidationFailure& e) {
    std::cerr << "data validation error: " << e.what() << '\n';
    return 2;
  } catch (const aorist::CsvError& e) {
    std::cerr << "data validation error: " << e.what() << '\n';
    return 2;
  } catch (const aorist::ConfigError& e) {
    std::cerr << "data validation error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
