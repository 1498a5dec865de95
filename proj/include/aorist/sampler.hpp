#pragma once

// Metropolis-within-Gibbs sampler. Latent event dates are resampled by exact
// enumeration of their discrete full conditional; every regression component
// gets a single-site adaptive random-walk Metropolis step (adaptation during
// burn-in only); the four precisions have conjugate Gamma draws. Chains run
// on separate threads with RNG streams derived from (seed, chain).
//
// Performance relies on a per-observation cache of the linear predictor eta
// and of log(1+e^eta): a single-site move shifts eta additively on the
// observations that share the component, so each proposal costs one
// log1pexp per affected observation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "aorist/calendar.hpp"
#include "aorist/domain.hpp"
#include "aorist/model.hpp"

namespace aorist {

struct StepSizes {
  double fixed_effects = 0.1;
  double delta = 0.1;
  double epsilon = 0.1;
  double u = 0.1;
  double v = 0.1;

  void check() const {
    for (double s : {fixed_effects, delta, epsilon, u, v})
      if (!(s > 0.0)) throw std::invalid_argument("proposal scales must be positive");
  }
};

// Which parts of the state the sweep touches; everything on by default.
// Freezing blocks is how the fixed-effect oracle tests and the flat-model
// latent-date checks are run.
struct BlockToggles {
  bool latent = true;
  bool fixed_effects = true;
  bool delta = true;
  bool epsilon = true;
  bool u = true;
  bool v = true;
  bool precisions = true;
};

struct SamplerConfig {
  int n_chains = 4;
  long n_iterations = 50000;
  long n_burnin = 10000;
  int thin = 10;
  std::uint64_t seed = 0;
  double adapt_target = 0.44;
  StepSizes steps;
  BlockToggles blocks;
  std::optional<ModelState> init_override;

  void check() const {
    if (n_chains < 1) throw std::invalid_argument("need at least one chain");
    if (!(n_burnin >= 0 && n_burnin < n_iterations))
      throw std::invalid_argument("need 0 <= n_burnin < n_iterations");
    if (thin < 1) throw std::invalid_argument("thin must be >= 1");
    if (!(adapt_target > 0.0 && adapt_target < 1.0))
      throw std::invalid_argument("adapt_target must lie in (0,1)");
    steps.check();
  }
};

struct PosteriorSamples {
  int n_weeks = 0;
  int n_boroughs = 0;
  int n_chains = 0;
  long kept_per_chain = 0;
  std::vector<ModelState> draws;  // chain-major: chain c occupies [c*kept, (c+1)*kept)
  std::vector<std::string> censored_ids;      // order used by latent_days
  std::vector<CensorWindow> censored_windows;

  const ModelState& draw(int chain, long k) const {
    return draws[std::size_t(chain) * std::size_t(kept_per_chain) + std::size_t(k)];
  }
};

struct ParamSummary {
  std::string name;
  double mean = 0.0, sd = 0.0, q025 = 0.0, q975 = 0.0, rhat = 0.0, ess = 0.0;
};

namespace detail {

inline std::mt19937_64 chain_rng(std::uint64_t seed, std::uint64_t chain) {
  std::seed_seq sseq{std::uint32_t(seed), std::uint32_t(seed >> 32),
                     std::uint32_t(chain), std::uint32_t(chain >> 32),
                     std::uint32_t(0x9e3779b9)};
  return std::mt19937_64(sseq);
}

// Draws a day from p(t) proportional to logistic(eta(t)) over the window.
// Log weights are max-shifted before exponentiation so extreme states cannot
// underflow all weights at once.
template <class EtaFn>
int draw_window_day(const CensorWindow& win, EtaFn&& eta_at, std::mt19937_64& rng,
                    std::vector<double>& buf) {
  buf.clear();
  double mx = -std::numeric_limits<double>::infinity();
  for (int t = win.t_from; t <= win.t_to; ++t) {
    double lw = -log1pexp(-eta_at(t));  // log pi(t)
    buf.push_back(lw);
    mx = std::max(mx, lw);
  }
  double total = 0.0;
  for (double& lw : buf) {
    lw = std::exp(lw - mx);
    total += lw;
  }
  std::uniform_real_distribution<double> unif(0.0, total);
  double target = unif(rng);
  double cum = 0.0;
  for (std::size_t k = 0; k < buf.size(); ++k) {
    cum += buf[k];
    if (target < cum) return win.t_from + int(k);
  }
  return win.t_to;  // guards the target == total edge from rounding
}

}  // namespace detail

// One exact-Gibbs draw of a censored case's event date given the rest of the
// state. Enumeration over the window; no proposal, no rejection.
inline int update_latent_date(const Observation& obs, const ModelState& state,
                              const CalendarSpan& span, std::mt19937_64& rng) {
  if (!obs.is_case() || obs.window.exact())
    throw std::domain_error("latent date update needs a censored case: " + obs.id);
  std::vector<double> buf;
  return detail::draw_window_day(
      obs.window, [&](int t) { return linear_predictor(obs, t, state, span); }, rng, buf);
}

// Conjugate Gamma draws for the four precisions. Shapes gain rank/2 of the
// corresponding quadratic form (W-2 for the second-difference penalty, B-1
// for the pairwise spatial penalty, full dimension for the iid fields).
inline void update_precisions(ModelState& state, const StudyDesign& design,
                              const PriorSpec& priors, std::mt19937_64& rng) {
  const int W = int(state.delta.size());
  const int B = int(state.u.size());
  auto draw = [&rng](double shape, double rate) {
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    return g(rng);
  };
  double eps_ss = 0.0, v_ss = 0.0;
  for (double e : state.epsilon) eps_ss += e * e;
  for (double x : state.v) v_ss += x * x;
  state.tau_delta = draw(priors.gamma_delta_shape + 0.5 * std::max(0, W - 2),
                         priors.gamma_delta_rate + 0.5 * detail::rw2_penalty(state.delta));
  state.tau_epsilon = draw(priors.gamma_epsilon_shape + 0.5 * W,
                           priors.gamma_epsilon_rate + 0.5 * eps_ss);
  state.tau_u = draw(priors.gamma_u_shape + 0.5 * std::max(0, B - 1),
                     priors.gamma_u_rate + 0.5 * detail::car_penalty(state.u, design.graph));
  state.tau_v = draw(priors.gamma_v_shape + 0.5 * B, priors.gamma_v_rate + 0.5 * v_ss);
}

enum class FieldBlock { fixed_effects, delta, epsilon, u, v };

namespace detail {

// Per-chain workspace: flattened design, eta/log1pexp caches, index buckets,
// per-component adaptive scales.
class Kernel {
 public:
  Kernel(const StudyDesign& design, const PriorSpec& priors, ModelState init,
         const StepSizes& steps, double adapt_target, std::mt19937_64 rng)
      : design_(design),
        priors_(priors),
        state_(std::move(init)),
        target_(adapt_target),
        rng_(std::move(rng)) {
    const auto& span = design.span;
    T_ = span.n_days;
    W_ = span.n_weeks;
    B_ = design.graph.n_boroughs;
    n_ = design.observations.size();

    dow0_.resize(std::size_t(T_) + 1);
    week0_.resize(std::size_t(T_) + 1);
    for (int d = 1; d <= T_; ++d) {
      dow0_[std::size_t(d)] = day_of_week(d, span) - 1;
      week0_[std::size_t(d)] = week_of(d, span) - 1;
    }

    y_.resize(n_);
    b0_.resize(n_);
    date_.resize(n_);
    win_.resize(n_);
    all_.resize(n_);
    ex_dow_.assign(7, {});
    cen_dow_.assign(7, {});
    ex_week_.assign(std::size_t(W_), {});
    cen_week_.assign(std::size_t(W_), {});
    by_b_.assign(std::size_t(B_), {});

    std::size_t next_latent = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      const auto& obs = design.observations[i];
      y_[i] = obs.label;
      b0_[i] = obs.borough - 1;
      win_[i] = obs.window;
      all_[i] = i;
      by_b_[std::size_t(b0_[i])].push_back(i);
      if (obs.is_case() && !obs.window.exact()) {
        if (next_latent >= state_.latent_days.size())
          throw std::domain_error("initial state lacks a latent date for " + obs.id);
        int d = state_.latent_days[next_latent];
        if (d < obs.window.t_from || d > obs.window.t_to)
          throw std::domain_error("initial latent date outside window for " + obs.id);
        date_[i] = d;
        cen_.push_back(i);
        ++next_latent;
      } else {
        date_[i] = obs.window.t_from;
        ex_dow_[std::size_t(dow0_[std::size_t(date_[i])])].push_back(i);
        ex_week_[std::size_t(week0_[std::size_t(date_[i])])].push_back(i);
      }
    }
    if (next_latent != state_.latent_days.size())
      throw std::domain_error("initial state has extra latent dates");

    eta_.resize(n_);
    lse_.resize(n_);
    n_comp_ = 7 + 2 * std::size_t(W_) + 2 * std::size_t(B_);
    lstep_.resize(n_comp_);
    acc_.assign(n_comp_, 0);
    tries_.assign(n_comp_, 0);
    for (std::size_t c = 0; c < n_comp_; ++c) {
      double s;
      if (c < 7)
        s = steps.fixed_effects;
      else if (c < 7 + std::size_t(W_))
        s = steps.delta;
      else if (c < 7 + 2 * std::size_t(W_))
        s = steps.epsilon;
      else if (c < 7 + 2 * std::size_t(W_) + std::size_t(B_))
        s = steps.u;
      else
        s = steps.v;
      lstep_[c] = std::log(s);
    }
    rebuild_censored_buckets();
    refresh_caches();
  }

  ModelState& state() { return state_; }
  const ModelState& state() const { return state_; }

  void refresh_caches() {
    for (std::size_t i = 0; i < n_; ++i) {
      int d = date_[i];
      eta_[i] = state_.alpha + state_.beta[std::size_t(dow0_[std::size_t(d)])] +
                state_.delta[std::size_t(week0_[std::size_t(d)])] +
                state_.epsilon[std::size_t(week0_[std::size_t(d)])] +
                state_.u[std::size_t(b0_[i])] + state_.v[std::size_t(b0_[i])];
      lse_[i] = log1pexp(eta_[i]);
    }
  }

  void rebuild_censored_buckets() {
    for (auto& v : cen_dow_) v.clear();
    for (auto& v : cen_week_) v.clear();
    for (std::size_t i : cen_) {
      cen_dow_[std::size_t(dow0_[std::size_t(date_[i])])].push_back(i);
      cen_week_[std::size_t(week0_[std::size_t(date_[i])])].push_back(i);
    }
  }

  void sweep_latent() {
    for (std::size_t k = 0; k < cen_.size(); ++k) {
      std::size_t i = cen_[k];
      double base = state_.alpha + state_.u[std::size_t(b0_[i])] +
                    state_.v[std::size_t(b0_[i])];
      int d = draw_window_day(
          win_[i],
          [&](int t) {
            return base + state_.beta[std::size_t(dow0_[std::size_t(t)])] +
                   state_.delta[std::size_t(week0_[std::size_t(t)])] +
                   state_.epsilon[std::size_t(week0_[std::size_t(t)])];
          },
          rng_, wbuf_);
      date_[i] = d;
      state_.latent_days[k] = d;
      eta_[i] = base + state_.beta[std::size_t(dow0_[std::size_t(d)])] +
                state_.delta[std::size_t(week0_[std::size_t(d)])] +
                state_.epsilon[std::size_t(week0_[std::size_t(d)])];
      lse_[i] = log1pexp(eta_[i]);
    }
    rebuild_censored_buckets();
  }

  void sweep_fixed_effects() {
    const double fv = priors_.fixed_effect_variance;
    auto gauss_prior = [fv](double o, double n) { return 0.5 * (o * o - n * n) / fv; };
    mh_update(0, state_.alpha, &all_, nullptr, gauss_prior);
    for (int k = 1; k < 7; ++k)
      mh_update(std::size_t(k), state_.beta[std::size_t(k)],
                &ex_dow_[std::size_t(k)], &cen_dow_[std::size_t(k)], gauss_prior);
  }

  void sweep_delta() {
    for (std::size_t j = 0; j < std::size_t(W_); ++j) {
      auto prior = [&](double o, double n) {
        return 0.5 * state_.tau_delta * (local_rw2(j, o) - local_rw2(j, n));
      };
      mh_update(7 + j, state_.delta[j], &ex_week_[j], &cen_week_[j], prior);
    }
    recenter(state_.delta);
  }

  void sweep_epsilon() {
    for (std::size_t j = 0; j < std::size_t(W_); ++j) {
      auto prior = [&](double o, double n) {
        return 0.5 * state_.tau_epsilon * (o * o - n * n);
      };
      mh_update(7 + std::size_t(W_) + j, state_.epsilon[j], &ex_week_[j], &cen_week_[j],
                prior);
    }
  }

  void sweep_u() {
    for (std::size_t b = 0; b < std::size_t(B_); ++b) {
      auto prior = [&](double o, double n) {
        double so = 0.0, sn = 0.0;
        for (int nb : design_.graph.neighbors[b]) {
          double un = state_.u[std::size_t(nb - 1)];
          so += (o - un) * (o - un);
          sn += (n - un) * (n - un);
        }
        return 0.5 * state_.tau_u * (so - sn);
      };
      mh_update(7 + 2 * std::size_t(W_) + b, state_.u[b], &by_b_[b], nullptr, prior);
    }
    recenter(state_.u);
  }

  void sweep_v() {
    for (std::size_t b = 0; b < std::size_t(B_); ++b) {
      auto prior = [&](double o, double n) {
        return 0.5 * state_.tau_v * (o * o - n * n);
      };
      mh_update(7 + 2 * std::size_t(W_) + std::size_t(B_) + b, state_.v[b], &by_b_[b],
                nullptr, prior);
    }
  }

  // Roberts-Rosenthal diminishing adaptation, applied once per 50-iteration
  // batch during burn-in.
  void adapt(long batch_number) {
    double mag = std::min(0.05, 1.0 / std::sqrt(double(batch_number)));
    for (std::size_t c = 0; c < n_comp_; ++c) {
      if (tries_[c] == 0) continue;
      double rate = double(acc_[c]) / double(tries_[c]);
      lstep_[c] += (rate > target_) ? mag : -mag;
      acc_[c] = 0;
      tries_[c] = 0;
    }
  }

  void draw_precisions() { update_precisions(state_, design_, priors_, rng_); }

  std::mt19937_64& rng() { return rng_; }

 private:
  double local_rw2(std::size_t j, double val) const {
    const auto& d = state_.delta;
    const std::size_t W = d.size();
    double s = 0.0;
    std::size_t lo = j >= 2 ? j : 2;
    std::size_t hi = std::min(W - 1, j + 2);
    if (W < 3) return 0.0;
    for (std::size_t w = lo; w <= hi; ++w) {
      double a = (w == j) ? val : d[w];
      double b = (w - 1 == j) ? val : d[w - 1];
      double c = (w - 2 == j) ? val : d[w - 2];
      double r = a - 2.0 * b + c;
      s += r * r;
    }
    return s;
  }

  // Transfers the block mean into the intercept so eta (and both caches)
  // stay exactly unchanged while the block regains sum-to-zero.
  void recenter(std::vector<double>& block) {
    double m = 0.0;
    for (double x : block) m += x;
    m /= double(block.size());
    for (double& x : block) x -= m;
    state_.alpha += m;
  }

  template <class PriorRatio>
  void mh_update(std::size_t comp, double& theta, const std::vector<std::size_t>* set_a,
                 const std::vector<std::size_t>* set_b, PriorRatio&& prior_ratio) {
    double prop = theta + std::exp(lstep_[comp]) * normal_(rng_);
    double shift = prop - theta;
    double dll = 0.0;
    scratch_.clear();
    auto scan = [&](const std::vector<std::size_t>& s) {
      for (std::size_t i : s) {
        double ln = log1pexp(eta_[i] + shift);
        dll += double(y_[i]) * shift - ln + lse_[i];
        scratch_.push_back(ln);
      }
    };
    if (set_a) scan(*set_a);
    if (set_b) scan(*set_b);
    double logr = dll + prior_ratio(theta, prop);
    ++tries_[comp];
    double uu = unif01_(rng_);
    if (std::log(uu) < logr) {
      std::size_t k = 0;
      auto apply = [&](const std::vector<std::size_t>& s) {
        for (std::size_t i : s) {
          eta_[i] += shift;
          lse_[i] = scratch_[k++];
        }
      };
      if (set_a) apply(*set_a);
      if (set_b) apply(*set_b);
      theta = prop;
      ++acc_[comp];
    }
  }

  const StudyDesign& design_;
  const PriorSpec& priors_;
  ModelState state_;
  double target_;
  std::mt19937_64 rng_;

  int T_ = 0, W_ = 0, B_ = 0;
  std::size_t n_ = 0, n_comp_ = 0;
  std::vector<int> dow0_, week0_, y_, b0_, date_;
  std::vector<CensorWindow> win_;
  std::vector<std::size_t> all_, cen_;
  std::vector<std::vector<std::size_t>> ex_dow_, cen_dow_, ex_week_, cen_week_, by_b_;
  std::vector<double> eta_, lse_, scratch_, wbuf_;
  std::vector<double> lstep_;
  std::vector<long> acc_, tries_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unif01_{0.0, 1.0};
};

}  // namespace detail

// Default initial state: intercept at the empirical log odds, effects at 0,
// precisions at their prior means, latent dates at window midpoints.
inline ModelState initial_state(const StudyDesign& design, const PriorSpec& priors) {
  ModelState s = ModelState::zeros(design.span.n_weeks, design.graph.n_boroughs);
  long n_cases = 0;
  for (const auto& obs : design.observations) n_cases += obs.is_case() ? 1 : 0;
  double p = design.observations.empty()
                 ? 0.5
                 : double(n_cases) / double(design.observations.size());
  p = std::clamp(p, 1e-6, 1.0 - 1e-6);
  s.alpha = std::log(p / (1.0 - p));
  s.tau_delta = priors.gamma_delta_shape / priors.gamma_delta_rate;
  s.tau_epsilon = priors.gamma_epsilon_shape / priors.gamma_epsilon_rate;
  s.tau_u = priors.gamma_u_shape / priors.gamma_u_rate;
  s.tau_v = priors.gamma_v_shape / priors.gamma_v_rate;
  for (std::size_t i : censored_case_indices(design)) {
    const auto& w = design.observations[i].window;
    s.latent_days.push_back((w.t_from + w.t_to) / 2);
  }
  return s;
}

// One sweep of the requested block, non-adaptive, at the given proposal
// scales. Used by tests and by anything that wants to compose its own
// scheduler; run() below drives the same kernel.
inline void update_field_block(FieldBlock block, ModelState& state,
                               const StudyDesign& design, const PriorSpec& priors,
                               const StepSizes& steps, std::mt19937_64& rng) {
  detail::Kernel kernel(design, priors, state, steps, 0.44, std::move(rng));
  switch (block) {
    case FieldBlock::fixed_effects: kernel.sweep_fixed_effects(); break;
    case FieldBlock::delta: kernel.sweep_delta(); break;
    case FieldBlock::epsilon: kernel.sweep_epsilon(); break;
    case FieldBlock::u: kernel.sweep_u(); break;
    case FieldBlock::v: kernel.sweep_v(); break;
  }
  state = kernel.state();
  rng = kernel.rng();
}

namespace detail {

inline void run_chain(const StudyDesign& design, const PriorSpec& priors,
                      const SamplerConfig& cfg, int chain, const ModelState& init,
                      std::vector<ModelState>& out) {
  Kernel kernel(design, priors, init, cfg.steps, cfg.adapt_target,
                chain_rng(cfg.seed, std::uint64_t(chain)));
  const long kept = (cfg.n_iterations - cfg.n_burnin) / cfg.thin;
  out.clear();
  out.reserve(std::size_t(kept));
  for (long iter = 1; iter <= cfg.n_iterations; ++iter) {
    kernel.refresh_caches();
    if (cfg.blocks.latent) kernel.sweep_latent();
    if (cfg.blocks.fixed_effects) kernel.sweep_fixed_effects();
    if (cfg.blocks.delta) kernel.sweep_delta();
    if (cfg.blocks.epsilon) kernel.sweep_epsilon();
    if (cfg.blocks.u) kernel.sweep_u();
    if (cfg.blocks.v) kernel.sweep_v();
    if (cfg.blocks.precisions) kernel.draw_precisions();
    if (iter <= cfg.n_burnin && iter % 50 == 0) kernel.adapt(iter / 50);
    if (iter > cfg.n_burnin && (iter - cfg.n_burnin) % cfg.thin == 0)
      out.push_back(kernel.state());
  }
}

}  // namespace detail

inline PosteriorSamples run(const StudyDesign& design, const PriorSpec& priors,
                            const SamplerConfig& cfg) {
  cfg.check();
  priors.check();
  {
    auto violations = validate(design);
    if (!violations.empty())
      throw std::domain_error("invalid design: " + violations.front().rule + " (" +
                              violations.front().id + ")");
  }

  ModelState init = cfg.init_override ? *cfg.init_override : initial_state(design, priors);
  {
    auto cen = censored_case_indices(design);
    if (cfg.init_override && init.latent_days.empty() && !cen.empty())
      for (std::size_t i : cen) {
        const auto& w = design.observations[i].window;
        init.latent_days.push_back((w.t_from + w.t_to) / 2);
      }
  }

  PosteriorSamples samples;
  samples.n_weeks = design.span.n_weeks;
  samples.n_boroughs = design.graph.n_boroughs;
  samples.n_chains = cfg.n_chains;
  samples.kept_per_chain = (cfg.n_iterations - cfg.n_burnin) / cfg.thin;
  for (std::size_t i : censored_case_indices(design)) {
    samples.censored_ids.push_back(design.observations[i].id);
    samples.censored_windows.push_back(design.observations[i].window);
  }

  std::vector<std::vector<ModelState>> per_chain(std::size_t(cfg.n_chains));
  std::vector<std::thread> threads;
  threads.reserve(std::size_t(cfg.n_chains));
  std::vector<std::exception_ptr> errors(std::size_t(cfg.n_chains));
  for (int c = 0; c < cfg.n_chains; ++c) {
    threads.emplace_back([&, c]() {
      try {
        detail::run_chain(design, priors, cfg, c, init, per_chain[std::size_t(c)]);
      } catch (...) {
        errors[std::size_t(c)] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  samples.draws.reserve(std::size_t(cfg.n_chains) * std::size_t(samples.kept_per_chain));
  for (auto& chain : per_chain)
    for (auto& s : chain) samples.draws.push_back(std::move(s));
  return samples;
}

// ---- diagnostics -----------------------------------------------------------

struct SeriesDiagnostics {
  double mean = 0.0, sd = 0.0, q025 = 0.0, q975 = 0.0, rhat = 1.0, ess = 0.0;
};

namespace detail {

inline double quantile_type7(std::vector<double> sorted, double p) {
  // expects sorted input
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (sorted.size() == 1) return sorted[0];
  double h = double(sorted.size() - 1) * p;
  std::size_t lo = std::size_t(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  double frac = h - double(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<const double*> seq;
  std::vector<std::size_t> len;
  for (const auto& ch : chains) {
    std::size_t h = ch.size() / 2;
    if (h < 2) return 1.0;  // too short to judge
    seq.push_back(ch.data());
    len.push_back(h);
    seq.push_back(ch.data() + (ch.size() - h));
    len.push_back(h);
  }
  std::size_t m = seq.size(), n = len[0];
  std::vector<double> means(m);
  double grand = 0.0, within = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += seq[j][i];
    means[j] = s / double(n);
    grand += means[j];
  }
  grand /= double(m);
  double between = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    between += (means[j] - grand) * (means[j] - grand);
    double s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s2 += (seq[j][i] - means[j]) * (seq[j][i] - means[j]);
    within += s2 / double(n - 1);
  }
  within /= double(m);
  between *= double(n) / double(m - 1);
  if (within == 0.0)
    return between == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  double varplus = (double(n - 1) / double(n)) * within + between / double(n);
  return std::sqrt(varplus / within);
}

// Effective sample size: variogram autocorrelation estimate combined across
// chains, truncated by the initial-positive-sequence rule.
inline double multichain_ess(const std::vector<std::vector<double>>& chains) {
  std::size_t m = chains.size(), n = chains[0].size();
  double total = double(m) * double(n);
  if (n < 4) return total;
  std::vector<double> means(m);
  double grand = 0.0, within = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (double x : chains[j]) s += x;
    means[j] = s / double(n);
    grand += means[j];
  }
  grand /= double(m);
  for (std::size_t j = 0; j < m; ++j) {
    double s2 = 0.0;
    for (double x : chains[j]) s2 += (x - means[j]) * (x - means[j]);
    within += s2 / double(n - 1);
  }
  within /= double(m);
  double between_over_n = 0.0;
  if (m > 1) {
    for (std::size_t j = 0; j < m; ++j)
      between_over_n += (means[j] - grand) * (means[j] - grand);
    between_over_n /= double(m - 1);
  }
  double varplus = (double(n - 1) / double(n)) * within + between_over_n;
  if (varplus <= 0.0) return total;

  auto rho = [&](std::size_t t) {
    double vt = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = t; i < n; ++i) {
        double d = chains[j][i] - chains[j][i - t];
        vt += d * d;
      }
    vt /= double(m) * double(n - t);
    return 1.0 - vt / (2.0 * varplus);
  };

  double acc = 0.0;
  for (std::size_t t = 1; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair <= 0.0) break;
    acc += pair;
  }
  double ess = total / (1.0 + 2.0 * acc);
  return std::min(ess, total);
}

}  // namespace detail

// chains: one series per chain, equal lengths.
inline SeriesDiagnostics diagnose_series(const std::vector<std::vector<double>>& chains) {
  if (chains.empty() || chains[0].empty()) throw std::domain_error("empty draw series");
  SeriesDiagnostics d;
  std::vector<double> pooled;
  for (const auto& ch : chains) pooled.insert(pooled.end(), ch.begin(), ch.end());
  double s = 0.0;
  for (double x : pooled) s += x;
  d.mean = s / double(pooled.size());
  double ss = 0.0;
  for (double x : pooled) ss += (x - d.mean) * (x - d.mean);
  d.sd = pooled.size() > 1 ? std::sqrt(ss / double(pooled.size() - 1)) : 0.0;
  std::sort(pooled.begin(), pooled.end());
  d.q025 = detail::quantile_type7(pooled, 0.025);
  d.q975 = detail::quantile_type7(pooled, 0.975);
  d.rhat = detail::split_rhat(chains);
  d.ess = detail::multichain_ess(chains);
  return d;
}

// Extracts the per-chain series of one packed coordinate.
inline std::vector<std::vector<double>> coord_series(const PosteriorSamples& samples,
                                                     std::size_t p) {
  std::vector<std::vector<double>> chains(std::size_t(samples.n_chains));
  for (int c = 0; c < samples.n_chains; ++c) {
    auto& ch = chains[std::size_t(c)];
    ch.reserve(std::size_t(samples.kept_per_chain));
    for (long k = 0; k < samples.kept_per_chain; ++k)
      ch.push_back(state_coord(samples.draw(c, k), p));
  }
  return chains;
}

inline std::vector<ParamSummary> summarize(const PosteriorSamples& samples) {
  if (samples.draws.empty()) throw std::domain_error("no draws to summarize");
  auto names = param_names(samples.n_weeks, samples.n_boroughs);
  std::vector<ParamSummary> out;
  out.reserve(names.size());
  for (std::size_t p = 0; p < names.size(); ++p) {
    auto diag = diagnose_series(coord_series(samples, p));
    ParamSummary ps;
    ps.name = names[p];
    ps.mean = diag.mean;
    ps.sd = diag.sd;
    ps.q025 = diag.q025;
    ps.q975 = diag.q975;
    ps.rhat = diag.rhat;
    ps.ess = diag.ess;
    out.push_back(std::move(ps));
  }
  return out;
}

// Empirical distribution of one censored case's latent date over all draws.
inline std::map<int, double> imputation_posterior(const PosteriorSamples& samples,
                                                  const std::string& case_id) {
  auto it = std::find(samples.censored_ids.begin(), samples.censored_ids.end(), case_id);
  if (it == samples.censored_ids.end())
    throw std::domain_error("not a censored case id: " + case_id);
  std::size_t k = std::size_t(it - samples.censored_ids.begin());
  if (samples.draws.empty()) throw std::domain_error("no draws");
  std::map<int, double> freq;
  for (const auto& s : samples.draws) freq[s.latent_days[k]] += 1.0;
  for (auto& [day, p] : freq) p /= double(samples.draws.size());
  return freq;
}

// All imputation posteriors in one pass over the draws, aligned with
// censored_ids.
inline std::vector<std::map<int, double>> all_imputation_posteriors(
    const PosteriorSamples& samples) {
  if (samples.draws.empty()) throw std::domain_error("no draws");
  std::vector<std::map<int, double>> freq(samples.censored_ids.size());
  for (const auto& s : samples.draws)
    for (std::size_t k = 0; k < freq.size(); ++k) freq[k][s.latent_days[k]] += 1.0;
  for (auto& f : freq)
    for (auto& [day, p] : f) p /= double(samples.draws.size());
  return freq;
}

// Point imputation: most probable day, earliest day winning ties.
inline int argmax_day(const std::map<int, double>& posterior) {
  if (posterior.empty()) throw std::domain_error("empty imputation posterior");
  int best = posterior.begin()->first;
  double best_p = posterior.begin()->second;
  for (const auto& [day, p] : posterior)
    if (p > best_p) {
      best = day;
      best_p = p;
    }
  return best;
}

// Posterior mean of pi_i per observation, latent dates varying per draw.
inline std::vector<double> posterior_mean_pi(const PosteriorSamples& samples,
                                             const StudyDesign& design) {
  if (samples.draws.empty()) throw std::domain_error("no draws");
  std::vector<double> acc(design.observations.size(), 0.0);
  for (const auto& s : samples.draws) {
    auto pi = per_obs_pi(design, s);
    for (std::size_t i = 0; i < pi.size(); ++i) acc[i] += pi[i];
  }
  for (double& a : acc) a /= double(samples.draws.size());
  return acc;
}

}  // namespace aorist
