#pragma once

// The logistic spatio-temporal model: linear predictor with day-of-week fixed
// effects, structured (RW2) + unstructured weekly effects, structured (ICAR) +
// unstructured borough effects; Gaussian priors on fixed effects and Gamma
// priors on the four precisions. The same density serves the full model and
// the complete-cases model -- only the design differs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "aorist/calendar.hpp"
#include "aorist/domain.hpp"

namespace aorist {

struct PriorSpec {
  double fixed_effect_variance = 1000.0;
  double gamma_delta_shape = 1.0, gamma_delta_rate = 0.5;
  double gamma_epsilon_shape = 1.0, gamma_epsilon_rate = 0.5;
  double gamma_u_shape = 1.0, gamma_u_rate = 0.01;
  double gamma_v_shape = 1.0, gamma_v_rate = 0.01;

  void check() const {
    const double vals[] = {fixed_effect_variance, gamma_delta_shape, gamma_delta_rate,
                           gamma_epsilon_shape,   gamma_epsilon_rate, gamma_u_shape,
                           gamma_u_rate,          gamma_v_shape,      gamma_v_rate};
    for (double x : vals)
      if (!(x > 0.0)) throw std::invalid_argument("prior hyperparameters must be positive");
  }
};

// Current parameter values. beta[0] is the Monday reference and stays 0.
// latent_days holds one entry per censored case, in design order (see
// censored_case_indices); exact observations never appear there.
struct ModelState {
  double alpha = 0.0;
  std::array<double, 7> beta{};         // Mon..Sun; beta[0] == 0
  std::vector<double> delta, epsilon;   // one per week
  std::vector<double> u, v;             // one per borough
  double tau_delta = 1.0, tau_epsilon = 1.0, tau_u = 1.0, tau_v = 1.0;
  std::vector<int> latent_days;

  static ModelState zeros(int n_weeks, int n_boroughs) {
    ModelState s;
    s.delta.assign(std::size_t(n_weeks), 0.0);
    s.epsilon.assign(std::size_t(n_weeks), 0.0);
    s.u.assign(std::size_t(n_boroughs), 0.0);
    s.v.assign(std::size_t(n_boroughs), 0.0);
    return s;
  }
};

// Indices (into design.observations) of the censored cases, in file order;
// this is the order latent_days follows everywhere.
inline std::vector<std::size_t> censored_case_indices(const StudyDesign& design) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < design.observations.size(); ++i) {
    const auto& obs = design.observations[i];
    if (obs.is_case() && !obs.window.exact()) idx.push_back(i);
  }
  return idx;
}

namespace detail {
inline double log1pexp(double x) {
  // log(1 + e^x) without overflow on either side
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double inv_logit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace detail

inline double linear_predictor(const Observation& obs, int date, const ModelState& state,
                               const CalendarSpan& span) {
  check_day(date, span);
  if (obs.borough < 1 || std::size_t(obs.borough) > state.u.size())
    throw std::domain_error("borough out of range for state: " + obs.id);
  int w = week_of(date, span);
  return state.alpha + state.beta[std::size_t(day_of_week(date, span) - 1)] +
         state.delta[std::size_t(w - 1)] + state.epsilon[std::size_t(w - 1)] +
         state.u[std::size_t(obs.borough - 1)] + state.v[std::size_t(obs.borough - 1)];
}

// Bernoulli log likelihood at the observation's exact or latent date.
inline double log_likelihood(const StudyDesign& design, const ModelState& state) {
  double total = 0.0;
  std::size_t next_latent = 0;
  for (const auto& obs : design.observations) {
    int date;
    if (obs.is_case() && !obs.window.exact()) {
      if (next_latent >= state.latent_days.size())
        throw std::domain_error("no latent date for censored case " + obs.id);
      date = state.latent_days[next_latent++];
    } else {
      date = obs.window.t_from;
    }
    double eta = linear_predictor(obs, date, state, design.span);
    total += double(obs.label) * eta - detail::log1pexp(eta);
  }
  if (next_latent != state.latent_days.size())
    throw std::domain_error("latent date list longer than censored case count");
  return total;
}

namespace detail {
// Penalty sums of the two intrinsic priors (up to the tau/2 factor).
inline double rw2_penalty(const std::vector<double>& d) {
  double s = 0.0;
  for (std::size_t w = 2; w < d.size(); ++w) {
    double r = d[w] - 2.0 * d[w - 1] + d[w - 2];
    s += r * r;
  }
  return s;
}

inline double car_penalty(const std::vector<double>& u, const BoroughGraph& graph) {
  double s = 0.0;
  for (const auto& [a, b] : graph.edges) {
    double diff = u[std::size_t(a - 1)] - u[std::size_t(b - 1)];
    s += diff * diff;
  }
  return s;
}

inline double log_gamma_density(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) -
         rate * x;
}
}  // namespace detail

// Log prior density. The intrinsic RW2 and ICAR pieces are improper; their
// log tau coefficients use the rank of the structure matrix (W-2 and B-1)
// so the conjugate precision updates come out right. Constant terms are kept
// where proper so the value is a genuine log density in those coordinates.
inline double log_prior(const ModelState& state, const BoroughGraph& graph,
                        const PriorSpec& priors) {
  priors.check();
  if (!(state.tau_delta > 0.0 && state.tau_epsilon > 0.0 && state.tau_u > 0.0 &&
        state.tau_v > 0.0))
    throw std::domain_error("precisions must be positive");

  const double half_log_2pi = 0.5 * std::log(2.0 * M_PI);
  const int W = int(state.delta.size());
  const int B = int(state.u.size());
  double lp = 0.0;

  // fixed effects: alpha and the six non-reference betas
  const double fv = priors.fixed_effect_variance;
  lp += -0.5 * state.alpha * state.alpha / fv - half_log_2pi - 0.5 * std::log(fv);
  for (int k = 1; k < 7; ++k)
    lp += -0.5 * state.beta[std::size_t(k)] * state.beta[std::size_t(k)] / fv -
          half_log_2pi - 0.5 * std::log(fv);

  const int rank_rw2 = std::max(0, W - 2);
  lp += 0.5 * rank_rw2 * std::log(state.tau_delta) - rank_rw2 * half_log_2pi -
        0.5 * state.tau_delta * detail::rw2_penalty(state.delta);

  double eps_ss = 0.0;
  for (double e : state.epsilon) eps_ss += e * e;
  lp += 0.5 * W * std::log(state.tau_epsilon) - W * half_log_2pi -
        0.5 * state.tau_epsilon * eps_ss;

  const int rank_car = std::max(0, B - 1);
  lp += 0.5 * rank_car * std::log(state.tau_u) - rank_car * half_log_2pi -
        0.5 * state.tau_u * detail::car_penalty(state.u, graph);

  double v_ss = 0.0;
  for (double x : state.v) v_ss += x * x;
  lp += 0.5 * B * std::log(state.tau_v) - B * half_log_2pi - 0.5 * state.tau_v * v_ss;

  lp += detail::log_gamma_density(state.tau_delta, priors.gamma_delta_shape,
                                  priors.gamma_delta_rate);
  lp += detail::log_gamma_density(state.tau_epsilon, priors.gamma_epsilon_shape,
                                  priors.gamma_epsilon_rate);
  lp += detail::log_gamma_density(state.tau_u, priors.gamma_u_shape, priors.gamma_u_rate);
  lp += detail::log_gamma_density(state.tau_v, priors.gamma_v_shape, priors.gamma_v_rate);
  return lp;
}

// The latent-date prior is uniform inside each window, a constant, so the
// log posterior is just likelihood + prior.
inline double log_posterior(const StudyDesign& design, const ModelState& state,
                            const PriorSpec& priors) {
  return log_likelihood(design, state) + log_prior(state, design.graph, priors);
}

// Flat coordinate layout for the continuous parameters, used by the gradient
// and its finite-difference checks:
//   [alpha, beta_Tue..beta_Sun, delta_1..W, eps_1..W, u_1..B, v_1..B,
//    tau_delta, tau_epsilon, tau_u, tau_v]
inline std::vector<double> pack_state(const ModelState& state) {
  std::vector<double> x;
  x.reserve(7 + 2 * state.delta.size() + 2 * state.u.size() + 4);
  x.push_back(state.alpha);
  for (int k = 1; k < 7; ++k) x.push_back(state.beta[std::size_t(k)]);
  x.insert(x.end(), state.delta.begin(), state.delta.end());
  x.insert(x.end(), state.epsilon.begin(), state.epsilon.end());
  x.insert(x.end(), state.u.begin(), state.u.end());
  x.insert(x.end(), state.v.begin(), state.v.end());
  x.push_back(state.tau_delta);
  x.push_back(state.tau_epsilon);
  x.push_back(state.tau_u);
  x.push_back(state.tau_v);
  return x;
}

inline void unpack_state(const std::vector<double>& x, ModelState& state) {
  const std::size_t W = state.delta.size(), B = state.u.size();
  if (x.size() != 7 + 2 * W + 2 * B + 4)
    throw std::invalid_argument("packed state has wrong length");
  std::size_t p = 0;
  state.alpha = x[p++];
  state.beta[0] = 0.0;
  for (int k = 1; k < 7; ++k) state.beta[std::size_t(k)] = x[p++];
  for (std::size_t w = 0; w < W; ++w) state.delta[w] = x[p++];
  for (std::size_t w = 0; w < W; ++w) state.epsilon[w] = x[p++];
  for (std::size_t b = 0; b < B; ++b) state.u[b] = x[p++];
  for (std::size_t b = 0; b < B; ++b) state.v[b] = x[p++];
  state.tau_delta = x[p++];
  state.tau_epsilon = x[p++];
  state.tau_u = x[p++];
  state.tau_v = x[p++];
}

// Analytic gradient of log_posterior in pack_state coordinates.
inline std::vector<double> grad_log_posterior(const StudyDesign& design,
                                              const ModelState& state,
                                              const PriorSpec& priors) {
  priors.check();
  const std::size_t W = state.delta.size(), B = state.u.size();
  const std::size_t off_beta = 1, off_delta = 7, off_eps = off_delta + W,
                    off_u = off_eps + W, off_v = off_u + B, off_tau = off_v + B;
  std::vector<double> g(off_tau + 4, 0.0);

  // likelihood part: each observation contributes (y - pi) to every additive
  // component of its eta
  std::size_t next_latent = 0;
  for (const auto& obs : design.observations) {
    int date = (obs.is_case() && !obs.window.exact())
                   ? state.latent_days.at(next_latent++)
                   : obs.window.t_from;
    double resid =
        double(obs.label) -
        detail::inv_logit(linear_predictor(obs, date, state, design.span));
    g[0] += resid;
    int dow = day_of_week(date, design.span);
    if (dow > 1) g[off_beta + std::size_t(dow - 2)] += resid;
    std::size_t w0 = std::size_t(week_of(date, design.span) - 1);
    g[off_delta + w0] += resid;
    g[off_eps + w0] += resid;
    g[off_u + std::size_t(obs.borough - 1)] += resid;
    g[off_v + std::size_t(obs.borough - 1)] += resid;
  }

  // prior part
  const double fv = priors.fixed_effect_variance;
  g[0] -= state.alpha / fv;
  for (int k = 1; k < 7; ++k)
    g[off_beta + std::size_t(k - 1)] -= state.beta[std::size_t(k)] / fv;

  // RW2: d/d delta_j of -(tau/2) sum r_w^2, r_w = delta_w - 2 delta_{w-1} + delta_{w-2}
  std::vector<double> r(W, 0.0);
  for (std::size_t w = 2; w < W; ++w)
    r[w] = state.delta[w] - 2.0 * state.delta[w - 1] + state.delta[w - 2];
  for (std::size_t j = 0; j < W; ++j) {
    double dpen = r[j];
    if (j + 1 < W) dpen -= 2.0 * r[j + 1];
    if (j + 2 < W) dpen += r[j + 2];
    g[off_delta + j] -= state.tau_delta * dpen;
  }

  for (std::size_t w = 0; w < W; ++w)
    g[off_eps + w] -= state.tau_epsilon * state.epsilon[w];

  for (const auto& [a, b] : design.graph.edges) {
    double diff = state.u[std::size_t(a - 1)] - state.u[std::size_t(b - 1)];
    g[off_u + std::size_t(a - 1)] -= state.tau_u * diff;
    g[off_u + std::size_t(b - 1)] += state.tau_u * diff;
  }

  for (std::size_t b = 0; b < B; ++b) g[off_v + b] -= state.tau_v * state.v[b];

  // precisions: intrinsic-field rank terms plus the Gamma prior
  const double s_delta = detail::rw2_penalty(state.delta);
  const double s_u = detail::car_penalty(state.u, design.graph);
  double eps_ss = 0.0, v_ss = 0.0;
  for (double e : state.epsilon) eps_ss += e * e;
  for (double x : state.v) v_ss += x * x;

  auto tau_grad = [](double tau, double rank, double penalty, double shape, double rate) {
    return 0.5 * rank / tau - 0.5 * penalty + (shape - 1.0) / tau - rate;
  };
  g[off_tau + 0] = tau_grad(state.tau_delta, std::max(0, int(W) - 2), s_delta,
                            priors.gamma_delta_shape, priors.gamma_delta_rate);
  g[off_tau + 1] = tau_grad(state.tau_epsilon, double(W), eps_ss,
                            priors.gamma_epsilon_shape, priors.gamma_epsilon_rate);
  g[off_tau + 2] = tau_grad(state.tau_u, std::max(0, int(B) - 1), s_u,
                            priors.gamma_u_shape, priors.gamma_u_rate);
  g[off_tau + 3] = tau_grad(state.tau_v, double(B), v_ss, priors.gamma_v_shape,
                            priors.gamma_v_rate);
  return g;
}

// Random access into the pack_state layout without materializing the vector.
inline double state_coord(const ModelState& state, std::size_t p) {
  const std::size_t W = state.delta.size(), B = state.u.size();
  if (p == 0) return state.alpha;
  p -= 1;
  if (p < 6) return state.beta[p + 1];
  p -= 6;
  if (p < W) return state.delta[p];
  p -= W;
  if (p < W) return state.epsilon[p];
  p -= W;
  if (p < B) return state.u[p];
  p -= B;
  if (p < B) return state.v[p];
  p -= B;
  switch (p) {
    case 0: return state.tau_delta;
    case 1: return state.tau_epsilon;
    case 2: return state.tau_u;
    case 3: return state.tau_v;
  }
  throw std::out_of_range("state coordinate index");
}

inline std::vector<std::string> param_names(int n_weeks, int n_boroughs) {
  std::vector<std::string> names;
  names.reserve(std::size_t(7 + 2 * n_weeks + 2 * n_boroughs + 4));
  names.emplace_back("alpha");
  for (const char* d : {"Tue", "Wed", "Thu", "Fri", "Sat", "Sun"})
    names.push_back(std::string("beta_") + d);
  for (int w = 1; w <= n_weeks; ++w) names.push_back("delta_" + std::to_string(w));
  for (int w = 1; w <= n_weeks; ++w) names.push_back("epsilon_" + std::to_string(w));
  for (int b = 1; b <= n_boroughs; ++b) names.push_back("u_" + std::to_string(b));
  for (int b = 1; b <= n_boroughs; ++b) names.push_back("v_" + std::to_string(b));
  for (const char* t : {"tau_delta", "tau_epsilon", "tau_u", "tau_v"})
    names.emplace_back(t);
  return names;
}

// pi_i for every observation at the state's exact/latent dates, in design order.
inline std::vector<double> per_obs_pi(const StudyDesign& design, const ModelState& state) {
  std::vector<double> pi;
  pi.reserve(design.observations.size());
  std::size_t next_latent = 0;
  for (const auto& obs : design.observations) {
    int date = (obs.is_case() && !obs.window.exact())
                   ? state.latent_days.at(next_latent++)
                   : obs.window.t_from;
    pi.push_back(detail::inv_logit(linear_predictor(obs, date, state, design.span)));
  }
  return pi;
}

}  // namespace aorist
