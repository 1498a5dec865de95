#pragma once

// In-sample classification assessment: confusion matrices at a probability
// cutoff, MCC and F1, their posterior distributions over MCMC draws, and
// grouped summaries of the posterior mean event probabilities.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aorist/domain.hpp"
#include "aorist/model.hpp"
#include "aorist/sampler.hpp"

namespace aorist {

struct ConfusionMatrix {
  long tp = 0, fp = 0, fn = 0, tn = 0;

  long total() const { return tp + fp + fn + tn; }
};

// Strict-inequality classifier: prob > c is a predicted positive.
inline ConfusionMatrix confusion(const std::vector<int>& labels,
                                 const std::vector<double>& probs, double c) {
  if (labels.size() != probs.size())
    throw std::invalid_argument("labels and probabilities differ in length");
  if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("cutoff must lie in (0,1)");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    bool predicted = probs[i] > c;
    if (labels[i] == 1)
      (predicted ? m.tp : m.fn)++;
    else
      (predicted ? m.fp : m.tn)++;
  }
  return m;
}

// Matthews correlation coefficient; 0 by convention when any marginal is
// empty. The denominator product is formed in 128-bit integers: four factors
// of ~1e5 overflow int64 well before double rounding would bite.
inline double mcc(const ConfusionMatrix& m) {
  long long tp = m.tp, fp = m.fp, fn = m.fn, tn = m.tn;
  long long f1p = tp + fp, f2p = tp + fn, f3p = tn + fp, f4p = tn + fn;
  if (f1p == 0 || f2p == 0 || f3p == 0 || f4p == 0) return 0.0;
  __int128 denom2 = __int128(f1p) * f2p;
  denom2 *= f3p;
  denom2 *= f4p;
  long double num = (long double)(tp)*tn - (long double)(fp)*fn;
  return double(num / sqrtl((long double)denom2));
}

inline double f1(const ConfusionMatrix& m) {
  long long denom = 2 * m.tp + m.fp + m.fn;
  if (denom == 0) return 0.0;
  return double(2.0L * m.tp / (long double)denom);
}

struct MetricDistribution {
  double cutoff = 0.0;
  std::vector<double> samples;  // sorted ascending
  double q025 = 0.0, q975 = 0.0;
};

enum class Metric { mcc, f1 };

inline std::vector<double> default_cutoffs() {
  return {0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35};
}

// Posterior distribution of a metric: every retained draw yields one metric
// value per cutoff, with censored cases classified at that draw's latent
// dates. pi is recomputed per draw rather than stored densely.
inline std::vector<MetricDistribution> metric_posterior(const PosteriorSamples& samples,
                                                        const StudyDesign& design,
                                                        const std::vector<double>& cutoffs,
                                                        Metric metric) {
  if (samples.draws.empty()) throw std::domain_error("no draws");
  for (double c : cutoffs)
    if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("cutoff must lie in (0,1)");

  std::vector<int> labels;
  labels.reserve(design.observations.size());
  for (const auto& obs : design.observations) labels.push_back(obs.label);

  std::vector<MetricDistribution> out(cutoffs.size());
  for (std::size_t k = 0; k < cutoffs.size(); ++k) {
    out[k].cutoff = cutoffs[k];
    out[k].samples.reserve(samples.draws.size());
  }
  for (const auto& s : samples.draws) {
    auto pi = per_obs_pi(design, s);
    for (std::size_t k = 0; k < cutoffs.size(); ++k) {
      auto m = confusion(labels, pi, cutoffs[k]);
      out[k].samples.push_back(metric == Metric::mcc ? mcc(m) : f1(m));
    }
  }
  for (auto& dist : out) {
    std::sort(dist.samples.begin(), dist.samples.end());
    dist.q025 = detail::quantile_type7(dist.samples, 0.025);
    dist.q975 = detail::quantile_type7(dist.samples, 0.975);
  }
  return out;
}

enum class PiSplit { case_vs_control, certain_vs_uncertain };

struct PiGroupSummary {
  std::string group;
  long n = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double q025 = std::numeric_limits<double>::quiet_NaN();
  double q500 = std::numeric_limits<double>::quiet_NaN();
  double q975 = std::numeric_limits<double>::quiet_NaN();
  std::array<long, 20> hist{};  // equal bins over [0,1]
};

namespace detail {
inline PiGroupSummary summarize_pi_group(std::string name, std::vector<double> values) {
  PiGroupSummary g;
  g.group = std::move(name);
  g.n = long(values.size());
  if (values.empty()) return g;
  double s = 0.0;
  for (double x : values) {
    s += x;
    int bin = std::min(19, int(x * 20.0));
    g.hist[std::size_t(std::max(0, bin))]++;
  }
  g.mean = s / double(values.size());
  std::sort(values.begin(), values.end());
  g.q025 = quantile_type7(values, 0.025);
  g.q500 = quantile_type7(values, 0.5);
  g.q975 = quantile_type7(values, 0.975);
  return g;
}
}  // namespace detail

// Posterior-mean pi split into two groups. case_vs_control covers all
// observations; certain_vs_uncertain compares cases only (controls carry no
// temporal uncertainty by construction).
inline std::pair<PiGroupSummary, PiGroupSummary> pi_hat_split(
    const PosteriorSamples& samples, const StudyDesign& design, PiSplit split) {
  auto pi_hat = posterior_mean_pi(samples, design);
  std::vector<double> a, b;
  for (std::size_t i = 0; i < design.observations.size(); ++i) {
    const auto& obs = design.observations[i];
    if (split == PiSplit::case_vs_control) {
      (obs.is_case() ? a : b).push_back(pi_hat[i]);
    } else {
      if (!obs.is_case()) continue;
      (obs.window.exact() ? a : b).push_back(pi_hat[i]);
    }
  }
  if (split == PiSplit::case_vs_control)
    return {detail::summarize_pi_group("case", std::move(a)),
            detail::summarize_pi_group("control", std::move(b))};
  return {detail::summarize_pi_group("certain", std::move(a)),
          detail::summarize_pi_group("uncertain", std::move(b))};
}

}  // namespace aorist
