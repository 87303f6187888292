#pragma once

#include <algorithm>
#include <vector>

#include "cabs/errors.hpp"

namespace cabs {

// Per-coordinate gradient variance estimate. trace is the l1 norm of s,
// i.e. the estimated trace of the gradient covariance.
struct VarianceEstimate {
  std::vector<double> s;
  double trace = 0.0;
};

// S_j = max(q_j - g_j^2, 0): biased sample variance from the batch mean g and
// batch mean square q of the per-example gradients. For i.i.d. draws its
// expectation is (m-1)/m * sigma_j^2; no Bessel correction here (see
// bessel_correct below for the opt-in corrected variant). The clamp guards
// against cancellation pushing a coordinate a few ulps negative.
inline VarianceEstimate sample_variance(const std::vector<double>& q,
                                        const std::vector<double>& g) {
  require(q.size() == g.size(), "sample_variance: dimension mismatch");
  VarianceEstimate est;
  est.s.resize(q.size());
  for (std::size_t j = 0; j < q.size(); ++j) {
    est.s[j] = std::max(q[j] - g[j] * g[j], 0.0);
    est.trace += est.s[j];
  }
  return est;
}

// Rescales by m/(m-1) to undo the mean-subtraction bias. Off by default in
// the training loop.
inline VarianceEstimate bessel_correct(VarianceEstimate est, std::size_t m) {
  require(m >= 2, "bessel_correct: need m >= 2");
  const double f =
      static_cast<double>(m) / static_cast<double>(m - 1);
  est.trace = 0.0;
  for (double& v : est.s) {
    v *= f;
    est.trace += v;
  }
  return est;
}

// Exponential moving averages of the batch loss and the variance trace.
// Zero-initialized and deliberately not bias-corrected: the early lowball
// keeps the first predicted batch sizes at the floor, which is the intended
// warm-up behaviour.
struct SmoothedStats {
  double xi = 0.0;     // smoothed trace of the gradient covariance
  double f_avg = 0.0;  // smoothed batch loss
  double mu = 0.95;

  void validate() const {
    require(mu >= 0.0 && mu < 1.0, "smoothed stats: mu must be in [0, 1)");
  }
};

inline double ema_step(double old_value, double sample, double mu) {
  return mu * old_value + (1.0 - mu) * sample;
}

inline SmoothedStats update_ema(SmoothedStats stats, double f, double trace) {
  stats.validate();
  stats.xi = ema_step(stats.xi, trace, stats.mu);
  stats.f_avg = ema_step(stats.f_avg, f, stats.mu);
  return stats;
}

}  // namespace cabs
