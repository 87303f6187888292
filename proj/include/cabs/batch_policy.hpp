#pragma once

#include <cmath>
#include <string>

#include "cabs/errors.hpp"

namespace cabs {

// Floors keeping the rule denominators away from zero. The loss floor also
// makes the very first prediction well-defined while the EMAs are still at
// their zero init.
constexpr double kLossFloor = 1e-8;       // on smoothed loss denominators
constexpr double kGradNormFloor = 1e-12;  // on squared gradient norms

enum class PolicyKind {
  constant,
  geometric,
  noisy_grad_norm,
  lipschitz_oracle,
  cabs,
  cabs_with_fstar,
};

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::constant: return "constant";
    case PolicyKind::geometric: return "geometric";
    case PolicyKind::noisy_grad_norm: return "noisy-grad-norm";
    case PolicyKind::lipschitz_oracle: return "lipschitz-oracle";
    case PolicyKind::cabs: return "cabs";
    case PolicyKind::cabs_with_fstar: return "cabs-with-fstar";
  }
  return "?";
}

inline bool parse_policy_kind(const std::string& s, PolicyKind& out) {
  if (s == "constant") out = PolicyKind::constant;
  else if (s == "geometric") out = PolicyKind::geometric;
  else if (s == "noisy-grad-norm") out = PolicyKind::noisy_grad_norm;
  else if (s == "lipschitz-oracle") out = PolicyKind::lipschitz_oracle;
  else if (s == "cabs") out = PolicyKind::cabs;
  else if (s == "cabs-with-fstar") out = PolicyKind::cabs_with_fstar;
  else return false;
  return true;
}

// The coupled rule: m = alpha * xi / F_avg, batch size proportional to the
// noise-to-loss ratio scaled by the step size. Grows as the loss falls.
inline double cabs_batch_size(double alpha, double xi, double f_avg) {
  require(alpha >= 0.0 && xi >= 0.0, "cabs rule: negative inputs");
  return alpha * xi / std::max(f_avg, kLossFloor);
}

// Variant for problems whose minimum loss f_star is known and nonzero.
inline double cabs_with_fstar_batch_size(double alpha, double xi, double f_avg,
                                         double f_star) {
  require(alpha >= 0.0 && xi >= 0.0, "cabs rule: negative inputs");
  return alpha * xi / std::max(f_avg - f_star, kLossFloor);
}

// Competitor rule: keep the relative gradient noise below theta,
// m = trace / (theta^2 * |g|^2) with a smoothed gradient norm.
inline double noisy_grad_norm_batch_size(double theta, double trace,
                                         double grad_norm_sq) {
  require(theta > 0.0 && theta <= 1.0, "noisy-grad-norm: theta not in (0, 1]");
  require(trace >= 0.0, "noisy-grad-norm: negative trace");
  return trace / (theta * theta * std::max(grad_norm_sq, kGradNormFloor));
}

// Gain-per-cost optimum when the smoothness constant L and the true gradient
// norm are known: m = (2 L alpha / (2 - L alpha)) * trace / |grad F|^2.
// Requires L * alpha < 2; otherwise no batch size gives expected descent.
inline double lipschitz_oracle_batch_size(double lipschitz, double alpha,
                                          double trace,
                                          double true_grad_norm_sq) {
  require(lipschitz > 0.0 && alpha > 0.0, "lipschitz-oracle: need L, alpha > 0");
  require(trace >= 0.0, "lipschitz-oracle: negative trace");
  require(true_grad_norm_sq > 0.0, "lipschitz-oracle: zero gradient norm");
  const double la = lipschitz * alpha;
  if (la >= 2.0) {
    throw infeasible_step_error(
        "lipschitz-oracle: L * alpha >= 2, no expected descent possible");
  }
  return (2.0 * la / (2.0 - la)) * trace / true_grad_norm_sq;
}

// Open-loop growth: m = m0 * rho^step.
inline double geometric_batch_size(long long step, long long m0, double rho) {
  require(step >= 0, "geometric: negative step");
  require(m0 >= 1, "geometric: m0 must be >= 1");
  require(rho > 1.0, "geometric: rho must be > 1");
  return static_cast<double>(m0) * std::pow(rho, static_cast<double>(step));
}

// Rounds half away from zero, then clamps to [m_min, m_max]. Non-finite
// targets saturate at the corresponding end.
inline long long round_and_clip(double m, long long m_min, long long m_max) {
  require(m_min <= m_max, "round_and_clip: m_min > m_max");
  if (std::isnan(m)) return m_min;
  if (m >= static_cast<double>(m_max)) return m_max;
  if (m <= static_cast<double>(m_min)) return m_min;
  return std::llround(m);  // llround ties away from zero
}

struct BatchSizePolicy {
  PolicyKind kind = PolicyKind::constant;
  double alpha = 0.1;      // step size the adaptive rules are coupled to
  long long m_const = 32;  // constant kind
  long long m0 = 16;       // geometric kind
  double rho = 1.1;        // geometric kind
  double theta = 1.0;      // noisy-grad-norm kind
  double lipschitz = 1.0;  // lipschitz-oracle kind
  double f_star = 0.0;     // cabs-with-fstar kind
  long long m_min = 16;
  long long m_max = 4096;

  void validate() const {
    require(std::isfinite(alpha) && alpha >= 0.0, "policy: bad alpha");
    // m_min >= 2 so the batch variance estimate is defined at the floor.
    require(m_min >= 2, "policy: m_min must be >= 2");
    require(m_max >= m_min, "policy: m_max < m_min");
    switch (kind) {
      case PolicyKind::constant:
        require(m_const >= 1, "policy: constant batch size must be >= 1");
        break;
      case PolicyKind::geometric:
        require(m0 >= m_min, "policy: geometric m0 below m_min");
        require(rho > 1.0, "policy: geometric rho must be > 1");
        break;
      case PolicyKind::noisy_grad_norm:
        require(theta > 0.0 && theta <= 1.0, "policy: theta not in (0, 1]");
        break;
      case PolicyKind::lipschitz_oracle:
        require(lipschitz > 0.0, "policy: lipschitz constant must be > 0");
        if (lipschitz * alpha >= 2.0) {
          throw infeasible_step_error(
              "policy: L * alpha >= 2 admits no expected descent");
        }
        break;
      case PolicyKind::cabs:
        break;
      case PolicyKind::cabs_with_fstar:
        require(f_star >= 0.0, "policy: f_star must be >= 0");
        break;
    }
  }

  bool needs_exact_grad_norm() const {
    return kind == PolicyKind::lipschitz_oracle;
  }
};

// Everything a rule may consume when predicting the next batch size.
struct PolicyInputs {
  double xi = 0.0;                 // smoothed variance trace
  double f_avg = 0.0;              // smoothed loss
  double grad_norm_sq_avg = 0.0;   // smoothed |g|^2 (competitor rule)
  double exact_grad_norm_sq = 0.0; // |grad F|^2 from an oracle problem
  long long step = 0;              // completed steps
};

// Pre-round, pre-clip target for the next batch size.
inline double target_batch_size(const BatchSizePolicy& p,
                                const PolicyInputs& in) {
  switch (p.kind) {
    case PolicyKind::constant:
      return static_cast<double>(p.m_const);
    case PolicyKind::geometric:
      return geometric_batch_size(in.step, p.m0, p.rho);
    case PolicyKind::noisy_grad_norm:
      return noisy_grad_norm_batch_size(p.theta, in.xi, in.grad_norm_sq_avg);
    case PolicyKind::lipschitz_oracle:
      return lipschitz_oracle_batch_size(
          p.lipschitz, p.alpha, in.xi,
          std::max(in.exact_grad_norm_sq, kGradNormFloor));
    case PolicyKind::cabs:
      return cabs_batch_size(p.alpha, in.xi, in.f_avg);
    case PolicyKind::cabs_with_fstar:
      return cabs_with_fstar_batch_size(p.alpha, in.xi, in.f_avg, p.f_star);
  }
  throw std::invalid_argument("target_batch_size: unknown policy kind");
}

}  // namespace cabs
