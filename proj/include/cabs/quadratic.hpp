#pragma once

#include <cmath>
#include <vector>

#include "cabs/errors.hpp"
#include "cabs/matrix.hpp"
#include "cabs/model.hpp"
#include "cabs/rng.hpp"

namespace cabs {

// Noisy quadratic test problem: F(w) = f_star + 1/2 (w-w*)^T H (w-w*), with
// H = curvature * I when hessian is empty, and per-example gradients
// grad F(w) + eta, eta ~ N(0, diag(sigma_sq)). Because curvature, minimum
// and noise level are known exactly, this is the problem on which policy
// behaviour can be checked against closed forms.
struct QuadraticOracleSpec {
  double curvature = 1.0;          // h; used when hessian is empty
  Matrix hessian;                  // optional full PSD Hessian
  std::vector<double> w_star;
  double f_star = 0.0;
  std::vector<double> sigma_sq;    // per-coordinate noise variance
  double mu_sc = 0.0;              // smallest Hessian eigenvalue
  double lipschitz = 0.0;          // largest Hessian eigenvalue

  std::size_t dim() const { return w_star.size(); }

  bool scalar() const { return hessian.empty(); }

  void validate() const {
    require(!w_star.empty(), "quadratic: empty w_star");
    require(sigma_sq.size() == w_star.size(),
            "quadratic: sigma_sq dimension mismatch");
    for (double s : sigma_sq) require(s >= 0.0, "quadratic: negative variance");
    if (scalar()) {
      require(curvature > 0.0, "quadratic: curvature must be > 0");
      require(mu_sc == curvature && lipschitz == curvature,
              "quadratic: scalar case has mu_sc == lipschitz == curvature");
    } else {
      require(hessian.rows == dim() && hessian.cols == dim(),
              "quadratic: hessian dimension mismatch");
      require(mu_sc >= 0.0 && lipschitz >= mu_sc,
              "quadratic: need 0 <= mu_sc <= lipschitz");
    }
  }
};

inline QuadraticOracleSpec make_scalar_quadratic(double h,
                                                 std::vector<double> w_star,
                                                 double f_star,
                                                 std::vector<double> sigma_sq) {
  QuadraticOracleSpec q;
  q.curvature = h;
  q.w_star = std::move(w_star);
  q.f_star = f_star;
  q.sigma_sq = std::move(sigma_sq);
  q.mu_sc = h;
  q.lipschitz = h;
  q.validate();
  return q;
}

inline double quadratic_loss(const QuadraticOracleSpec& q,
                             const std::vector<double>& w) {
  require(w.size() == q.dim(), "quadratic_loss: dimension mismatch");
  double acc = 0.0;
  if (q.scalar()) {
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double d = w[j] - q.w_star[j];
      acc += d * d;
    }
    return q.f_star + 0.5 * q.curvature * acc;
  }
  for (std::size_t i = 0; i < q.dim(); ++i) {
    double hd = 0.0;
    for (std::size_t j = 0; j < q.dim(); ++j) {
      hd += q.hessian(i, j) * (w[j] - q.w_star[j]);
    }
    acc += (w[i] - q.w_star[i]) * hd;
  }
  return q.f_star + 0.5 * acc;
}

inline std::vector<double> quadratic_grad(const QuadraticOracleSpec& q,
                                          const std::vector<double>& w) {
  require(w.size() == q.dim(), "quadratic_grad: dimension mismatch");
  std::vector<double> g(w.size(), 0.0);
  if (q.scalar()) {
    for (std::size_t j = 0; j < w.size(); ++j) {
      g[j] = q.curvature * (w[j] - q.w_star[j]);
    }
    return g;
  }
  for (std::size_t i = 0; i < q.dim(); ++i) {
    for (std::size_t j = 0; j < q.dim(); ++j) {
      g[i] += q.hessian(i, j) * (w[j] - q.w_star[j]);
    }
  }
  return g;
}

inline double quadratic_grad_norm_sq(const QuadraticOracleSpec& q,
                                     const std::vector<double>& w) {
  double acc = 0.0;
  for (double v : quadratic_grad(q, w)) acc += v * v;
  return acc;
}

// Draws m per-example gradients grad F(w) + eta_i and reports their mean and
// mean square, exactly the statistics a dataset batch would produce. The loss
// is evaluated exactly (the noise sits in the gradients only), so the batch
// mean gradient is distributed N(grad F(w), diag(sigma_sq)/m).
inline BatchEvaluation sample_noisy_gradient(const QuadraticOracleSpec& q,
                                             const std::vector<double>& w,
                                             std::size_t m, Rng& rng) {
  q.validate();
  require(m >= 1, "sample_noisy_gradient: need m >= 1");
  const std::vector<double> mean = quadratic_grad(q, w);
  BatchEvaluation ev;
  ev.loss = quadratic_loss(q, w);
  ev.total_loss = ev.loss;
  ev.loss_grad.assign(q.dim(), 0.0);
  ev.q.assign(q.dim(), 0.0);
  const double inv_m = 1.0 / static_cast<double>(m);
  std::vector<double> sd(q.dim());
  for (std::size_t j = 0; j < q.dim(); ++j) sd[j] = std::sqrt(q.sigma_sq[j]);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < q.dim(); ++j) {
      const double gij = mean[j] + sd[j] * rng.normal();
      ev.loss_grad[j] += gij * inv_m;
      ev.q[j] += gij * gij * inv_m;
    }
  }
  ev.grad = ev.loss_grad;
  if (!std::isfinite(ev.loss)) {
    throw numerical_error("non-finite loss in quadratic evaluation");
  }
  for (double v : ev.grad) {
    if (!std::isfinite(v)) {
      throw numerical_error("non-finite gradient in quadratic evaluation");
    }
  }
  return ev;
}

}  // namespace cabs
