#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cabs/dataset.hpp"
#include "cabs/errors.hpp"
#include "cabs/matrix.hpp"
#include "cabs/rng.hpp"

namespace cabs {

enum class ModelKind { quadratic, logistic_regression, mlp };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::quadratic: return "quadratic";
    case ModelKind::logistic_regression: return "logistic-regression";
    case ModelKind::mlp: return "mlp";
  }
  return "?";
}

// Architecture + loss description for the dataset-backed models. layers holds
// the widths including input and output, e.g. {784, 64, 10}. Hidden layers are
// ReLU; the output layer feeds softmax cross-entropy. lambda is an L2 penalty
// on weight matrices only (biases are not penalized).
struct ModelSpec {
  ModelKind kind = ModelKind::logistic_regression;
  std::vector<std::size_t> layers;
  double lambda = 0.0;

  void validate() const {
    require(lambda >= 0.0, "model: lambda must be >= 0");
    if (kind == ModelKind::quadratic) {
      require(lambda == 0.0, "model: quadratic kind takes no regularizer");
      return;
    }
    require(layers.size() >= 2, "model: need input and output widths");
    if (kind == ModelKind::logistic_regression) {
      require(layers.size() == 2,
              "model: logistic-regression is a single dense layer");
    }
    for (std::size_t w : layers) require(w >= 1, "model: zero-width layer");
    require(layers.back() >= 2, "model: need at least 2 output classes");
  }

  std::size_t num_dense_layers() const { return layers.size() - 1; }

  // Flat parameter vector layout: per layer, W (n_in x n_out, row-major)
  // followed by the bias row b (n_out).
  std::size_t param_count() const {
    std::size_t d = 0;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
      d += (layers[l] + 1) * layers[l + 1];
    }
    return d;
  }

  std::size_t weight_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) {
      off += (layers[l] + 1) * layers[l + 1];
    }
    return off;
  }
  std::size_t bias_offset(std::size_t layer) const {
    return weight_offset(layer) + layers[layer] * layers[layer + 1];
  }
};

// One stochastic evaluation. grad drives the update and includes the L2
// term; loss_grad and q come from the unregularized per-example losses, and
// they are the pair the variance estimator is allowed to combine. loss is the
// unregularized batch mean, total_loss adds the penalty.
struct BatchEvaluation {
  double loss = 0.0;
  double total_loss = 0.0;
  std::vector<double> grad;
  std::vector<double> loss_grad;
  std::vector<double> q;  // mean per-example squared gradient, per coordinate
};

// Forward-pass cache for one dense layer: the input activations and the
// pre-activations, everything the backward sweep needs.
struct DenseLayerCache {
  Matrix a;  // m x n_in
  Matrix z;  // m x n_out
};

// Sum over examples of the squared per-example weight gradients, computed as
// a single matrix product of elementwise squares: entry (j,k) equals
// sum_i a(i,j)^2 * dz(i,k)^2. Cost is one extra matmul instead of
// materializing m individual gradients.
inline Matrix fused_second_moment(const Matrix& a, const Matrix& dz) {
  require(a.rows == dz.rows, "fused_second_moment: row counts differ");
  Matrix out(a.cols, dz.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) {
      const double aa = a(i, j) * a(i, j);
      if (aa == 0.0) continue;
      for (std::size_t k = 0; k < dz.cols; ++k) {
        out(j, k) += aa * dz(i, k) * dz(i, k);
      }
    }
  }
  return out;
}

namespace detail {

inline void add_bias_row(Matrix& z, const double* b) {
  for (std::size_t i = 0; i < z.rows; ++i) {
    for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += b[j];
  }
}

// Row-wise softmax cross-entropy. Returns the mean per-example loss and
// fills dz with the per-example gradients p - onehot(y) -- gradients of the
// individual losses, not of the mean.
inline double softmax_cross_entropy(const Matrix& logits,
                                    const std::vector<int>& y, Matrix& dz) {
  const std::size_t m = logits.rows, c = logits.cols;
  dz = Matrix(m, c);
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double zmax = logits(i, 0);
    for (std::size_t j = 1; j < c; ++j) zmax = std::max(zmax, logits(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      dz(i, j) = std::exp(logits(i, j) - zmax);
      denom += dz(i, j);
    }
    for (std::size_t j = 0; j < c; ++j) dz(i, j) /= denom;
    const double p = std::max(dz(i, static_cast<std::size_t>(y[i])), 1e-12);
    loss -= std::log(p);
    dz(i, static_cast<std::size_t>(y[i])) -= 1.0;
  }
  return loss / static_cast<double>(m);
}

inline Matrix gather_rows(const Dataset& ds,
                          const std::vector<std::size_t>& batch) {
  Matrix x(batch.size(), ds.dim());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    require(batch[i] < ds.size(), "evaluate_batch: index out of range");
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      x(i, j) = ds.features(batch[i], j);
    }
  }
  return x;
}

// Forward through all dense layers; caches are filled iff keep_caches.
inline Matrix forward(const ModelSpec& model, const std::vector<double>& params,
                      Matrix x, std::vector<DenseLayerCache>* caches) {
  const std::size_t L = model.num_dense_layers();
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t n_in = model.layers[l], n_out = model.layers[l + 1];
    Matrix w(n_in, n_out);
    std::copy_n(params.begin() +
                    static_cast<std::ptrdiff_t>(model.weight_offset(l)),
                n_in * n_out, w.data.begin());
    Matrix z = matmul(x, w);
    add_bias_row(z, params.data() + model.bias_offset(l));
    if (caches) {
      (*caches)[l].a = x;
      (*caches)[l].z = z;
    }
    if (l + 1 < L) {  // hidden layer: ReLU (derivative taken as 0 at 0)
      x = z;
      for (double& v : x.data) v = v > 0.0 ? v : 0.0;
    } else {
      x = std::move(z);
    }
  }
  return x;
}

}  // namespace detail

// Seeded initialization: W entries ~ N(0, 1/n_in), biases zero.
inline std::vector<double> init_params(const ModelSpec& model, Rng& rng) {
  model.validate();
  std::vector<double> params(model.param_count(), 0.0);
  for (std::size_t l = 0; l + 1 < model.layers.size(); ++l) {
    const std::size_t n_in = model.layers[l], n_out = model.layers[l + 1];
    const double sd = 1.0 / std::sqrt(static_cast<double>(n_in));
    double* w = params.data() + model.weight_offset(l);
    for (std::size_t i = 0; i < n_in * n_out; ++i) w[i] = sd * rng.normal();
  }
  return params;
}

// Evaluates one mini-batch: mean loss, mean gradient and per-coordinate mean
// squared per-example gradient. The second moment of the dense-layer weights
// comes from the fused rule above; m per-example gradient vectors are never
// materialized.
inline BatchEvaluation evaluate_batch(const ModelSpec& model,
                                      const std::vector<double>& params,
                                      const std::vector<std::size_t>& batch,
                                      const Dataset& ds) {
  model.validate();
  require(model.kind != ModelKind::quadratic,
          "evaluate_batch: quadratic kind has its own sampling path");
  require(batch.size() >= 2, "evaluate_batch: need m >= 2");
  require(params.size() == model.param_count(),
          "evaluate_batch: parameter count mismatch");
  require(model.layers[0] == ds.dim(), "evaluate_batch: input width mismatch");
  require(model.layers.back() == static_cast<std::size_t>(ds.num_classes),
          "evaluate_batch: output width mismatch");

  const std::size_t m = batch.size();
  const std::size_t L = model.num_dense_layers();
  std::vector<DenseLayerCache> caches(L);
  const Matrix logits =
      detail::forward(model, params, detail::gather_rows(ds, batch), &caches);

  std::vector<int> y(m);
  for (std::size_t i = 0; i < m; ++i) y[i] = ds.labels[batch[i]];

  BatchEvaluation ev;
  Matrix dz;
  ev.loss = detail::softmax_cross_entropy(logits, y, dz);

  ev.loss_grad.assign(params.size(), 0.0);
  ev.q.assign(params.size(), 0.0);
  const double inv_m = 1.0 / static_cast<double>(m);

  // Backward sweep: dz holds the per-example pre-activation gradients of the
  // current layer; grads and second moments fall out layer by layer.
  for (std::size_t l = L; l-- > 0;) {
    const Matrix& a = caches[l].a;
    const std::size_t n_in = model.layers[l], n_out = model.layers[l + 1];

    const Matrix dw_sum = matmul_tn(a, dz);  // sum of per-example gradients
    const Matrix qw_sum = fused_second_moment(a, dz);
    double* g_w = ev.loss_grad.data() + model.weight_offset(l);
    double* q_w = ev.q.data() + model.weight_offset(l);
    for (std::size_t i = 0; i < n_in * n_out; ++i) {
      g_w[i] = dw_sum.data[i] * inv_m;
      q_w[i] = qw_sum.data[i] * inv_m;
    }
    double* g_b = ev.loss_grad.data() + model.bias_offset(l);
    double* q_b = ev.q.data() + model.bias_offset(l);
    for (std::size_t i = 0; i < dz.rows; ++i) {
      for (std::size_t j = 0; j < n_out; ++j) {
        g_b[j] += dz(i, j) * inv_m;
        q_b[j] += dz(i, j) * dz(i, j) * inv_m;
      }
    }

    if (l > 0) {
      Matrix w(n_in, n_out);
      std::copy_n(params.begin() +
                      static_cast<std::ptrdiff_t>(model.weight_offset(l)),
                  n_in * n_out, w.data.begin());
      Matrix da = matmul_nt(dz, w);
      const Matrix& z_prev = caches[l - 1].z;
      for (std::size_t i = 0; i < da.size(); ++i) {
        if (z_prev.data[i] <= 0.0) da.data[i] = 0.0;
      }
      dz = std::move(da);
    }
  }

  // Regularized total: lambda/2 * sum W^2, gradient lambda * W on weight
  // coordinates only.
  ev.grad = ev.loss_grad;
  double penalty = 0.0;
  if (model.lambda > 0.0) {
    for (std::size_t l = 0; l < L; ++l) {
      const std::size_t nw = model.layers[l] * model.layers[l + 1];
      const double* w = params.data() + model.weight_offset(l);
      double* g = ev.grad.data() + model.weight_offset(l);
      for (std::size_t i = 0; i < nw; ++i) {
        penalty += 0.5 * model.lambda * w[i] * w[i];
        g[i] += model.lambda * w[i];
      }
    }
  }
  ev.total_loss = ev.loss + penalty;

  if (!std::isfinite(ev.total_loss)) {
    throw numerical_error("non-finite loss in batch evaluation");
  }
  for (double v : ev.grad) {
    if (!std::isfinite(v)) {
      throw numerical_error("non-finite gradient in batch evaluation");
    }
  }
  return ev;
}

// Mean unregularized loss over a whole dataset (forward only).
inline double dataset_loss(const ModelSpec& model,
                           const std::vector<double>& params,
                           const Dataset& ds) {
  Matrix x = ds.features;
  const Matrix logits = detail::forward(model, params, std::move(x), nullptr);
  Matrix dz;
  return detail::softmax_cross_entropy(logits, ds.labels, dz);
}

// Fraction of examples whose argmax logit matches the label, evaluated in
// dataset order. Ties resolve to the lowest class index.
inline double accuracy(const ModelSpec& model, const std::vector<double>& params,
                       const Dataset& ds) {
  Matrix x = ds.features;
  const Matrix logits = detail::forward(model, params, std::move(x), nullptr);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols; ++j) {
      if (logits(i, j) > logits(i, best)) best = j;
    }
    if (best == static_cast<std::size_t>(ds.labels[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows);
}

// Mean total (regularized) loss on one batch; forward only. This is the
// scalar the finite-difference oracle probes.
inline double batch_total_loss(const ModelSpec& model,
                               const std::vector<double>& params,
                               const std::vector<std::size_t>& batch,
                               const Dataset& ds) {
  const Matrix logits = detail::forward(model, params,
                                        detail::gather_rows(ds, batch), nullptr);
  std::vector<int> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) y[i] = ds.labels[batch[i]];
  Matrix dz;
  double loss = detail::softmax_cross_entropy(logits, y, dz);
  if (model.lambda > 0.0) {
    for (std::size_t l = 0; l + 1 < model.layers.size(); ++l) {
      const std::size_t nw = model.layers[l] * model.layers[l + 1];
      const double* w = params.data() + model.weight_offset(l);
      for (std::size_t i = 0; i < nw; ++i) {
        loss += 0.5 * model.lambda * w[i] * w[i];
      }
    }
  }
  return loss;
}

}  // namespace cabs
