#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "cabs/dataset.hpp"
#include "cabs/model.hpp"
#include "cabs/quadratic.hpp"
#include "cabs/rng.hpp"

namespace cabs {

// Closed-form facts an oracle problem can vouch for.
struct OracleFacts {
  double lipschitz = 0.0;
  double f_star = 0.0;
};

// A training problem: something that hands out stochastic batch evaluations
// of a loss. The two concrete problems are a model over a dataset and the
// noisy quadratic.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t dim() const = 0;

  // Re-seeds the batch/noise streams; called once at the start of a run.
  virtual void reset(std::uint64_t seed) = 0;

  virtual std::vector<double> initial_params(std::uint64_t seed) const = 0;

  // Draws a batch of size m at the current parameters.
  virtual BatchEvaluation evaluate(const std::vector<double>& w,
                                   long long m) = 0;

  // Full-training-set unregularized loss, for metrics.
  virtual double train_loss(const std::vector<double>& w) const = 0;

  // Held-out accuracy; problems without a test set report 0.
  virtual double test_accuracy(const std::vector<double>&) const { return 0.0; }

  virtual std::optional<OracleFacts> oracle_facts() const {
    return std::nullopt;
  }

  // Exact squared gradient norm; only oracle problems can provide it.
  virtual double exact_grad_norm_sq(const std::vector<double>&) const {
    throw std::invalid_argument(
        "this objective cannot provide an exact gradient norm");
  }
};

class DatasetObjective : public Objective {
 public:
  DatasetObjective(ModelSpec model, Dataset train, Dataset test,
                   SampleMode mode = SampleMode::without_replacement)
      : model_(std::move(model)),
        train_(std::move(train)),
        test_(std::move(test)),
        mode_(mode) {
    model_.validate();
    train_.validate();
    if (test_.size() > 0) test_.validate();
  }

  std::size_t dim() const override { return model_.param_count(); }

  void reset(std::uint64_t seed) override {
    sampler_.emplace(mode_, train_.size(), seed);
  }

  std::vector<double> initial_params(std::uint64_t seed) const override {
    Rng rng(seed);
    return init_params(model_, rng);
  }

  BatchEvaluation evaluate(const std::vector<double>& w, long long m) override {
    require(sampler_.has_value(), "objective: reset() not called");
    const auto batch = sampler_->sample_batch(static_cast<std::size_t>(m));
    return evaluate_batch(model_, w, batch, train_);
  }

  double train_loss(const std::vector<double>& w) const override {
    return dataset_loss(model_, w, train_);
  }

  double test_accuracy(const std::vector<double>& w) const override {
    if (test_.size() == 0) return 0.0;
    return accuracy(model_, w, test_);
  }

  double train_accuracy(const std::vector<double>& w) const {
    return accuracy(model_, w, train_);
  }

  const ModelSpec& model() const { return model_; }
  const Dataset& train_set() const { return train_; }
  const Dataset& test_set() const { return test_; }

 private:
  ModelSpec model_;
  Dataset train_;
  Dataset test_;
  SampleMode mode_;
  std::optional<Sampler> sampler_;
};

class QuadraticObjective : public Objective {
 public:
  explicit QuadraticObjective(QuadraticOracleSpec spec,
                              std::optional<std::vector<double>> w0 =
                                  std::nullopt)
      : spec_(std::move(spec)), w0_(std::move(w0)) {
    spec_.validate();
  }

  std::size_t dim() const override { return spec_.dim(); }

  void reset(std::uint64_t seed) override { noise_.emplace(seed); }

  // Standard normal start unless an explicit w0 was pinned.
  std::vector<double> initial_params(std::uint64_t seed) const override {
    if (w0_) return *w0_;
    Rng rng(seed);
    std::vector<double> w(spec_.dim());
    for (double& v : w) v = rng.normal();
    return w;
  }

  BatchEvaluation evaluate(const std::vector<double>& w, long long m) override {
    require(noise_.has_value(), "objective: reset() not called");
    return sample_noisy_gradient(spec_, w, static_cast<std::size_t>(m),
                                 *noise_);
  }

  double train_loss(const std::vector<double>& w) const override {
    return quadratic_loss(spec_, w);
  }

  std::optional<OracleFacts> oracle_facts() const override {
    return OracleFacts{spec_.lipschitz, spec_.f_star};
  }

  double exact_grad_norm_sq(const std::vector<double>& w) const override {
    return quadratic_grad_norm_sq(spec_, w);
  }

  const QuadraticOracleSpec& spec() const { return spec_; }

 private:
  QuadraticOracleSpec spec_;
  std::optional<std::vector<double>> w0_;
  std::optional<Rng> noise_;
};

}  // namespace cabs
