#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "cabs/batch_policy.hpp"
#include "cabs/errors.hpp"
#include "cabs/grad_stats.hpp"
#include "cabs/objective.hpp"

namespace cabs {

// Plain SGD update w <- w - alpha * g.
inline std::vector<double> sgd_step(const std::vector<double>& w,
                                    const std::vector<double>& g,
                                    double alpha) {
  require(w.size() == g.size(), "sgd_step: dimension mismatch");
  require(alpha >= 0.0, "sgd_step: negative step size");
  std::vector<double> out(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) out[j] = w[j] - alpha * g[j];
  return out;
}

struct OptimizerState {
  std::vector<double> w;
  long long m = 0;  // batch size the NEXT step will draw
  SmoothedStats stats;
  double grad_norm_sq_avg = 0.0;
  long long step = 0;
  long long examples_accessed = 0;
};

// Snapshot of one completed step. batch_size is the m that was drawn at this
// step; target is the raw (pre-round, pre-clip) policy output computed after
// it, i.e. the prediction for the next step.
struct StepRecord {
  long long step = 0;
  long long batch_size = 0;
  long long examples_accessed = 0;
  double loss = 0.0;
  double total_loss = 0.0;
  double trace = 0.0;  // raw variance trace of this batch
  double xi = 0.0;
  double f_avg = 0.0;
  double grad_norm_sq = 0.0;  // raw |loss_grad|^2 of this batch
  double target = 0.0;
};

struct RunOptions {
  double alpha = 0.1;
  double mu = 0.95;
  long long steps = 0;            // 0 = unbounded
  long long examples_budget = 0;  // 0 = unbounded; at least one bound required
  std::uint64_t seed = 0;
  bool bessel_correction = false;
  bool keep_step_records = true;
};

using StepObserver =
    std::function<void(const StepRecord&, const OptimizerState&)>;

struct TrainResult {
  OptimizerState final_state;
  std::vector<StepRecord> steps;
};

// First batch size of a run: the policy applied to the zero-initialized
// statistics. Stats-coupled rules land on m_min (their numerators are zero),
// constant and geometric start at their configured sizes.
inline long long initial_batch_size(const BatchSizePolicy& policy) {
  PolicyInputs in;
  in.exact_grad_norm_sq = 1.0;  // unused: the zero trace already forces m_min
  return round_and_clip(target_batch_size(policy, in), policy.m_min,
                        policy.m_max);
}

// The training loop. Predictive scheme: each iteration draws one batch of the
// current size m, applies the SGD step, folds the batch loss and variance
// trace into the EMAs, and only then computes (rounds, clips) the batch size
// for the NEXT iteration. A batch is never re-drawn within a step.
inline TrainResult run_training(Objective& obj, const BatchSizePolicy& policy,
                                const RunOptions& opts,
                                const StepObserver& observer = nullptr) {
  policy.validate();
  require(opts.steps > 0 || opts.examples_budget > 0,
          "run_training: need a step or example budget");
  require(opts.alpha == policy.alpha,
          "run_training: step size disagrees with the policy's alpha");
  if (policy.needs_exact_grad_norm()) {
    (void)obj.oracle_facts();  // lipschitz-oracle runs need an oracle problem
  }

  OptimizerState st;
  st.w = obj.initial_params(split_seed(opts.seed, 0));
  obj.reset(split_seed(opts.seed, 1));
  st.stats.mu = opts.mu;
  st.stats.validate();
  st.m = initial_batch_size(policy);

  TrainResult result;
  for (;;) {
    if (opts.steps > 0 && st.step >= opts.steps) break;
    if (opts.examples_budget > 0 &&
        st.examples_accessed >= opts.examples_budget) {
      break;
    }
    const long long m = st.m;
    const long long k = st.step + 1;

    BatchEvaluation ev;
    try {
      ev = obj.evaluate(st.w, m);
      st.w = sgd_step(st.w, ev.grad, opts.alpha);
      for (double v : st.w) {
        if (!std::isfinite(v)) {
          throw numerical_error("non-finite parameter after update");
        }
      }
    } catch (const numerical_error& e) {
      throw numerical_error(e.what(), k, m, st.stats.f_avg);
    }

    VarianceEstimate var = sample_variance(ev.q, ev.loss_grad);
    if (opts.bessel_correction) {
      var = bessel_correct(std::move(var), static_cast<std::size_t>(m));
    }
    st.stats = update_ema(st.stats, ev.loss, var.trace);
    double gsq = 0.0;
    for (double v : ev.loss_grad) gsq += v * v;
    st.grad_norm_sq_avg = ema_step(st.grad_norm_sq_avg, gsq, opts.mu);
    st.step = k;
    st.examples_accessed += m;

    PolicyInputs in;
    in.xi = st.stats.xi;
    in.f_avg = st.stats.f_avg;
    in.grad_norm_sq_avg = st.grad_norm_sq_avg;
    in.step = st.step;
    if (policy.needs_exact_grad_norm()) {
      in.exact_grad_norm_sq = obj.exact_grad_norm_sq(st.w);
    }
    const double target = target_batch_size(policy, in);
    st.m = round_and_clip(target, policy.m_min, policy.m_max);

    StepRecord rec;
    rec.step = k;
    rec.batch_size = m;
    rec.examples_accessed = st.examples_accessed;
    rec.loss = ev.loss;
    rec.total_loss = ev.total_loss;
    rec.trace = var.trace;
    rec.xi = st.stats.xi;
    rec.f_avg = st.stats.f_avg;
    rec.grad_norm_sq = gsq;
    rec.target = target;
    if (observer) observer(rec, st);
    if (opts.keep_step_records) result.steps.push_back(rec);
  }
  result.final_state = std::move(st);
  return result;
}

}  // namespace cabs
