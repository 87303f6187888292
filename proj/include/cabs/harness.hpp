#pragma once

#include <algorithm>
#include <cstdio>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cabs/config.hpp"
#include "cabs/metrics.hpp"
#include "cabs/optimizer.hpp"

namespace cabs {

struct RunSummary {
  bool failed = false;
  std::string failure_reason;
  double final_train_loss = 0.0;
  double final_test_accuracy = 0.0;
  double best_test_accuracy = 0.0;
  long long steps = 0;
  long long examples_accessed = 0;
};

struct ExperimentResult {
  std::vector<MetricsRecord> records;
  RunSummary summary;
};

// Runs one configured experiment: builds the problem, trains, and logs a
// MetricsRecord at every evaluation-interval crossing (measured in examples
// accessed), plus the initial state and the final state. A numerical failure
// ends the run early; the records gathered so far are kept and the summary
// carries the reason.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  auto obj = build_objective(cfg);

  BatchSizePolicy policy = cfg.policy;
  policy.alpha = cfg.alpha;

  RunOptions opts;
  opts.alpha = cfg.alpha;
  opts.mu = cfg.mu;
  opts.steps = cfg.steps;
  opts.examples_budget = cfg.budget;
  opts.seed = cfg.seed;
  opts.bessel_correction = cfg.bessel_correction;
  opts.keep_step_records = false;  // interval records suffice here

  ExperimentResult result;
  const long long interval = cfg.effective_eval_interval();
  long long next_mark = interval;

  auto snapshot = [&](long long step, long long examples, long long batch,
                      const std::vector<double>& w, double xi, double f_avg) {
    MetricsRecord r;
    r.step = step;
    r.examples_accessed = examples;
    r.batch_size = batch;
    r.train_loss = obj->train_loss(w);
    r.test_accuracy = obj->test_accuracy(w);
    r.trace_sigma_est = xi;
    r.f_avg = f_avg;
    result.records.push_back(r);
  };

  {
    const std::vector<double> w0 =
        obj->initial_params(split_seed(cfg.seed, 0));
    snapshot(0, 0, initial_batch_size(policy), w0, 0.0, 0.0);
  }

  long long last_logged_step = 0;
  long long last_batch_size = initial_batch_size(policy);
  StepObserver observer = [&](const StepRecord& rec, const OptimizerState& st) {
    last_batch_size = rec.batch_size;
    if (interval > 0 && rec.examples_accessed >= next_mark) {
      snapshot(rec.step, rec.examples_accessed, rec.batch_size, st.w,
               st.stats.xi, st.stats.f_avg);
      last_logged_step = rec.step;
      next_mark =
          (rec.examples_accessed / interval + 1) * interval;
    }
  };

  try {
    TrainResult tr = run_training(*obj, policy, opts, observer);
    const OptimizerState& st = tr.final_state;
    if (st.step != last_logged_step) {
      // Final state, even when it does not land on an interval mark.
      snapshot(st.step, st.examples_accessed, last_batch_size, st.w,
               st.stats.xi, st.stats.f_avg);
    }
    result.summary.steps = st.step;
    result.summary.examples_accessed = st.examples_accessed;
  } catch (const numerical_error& e) {
    result.summary.failed = true;
    result.summary.failure_reason = e.what();
    result.summary.steps = e.step();
    result.summary.examples_accessed =
        result.records.empty() ? 0 : result.records.back().examples_accessed;
  }

  if (!result.records.empty()) {
    const MetricsRecord& last = result.records.back();
    result.summary.final_train_loss = last.train_loss;
    result.summary.final_test_accuracy = last.test_accuracy;
    for (const MetricsRecord& r : result.records) {
      result.summary.best_test_accuracy =
          std::max(result.summary.best_test_accuracy, r.test_accuracy);
    }
  }
  return result;
}

struct GridPoint {
  double alpha = 0.0;
  std::optional<double> theta;
  std::string label;
  ExperimentResult result;
};

struct GridResult {
  std::vector<GridPoint> points;
  int best_index = -1;
};

namespace detail {

inline std::string format_param(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace detail

// Cartesian sweep over train.alpha_grid (and train.theta_grid for the
// noisy-grad-norm policy). Every point runs independently with the same
// base seed, so results do not depend on execution order; grid.jobs > 1
// distributes points over threads. Winner: highest final test accuracy,
// ties broken by lower final train loss, then smaller alpha, then smaller
// theta. Failed points are excluded; if every point fails, this throws.
inline GridResult grid_search(const ExperimentConfig& cfg) {
  if (cfg.alpha_grid.empty()) {
    throw config_error("grid_search: train.alpha_grid is empty");
  }
  GridResult grid;
  for (double a : cfg.alpha_grid) {
    if (cfg.theta_grid.empty()) {
      GridPoint p;
      p.alpha = a;
      p.label = "alpha" + detail::format_param(a);
      grid.points.push_back(std::move(p));
    } else {
      for (double th : cfg.theta_grid) {
        GridPoint p;
        p.alpha = a;
        p.theta = th;
        p.label = "alpha" + detail::format_param(a) + "_theta" +
                  detail::format_param(th);
        grid.points.push_back(std::move(p));
      }
    }
  }

  auto run_point = [&](GridPoint& p) {
    ExperimentConfig point_cfg = cfg;
    point_cfg.alpha = p.alpha;
    point_cfg.alpha_grid.clear();
    point_cfg.theta_grid.clear();
    if (p.theta) point_cfg.policy.theta = *p.theta;
    point_cfg.name = cfg.name + "_" + p.label;
    p.result = run_experiment(point_cfg);
  };

  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    for (GridPoint& p : grid.points) run_point(p);
  } else {
    std::vector<std::thread> workers;
    std::size_t next = 0;
    std::mutex mu;
    for (int t = 0; t < jobs; ++t) {
      workers.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= grid.points.size()) return;
            i = next++;
          }
          run_point(grid.points[i]);
        }
      });
    }
    for (auto& w : workers) w.join();
  }

  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    const GridPoint& p = grid.points[i];
    if (p.result.summary.failed) continue;
    if (grid.best_index < 0) {
      grid.best_index = static_cast<int>(i);
      continue;
    }
    const RunSummary& cur = p.result.summary;
    const GridPoint& bp = grid.points[static_cast<std::size_t>(grid.best_index)];
    const RunSummary& best = bp.result.summary;
    bool better = false;
    if (cur.final_test_accuracy != best.final_test_accuracy) {
      better = cur.final_test_accuracy > best.final_test_accuracy;
    } else if (cur.final_train_loss != best.final_train_loss) {
      better = cur.final_train_loss < best.final_train_loss;
    } else if (p.alpha != bp.alpha) {
      better = p.alpha < bp.alpha;
    } else if (p.theta && bp.theta) {
      better = *p.theta < *bp.theta;
    }
    if (better) grid.best_index = static_cast<int>(i);
  }
  if (grid.best_index < 0) {
    std::string reasons;
    for (const GridPoint& p : grid.points) {
      reasons += "\n  " + p.label + ": " + p.result.summary.failure_reason;
    }
    throw std::runtime_error("grid_search: every grid point failed:" + reasons);
  }
  return grid;
}

}  // namespace cabs
