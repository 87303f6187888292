// Command-line front end: run one experiment, sweep a grid, run the
// validation suites, or write IDX fixtures.
//
//   cabs run <config> [--key=value ...]
//   cabs grid <config> [--key=value ...]
//   cabs validate [--seed=N]
//   cabs emit-fixtures [--dir=PATH]
//
// Any config key can be overridden on the command line as --key=value.
// Exit codes: 0 success, 1 run failure, 2 bad config or usage.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "cabs/config.hpp"
#include "cabs/harness.hpp"
#include "cabs/idx.hpp"
#include "cabs/validation.hpp"

namespace {

int usage() {
  std::fprintf(stderr,
               "usage: cabs run <config> [--key=value ...]\n"
               "       cabs grid <config> [--key=value ...]\n"
               "       cabs validate [--seed=N]\n"
               "       cabs emit-fixtures [--dir=PATH]\n");
  return 2;
}

cabs::ExperimentConfig load_config(int argc, char** argv) {
  cabs::KeyValues kv = cabs::KeyValues::from_file(argv[2]);
  for (int i = 3; i < argc; ++i) kv.apply_override(argv[i]);
  return cabs::build_config(kv);
}

std::string run_csv_path(const cabs::ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::path p(cfg.out_path);
  if (fs::is_directory(p) || p.extension().empty()) {
    fs::create_directories(p);
    return (p / (cfg.name + ".csv")).string();
  }
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p.string();
}

int cmd_run(int argc, char** argv) {
  const cabs::ExperimentConfig cfg = load_config(argc, argv);
  if (!cfg.alpha_grid.empty()) {
    throw cabs::config_error("run: config sets train.alpha_grid; use 'cabs grid'");
  }
  const cabs::ExperimentResult res = cabs::run_experiment(cfg);
  const std::string path = run_csv_path(cfg);
  cabs::emit_csv(res.records, path);
  if (res.summary.failed) {
    std::fprintf(stderr, "run failed: %s\n", res.summary.failure_reason.c_str());
    std::printf("wrote %s (%zu records before failure)\n", path.c_str(),
                res.records.size());
    return 1;
  }
  std::printf(
      "wrote %s\nsteps=%lld examples=%lld final_train_loss=%.6g "
      "final_test_accuracy=%.4f best_test_accuracy=%.4f\n",
      path.c_str(), res.summary.steps, res.summary.examples_accessed,
      res.summary.final_train_loss, res.summary.final_test_accuracy,
      res.summary.best_test_accuracy);
  return 0;
}

int cmd_grid(int argc, char** argv) {
  cabs::ExperimentConfig cfg = load_config(argc, argv);
  if (cfg.alpha_grid.empty()) {
    throw cabs::config_error("grid: config must set train.alpha_grid");
  }
  namespace fs = std::filesystem;
  fs::path dir(cfg.out_path);
  fs::create_directories(dir);
  const cabs::GridResult grid = cabs::grid_search(cfg);
  std::string summary = "label,alpha,theta,failed,final_train_loss,"
                        "final_test_accuracy,best_test_accuracy\n";
  for (const cabs::GridPoint& p : grid.points) {
    cabs::emit_csv(p.result.records, (dir / (p.label + ".csv")).string());
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%.12g,%.12g,%d,%.12g,%.12g,%.12g\n",
                  p.label.c_str(), p.alpha, p.theta ? *p.theta : 0.0,
                  p.result.summary.failed ? 1 : 0,
                  p.result.summary.final_train_loss,
                  p.result.summary.final_test_accuracy,
                  p.result.summary.best_test_accuracy);
    summary += buf;
    std::printf("%s: %s final_train_loss=%.6g final_test_accuracy=%.4f\n",
                p.label.c_str(),
                p.result.summary.failed ? "FAILED" : "ok",
                p.result.summary.final_train_loss,
                p.result.summary.final_test_accuracy);
  }
  const fs::path summary_path = dir / "summary.csv";
  std::FILE* f = std::fopen(summary_path.string().c_str(), "wb");
  if (!f) throw std::runtime_error("cannot write " + summary_path.string());
  std::fwrite(summary.data(), 1, summary.size(), f);
  std::fclose(f);
  const cabs::GridPoint& best =
      grid.points[static_cast<std::size_t>(grid.best_index)];
  std::printf("best: %s (final_test_accuracy=%.4f)\n", best.label.c_str(),
              best.result.summary.final_test_accuracy);
  return 0;
}

int cmd_validate(int argc, char** argv) {
  std::uint64_t seed = 20240906;
  for (int i = 2; i < argc; ++i) {
    if (std::strncmp(argv[i], "--seed=", 7) == 0) {
      seed = std::strtoull(argv[i] + 7, nullptr, 10);
    } else {
      return usage();
    }
  }
  const auto checks = cabs::run_validation_suites(seed);
  bool all_pass = true;
  for (const cabs::CheckResult& c : checks) {
    std::printf("%-28s %s\n", c.name.c_str(), c.pass ? "PASS" : "FAIL");
    all_pass = all_pass && c.pass;
  }
  for (const cabs::CheckResult& c : checks) {
    std::printf("check=%s pass=%d %s\n", c.name.c_str(), c.pass ? 1 : 0,
                c.detail.c_str());
  }
  return all_pass ? 0 : 1;
}

int cmd_emit_fixtures(int argc, char** argv) {
  std::string dir = ".";
  if (const char* env = std::getenv(cabs::kOutputDirEnv)) dir = env;
  for (int i = 2; i < argc; ++i) {
    if (std::strncmp(argv[i], "--dir=", 6) == 0) {
      dir = argv[i] + 6;
    } else {
      return usage();
    }
  }
  std::filesystem::create_directories(dir);
  cabs::write_idx_fixtures(dir);
  std::printf("wrote IDX fixtures to %s\n", dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) return usage();
  const std::string verb = argv[1];
  try {
    if (verb == "run") {
      if (argc < 3) return usage();
      return cmd_run(argc, argv);
    }
    if (verb == "grid") {
      if (argc < 3) return usage();
      return cmd_grid(argc, argv);
    }
    if (verb == "validate") return cmd_validate(argc, argv);
    if (verb == "emit-fixtures") return cmd_emit_fixtures(argc, argv);
    return usage();
  } catch (const cabs::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const cabs::infeasible_step_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
