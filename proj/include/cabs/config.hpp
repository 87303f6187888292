#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cabs/batch_policy.hpp"
#include "cabs/dataset.hpp"
#include "cabs/errors.hpp"
#include "cabs/idx.hpp"
#include "cabs/model.hpp"
#include "cabs/objective.hpp"
#include "cabs/quadratic.hpp"

namespace cabs {

// Environment variable naming the default output directory.
constexpr const char* kOutputDirEnv = "CABS_OUTPUT_DIR";

// Line-oriented key=value store with dotted keys. '#' starts a comment,
// blank lines are skipped, later assignments win.
class KeyValues {
 public:
  void set(const std::string& key, const std::string& value) {
    if (map_.find(key) == map_.end()) order_.push_back(key);
    map_[key] = value;
  }

  void parse_line(const std::string& raw, const std::string& where) {
    std::string line = raw;
    if (auto pos = line.find('#'); pos != std::string::npos) {
      line.erase(pos);
    }
    line = trim(line);
    if (line.empty()) return;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw config_error(where + ": expected key=value, got '" + raw + "'");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }

  static KeyValues from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      kv.parse_line(line, path + ":" + std::to_string(lineno));
    }
    return kv;
  }

  // A command-line override "--key=value".
  void apply_override(const std::string& arg) {
    if (arg.rfind("--", 0) != 0) {
      throw config_error("expected --key=value flag, got '" + arg + "'");
    }
    parse_line(arg.substr(2), "flag " + arg);
  }

  bool has(const std::string& key) const { return map_.count(key) > 0; }

  const std::map<std::string, std::string>& entries() const { return map_; }

  std::string get_string(const std::string& key, const std::string& dflt) {
    auto it = map_.find(key);
    if (it == map_.end()) return dflt;
    consumed_.insert(*it);
    return it->second;
  }

  double get_double(const std::string& key, double dflt) {
    auto it = map_.find(key);
    if (it == map_.end()) return dflt;
    consumed_.insert(*it);
    return parse_double(key, it->second);
  }

  long long get_int(const std::string& key, long long dflt) {
    auto it = map_.find(key);
    if (it == map_.end()) return dflt;
    consumed_.insert(*it);
    char* end = nullptr;
    const long long v = std::strtoll(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0') {
      throw config_error("key '" + key + "': not an integer: " + it->second);
    }
    return v;
  }

  bool get_bool(const std::string& key, bool dflt) {
    auto it = map_.find(key);
    if (it == map_.end()) return dflt;
    consumed_.insert(*it);
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw config_error("key '" + key + "': not a boolean: " + it->second);
  }

  std::vector<double> get_double_list(const std::string& key) {
    auto it = map_.find(key);
    if (it == map_.end()) return {};
    consumed_.insert(*it);
    std::vector<double> out;
    std::istringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      if (!tok.empty()) out.push_back(parse_double(key, tok));
    }
    return out;
  }

  std::vector<std::size_t> get_size_list(const std::string& key) {
    std::vector<std::size_t> out;
    for (double v : get_double_list(key)) {
      if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v))) {
        throw config_error("key '" + key + "': expected positive integers");
      }
      out.push_back(static_cast<std::size_t>(v));
    }
    return out;
  }

  // Any key never read by the config builder is a typo; name it.
  void reject_unconsumed() const {
    for (const auto& [k, v] : map_) {
      if (consumed_.find({k, v}) == consumed_.end()) {
        throw config_error("unknown config key: " + k);
      }
    }
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  static double parse_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') {
      throw config_error("key '" + key + "': not a number: " + v);
    }
    return d;
  }

  std::map<std::string, std::string> map_;
  std::vector<std::string> order_;
  mutable std::set<std::pair<std::string, std::string>> consumed_;
};

enum class DataKind { blobs, idx, none };

struct ExperimentConfig {
  std::string name = "run";

  ModelSpec model;
  QuadraticOracleSpec quadratic;

  DataKind data_kind = DataKind::blobs;
  int data_classes = 2;
  std::size_t data_dim = 20;
  std::size_t data_count = 10000;
  double data_separation = 3.0;
  double test_fraction = 0.2;
  bool standardize = false;
  std::string idx_images, idx_labels, idx_test_images, idx_test_labels;
  SampleMode sampler_mode = SampleMode::without_replacement;

  BatchSizePolicy policy;

  double alpha = 0.1;
  std::vector<double> alpha_grid;
  std::vector<double> theta_grid;
  long long steps = 0;
  long long budget = 0;
  long long eval_interval = 0;  // 0: budget/20 when a budget is set
  double mu = 0.95;
  bool bessel_correction = false;
  std::uint64_t seed = 0;
  int jobs = 1;

  std::string out_path;  // file for run, directory for grid

  long long effective_eval_interval() const {
    if (eval_interval > 0) return eval_interval;
    if (budget > 0) return budget / 20;  // 5% of the example budget
    return 0;
  }
};

inline ExperimentConfig build_config(KeyValues& kv) {
  ExperimentConfig cfg;
  cfg.name = kv.get_string("run.name", cfg.name);

  const std::string mk = kv.get_string("model.kind", "logistic-regression");
  if (mk == "quadratic") cfg.model.kind = ModelKind::quadratic;
  else if (mk == "logistic-regression") cfg.model.kind = ModelKind::logistic_regression;
  else if (mk == "mlp") cfg.model.kind = ModelKind::mlp;
  else throw config_error("model.kind: unknown value '" + mk + "'");
  cfg.model.layers = kv.get_size_list("model.layers");
  cfg.model.lambda = kv.get_double("model.lambda", 0.0);

  if (cfg.model.kind == ModelKind::quadratic) {
    cfg.data_kind = DataKind::none;
    const std::size_t dim =
        static_cast<std::size_t>(kv.get_int("quadratic.dim", 10));
    const double h = kv.get_double("quadratic.curvature", 1.0);
    const double sig = kv.get_double("quadratic.sigma_sq", 1.0);
    const double fstar = kv.get_double("quadratic.fstar", 0.0);
    if (dim < 1) throw config_error("quadratic.dim: must be >= 1");
    if (h <= 0) throw config_error("quadratic.curvature: must be > 0");
    if (sig < 0) throw config_error("quadratic.sigma_sq: must be >= 0");
    cfg.quadratic = make_scalar_quadratic(
        h, std::vector<double>(dim, 0.0), fstar, std::vector<double>(dim, sig));
  } else {
    const std::string dk = kv.get_string("data.kind", "blobs");
    if (dk == "blobs") cfg.data_kind = DataKind::blobs;
    else if (dk == "idx") cfg.data_kind = DataKind::idx;
    else throw config_error("data.kind: unknown value '" + dk + "'");
    cfg.data_classes = static_cast<int>(kv.get_int("data.classes", 2));
    cfg.data_dim = static_cast<std::size_t>(kv.get_int("data.dim", 20));
    cfg.data_count = static_cast<std::size_t>(kv.get_int("data.count", 10000));
    cfg.data_separation = kv.get_double("data.separation", 3.0);
    cfg.test_fraction = kv.get_double("data.test_fraction", 0.2);
    cfg.standardize = kv.get_bool("data.standardize", false);
    cfg.idx_images = kv.get_string("data.images", "");
    cfg.idx_labels = kv.get_string("data.labels", "");
    cfg.idx_test_images = kv.get_string("data.test_images", "");
    cfg.idx_test_labels = kv.get_string("data.test_labels", "");
    if (cfg.data_kind == DataKind::idx &&
        (cfg.idx_images.empty() || cfg.idx_labels.empty())) {
      throw config_error("data.kind=idx requires data.images and data.labels");
    }
    if (cfg.model.layers.empty()) {
      // Default architecture from the data shape: a single dense layer.
      if (cfg.data_kind == DataKind::blobs) {
        cfg.model.layers = {cfg.data_dim,
                            static_cast<std::size_t>(cfg.data_classes)};
      } else {
        throw config_error("model.layers is required with data.kind=idx");
      }
    }
  }

  const std::string sm =
      kv.get_string("sampler.mode", "without-replacement");
  if (sm == "without-replacement") cfg.sampler_mode = SampleMode::without_replacement;
  else if (sm == "with-replacement") cfg.sampler_mode = SampleMode::with_replacement;
  else throw config_error("sampler.mode: unknown value '" + sm + "'");

  const std::string pk = kv.get_string("policy.kind", "cabs");
  if (!parse_policy_kind(pk, cfg.policy.kind)) {
    throw config_error("policy.kind: unknown value '" + pk + "'");
  }
  cfg.policy.m_const = kv.get_int("policy.m", 32);
  cfg.policy.m0 = kv.get_int("policy.m0", 16);
  cfg.policy.rho = kv.get_double("policy.rho", 1.1);
  cfg.policy.theta = kv.get_double("policy.theta", 1.0);
  cfg.policy.lipschitz = kv.get_double("policy.lipschitz", 1.0);
  cfg.policy.f_star = kv.get_double("policy.fstar", 0.0);
  cfg.policy.m_min = kv.get_int("policy.m_min", 16);
  cfg.policy.m_max = kv.get_int("policy.m_max", 4096);

  cfg.alpha = kv.get_double("train.alpha", 0.1);
  cfg.alpha_grid = kv.get_double_list("train.alpha_grid");
  cfg.theta_grid = kv.get_double_list("train.theta_grid");
  cfg.steps = kv.get_int("train.steps", 0);
  cfg.budget = kv.get_int("train.budget", 0);
  cfg.eval_interval = kv.get_int("train.eval_interval", 0);
  cfg.mu = kv.get_double("train.mu", 0.95);
  cfg.bessel_correction = kv.get_bool("train.bessel_correction", false);
  cfg.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", 0));
  cfg.jobs = static_cast<int>(kv.get_int("grid.jobs", 1));

  const char* env_dir = std::getenv(kOutputDirEnv);
  const std::string default_dir = env_dir ? env_dir : ".";
  cfg.out_path = kv.get_string("output.path", "");
  if (cfg.out_path.empty()) cfg.out_path = default_dir;

  kv.reject_unconsumed();

  try {
    cfg.policy.alpha = cfg.alpha;
    cfg.policy.validate();
    if (cfg.model.kind != ModelKind::quadratic) cfg.model.validate();
  } catch (const std::exception& e) {
    throw config_error(e.what());
  }
  if (cfg.steps <= 0 && cfg.budget <= 0) {
    throw config_error("need train.steps or train.budget");
  }
  if (cfg.mu < 0.0 || cfg.mu >= 1.0) {
    throw config_error("train.mu: must be in [0, 1)");
  }
  if (cfg.jobs < 1) throw config_error("grid.jobs: must be >= 1");
  if (!cfg.theta_grid.empty() &&
      cfg.policy.kind != PolicyKind::noisy_grad_norm) {
    throw config_error(
        "train.theta_grid only applies to policy.kind=noisy-grad-norm");
  }
  if (cfg.policy.kind == PolicyKind::lipschitz_oracle &&
      cfg.model.kind != ModelKind::quadratic) {
    throw config_error(
        "policy.kind=lipschitz-oracle needs model.kind=quadratic (an oracle "
        "problem)");
  }
  return cfg;
}

// Builds the training problem a config describes. Dataset-backed problems
// are split 80/20 (or per data.test_fraction) by a permutation seeded from
// the experiment seed.
inline std::unique_ptr<Objective> build_objective(const ExperimentConfig& cfg) {
  if (cfg.model.kind == ModelKind::quadratic) {
    return std::make_unique<QuadraticObjective>(cfg.quadratic);
  }
  Dataset train, test;
  if (cfg.data_kind == DataKind::blobs) {
    Dataset all = generate_gaussian_blobs(cfg.data_classes, cfg.data_dim,
                                          cfg.data_count, cfg.data_separation,
                                          split_seed(cfg.seed, 100));
    if (cfg.standardize) standardize_features(all);
    auto parts = split_train_test(all, cfg.test_fraction,
                                  split_seed(cfg.seed, 101));
    train = std::move(parts.first);
    test = std::move(parts.second);
  } else {
    train = load_idx(cfg.idx_images, cfg.idx_labels);
    if (!cfg.idx_test_images.empty()) {
      test = load_idx(cfg.idx_test_images, cfg.idx_test_labels);
      test.num_classes = train.num_classes =
          std::max(train.num_classes, test.num_classes);
    } else {
      auto parts = split_train_test(train, cfg.test_fraction,
                                    split_seed(cfg.seed, 101));
      train = std::move(parts.first);
      test = std::move(parts.second);
    }
  }
  ModelSpec model = cfg.model;
  if (model.layers[0] != train.dim()) {
    throw config_error("model.layers input width does not match the data");
  }
  if (model.layers.back() != static_cast<std::size_t>(train.num_classes)) {
    throw config_error("model.layers output width does not match the labels");
  }
  return std::make_unique<DatasetObjective>(std::move(model), std::move(train),
                                            std::move(test), cfg.sampler_mode);
}

}  // namespace cabs
