#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "cabs/errors.hpp"
#include "cabs/matrix.hpp"
#include "cabs/rng.hpp"

namespace cabs {

struct Dataset {
  Matrix features;           // M x d_in
  std::vector<int> labels;   // values in [0, num_classes)
  int num_classes = 0;
  std::string name;
  std::string normalization;  // e.g. "none", "bytes/255", "standardized"

  std::size_t size() const { return features.rows; }
  std::size_t dim() const { return features.cols; }

  void validate() const {
    require(features.rows == labels.size(),
            "dataset: feature/label counts differ");
    require(num_classes >= 1, "dataset: num_classes must be >= 1");
    for (int y : labels) {
      require(y >= 0 && y < num_classes, "dataset: label out of range");
    }
    for (double v : features.data) {
      require(std::isfinite(v), "dataset: non-finite feature");
    }
  }
};

enum class SampleMode { with_replacement, without_replacement };

// Draws index batches. Without replacement it walks a seeded permutation and
// reshuffles when fewer than m indices remain, rather than emitting a short
// batch; a batch therefore never repeats an index.
class Sampler {
 public:
  Sampler(SampleMode mode, std::size_t dataset_size, std::uint64_t seed)
      : mode_(mode), size_(dataset_size), rng_(seed) {
    require(dataset_size >= 1, "sampler: empty dataset");
  }

  std::vector<std::size_t> sample_batch(std::size_t m) {
    require(m >= 1, "sample_batch: m must be >= 1");
    std::vector<std::size_t> out(m);
    if (mode_ == SampleMode::with_replacement) {
      for (std::size_t i = 0; i < m; ++i) out[i] = rng_.below(size_);
      return out;
    }
    // An epoch permutation cannot hand out more than one full pass at once.
    require(m <= size_, "sample_batch: m exceeds dataset size");
    if (size_ - cursor_ < m || perm_.empty()) reshuffle();
    for (std::size_t i = 0; i < m; ++i) out[i] = perm_[cursor_ + i];
    cursor_ += m;
    return out;
  }

  SampleMode mode() const { return mode_; }

 private:
  void reshuffle() {
    perm_.resize(size_);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    // Fisher-Yates with our own index draws; std::shuffle's use of the
    // engine is not pinned by the standard.
    for (std::size_t i = size_; i > 1; --i) {
      std::swap(perm_[i - 1], perm_[rng_.below(i)]);
    }
    cursor_ = 0;
  }

  SampleMode mode_;
  std::size_t size_;
  Rng rng_;
  std::vector<std::size_t> perm_;
  std::size_t cursor_ = 0;
};

// C Gaussian blobs in d_in dimensions: class c is centered at
// separation * e_c (orthogonal unit vectors) with unit isotropic noise.
// Labels come out balanced, class = index mod C.
inline Dataset generate_gaussian_blobs(int num_classes, std::size_t d_in,
                                       std::size_t count, double separation,
                                       std::uint64_t seed) {
  require(num_classes >= 2, "blobs: need at least 2 classes");
  require(static_cast<std::size_t>(num_classes) <= d_in,
          "blobs: need num_classes <= d_in for orthogonal centers");
  require(count % static_cast<std::size_t>(num_classes) == 0,
          "blobs: count must be divisible by num_classes");
  require(separation >= 0.0, "blobs: separation must be >= 0");
  Dataset ds;
  ds.features = Matrix(count, d_in);
  ds.labels.resize(count);
  ds.num_classes = num_classes;
  ds.name = "blobs";
  ds.normalization = "none";
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const int c = static_cast<int>(i % static_cast<std::size_t>(num_classes));
    ds.labels[i] = c;
    for (std::size_t j = 0; j < d_in; ++j) {
      double v = rng.normal();
      if (j == static_cast<std::size_t>(c)) v += separation;
      ds.features(i, j) = v;
    }
  }
  return ds;
}

// Deterministic 80/20-style split by seeded permutation.
inline std::pair<Dataset, Dataset> split_train_test(const Dataset& ds,
                                                    double test_fraction,
                                                    std::uint64_t seed) {
  require(test_fraction >= 0.0 && test_fraction < 1.0,
          "split: test_fraction must be in [0, 1)");
  const std::size_t M = ds.size();
  std::vector<std::size_t> perm(M);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = M; i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.below(i)]);
  }
  const std::size_t n_test = static_cast<std::size_t>(
      std::floor(test_fraction * static_cast<double>(M)));
  const std::size_t n_train = M - n_test;
  auto take = [&](std::size_t begin, std::size_t n, const char* tag) {
    Dataset out;
    out.features = Matrix(n, ds.dim());
    out.labels.resize(n);
    out.num_classes = ds.num_classes;
    out.name = ds.name + "/" + tag;
    out.normalization = ds.normalization;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t src = perm[begin + i];
      for (std::size_t j = 0; j < ds.dim(); ++j) {
        out.features(i, j) = ds.features(src, j);
      }
      out.labels[i] = ds.labels[src];
    }
    return out;
  };
  return {take(0, n_train, "train"), take(n_train, n_test, "test")};
}

// In-place per-column standardization (mean 0, sd 1). Columns with zero
// spread are left centered only.
inline void standardize_features(Dataset& ds) {
  const std::size_t M = ds.size();
  require(M >= 2, "standardize: need at least 2 examples");
  for (std::size_t j = 0; j < ds.dim(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < M; ++i) mean += ds.features(i, j);
    mean /= static_cast<double>(M);
    double var = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      const double d = ds.features(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(M);
    const double sd = std::sqrt(var);
    for (std::size_t i = 0; i < M; ++i) {
      ds.features(i, j) -= mean;
      if (sd > 0.0) ds.features(i, j) /= sd;
    }
  }
  ds.normalization = "standardized";
}

}  // namespace cabs
