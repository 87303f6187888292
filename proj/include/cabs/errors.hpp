#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace cabs {

// Overflow/NaN during training. Carries the step context so a failed run can
// be reported as "step k, batch m, loss F" instead of a bare message.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& msg)
      : std::runtime_error(msg) {}

  numerical_error(const std::string& msg, long long step, long long batch_size,
                  double loss)
      : std::runtime_error(format(msg, step, batch_size, loss)),
        step_(step),
        batch_size_(batch_size),
        loss_(loss) {}

  long long step() const { return step_; }
  long long batch_size() const { return batch_size_; }
  double loss() const { return loss_; }

 private:
  static std::string format(const std::string& msg, long long step,
                            long long batch_size, double loss) {
    std::ostringstream os;
    os << msg << " (step=" << step << " batch_size=" << batch_size
       << " loss=" << loss << ")";
    return os.str();
  }

  long long step_ = -1;
  long long batch_size_ = -1;
  double loss_ = std::nan("");
};

// L*alpha >= 2: the expected-descent model admits no batch size at all.
class infeasible_step_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed IDX file; offset points at the offending byte.
class idx_parse_error : public std::runtime_error {
 public:
  idx_parse_error(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg + " (at byte offset " + std::to_string(offset) +
                           ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_ = 0;
};

// Bad config file or flag; the CLI maps this to exit code 2.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace cabs
