#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cabs/errors.hpp"

namespace cabs {

// One evaluation-interval row of an experiment log.
struct MetricsRecord {
  long long step = 0;
  long long examples_accessed = 0;
  long long batch_size = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  double trace_sigma_est = 0.0;  // smoothed variance trace (xi)
  double f_avg = 0.0;
};

constexpr const char* kCsvHeader =
    "step,examples_accessed,batch_size,train_loss,test_accuracy,"
    "trace_sigma_est,f_avg";

// Fixed format: 12 significant digits via %.12g, one row per record,
// newline-terminated. The byte stream is deterministic for given records.
inline std::string csv_string(const std::vector<MetricsRecord>& records) {
  std::string out(kCsvHeader);
  out += '\n';
  char buf[256];
  for (const MetricsRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%lld,%lld,%lld,%.12g,%.12g,%.12g,%.12g\n",
                  r.step, r.examples_accessed, r.batch_size, r.train_loss,
                  r.test_accuracy, r.trace_sigma_est, r.f_avg);
    out += buf;
  }
  return out;
}

inline void emit_csv(const std::vector<MetricsRecord>& records,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  const std::string s = csv_string(records);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::vector<MetricsRecord> parse_csv_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw std::runtime_error("metrics csv: bad or missing header");
  }
  std::vector<MetricsRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRecord r;
    const int n = std::sscanf(line.c_str(), "%lld,%lld,%lld,%lf,%lf,%lf,%lf",
                              &r.step, &r.examples_accessed, &r.batch_size,
                              &r.train_loss, &r.test_accuracy,
                              &r.trace_sigma_est, &r.f_avg);
    if (n != 7) {
      throw std::runtime_error("metrics csv: malformed row: " + line);
    }
    records.push_back(r);
  }
  return records;
}

inline std::vector<MetricsRecord> parse_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv_string(ss.str());
}

}  // namespace cabs
