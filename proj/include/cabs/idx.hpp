#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "cabs/dataset.hpp"
#include "cabs/errors.hpp"

namespace cabs {

// IDX container as used by the classic handwritten-digit sets: a big-endian
// magic word whose third byte is the element type (0x08 = unsigned byte) and
// fourth byte the rank, followed by big-endian uint32 dimensions, followed by
// the raw payload.
constexpr std::uint32_t kIdxImagesMagic = 0x00000803;  // rank-3 ubyte tensor
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;  // rank-1 ubyte vector

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b,
                               std::size_t offset, const std::string& path) {
  if (offset + 4 > b.size()) {
    throw idx_parse_error(path + ": truncated header", offset);
  }
  return (std::uint32_t(b[offset]) << 24) | (std::uint32_t(b[offset + 1]) << 16) |
         (std::uint32_t(b[offset + 2]) << 8) | std::uint32_t(b[offset + 3]);
}

inline void write_be32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

struct IdxTensor {
  std::vector<std::uint32_t> dims;
  std::vector<unsigned char> payload;
};

inline IdxTensor parse_idx(const std::string& path,
                           std::uint32_t expected_magic) {
  const auto bytes = read_file_bytes(path);
  const std::uint32_t magic = read_be32(bytes, 0, path);
  if (magic != expected_magic) {
    throw idx_parse_error(path + ": bad magic word", 0);
  }
  const std::size_t rank = magic & 0xFF;
  IdxTensor t;
  std::size_t expected = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    t.dims.push_back(read_be32(bytes, 4 + 4 * i, path));
    expected *= t.dims.back();
  }
  const std::size_t payload_offset = 4 + 4 * rank;
  const std::size_t actual = bytes.size() - payload_offset;
  if (actual != expected) {
    throw idx_parse_error(path + ": payload size mismatch, expected " +
                              std::to_string(expected) + " bytes, got " +
                              std::to_string(actual),
                          payload_offset);
  }
  t.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(payload_offset),
                   bytes.end());
  return t;
}

}  // namespace detail

// Loads an images/labels pair into a Dataset with features scaled to
// [0, 1] by /255. num_classes is taken as max(label) + 1.
inline Dataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  const auto images = detail::parse_idx(images_path, kIdxImagesMagic);
  const auto labels = detail::parse_idx(labels_path, kIdxLabelsMagic);
  const std::size_t n = images.dims[0];
  if (labels.dims[0] != n) {
    throw idx_parse_error(labels_path + ": label count " +
                              std::to_string(labels.dims[0]) +
                              " does not match image count " +
                              std::to_string(n),
                          4);
  }
  const std::size_t d = static_cast<std::size_t>(images.dims[1]) * images.dims[2];
  Dataset ds;
  ds.features = Matrix(n, d);
  ds.labels.resize(n);
  ds.name = images_path;
  ds.normalization = "bytes/255";
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      ds.features(i, j) = static_cast<double>(images.payload[i * d + j]) / 255.0;
    }
    ds.labels[i] = labels.payload[i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = max_label + 1;
  return ds;
}

inline void write_idx_images(const std::string& path,
                             const std::vector<unsigned char>& bytes,
                             std::uint32_t n, std::uint32_t rows,
                             std::uint32_t cols) {
  require(bytes.size() == std::size_t(n) * rows * cols,
          "write_idx_images: payload size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  detail::write_be32(out, kIdxImagesMagic);
  detail::write_be32(out, n);
  detail::write_be32(out, rows);
  detail::write_be32(out, cols);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

inline void write_idx_labels(const std::string& path,
                             const std::vector<unsigned char>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  detail::write_be32(out, kIdxLabelsMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

// Writes a small deterministic images/labels fixture pair into dir.
inline void write_idx_fixtures(const std::string& dir) {
  const std::uint32_t n = 8, rows = 28, cols = 28;
  std::vector<unsigned char> pixels(std::size_t(n) * rows * cols);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = static_cast<unsigned char>((i * 37 + 11) % 256);
  }
  std::vector<unsigned char> labels(n);
  for (std::uint32_t i = 0; i < n; ++i) labels[i] = static_cast<unsigned char>(i % 8);
  write_idx_images(dir + "/fixture-images-idx3-ubyte", pixels, n, rows, cols);
  write_idx_labels(dir + "/fixture-labels-idx1-ubyte", labels);
}

}  // namespace cabs
