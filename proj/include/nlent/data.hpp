/*
 * Copyright 2026 The nlent Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Dataset loading: MNIST IDX files, the NLFC feature cache, synthetic
// Gaussian blobs, and seeded train/validation splitting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nlent/binary_io.hpp"
#include "nlent/errors.hpp"
#include "nlent/numerics.hpp"
#include "nlent/random.hpp"

namespace nlent {

struct LabeledDataset {
  DenseMatrix features;
  LabelVector labels;
  std::string name;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }
  int num_classes() const noexcept { return labels.num_classes(); }

  void validate() const {
    if (features.rows() != labels.size()) {
      throw InvalidInput("LabeledDataset '" + name + "': " + std::to_string(features.rows()) +
                         " feature rows but " + std::to_string(labels.size()) + " labels");
    }
    if (!features.all_finite()) throw InvalidInput("LabeledDataset '" + name + "': non-finite feature");
  }
};

/// Rows of `ds` at `indices`, in that order.
inline LabeledDataset subset(const LabeledDataset& ds, std::span<const std::size_t> indices,
                             std::string name) {
  DenseMatrix features(indices.size(), ds.dim());
  std::vector<int> labels(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = ds.features.row(indices[i]);
    std::copy(src.begin(), src.end(), features.row(i).begin());
    labels[i] = ds.labels[indices[i]];
  }
  return {std::move(features), LabelVector(std::move(labels), ds.num_classes()), std::move(name)};
}

// ---------------------------------------------------------------------------
// IDX (big-endian): images magic 0x00000803 | u32 n | u32 rows | u32 cols |
// n*rows*cols bytes; labels magic 0x00000801 | u32 n | n bytes.

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
inline constexpr int kMnistClasses = 10;

inline LabeledDataset decode_mnist_idx(std::span<const std::uint8_t> image_bytes,
                                       std::span<const std::uint8_t> label_bytes,
                                       const std::string& images_name = "images",
                                       const std::string& labels_name = "labels") {
  io::Reader img(image_bytes, images_name);
  const auto img_magic = img.be<std::uint32_t>("image magic");
  if (img_magic != kIdxImagesMagic) {
    throw FormatError(images_name + ": image magic " + std::to_string(img_magic) +
                      ", expected 2051");
  }
  const std::uint64_t n = img.be<std::uint32_t>("image count");
  const std::uint64_t rows = img.be<std::uint32_t>("row count");
  const std::uint64_t cols = img.be<std::uint32_t>("column count");
  if (n == 0 || rows == 0 || cols == 0) throw FormatError(images_name + ": empty dimension");
  const std::uint64_t d = rows * cols;
  if (img.remaining() != n * d) {
    throw FormatError(images_name + ": header declares " + std::to_string(n * d) +
                      " pixel bytes, file has " + std::to_string(img.remaining()));
  }

  io::Reader lab(label_bytes, labels_name);
  const auto lab_magic = lab.be<std::uint32_t>("label magic");
  if (lab_magic != kIdxLabelsMagic) {
    throw FormatError(labels_name + ": label magic " + std::to_string(lab_magic) +
                      ", expected 2049");
  }
  const std::uint64_t n_labels = lab.be<std::uint32_t>("label count");
  if (n_labels != n) {
    throw FormatError(labels_name + ": " + std::to_string(n_labels) + " labels for " +
                      std::to_string(n) + " images");
  }
  if (lab.remaining() != n) {
    throw FormatError(labels_name + ": header declares " + std::to_string(n) +
                      " labels, file has " + std::to_string(lab.remaining()) + " bytes");
  }

  DenseMatrix features(n, d);
  const auto pixels = img.take(n * d, "pixels");
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    features.values()[i] = static_cast<double>(pixels[i]) / 255.0;
  }
  const auto raw_labels = lab.take(n, "labels");
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (raw_labels[i] >= kMnistClasses) {
      throw FormatError(labels_name + ": label " + std::to_string(raw_labels[i]) +
                        " at index " + std::to_string(i) + " is not a digit");
    }
    labels[i] = raw_labels[i];
  }
  return {std::move(features), LabelVector(std::move(labels), kMnistClasses), "mnist"};
}

inline LabeledDataset load_mnist_idx(const std::filesystem::path& images_path,
                                     const std::filesystem::path& labels_path) {
  const auto images = io::read_file(images_path);
  const auto labels = io::read_file(labels_path);
  return decode_mnist_idx(images, labels, images_path.string(), labels_path.string());
}

/// Inverse of decode_mnist_idx for rows x cols images; pixel
/// values are rounded to bytes. Mostly useful for fixtures.
inline std::pair<std::string, std::string> encode_mnist_idx(const LabeledDataset& ds,
                                                            std::uint32_t rows,
                                                            std::uint32_t cols) {
  if (static_cast<std::size_t>(rows) * cols != ds.dim()) {
    throw InvalidInput("encode_mnist_idx: rows*cols != feature dimension");
  }
  io::Writer img;
  img.be<std::uint32_t>(kIdxImagesMagic);
  img.be<std::uint32_t>(static_cast<std::uint32_t>(ds.size()));
  img.be<std::uint32_t>(rows);
  img.be<std::uint32_t>(cols);
  for (double v : ds.features.values()) {
    img.byte(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  io::Writer lab;
  lab.be<std::uint32_t>(kIdxLabelsMagic);
  lab.be<std::uint32_t>(static_cast<std::uint32_t>(ds.size()));
  for (int y : ds.labels) lab.byte(static_cast<std::uint8_t>(y));
  return {img.buffer(), lab.buffer()};
}

// ---------------------------------------------------------------------------
// Feature cache "NLFC" v1, little-endian:
//   offset 0  char[4] "NLFC"
//   offset 4  u32 version = 1
//   offset 8  u64 n
//   offset 16 u64 d
//   offset 24 u32 k_c
//   offset 28 n*d f32 features, row-major
//   then      n i32 labels

inline constexpr std::uint32_t kFeatureCacheVersion = 1;
inline constexpr std::size_t kFeatureCacheHeaderBytes = 28;

inline LabeledDataset decode_feature_cache(std::span<const std::uint8_t> bytes,
                                           const std::string& source = "feature cache") {
  io::Reader r(bytes, source);
  const auto magic = r.take(4, "magic");
  if (std::string_view(reinterpret_cast<const char*>(magic.data()), 4) != "NLFC") {
    throw FormatError(source + ": bad magic, expected NLFC");
  }
  const auto version = r.le<std::uint32_t>("version");
  if (version != kFeatureCacheVersion) {
    throw FormatError(source + ": unsupported version " + std::to_string(version));
  }
  const auto n = r.le<std::uint64_t>("n");
  const auto d = r.le<std::uint64_t>("d");
  const auto kc = r.le<std::uint32_t>("k_c");
  if (n == 0 || d == 0 || kc == 0) throw FormatError(source + ": n, d and k_c must be positive");
  if (kc < 2) throw FormatError(source + ": k_c must be at least 2");
  // Guard the multiplication before trusting it for a size check.
  if (d > r.remaining() / 4 || n > r.remaining() / (4 * d + 4)) {
    throw FormatError(source + ": header declares more data than the file holds");
  }
  if (r.remaining() != n * d * 4 + n * 4) {
    throw FormatError(source + ": expected " + std::to_string(n * d * 4 + n * 4) +
                      " payload bytes, found " + std::to_string(r.remaining()));
  }
  DenseMatrix features(n, d);
  for (double& v : features.values()) {
    const float f = r.le<float>("features");
    if (!std::isfinite(f)) throw FormatError(source + ": non-finite feature value");
    v = static_cast<double>(f);
  }
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = r.le<std::int32_t>("labels");
    if (y < 0 || static_cast<std::uint32_t>(y) >= kc) {
      throw FormatError(source + ": label " + std::to_string(y) + " at index " +
                        std::to_string(i) + " outside [0, " + std::to_string(kc) + ")");
    }
    labels[i] = y;
  }
  return {std::move(features), LabelVector(std::move(labels), static_cast<int>(kc)),
          "feature-cache"};
}

inline std::string encode_feature_cache(const LabeledDataset& ds) {
  io::Writer w;
  w.bytes("NLFC");
  w.le<std::uint32_t>(kFeatureCacheVersion);
  w.le<std::uint64_t>(ds.size());
  w.le<std::uint64_t>(ds.dim());
  w.le<std::uint32_t>(static_cast<std::uint32_t>(ds.num_classes()));
  for (double v : ds.features.values()) w.le<float>(static_cast<float>(v));
  for (int y : ds.labels) w.le<std::int32_t>(y);
  return w.buffer();
}

inline LabeledDataset load_feature_cache(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return decode_feature_cache(bytes, path.string());
}

inline void save_feature_cache(const LabeledDataset& ds, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_feature_cache(ds));
}

// ---------------------------------------------------------------------------

/// k_c unit-covariance Gaussian clusters. Class c is centred at
/// separation * e_(c mod d), negated for the second lap when d < k_c <= 2d.
/// Labels cycle 0, 1, ..., k_c-1 so classes are balanced.
inline LabeledDataset synth_blobs(std::size_t n, int num_classes, std::size_t dim,
                                  double separation, std::uint64_t seed) {
  if (num_classes < 2) throw InvalidInput("synth_blobs: need at least 2 classes");
  if (n < static_cast<std::size_t>(num_classes)) throw InvalidInput("synth_blobs: n < k_c");
  if (dim < 1) throw InvalidInput("synth_blobs: d must be >= 1");
  if (static_cast<std::size_t>(num_classes) > 2 * dim) {
    throw InvalidInput("synth_blobs: k_c > 2d leaves classes without a distinct mean");
  }
  if (!(separation >= 0.0) || !std::isfinite(separation)) {
    throw InvalidInput("synth_blobs: separation must be >= 0");
  }
  DenseMatrix features(n, dim);
  std::vector<int> labels(n);
  Xoshiro256 rng(seed, Stream::kSynth);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % static_cast<std::size_t>(num_classes));
    labels[i] = c;
    auto x = features.row(i);
    for (double& v : x) v = rng.normal();
    const std::size_t axis = static_cast<std::size_t>(c) % dim;
    const double sign = static_cast<std::size_t>(c) < dim ? 1.0 : -1.0;
    x[axis] += sign * separation;
  }
  return {std::move(features), LabelVector(std::move(labels), num_classes), "synth-blobs"};
}

/// Seeded permutation of [0, n).
inline std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed, Stream stream,
                                            std::uint64_t index = 0) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Xoshiro256 rng(seed, stream, index);
  shuffle(order, rng);
  return order;
}

struct Split {
  LabeledDataset train;
  LabeledDataset val;
  std::vector<std::size_t> train_indices;  // positions in the input dataset
  std::vector<std::size_t> val_indices;
};

/// Seeded shuffle, then the first floor(n * val_fraction) samples become
/// validation and the rest training.
inline Split train_val_split(const LabeledDataset& ds, double val_fraction, std::uint64_t seed,
                             Stream stream = Stream::kSplit) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw InvalidInput("train_val_split: fraction must be in (0, 1)");
  }
  const std::size_t n = ds.size();
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * val_fraction));
  if (n_val == 0 || n_val == n) {
    throw InvalidInput("train_val_split: splitting " + std::to_string(n) + " samples at " +
                       std::to_string(val_fraction) + " leaves one side empty");
  }
  auto order = permutation(n, seed, stream);
  Split out;
  out.val_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  out.train_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  out.train = subset(ds, out.train_indices, ds.name + "/train");
  out.val = subset(ds, out.val_indices, ds.name + "/val");
  return out;
}

}  // namespace nlent
