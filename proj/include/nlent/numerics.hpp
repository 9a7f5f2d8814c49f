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

// Dense numeric primitives: matrices, probability batches, label vectors,
// softmax and its Jacobian product, prediction entropy and the
// central-difference gradient oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nlent/errors.hpp"

namespace nlent {

/// Lower clamp applied to every probability before it enters a logarithm.
inline constexpr double kProbEps = 1e-12;

/// Default central-difference step.
inline constexpr double kFiniteDiffStep = 1e-5;

inline double clamp_prob(double p) noexcept { return std::clamp(p, kProbEps, 1.0); }

/// Row-major matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
      throw InvalidInput("DenseMatrix: " + std::to_string(values_.size()) +
                         " values for shape " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
    }
  }
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    values_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw InvalidInput("DenseMatrix: ragged initializer");
      values_.insert(values_.end(), r.begin(), r.end());
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return values_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// A DenseMatrix whose rows are probability distributions.
class ProbBatch {
 public:
  static constexpr double kRowSumTolerance = 1e-9;

  /// Validates that every entry is in [0, 1] and every row sums to 1.
  explicit ProbBatch(DenseMatrix probs) : probs_(std::move(probs)) {
    for (std::size_t i = 0; i < probs_.rows(); ++i) {
      double sum = 0.0;
      for (double p : probs_.row(i)) {
        if (!(p >= 0.0 && p <= 1.0)) {
          throw InvalidInput("ProbBatch: entry outside [0, 1] in row " + std::to_string(i));
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        throw InvalidInput("ProbBatch: row " + std::to_string(i) + " sums to " +
                           std::to_string(sum));
      }
    }
  }

  std::size_t rows() const noexcept { return probs_.rows(); }
  std::size_t cols() const noexcept { return probs_.cols(); }
  double operator()(std::size_t r, std::size_t c) const noexcept { return probs_(r, c); }
  std::span<const double> row(std::size_t r) const noexcept { return probs_.row(r); }
  const DenseMatrix& matrix() const noexcept { return probs_; }

 private:
  struct Unchecked {};
  ProbBatch(DenseMatrix probs, Unchecked) noexcept : probs_(std::move(probs)) {}
  friend ProbBatch softmax(const DenseMatrix& logits);

  DenseMatrix probs_;
};

/// Integer class labels in [0, num_classes).
class LabelVector {
 public:
  LabelVector() = default;
  LabelVector(std::vector<int> labels, int num_classes)
      : labels_(std::move(labels)), num_classes_(num_classes) {
    if (num_classes_ < 2) {
      throw InvalidInput("LabelVector: need at least 2 classes, got " +
                         std::to_string(num_classes_));
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] < 0 || labels_[i] >= num_classes_) {
        throw InvalidInput("LabelVector: label " + std::to_string(labels_[i]) + " at index " +
                           std::to_string(i) + " outside [0, " + std::to_string(num_classes_) +
                           ")");
      }
    }
  }

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  int num_classes() const noexcept { return num_classes_; }
  int operator[](std::size_t i) const noexcept { return labels_[i]; }
  std::span<const int> labels() const noexcept { return labels_; }
  auto begin() const noexcept { return labels_.begin(); }
  auto end() const noexcept { return labels_.end(); }

  friend bool operator==(const LabelVector&, const LabelVector&) = default;

 private:
  std::vector<int> labels_;
  int num_classes_ = 2;
};

/// Row-wise softmax with per-row max subtraction.
inline ProbBatch softmax(const DenseMatrix& logits) {
  if (!logits.all_finite()) throw InvalidInput("softmax: non-finite logit");
  DenseMatrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    auto p = out.row(i);
    if (z.empty()) continue;
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      p[k] = std::exp(z[k] - zmax);
      sum += p[k];
    }
    for (double& v : p) v /= sum;
  }
  return ProbBatch(std::move(out), ProbBatch::Unchecked{});
}

inline ProbBatch one_hot(const LabelVector& labels) {
  DenseMatrix out(labels.size(), static_cast<std::size_t>(labels.num_classes()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return ProbBatch(std::move(out));
}

/// Shannon entropy (nats) of one probability row; 0 * ln(1/0) is taken as 0.
inline double row_entropy(std::span<const double> p) noexcept {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(clamp_prob(v));
  }
  return h;
}

/// Mean over rows of the Shannon entropy, in [0, ln k_c].
inline double mean_prediction_entropy(const ProbBatch& probs) {
  if (probs.rows() == 0) throw InvalidInput("mean_prediction_entropy: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) total += row_entropy(probs.row(i));
  return total / static_cast<double>(probs.rows());
}

/// Entropy drop between an earlier and a later measurement.
inline double entropy_reduction(double h_early, double h_late) noexcept {
  return h_early - h_late;
}

/// Maps dL/dp to dL/dz through the softmax Jacobian:
/// dz_j = p_j * (g_j - sum_k g_k p_k).
inline DenseMatrix softmax_backward(const ProbBatch& probs, const DenseMatrix& grad_wrt_probs) {
  if (probs.rows() != grad_wrt_probs.rows() || probs.cols() != grad_wrt_probs.cols()) {
    throw InvalidInput("softmax_backward: shape mismatch");
  }
  DenseMatrix out(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto p = probs.row(i);
    const auto g = grad_wrt_probs.row(i);
    double dot = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) dot += g[k] * p[k];
    auto dz = out.row(i);
    for (std::size_t k = 0; k < p.size(); ++k) dz[k] = p[k] * (g[k] - dot);
  }
  return out;
}

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central-difference gradient of f at x.
inline std::vector<double> finite_diff_gradient(const ScalarFunction& f,
                                                std::span<const double> x,
                                                double step = kFiniteDiffStep) {
  if (!(step > 0.0)) throw InvalidInput("finite_diff_gradient: step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = f(probe);
    probe[i] = saved - step;
    const double down = f(probe);
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw OracleFailure("finite_diff_gradient: non-finite value at coordinate " +
                          std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

/// ||a - b||_2 / max(||a||_2, ||b||_2, floor). The floor keeps comparisons of
/// two near-zero gradients from dividing noise by noise.
inline double relative_error(std::span<const double> a, std::span<const double> b,
                             double floor = 1e-8) {
  if (a.size() != b.size()) throw InvalidInput("relative_error: length mismatch");
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

}  // namespace nlent
