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

// Analytic-versus-finite-difference gradient checks for every loss (through
// softmax and the entropy term) and for the full model pipeline.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "nlent/losses.hpp"
#include "nlent/model.hpp"
#include "nlent/numerics.hpp"
#include "nlent/random.hpp"

namespace nlent {

struct GradCheckResult {
  std::string name;
  int points = 0;
  double max_rel_error = 0.0;
  double tolerance = 1e-4;
  bool passed() const noexcept { return max_rel_error < tolerance; }
};

/// Random hyperparameters inside each family's valid range.
inline LossParams random_loss_params(Xoshiro256& rng) {
  LossParams p;
  p.gamma = rng.uniform(0.0, 3.0);
  p.gce_q = rng.uniform(0.1, 1.0);
  p.rce_a = rng.uniform(-8.0, -1.0);
  p.agce_a = rng.uniform(0.1, 2.0);
  p.agce_q = rng.uniform(0.1, 2.0);
  p.alpha = rng.uniform(0.0, 2.0);
  p.beta = rng.uniform(0.0, 2.0);
  return p;
}

/// Total regularized batch loss as a function of flattened logits.
inline double batch_loss_of_logits(const LossSpec& spec, std::span<const double> flat_logits,
                                   std::size_t rows, const LabelVector& labels, double lambda) {
  DenseMatrix z(rows, static_cast<std::size_t>(labels.num_classes()),
                std::vector<double>(flat_logits.begin(), flat_logits.end()));
  return regularized_batch_loss(spec, softmax(z), labels, lambda).value;
}

/// Gradient of the regularized batch loss w.r.t. logits, analytic vs central
/// differences, at `points` random (logits, labels, params, lambda) draws.
inline GradCheckResult check_loss_gradient(LossKind kind, int points, std::uint64_t seed,
                                           double tolerance = 1e-4) {
  GradCheckResult result{"logits/" + std::string(to_string(kind)), points, 0.0, tolerance};
  Xoshiro256 rng(seed, Stream::kInit, static_cast<std::uint64_t>(kind) + 1000);
  for (int pt = 0; pt < points; ++pt) {
    const int kc = 2 + static_cast<int>(rng.below(9));
    const std::size_t rows = 1 + rng.below(4);
    DenseMatrix z(rows, static_cast<std::size_t>(kc));
    for (double& v : z.values()) v = 1.5 * rng.normal();
    std::vector<int> y(rows);
    for (int& label : y) label = static_cast<int>(rng.below(static_cast<std::uint64_t>(kc)));
    const LabelVector labels(std::move(y), kc);
    LossSpec spec{kind, random_loss_params(rng), std::nullopt};
    const double lambda = rng.uniform(0.0, 1.0);

    const ProbBatch probs = softmax(z);
    const auto loss = regularized_batch_loss(spec, probs, labels, lambda);
    const DenseMatrix analytic = softmax_backward(probs, loss.grad_wrt_probs);
    const auto numeric = finite_diff_gradient(
        [&](std::span<const double> flat) {
          return batch_loss_of_logits(spec, flat, rows, labels, lambda);
        },
        z.values());
    result.max_rel_error =
        std::max(result.max_rel_error, relative_error(analytic.values(), numeric));
  }
  return result;
}

/// d(total loss)/d(every parameter) of a small MLP, analytic vs central
/// differences, for one loss kind.
inline GradCheckResult check_model_gradient(LossKind kind, int points, std::uint64_t seed,
                                            const Architecture& arch = Architecture::mlp(2, 4),
                                            std::size_t input_dim = 5, int num_classes = 3,
                                            std::size_t batch = 8, double tolerance = 1e-4) {
  GradCheckResult result{"params/" + std::string(to_string(kind)), points, 0.0, tolerance};
  Xoshiro256 rng(seed, Stream::kInit, static_cast<std::uint64_t>(kind) + 2000);
  for (int pt = 0; pt < points; ++pt) {
    ModelParams params = init_params(arch, input_dim, num_classes, rng());
    // Non-zero biases so every layer's bias gradient is exercised.
    auto flat = params.flatten();
    for (double& v : flat) v += 0.1 * rng.normal();
    params.assign_flat(flat);
    DenseMatrix x(batch, input_dim);
    for (double& v : x.values()) v = rng.normal();
    std::vector<int> y(batch);
    for (int& label : y) label = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_classes)));
    const LabelVector labels(std::move(y), num_classes);
    LossSpec spec{kind, random_loss_params(rng), std::nullopt};
    const double lambda = rng.uniform(0.0, 0.5);

    const auto fwd = forward(params, x);
    const ProbBatch probs = softmax(fwd.logits);
    const auto loss = regularized_batch_loss(spec, probs, labels, lambda);
    const Gradients grads = backward(params, fwd.cache, softmax_backward(probs, loss.grad_wrt_probs));
    std::vector<double> analytic;
    for (const auto& l : grads.layers) {
      analytic.insert(analytic.end(), l.weight.values().begin(), l.weight.values().end());
      analytic.insert(analytic.end(), l.bias.begin(), l.bias.end());
    }
    ModelParams probe = params;
    const auto numeric = finite_diff_gradient(
        [&](std::span<const double> theta) {
          probe.assign_flat(theta);
          return regularized_batch_loss(spec, softmax(predict_logits(probe, x)), labels, lambda)
              .value;
        },
        flat);
    result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic, numeric));
  }
  return result;
}

/// Every loss kind through softmax (with the entropy term) plus the
/// end-to-end model check.
inline std::vector<GradCheckResult> run_gradient_suite(int points = 100, std::uint64_t seed = 7,
                                                       int model_points = 5) {
  std::vector<GradCheckResult> out;
  for (LossKind kind : kAllLossKinds) out.push_back(check_loss_gradient(kind, points, seed));
  for (LossKind kind : kAllLossKinds) out.push_back(check_model_gradient(kind, model_points, seed));
  return out;
}

}  // namespace nlent
