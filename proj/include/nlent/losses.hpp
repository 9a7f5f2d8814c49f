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

// Classification losses on probability rows. Every loss returns its value
// and the gradient with respect to the probability row; the chain rule to
// logits lives in softmax_backward.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nlent/errors.hpp"
#include "nlent/numerics.hpp"
#include "nlent/random.hpp"

namespace nlent {

enum class LossKind {
  kCE,
  kFocal,
  kMAE,
  kGCE,
  kRCE,
  kSCE,
  kNCE,
  kAGCE,
  kNNCE,
  kNL,
  kNCEandRCE,
  kNCEandAGCE,
  kANLCE,
};

inline constexpr std::array<LossKind, 13> kAllLossKinds = {
    LossKind::kCE,   LossKind::kFocal, LossKind::kMAE,       LossKind::kGCE,
    LossKind::kRCE,  LossKind::kSCE,   LossKind::kNCE,       LossKind::kAGCE,
    LossKind::kNNCE, LossKind::kNL,    LossKind::kNCEandRCE, LossKind::kNCEandAGCE,
    LossKind::kANLCE,
};

inline std::string_view to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::kCE: return "ce";
    case LossKind::kFocal: return "fl";
    case LossKind::kMAE: return "mae";
    case LossKind::kGCE: return "gce";
    case LossKind::kRCE: return "rce";
    case LossKind::kSCE: return "sce";
    case LossKind::kNCE: return "nce";
    case LossKind::kAGCE: return "agce";
    case LossKind::kNNCE: return "nnce";
    case LossKind::kNL: return "nl";
    case LossKind::kNCEandRCE: return "nce+rce";
    case LossKind::kNCEandAGCE: return "nce+agce";
    case LossKind::kANLCE: return "anl-ce";
  }
  return "?";
}

inline std::optional<LossKind> parse_loss_kind(std::string_view name) noexcept {
  for (LossKind kind : kAllLossKinds) {
    if (to_string(kind) == name) return kind;
  }
  if (name == "focal") return LossKind::kFocal;
  return std::nullopt;
}

/// Hyperparameters for every loss family. Only the ones a kind uses matter.
struct LossParams {
  double gamma = 0.5;    // focal exponent
  double gce_q = 0.7;    // GCE exponent
  double rce_a = -4.0;   // stand-in for ln 0 in RCE
  double agce_a = 0.6;
  double agce_q = 0.6;
  double alpha = 1.0;    // weight of the active / CE part
  double beta = 1.0;     // weight of the passive / RCE part
};

enum class ScheduleKind { kConstant, kLinear };

struct LambdaSchedule {
  ScheduleKind kind = ScheduleKind::kConstant;
  double lambda_max = 0.0;
  int total_epochs = 1;

  void validate() const {
    if (!(lambda_max >= 0.0) || !std::isfinite(lambda_max)) {
      throw InvalidInput("LambdaSchedule: lambda_max must be >= 0");
    }
    if (total_epochs < 1) throw InvalidInput("LambdaSchedule: total_epochs must be >= 1");
  }
};

/// Entropy weight for a zero-based epoch. The linear ramp reaches
/// lambda_max at the last epoch.
inline double lambda_at(const LambdaSchedule& schedule, int epoch) {
  schedule.validate();
  if (epoch < 0 || epoch >= schedule.total_epochs) {
    throw InvalidInput("lambda_at: epoch " + std::to_string(epoch) + " outside [0, " +
                       std::to_string(schedule.total_epochs) + ")");
  }
  if (schedule.kind == ScheduleKind::kConstant || schedule.total_epochs == 1) {
    return schedule.lambda_max;
  }
  return schedule.lambda_max * static_cast<double>(epoch) /
         static_cast<double>(schedule.total_epochs - 1);
}

struct LossSpec {
  LossKind kind = LossKind::kCE;
  LossParams params{};
  std::optional<LambdaSchedule> entropy_schedule;

  void validate() const {
    const auto fail = [&](const std::string& what) {
      throw InvalidInput("LossSpec(" + std::string(to_string(kind)) + "): " + what);
    };
    const auto& p = params;
    switch (kind) {
      case LossKind::kFocal:
        if (!(p.gamma >= 0.0)) fail("gamma must be >= 0");
        break;
      case LossKind::kGCE:
        if (!(p.gce_q > 0.0 && p.gce_q <= 1.0)) fail("q must be in (0, 1]");
        break;
      case LossKind::kRCE:
        if (!(p.rce_a < 0.0)) fail("A must be < 0");
        break;
      case LossKind::kSCE:
      case LossKind::kNCEandRCE:
        if (!(p.rce_a < 0.0)) fail("A must be < 0");
        if (!(p.alpha >= 0.0 && p.beta >= 0.0)) fail("alpha and beta must be >= 0");
        break;
      case LossKind::kAGCE:
        if (!(p.agce_a > 0.0)) fail("a must be > 0");
        if (!(p.agce_q > 0.0)) fail("q must be > 0");
        break;
      case LossKind::kNCEandAGCE:
        if (!(p.agce_a > 0.0)) fail("a must be > 0");
        if (!(p.agce_q > 0.0)) fail("q must be > 0");
        if (!(p.alpha >= 0.0 && p.beta >= 0.0)) fail("alpha and beta must be >= 0");
        break;
      case LossKind::kANLCE:
        if (!(p.alpha >= 0.0 && p.beta >= 0.0)) fail("alpha and beta must be >= 0");
        break;
      default:
        break;
    }
    if (entropy_schedule) entropy_schedule->validate();
  }
};

struct LossGrad {
  double value = 0.0;
  std::vector<double> grad;
};

namespace detail {

inline void check_row(std::span<const double> p, int y) {
  if (p.size() < 2) throw InvalidInput("loss: probability row needs at least 2 classes");
  if (y < 0 || static_cast<std::size_t>(y) >= p.size()) {
    throw InvalidInput("loss: label " + std::to_string(y) + " outside [0, " +
                       std::to_string(p.size()) + ")");
  }
}

}  // namespace detail

/// -ln p_y
inline LossGrad ce(std::span<const double> p, int y) {
  detail::check_row(p, y);
  const double py = clamp_prob(p[y]);
  LossGrad out{-std::log(py), std::vector<double>(p.size(), 0.0)};
  out.grad[y] = -1.0 / py;
  return out;
}

/// -(1 - p_y)^gamma ln p_y
inline LossGrad focal(std::span<const double> p, int y, double gamma) {
  detail::check_row(p, y);
  const double py = clamp_prob(p[y]);
  const double rest = 1.0 - py;
  const double log_py = std::log(py);
  const double weight = std::pow(rest, gamma);
  LossGrad out{-weight * log_py, std::vector<double>(p.size(), 0.0)};
  // d/dp [(1-p)^g] = -g (1-p)^(g-1); that term vanishes with ln p as p -> 1.
  const double weight_slope = (gamma != 0.0 && rest > 0.0) ? gamma * std::pow(rest, gamma - 1.0)
                                                           : 0.0;
  out.grad[y] = weight_slope * log_py - weight / py;
  return out;
}

/// sum_k |q_k - p_k| for one-hot q.
inline LossGrad mae(std::span<const double> p, int y) {
  detail::check_row(p, y);
  LossGrad out{0.0, std::vector<double>(p.size(), 1.0)};
  for (std::size_t k = 0; k < p.size(); ++k) {
    out.value += std::abs((static_cast<int>(k) == y ? 1.0 : 0.0) - p[k]);
  }
  out.grad[y] = -1.0;
  return out;
}

/// (1 - p_y^q) / q
inline LossGrad gce(std::span<const double> p, int y, double q) {
  detail::check_row(p, y);
  const double py = clamp_prob(p[y]);
  LossGrad out{(1.0 - std::pow(py, q)) / q, std::vector<double>(p.size(), 0.0)};
  out.grad[y] = -std::pow(py, q - 1.0);
  return out;
}

/// -sum_k p_k ln q_k with ln 0 replaced by A: -A * sum_{k != y} p_k.
inline LossGrad rce(std::span<const double> p, int y, double a) {
  detail::check_row(p, y);
  LossGrad out{0.0, std::vector<double>(p.size(), -a)};
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (static_cast<int>(k) != y) out.value += p[k];
  }
  out.value *= -a;
  out.grad[y] = 0.0;
  return out;
}

/// alpha * active + beta * passive, value and gradient alike.
inline LossGrad apl_combine(const LossGrad& active, const LossGrad& passive, double alpha,
                            double beta) {
  if (active.grad.size() != passive.grad.size()) {
    throw InvalidInput("apl_combine: gradient length mismatch");
  }
  LossGrad out{alpha * active.value + beta * passive.value,
               std::vector<double>(active.grad.size())};
  for (std::size_t k = 0; k < out.grad.size(); ++k) {
    out.grad[k] = alpha * active.grad[k] + beta * passive.grad[k];
  }
  return out;
}

inline LossGrad sce(std::span<const double> p, int y, double alpha, double beta, double a) {
  return apl_combine(ce(p, y), rce(p, y, a), alpha, beta);
}

/// Normalized CE: ln p_y / sum_k ln p_k.
inline LossGrad nce(std::span<const double> p, int y) {
  detail::check_row(p, y);
  const std::size_t kc = p.size();
  std::vector<double> clamped(kc);
  double denom = 0.0;
  for (std::size_t k = 0; k < kc; ++k) {
    clamped[k] = clamp_prob(p[k]);
    denom -= std::log(clamped[k]);
  }
  const double numer = -std::log(clamped[y]);
  LossGrad out{numer / denom, std::vector<double>(kc)};
  const double denom_sq = denom * denom;
  for (std::size_t k = 0; k < kc; ++k) {
    const double own = static_cast<int>(k) == y ? denom : 0.0;
    out.grad[k] = (numer - own) / (clamped[k] * denom_sq);
  }
  return out;
}

/// Asymmetric GCE: ((a + 1)^q - (a + p_y)^q) / q
inline LossGrad agce(std::span<const double> p, int y, double a, double q) {
  detail::check_row(p, y);
  const double py = p[y];
  LossGrad out{(std::pow(a + 1.0, q) - std::pow(a + py, q)) / q,
               std::vector<double>(p.size(), 0.0)};
  out.grad[y] = -std::pow(a + py, q - 1.0);
  return out;
}

/// Normalized negative CE: 1 - ln(1 - p_y) / sum_k ln(1 - p_k), with 1 - p
/// clamped to [eps, 1].
inline LossGrad nnce(std::span<const double> p, int y) {
  detail::check_row(p, y);
  const std::size_t kc = p.size();
  std::vector<double> rest(kc);
  double denom = 0.0;
  for (std::size_t k = 0; k < kc; ++k) {
    rest[k] = clamp_prob(1.0 - p[k]);
    denom -= std::log(rest[k]);
  }
  const double numer = -std::log(rest[y]);
  LossGrad out{1.0 - numer / denom, std::vector<double>(kc)};
  const double denom_sq = denom * denom;
  for (std::size_t k = 0; k < kc; ++k) {
    const double own = static_cast<int>(k) == y ? denom : 0.0;
    out.grad[k] = -(own - numer) / (rest[k] * denom_sq);
  }
  return out;
}

/// Negative learning on a complementary label: -ln(1 - p_c).
inline LossGrad nl_loss(std::span<const double> p, int complementary_label) {
  detail::check_row(p, complementary_label);
  const double rest = clamp_prob(1.0 - p[complementary_label]);
  LossGrad out{-std::log(rest), std::vector<double>(p.size(), 0.0)};
  out.grad[complementary_label] = 1.0 / rest;
  return out;
}

/// Per-sample loss of any kind. For LossKind::kNL the label is the
/// complementary ("not this class") label.
inline LossGrad evaluate(const LossSpec& spec, std::span<const double> p, int y) {
  const auto& hp = spec.params;
  switch (spec.kind) {
    case LossKind::kCE: return ce(p, y);
    case LossKind::kFocal: return focal(p, y, hp.gamma);
    case LossKind::kMAE: return mae(p, y);
    case LossKind::kGCE: return gce(p, y, hp.gce_q);
    case LossKind::kRCE: return rce(p, y, hp.rce_a);
    case LossKind::kSCE: return sce(p, y, hp.alpha, hp.beta, hp.rce_a);
    case LossKind::kNCE: return nce(p, y);
    case LossKind::kAGCE: return agce(p, y, hp.agce_a, hp.agce_q);
    case LossKind::kNNCE: return nnce(p, y);
    case LossKind::kNL: return nl_loss(p, y);
    case LossKind::kNCEandRCE: return apl_combine(nce(p, y), rce(p, y, hp.rce_a), hp.alpha, hp.beta);
    case LossKind::kNCEandAGCE:
      return apl_combine(nce(p, y), agce(p, y, hp.agce_a, hp.agce_q), hp.alpha, hp.beta);
    case LossKind::kANLCE: return apl_combine(nce(p, y), nnce(p, y), hp.alpha, hp.beta);
  }
  throw InvalidInput("evaluate: unknown loss kind");
}

/// Uniform draw from the num_classes - 1 classes other than `label`.
inline int sample_complementary_label(int label, int num_classes, Xoshiro256& rng) {
  if (num_classes < 2) throw InvalidInput("sample_complementary_label: need >= 2 classes");
  const int draw = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_classes - 1)));
  return draw >= label ? draw + 1 : draw;
}

struct BatchLoss {
  double value = 0.0;
  double base = 0.0;      // mean base loss
  double entropy = 0.0;   // mean prediction entropy of the batch
  DenseMatrix grad_wrt_probs;
};

/// Mean base loss plus entropy_weight times the mean prediction entropy.
/// The gradient carries the 1/n of the batch mean.
inline BatchLoss regularized_batch_loss(const LossSpec& base, const ProbBatch& probs,
                                        const LabelVector& labels, double entropy_weight) {
  if (!(entropy_weight >= 0.0)) throw InvalidInput("regularized_batch_loss: lambda must be >= 0");
  if (probs.rows() != labels.size()) {
    throw InvalidInput("regularized_batch_loss: batch has " + std::to_string(probs.rows()) +
                       " rows but " + std::to_string(labels.size()) + " labels");
  }
  if (probs.rows() == 0) throw InvalidInput("regularized_batch_loss: empty batch");
  if (probs.cols() != static_cast<std::size_t>(labels.num_classes())) {
    throw InvalidInput("regularized_batch_loss: class count mismatch");
  }
  const std::size_t n = probs.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  BatchLoss out;
  out.grad_wrt_probs = DenseMatrix(n, probs.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const LossGrad lg = evaluate(base, probs.row(i), labels[i]);
    total += lg.value;
    auto g = out.grad_wrt_probs.row(i);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = lg.grad[k] * inv_n;
  }
  out.base = total / static_cast<double>(n);
  out.entropy = mean_prediction_entropy(probs);
  out.value = out.base;
  if (entropy_weight != 0.0) {
    out.value += entropy_weight * out.entropy;
    const double scale = entropy_weight * inv_n;
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = probs.row(i);
      auto g = out.grad_wrt_probs.row(i);
      for (std::size_t k = 0; k < g.size(); ++k) {
        g[k] -= scale * (std::log(clamp_prob(p[k])) + 1.0);
      }
    }
  }
  return out;
}

}  // namespace nlent
