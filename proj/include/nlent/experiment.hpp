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

// The seeded training/evaluation loop and its metrics files.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlent/binary_io.hpp"
#include "nlent/config.hpp"
#include "nlent/data.hpp"
#include "nlent/errors.hpp"
#include "nlent/losses.hpp"
#include "nlent/model.hpp"
#include "nlent/noise.hpp"
#include "nlent/numerics.hpp"
#include "nlent/random.hpp"

namespace nlent {

struct EpochRecord {
  int epoch = 0;  // zero-based
  double lambda = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;  // against the (possibly noisy) training labels
  double val_acc = 0.0;
  double test_acc = 0.0;
  double mean_entropy = 0.0;  // on training-set predictions at epoch end
  double ms = 0.0;            // wall clock; 0 unless timing is enabled

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

/// Data after splitting and label corruption. Only train.labels is noisy;
/// clean_train_labels keeps the original annotations.
struct PreparedData {
  LabeledDataset train;
  LabelVector clean_train_labels;
  LabeledDataset val;
  LabeledDataset test;
};

inline std::uint64_t noise_seed(const ExperimentConfig& cfg) {
  return cfg.noise && cfg.noise->seed ? *cfg.noise->seed : mix_seed(cfg.seed, 0x6e6f697365);
}

inline PreparedData prepare_data(const ExperimentConfig& cfg) {
  const auto& dc = cfg.dataset;
  LabeledDataset pool;
  std::optional<LabeledDataset> test;
  switch (dc.source) {
    case DatasetSource::kMnist:
      pool = load_mnist_idx(dc.mnist_images, dc.mnist_labels);
      if (dc.has_test_source()) test = load_mnist_idx(dc.mnist_test_images, dc.mnist_test_labels);
      break;
    case DatasetSource::kFeatureCache:
      pool = load_feature_cache(dc.cache_path);
      if (dc.has_test_source()) test = load_feature_cache(dc.cache_test_path);
      break;
    case DatasetSource::kSynth:
      pool = synth_blobs(dc.synth_n, dc.synth_classes, dc.synth_dim, dc.synth_separation, cfg.seed);
      break;
  }
  if (test && (test->dim() != pool.dim() || test->num_classes() != pool.num_classes())) {
    throw FormatError("test set shape does not match the training set");
  }
  if (!test) {
    Split held_out = train_val_split(pool, dc.test_fraction, cfg.seed, Stream::kTestSplit);
    pool = std::move(held_out.train);
    test = std::move(held_out.val);
  }
  if (dc.train_limit > 0 && dc.train_limit < pool.size()) {
    auto order = permutation(pool.size(), cfg.seed, Stream::kSubset);
    order.resize(dc.train_limit);
    pool = subset(pool, order, pool.name);
  }
  Split split = train_val_split(pool, cfg.val_fraction, cfg.seed);

  PreparedData out{std::move(split.train), {}, std::move(split.val), std::move(*test)};
  out.clean_train_labels = out.train.labels;
  if (cfg.noise) {
    NoiseSpec spec{cfg.noise->kind, cfg.noise->rate, {}, noise_seed(cfg)};
    try {
      if (spec.kind == NoiseKind::kAsymmetric) {
        spec.flip_map = parse_flip_map(cfg.noise->flip_map, out.train.num_classes());
      }
      out.train.labels = corrupt(out.train.labels, spec);
    } catch (const InvalidInput& e) {
      throw ConfigError(std::string("noise: ") + e.what());
    }
  }
  return out;
}

namespace detail {

struct Evaluation {
  double accuracy = 0.0;
  double mean_entropy = 0.0;
};

inline Evaluation evaluate_split(const ModelParams& params, const LabeledDataset& ds,
                                 std::size_t chunk = 2048) {
  Evaluation ev;
  if (ds.size() == 0) return ev;
  std::size_t correct = 0;
  double entropy = 0.0;
  for (std::size_t start = 0; start < ds.size(); start += chunk) {
    const std::size_t stop = std::min(ds.size(), start + chunk);
    DenseMatrix x(stop - start, ds.dim());
    std::copy(ds.features.values().begin() + static_cast<std::ptrdiff_t>(start * ds.dim()),
              ds.features.values().begin() + static_cast<std::ptrdiff_t>(stop * ds.dim()),
              x.values().begin());
    const DenseMatrix logits = predict_logits(params, x);
    if (!logits.all_finite()) throw DivergenceError("non-finite logits while evaluating " + ds.name);
    const ProbBatch probs = softmax(logits);
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      const auto p = probs.row(i);
      const auto best = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
      correct += best == ds.labels[start + i];
      entropy += row_entropy(p);
    }
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
  ev.mean_entropy = entropy / static_cast<double>(ds.size());
  return ev;
}

}  // namespace detail

/// Runs the configured experiment and returns one record per epoch.
/// Each minibatch: forward, softmax, entropy-regularized loss, softmax
/// backward, model backward, global-norm clip, SGD step.
inline std::vector<EpochRecord> run_experiment(const ExperimentConfig& cfg,
                                               const PreparedData& data) {
  cfg.validate();
  const auto& train = data.train;
  const int kc = train.num_classes();
  ModelParams params = init_params(cfg.arch, train.dim(), kc, cfg.seed);
  OptimState opt(params, cfg.sgd);
  const auto schedule = cfg.schedule();
  const std::size_t n = train.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t d = train.dim();

  std::vector<EpochRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lambda = schedule ? lambda_at(*schedule, epoch) : 0.0;
    const auto order = permutation(n, cfg.seed, Stream::kShuffle, static_cast<std::uint64_t>(epoch));
    Xoshiro256 complementary_rng(cfg.seed, Stream::kComplementary, static_cast<std::uint64_t>(epoch));

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += batch, ++batch_index) {
      const std::size_t stop = std::min(n, start + batch);
      DenseMatrix x(stop - start, d);
      std::vector<int> y(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const std::size_t src = order[i];
        const auto row = train.features.row(src);
        std::copy(row.begin(), row.end(), x.row(i - start).begin());
        y[i - start] = train.labels[src];
        if (cfg.loss.kind == LossKind::kNL) {
          y[i - start] = sample_complementary_label(y[i - start], kc, complementary_rng);
        }
      }
      const LabelVector labels(std::move(y), kc);

      const auto fwd = forward(params, x);
      const auto where = [&] {
        return " at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index);
      };
      if (!fwd.logits.all_finite()) throw DivergenceError("non-finite logits" + where());
      const ProbBatch probs = softmax(fwd.logits);
      const BatchLoss loss = regularized_batch_loss(cfg.loss, probs, labels, lambda);
      if (!std::isfinite(loss.value)) throw DivergenceError("non-finite loss" + where());
      const DenseMatrix grad_logits = softmax_backward(probs, loss.grad_wrt_probs);
      Gradients grads = clip_global_norm(backward(params, fwd.cache, grad_logits), cfg.sgd.clip_norm);
      try {
        sgd_step(params, opt, grads);
      } catch (const DivergenceError& e) {
        throw DivergenceError(e.what() + where());
      }
      if (!params.all_finite()) throw DivergenceError("non-finite parameters" + where());
      loss_sum += loss.value * static_cast<double>(stop - start);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lambda = lambda;
    rec.train_loss = loss_sum / static_cast<double>(n);
    try {
      const auto train_eval = detail::evaluate_split(params, train);
      rec.train_acc = train_eval.accuracy;
      rec.mean_entropy = train_eval.mean_entropy;
      rec.val_acc = detail::evaluate_split(params, data.val).accuracy;
      rec.test_acc = detail::evaluate_split(params, data.test).accuracy;
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string(e.what()) + " after epoch " + std::to_string(epoch));
    }
    if (cfg.timing) {
      rec.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
                   .count();
    }
    records.push_back(rec);
  }
  return records;
}

inline std::vector<EpochRecord> run_experiment(const ExperimentConfig& cfg) {
  return run_experiment(cfg, prepare_data(cfg));
}

/// Runs independent experiments on up to `jobs` threads; results keep the
/// input order. Exceptions propagate from the first failing config.
inline std::vector<std::vector<EpochRecord>> run_many(const std::vector<ExperimentConfig>& cfgs,
                                                      unsigned jobs = 0) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::vector<EpochRecord>> results(cfgs.size());
  std::vector<std::exception_ptr> errors(cfgs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < cfgs.size(); i = next++) {
      try {
        results[i] = run_experiment(cfgs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::min<std::size_t>(jobs, cfgs.size()); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

/// Mean entropy of the first epoch minus that of the last.
inline double delta_h(const std::vector<EpochRecord>& records) {
  if (records.size() < 2) throw InvalidInput("delta_h: need at least 2 epoch records");
  return entropy_reduction(records.front().mean_entropy, records.back().mean_entropy);
}

inline constexpr const char* kMetricsHeader =
    "epoch,lambda,train_loss,train_acc,val_acc,test_acc,mean_entropy,ms";

inline std::string format_metrics_csv(const std::vector<EpochRecord>& records) {
  std::string out = kMetricsHeader;
  out += '\n';
  char buf[512];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.lambda,
                  r.train_loss, r.train_acc, r.val_acc, r.test_acc, r.mean_entropy, r.ms);
    out += buf;
  }
  if (records.size() >= 2) {
    std::snprintf(buf, sizeof buf, "# delta_h=%.6f\n", delta_h(records));
  } else {
    std::snprintf(buf, sizeof buf, "# delta_h=nan\n");
  }
  out += buf;
  return out;
}

inline std::string format_metrics_jsonl(const std::vector<EpochRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["lambda"] = r.lambda;
    j["train_loss"] = r.train_loss;
    j["train_acc"] = r.train_acc;
    j["val_acc"] = r.val_acc;
    j["test_acc"] = r.test_acc;
    j["mean_entropy"] = r.mean_entropy;
    j["ms"] = r.ms;
    out += j.dump();
    out += '\n';
  }
  return out;
}

/// Writes the CSV (and optionally a .jsonl sibling) atomically.
inline void emit_metrics(const std::vector<EpochRecord>& records, const std::filesystem::path& path,
                         bool jsonl = false) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  io::write_file_atomic(path, format_metrics_csv(records));
  if (jsonl) {
    auto mirror = path;
    mirror.replace_extension(".jsonl");
    io::write_file_atomic(mirror, format_metrics_jsonl(records));
  }
}

/// "<stem>_eta<rate><ext>" next to `base`; `rate_text` is used verbatim.
inline std::filesystem::path sweep_output_path(const std::filesystem::path& base,
                                               const std::string& rate_text) {
  auto out = base;
  out.replace_filename(base.stem().string() + "_eta" + rate_text +
                       (base.has_extension() ? base.extension().string() : ".csv"));
  return out;
}

}  // namespace nlent
