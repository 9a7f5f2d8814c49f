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

// Experiment configuration: a flat `key = value` text format.
//
//   # comment
//   dataset = synth
//   synth.classes = 10
//   loss = gce
//   entropy_schedule = linear:0.3
//
// Unknown keys, duplicate keys and malformed values are rejected with a
// ConfigError naming the key. Relative paths resolve against the directory
// of the config file. See README.md for the full key list.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "nlent/errors.hpp"
#include "nlent/losses.hpp"
#include "nlent/model.hpp"
#include "nlent/noise.hpp"

namespace nlent {

enum class DatasetSource { kMnist, kFeatureCache, kSynth };

struct DatasetConfig {
  DatasetSource source = DatasetSource::kSynth;
  std::filesystem::path mnist_images, mnist_labels;
  std::filesystem::path mnist_test_images, mnist_test_labels;  // optional
  std::filesystem::path cache_path;
  std::filesystem::path cache_test_path;  // optional
  std::size_t synth_n = 2000;
  int synth_classes = 2;
  std::size_t synth_dim = 2;
  double synth_separation = 5.0;
  /// Held out as the test set when the source has no separate test files.
  double test_fraction = 0.2;
  /// Cap on the training pool (before the validation split); 0 keeps all.
  std::size_t train_limit = 0;

  bool has_test_source() const {
    return source == DatasetSource::kMnist ? !mnist_test_images.empty()
           : source == DatasetSource::kFeatureCache ? !cache_test_path.empty()
                                                     : false;
  }
};

/// Noise settings as written in the config. The flip map is resolved once
/// the dataset's class count is known.
struct NoiseConfig {
  NoiseKind kind = NoiseKind::kSymmetric;
  double rate = 0.0;
  std::string flip_map;
  std::optional<std::uint64_t> seed;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::optional<NoiseConfig> noise;
  LossSpec loss;
  Architecture arch;
  SgdConfig sgd;
  int batch_size = 256;
  int epochs = 100;
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  std::filesystem::path output = "metrics.csv";
  bool jsonl = false;
  bool timing = false;

  /// Entropy schedule with total_epochs bound to `epochs`.
  std::optional<LambdaSchedule> schedule() const {
    if (!loss.entropy_schedule) return std::nullopt;
    LambdaSchedule s = *loss.entropy_schedule;
    s.total_epochs = epochs;
    return s;
  }

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in (0, 1)");
    if (!dataset.has_test_source() && !(dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0)) {
      throw ConfigError("test_fraction must be in (0, 1) when no test set is given");
    }
    try {
      loss.validate();
      sgd.validate();
      if (noise) {
        NoiseSpec probe{noise->kind, noise->rate, {}, 0};
        probe.validate();
      }
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what());
    }
    if (noise && noise->kind == NoiseKind::kAsymmetric && noise->flip_map.empty()) {
      throw ConfigError("noise.map is required for asymmetric noise");
    }
    if (arch.kind == Architecture::Kind::kMlp && (arch.depth < 1 || arch.hidden < 1)) {
      throw ConfigError("mlp.depth and mlp.hidden must be >= 1");
    }
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end || value.empty()) {
    throw ConfigError("key '" + key + "': cannot parse '" + value + "' as a number");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) throw ConfigError("key '" + key + "': value must be finite");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + value + "'");
}

inline std::optional<LambdaSchedule> parse_schedule(const std::string& key,
                                                    const std::string& value) {
  if (value == "none") return std::nullopt;
  const auto colon = value.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("key '" + key + "': expected none, constant:<lambda> or linear:<lambda_max>");
  }
  const std::string kind = value.substr(0, colon);
  LambdaSchedule s;
  if (kind == "constant") {
    s.kind = ScheduleKind::kConstant;
  } else if (kind == "linear") {
    s.kind = ScheduleKind::kLinear;
  } else {
    throw ConfigError("key '" + key + "': unknown schedule kind '" + kind + "'");
  }
  s.lambda_max = parse_number<double>(key, value.substr(colon + 1));
  if (s.lambda_max < 0.0) throw ConfigError("key '" + key + "': lambda must be >= 0");
  return s;
}

}  // namespace detail

inline std::string format_schedule(const std::optional<LambdaSchedule>& s) {
  if (!s) return "none";
  std::ostringstream out;
  out << (s->kind == ScheduleKind::kLinear ? "linear:" : "constant:") << s->lambda_max;
  return out.str();
}

/// Parses config text. `base_dir` anchors relative paths.
inline ExperimentConfig parse_config_text(std::string_view text,
                                          const std::filesystem::path& base_dir = {}) {
  ExperimentConfig cfg;
  bool have_dataset = false;
  bool have_loss = false;
  std::optional<std::string> noise_kind;
  NoiseConfig noise;
  std::map<std::string, bool> seen;

  const auto path_of = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  using detail::parse_bool;
  using detail::parse_number;

  const std::map<std::string, std::function<void(const std::string&, const std::string&)>>
      handlers = {
          {"dataset",
           [&](const auto& k, const auto& v) {
             if (v == "mnist") cfg.dataset.source = DatasetSource::kMnist;
             else if (v == "cache") cfg.dataset.source = DatasetSource::kFeatureCache;
             else if (v == "synth") cfg.dataset.source = DatasetSource::kSynth;
             else throw ConfigError("key '" + k + "': unknown dataset '" + v + "' (mnist, cache, synth)");
             have_dataset = true;
           }},
          {"mnist.images", [&](const auto&, const auto& v) { cfg.dataset.mnist_images = path_of(v); }},
          {"mnist.labels", [&](const auto&, const auto& v) { cfg.dataset.mnist_labels = path_of(v); }},
          {"mnist.test_images", [&](const auto&, const auto& v) { cfg.dataset.mnist_test_images = path_of(v); }},
          {"mnist.test_labels", [&](const auto&, const auto& v) { cfg.dataset.mnist_test_labels = path_of(v); }},
          {"cache.path", [&](const auto&, const auto& v) { cfg.dataset.cache_path = path_of(v); }},
          {"cache.test_path", [&](const auto&, const auto& v) { cfg.dataset.cache_test_path = path_of(v); }},
          {"synth.n", [&](const auto& k, const auto& v) { cfg.dataset.synth_n = parse_number<std::size_t>(k, v); }},
          {"synth.classes", [&](const auto& k, const auto& v) { cfg.dataset.synth_classes = parse_number<int>(k, v); }},
          {"synth.dim", [&](const auto& k, const auto& v) { cfg.dataset.synth_dim = parse_number<std::size_t>(k, v); }},
          {"synth.separation", [&](const auto& k, const auto& v) { cfg.dataset.synth_separation = parse_number<double>(k, v); }},
          {"test_fraction", [&](const auto& k, const auto& v) { cfg.dataset.test_fraction = parse_number<double>(k, v); }},
          {"train_limit", [&](const auto& k, const auto& v) { cfg.dataset.train_limit = parse_number<std::size_t>(k, v); }},
          {"val_fraction", [&](const auto& k, const auto& v) { cfg.val_fraction = parse_number<double>(k, v); }},
          {"noise", [&](const auto& k, const auto& v) {
             if (v != "none" && v != "symmetric" && v != "asymmetric") {
               throw ConfigError("key '" + k + "': expected none, symmetric or asymmetric");
             }
             noise_kind = v;
           }},
          {"noise.rate", [&](const auto& k, const auto& v) { noise.rate = parse_number<double>(k, v); }},
          {"noise.map", [&](const auto&, const auto& v) { noise.flip_map = v; }},
          {"noise.seed", [&](const auto& k, const auto& v) { noise.seed = parse_number<std::uint64_t>(k, v); }},
          {"loss", [&](const auto& k, const auto& v) {
             const auto kind = parse_loss_kind(v);
             if (!kind) throw ConfigError("key '" + k + "': unknown loss '" + v + "'");
             cfg.loss.kind = *kind;
             have_loss = true;
           }},
          {"loss.gamma", [&](const auto& k, const auto& v) { cfg.loss.params.gamma = parse_number<double>(k, v); }},
          {"loss.gce_q", [&](const auto& k, const auto& v) { cfg.loss.params.gce_q = parse_number<double>(k, v); }},
          {"loss.rce_a", [&](const auto& k, const auto& v) { cfg.loss.params.rce_a = parse_number<double>(k, v); }},
          {"loss.agce_a", [&](const auto& k, const auto& v) { cfg.loss.params.agce_a = parse_number<double>(k, v); }},
          {"loss.agce_q", [&](const auto& k, const auto& v) { cfg.loss.params.agce_q = parse_number<double>(k, v); }},
          {"loss.alpha", [&](const auto& k, const auto& v) { cfg.loss.params.alpha = parse_number<double>(k, v); }},
          {"loss.beta", [&](const auto& k, const auto& v) { cfg.loss.params.beta = parse_number<double>(k, v); }},
          {"entropy_schedule", [&](const auto& k, const auto& v) { cfg.loss.entropy_schedule = detail::parse_schedule(k, v); }},
          {"arch", [&](const auto& k, const auto& v) {
             if (v == "linear") cfg.arch.kind = Architecture::Kind::kLinear;
             else if (v == "mlp") cfg.arch.kind = Architecture::Kind::kMlp;
             else throw ConfigError("key '" + k + "': expected linear or mlp");
           }},
          {"mlp.depth", [&](const auto& k, const auto& v) { cfg.arch.depth = parse_number<int>(k, v); }},
          {"mlp.hidden", [&](const auto& k, const auto& v) { cfg.arch.hidden = parse_number<int>(k, v); }},
          {"mlp.activation", [&](const auto& k, const auto& v) {
             if (v == "relu") cfg.arch.activation = Activation::kReLU;
             else if (v == "tanh") cfg.arch.activation = Activation::kTanh;
             else throw ConfigError("key '" + k + "': expected relu or tanh");
           }},
          {"lr", [&](const auto& k, const auto& v) { cfg.sgd.lr = parse_number<double>(k, v); }},
          {"momentum", [&](const auto& k, const auto& v) { cfg.sgd.momentum = parse_number<double>(k, v); }},
          {"nesterov", [&](const auto& k, const auto& v) { cfg.sgd.nesterov = parse_bool(k, v); }},
          {"weight_decay", [&](const auto& k, const auto& v) { cfg.sgd.weight_decay = parse_number<double>(k, v); }},
          {"clip_norm", [&](const auto& k, const auto& v) { cfg.sgd.clip_norm = parse_number<double>(k, v); }},
          {"batch_size", [&](const auto& k, const auto& v) { cfg.batch_size = parse_number<int>(k, v); }},
          {"epochs", [&](const auto& k, const auto& v) { cfg.epochs = parse_number<int>(k, v); }},
          {"seed", [&](const auto& k, const auto& v) { cfg.seed = parse_number<std::uint64_t>(k, v); }},
          {"output", [&](const auto&, const auto& v) { cfg.output = path_of(v); }},
          {"jsonl", [&](const auto& k, const auto& v) { cfg.jsonl = parse_bool(k, v); }},
          {"timing", [&](const auto& k, const auto& v) { cfg.timing = parse_bool(k, v); }},
      };

  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = detail::trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    const auto handler = handlers.find(key);
    if (handler == handlers.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (seen[key]) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    seen[key] = true;
    if (value.empty()) throw ConfigError("key '" + key + "': empty value");
    handler->second(key, value);
  }

  if (!have_dataset) throw ConfigError("missing required key 'dataset'");
  if (!have_loss) throw ConfigError("missing required key 'loss'");
  const auto& ds = cfg.dataset;
  if (ds.source == DatasetSource::kMnist && (ds.mnist_images.empty() || ds.mnist_labels.empty())) {
    throw ConfigError("dataset = mnist requires mnist.images and mnist.labels");
  }
  if (ds.source == DatasetSource::kMnist &&
      ds.mnist_test_images.empty() != ds.mnist_test_labels.empty()) {
    throw ConfigError("mnist.test_images and mnist.test_labels must be given together");
  }
  if (ds.source == DatasetSource::kFeatureCache && ds.cache_path.empty()) {
    throw ConfigError("dataset = cache requires cache.path");
  }
  if (noise_kind && *noise_kind != "none") {
    noise.kind = *noise_kind == "symmetric" ? NoiseKind::kSymmetric : NoiseKind::kAsymmetric;
    cfg.noise = noise;
  } else if (seen["noise.rate"] || seen["noise.map"] || seen["noise.seed"]) {
    throw ConfigError("noise.* keys given but 'noise' is not symmetric or asymmetric");
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path.parent_path());
}

}  // namespace nlent
