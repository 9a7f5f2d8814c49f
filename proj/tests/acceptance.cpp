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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
//
//   acceptance [--out-dir DIR] [--mnist-dir DIR] [--only 1,4,7]

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlent/nlent.hpp"

namespace {

namespace fs = std::filesystem;
using namespace nlent;

// Tolerances and budgets.
constexpr double kGradTolerance = 1e-4;
constexpr double kGradBudgetSec = 30.0;
constexpr int kGradPoints = 100;
constexpr double kSymmetryTolerance = 1e-9;
constexpr int kSymmetryPoints = 1000;
constexpr double kNoiseSigmas = 4.0;
constexpr std::size_t kNoiseSamples = 10000;
constexpr double kEntropyGainPoints = 1.0;
constexpr double kTrendBudgetSec = 300.0;
constexpr double kRobustGainPoints = 2.0;
constexpr double kScheduleSlackPoints = 0.5;

// Shared training setup for the trend criteria.
constexpr std::uint64_t kSeeds[] = {1, 2, 3};
constexpr int kEpochs = 30;
constexpr double kNoiseRate = 0.6;
constexpr double kLearningRate = 0.03;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------

Verdict gradient_oracle() {
  const double start = cpu_seconds();
  double worst = 0.0;
  std::string worst_name;
  int checked = 0;
  for (LossKind kind : kAllLossKinds) {
    const auto r = check_loss_gradient(kind, kGradPoints, 7);
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = r.name;
    }
    ++checked;
  }
  const double elapsed = cpu_seconds() - start;
  return {worst < kGradTolerance && elapsed < kGradBudgetSec,
          fmt("%d losses x %d points, worst rel err %.2e (%s) < %.0e, %.1f s < %.0f s", checked,
              kGradPoints, worst, worst_name.c_str(), kGradTolerance, elapsed, kGradBudgetSec)};
}

std::vector<double> random_simplex(int k, Xoshiro256& rng) {
  std::vector<double> p(static_cast<std::size_t>(k));
  double total = 0.0;
  for (auto& x : p) {
    x = -std::log(1.0 - rng.uniform());
    total += x;
  }
  for (auto& x : p) x /= total;
  return p;
}

Verdict symmetry_constants() {
  Xoshiro256 rng(11);
  double mae_dev = 0.0;
  double nce_dev = 0.0;
  double rce_dev = 0.0;
  for (int k : {2, 5, 10}) {
    for (int i = 0; i < kSymmetryPoints; ++i) {
      const auto p = random_simplex(k, rng);
      const double a = rng.uniform(-8.0, -1.0);
      double mae_sum = 0.0;
      double nce_sum = 0.0;
      double rce_sum = 0.0;
      for (int y = 0; y < k; ++y) {
        mae_sum += mae(p, y).value;
        nce_sum += nce(p, y).value;
        rce_sum += rce(p, y, a).value;
      }
      mae_dev = std::max(mae_dev, std::abs(mae_sum - 2.0 * (k - 1)));
      nce_dev = std::max(nce_dev, std::abs(nce_sum - 1.0));
      rce_dev = std::max(rce_dev, std::abs(rce_sum + a * (k - 1)));
    }
  }
  const double worst = std::max({mae_dev, nce_dev, rce_dev});
  return {worst <= kSymmetryTolerance,
          fmt("k in {2,5,10} x %d points, max dev MAE %.1e NCE %.1e RCE %.1e <= %.0e", kSymmetryPoints,
              mae_dev, nce_dev, rce_dev, kSymmetryTolerance)};
}

LabelVector uniform_labels(std::size_t n, int k, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  std::vector<int> labels(n);
  for (auto& y : labels) y = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
  return LabelVector(std::move(labels), k);
}

Verdict noise_statistics() {
  const auto clean = uniform_labels(kNoiseSamples, 10, 2024);
  const double n = static_cast<double>(kNoiseSamples);
  double worst_sym = 0.0;
  for (double eta : {0.2, 0.4, 0.6, 0.8}) {
    const auto noisy = corrupt_symmetric(clean, eta, 100);
    const double sigma = std::sqrt(eta * (1.0 - eta) / n);
    worst_sym = std::max(worst_sym, std::abs(empirical_noise_rate(clean, noisy) - eta) / sigma);
  }

  double worst_asym = 0.0;
  std::size_t off_map = 0;
  for (const char* name : {"mnist", "cifar10"}) {
    const auto map = builtin_flip_map(name);
    for (double eta : {0.2, 0.3, 0.4}) {
      const auto noisy = corrupt_asymmetric(clean, map, eta, 200);
      std::map<int, std::pair<std::size_t, std::size_t>> per_source;  // flipped, total
      for (std::size_t i = 0; i < clean.size(); ++i) {
        const auto dst = map.target(clean[i]);
        if (dst) {
          auto& [flipped, total] = per_source[clean[i]];
          ++total;
          if (noisy[i] == *dst) ++flipped;
          else if (noisy[i] != clean[i]) ++off_map;
        } else if (noisy[i] != clean[i]) {
          ++off_map;
        }
      }
      for (const auto& [src, counts] : per_source) {
        const double m = static_cast<double>(counts.second);
        const double sigma = std::sqrt(eta * (1.0 - eta) / m);
        worst_asym = std::max(worst_asym, std::abs(static_cast<double>(counts.first) / m - eta) / sigma);
      }
    }
  }
  return {worst_sym <= kNoiseSigmas && worst_asym <= kNoiseSigmas && off_map == 0,
          fmt("symmetric worst %.2f sigma, asymmetric per-source worst %.2f sigma (<= %.0f), "
              "%zu flips off the map",
              worst_sym, worst_asym, kNoiseSigmas, off_map)};
}

// ---------------------------------------------------------------------------

ExperimentConfig base_config(std::uint64_t seed, LossKind kind) {
  ExperimentConfig cfg;
  cfg.noise = NoiseConfig{NoiseKind::kSymmetric, kNoiseRate, {}, std::nullopt};
  cfg.loss.kind = kind;
  cfg.arch = Architecture::linear();
  cfg.sgd.lr = kLearningRate;
  cfg.epochs = kEpochs;
  cfg.seed = seed;
  return cfg;
}

ExperimentConfig mnist_config(const fs::path& mnist_dir, std::uint64_t seed, LossKind kind,
                              std::optional<LambdaSchedule> schedule) {
  auto cfg = base_config(seed, kind);
  cfg.dataset.source = DatasetSource::kMnist;
  cfg.dataset.mnist_images = mnist_dir / "mnist-10k-images-idx3-ubyte";
  cfg.dataset.mnist_labels = mnist_dir / "mnist-10k-labels-idx1-ubyte";
  cfg.loss.entropy_schedule = schedule;
  return cfg;
}

ExperimentConfig blobs_config(std::uint64_t seed, LossKind kind) {
  auto cfg = base_config(seed, kind);
  cfg.dataset.source = DatasetSource::kSynth;
  cfg.dataset.synth_n = 20000;
  cfg.dataset.synth_classes = 10;
  cfg.dataset.synth_dim = 32;
  cfg.dataset.synth_separation = 3.0;
  return cfg;
}

struct Group {
  std::vector<std::vector<EpochRecord>> runs;  // one per seed
  double cpu = 0.0;

  double test_acc() const {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.back().test_acc);
    return 100.0 * mean(v);
  }
  double min_delta_h() const {
    double m = INFINITY;
    for (const auto& r : runs) m = std::min(m, delta_h(r));
    return m;
  }
  double mean_delta_h() const {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(delta_h(r));
    return mean(v);
  }
};

Group run_group(const std::function<ExperimentConfig(std::uint64_t)>& make, const fs::path& dir,
                const std::string& tag) {
  std::vector<ExperimentConfig> cfgs;
  for (auto seed : kSeeds) {
    cfgs.push_back(make(seed));
    cfgs.back().output = dir / (tag + "_seed" + std::to_string(seed) + ".csv");
  }
  Group g;
  const double start = cpu_seconds();
  g.runs = run_many(cfgs, 0);
  g.cpu = cpu_seconds() - start;
  for (std::size_t i = 0; i < cfgs.size(); ++i) emit_metrics(g.runs[i], cfgs[i].output);
  return g;
}

const LambdaSchedule kLinear03{ScheduleKind::kLinear, 0.3, kEpochs};

struct TrendRuns {
  fs::path mnist_dir;
  fs::path out_dir;
  std::map<std::string, Group> mnist;

  const Group& get(const std::string& tag, LossKind kind, std::optional<LambdaSchedule> schedule) {
    auto it = mnist.find(tag);
    if (it == mnist.end()) {
      const auto dir = out_dir / "mnist";
      it = mnist
               .emplace(tag, run_group([&](std::uint64_t s) { return mnist_config(mnist_dir, s, kind, schedule); },
                                       dir, tag))
               .first;
    }
    return it->second;
  }
  const Group& ce() { return get("ce", LossKind::kCE, std::nullopt); }
  const Group& ce_h() { return get("ce_linear0.3", LossKind::kCE, kLinear03); }
  const Group& gce() { return get("gce", LossKind::kGCE, std::nullopt); }
};

Verdict entropy_gain(TrendRuns& t) {
  const auto& ce = t.ce();
  const auto& ceh = t.ce_h();
  const double gain = ceh.test_acc() - ce.test_acc();
  const double cpu = ce.cpu + ceh.cpu;
  return {gain >= kEntropyGainPoints && cpu < kTrendBudgetSec,
          fmt("MNIST eta=%.1f, 3 seeds: CE %.2f%%, CE+H linear 0->0.3 %.2f%%, gain %+.2f >= %.1f points, "
              "%.0f s < %.0f s",
              kNoiseRate, ce.test_acc(), ceh.test_acc(), gain, kEntropyGainPoints, cpu, kTrendBudgetSec)};
}

Verdict entropy_reduction_trend(TrendRuns& t) {
  const auto& ce = t.ce();
  const auto& ceh = t.ce_h();
  const auto& gce = t.gce();
  const bool all_positive = ce.min_delta_h() > 0.0 && ceh.min_delta_h() > 0.0 && gce.min_delta_h() > 0.0;
  const bool ordered = ceh.mean_delta_h() > ce.mean_delta_h();
  return {all_positive && ordered,
          fmt("mean dH: CE %.4f, CE+H %.4f, GCE %.4f; min over runs %.4f/%.4f/%.4f > 0; "
              "CE+H > CE: %s",
              ce.mean_delta_h(), ceh.mean_delta_h(), gce.mean_delta_h(), ce.min_delta_h(),
              ceh.min_delta_h(), gce.min_delta_h(), ordered ? "yes" : "no")};
}

Verdict robust_ordering(const fs::path& out_dir) {
  const auto dir = out_dir / "blobs";
  const auto make = [](LossKind kind) {
    return [kind](std::uint64_t s) { return blobs_config(s, kind); };
  };
  const auto ce = run_group(make(LossKind::kCE), dir, "ce");
  const auto gce = run_group(make(LossKind::kGCE), dir, "gce");
  const auto apl = run_group(make(LossKind::kNCEandRCE), dir, "nce+rce");
  const double gce_gain = gce.test_acc() - ce.test_acc();
  const double apl_gain = apl.test_acc() - ce.test_acc();
  const double cpu = ce.cpu + gce.cpu + apl.cpu;
  return {gce_gain >= kRobustGainPoints && apl_gain >= kRobustGainPoints && cpu < kTrendBudgetSec,
          fmt("blobs eta=%.1f, 3 seeds: CE %.2f%%, GCE %.2f%% (%+.2f), NCE+RCE %.2f%% (%+.2f), "
              "need >= %.1f points, %.0f s < %.0f s",
              kNoiseRate, ce.test_acc(), gce.test_acc(), gce_gain, apl.test_acc(), apl_gain,
              kRobustGainPoints, cpu, kTrendBudgetSec)};
}

Verdict schedule_study(TrendRuns& t) {
  struct Setting {
    std::string tag;
    LambdaSchedule schedule;
  };
  const std::vector<Setting> settings = {
      {"ce_constant0.01", {ScheduleKind::kConstant, 0.01, kEpochs}},
      {"ce_constant0.1", {ScheduleKind::kConstant, 0.1, kEpochs}},
      {"ce_constant0.2", {ScheduleKind::kConstant, 0.2, kEpochs}},
      {"ce_linear0.3", kLinear03},
  };
  double best = -INFINITY;
  std::string best_tag;
  std::string table;
  bool files = true;
  for (const auto& s : settings) {
    const auto& g = t.get(s.tag, LossKind::kCE, s.schedule);
    files = files && fs::exists(t.out_dir / "mnist" / (s.tag + "_seed1.csv"));
    if (g.test_acc() > best) {
      best = g.test_acc();
      best_tag = s.tag;
    }
    table += fmt("%s %.2f%%, ", s.tag.c_str() + 3, g.test_acc());
  }
  const double linear = t.ce_h().test_acc();
  return {files && best - linear <= kScheduleSlackPoints,
          fmt("%sbest %s; linear trails best by %.2f <= %.1f points", table.c_str(), best_tag.c_str() + 3,
              best - linear, kScheduleSlackPoints)};
}

Verdict determinism(TrendRuns& t) {
  const auto dir = t.out_dir / "determinism";
  std::size_t identical = 0;
  std::size_t total = 0;
  const std::vector<std::pair<ExperimentConfig, fs::path>> cases = {
      {mnist_config(t.mnist_dir, 1, LossKind::kCE, kLinear03), t.out_dir / "mnist" / "ce_linear0.3_seed1.csv"},
      {blobs_config(1, LossKind::kNCEandRCE), t.out_dir / "blobs" / "nce+rce_seed1.csv"},
  };
  for (const auto& [cfg, first] : cases) {
    if (!fs::exists(first)) emit_metrics(run_experiment(cfg), first);
    const auto again = dir / first.filename();
    emit_metrics(run_experiment(cfg), again);
    ++total;
    identical += io::read_file(first) == io::read_file(again);
  }
  return {identical == total, fmt("%zu/%zu reruns byte-identical", identical, total)};
}

// ---------------------------------------------------------------------------

using Bytes = std::vector<std::uint8_t>;

Bytes to_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

Verdict format_robustness() {
  DenseMatrix pixels(3, 4);
  for (std::size_t i = 0; i < pixels.values().size(); ++i) pixels.values()[i] = static_cast<double>(i * 20) / 255.0;
  const LabeledDataset digits{pixels, LabelVector({0, 9, 4}, 10), "digits"};
  const auto [img_text, lab_text] = encode_mnist_idx(digits, 2, 2);
  const Bytes img = to_bytes(img_text);
  const Bytes lab = to_bytes(lab_text);

  const LabeledDataset feats{DenseMatrix(3, 2, {0.5, -1.0, 2.0, 0.25, -3.0, 1.5}), LabelVector({2, 0, 1}, 3),
                             "feats"};
  const Bytes cache = to_bytes(encode_feature_cache(feats));
  const std::size_t label_offset = 28 + 3 * 2 * 4;

  std::size_t cases = 0;
  std::vector<std::string> failures;
  const auto expect_format_error = [&](const std::string& name, const std::function<void()>& fn) {
    ++cases;
    try {
      fn();
      failures.push_back(name + " (accepted)");
    } catch (const FormatError&) {
    } catch (const std::exception& e) {
      failures.push_back(name + " (" + e.what() + ")");
    }
  };
  const auto idx = [](Bytes i, Bytes l) { return [i, l] { decode_mnist_idx(i, l); }; };
  const auto nlfc = [](Bytes b) { return [b] { decode_feature_cache(b); }; };
  const auto with = [](Bytes b, std::size_t at, std::uint8_t v) {
    b[at] = v;
    return b;
  };

  bool round_trip = false;
  try {
    const auto a = decode_mnist_idx(img, lab);
    const auto b = decode_feature_cache(cache);
    round_trip = a.labels == digits.labels && a.features == digits.features && b.labels == feats.labels &&
                 b.features == feats.features;
  } catch (const std::exception&) {
  }

  expect_format_error("idx image magic", idx(with(img, 3, 0x01), lab));
  expect_format_error("idx label magic", idx(img, with(lab, 3, 0x03)));
  expect_format_error("idx label 10", idx(img, with(lab, 9, 10)));
  expect_format_error("idx label 255", idx(img, with(lab, 10, 255)));
  expect_format_error("idx count mismatch", idx(img, with(lab, 7, 2)));
  expect_format_error("idx zero rows", idx(with(img, 11, 0), lab));
  Bytes img_long = img;
  img_long.push_back(0);
  expect_format_error("idx trailing image byte", idx(img_long, lab));
  for (std::size_t n = 0; n < img.size(); ++n) {
    expect_format_error("idx images truncated to " + std::to_string(n), idx(Bytes(img.begin(), img.begin() + n), lab));
  }
  for (std::size_t n = 0; n < lab.size(); ++n) {
    expect_format_error("idx labels truncated to " + std::to_string(n), idx(img, Bytes(lab.begin(), lab.begin() + n)));
  }

  expect_format_error("nlfc magic", nlfc(with(cache, 0, 'X')));
  expect_format_error("nlfc version", nlfc(with(cache, 4, 2)));
  expect_format_error("nlfc label == k", nlfc(with(cache, label_offset, 3)));
  Bytes negative = cache;
  for (std::size_t i = 0; i < 4; ++i) negative[label_offset + i] = 0xff;
  expect_format_error("nlfc label -1", nlfc(negative));
  Bytes nan_feature = cache;
  nan_feature[28 + 2] = 0xc0;
  nan_feature[28 + 3] = 0x7f;
  expect_format_error("nlfc NaN feature", nlfc(nan_feature));
  expect_format_error("nlfc k = 0", nlfc(with(cache, 24, 0)));
  Bytes huge = cache;
  for (std::size_t i = 8; i < 16; ++i) huge[i] = 0xff;
  expect_format_error("nlfc overflowing n", nlfc(huge));
  Bytes cache_long = cache;
  cache_long.push_back(0);
  expect_format_error("nlfc trailing byte", nlfc(cache_long));
  for (std::size_t n = 0; n < cache.size(); ++n) {
    expect_format_error("nlfc truncated to " + std::to_string(n), nlfc(Bytes(cache.begin(), cache.begin() + n)));
  }

  std::string detail = fmt("%zu corrupted fixtures, %zu not rejected with FormatError; clean fixtures round-trip: %s",
                           cases, failures.size(), round_trip ? "yes" : "no");
  for (std::size_t i = 0; i < failures.size() && i < 3; ++i) detail += "; " + failures[i];
  return {failures.empty() && round_trip, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nlent acceptance suite"};
  fs::path out_dir = "acceptance_out";
  fs::path mnist_dir = NLENT_MNIST_DIR;
  std::string only;
  app.add_option("--out-dir", out_dir, "Directory for the metrics CSVs");
  app.add_option("--mnist-dir", mnist_dir, "Directory holding the bundled MNIST IDX files");
  app.add_option("--only", only, "Comma-separated criterion numbers to run");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected;
  {
    std::stringstream in(only);
    std::string item;
    while (std::getline(in, item, ',')) {
      if (!item.empty()) selected.insert(std::stoi(item));
    }
  }

  TrendRuns trends{mnist_dir, out_dir, {}};
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient oracle", gradient_oracle},
      {"loss symmetry constants", symmetry_constants},
      {"noise statistics", noise_statistics},
      {"entropy regularization gain", [&] { return entropy_gain(trends); }},
      {"entropy reduction", [&] { return entropy_reduction_trend(trends); }},
      {"robust loss ordering", [&] { return robust_ordering(out_dir); }},
      {"lambda schedule study", [&] { return schedule_study(trends); }},
      {"determinism", [&] { return determinism(trends); }},
      {"format robustness", format_robustness},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %d %s: %s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
