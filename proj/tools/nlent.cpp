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

// nlent command line front end.
//
//   nlent run <config>                     train once, write a metrics CSV
//   nlent sweep <config> --noise-rates ..  one run (and CSV) per noise rate
//   nlent grad-check                       analytic vs finite-difference suite
//   nlent make-noise <labels> <spec>       write clean/noisy label pairs
//
// Exit codes: 0 ok, 1 failed grad-check or unexpected error, 2 bad config,
// input file or arguments, 3 training diverged.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlent/nlent.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitDiverged = 3;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<std::string> out;
  bool jsonl = false;
  bool timing = false;

  void apply(nlent::ExperimentConfig& cfg) const {
    if (seed) cfg.seed = *seed;
    if (epochs) cfg.epochs = *epochs;
    if (out) cfg.output = *out;
    cfg.jsonl = cfg.jsonl || jsonl;
    cfg.timing = cfg.timing || timing;
    cfg.validate();
  }
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Override the config seed");
  cmd->add_option("--epochs", o.epochs, "Override the epoch count");
  cmd->add_option("--out", o.out, "Override the metrics output path");
  cmd->add_flag("--jsonl", o.jsonl, "Also write a JSON-lines mirror of the metrics");
  cmd->add_flag("--timing", o.timing, "Record wall-clock ms per epoch (breaks byte determinism)");
}

void print_summary(const std::string& path, const std::vector<nlent::EpochRecord>& records) {
  const auto& last = records.back();
  std::printf("%s: %zu epochs, final test_acc=%.4f val_acc=%.4f entropy=%.4f", path.c_str(),
              records.size(), last.test_acc, last.val_acc, last.mean_entropy);
  if (records.size() >= 2) std::printf(" delta_h=%.4f", nlent::delta_h(records));
  std::printf("\n");
}

int cmd_run(const std::string& config_path, const Overrides& o) {
  auto cfg = nlent::parse_config(config_path);
  o.apply(cfg);
  const auto records = nlent::run_experiment(cfg);
  nlent::emit_metrics(records, cfg.output, cfg.jsonl);
  print_summary(cfg.output.string(), records);
  return 0;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_sweep(const std::string& config_path, const std::string& rates_text, unsigned jobs,
              const Overrides& o) {
  auto base = nlent::parse_config(config_path);
  o.apply(base);
  const auto rates = split_list(rates_text);
  if (rates.empty()) throw nlent::ConfigError("--noise-rates: empty list");
  std::vector<nlent::ExperimentConfig> cfgs;
  for (const auto& rate : rates) {
    auto cfg = base;
    if (!cfg.noise) cfg.noise = nlent::NoiseConfig{};
    try {
      std::size_t used = 0;
      cfg.noise->rate = std::stod(rate, &used);
      if (used != rate.size()) throw std::invalid_argument(rate);
    } catch (const std::exception&) {
      throw nlent::ConfigError("--noise-rates: cannot parse '" + rate + "'");
    }
    cfg.output = nlent::sweep_output_path(base.output, rate);
    cfg.validate();
    cfgs.push_back(std::move(cfg));
  }
  const auto results = nlent::run_many(cfgs, jobs);
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    nlent::emit_metrics(results[i], cfgs[i].output, cfgs[i].jsonl);
    print_summary(cfgs[i].output.string(), results[i]);
  }
  return 0;
}

int cmd_grad_check(int points, std::uint64_t seed) {
  bool ok = true;
  for (const auto& r : nlent::run_gradient_suite(points, seed)) {
    std::printf("%-4s %-18s points=%-4d max_rel_err=%.3e (tol %.0e)\n", r.passed() ? "PASS" : "FAIL",
                r.name.c_str(), r.points, r.max_rel_error, r.tolerance);
    ok = ok && r.passed();
  }
  return ok ? 0 : kExitFailure;
}

nlent::LabelVector load_labels(const std::string& path) {
  const auto bytes = nlent::io::read_file(path);
  if (bytes.size() >= 4 && bytes[0] == 'N' && bytes[1] == 'L' && bytes[2] == 'F' && bytes[3] == 'C') {
    return nlent::decode_feature_cache(bytes, path).labels;
  }
  nlent::io::Reader r(bytes, path);
  if (r.be<std::uint32_t>("label magic") != nlent::kIdxLabelsMagic) {
    throw nlent::FormatError(path + ": neither an IDX label file nor an NLFC feature cache");
  }
  const auto n = r.be<std::uint32_t>("label count");
  if (r.remaining() != n) throw nlent::FormatError(path + ": label count does not match file size");
  std::vector<int> labels(n);
  for (auto& y : labels) {
    y = r.take(1, "labels")[0];
    if (y >= nlent::kMnistClasses) throw nlent::FormatError(path + ": label is not a digit");
  }
  return nlent::LabelVector(std::move(labels), nlent::kMnistClasses);
}

/// <kind>:<rate>[:<map>], e.g. symmetric:0.4, asymmetric:0.3:mnist,
/// asymmetric:0.2:3>5,5>3
nlent::NoiseSpec parse_noise_spec(const std::string& text, int num_classes, std::uint64_t seed) {
  const auto first = text.find(':');
  if (first == std::string::npos) throw nlent::ConfigError("noise spec '" + text + "': expected kind:rate[:map]");
  const auto second = text.find(':', first + 1);
  const std::string kind = text.substr(0, first);
  const std::string rate = text.substr(first + 1, second == std::string::npos ? std::string::npos
                                                                             : second - first - 1);
  nlent::NoiseSpec spec;
  spec.seed = seed;
  try {
    std::size_t used = 0;
    spec.rate = std::stod(rate, &used);
    if (used != rate.size()) throw std::invalid_argument(rate);
  } catch (const std::exception&) {
    throw nlent::ConfigError("noise spec '" + text + "': bad rate '" + rate + "'");
  }
  try {
    if (kind == "symmetric") {
      spec.kind = nlent::NoiseKind::kSymmetric;
    } else if (kind == "asymmetric") {
      if (second == std::string::npos) throw nlent::ConfigError("asymmetric noise needs a flip map");
      spec.kind = nlent::NoiseKind::kAsymmetric;
      spec.flip_map = nlent::parse_flip_map(text.substr(second + 1), num_classes);
    } else {
      throw nlent::ConfigError("noise spec '" + text + "': unknown kind '" + kind + "'");
    }
    spec.validate();
  } catch (const nlent::InvalidInput& e) {
    throw nlent::ConfigError(e.what());
  }
  return spec;
}

int cmd_make_noise(const std::string& labels_path, const std::string& spec_text,
                   std::uint64_t seed, const std::string& out) {
  const auto clean = load_labels(labels_path);
  const auto spec = parse_noise_spec(spec_text, clean.num_classes(), seed);
  const auto noisy = nlent::corrupt(clean, spec);
  std::string text = "index,clean,noisy\n";
  for (std::size_t i = 0; i < clean.size(); ++i) {
    text += std::to_string(i) + ',' + std::to_string(clean[i]) + ',' + std::to_string(noisy[i]) + '\n';
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "# noise_rate=%.6f\n", nlent::empirical_noise_rate(clean, noisy));
  text += buf;
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    nlent::io::write_file_atomic(out, text);
    std::printf("%s: %zu labels, realized noise rate %.4f\n", out.c_str(), clean.size(),
                nlent::empirical_noise_rate(clean, noisy));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noisy-label classification experiments with entropy regularization"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;
  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("config", config_path, "Experiment config file")->required();
  add_overrides(run, overrides);

  std::string rates;
  unsigned jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Repeat an experiment across noise rates");
  sweep->add_option("config", config_path, "Experiment config file")->required();
  sweep->add_option("--noise-rates", rates, "Comma-separated noise rates")->required();
  sweep->add_option("--jobs", jobs, "Parallel runs (0 = one per core)");
  add_overrides(sweep, overrides);

  int points = 100;
  std::uint64_t grad_seed = 7;
  auto* grad = app.add_subcommand("grad-check", "Check analytic gradients against finite differences");
  grad->add_option("--points", points, "Random points per loss");
  grad->add_option("--seed", grad_seed, "Seed for the random points");

  std::string labels_path;
  std::string noise_spec;
  std::uint64_t noise_seed = 0;
  std::string noise_out;
  auto* noise = app.add_subcommand("make-noise", "Corrupt a label file and print clean/noisy pairs");
  noise->add_option("labels", labels_path, "IDX label file or NLFC feature cache")->required();
  noise->add_option("spec", noise_spec, "kind:rate[:map], e.g. asymmetric:0.3:mnist")->required();
  noise->add_option("--seed", noise_seed, "Noise seed");
  noise->add_option("--out", noise_out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadInput;
  }

  try {
    if (*run) return cmd_run(config_path, overrides);
    if (*sweep) return cmd_sweep(config_path, rates, jobs, overrides);
    if (*grad) return cmd_grad_check(points, grad_seed);
    if (*noise) return cmd_make_noise(labels_path, noise_spec, noise_seed, noise_out);
  } catch (const nlent::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const nlent::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const nlent::FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const nlent::InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const nlent::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
