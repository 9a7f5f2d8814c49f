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

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nlent/errors.hpp"
#include "nlent/numerics.hpp"
#include "nlent/random.hpp"

namespace nlent {

/// Class-conditional relabeling: each source class has exactly one target.
class ClassFlipMap {
 public:
  ClassFlipMap() = default;
  ClassFlipMap(std::vector<std::pair<int, int>> pairs, int num_classes)
      : pairs_(std::move(pairs)), num_classes_(num_classes) {
    if (num_classes_ < 2) throw InvalidInput("ClassFlipMap: need at least 2 classes");
    std::vector<bool> seen(static_cast<std::size_t>(num_classes_), false);
    for (const auto& [src, dst] : pairs_) {
      if (src < 0 || src >= num_classes_ || dst < 0 || dst >= num_classes_) {
        throw InvalidInput("ClassFlipMap: pair " + std::to_string(src) + ">" +
                           std::to_string(dst) + " outside [0, " + std::to_string(num_classes_) +
                           ")");
      }
      if (src == dst) throw InvalidInput("ClassFlipMap: self-flip " + std::to_string(src));
      if (seen[static_cast<std::size_t>(src)]) {
        throw InvalidInput("ClassFlipMap: duplicate source " + std::to_string(src));
      }
      seen[static_cast<std::size_t>(src)] = true;
    }
  }

  int num_classes() const noexcept { return num_classes_; }
  const std::vector<std::pair<int, int>>& pairs() const noexcept { return pairs_; }

  /// Target for a source class, or nullopt for classes the map leaves alone.
  std::optional<int> target(int label) const noexcept {
    for (const auto& [src, dst] : pairs_) {
      if (src == label) return dst;
    }
    return std::nullopt;
  }

 private:
  std::vector<std::pair<int, int>> pairs_;
  int num_classes_ = 0;
};

enum class NoiseKind { kSymmetric, kAsymmetric };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kSymmetric;
  double rate = 0.0;
  ClassFlipMap flip_map;  // asymmetric only
  std::uint64_t seed = 0;

  void validate() const {
    if (kind == NoiseKind::kSymmetric) {
      if (!(rate >= 0.0 && rate <= 1.0)) throw InvalidInput("NoiseSpec: symmetric rate outside [0, 1]");
    } else if (!(rate >= 0.0 && rate < 0.5)) {
      throw InvalidInput("NoiseSpec: asymmetric rate outside [0, 0.5)");
    }
  }
};

/// Flip maps used by the standard benchmarks.
///   mnist:    7>1, 2>7, 5>6, 6>5, 3>8
///   cifar10:  truck>automobile (9>1), bird>airplane (2>0), deer>horse (4>7),
///             cat<>dog (3>5, 5>3), standard CIFAR-10 class order
///   cifar100: each block of 5 fine classes cycles to the next within the block
inline ClassFlipMap builtin_flip_map(std::string_view name) {
  if (name == "mnist") return ClassFlipMap({{7, 1}, {2, 7}, {5, 6}, {6, 5}, {3, 8}}, 10);
  if (name == "cifar10") return ClassFlipMap({{9, 1}, {2, 0}, {4, 7}, {3, 5}, {5, 3}}, 10);
  if (name == "cifar100") {
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(100);
    for (int c = 0; c < 100; ++c) {
      const int base = c - c % 5;
      pairs.emplace_back(c, (c - base + 1) % 5 + base);
    }
    return ClassFlipMap(std::move(pairs), 100);
  }
  throw InvalidInput("builtin_flip_map: unknown map '" + std::string(name) + "'");
}

/// Parses "src>dst,src>dst,..." (whitespace ignored) or a builtin map name.
inline ClassFlipMap parse_flip_map(std::string_view text, int num_classes) {
  std::string compact;
  for (char ch : text) {
    if (ch != ' ' && ch != '\t') compact.push_back(ch);
  }
  if (compact == "mnist" || compact == "cifar10" || compact == "cifar100") {
    ClassFlipMap map = builtin_flip_map(compact);
    if (map.num_classes() != num_classes) {
      throw InvalidInput("flip map '" + compact + "' is defined for " +
                         std::to_string(map.num_classes()) + " classes, dataset has " +
                         std::to_string(num_classes));
    }
    return map;
  }
  std::vector<std::pair<int, int>> pairs;
  std::string_view rest = compact;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    const auto arrow = item.find('>');
    if (arrow == std::string_view::npos) {
      throw InvalidInput("flip map entry '" + std::string(item) + "' is not of the form src>dst");
    }
    int src = 0;
    int dst = 0;
    const auto a = item.substr(0, arrow);
    const auto b = item.substr(arrow + 1);
    if (std::from_chars(a.data(), a.data() + a.size(), src).ptr != a.data() + a.size() ||
        std::from_chars(b.data(), b.data() + b.size(), dst).ptr != b.data() + b.size() ||
        a.empty() || b.empty()) {
      throw InvalidInput("flip map entry '" + std::string(item) + "' has non-integer classes");
    }
    pairs.emplace_back(src, dst);
  }
  return ClassFlipMap(std::move(pairs), num_classes);
}

/// With probability rate, relabel each sample to one of the other
/// num_classes - 1 classes, uniformly. Sample i draws from the stream
/// derived from (seed, i), so the result does not depend on evaluation order.
inline LabelVector corrupt_symmetric(const LabelVector& labels, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw InvalidInput("corrupt_symmetric: rate outside [0, 1]");
  const int kc = labels.num_classes();
  if (kc < 2) throw InvalidInput("corrupt_symmetric: need at least 2 classes");
  std::vector<int> out(labels.begin(), labels.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    Xoshiro256 rng(seed, Stream::kNoise, i);
    if (rng.uniform() < rate) {
      const int draw = static_cast<int>(rng.below(static_cast<std::uint64_t>(kc - 1)));
      out[i] = draw >= out[i] ? draw + 1 : draw;
    }
  }
  return LabelVector(std::move(out), kc);
}

/// With probability rate, move each source-class sample to its mapped target.
inline LabelVector corrupt_asymmetric(const LabelVector& labels, const ClassFlipMap& map,
                                      double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 0.5)) throw InvalidInput("corrupt_asymmetric: rate outside [0, 0.5)");
  if (map.num_classes() != labels.num_classes()) {
    throw InvalidInput("corrupt_asymmetric: flip map has " + std::to_string(map.num_classes()) +
                       " classes, labels have " + std::to_string(labels.num_classes()));
  }
  std::vector<int> out(labels.begin(), labels.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto target = map.target(out[i]);
    if (!target) continue;
    Xoshiro256 rng(seed, Stream::kNoise, i);
    if (rng.uniform() < rate) out[i] = *target;
  }
  return LabelVector(std::move(out), labels.num_classes());
}

inline LabelVector corrupt(const LabelVector& labels, const NoiseSpec& spec) {
  spec.validate();
  return spec.kind == NoiseKind::kSymmetric
             ? corrupt_symmetric(labels, spec.rate, spec.seed)
             : corrupt_asymmetric(labels, spec.flip_map, spec.rate, spec.seed);
}

/// Fraction of positions where the two label vectors differ.
inline double empirical_noise_rate(const LabelVector& clean, const LabelVector& noisy) {
  if (clean.size() != noisy.size()) {
    throw InvalidInput("empirical_noise_rate: lengths " + std::to_string(clean.size()) + " and " +
                       std::to_string(noisy.size()));
  }
  if (clean.empty()) return 0.0;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) changed += clean[i] != noisy[i];
  return static_cast<double>(changed) / static_cast<double>(clean.size());
}

}  // namespace nlent
