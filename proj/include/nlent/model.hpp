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

// Linear-probe and MLP-K classification heads with explicit forward and
// backward passes, plus SGD with momentum, weight decay and global
// gradient-norm clipping.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nlent/binary_io.hpp"
#include "nlent/errors.hpp"
#include "nlent/numerics.hpp"
#include "nlent/random.hpp"

namespace nlent {

enum class Activation : std::uint32_t { kIdentity = 0, kReLU = 1, kTanh = 2 };

inline std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kReLU: return "relu";
    case Activation::kTanh: return "tanh";
  }
  return "?";
}

struct Architecture {
  enum class Kind { kLinear, kMlp };
  Kind kind = Kind::kLinear;
  int depth = 3;       // total dense layers for kMlp
  int hidden = 256;
  Activation activation = Activation::kReLU;

  static Architecture linear() { return {}; }
  static Architecture mlp(int depth, int hidden, Activation act = Activation::kReLU) {
    return {Kind::kMlp, depth, hidden, act};
  }
};

/// One dense layer: y = x W + b with W stored fan_in x fan_out.
struct Layer {
  DenseMatrix weight;
  std::vector<double> bias;
  Activation activation = Activation::kIdentity;  // applied to this layer's output

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Parameter gradients, shaped like ModelParams::layers().
struct Gradients {
  std::vector<Layer> layers;
};

class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(std::vector<Layer> layers) : layers_(std::move(layers)) { check(); }

  std::size_t input_dim() const noexcept { return layers_.front().weight.rows(); }
  std::size_t num_classes() const noexcept { return layers_.back().weight.cols(); }
  std::size_t num_layers() const noexcept { return layers_.size(); }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::uint64_t generation() const noexcept { return generation_; }

  /// Mutable access invalidates caches taken from earlier forward passes.
  std::vector<Layer>& mutable_layers() noexcept {
    ++generation_;
    return layers_;
  }

  std::size_t num_parameters() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// All parameters in layer order: weights row-major, then bias.
  std::vector<double> flatten() const {
    std::vector<double> flat;
    flat.reserve(num_parameters());
    for (const auto& l : layers_) {
      flat.insert(flat.end(), l.weight.values().begin(), l.weight.values().end());
      flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    }
    return flat;
  }

  void assign_flat(std::span<const double> flat) {
    if (flat.size() != num_parameters()) throw InvalidInput("assign_flat: size mismatch");
    std::size_t pos = 0;
    for (auto& l : mutable_layers()) {
      for (double& w : l.weight.values()) w = flat[pos++];
      for (double& b : l.bias) b = flat[pos++];
    }
  }

  bool all_finite() const noexcept {
    for (const auto& l : layers_) {
      if (!l.weight.all_finite()) return false;
      for (double b : l.bias) {
        if (!std::isfinite(b)) return false;
      }
    }
    return true;
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.layers_ == b.layers_;
  }

 private:
  void check() const {
    if (layers_.empty()) throw InvalidInput("ModelParams: no layers");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.bias.size() != l.weight.cols()) throw InvalidInput("ModelParams: bias/weight mismatch");
      if (i > 0 && layers_[i - 1].weight.cols() != l.weight.rows()) {
        throw InvalidInput("ModelParams: layer " + std::to_string(i) + " does not compose");
      }
    }
    if (layers_.back().activation != Activation::kIdentity) {
      throw InvalidInput("ModelParams: output layer must be linear (logits)");
    }
  }

  std::vector<Layer> layers_;
  std::uint64_t generation_ = 0;
};

/// Fan-in scaled uniform weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases.
inline ModelParams init_params(const Architecture& arch, std::size_t input_dim, int num_classes,
                               std::uint64_t seed) {
  if (input_dim < 1) throw InvalidInput("init_params: input_dim must be >= 1");
  if (num_classes < 2) throw InvalidInput("init_params: need at least 2 classes");
  std::vector<std::size_t> widths{input_dim};
  if (arch.kind == Architecture::Kind::kMlp) {
    if (arch.depth < 1) throw InvalidInput("init_params: MLP depth must be >= 1");
    if (arch.hidden < 1) throw InvalidInput("init_params: hidden width must be >= 1");
    for (int i = 1; i < arch.depth; ++i) widths.push_back(static_cast<std::size_t>(arch.hidden));
  }
  widths.push_back(static_cast<std::size_t>(num_classes));

  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const std::size_t fan_in = widths[i];
    const std::size_t fan_out = widths[i + 1];
    Xoshiro256 rng(seed, Stream::kInit, i);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Layer layer{DenseMatrix(fan_in, fan_out), std::vector<double>(fan_out, 0.0),
                i + 2 < widths.size() ? arch.activation : Activation::kIdentity};
    for (double& w : layer.weight.values()) w = rng.uniform(-bound, bound);
    layers.push_back(std::move(layer));
  }
  return ModelParams(std::move(layers));
}

namespace detail {

// out = in * W + b
inline DenseMatrix affine(const DenseMatrix& in, const Layer& layer) {
  const std::size_t n = in.rows();
  const std::size_t fi = layer.weight.rows();
  const std::size_t fo = layer.weight.cols();
  DenseMatrix out(n, fo);
  for (std::size_t i = 0; i < n; ++i) {
    auto o = out.row(i);
    std::copy(layer.bias.begin(), layer.bias.end(), o.begin());
    const auto x = in.row(i);
    for (std::size_t k = 0; k < fi; ++k) {
      const double a = x[k];
      if (a == 0.0) continue;
      const auto w = layer.weight.row(k);
      for (std::size_t j = 0; j < fo; ++j) o[j] += a * w[j];
    }
  }
  return out;
}

inline void activate(DenseMatrix& m, Activation act) {
  switch (act) {
    case Activation::kIdentity: return;
    case Activation::kReLU:
      for (double& v : m.values()) v = v > 0.0 ? v : 0.0;
      return;
    case Activation::kTanh:
      for (double& v : m.values()) v = std::tanh(v);
      return;
  }
}

}  // namespace detail

/// Activations saved by forward() for the matching backward() call.
struct ForwardCache {
  const ModelParams* owner = nullptr;
  std::uint64_t generation = 0;
  std::vector<DenseMatrix> inputs;   // input to each layer
  std::vector<DenseMatrix> outputs;  // post-activation output of each layer
};

struct ForwardResult {
  DenseMatrix logits;
  ForwardCache cache;
};

inline void check_input(const ModelParams& params, const DenseMatrix& x) {
  if (x.cols() != params.input_dim()) {
    throw InvalidInput("forward: input has " + std::to_string(x.cols()) +
                       " columns, model expects " + std::to_string(params.input_dim()));
  }
}

inline ForwardResult forward(const ModelParams& params, const DenseMatrix& x) {
  check_input(params, x);
  ForwardResult result;
  result.cache.owner = &params;
  result.cache.generation = params.generation();
  DenseMatrix current = x;
  for (const auto& layer : params.layers()) {
    DenseMatrix out = detail::affine(current, layer);
    detail::activate(out, layer.activation);
    result.cache.inputs.push_back(std::move(current));
    current = out;
    result.cache.outputs.push_back(std::move(out));
  }
  result.logits = std::move(current);
  return result;
}

/// Logits only; no cache is kept.
inline DenseMatrix predict_logits(const ModelParams& params, const DenseMatrix& x) {
  check_input(params, x);
  DenseMatrix current = x;
  for (const auto& layer : params.layers()) {
    current = detail::affine(current, layer);
    detail::activate(current, layer.activation);
  }
  return current;
}

/// Exact parameter gradients of the scalar whose logit gradient is given.
/// Any batch averaging must already be folded into grad_wrt_logits.
inline Gradients backward(const ModelParams& params, const ForwardCache& cache,
                          const DenseMatrix& grad_wrt_logits) {
  if (cache.owner != &params || cache.generation != params.generation() ||
      cache.inputs.size() != params.num_layers()) {
    throw InvalidInput("backward: stale cache (parameters changed since forward)");
  }
  const std::size_t n = cache.inputs.front().rows();
  if (grad_wrt_logits.rows() != n || grad_wrt_logits.cols() != params.num_classes()) {
    throw InvalidInput("backward: upstream gradient shape mismatch");
  }
  Gradients grads;
  grads.layers.resize(params.num_layers());
  DenseMatrix upstream = grad_wrt_logits;
  for (std::size_t li = params.num_layers(); li-- > 0;) {
    const Layer& layer = params.layers()[li];
    const DenseMatrix& in = cache.inputs[li];
    const DenseMatrix& out = cache.outputs[li];
    const std::size_t fi = layer.weight.rows();
    const std::size_t fo = layer.weight.cols();

    // Through the activation: upstream becomes d/d(pre-activation).
    if (layer.activation == Activation::kReLU) {
      for (std::size_t i = 0; i < upstream.size(); ++i) {
        if (out.values()[i] <= 0.0) upstream.values()[i] = 0.0;
      }
    } else if (layer.activation == Activation::kTanh) {
      for (std::size_t i = 0; i < upstream.size(); ++i) {
        const double t = out.values()[i];
        upstream.values()[i] *= 1.0 - t * t;
      }
    }

    Layer& g = grads.layers[li];
    g.weight = DenseMatrix(fi, fo);
    g.bias.assign(fo, 0.0);
    g.activation = layer.activation;
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = in.row(i);
      const auto u = upstream.row(i);
      for (std::size_t j = 0; j < fo; ++j) g.bias[j] += u[j];
      for (std::size_t k = 0; k < fi; ++k) {
        const double a = x[k];
        if (a == 0.0) continue;
        auto gw = g.weight.row(k);
        for (std::size_t j = 0; j < fo; ++j) gw[j] += a * u[j];
      }
    }
    if (li == 0) break;
    DenseMatrix down(n, fi);
    for (std::size_t i = 0; i < n; ++i) {
      const auto u = upstream.row(i);
      auto d = down.row(i);
      for (std::size_t k = 0; k < fi; ++k) {
        const auto w = layer.weight.row(k);
        double s = 0.0;
        for (std::size_t j = 0; j < fo; ++j) s += w[j] * u[j];
        d[k] = s;
      }
    }
    upstream = std::move(down);
  }
  return grads;
}

inline double global_norm(const Gradients& grads) noexcept {
  double sq = 0.0;
  for (const auto& l : grads.layers) {
    for (double v : l.weight.values()) sq += v * v;
    for (double v : l.bias) sq += v * v;
  }
  return std::sqrt(sq);
}

/// Rescales all gradients by clip_norm / norm when the global L2 norm
/// exceeds clip_norm.
inline Gradients clip_global_norm(Gradients grads, double clip_norm) {
  if (!(clip_norm > 0.0)) throw InvalidInput("clip_global_norm: clip_norm must be > 0");
  const double norm = global_norm(grads);
  if (norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (auto& l : grads.layers) {
      for (double& v : l.weight.values()) v *= scale;
      for (double& v : l.bias) v *= scale;
    }
  }
  return grads;
}

struct SgdConfig {
  double lr = 0.001;
  double momentum = 0.9;
  bool nesterov = false;
  double weight_decay = 1e-3;
  double clip_norm = 5.0;

  void validate() const {
    if (!(lr > 0.0)) throw InvalidInput("SgdConfig: lr must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidInput("SgdConfig: momentum must be in [0, 1)");
    if (!(weight_decay >= 0.0)) throw InvalidInput("SgdConfig: weight_decay must be >= 0");
    if (!(clip_norm > 0.0)) throw InvalidInput("SgdConfig: clip_norm must be > 0");
  }
};

struct OptimState {
  SgdConfig config;
  Gradients momentum_buffers;

  OptimState(const ModelParams& params, SgdConfig cfg) : config(cfg) {
    config.validate();
    for (const auto& l : params.layers()) {
      momentum_buffers.layers.push_back(
          Layer{DenseMatrix(l.weight.rows(), l.weight.cols()),
                std::vector<double>(l.bias.size(), 0.0), l.activation});
    }
  }
};

/// One SGD update, in place:
///   g   = grad + weight_decay * param
///   buf = momentum * buf + g
///   param -= lr * (nesterov ? g + momentum * buf : buf)
/// Weight decay applies to weights and biases alike. Clipping is the
/// caller's job (see clip_global_norm).
inline void sgd_step(ModelParams& params, OptimState& state, const Gradients& grads) {
  if (grads.layers.size() != params.num_layers() ||
      state.momentum_buffers.layers.size() != params.num_layers()) {
    throw InvalidInput("sgd_step: layer count mismatch");
  }
  for (std::size_t li = 0; li < grads.layers.size(); ++li) {
    const auto& g = grads.layers[li];
    const auto& p = params.layers()[li];
    if (g.weight.rows() != p.weight.rows() || g.weight.cols() != p.weight.cols() ||
        g.bias.size() != p.bias.size()) {
      throw InvalidInput("sgd_step: gradient shape mismatch in layer " + std::to_string(li));
    }
    if (!g.weight.all_finite() ||
        !std::all_of(g.bias.begin(), g.bias.end(), [](double v) { return std::isfinite(v); })) {
      throw DivergenceError("sgd_step: non-finite gradient in layer " + std::to_string(li));
    }
  }
  const SgdConfig& c = state.config;
  const auto update = [&c](std::span<double> param, std::span<const double> grad,
                           std::span<double> buf) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double g = grad[i] + c.weight_decay * param[i];
      buf[i] = c.momentum * buf[i] + g;
      const double step = c.nesterov ? g + c.momentum * buf[i] : buf[i];
      param[i] -= c.lr * step;
    }
  };
  auto& layers = params.mutable_layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    auto& buf = state.momentum_buffers.layers[li];
    update(layers[li].weight.values(), grads.layers[li].weight.values(), buf.weight.values());
    update(layers[li].bias, grads.layers[li].bias, buf.bias);
  }
}

/// Checkpoint layout, all little-endian:
///   "NLMP" | u32 version (1) | u32 layer count
///   per layer: u64 fan_in | u64 fan_out | u32 activation
///   per layer: fan_in*fan_out f64 weights (row-major), fan_out f64 biases
inline std::string encode_params(const ModelParams& params) {
  io::Writer w;
  w.bytes("NLMP");
  w.le<std::uint32_t>(1);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(params.num_layers()));
  for (const auto& l : params.layers()) {
    w.le<std::uint64_t>(l.weight.rows());
    w.le<std::uint64_t>(l.weight.cols());
    w.le<std::uint32_t>(static_cast<std::uint32_t>(l.activation));
  }
  for (const auto& l : params.layers()) {
    for (double v : l.weight.values()) w.le<double>(v);
    for (double v : l.bias) w.le<double>(v);
  }
  return w.buffer();
}

inline ModelParams decode_params(std::span<const std::uint8_t> bytes, std::string source) {
  io::Reader r(bytes, std::move(source));
  const auto magic = r.take(4, "magic");
  if (std::string_view(reinterpret_cast<const char*>(magic.data()), 4) != "NLMP") {
    throw FormatError(r.source() + ": bad checkpoint magic");
  }
  if (r.le<std::uint32_t>("version") != 1) throw FormatError(r.source() + ": unsupported version");
  const auto count = r.le<std::uint32_t>("layer count");
  if (count == 0) throw FormatError(r.source() + ": no layers");
  struct Shape {
    std::uint64_t fi, fo;
    std::uint32_t act;
  };
  std::vector<Shape> shapes;
  for (std::uint32_t i = 0; i < count; ++i) {
    Shape s{r.le<std::uint64_t>("fan_in"), r.le<std::uint64_t>("fan_out"),
            r.le<std::uint32_t>("activation")};
    if (s.act > 2) throw FormatError(r.source() + ": unknown activation tag");
    if (s.fi == 0 || s.fo == 0) throw FormatError(r.source() + ": empty layer");
    if ((s.fi * s.fo + s.fo) * 8 > r.remaining()) {
      throw FormatError(r.source() + ": truncated parameter block");
    }
    shapes.push_back(s);
  }
  std::vector<Layer> layers;
  for (const auto& s : shapes) {
    Layer l{DenseMatrix(s.fi, s.fo), std::vector<double>(s.fo), static_cast<Activation>(s.act)};
    for (double& v : l.weight.values()) v = r.le<double>("weights");
    for (double& v : l.bias) v = r.le<double>("biases");
    layers.push_back(std::move(l));
  }
  if (r.remaining() != 0) throw FormatError(r.source() + ": trailing bytes");
  try {
    return ModelParams(std::move(layers));
  } catch (const InvalidInput& e) {
    throw FormatError(r.source() + ": " + e.what());
  }
}

inline void save_params(const ModelParams& params, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_params(params));
}

inline ModelParams load_params(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return decode_params(bytes, path.string());
}

}  // namespace nlent
