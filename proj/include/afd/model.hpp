/*
 * Copyright 2026 The AFD Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Densely connected CNN for single-channel spectrogram images.
//
//   stem      3x3 conv, 1 -> c0 channels
//   block b   L dense layers, each BN -> ReLU -> 3x3 conv adding k channels;
//             layer j sees the concatenation of the block input and the
//             outputs of layers 0..j-1
//   between   BN -> ReLU -> 1x1 conv (channels * compression) -> 2x2 avg pool
//   head      BN -> ReLU -> global average pool -> FC -> sigmoid
//
// Convolutions carry no bias (every consumer starts with BN). Parameters live
// in one flat vector in declaration order; batch-norm running statistics live
// in a second flat vector.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "afd/binary_io.hpp"
#include "afd/errors.hpp"
#include "afd/labels.hpp"
#include "afd/nn.hpp"
#include "afd/random.hpp"
#include "json.hpp"

namespace afd {

struct DenseBlockSpec {
  int layers = 4;
  int growth = 4;
  bool operator==(const DenseBlockSpec&) const = default;
};

struct ModelConfig {
  int input_height = 64;
  int input_width = 64;
  int stem_channels = 8;
  std::vector<DenseBlockSpec> blocks{{4, 4}, {4, 4}};
  double compression = 0.5;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  bool operator==(const ModelConfig&) const = default;
};

// Channel bookkeeping derived from a config.
struct BlockShape {
  int in_channels;
  int out_channels;  // in + layers * growth
  int height;
  int width;
};

inline std::vector<BlockShape> block_shapes(const ModelConfig& cfg) {
  if (cfg.input_height < 1 || cfg.input_width < 1) throw ConfigError("input size must be positive");
  if (cfg.stem_channels < 1) throw ConfigError("stem channels must be >= 1");
  if (cfg.blocks.empty()) throw ConfigError("need at least one dense block");
  if (!(cfg.compression > 0.0 && cfg.compression <= 1.0)) throw ConfigError("compression must be in (0, 1]");
  std::vector<BlockShape> shapes;
  int c = cfg.stem_channels, h = cfg.input_height, w = cfg.input_width;
  for (std::size_t b = 0; b < cfg.blocks.size(); ++b) {
    const auto& spec = cfg.blocks[b];
    if (spec.layers < 1 || spec.growth < 1) throw ConfigError("dense block needs layers >= 1 and growth >= 1");
    if (h < 1 || w < 1) throw ConfigError("input too small for the number of transitions");
    const int out = c + spec.layers * spec.growth;
    shapes.push_back({c, out, h, w});
    c = static_cast<int>(std::floor(out * cfg.compression));
    if (c < 1) throw ConfigError("transition leaves no channels");
    h /= 2;
    w /= 2;
  }
  return shapes;
}

inline int transition_channels(const ModelConfig& cfg, int in_channels) {
  return static_cast<int>(std::floor(in_channels * cfg.compression));
}

struct ParamTensor {
  std::string name;
  std::size_t offset;
  std::size_t size;
};

enum class Mode { kTrain, kEval };

template <typename T>
struct ForwardCache {
  int n = 0;
  std::vector<T> input;                            // N x 1 x H x W
  std::vector<std::vector<T>> features;            // per block, N x C_out x H x W
  std::vector<std::vector<nn::BnCache<T>>> layers;  // per block, per dense layer
  std::vector<nn::BnCache<T>> transition_bn;
  std::vector<std::vector<T>> transition_conv;     // pre-pool conv output
  nn::BnCache<T> head_bn;
  std::vector<T> pooled;  // N x C
  std::vector<T> logits;
  std::vector<T> probabilities;
};

struct ForwardOptions {
  bool update_running_stats = true;
  // Zero the output of one dense layer (structural tests).
  int ablate_block = -1;
  int ablate_layer = -1;
};

inline constexpr double kProbabilityEps = 1e-7;

template <typename T>
class DenseNet {
 public:
  DenseNet() = default;

  explicit DenseNet(ModelConfig config) : config_(std::move(config)) {
    shapes_ = block_shapes(config_);
    auto add_param = [&](std::string name, std::size_t size) {
      params_tensors_.push_back({std::move(name), param_count_, size});
      param_count_ += size;
      return params_tensors_.back().offset;
    };
    auto add_bn = [&](const std::string& name, int c) {
      Bn bn{c, add_param(name + ".gamma", c), add_param(name + ".beta", c), buffer_count_,
            buffer_count_ + static_cast<std::size_t>(c)};
      buffer_tensors_.push_back({name + ".running_mean", bn.mean, static_cast<std::size_t>(c)});
      buffer_tensors_.push_back({name + ".running_var", bn.var, static_cast<std::size_t>(c)});
      buffer_count_ += 2 * static_cast<std::size_t>(c);
      return bn;
    };
    auto add_conv = [&](const std::string& name, int cin, int cout, int k) {
      return Conv{cin, cout, k, add_param(name + ".weight", static_cast<std::size_t>(cin) * cout * k * k)};
    };

    stem_ = add_conv("stem.conv", 1, config_.stem_channels, 3);
    for (std::size_t b = 0; b < shapes_.size(); ++b) {
      const std::string prefix = "block" + std::to_string(b);
      std::vector<DenseLayer> layers;
      int c = shapes_[b].in_channels;
      for (int j = 0; j < config_.blocks[b].layers; ++j) {
        const std::string lp = prefix + ".layer" + std::to_string(j);
        DenseLayer layer;
        layer.bn = add_bn(lp + ".bn", c);
        layer.conv = add_conv(lp + ".conv", c, config_.blocks[b].growth, 3);
        layers.push_back(layer);
        c += config_.blocks[b].growth;
      }
      blocks_.push_back(std::move(layers));
      if (b + 1 < shapes_.size()) {
        const std::string tp = "transition" + std::to_string(b);
        Transition t;
        t.bn = add_bn(tp + ".bn", c);
        t.conv = add_conv(tp + ".conv", c, transition_channels(config_, c), 1);
        transitions_.push_back(t);
      }
    }
    head_bn_ = add_bn("head.bn", shapes_.back().out_channels);
    fc_weight_ = add_param("head.fc.weight", static_cast<std::size_t>(shapes_.back().out_channels));
    fc_bias_ = add_param("head.fc.bias", 1);
    params_.assign(param_count_, T(0));
    buffers_.assign(buffer_count_, T(0));
    for (const Bn* bn : all_bn()) {
      for (int i = 0; i < bn->c; ++i) {
        params_[bn->gamma + i] = T(1);
        buffers_[bn->var + i] = T(1);
      }
    }
  }

  // He-uniform kernels and FC weights (limit sqrt(6 / fan_in)), zero bias,
  // BN gain 1 / bias 0, running mean 0 / var 1.
  static DenseNet build(const ModelConfig& config, std::uint64_t seed) {
    DenseNet net(config);
    Rng rng(seed);
    auto init = [&](std::size_t offset, std::size_t size, std::size_t fan_in) {
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (std::size_t i = 0; i < size; ++i) net.params_[offset + i] = static_cast<T>(uniform(rng, -limit, limit));
    };
    for (const Conv* conv : net.all_conv()) {
      init(conv->weight, static_cast<std::size_t>(conv->cin) * conv->cout * conv->k * conv->k,
           static_cast<std::size_t>(conv->cin) * conv->k * conv->k);
    }
    const auto c = static_cast<std::size_t>(net.shapes_.back().out_channels);
    init(net.fc_weight_, c, c);
    return net;
  }

  const ModelConfig& config() const { return config_; }
  const std::vector<BlockShape>& shapes() const { return shapes_; }
  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }
  std::vector<T>& buffers() { return buffers_; }
  const std::vector<T>& buffers() const { return buffers_; }
  const std::vector<ParamTensor>& param_tensors() const { return params_tensors_; }
  const std::vector<ParamTensor>& buffer_tensors() const { return buffer_tensors_; }
  std::size_t param_count() const { return param_count_; }

  const ParamTensor& tensor_of(std::size_t index) const {
    for (const auto& t : params_tensors_) {
      if (index >= t.offset && index < t.offset + t.size) return t;
    }
    throw ConfigError("parameter index out of range");
  }

  const ParamTensor& tensor(const std::string& name) const {
    for (const auto& t : params_tensors_) {
      if (t.name == name) return t;
    }
    throw ConfigError("no parameter tensor named " + name);
  }

  // images: n x H x W, row-major. Returns probabilities clamped to
  // [1e-7, 1 - 1e-7].
  std::vector<T> forward(std::span<const T> images, int n, Mode mode, ForwardCache<T>* cache = nullptr,
                         const ForwardOptions& opts = {}) {
    const int h0 = config_.input_height, w0 = config_.input_width;
    if (n < 1) throw ConfigError("empty batch");
    if (images.size() != static_cast<std::size_t>(n) * h0 * w0) {
      throw ConfigError("batch shape mismatch: expected " + std::to_string(n) + " images of " + std::to_string(h0) +
                        "x" + std::to_string(w0));
    }
    if (mode == Mode::kTrain && n < 2) throw ConfigError("train-mode batch needs at least 2 images");
    ForwardCache<T> local;
    ForwardCache<T>& c = cache ? *cache : local;
    c.n = n;
    c.input.assign(images.begin(), images.end());
    c.features.resize(shapes_.size());
    c.layers.assign(shapes_.size(), {});
    c.transition_bn.assign(transitions_.size(), {});
    c.transition_conv.assign(transitions_.size(), {});

    nn::BnOptions bn_opt;
    bn_opt.training = mode == Mode::kTrain;
    bn_opt.update_running = opts.update_running_stats;
    bn_opt.momentum = config_.bn_momentum;
    bn_opt.eps = config_.bn_eps;

    for (std::size_t b = 0; b < shapes_.size(); ++b) {
      const BlockShape& s = shapes_[b];
      auto& feat = c.features[b];
      feat.assign(static_cast<std::size_t>(n) * s.out_channels * s.height * s.width, T(0));
      nn::ChannelView<T> block{feat.data(), n, s.out_channels, 0, s.out_channels, s.height, s.width};
      if (b == 0) {
        auto out = block;
        out.c = stem_.cout;
        nn::conv_forward<T>(nn::dense_view<const T>(c.input.data(), n, 1, h0, w0), &params_[stem_.weight], 3, out);
      } else {
        const Transition& t = transitions_[b - 1];
        const BlockShape& prev = shapes_[b - 1];
        auto& bc = c.transition_bn[b - 1];
        nn::bn_relu_forward<T>(as_const(block_view(c.features[b - 1], prev)), &params_[t.bn.gamma],
                               &params_[t.bn.beta], &buffers_[t.bn.mean], &buffers_[t.bn.var], bn_opt, bc);
        auto& conv_out = c.transition_conv[b - 1];
        conv_out.assign(static_cast<std::size_t>(n) * t.conv.cout * prev.height * prev.width, T(0));
        const auto conv_view = nn::dense_view<T>(conv_out.data(), n, t.conv.cout, prev.height, prev.width);
        nn::conv_forward<T>(nn::dense_view<const T>(bc.act.data(), n, t.conv.cin, prev.height, prev.width),
                            &params_[t.conv.weight], 1, conv_view);
        auto out = block;
        out.c = t.conv.cout;
        nn::avgpool2_forward<T>(as_const(conv_view), out);
      }
      c.layers[b].resize(blocks_[b].size());
      for (std::size_t j = 0; j < blocks_[b].size(); ++j) {
        const DenseLayer& layer = blocks_[b][j];
        auto in = block;
        in.c = layer.conv.cin;
        auto& lc = c.layers[b][j];
        nn::bn_relu_forward<T>(as_const(in), &params_[layer.bn.gamma], &params_[layer.bn.beta],
                               &buffers_[layer.bn.mean], &buffers_[layer.bn.var], bn_opt, lc);
        auto out = block;
        out.c0 = layer.conv.cin;
        out.c = layer.conv.cout;
        nn::conv_forward<T>(nn::dense_view<const T>(lc.act.data(), n, layer.conv.cin, s.height, s.width),
                            &params_[layer.conv.weight], 3, out);
        if (static_cast<int>(b) == opts.ablate_block && static_cast<int>(j) == opts.ablate_layer) {
          for (int smp = 0; smp < n; ++smp) {
            for (int ch = 0; ch < out.c; ++ch) {
              T* p = out.channel(smp, ch);
              for (std::size_t i = 0; i < out.plane(); ++i) p[i] = T(0);
            }
          }
        }
      }
    }

    const BlockShape& last = shapes_.back();
    nn::bn_relu_forward<T>(as_const(block_view(c.features.back(), last)), &params_[head_bn_.gamma],
                           &params_[head_bn_.beta], &buffers_[head_bn_.mean], &buffers_[head_bn_.var], bn_opt,
                           c.head_bn);
    c.pooled.assign(static_cast<std::size_t>(n) * last.out_channels, T(0));
    nn::gap_forward<T>(nn::dense_view<const T>(c.head_bn.act.data(), n, last.out_channels, last.height, last.width),
                       c.pooled.data());
    c.logits.assign(static_cast<std::size_t>(n), T(0));
    c.probabilities.assign(static_cast<std::size_t>(n), T(0));
    for (int s = 0; s < n; ++s) {
      T z = params_[fc_bias_];
      for (int ch = 0; ch < last.out_channels; ++ch) {
        z += params_[fc_weight_ + ch] * c.pooled[static_cast<std::size_t>(s) * last.out_channels + ch];
      }
      c.logits[static_cast<std::size_t>(s)] = z;
      c.probabilities[static_cast<std::size_t>(s)] = std::clamp(
          nn::sigmoid(z), static_cast<T>(kProbabilityEps), static_cast<T>(1.0 - kProbabilityEps));
    }
    return c.probabilities;
  }

  // Gradients of the mean binary cross-entropy w.r.t. every parameter, from a
  // train-mode forward cache. dL/dlogit = (sigmoid(z) - y) / N.
  std::vector<T> backward(const ForwardCache<T>& c, std::span<const Label> labels) const {
    const int n = c.n;
    if (labels.size() != static_cast<std::size_t>(n)) throw ConfigError("label count does not match batch");
    std::vector<T> grad(param_count_, T(0));
    const BlockShape& last = shapes_.back();

    std::vector<T> dlogit(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
      const T y = is_positive(labels[static_cast<std::size_t>(s)]) ? T(1) : T(0);
      dlogit[static_cast<std::size_t>(s)] = (nn::sigmoid(c.logits[static_cast<std::size_t>(s)]) - y) / static_cast<T>(n);
    }
    const std::size_t plane = static_cast<std::size_t>(last.height) * last.width;
    std::vector<T> dact(static_cast<std::size_t>(n) * last.out_channels * plane);
    for (int s = 0; s < n; ++s) {
      const T g = dlogit[static_cast<std::size_t>(s)];
      grad[fc_bias_] += g;
      for (int ch = 0; ch < last.out_channels; ++ch) {
        grad[fc_weight_ + ch] += g * c.pooled[static_cast<std::size_t>(s) * last.out_channels + ch];
        const T v = g * params_[fc_weight_ + ch] / static_cast<T>(plane);
        T* dst = dact.data() + (static_cast<std::size_t>(s) * last.out_channels + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = v;
      }
    }
    check_finite(grad, "head.fc");

    std::vector<std::vector<T>> dfeat(shapes_.size());
    dfeat.back().assign(c.features.back().size(), T(0));
    nn::bn_relu_backward<T>(c.head_bn, dact, n, last.out_channels, plane, &params_[head_bn_.gamma],
                            &grad[head_bn_.gamma], &grad[head_bn_.beta], block_view(dfeat.back(), last));
    check_finite(grad, "head.bn");

    for (std::size_t bi = shapes_.size(); bi-- > 0;) {
      const BlockShape& s = shapes_[bi];
      const std::size_t sp = static_cast<std::size_t>(s.height) * s.width;
      auto block_grad = block_view(dfeat[bi], s);
      for (std::size_t j = blocks_[bi].size(); j-- > 0;) {
        const DenseLayer& layer = blocks_[bi][j];
        const auto& lc = c.layers[bi][j];
        auto dout = block_grad;
        dout.c0 = layer.conv.cin;
        dout.c = layer.conv.cout;
        std::vector<T> dlayer_act(static_cast<std::size_t>(n) * layer.conv.cin * sp, T(0));
        nn::conv_backward<T>(nn::dense_view<const T>(lc.act.data(), n, layer.conv.cin, s.height, s.width),
                             &params_[layer.conv.weight], 3, as_const(dout), &grad[layer.conv.weight],
                             nn::dense_view<T>(dlayer_act.data(), n, layer.conv.cin, s.height, s.width));
        auto din = block_grad;
        din.c = layer.conv.cin;
        nn::bn_relu_backward<T>(lc, dlayer_act, n, layer.conv.cin, sp, &params_[layer.bn.gamma],
                                &grad[layer.bn.gamma], &grad[layer.bn.beta], din);
        check_finite(grad, "block" + std::to_string(bi) + ".layer" + std::to_string(j));
      }
      auto din = block_grad;
      if (bi == 0) {
        din.c = stem_.cout;
        nn::conv_backward<T>(nn::dense_view<const T>(c.input.data(), n, 1, config_.input_height, config_.input_width),
                             &params_[stem_.weight], 3, as_const(din), &grad[stem_.weight], nn::ChannelView<T>{});
        check_finite(grad, "stem");
      } else {
        const Transition& t = transitions_[bi - 1];
        const BlockShape& prev = shapes_[bi - 1];
        const std::size_t pp = static_cast<std::size_t>(prev.height) * prev.width;
        din.c = t.conv.cout;
        std::vector<T> dconv(static_cast<std::size_t>(n) * t.conv.cout * pp, T(0));
        nn::avgpool2_backward<T>(as_const(din), nn::dense_view<T>(dconv.data(), n, t.conv.cout, prev.height, prev.width));
        const auto& bc = c.transition_bn[bi - 1];
        std::vector<T> dtact(static_cast<std::size_t>(n) * t.conv.cin * pp, T(0));
        nn::conv_backward<T>(nn::dense_view<const T>(bc.act.data(), n, t.conv.cin, prev.height, prev.width),
                             &params_[t.conv.weight], 1,
                             nn::dense_view<const T>(dconv.data(), n, t.conv.cout, prev.height, prev.width),
                             &grad[t.conv.weight], nn::dense_view<T>(dtact.data(), n, t.conv.cin, prev.height, prev.width));
        dfeat[bi - 1].assign(c.features[bi - 1].size(), T(0));
        nn::bn_relu_backward<T>(bc, dtact, n, t.conv.cin, pp, &params_[t.bn.gamma], &grad[t.bn.gamma],
                                &grad[t.bn.beta], block_view(dfeat[bi - 1], prev));
        check_finite(grad, "transition" + std::to_string(bi - 1));
      }
    }
    return grad;
  }

  // Forward in eval mode, in chunks, without touching running statistics.
  std::vector<T> predict_batch(std::span<const T> images, int n, int chunk = 64) {
    std::vector<T> out;
    out.reserve(static_cast<std::size_t>(n));
    const std::size_t stride = static_cast<std::size_t>(config_.input_height) * config_.input_width;
    for (int start = 0; start < n; start += chunk) {
      const int m = std::min(chunk, n - start);
      auto p = forward(images.subspan(static_cast<std::size_t>(start) * stride, static_cast<std::size_t>(m) * stride),
                       m, Mode::kEval);
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

  template <typename U>
  DenseNet<U> cast() const {
    DenseNet<U> other(config_);
    for (std::size_t i = 0; i < params_.size(); ++i) other.params()[i] = static_cast<U>(params_[i]);
    for (std::size_t i = 0; i < buffers_.size(); ++i) other.buffers()[i] = static_cast<U>(buffers_[i]);
    return other;
  }

 private:
  struct Conv {
    int cin = 0, cout = 0, k = 0;
    std::size_t weight = 0;
  };
  struct Bn {
    int c = 0;
    std::size_t gamma = 0, beta = 0;  // into params_
    std::size_t mean = 0, var = 0;    // into buffers_
  };
  struct DenseLayer {
    Bn bn;
    Conv conv;
  };
  struct Transition {
    Bn bn;
    Conv conv;
  };

  static nn::ChannelView<T> block_view(std::vector<T>& buf, const BlockShape& s) {
    const int n = static_cast<int>(buf.size() / (static_cast<std::size_t>(s.out_channels) * s.height * s.width));
    return {buf.data(), n, s.out_channels, 0, s.out_channels, s.height, s.width};
  }
  static nn::ChannelView<const T> block_view(const std::vector<T>& buf, const BlockShape& s) {
    const int n = static_cast<int>(buf.size() / (static_cast<std::size_t>(s.out_channels) * s.height * s.width));
    return {buf.data(), n, s.out_channels, 0, s.out_channels, s.height, s.width};
  }
  static nn::ChannelView<const T> as_const(const nn::ChannelView<T>& v) {
    return {v.data, v.n, v.c_total, v.c0, v.c, v.h, v.w};
  }
  static nn::ChannelView<const T> as_const(const nn::ChannelView<const T>& v) { return v; }

  std::vector<const Bn*> all_bn() const {
    std::vector<const Bn*> out;
    for (const auto& block : blocks_) {
      for (const auto& l : block) out.push_back(&l.bn);
    }
    for (const auto& t : transitions_) out.push_back(&t.bn);
    out.push_back(&head_bn_);
    return out;
  }
  std::vector<const Conv*> all_conv() const {
    std::vector<const Conv*> out{&stem_};
    for (const auto& block : blocks_) {
      for (const auto& l : block) out.push_back(&l.conv);
    }
    for (const auto& t : transitions_) out.push_back(&t.conv);
    return out;
  }

  void check_finite(const std::vector<T>& grad, const std::string& where) const {
    for (T g : grad) {
      if (!std::isfinite(static_cast<double>(g))) throw DivergenceError("non-finite gradient in " + where);
    }
  }

  ModelConfig config_;
  std::vector<BlockShape> shapes_;
  Conv stem_;
  std::vector<std::vector<DenseLayer>> blocks_;
  std::vector<Transition> transitions_;
  Bn head_bn_;
  std::size_t fc_weight_ = 0;
  std::size_t fc_bias_ = 0;
  std::vector<ParamTensor> params_tensors_;
  std::vector<ParamTensor> buffer_tensors_;
  std::size_t param_count_ = 0;
  std::size_t buffer_count_ = 0;
  std::vector<T> params_;
  std::vector<T> buffers_;
};

// Mean binary cross-entropy with probabilities clipped to [1e-7, 1 - 1e-7].
template <typename T>
double loss_bce(std::span<const T> probabilities, std::span<const Label> labels) {
  if (probabilities.size() != labels.size()) throw ConfigError("loss_bce: length mismatch");
  if (probabilities.empty()) throw ConfigError("loss_bce: empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp(static_cast<double>(probabilities[i]), kProbabilityEps, 1.0 - kProbabilityEps);
    acc -= is_positive(labels[i]) ? std::log(p) : std::log(1.0 - p);
  }
  return acc / static_cast<double>(probabilities.size());
}

// Classic momentum: v <- momentum * v + g; p <- p - lr * v.
template <typename T>
void sgd_step(std::vector<T>& params, std::span<const T> grad, std::vector<T>& velocity, double lr, double momentum) {
  if (grad.size() != params.size()) throw ConfigError("gradient size mismatch");
  if (velocity.size() != params.size()) velocity.assign(params.size(), T(0));
  const T m = static_cast<T>(momentum), step = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = m * velocity[i] + grad[i];
    params[i] -= step * velocity[i];
  }
}

// ---------------------------------------------------------------------------
// Serialization

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : c.blocks) blocks.push_back({{"layers", b.layers}, {"growth", b.growth}});
  j = nlohmann::json{{"input", {1, c.input_height, c.input_width}},
                     {"stem_channels", c.stem_channels},
                     {"blocks", blocks},
                     {"compression", c.compression},
                     {"bn_momentum", c.bn_momentum},
                     {"bn_eps", c.bn_eps}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (j.contains("input")) {
    if (j["input"].at(0).get<int>() != 1) throw ConfigError("model input must be single-channel");
    c.input_height = j["input"].at(1).get<int>();
    c.input_width = j["input"].at(2).get<int>();
  }
  c.stem_channels = j.value("stem_channels", c.stem_channels);
  if (j.contains("blocks")) {
    c.blocks.clear();
    for (const auto& b : j["blocks"]) c.blocks.push_back({b.at("layers").get<int>(), b.at("growth").get<int>()});
  }
  c.compression = j.value("compression", c.compression);
  c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
  c.bn_eps = j.value("bn_eps", c.bn_eps);
}

inline constexpr std::array<char, 4> kCheckpointMagic = {'A', 'F', 'D', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// "AFDM", u32 version, u32 config length, config JSON, u64 count + f32
// parameters (declaration order), u64 count + f32 running statistics.
template <typename T>
void save_checkpoint(const DenseNet<T>& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  const std::string config = nlohmann::json(model.config()).dump();
  out.write(kCheckpointMagic.data(), 4);
  detail::write_le<std::uint32_t>(out, kCheckpointVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(config.size()));
  out.write(config.data(), static_cast<std::streamsize>(config.size()));
  for (const auto* values : {&model.params(), &model.buffers()}) {
    detail::write_le<std::uint64_t>(out, values->size());
    for (T v : *values) detail::write_le<float>(out, static_cast<float>(v));
  }
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

template <typename T>
DenseNet<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing checkpoint: " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  std::uint32_t version = 0, config_len = 0;
  if (magic != kCheckpointMagic || !detail::read_le(in, version) || !detail::read_le(in, config_len)) {
    throw CorruptFileError("not a checkpoint file: " + path.string());
  }
  if (version != kCheckpointVersion) {
    throw UnsupportedFormatError("checkpoint version " + std::to_string(version) + " not supported");
  }
  std::string config(config_len, '\0');
  in.read(config.data(), config_len);
  DenseNet<T> model(nlohmann::json::parse(config).get<ModelConfig>());
  for (auto* values : {&model.params(), &model.buffers()}) {
    std::uint64_t count = 0;
    if (!detail::read_le(in, count) || count != values->size()) {
      throw CorruptFileError("checkpoint parameter count mismatch: " + path.string());
    }
    for (auto& v : *values) {
      float f;
      if (!detail::read_le(in, f)) throw CorruptFileError("truncated checkpoint: " + path.string());
      v = static_cast<T>(f);
    }
  }
  return model;
}

}  // namespace afd
