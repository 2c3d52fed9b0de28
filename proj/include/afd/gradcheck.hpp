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

// Finite-difference verification of DenseNet::backward.
//
// Every parameter coordinate is perturbed by +-eps and the central difference
// of the train-mode loss is compared with the analytic gradient. Coordinates
// whose perturbation flips any ReLU (the loss is not differentiable there)
// are skipped and counted.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "afd/model.hpp"
#include "afd/random.hpp"

namespace afd {

struct GradcheckOptions {
  double eps = 1e-4;
  double tolerance = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
  // near-zero gradients from turning round-off into huge relative errors.
  double floor = 1e-6;
  int batch = 2;
  int height = 16;
  int width = 16;
  std::uint64_t seed = 0;
  // Negative control: scale the analytic gradient of one tensor.
  std::string corrupt_tensor;
  double corrupt_scale = 1.05;
};

struct CoordinateError {
  std::string tensor;
  std::size_t index = 0;  // within the tensor
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::vector<CoordinateError> worst_per_tensor;  // declaration order
  CoordinateError worst;
  bool passed = false;

  std::string table() const {
    std::ostringstream os;
    os << std::left << std::setw(28) << "tensor" << std::right << std::setw(8) << "index" << std::setw(16)
       << "analytic" << std::setw(16) << "numeric" << std::setw(12) << "rel_error" << '\n';
    for (const auto& e : worst_per_tensor) {
      os << std::left << std::setw(28) << e.tensor << std::right << std::setw(8) << e.index << std::setw(16)
         << std::setprecision(8) << e.analytic << std::setw(16) << e.numeric << std::setw(12)
         << std::setprecision(3) << e.rel_error << '\n';
    }
    return os.str();
  }
};

namespace detail {

template <typename T>
std::vector<std::uint8_t> relu_pattern(const ForwardCache<T>& c) {
  std::vector<std::uint8_t> out;
  auto add = [&](const nn::BnCache<T>& bc) {
    for (T a : bc.act) out.push_back(a > T(0) ? 1 : 0);
  };
  for (const auto& block : c.layers) {
    for (const auto& l : block) add(l);
  }
  for (const auto& t : c.transition_bn) add(t);
  add(c.head_bn);
  return out;
}

}  // namespace detail

inline GradcheckReport gradient_check(const ModelConfig& base_config, const GradcheckOptions& opt) {
  ModelConfig config = base_config;
  config.input_height = opt.height;
  config.input_width = opt.width;
  auto model = DenseNet<double>::build(config, opt.seed);
  Rng rng(detail::derive_seed(opt.seed, "gradcheck-batch"));
  std::vector<double> images(static_cast<std::size_t>(opt.batch) * opt.height * opt.width);
  for (double& v : images) v = uniform01(rng);
  std::vector<Label> labels(static_cast<std::size_t>(opt.batch));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 2 ? Label::kAbnormal : Label::kNormal;

  ForwardOptions no_update;
  no_update.update_running_stats = false;
  ForwardCache<double> cache;
  model.forward(images, opt.batch, Mode::kTrain, &cache, no_update);
  auto analytic = model.backward(cache, labels);
  if (!opt.corrupt_tensor.empty()) {
    const auto& t = model.tensor(opt.corrupt_tensor);
    for (std::size_t i = 0; i < t.size; ++i) analytic[t.offset + i] *= opt.corrupt_scale;
  }
  const auto base_pattern = detail::relu_pattern(cache);

  GradcheckReport report;
  std::map<std::string, CoordinateError> worst;
  auto& params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    ForwardCache<double> plus_cache, minus_cache;
    params[i] = saved + opt.eps;
    const auto p_plus = model.forward(images, opt.batch, Mode::kTrain, &plus_cache, no_update);
    params[i] = saved - opt.eps;
    const auto p_minus = model.forward(images, opt.batch, Mode::kTrain, &minus_cache, no_update);
    params[i] = saved;
    if (detail::relu_pattern(plus_cache) != base_pattern || detail::relu_pattern(minus_cache) != base_pattern) {
      ++report.skipped;
      continue;
    }
    const double numeric =
        (loss_bce<double>(p_plus, labels) - loss_bce<double>(p_minus, labels)) / (2.0 * opt.eps);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opt.floor});
    ++report.checked;
    const auto& tensor = model.tensor_of(i);
    auto it = worst.find(tensor.name);
    if (it == worst.end() || rel > it->second.rel_error) {
      worst[tensor.name] = {tensor.name, i - tensor.offset, a, numeric, rel};
    }
    if (rel >= report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst = {tensor.name, i - tensor.offset, a, numeric, rel};
    }
  }
  for (const auto& t : model.param_tensors()) {
    if (auto it = worst.find(t.name); it != worst.end()) report.worst_per_tensor.push_back(it->second);
  }
  report.passed = report.checked > 0 && report.max_rel_error < opt.tolerance;
  return report;
}

}  // namespace afd
