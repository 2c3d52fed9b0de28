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

// Minibatch SGD training with binary cross-entropy, per-epoch history and
// best-validation-accuracy checkpointing.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "afd/errors.hpp"
#include "afd/features.hpp"
#include "afd/labels.hpp"
#include "afd/model.hpp"
#include "afd/random.hpp"
#include "json.hpp"

namespace afd {

struct TrainConfig {
  int epochs = 25;
  int batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  bool shuffle = true;

  bool operator==(const TrainConfig&) const = default;
};

inline void validate(const TrainConfig& c) {
  if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (c.batch_size < 2) throw ConfigError("batch size must be >= 2 (batch norm)");
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) {
    throw ConfigError("learning rate must be finite and non-negative");
  }
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
}

// Images stored back to back (count x height x width).
struct LabeledImages {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;
  std::vector<Label> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t stride() const { return height * width; }

  void add(const FeatureImage& image, Label label) {
    if (labels.empty() && pixels.empty()) {
      height = image.height();
      width = image.width();
    } else if (image.height() != height || image.width() != width) {
      throw DataError("feature image size mismatch");
    }
    pixels.insert(pixels.end(), image.pixels.data.begin(), image.pixels.data.end());
    labels.push_back(label);
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

using TrainHistory = std::vector<EpochRecord>;

struct TrainResult {
  DenseNet<float> model;  // best validation accuracy (ties: lower val loss)
  TrainHistory history;
  int best_epoch = 0;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<double> probabilities;
};

inline double accuracy_at(std::span<const double> probabilities, std::span<const Label> labels,
                          double threshold = 0.5) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = probabilities[i] >= threshold;
    if (predicted == is_positive(labels[i])) ++correct;
  }
  return labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());
}

inline Evaluation evaluate_images(DenseNet<float>& model, const LabeledImages& data) {
  Evaluation e;
  const auto p = model.predict_batch(data.pixels, static_cast<int>(data.size()));
  e.probabilities.assign(p.begin(), p.end());
  e.loss = loss_bce<double>(e.probabilities, data.labels);
  e.accuracy = accuracy_at(e.probabilities, data.labels);
  return e;
}

// Partition of a shuffled index list into minibatches of batch_size; a
// trailing batch of one image is merged into the previous batch (train-mode
// batch norm needs two).
inline std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, int batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  const auto b = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < order.size(); start += b) {
    const std::size_t end = std::min(order.size(), start + b);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

inline TrainResult train(DenseNet<float> model, const LabeledImages& train_set, const LabeledImages& val_set,
                         const TrainConfig& config) {
  validate(config);
  if (train_set.size() < 2) throw DataError("training split needs at least 2 images");
  if (val_set.size() == 0) throw DataError("validation split is empty");
  const auto& mc = model.config();
  if (train_set.height != static_cast<std::size_t>(mc.input_height) ||
      train_set.width != static_cast<std::size_t>(mc.input_width)) {
    throw ConfigError("training images do not match the model input size");
  }

  Rng rng(detail::derive_seed(config.seed, "train-shuffle"));
  std::vector<float> velocity(model.param_count(), 0.0f);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.model = model;
  double best_acc = -1.0, best_loss = 0.0;
  ForwardCache<float> cache;
  std::vector<float> batch_pixels;
  std::vector<Label> batch_labels;
  const std::size_t stride = train_set.stride();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) shuffle(order, rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const auto& batch : make_batches(order, config.batch_size)) {
      batch_pixels.resize(batch.size() * stride);
      batch_labels.resize(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        std::copy_n(train_set.pixels.begin() + static_cast<std::ptrdiff_t>(batch[i] * stride), stride,
                    batch_pixels.begin() + static_cast<std::ptrdiff_t>(i * stride));
        batch_labels[i] = train_set.labels[batch[i]];
      }
      const auto probs = model.forward(batch_pixels, static_cast<int>(batch.size()), Mode::kTrain, &cache);
      const double loss = loss_bce<float>(probs, batch_labels);
      if (!std::isfinite(loss)) throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch));
      loss_sum += loss * static_cast<double>(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if ((probs[i] >= 0.5f) == is_positive(batch_labels[i])) ++correct;
      }
      std::vector<float> grad;
      try {
        grad = model.backward(cache, batch_labels);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch));
      }
      sgd_step(model.params(), std::span<const float>(grad), velocity, config.learning_rate, config.momentum);
    }
    const auto val = evaluate_images(model, val_set);
    if (!std::isfinite(val.loss)) throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));
    EpochRecord rec{epoch, loss_sum / static_cast<double>(train_set.size()),
                    static_cast<double>(correct) / static_cast<double>(train_set.size()), val.loss, val.accuracy};
    result.history.push_back(rec);
    if (val.accuracy > best_acc || (val.accuracy == best_acc && val.loss < best_loss)) {
      best_acc = val.accuracy;
      best_loss = val.loss;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

struct Prediction {
  double probability = 0.0;
  Label label = Label::kNormal;
};

// abnormal iff probability >= threshold.
inline Prediction predict(DenseNet<float>& model, const FeatureImage& image, double threshold = 0.5) {
  const auto p = model.forward(image.pixels.data, 1, Mode::kEval);
  const double prob = p.front();
  return {prob, prob >= threshold ? Label::kAbnormal : Label::kNormal};
}

inline std::string history_csv(const TrainHistory& history) {
  std::ostringstream os;
  os << "epoch,train_loss,train_acc,val_loss,val_acc\n" << std::setprecision(9);
  for (const auto& r : history) {
    os << r.epoch << ',' << r.train_loss << ',' << r.train_accuracy << ',' << r.val_loss << ',' << r.val_accuracy
       << '\n';
  }
  return os.str();
}

inline TrainHistory parse_history_csv(const std::string& text) {
  TrainHistory out;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    EpochRecord r;
    char comma;
    row >> r.epoch >> comma >> r.train_loss >> comma >> r.train_accuracy >> comma >> r.val_loss >> comma >>
        r.val_accuracy;
    if (!row) throw CorruptFileError("bad history row: " + line);
    out.push_back(r);
  }
  return out;
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"momentum", c.momentum},
                     {"seed", c.seed},
                     {"shuffle", c.shuffle}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.seed = j.value("seed", c.seed);
  c.shuffle = j.value("shuffle", c.shuffle);
}

}  // namespace afd
