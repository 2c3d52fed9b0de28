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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "afd/train.hpp"

namespace afd {
namespace {

constexpr int kSide = 16;

// Normal images carry a bright blob in the upper half, abnormal ones in the
// lower half, both over uniform noise.
LabeledImages blobs(int per_class, std::uint64_t seed) {
  Rng rng(seed);
  LabeledImages out;
  for (int i = 0; i < 2 * per_class; ++i) {
    const Label label = i % 2 ? Label::kAbnormal : Label::kNormal;
    FeatureImage img{Matrix<float>(kSide, kSide)};
    const double cy = label == Label::kAbnormal ? uniform(rng, 10, 13) : uniform(rng, 2, 5);
    const double cx = uniform(rng, 3, 12);
    for (int y = 0; y < kSide; ++y) {
      for (int x = 0; x < kSide; ++x) {
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        img.pixels(y, x) = static_cast<float>(std::min(1.0, 0.3 * uniform01(rng) + std::exp(-d2 / 4.0)));
      }
    }
    out.add(img, label);
  }
  return out;
}

// Separability oracle: plain logistic regression on raw pixels.
double logistic_train_accuracy(const LabeledImages& d) {
  std::vector<double> w(d.stride(), 0.0);
  double b = 0.0;
  for (int it = 0; it < 300; ++it) {
    std::vector<double> gw(w.size(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      double z = b;
      for (std::size_t k = 0; k < w.size(); ++k) z += w[k] * d.pixels[i * d.stride() + k];
      const double err = 1.0 / (1.0 + std::exp(-z)) - (is_positive(d.labels[i]) ? 1.0 : 0.0);
      for (std::size_t k = 0; k < w.size(); ++k) gw[k] += err * d.pixels[i * d.stride() + k];
      gb += err;
    }
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= 0.05 * gw[k];
    b -= 0.05 * gb;
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double z = b;
    for (std::size_t k = 0; k < w.size(); ++k) z += w[k] * d.pixels[i * d.stride() + k];
    correct += (z >= 0) == is_positive(d.labels[i]);
  }
  return static_cast<double>(correct) / static_cast<double>(d.size());
}

ModelConfig small_model() {
  ModelConfig c;
  c.input_height = c.input_width = kSide;
  return c;
}

TEST(Train, FitsSeparableData) {
  const auto train_set = blobs(32, 1);
  const auto val_set = blobs(8, 2);
  ASSERT_EQ(logistic_train_accuracy(train_set), 1.0);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.seed = 3;
  const auto result = train(DenseNet<float>::build(small_model(), 4), train_set, val_set, cfg);
  ASSERT_EQ(result.history.size(), 25u);
  double best_train = 0.0;
  for (const auto& r : result.history) best_train = std::max(best_train, r.train_accuracy);
  EXPECT_GE(best_train, 0.99);
  EXPECT_LT(result.history.back().train_loss, result.history.front().train_loss);
  const auto& best = result.history[static_cast<std::size_t>(result.best_epoch - 1)];
  for (const auto& r : result.history) EXPECT_LE(r.val_accuracy, best.val_accuracy);
  auto model = result.model;
  EXPECT_DOUBLE_EQ(evaluate_images(model, val_set).accuracy, best.val_accuracy);
}

TEST(Train, Deterministic) {
  const auto train_set = blobs(8, 1);
  const auto val_set = blobs(4, 2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 5;
  const auto a = train(DenseNet<float>::build(small_model(), 4), train_set, val_set, cfg);
  const auto b = train(DenseNet<float>::build(small_model(), 4), train_set, val_set, cfg);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.model.params(), b.model.params());
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  const auto train_set = blobs(6, 1);
  const auto val_set = blobs(3, 2);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.learning_rate = 0.0;
  const auto init = DenseNet<float>::build(small_model(), 8);
  const auto result = train(init, train_set, val_set, cfg);
  for (const auto& r : result.history) EXPECT_TRUE(std::isfinite(r.train_loss));
  EXPECT_EQ(result.model.params(), init.params());
}

TEST(Train, HugeLearningRateDiverges) {
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e30;
  EXPECT_THROW(train(DenseNet<float>::build(small_model(), 1), blobs(8, 1), blobs(2, 2), cfg), DivergenceError);
}

TEST(Train, InputValidation) {
  TrainConfig cfg;
  cfg.batch_size = 1;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = {};
  cfg.momentum = 1.0;
  EXPECT_THROW(validate(cfg), ConfigError);
  EXPECT_THROW(train(DenseNet<float>::build(ModelConfig{}, 1), blobs(2, 1), blobs(2, 2), TrainConfig{}),
               ConfigError);
  EXPECT_THROW(train(DenseNet<float>::build(small_model(), 1), blobs(2, 1), LabeledImages{}, TrainConfig{}),
               DataError);
  LabeledImages mixed = blobs(1, 1);
  EXPECT_THROW(mixed.add(FeatureImage{Matrix<float>(4, 4)}, Label::kNormal), DataError);
}

TEST(Batches, TrailingSingletonIsMerged) {
  std::vector<std::size_t> order(9);
  std::iota(order.begin(), order.end(), 0);
  auto b = make_batches(order, 4);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[1].size(), 5u);
  order.resize(10);
  order[9] = 9;
  b = make_batches(order, 4);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[2].size(), 2u);
  std::size_t total = 0;
  for (const auto& x : b) total += x.size();
  EXPECT_EQ(total, 10u);
}

TEST(History, CsvRoundTrip) {
  const TrainHistory h = {{1, 0.69, 0.5, 0.7, 0.5}, {2, 0.25, 0.875, 0.3125, 0.9}};
  const auto text = history_csv(h);
  EXPECT_EQ(text.substr(0, text.find('\n')), "epoch,train_loss,train_acc,val_loss,val_acc");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  EXPECT_EQ(parse_history_csv(text), h);
  EXPECT_THROW(parse_history_csv("header\n1,2,x\n"), CorruptFileError);
}

TEST(Predict, ThresholdDecides) {
  auto model = DenseNet<float>::build(small_model(), 2);
  const auto data = blobs(1, 5);
  FeatureImage img{Matrix<float>(kSide, kSide)};
  img.pixels.data.assign(data.pixels.begin(), data.pixels.begin() + kSide * kSide);
  const auto p = predict(model, img);
  EXPECT_EQ(predict(model, img, p.probability).label, Label::kAbnormal);
  EXPECT_EQ(predict(model, img, std::nextafter(p.probability, 2.0)).label, Label::kNormal);
  EXPECT_EQ(p.label, p.probability >= 0.5 ? Label::kAbnormal : Label::kNormal);
}

TEST(Train, ConfigJson) {
  TrainConfig c;
  c.epochs = 7;
  c.shuffle = false;
  EXPECT_EQ(nlohmann::json(c).get<TrainConfig>(), c);
}

}  // namespace
}  // namespace afd
