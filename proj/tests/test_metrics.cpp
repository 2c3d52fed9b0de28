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
#include <vector>

#include "afd/metrics.hpp"
#include "afd/random.hpp"

namespace afd {
namespace {

ConfusionMatrix make_cm(std::uint64_t tp, std::uint64_t fn, std::uint64_t fp, std::uint64_t tn) {
  ConfusionMatrix cm;
  cm.tp = tp, cm.fn = fn, cm.fp = fp, cm.tn = tn;
  return cm;
}

TEST(Metrics, HandWorkedCase) {
  const auto s = metric_suite(make_cm(45, 5, 10, 40));
  EXPECT_NEAR(*s.accuracy, 0.85, 1e-12);
  EXPECT_NEAR(*s.precision, 45.0 / 55.0, 1e-12);
  EXPECT_NEAR(*s.recall, 0.9, 1e-12);
  EXPECT_NEAR(*s.f1, 0.857142857142857, 1e-12);
  EXPECT_NEAR(*s.kappa, 0.7, 1e-12);
  EXPECT_NEAR(*s.mcc, 0.70353, 5e-6);
}

// Oracle from per-sample label vectors: agreement statistics for kappa and
// the Pearson correlation of 0/1 indicators for MCC.
struct Oracle {
  double accuracy, precision, recall, f1, kappa, mcc;
};

Oracle brute_force(const std::vector<int>& pred, const std::vector<int>& truth) {
  const double n = static_cast<double>(pred.size());
  double agree = 0, pp = 0, tp_count = 0, hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    agree += pred[i] == truth[i];
    pp += pred[i];
    tp_count += truth[i];
    hit += pred[i] && truth[i];
  }
  Oracle o;
  o.accuracy = agree / n;
  o.precision = hit / pp;
  o.recall = hit / tp_count;
  o.f1 = 2 * hit / (pp + tp_count);
  const double pe = (pp / n) * (tp_count / n) + (1 - pp / n) * (1 - tp_count / n);
  o.kappa = (o.accuracy - pe) / (1 - pe);
  const double mp = pp / n, mt = tp_count / n;
  double cov = 0, vp = 0, vt = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    cov += (pred[i] - mp) * (truth[i] - mt);
    vp += (pred[i] - mp) * (pred[i] - mp);
    vt += (truth[i] - mt) * (truth[i] - mt);
  }
  o.mcc = cov / std::sqrt(vp * vt);
  return o;
}

TEST(Metrics, RandomMatricesMatchOracle) {
  Rng rng(99);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<int> pred, truth;
    const auto n = 4 + uniform_index(rng, 200);
    for (std::uint64_t i = 0; i < n; ++i) {
      pred.push_back(static_cast<int>(uniform_index(rng, 2)));
      truth.push_back(static_cast<int>(uniform_index(rng, 2)));
    }
    std::vector<Label> p, t;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      p.push_back(pred[i] ? Label::kAbnormal : Label::kNormal);
      t.push_back(truth[i] ? Label::kAbnormal : Label::kNormal);
    }
    const auto s = metric_suite(confusion(p, t));
    const auto o = brute_force(pred, truth);
    EXPECT_NEAR(*s.accuracy, o.accuracy, 1e-12);
    if (!s.precision || !s.recall || !s.mcc || !s.kappa) continue;
    EXPECT_NEAR(*s.precision, o.precision, 1e-12);
    EXPECT_NEAR(*s.recall, o.recall, 1e-12);
    // F1 has no value when precision and recall are both zero.
    EXPECT_EQ(s.f1.has_value(), o.f1 > 0.0);
    if (s.f1) EXPECT_NEAR(*s.f1, o.f1, 1e-12);
    EXPECT_NEAR(*s.kappa, o.kappa, 1e-12);
    EXPECT_NEAR(*s.mcc, o.mcc, 1e-12);
    ++checked;
  }
  EXPECT_GT(checked, 950);
}

TEST(Metrics, UndefinedDenominators) {
  // Nothing predicted positive.
  auto s = metric_suite(make_cm(0, 5, 0, 5));
  EXPECT_FALSE(s.precision);
  EXPECT_FALSE(s.f1);
  EXPECT_FALSE(s.mcc);
  EXPECT_NEAR(*s.recall, 0.0, 0.0);
  EXPECT_NEAR(*s.kappa, 0.0, 0.0);
  // Single class, perfectly predicted: kappa and MCC have no value.
  s = metric_suite(make_cm(0, 0, 0, 10));
  EXPECT_EQ(*s.accuracy, 1.0);
  EXPECT_FALSE(s.recall);
  EXPECT_FALSE(s.kappa);
  EXPECT_FALSE(s.mcc);
  EXPECT_EQ(format_metric(s.mcc), "undefined");
  EXPECT_THROW(metric_suite(ConfusionMatrix{}), ConfigError);
}

TEST(Metrics, ConfusionCounting) {
  const std::vector<Label> p = {Label::kAbnormal, Label::kAbnormal, Label::kNormal, Label::kNormal, Label::kAbnormal};
  const std::vector<Label> t = {Label::kAbnormal, Label::kNormal, Label::kAbnormal, Label::kNormal, Label::kAbnormal};
  EXPECT_EQ(confusion(p, t), make_cm(2, 1, 1, 1));
  EXPECT_THROW(confusion(p, std::span<const Label>(t).first(3)), ConfigError);
  EXPECT_THROW(confusion({}, {}), ConfigError);
}

double pairwise_auc(const std::vector<double>& s, const std::vector<Label>& t) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (t[i] != Label::kAbnormal) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (t[j] != Label::kNormal) continue;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      pairs += 1;
    }
  }
  return wins / pairs;
}

TEST(Auc, KnownCases) {
  const std::vector<Label> t = {Label::kNormal, Label::kNormal, Label::kAbnormal, Label::kAbnormal};
  EXPECT_DOUBLE_EQ(*roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, t), 1.0);
  EXPECT_DOUBLE_EQ(*roc_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, t), 0.0);
  EXPECT_DOUBLE_EQ(*roc_auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, t), 0.5);
  EXPECT_FALSE(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<Label>{Label::kNormal, Label::kNormal}));
}

TEST(Auc, MatchesPairwiseOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s;
    std::vector<Label> t;
    for (int i = 0; i < 40; ++i) {
      // Coarse scores force ties.
      s.push_back(std::round(uniform01(rng) * 8) / 8);
      t.push_back(i % 3 == 0 ? Label::kAbnormal : Label::kNormal);
    }
    EXPECT_NEAR(*roc_auc(s, t), pairwise_auc(s, t), 1e-12);
  }
}

TEST(Report, ThresholdAndCsv) {
  const std::vector<double> prob = {0.2, 0.5, 0.7, 0.4};
  const std::vector<Label> t = {Label::kNormal, Label::kAbnormal, Label::kAbnormal, Label::kAbnormal};
  const auto r = make_report("fan", -6, prob, t);
  EXPECT_EQ(r.cm, make_cm(2, 1, 0, 1));
  EXPECT_EQ(std::string(kReportCsvHeader), "SNR,Machine,Accuracy,Precision,Recall,F1 Score,Kappa,MCC,AUC");
  EXPECT_EQ(report_csv_row(r).substr(0, 24), "-6 dB,fan,0.75000,1.0000");
  EXPECT_FALSE(r.has_undefined());
  const auto all_normal = make_report("pump", 6, prob, std::vector<Label>(4, Label::kNormal));
  EXPECT_TRUE(all_normal.has_undefined());
  EXPECT_NE(report_csv_row(all_normal).find("undefined"), std::string::npos);
  EXPECT_TRUE(nlohmann::json(all_normal)["auc"].is_null());
}

}  // namespace
}  // namespace afd
