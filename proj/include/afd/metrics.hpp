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

// Confusion-matrix metrics (accuracy, precision, recall, F1, Cohen's kappa,
// MCC) and rank-based ROC AUC.
//
// A metric whose denominator is zero has no value; it is reported as an empty
// optional and printed as "undefined", never coerced to 0 or 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "afd/errors.hpp"
#include "afd/labels.hpp"
#include "json.hpp"

namespace afd {

using Metric = std::optional<double>;

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(std::span<const Label> predictions, std::span<const Label> truths) {
  if (predictions.size() != truths.size()) {
    throw ConfigError("confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                      std::to_string(truths.size()) + " truths");
  }
  if (predictions.empty()) throw ConfigError("confusion: no samples");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool p = is_positive(predictions[i]);
    const bool t = is_positive(truths[i]);
    if (p && t) ++cm.tp;
    else if (!p && !t) ++cm.tn;
    else if (p) ++cm.fp;
    else ++cm.fn;
  }
  return cm;
}

struct MetricSuite {
  Metric accuracy, precision, recall, f1, kappa, mcc;
};

inline MetricSuite metric_suite(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ConfigError("metric_suite: empty confusion matrix");
  const double tp = static_cast<double>(cm.tp);
  const double tn = static_cast<double>(cm.tn);
  const double fp = static_cast<double>(cm.fp);
  const double fn = static_cast<double>(cm.fn);
  auto ratio = [](double num, double den) -> Metric {
    if (den == 0.0) return std::nullopt;
    return num / den;
  };
  MetricSuite s;
  s.accuracy = (tp + tn) / (tp + fn + fp + tn);
  s.precision = ratio(tp, tp + fp);
  s.recall = ratio(tp, tp + fn);
  if (s.precision && s.recall) s.f1 = ratio(2.0 * *s.precision * *s.recall, *s.precision + *s.recall);
  // Binary Cohen's kappa: the marginal products are summed, not multiplied.
  s.kappa = ratio(2.0 * (tp * tn - fn * fp), (tp + fp) * (fp + tn) + (tp + fn) * (fn + tn));
  s.mcc = ratio(tp * tn - fp * fn, std::sqrt((tp + fn) * (tp + fp) * (tn + fp) * (tn + fn)));
  return s;
}

// Mann-Whitney estimate of P(score_pos > score_neg), ties counted as 1/2.
// Undefined unless both classes are present.
inline Metric roc_auc(std::span<const double> scores, std::span<const Label> truths) {
  if (scores.size() != truths.size()) throw ConfigError("roc_auc: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double n_pos = 0.0, n_neg = 0.0, pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (is_positive(truths[order[k]])) {
        pos_rank_sum += mid_rank;
        n_pos += 1.0;
      } else {
        n_neg += 1.0;
      }
    }
    i = j;
  }
  if (n_pos == 0.0 || n_neg == 0.0) return std::nullopt;
  return (pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

struct MetricsReport {
  std::string machine;
  int snr_db = 0;
  ConfusionMatrix cm;
  Metric accuracy, precision, recall, f1, kappa, mcc, auc;

  bool has_undefined() const {
    return !accuracy || !precision || !recall || !f1 || !kappa || !mcc || !auc;
  }
};

// Thresholded labels feed the confusion-matrix metrics, raw scores feed AUC.
inline MetricsReport make_report(std::string machine, int snr_db, std::span<const double> probabilities,
                                 std::span<const Label> truths, double threshold = 0.5) {
  std::vector<Label> predicted(probabilities.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    predicted[i] = probabilities[i] >= threshold ? Label::kAbnormal : Label::kNormal;
  }
  MetricsReport r;
  r.machine = std::move(machine);
  r.snr_db = snr_db;
  r.cm = confusion(predicted, truths);
  const auto s = metric_suite(r.cm);
  r.accuracy = s.accuracy;
  r.precision = s.precision;
  r.recall = s.recall;
  r.f1 = s.f1;
  r.kappa = s.kappa;
  r.mcc = s.mcc;
  r.auc = roc_auc(probabilities, truths);
  return r;
}

inline std::string format_metric(const Metric& m) {
  if (!m) return "undefined";
  std::ostringstream os;
  os << std::fixed << std::setprecision(5) << *m;
  return os.str();
}

inline constexpr const char* kReportCsvHeader = "SNR,Machine,Accuracy,Precision,Recall,F1 Score,Kappa,MCC,AUC";

inline std::string report_csv_row(const MetricsReport& r) {
  std::ostringstream os;
  os << r.snr_db << " dB," << r.machine;
  for (const Metric* m : {&r.accuracy, &r.precision, &r.recall, &r.f1, &r.kappa, &r.mcc, &r.auc}) {
    os << ',' << format_metric(*m);
  }
  return os.str();
}

inline nlohmann::json metric_json(const Metric& m) { return m ? nlohmann::json(*m) : nlohmann::json(nullptr); }

inline void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = nlohmann::json{{"machine", r.machine},
                     {"snr_db", r.snr_db},
                     {"confusion", {{"tp", r.cm.tp}, {"tn", r.cm.tn}, {"fp", r.cm.fp}, {"fn", r.cm.fn}}},
                     {"accuracy", metric_json(r.accuracy)},
                     {"precision", metric_json(r.precision)},
                     {"recall", metric_json(r.recall)},
                     {"f1", metric_json(r.f1)},
                     {"kappa", metric_json(r.kappa)},
                     {"mcc", metric_json(r.mcc)},
                     {"auc", metric_json(r.auc)}};
}

// Plain-text 2x2 matrix, rows = truth, columns = prediction.
inline std::string confusion_text(const MetricsReport& r) {
  std::ostringstream os;
  os << r.machine << " @ " << r.snr_db << " dB\n"
     << "                 pred normal  pred abnormal\n"
     << "true normal    " << std::setw(12) << r.cm.tn << std::setw(15) << r.cm.fp << '\n'
     << "true abnormal  " << std::setw(12) << r.cm.fn << std::setw(15) << r.cm.tp << '\n';
  return os.str();
}

}  // namespace afd
