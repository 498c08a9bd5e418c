#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nervedec::metrics {

struct ConfusionCounts {
  std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::int64_t total() const { return tp + tn + fp + fn; }
};

ConfusionCounts confusion(std::span<const bool> predictions, std::span<const bool> labels);

struct Rates {
  // A zero denominator leaves the rate undefined rather than forcing 0.
  std::optional<double> tpr;  // TP / (TP + FN)
  std::optional<double> tnr;  // TN / (TN + FP)
  std::optional<double> accuracy;
};

Rates rates(const ConfusionCounts& c);

// Mann-Whitney rank AUC: P(score_pos > score_neg) + P(tie) / 2.
// Undefined (nullopt) when labels contain only one class.
std::optional<double> auc(std::span<const double> scores, std::span<const bool> labels);

struct FingerMetrics {
  Rates rates;
  std::optional<double> auc;
};

// Per-finger table, rows = fingers, columns = TPR, TNR, Accuracy, AUC.
std::string report_csv(const std::array<FingerMetrics, 5>& per_finger);
std::string report_text(const std::array<FingerMetrics, 5>& per_finger);

}  // namespace nervedec::metrics
