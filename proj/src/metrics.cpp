#include "nervedec/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace nervedec::metrics {

ConfusionCounts confusion(std::span<const bool> predictions, std::span<const bool> labels) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("confusion: sequence length mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (labels[i]) {
      predictions[i] ? ++c.tp : ++c.fn;
    } else {
      predictions[i] ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

Rates rates(const ConfusionCounts& c) {
  Rates r;
  if (c.tp + c.fn > 0) r.tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (c.tn + c.fp > 0) r.tnr = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  if (c.total() > 0) r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  return r;
}

std::optional<double> auc(std::span<const double> scores, std::span<const bool> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: length mismatch");
  std::int64_t pos = 0, neg = 0;
  for (bool y : labels) (y ? pos : neg)++;
  if (pos == 0 || neg == 0) return std::nullopt;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of positive ranks with midranks for ties.
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]]) pos_rank_sum += midrank;
    }
    i = j + 1;
  }
  const double u = pos_rank_sum - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

namespace {

std::string cell(const std::optional<double>& v) {
  if (!v) return "undefined";
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << *v;
  return os.str();
}

constexpr const char* kFingerName[5] = {"thumb", "index", "middle", "ring", "pinky"};

}  // namespace

std::string report_csv(const std::array<FingerMetrics, 5>& per_finger) {
  std::ostringstream os;
  os << "finger,tpr,tnr,accuracy,auc\n";
  for (int f = 0; f < 5; ++f) {
    const auto& m = per_finger[static_cast<std::size_t>(f)];
    os << kFingerName[f] << "," << cell(m.rates.tpr) << "," << cell(m.rates.tnr) << ","
       << cell(m.rates.accuracy) << "," << cell(m.auc) << "\n";
  }
  return os.str();
}

std::string report_text(const std::array<FingerMetrics, 5>& per_finger) {
  std::ostringstream os;
  os << "finger   TPR        TNR        Accuracy   AUC\n";
  for (int f = 0; f < 5; ++f) {
    const auto& m = per_finger[static_cast<std::size_t>(f)];
    os << kFingerName[f];
    for (std::size_t pad = std::string(kFingerName[f]).size(); pad < 9; ++pad) os << ' ';
    os << cell(m.rates.tpr) << "   " << cell(m.rates.tnr) << "   " << cell(m.rates.accuracy)
       << "   " << cell(m.auc) << "\n";
  }
  return os.str();
}

}  // namespace nervedec::metrics
