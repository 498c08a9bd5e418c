#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nervedec/dsp.hpp"
#include "nervedec/metrics.hpp"
#include "nervedec/model.hpp"

namespace nervedec::ensemble {

struct Prediction {
  std::array<double, 5> probs{};
  std::array<bool, 5> states{};  // probs[f] > threshold, strictly
  std::int64_t newest_sample_timestamp_ns = 0;
  std::int64_t newest_sample_index = 0;  // at the decimated rate
  std::int64_t produced_timestamp_ns = 0;
  double inference_ms = 0.0;  // model evaluation time only
};

// One to five models, each owning a disjoint set of fingers whose union
// covers all five. Finger f's probability comes from its owner.
class Ensemble {
 public:
  explicit Ensemble(std::vector<model::ModelParams> models, double threshold = 0.5);
  static Ensemble load(const std::vector<std::string>& checkpoint_paths, double threshold = 0.5);

  // Merges owner outputs for one snapshot; the caller stamps timing.
  Prediction infer(const dsp::FeatureWindow::Snapshot& snapshot) const;
  Prediction infer(const model::WindowView& window) const;

  int model_count() const { return static_cast<int>(models_.size()); }
  double threshold() const { return threshold_; }
  // Input normalization shared by all member models.
  double signal_scale() const;
  const model::ModelConfig& config(int i) const { return models_[static_cast<std::size_t>(i)].config; }

 private:
  std::vector<model::ModelParams> models_;
  double threshold_;
};

struct DatasetEvaluation {
  std::array<metrics::FingerMetrics, 5> per_finger;
  // Flattened per-finger scores/labels, kept for report generation.
  std::array<std::vector<double>, 5> scores;
  std::array<std::vector<bool>, 5> labels;
  std::array<std::vector<bool>, 5> states;
};

// Offline evaluation over every full window of a feature dataset.
DatasetEvaluation evaluate_dataset(const Ensemble& ensemble, const model::FeatureDataset& dataset);

std::string predictions_to_csv(const std::vector<Prediction>& predictions);

}  // namespace nervedec::ensemble
