#include "nervedec/ensemble.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace nervedec::ensemble {

Ensemble::Ensemble(std::vector<model::ModelParams> models, double threshold)
    : models_(std::move(models)), threshold_(threshold) {
  if (models_.empty() || models_.size() > 5)
    throw std::invalid_argument("Ensemble: need between one and five models");
  // Every finger must be owned by exactly one model.
  for (int f = 0; f < 5; ++f) {
    int owners = 0;
    for (const auto& m : models_) {
      if (m.config.finger_mask[static_cast<std::size_t>(f)]) ++owners;
    }
    if (owners != 1) {
      std::ostringstream os;
      os << "Ensemble: finger " << f << " owned by " << owners << " models (need exactly 1)";
      throw std::invalid_argument(os.str());
    }
  }
  for (const auto& m : models_) {
    if (std::abs(m.signal_scale - models_.front().signal_scale) > 1e-12)
      throw std::invalid_argument("Ensemble: models disagree on input normalization");
  }
}

Ensemble Ensemble::load(const std::vector<std::string>& checkpoint_paths, double threshold) {
  std::vector<model::ModelParams> models;
  models.reserve(checkpoint_paths.size());
  for (const auto& path : checkpoint_paths) models.push_back(model::load_checkpoint(path));
  return Ensemble(std::move(models), threshold);
}

double Ensemble::signal_scale() const { return models_.front().signal_scale; }

Prediction Ensemble::infer(const model::WindowView& window) const {
  Prediction pred;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& m : models_) {
    const auto probs = model::forward(m, window);
    for (int f = 0; f < 5; ++f) {
      if (m.config.finger_mask[static_cast<std::size_t>(f)])
        pred.probs[static_cast<std::size_t>(f)] = probs[static_cast<std::size_t>(f)];
    }
  }
  const auto t1 = std::chrono::steady_clock::now();
  pred.inference_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  for (int f = 0; f < 5; ++f)
    pred.states[static_cast<std::size_t>(f)] = pred.probs[static_cast<std::size_t>(f)] > threshold_;
  return pred;
}

Prediction Ensemble::infer(const dsp::FeatureWindow::Snapshot& snapshot) const {
  model::WindowView view;
  view.data = snapshot.data.data();
  view.rows = snapshot.rows;
  view.stride_cols = snapshot.cols;
  view.end_col = snapshot.cols - 1;
  Prediction pred = infer(view);
  pred.newest_sample_timestamp_ns = snapshot.newest_timestamp_ns;
  pred.newest_sample_index = snapshot.newest_sample_index;
  return pred;
}

DatasetEvaluation evaluate_dataset(const Ensemble& ensemble, const model::FeatureDataset& dataset) {
  DatasetEvaluation out;
  const int seq_len = ensemble.config(0).seq_len;
  for (const auto& session : dataset.sessions) {
    for (int col = seq_len - 1; col < session.cols; ++col) {
      const auto pred = ensemble.infer(session.window_at(col, seq_len));
      const auto& label = session.labels[static_cast<std::size_t>(col)];
      for (int f = 0; f < 5; ++f) {
        out.scores[static_cast<std::size_t>(f)].push_back(pred.probs[static_cast<std::size_t>(f)]);
        out.labels[static_cast<std::size_t>(f)].push_back(label[static_cast<std::size_t>(f)]);
        out.states[static_cast<std::size_t>(f)].push_back(pred.states[static_cast<std::size_t>(f)]);
      }
    }
  }
  for (int f = 0; f < 5; ++f) {
    const auto& pb = out.states[static_cast<std::size_t>(f)];
    const auto& lb = out.labels[static_cast<std::size_t>(f)];
    const std::size_t n = pb.size();
    auto pred_arr = std::make_unique<bool[]>(n);
    auto label_arr = std::make_unique<bool[]>(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred_arr[i] = pb[i];
      label_arr[i] = lb[i];
    }
    const std::span<const bool> preds(pred_arr.get(), n);
    const std::span<const bool> labels(label_arr.get(), n);
    out.per_finger[static_cast<std::size_t>(f)].rates = metrics::rates(metrics::confusion(preds, labels));
    out.per_finger[static_cast<std::size_t>(f)].auc =
        metrics::auc(std::span<const double>(out.scores[static_cast<std::size_t>(f)]), labels);
  }
  return out;
}

std::string predictions_to_csv(const std::vector<Prediction>& predictions) {
  std::ostringstream os;
  os << "t_ns,p1,p2,p3,p4,p5,s1,s2,s3,s4,s5,latency_ms\n";
  os.precision(9);
  for (const auto& p : predictions) {
    os << p.produced_timestamp_ns;
    for (double v : p.probs) os << "," << v;
    for (bool s : p.states) os << "," << (s ? 1 : 0);
    const double lag_ms =
        static_cast<double>(p.produced_timestamp_ns - p.newest_sample_timestamp_ns) / 1e6;
    os << "," << lag_ms << "\n";
  }
  return os.str();
}

}  // namespace nervedec::ensemble
