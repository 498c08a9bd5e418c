#include "nervedec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nervedec::trainer {

namespace {

// Feature matrix column -> label tick: the window ends at decimated sample e,
// i.e. raw sample decimation*e, and the glove runs at the label rate.
std::size_t label_tick_for_column(std::int64_t window_end_index, const dsp::PreprocConfig& preproc,
                                  std::size_t label_count) {
  const double raw_index = static_cast<double>(window_end_index) * preproc.decimation;
  const double per_tick = preproc.input_rate_hz / synth::kLabelRateHz;
  const auto tick = static_cast<std::int64_t>(raw_index / per_tick);
  return static_cast<std::size_t>(std::clamp<std::int64_t>(tick, 0, static_cast<std::int64_t>(label_count) - 1));
}

std::vector<std::vector<double>> to_double_channels(const std::vector<std::vector<std::int16_t>>& s) {
  std::vector<std::vector<double>> out(s.size());
  for (std::size_t c = 0; c < s.size(); ++c) out[c].assign(s[c].begin(), s[c].end());
  return out;
}

}  // namespace

double filtered_rms(std::span<const synth::GestureSession> sessions,
                    const dsp::PreprocConfig& config) {
  double sq_sum = 0.0;
  std::int64_t count = 0;
  for (const auto& session : sessions) {
    dsp::PreprocChain chain(static_cast<int>(session.signal.size()), config);
    const auto out = chain.process(to_double_channels(session.signal));
    for (const auto& ch : out.channels) {
      for (double x : ch) {
        sq_sum += x * x;
        ++count;
      }
    }
  }
  if (count == 0) throw std::invalid_argument("filtered_rms: no samples");
  return std::sqrt(sq_sum / static_cast<double>(count));
}

model::SessionFeatures session_features(const synth::GestureSession& session, double signal_scale,
                                        const dsp::FeatureParams& params,
                                        const dsp::PreprocConfig& preproc) {
  const int channels = static_cast<int>(session.signal.size());
  dsp::PreprocChain chain(channels, preproc);
  dsp::FeatureParams scaled = params;
  scaled.signal_scale = signal_scale;
  dsp::FeatureExtractor extractor(channels, scaled);

  const auto filtered = chain.process(to_double_channels(session.signal));
  const auto vectors = extractor.push(filtered.channels, 0);

  model::SessionFeatures out;
  out.rows = channels * dsp::kFeatureCount;
  out.cols = static_cast<int>(vectors.size());
  out.features.assign(static_cast<std::size_t>(out.rows) * out.cols, 0.0);
  out.labels.resize(static_cast<std::size_t>(out.cols));
  for (int col = 0; col < out.cols; ++col) {
    const auto& v = vectors[static_cast<std::size_t>(col)];
    for (int r = 0; r < out.rows; ++r) {
      out.features[static_cast<std::size_t>(r) * out.cols + col] = v.values[static_cast<std::size_t>(r)];
    }
    out.labels[static_cast<std::size_t>(col)] =
        session.labels[label_tick_for_column(v.window_end_sample_index, preproc, session.labels.size())];
  }
  return out;
}

FeatureBuild build_features(synth::DatasetSplit& split, const dsp::FeatureParams& params,
                            const dsp::PreprocConfig& preproc) {
  FeatureBuild build;
  build.signal_rms = filtered_rms(split.train, preproc);
  build.signal_scale = build.signal_rms > 0.0 ? 1.0 / build.signal_rms : 1.0;

  for (auto& session : split.train) {
    build.train.sessions.push_back(session_features(session, build.signal_scale, params, preproc));
    session.signal.clear();
    session.signal.shrink_to_fit();
  }
  for (auto& session : split.validation) {
    build.validation.sessions.push_back(
        session_features(session, build.signal_scale, params, preproc));
    session.signal.clear();
    session.signal.shrink_to_fit();
  }
  return build;
}

TrainOutcome train_on_dataset(synth::DatasetSplit& split, const model::ModelConfig& config,
                              const model::TrainSpec& spec) {
  auto build = build_features(split);

  TrainOutcome outcome;
  outcome.signal_scale = build.signal_scale;
  outcome.params = model::init_params(config, spec.rng_seed);
  outcome.params.signal_scale = build.signal_scale;
  outcome.result = model::train(outcome.params, spec, build.train, build.validation);
  return outcome;
}

std::string training_log_csv(const model::TrainResult& result) {
  std::ostringstream os;
  os << "epoch,lr,train_loss,train_accuracy,val_loss,val_accuracy\n";
  os.precision(10);
  for (const auto& e : result.log) {
    os << e.epoch << "," << e.lr << "," << e.train_loss << "," << e.train_accuracy << ","
       << e.val_loss << "," << e.val_accuracy << "\n";
  }
  return os.str();
}

}  // namespace nervedec::trainer
