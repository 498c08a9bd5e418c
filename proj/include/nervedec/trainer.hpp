#pragma once

#include <span>
#include <vector>

#include "nervedec/dsp.hpp"
#include "nervedec/model.hpp"
#include "nervedec/synth.hpp"

namespace nervedec::trainer {

// RMS of the filtered, decimated training signal; feature thresholds are
// defined on unit-RMS input, so 1/rms becomes the extraction scale.
double filtered_rms(std::span<const synth::GestureSession> sessions,
                    const dsp::PreprocConfig& config = {});

// Runs the pre-processing chain and sliding-window extraction over one
// session and attaches per-column labels (label tick of each window end).
model::SessionFeatures session_features(const synth::GestureSession& session, double signal_scale,
                                        const dsp::FeatureParams& params = {},
                                        const dsp::PreprocConfig& preproc = {});

struct FeatureBuild {
  model::FeatureDataset train;
  model::FeatureDataset validation;
  double signal_rms = 1.0;  // of the filtered training signal
  double signal_scale = 1.0;
};

// Builds both feature datasets; session signals are released as they are
// consumed to bound peak memory.
FeatureBuild build_features(synth::DatasetSplit& split, const dsp::FeatureParams& params = {},
                            const dsp::PreprocConfig& preproc = {});

struct TrainOutcome {
  model::ModelParams params;
  model::TrainResult result;
  double signal_scale = 1.0;
};

TrainOutcome train_on_dataset(synth::DatasetSplit& split, const model::ModelConfig& config,
                              const model::TrainSpec& spec);

std::string training_log_csv(const model::TrainResult& result);

}  // namespace nervedec::trainer
