#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nervedec::model {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ModelConfig {
  int input_channels = 224;
  int seq_len = 50;
  int conv_out = 128;
  int conv_kernel = 3;
  int gru_hidden = 384;
  int linear_hidden = 64;
  int outputs = 5;
  double dropout_p = 0.5;
  std::array<bool, 5> finger_mask{true, true, true, true, true};

  void validate() const;
  int owned_count() const;

  // Full-scale deployment config, ~1.6 M parameters.
  static ModelConfig full_scale() { return ModelConfig{}; }
  // Desk-scale config for tests and fast training.
  static ModelConfig tiny() {
    ModelConfig c;
    c.conv_out = 8;
    c.gru_hidden = 16;
    c.linear_hidden = 16;
    return c;
  }
};

std::int64_t parameter_count(const ModelConfig& config);

struct GruParams {
  Matrix wr, wz, wn;  // hidden x input
  Matrix ur, uz, un;  // hidden x hidden
  Vector br, bz, bn;
};

struct ModelParams {
  ModelConfig config;
  Matrix conv_w;  // conv_out x (input_channels * kernel)
  Vector conv_b;
  GruParams enc, dec;
  Matrix l1_w;  // linear_hidden x gru_hidden
  Vector l1_b;
  Matrix l2_w;  // outputs x linear_hidden
  Vector l2_b;
  // Input normalization baked in at training time (1 / training-set RMS).
  double signal_scale = 1.0;
};

// Seed-deterministic uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

struct ParamBlock {
  const char* name;
  double* data;
  std::int64_t size;
};
std::vector<ParamBlock> param_blocks(ModelParams& params);

// A 50-column slice of a row-major feature matrix, ending at `end_col`.
struct WindowView {
  const double* data = nullptr;
  int rows = 0;
  int stride_cols = 0;  // total columns of the backing matrix
  int end_col = 0;      // inclusive; the window covers [end_col-49, end_col]

  double at(int row, int col, int seq_len) const {
    return data[static_cast<std::size_t>(row) * stride_cols + (end_col - seq_len + 1 + col)];
  }
};

struct ForwardCache;

// probs[f] = sigma(logits[f]). Dropout (post-conv and pre-linear1) is applied
// only when training, deterministically from dropout_seed. Inference is pure.
std::array<double, 5> forward(const ModelParams& params, const WindowView& input,
                              bool training = false, std::uint64_t dropout_seed = 0,
                              ForwardCache* cache = nullptr);

struct Gradients {
  Matrix conv_w;
  Vector conv_b;
  GruParams enc, dec;
  Matrix l1_w;
  Vector l1_b;
  Matrix l2_w;
  Vector l2_b;

  static Gradients zeros(const ModelConfig& config);
};
std::vector<ParamBlock> grad_blocks(Gradients& grads);

struct Sample {
  WindowView window;
  std::array<bool, 5> label{};
};

// Mean BCE over owned fingers plus weight_decay * ||theta||^2. When grads is
// non-null the exact reverse-mode gradients are accumulated into it. Throws
// std::runtime_error naming the layer if a non-finite value appears.
double compute_loss(const ModelParams& params, std::span<const Sample> batch, double weight_decay,
                    bool training, std::uint64_t dropout_seed, Gradients* grads);

struct TrainSpec {
  double beta1 = 0.99;
  double beta2 = 0.999;
  double weight_decay = 1e-5;
  int batch = 64;
  int epochs = 6;           // paper recipe adjusts within 2-10
  double lr0 = 3e-4;        // within 1e-4 .. 1e-3
  int plateau_patience = 2;
  double lr_drop_factor = 10.0;
  std::uint64_t rng_seed = 1;
  int window_subsample = 5;  // train on every k-th window

  void validate() const;
};

// Drops the learning rate by `factor` when the observed loss has not improved
// for `patience` consecutive epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr0, int patience, double factor)
      : lr_(lr0), patience_(patience), factor_(factor) {}

  // Feed one epoch's training loss; returns the rate for the next epoch.
  double observe(double loss);
  double lr() const { return lr_; }
  int drops() const { return drops_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double best_ = std::numeric_limits<double>::infinity();
  int stale_ = 0;
  int drops_ = 0;
};

class AdamOptimizer {
 public:
  AdamOptimizer(ModelParams& params, const TrainSpec& spec);
  void step(Gradients& grads, double lr);
  std::int64_t steps_taken() const { return t_; }

 private:
  ModelParams& params_;
  double beta1_, beta2_;
  std::vector<Eigen::VectorXd> m_, v_;
  std::int64_t t_ = 0;
};

// Feature-domain dataset: one feature matrix per recorded session plus the
// per-column labels (already aligned to window ends).
struct SessionFeatures {
  std::vector<double> features;  // row-major rows x cols
  int rows = 0, cols = 0;
  std::vector<std::array<bool, 5>> labels;  // one per column

  WindowView window_at(int end_col, int seq_len) const {
    return WindowView{features.data(), rows, cols, end_col};
  }
};

struct FeatureDataset {
  std::vector<SessionFeatures> sessions;
  std::int64_t window_count(int seq_len, int subsample = 1) const;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int lr_drops = 0;
};

TrainResult train(ModelParams& params, const TrainSpec& spec, const FeatureDataset& train_set,
                  const FeatureDataset& val_set);

// Versioned binary checkpoint: header, config block, then parameters as
// 64-bit floats in param_blocks order. Round-trips byte-exactly.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace nervedec::model
