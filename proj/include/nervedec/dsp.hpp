#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nervedec/align.hpp"

namespace nervedec::dsp {

inline constexpr int kFeatureCount = 14;

// Feature order within a channel's 14-entry group.
enum Feature : int {
  kMav = 0,   // mean absolute value
  kIav,       // integrated absolute value
  kRms,       // root mean square
  kVar,       // population variance
  kWl,        // waveform length
  kZc,        // zero crossings (deadzone)
  kSsc,       // slope sign changes (deadzone)
  kWamp,      // Willison amplitude (threshold)
  kLog,       // log detector exp(mean(ln(|x| + guard)))
  kDamv,      // mean absolute first difference
  kSsi,       // simple square integral
  kMaxAbs,    // peak absolute value
  kSkewness,  // m3 / m2^1.5, 0 for flat windows
  kKurtosis,  // m4 / m2^2, 0 for flat windows
};

struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;  // numerator
  double a1 = 0.0, a2 = 0.0;            // denominator, a0 normalized to 1
};

struct SosFilter {
  std::vector<Biquad> sections;

  std::complex<double> response_at(double freq_hz, double fs_hz) const;
  double magnitude_db(double freq_hz, double fs_hz) const;
  bool stable() const;  // all poles strictly inside the unit circle
  std::string describe() const;
};

// Butterworth designs via the bilinear transform with frequency prewarping.
// Order is the overall filter order; bandpass requires an even order.
SosFilter design_lowpass(int order, double cutoff_hz, double fs_hz);
SosFilter design_bandpass(int order, double low_hz, double high_hz, double fs_hz);

// Stateful single-channel cascade (transposed direct form II). Processing a
// signal in chunks is bit-identical to processing it whole.
class ChannelFilter {
 public:
  explicit ChannelFilter(const SosFilter& design);
  double step(double x);
  void process(std::span<const double> in, std::span<double> out);
  void reset();

 private:
  struct State {
    double s1 = 0.0, s2 = 0.0;
  };
  std::vector<Biquad> sections_;
  std::vector<State> state_;
};

struct PreprocConfig {
  int antialias_order = 6;
  double antialias_cutoff_hz = 2000.0;  // 80% of the post-decimation Nyquist
  int decimation = 2;
  int bandpass_order = 4;
  double bandpass_low_hz = 25.0;
  double bandpass_high_hz = 600.0;
  double input_rate_hz = framing::kSampleRateHz;

  double output_rate_hz() const { return input_rate_hz / decimation; }
};

// Multi-channel anti-alias -> decimate -> bandpass chain at a fixed channel
// count. Streaming-stateful: chunked processing equals whole-signal processing.
class PreprocChain {
 public:
  PreprocChain(int channels, const PreprocConfig& config = {});

  struct Output {
    std::vector<std::vector<double>> channels;  // decimated, filtered
    std::int64_t first_output_index = 0;        // index at the decimated rate
  };

  Output process(const std::vector<std::vector<std::int16_t>>& chunk);
  Output process(const std::vector<std::vector<double>>& chunk);

  int channels() const { return static_cast<int>(antialias_.size()); }
  const PreprocConfig& config() const { return config_; }

 private:
  PreprocConfig config_;
  std::vector<ChannelFilter> antialias_;
  std::vector<ChannelFilter> bandpass_;
  std::int64_t input_index_ = 0;   // raw-rate sample counter (decimation phase)
  std::int64_t output_index_ = 0;  // decimated-rate sample counter
};

struct FeatureParams {
  int window = 500;   // samples at the decimated rate (100 ms at 5 kHz)
  int stride = 100;   // 20 ms at 5 kHz -> 50 Hz feature rate
  double zc_deadzone = 0.01;
  double ssc_deadzone = 0.01;
  double wamp_threshold = 0.05;
  double log_guard = 1e-6;
  double signal_scale = 1.0;  // 1 / training-set RMS
};

std::array<double, kFeatureCount> compute_features(std::span<const double> window,
                                                   const FeatureParams& params);

struct FeatureVector {
  std::vector<double> values;  // channels * 14, channel-major
  std::int64_t window_end_sample_index = 0;  // at the decimated rate
  std::int64_t acq_timestamp_ns = 0;         // newest contributing sample
};

// Streaming sliding-window extractor. Partial leading windows are not emitted;
// vector count for N samples is floor((N - window) / stride) + 1.
class FeatureExtractor {
 public:
  FeatureExtractor(int channels, FeatureParams params = {});

  // `chunk[ch]` holds the same number of new samples per channel.
  // `newest_ts_ns` stamps vectors completed inside this chunk.
  std::vector<FeatureVector> push(const std::vector<std::vector<double>>& chunk,
                                  std::int64_t newest_ts_ns);

  int channels() const { return channels_; }
  const FeatureParams& params() const { return params_; }

 private:
  int channels_;
  FeatureParams params_;
  std::vector<std::vector<double>> history_;  // per channel, scaled, trimmed
  std::int64_t seen_ = 0;
  std::int64_t next_emit_ = 0;  // sample count at which the next window completes
};

// Rolling feature matrix: rows = feature channels, cols = time steps
// (oldest -> newest). The decoder consumes 1 s of history, 224 x 50.
class FeatureWindow {
 public:
  FeatureWindow(int rows = 224, int cols = 50);

  void push(const FeatureVector& v);
  bool full() const { return count_ >= cols_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }

  struct Snapshot {
    std::vector<double> data;  // row-major [row][col], col 0 oldest
    int rows = 0, cols = 0;
    std::int64_t newest_timestamp_ns = 0;
    std::int64_t newest_sample_index = 0;

    double at(int row, int col) const {
      return data[static_cast<std::size_t>(row) * cols + col];
    }
  };
  Snapshot snapshot() const;

 private:
  int rows_, cols_;
  int count_ = 0;
  int head_ = 0;  // ring position of the oldest column
  std::vector<double> columns_;  // cols_ slots of rows_ values
  std::vector<std::int64_t> ts_;
  std::vector<std::int64_t> idx_;
};

// Writes feature dumps as CSV: t,ch,f1..f14 rows per vector.
std::string features_to_csv(const std::vector<FeatureVector>& vectors, int channels,
                            double feature_rate_hz);

}  // namespace nervedec::dsp
