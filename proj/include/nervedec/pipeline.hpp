#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nervedec/align.hpp"
#include "nervedec/dsp.hpp"
#include "nervedec/ensemble.hpp"
#include "nervedec/framing.hpp"
#include "nervedec/hand.hpp"
#include "nervedec/sinks.hpp"

namespace nervedec::pipeline {

enum class PowerMode { kFiveW, kTenW };
enum class Pace { kRealtime, kVirtual };

std::string to_string(PowerMode mode);
std::optional<PowerMode> power_mode_from_string(const std::string& s);

// Injected pre-processing stall, for drop-policy tests.
struct StallInjection {
  double at_s = -1.0;  // < 0 disables
  double duration_ms = 0.0;
};

struct PipelineConfig {
  PowerMode power_mode = PowerMode::kTenW;
  double raw_queue_capacity_ms = 200.0;
  double feature_stride_ms = 20.0;  // decoding tick and freshest-data budget
  double max_drop_ms = 60.0;
  // Synthetic compute costs standing in for the embedded target's clocks;
  // both scale with the power mode (10 W = 1x, 5 W = 2x).
  double infer_cost_ms_per_model = 10.0;
  double dsp_cost_ms_per_chunk = 0.5;
  StallInjection stall;

  int worker_count() const { return power_mode == PowerMode::kTenW ? 4 : 2; }
  double compute_scale() const { return power_mode == PowerMode::kTenW ? 1.0 : 2.0; }
};

// A device block annotated with its source index (0-based, dense).
struct SourcedBlock {
  int device = 0;
  framing::TimedBlock timed;
};

// Pull-based block source; blocks come out in emission-time order.
class BlockSource {
 public:
  virtual ~BlockSource() = default;
  virtual int device_count() const = 0;
  virtual std::optional<SourcedBlock> next() = 0;
};

// Real-time emulated devices driving synthetic or recorded signals.
class EmulatedSource : public BlockSource {
 public:
  EmulatedSource(std::vector<framing::DeviceConfig> devices,
                 std::vector<framing::SignalSource> signals, double duration_s,
                 std::uint64_t seed);
  int device_count() const override { return static_cast<int>(emulators_.size()); }
  std::optional<SourcedBlock> next() override;

 private:
  std::vector<framing::DeviceEmulator> emulators_;
  std::vector<framing::TimedBlock> pending_;
  std::int64_t end_ns_ = 0;
};

// Replays a .nrvraw capture (wire bytes, devices interleaved). Arrival times
// are reconstructed from per-device sample counts at the nominal rate.
class ReplaySource : public BlockSource {
 public:
  explicit ReplaySource(const std::string& path);
  explicit ReplaySource(std::span<const std::uint8_t> bytes);
  int device_count() const override { return device_count_; }
  std::optional<SourcedBlock> next() override;
  double duration_s() const;

 private:
  void index_blocks(std::span<const std::uint8_t> bytes);
  std::vector<SourcedBlock> blocks_;
  std::size_t at_ = 0;
  int device_count_ = 0;
};

struct DropEventRecord {
  double t_s = 0.0;
  int device = 0;
  double ms = 0.0;
  enum class Origin { kQueuePolicy, kRealign } origin = Origin::kQueuePolicy;
};

struct LatencyReport {
  std::vector<ensemble::Prediction> predictions;
  std::vector<double> lag_ms;        // per prediction
  std::vector<double> inference_ms;  // per prediction
  double duration_s = 0.0;
  double median_lag_ms = 0.0;
  double p95_lag_ms = 0.0;
  double median_inference_ms = 0.0;
  double throughput_hz = 0.0;
  std::vector<DropEventRecord> drop_events;
  double total_dropped_ms = 0.0;
  std::vector<framing::AlignLedger> ledgers;        // per device
  std::vector<std::int64_t> produced_samples;       // per device, from the source
  std::int64_t sink_errors = 0;
  std::int64_t source_underruns = 0;

  void finalize();
};

double median(std::vector<double> values);
double percentile(std::vector<double> values, double pct);

// Benchmark CSV row(s): mode, model count, latency percentiles, throughput,
// drops.
std::string measure_csv_header();
std::string measure_csv_row(const std::string& mode, int model_count, const LatencyReport& report);

struct RunOptions {
  Pace pace = Pace::kRealtime;
  double duration_s = 10.0;
  dsp::FeatureParams feature_params;   // signal_scale is overridden by the ensemble
  hand::HandEmulator* hand = nullptr;  // optional prediction consumer
  DebugSink* debug = nullptr;          // optional; failures never block decoding
};

// The three-stage pipeline: acquisition fills bounded per-device FIFO queues,
// pre-processing aligns/filters/extracts into the rolling feature window,
// decoding snapshots the freshest window and emits predictions.
LatencyReport run_pipeline(const PipelineConfig& config, BlockSource& source,
                           const ensemble::Ensemble& ensemble, const RunOptions& options);

}  // namespace nervedec::pipeline
