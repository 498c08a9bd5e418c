#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nervedec::synth {

enum class Mode { kAble, kAmputee };

std::string to_string(Mode mode);
std::optional<Mode> mode_from_string(const std::string& s);

inline double default_snr_db(Mode mode) { return mode == Mode::kAble ? 20.0 : 10.0; }

// int16 LSB per unit of synthetic signal amplitude.
inline constexpr double kLsbPerUnit = 1500.0;

// Finger order everywhere: thumb, index, middle, ring, pinky. A set mask bit
// means the finger flexes during the gesture.
struct GestureSpec {
  std::string name;
  std::array<bool, 5> finger_mask{};
  int repetitions = 10;
  double hold_s = 2.0;

  void validate() const;  // at least one active finger, repetitions >= 1
};

// Named gestures: thumb/index/middle/ring/pinky plus fist (11111),
// index_pinch (11000), pointing (10111) and horns (10110).
std::optional<GestureSpec> named_gesture(const std::string& name);
std::vector<GestureSpec> default_gesture_set();

// Per-finger intent envelopes at 10 kHz: each repetition is a trapezoid
// (0.3 s rise, hold_s plateau at 1.0, 0.3 s fall) separated by 1-2 s of rest,
// jittered by the seed. Inactive fingers stay zero.
std::vector<std::vector<double>> synth_intent(const GestureSpec& spec, std::uint64_t seed);

struct MixingInfo {
  std::vector<std::array<double, 5>> gains;  // 16 x 5
  double noise_rms = 0.0;
};

// 16-channel signal at 10 kHz in unit amplitude: channel c is
// carrier_c(t) * sum_f gains[c][f] * intent_f(t) + band-limited noise, where
// the carrier is 25-600 Hz filtered white noise. Able mode routes fingers
// 0-2 to channels 0-3 and fingers 3-4 to channels 4-7; device 1 (channels
// 8-15) records noise only. Amputee mode spreads all fingers over all 16
// channels with random gains.
std::vector<std::vector<double>> synth_signal(const std::vector<std::vector<double>>& intents,
                                              Mode mode, double snr_db, std::uint64_t seed,
                                              MixingInfo* info = nullptr);

struct GestureSession {
  std::string gesture;
  int session_index = 0;
  Mode mode = Mode::kAmputee;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::int16_t>> signal;  // 16 x N at 10 kHz
  std::vector<std::array<double, 5>> glove_angle;  // at 50 Hz, in [0, 1]
  std::vector<std::array<bool, 5>> labels;         // glove_angle > threshold
};

inline constexpr int kLabelRateHz = 50;
inline constexpr double kGloveThreshold = 0.5;

struct SessionPlan {
  GestureSpec gesture;
  int session_index = 0;
  Mode mode = Mode::kAmputee;
  double snr_db = 10.0;
  std::uint64_t seed = 0;
  bool validation = false;
};

GestureSession make_session(const SessionPlan& plan);

struct DatasetParams {
  int sessions_per_gesture = 4;
  Mode mode = Mode::kAmputee;
  std::optional<double> snr_db;  // defaults per mode
  std::uint64_t seed = 1;
  double resolved_snr_db() const { return snr_db ? *snr_db : default_snr_db(mode); }
};

// The chronologically last session of each gesture goes to validation.
std::vector<SessionPlan> plan_dataset(const std::vector<GestureSpec>& gestures,
                                      const DatasetParams& params);

struct DatasetSplit {
  std::vector<GestureSession> train;
  std::vector<GestureSession> validation;
};

DatasetSplit build_dataset(const std::vector<GestureSpec>& gestures, const DatasetParams& params);

// On-disk layout: session_###.nrvraw (wire bytes, devices interleaved),
// session_###.labels.csv (t + 5 booleans) and meta.json.
void write_dataset(const std::vector<SessionPlan>& plans, const std::string& dir);
DatasetSplit load_dataset(const std::string& dir);

std::vector<std::uint8_t> session_to_wire(const GestureSession& session);
std::string labels_to_csv(const GestureSession& session);

}  // namespace nervedec::synth
