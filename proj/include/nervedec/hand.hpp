#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nervedec::hand {

// Serial frame: 0x7E | 5 state bytes (0x01 flex, 0x00 extend) | XOR checksum
// of everything before it.
inline constexpr std::uint8_t kFrameSync = 0x7E;
inline constexpr std::size_t kFrameBytes = 7;

std::array<std::uint8_t, kFrameBytes> encode_command(const std::array<bool, 5>& states);
// nullopt on bad sync, bad checksum, or an out-of-range state byte: a
// corrupted frame is never partially applied.
std::optional<std::array<bool, 5>> decode_command(std::span<const std::uint8_t> frame);

struct HandState {
  std::array<double, 5> positions{};  // 0 extended .. 1 flexed
};

// Five-finger hand with slew-rate-limited DC-motor kinematics: each finger
// moves toward its commanded extreme at most full_travel in travel_time_s.
class HandEmulator {
 public:
  explicit HandEmulator(double travel_time_s = 0.8);

  // Applies one frame over dt seconds. A malformed frame holds the last
  // command and bumps the error counter.
  void apply_frame(std::span<const std::uint8_t> frame, double dt_s);
  void apply_states(const std::array<bool, 5>& states, double dt_s);
  // Advance without a new command (fingers keep moving toward targets).
  void advance(double dt_s);

  const HandState& state() const { return state_; }
  double slew_per_second() const { return 1.0 / travel_time_s_; }
  std::int64_t frame_errors() const { return frame_errors_; }

  struct TrajectoryPoint {
    double t_s;
    std::array<double, 5> positions;
  };
  const std::vector<TrajectoryPoint>& trajectory() const { return trajectory_; }
  void enable_trajectory_log(bool on) { log_ = on; }

 private:
  double travel_time_s_;
  double t_s_ = 0.0;
  HandState state_;
  std::array<bool, 5> targets_{};  // false = extend
  std::int64_t frame_errors_ = 0;
  bool log_ = false;
  std::vector<TrajectoryPoint> trajectory_;
};

std::string trajectory_to_csv(const std::vector<HandEmulator::TrajectoryPoint>& points);

}  // namespace nervedec::hand
