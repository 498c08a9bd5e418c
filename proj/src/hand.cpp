#include "nervedec/hand.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace nervedec::hand {

std::array<std::uint8_t, kFrameBytes> encode_command(const std::array<bool, 5>& states) {
  std::array<std::uint8_t, kFrameBytes> frame{};
  frame[0] = kFrameSync;
  for (int f = 0; f < 5; ++f) frame[static_cast<std::size_t>(f) + 1] = states[static_cast<std::size_t>(f)] ? 0x01 : 0x00;
  std::uint8_t sum = 0;
  for (std::size_t i = 0; i + 1 < kFrameBytes; ++i) sum ^= frame[i];
  frame[kFrameBytes - 1] = sum;
  return frame;
}

std::optional<std::array<bool, 5>> decode_command(std::span<const std::uint8_t> frame) {
  if (frame.size() != kFrameBytes || frame[0] != kFrameSync) return std::nullopt;
  std::uint8_t sum = 0;
  for (std::size_t i = 0; i + 1 < kFrameBytes; ++i) sum ^= frame[i];
  if (sum != frame[kFrameBytes - 1]) return std::nullopt;
  std::array<bool, 5> states{};
  for (int f = 0; f < 5; ++f) {
    const std::uint8_t b = frame[static_cast<std::size_t>(f) + 1];
    if (b > 0x01) return std::nullopt;
    states[static_cast<std::size_t>(f)] = b == 0x01;
  }
  return states;
}

HandEmulator::HandEmulator(double travel_time_s) : travel_time_s_(travel_time_s) {
  if (travel_time_s <= 0.0) throw std::invalid_argument("HandEmulator: travel time must be > 0");
}

void HandEmulator::apply_frame(std::span<const std::uint8_t> frame, double dt_s) {
  if (const auto states = decode_command(frame)) {
    apply_states(*states, dt_s);
  } else {
    ++frame_errors_;
    advance(dt_s);  // hold the last valid command
  }
}

void HandEmulator::apply_states(const std::array<bool, 5>& states, double dt_s) {
  targets_ = states;
  advance(dt_s);
}

void HandEmulator::advance(double dt_s) {
  if (dt_s <= 0.0) throw std::invalid_argument("HandEmulator: dt must be > 0");
  const double max_step = slew_per_second() * dt_s;
  for (int f = 0; f < 5; ++f) {
    double& pos = state_.positions[static_cast<std::size_t>(f)];
    const double target = targets_[static_cast<std::size_t>(f)] ? 1.0 : 0.0;
    const double delta = std::clamp(target - pos, -max_step, max_step);
    pos = std::clamp(pos + delta, 0.0, 1.0);
  }
  t_s_ += dt_s;
  if (log_) trajectory_.push_back({t_s_, state_.positions});
}

std::string trajectory_to_csv(const std::vector<HandEmulator::TrajectoryPoint>& points) {
  std::ostringstream os;
  os << "t,pos1,pos2,pos3,pos4,pos5\n";
  os.precision(9);
  for (const auto& p : points) {
    os << p.t_s;
    for (double x : p.positions) os << "," << x;
    os << "\n";
  }
  return os.str();
}

}  // namespace nervedec::hand
