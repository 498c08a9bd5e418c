#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

// Device byte-stream format and emulation.
//
// Each device streams eight channels of signed 16-bit samples at 10 kHz,
// packed into blocks of `tick_count` ticks (one sample per channel per tick).
// Wire layout, little-endian throughout:
//
//   magic(0xC5 0x5C) | device_id(1) | seq(2) | tick_count(2) |
//   payload(tick_count * 8 * 2, channel-major within each tick) | crc16(2)
//
// The CRC is CRC-16/CCITT-FALSE computed over seq | tick_count | payload.

namespace nervedec::framing {

inline constexpr std::uint8_t kMagic0 = 0xC5;
inline constexpr std::uint8_t kMagic1 = 0x5C;
inline constexpr int kChannels = 8;
inline constexpr int kSampleRateHz = 10000;
inline constexpr int kDefaultTickCount = 50;
inline constexpr std::size_t kHeaderBytes = 7;   // magic + device_id + seq + tick_count
inline constexpr std::size_t kTrailerBytes = 2;  // crc16

std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data);

struct DeviceConfig {
  int device_id = 0;
  int channels = kChannels;
  int sample_rate_hz = kSampleRateHz;
  int clock_ppm_offset = 0;  // |ppm| <= 2000
  bool noise_only = false;   // emits zero-mean noise regardless of source

  // Effective sample rate including the clock skew.
  double effective_rate_hz() const;
  void validate() const;  // throws std::invalid_argument on bad fields
};

struct RawBlock {
  std::uint8_t device_id = 0;
  std::uint16_t seq = 0;
  std::uint16_t tick_count = 0;
  std::vector<std::int16_t> payload;  // tick_count * 8, channel-major per tick
  std::uint16_t crc = 0;
  // Monotonic time the first sample of the block was produced. Acquisition
  // metadata, not part of the wire format.
  std::int64_t acq_timestamp_ns = 0;

  std::int16_t sample(int tick, int channel) const {
    return payload[static_cast<std::size_t>(tick) * kChannels + channel];
  }
};

// Wire-content equality; acq_timestamp_ns is deliberately excluded.
bool operator==(const RawBlock& a, const RawBlock& b);

std::size_t encoded_size(int tick_count);

// samples.size() must equal tick_count * 8 (channel-major within each tick).
std::vector<std::uint8_t> encode_block(const DeviceConfig& device, std::uint16_t seq,
                                       std::span<const std::int16_t> samples);
std::vector<std::uint8_t> encode_block(const RawBlock& block);

struct ResyncEvent {
  std::size_t stream_offset = 0;  // byte offset where skipping began
  std::size_t bytes_skipped = 0;
};

// Incremental decoder. Tolerates streams starting mid-block and arbitrary
// corruption: on a bad magic, header, or CRC it scans forward to the next
// plausible block and reports the skipped range as one resync event.
class StreamDecoder {
 public:
  explicit StreamDecoder(std::uint16_t max_tick_count = 512);

  void feed(std::span<const std::uint8_t> bytes);
  // Flush trailing unparseable bytes into a final resync event.
  void finish();

  std::vector<RawBlock> take_blocks();
  std::vector<ResyncEvent> take_resyncs();

 private:
  void parse();

  std::uint16_t max_tick_count_;
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;            // parse cursor within buf_
  std::size_t stream_base_ = 0;    // stream offset of buf_[0]
  std::size_t skip_start_ = 0;     // stream offset where current skip run began
  std::size_t skipped_ = 0;        // bytes skipped in the current run
  std::vector<RawBlock> blocks_;
  std::vector<ResyncEvent> resyncs_;
};

struct DecodeResult {
  std::vector<RawBlock> blocks;
  std::vector<ResyncEvent> resyncs;
};

// One-shot decode of a complete buffer (trailing garbage becomes a resync).
DecodeResult decode_stream(std::span<const std::uint8_t> bytes);

// Produces one tick (8 samples) of signal for a device, indexed by the
// device's own sample counter.
using SignalSource = std::function<void(std::int64_t sample_index, std::span<std::int16_t> out)>;

struct TimedBlock {
  std::int64_t emit_time_ns = 0;  // when the block is complete and sent
  RawBlock block;
};

// Emulates one device: blocks of 50 ticks whose emission times follow the
// device clock, i.e. sample_rate * (1 + clock_ppm_offset * 1e-6).
class DeviceEmulator {
 public:
  DeviceEmulator(DeviceConfig config, SignalSource source, std::uint64_t noise_seed);

  // Next block of `tick_count` ticks (default 50).
  TimedBlock next_block(int tick_count = kDefaultTickCount);
  std::int64_t samples_emitted() const { return sample_index_; }
  const DeviceConfig& config() const { return config_; }

 private:
  DeviceConfig config_;
  SignalSource source_;
  std::uint64_t noise_state_;
  std::uint16_t seq_ = 0;
  std::int64_t sample_index_ = 0;
};

// Fixed-duration emulation: emits ceil-to-last-partial-block so that the total
// per-channel sample count equals floor(duration * rate * (1 + ppm * 1e-6)).
std::vector<TimedBlock> emulate_device(const DeviceConfig& config, SignalSource source,
                                       double duration_s, std::uint64_t noise_seed);

// Serialize emulated blocks to wire bytes in emission order (.nrvraw content).
std::vector<std::uint8_t> to_wire(const std::vector<TimedBlock>& blocks);

}  // namespace nervedec::framing
