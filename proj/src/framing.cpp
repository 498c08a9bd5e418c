#include "nervedec/framing.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>

namespace nervedec::framing {

namespace {

// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout.
constexpr std::uint16_t kCrcPoly = 0x1021;

std::array<std::uint16_t, 256> make_crc_table() {
  std::array<std::uint16_t, 256> table{};
  for (int i = 0; i < 256; ++i) {
    std::uint16_t v = static_cast<std::uint16_t>(i << 8);
    for (int bit = 0; bit < 8; ++bit) {
      v = (v & 0x8000) ? static_cast<std::uint16_t>((v << 1) ^ kCrcPoly)
                       : static_cast<std::uint16_t>(v << 1);
    }
    table[static_cast<std::size_t>(i)] = v;
  }
  return table;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (static_cast<std::uint16_t>(p[1]) << 8));
}

}  // namespace

std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data) {
  static const auto table = make_crc_table();
  std::uint16_t crc = 0xFFFF;
  for (std::uint8_t byte : data) {
    crc = static_cast<std::uint16_t>((crc << 8) ^ table[((crc >> 8) ^ byte) & 0xFF]);
  }
  return crc;
}

double DeviceConfig::effective_rate_hz() const {
  return sample_rate_hz * (1.0 + clock_ppm_offset * 1e-6);
}

void DeviceConfig::validate() const {
  if (channels != kChannels)
    throw std::invalid_argument("DeviceConfig: channels must be 8");
  if (sample_rate_hz != kSampleRateHz)
    throw std::invalid_argument("DeviceConfig: sample_rate_hz must be 10000");
  if (clock_ppm_offset < -2000 || clock_ppm_offset > 2000)
    throw std::invalid_argument("DeviceConfig: |clock_ppm_offset| must be <= 2000");
  if (device_id < 0 || device_id > 255)
    throw std::invalid_argument("DeviceConfig: device_id must fit one byte");
}

bool operator==(const RawBlock& a, const RawBlock& b) {
  return a.device_id == b.device_id && a.seq == b.seq && a.tick_count == b.tick_count &&
         a.payload == b.payload && a.crc == b.crc;
}

std::size_t encoded_size(int tick_count) {
  return kHeaderBytes + static_cast<std::size_t>(tick_count) * kChannels * 2 + kTrailerBytes;
}

std::vector<std::uint8_t> encode_block(const DeviceConfig& device, std::uint16_t seq,
                                       std::span<const std::int16_t> samples) {
  if (samples.empty() || samples.size() % kChannels != 0)
    throw std::invalid_argument("encode_block: samples must be a non-empty multiple of 8");
  const std::size_t tick_count = samples.size() / kChannels;
  if (tick_count > 0xFFFF)
    throw std::invalid_argument("encode_block: tick_count exceeds 16 bits");

  std::vector<std::uint8_t> out;
  out.reserve(encoded_size(static_cast<int>(tick_count)));
  out.push_back(kMagic0);
  out.push_back(kMagic1);
  out.push_back(static_cast<std::uint8_t>(device.device_id));
  put_u16(out, seq);
  put_u16(out, static_cast<std::uint16_t>(tick_count));
  for (std::int16_t s : samples) {
    put_u16(out, static_cast<std::uint16_t>(s));
  }
  // CRC covers seq | tick_count | payload.
  const std::uint16_t crc =
      crc16_ccitt_false(std::span<const std::uint8_t>(out.data() + 3, out.size() - 3));
  put_u16(out, crc);
  return out;
}

std::vector<std::uint8_t> encode_block(const RawBlock& block) {
  DeviceConfig cfg;
  cfg.device_id = block.device_id;
  return encode_block(cfg, block.seq,
                      std::span<const std::int16_t>(block.payload.data(), block.payload.size()));
}

StreamDecoder::StreamDecoder(std::uint16_t max_tick_count) : max_tick_count_(max_tick_count) {}

void StreamDecoder::feed(std::span<const std::uint8_t> bytes) {
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
  parse();
}

void StreamDecoder::parse() {
  while (true) {
    // Scan for the magic pair.
    std::size_t m = pos_;
    while (m + 1 < buf_.size() && !(buf_[m] == kMagic0 && buf_[m + 1] == kMagic1)) ++m;
    if (m + 1 >= buf_.size()) {
      // No full magic in view. Everything before a possible dangling 0xC5 is skipped.
      std::size_t keep = (m < buf_.size() && buf_[m] == kMagic0) ? m : buf_.size();
      if (keep > pos_) {
        if (skipped_ == 0) skip_start_ = stream_base_ + pos_;
        skipped_ += keep - pos_;
        pos_ = keep;
      }
      break;
    }
    if (m > pos_) {
      if (skipped_ == 0) skip_start_ = stream_base_ + pos_;
      skipped_ += m - pos_;
      pos_ = m;
    }
    if (buf_.size() - pos_ < kHeaderBytes) break;  // wait for the header

    const std::uint8_t* p = buf_.data() + pos_;
    const std::uint16_t tick_count = get_u16(p + 5);
    if (tick_count == 0 || tick_count > max_tick_count_) {
      // Implausible header: treat as a false magic and rescan one byte later.
      if (skipped_ == 0) skip_start_ = stream_base_ + pos_;
      ++skipped_;
      ++pos_;
      continue;
    }
    const std::size_t total = encoded_size(tick_count);
    if (buf_.size() - pos_ < total) break;  // wait for the full block

    const std::size_t crc_region = 4 + static_cast<std::size_t>(tick_count) * kChannels * 2;
    const std::uint16_t computed = crc16_ccitt_false({p + 3, crc_region});
    const std::uint16_t stored = get_u16(p + 3 + crc_region);
    if (computed != stored) {
      if (skipped_ == 0) skip_start_ = stream_base_ + pos_;
      ++skipped_;
      ++pos_;
      continue;
    }

    if (skipped_ > 0) {
      resyncs_.push_back({skip_start_, skipped_});
      skipped_ = 0;
    }
    RawBlock block;
    block.device_id = p[2];
    block.seq = get_u16(p + 3);
    block.tick_count = tick_count;
    block.payload.resize(static_cast<std::size_t>(tick_count) * kChannels);
    for (std::size_t i = 0; i < block.payload.size(); ++i) {
      block.payload[i] = static_cast<std::int16_t>(get_u16(p + kHeaderBytes + 2 * i));
    }
    block.crc = stored;
    blocks_.push_back(std::move(block));
    pos_ += total;
  }

  // Compact the consumed prefix.
  if (pos_ > 0) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    stream_base_ += pos_;
    pos_ = 0;
  }
}

void StreamDecoder::finish() {
  if (buf_.size() > pos_) {
    if (skipped_ == 0) skip_start_ = stream_base_ + pos_;
    skipped_ += buf_.size() - pos_;
    stream_base_ += buf_.size();
    buf_.clear();
    pos_ = 0;
  }
  if (skipped_ > 0) {
    resyncs_.push_back({skip_start_, skipped_});
    skipped_ = 0;
  }
}

std::vector<RawBlock> StreamDecoder::take_blocks() {
  std::vector<RawBlock> out;
  out.swap(blocks_);
  return out;
}

std::vector<ResyncEvent> StreamDecoder::take_resyncs() {
  std::vector<ResyncEvent> out;
  out.swap(resyncs_);
  return out;
}

DecodeResult decode_stream(std::span<const std::uint8_t> bytes) {
  StreamDecoder dec;
  dec.feed(bytes);
  dec.finish();
  return {dec.take_blocks(), dec.take_resyncs()};
}

DeviceEmulator::DeviceEmulator(DeviceConfig config, SignalSource source, std::uint64_t noise_seed)
    : config_(config), source_(std::move(source)), noise_state_(noise_seed) {
  config_.validate();
}

namespace {

// Cheap deterministic gaussian-ish noise for noise-only devices: sum of four
// uniforms, sigma ~= 300 LSB.
std::int16_t next_noise(std::uint64_t& state) {
  auto next_u32 = [&state]() {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<std::uint32_t>(state >> 33);
  };
  double acc = 0.0;
  for (int i = 0; i < 4; ++i) acc += (next_u32() / 4294967296.0) - 0.5;
  const double value = acc * 2.0 * 300.0;  // sigma close to 300
  return static_cast<std::int16_t>(std::lround(value));
}

}  // namespace

TimedBlock DeviceEmulator::next_block(int tick_count) {
  const double rate = config_.effective_rate_hz();
  TimedBlock out;
  out.block.device_id = static_cast<std::uint8_t>(config_.device_id);
  out.block.seq = seq_++;
  out.block.tick_count = static_cast<std::uint16_t>(tick_count);
  out.block.payload.resize(static_cast<std::size_t>(tick_count) * kChannels);
  out.block.acq_timestamp_ns = static_cast<std::int64_t>(std::llround(sample_index_ * 1e9 / rate));
  for (int t = 0; t < tick_count; ++t) {
    std::span<std::int16_t> tick(out.block.payload.data() + static_cast<std::size_t>(t) * kChannels,
                                 kChannels);
    if (config_.noise_only) {
      for (auto& s : tick) s = next_noise(noise_state_);
    } else {
      source_(sample_index_, tick);
    }
    ++sample_index_;
  }
  // The block can only be sent once its last sample exists.
  out.emit_time_ns = static_cast<std::int64_t>(std::llround(sample_index_ * 1e9 / rate));
  const std::size_t payload_bytes = out.block.payload.size() * 2;
  std::vector<std::uint8_t> crc_buf;
  crc_buf.reserve(4 + payload_bytes);
  crc_buf.push_back(static_cast<std::uint8_t>(out.block.seq & 0xFF));
  crc_buf.push_back(static_cast<std::uint8_t>(out.block.seq >> 8));
  crc_buf.push_back(static_cast<std::uint8_t>(out.block.tick_count & 0xFF));
  crc_buf.push_back(static_cast<std::uint8_t>(out.block.tick_count >> 8));
  for (std::int16_t s : out.block.payload) {
    crc_buf.push_back(static_cast<std::uint8_t>(static_cast<std::uint16_t>(s) & 0xFF));
    crc_buf.push_back(static_cast<std::uint8_t>(static_cast<std::uint16_t>(s) >> 8));
  }
  out.block.crc = crc16_ccitt_false(crc_buf);
  return out;
}

std::vector<TimedBlock> emulate_device(const DeviceConfig& config, SignalSource source,
                                       double duration_s, std::uint64_t noise_seed) {
  DeviceEmulator emu(config, std::move(source), noise_seed);
  const std::int64_t total_samples =
      static_cast<std::int64_t>(std::floor(duration_s * config.effective_rate_hz()));
  std::vector<TimedBlock> out;
  out.reserve(static_cast<std::size_t>(total_samples / kDefaultTickCount + 2));
  std::int64_t produced = 0;
  while (produced + kDefaultTickCount <= total_samples) {
    out.push_back(emu.next_block(kDefaultTickCount));
    produced += kDefaultTickCount;
  }
  if (const int rest = static_cast<int>(total_samples - produced); rest > 0) {
    out.push_back(emu.next_block(rest));
  }
  return out;
}

std::vector<std::uint8_t> to_wire(const std::vector<TimedBlock>& blocks) {
  std::vector<std::uint8_t> out;
  for (const auto& tb : blocks) {
    auto bytes = encode_block(tb.block);
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

}  // namespace nervedec::framing
