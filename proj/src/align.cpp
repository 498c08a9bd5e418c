#include "nervedec/align.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nervedec::framing {

namespace {
constexpr std::int64_t kSamplePeriodNs = 1000000000LL / kSampleRateHz;  // nominal
}

StreamAligner::StreamAligner(int device_count, int chunk_len, double max_drop_ms,
                             double lead_threshold_ms)
    : chunk_len_(chunk_len),
      max_drop_samples_(static_cast<std::int64_t>(max_drop_ms * kSampleRateHz / 1000.0)),
      lead_threshold_ns_(static_cast<std::int64_t>(lead_threshold_ms * 1e6)),
      devices_(static_cast<std::size_t>(device_count)),
      ledgers_(static_cast<std::size_t>(device_count)) {
  if (device_count < 1) throw std::invalid_argument("StreamAligner: need at least one device");
  if (chunk_len < 1) throw std::invalid_argument("StreamAligner: chunk_len must be positive");
}

void StreamAligner::push(int device, const RawBlock& block) {
  auto& dev = devices_[static_cast<std::size_t>(device)];
  auto& led = ledgers_[static_cast<std::size_t>(device)];

  if (!dev.started) {
    dev.started = true;
    dev.expected_seq = block.seq;
    dev.last_ts_ns = block.acq_timestamp_ns - kSamplePeriodNs;
  }

  const std::uint16_t gap = static_cast<std::uint16_t>(block.seq - dev.expected_seq);
  if (gap != 0) {
    if (gap >= 0x8000) return;  // stale/duplicate block, ignore
    // Lost blocks: fill with zeros at the nominal rate and flag them.
    const std::int64_t fill = static_cast<std::int64_t>(gap) * kDefaultTickCount;
    for (std::int64_t i = 0; i < fill; ++i) {
      Entry e{};
      e.ts_ns = dev.last_ts_ns + kSamplePeriodNs;
      e.fill = true;
      dev.buf.push_back(e);
      dev.last_ts_ns = e.ts_ns;
    }
    led.zero_filled += fill;
    led.buffered += fill;
  }
  dev.expected_seq = static_cast<std::uint16_t>(block.seq + 1);

  for (int t = 0; t < block.tick_count; ++t) {
    Entry e;
    for (int c = 0; c < kChannels; ++c) e.value[c] = block.sample(t, c);
    e.ts_ns = block.acq_timestamp_ns + static_cast<std::int64_t>(t) * kSamplePeriodNs;
    e.fill = false;
    dev.buf.push_back(e);
    dev.last_ts_ns = e.ts_ns;
  }
  led.received += block.tick_count;
  led.buffered += block.tick_count;
}

void StreamAligner::mark_dropped(int device, int tick_count) {
  auto& dev = devices_[static_cast<std::size_t>(device)];
  if (dev.started) {
    dev.expected_seq = static_cast<std::uint16_t>(dev.expected_seq + 1);
  } else {
    // Stream starts after the drop; first pushed block resets tracking anyway.
    dev.started = true;
    dev.expected_seq = 1;
  }
  auto& led = ledgers_[static_cast<std::size_t>(device)];
  led.received += tick_count;
  led.dropped += tick_count;
}

void StreamAligner::drop_oldest(int device, std::int64_t count) {
  auto& dev = devices_[static_cast<std::size_t>(device)];
  auto& led = ledgers_[static_cast<std::size_t>(device)];
  count = std::min<std::int64_t>(count, static_cast<std::int64_t>(dev.buf.size()));
  dev.buf.erase(dev.buf.begin(), dev.buf.begin() + count);
  led.dropped += count;
  led.buffered -= count;
  drop_events_.push_back({device, count * 1000.0 / kSampleRateHz});
}

std::vector<AlignedChunk> StreamAligner::drain() {
  std::vector<AlignedChunk> out;
  const int n = device_count();

  while (true) {
    bool all_ready = true;
    for (const auto& dev : devices_) {
      if (static_cast<int>(dev.buf.size()) < chunk_len_) {
        all_ready = false;
        break;
      }
    }
    if (!all_ready) break;

    // Realignment: while every stream is live, a head that is older than the
    // freshest head by more than the threshold is genuine surplus from a
    // faster device clock. Drop it, at most max_drop_samples per event.
    double dropped_ms_here = 0.0;
    if (n > 1) {
      std::int64_t freshest_head = devices_[0].buf.front().ts_ns;
      for (const auto& dev : devices_) {
        freshest_head = std::max(freshest_head, dev.buf.front().ts_ns);
      }
      for (int d = 0; d < n; ++d) {
        const std::int64_t lag_ns = freshest_head - devices_[static_cast<std::size_t>(d)].buf.front().ts_ns;
        if (lag_ns > lead_threshold_ns_) {
          const std::int64_t lag_samples = lag_ns / kSamplePeriodNs;
          const std::int64_t count = std::min(lag_samples, max_drop_samples_);
          drop_oldest(d, count);
          dropped_ms_here += count * 1000.0 / kSampleRateHz;
        }
      }
      // A capped drop may need another pass; emit only from ready buffers.
      bool still_ready = true;
      for (const auto& dev : devices_) {
        if (static_cast<int>(dev.buf.size()) < chunk_len_) still_ready = false;
      }
      if (!still_ready) {
        if (!out.empty()) out.back().dropped_ms += dropped_ms_here;
        else if (dropped_ms_here > 0.0) pending_dropped_ms_ += dropped_ms_here;
        break;
      }
    }

    AlignedChunk chunk;
    chunk.sample_index_base = global_index_;
    chunk.chunk_len = chunk_len_;
    chunk.dropped_ms = dropped_ms_here + pending_dropped_ms_;
    pending_dropped_ms_ = 0.0;
    chunk.samples.assign(static_cast<std::size_t>(n) * kChannels,
                         std::vector<std::int16_t>(static_cast<std::size_t>(chunk_len_)));
    std::int64_t newest = 0;
    for (int d = 0; d < n; ++d) {
      auto& dev = devices_[static_cast<std::size_t>(d)];
      for (int i = 0; i < chunk_len_; ++i) {
        const Entry& e = dev.buf[static_cast<std::size_t>(i)];
        for (int c = 0; c < kChannels; ++c) {
          chunk.samples[static_cast<std::size_t>(d) * kChannels + c][static_cast<std::size_t>(i)] =
              e.value[c];
        }
        chunk.gap_fill = chunk.gap_fill || e.fill;
        newest = std::max(newest, e.ts_ns);
      }
      dev.buf.erase(dev.buf.begin(), dev.buf.begin() + chunk_len_);
      ledgers_[static_cast<std::size_t>(d)].emitted += chunk_len_;
      ledgers_[static_cast<std::size_t>(d)].buffered -= chunk_len_;
    }
    chunk.newest_timestamp_ns = newest;
    global_index_ += chunk_len_;
    out.push_back(std::move(chunk));
  }
  return out;
}

}  // namespace nervedec::framing
