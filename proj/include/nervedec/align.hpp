#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "nervedec/framing.hpp"

namespace nervedec::framing {

struct AlignedChunk {
  std::int64_t sample_index_base = 0;  // global 10 kHz sample counter
  int chunk_len = 0;
  // samples[device * 8 + channel][0..chunk_len)
  std::vector<std::vector<std::int16_t>> samples;
  std::int64_t newest_timestamp_ns = 0;  // production time of the last sample
  double dropped_ms = 0.0;               // raw data discarded right before this chunk
  bool gap_fill = false;                 // any zero-filled (lost) samples inside
};

// Per-device sample accounting. Balance at any instant:
//   received + zero_filled == emitted + dropped + buffered
struct AlignLedger {
  std::int64_t received = 0;     // samples delivered by the device
  std::int64_t zero_filled = 0;  // samples fabricated to cover seq gaps
  std::int64_t dropped = 0;      // samples discarded (queue policy + realignment)
  std::int64_t emitted = 0;      // samples handed downstream
  std::int64_t buffered = 0;     // samples currently held

  bool balanced() const { return received + zero_filled == emitted + dropped + buffered; }
};

struct DropEvent {
  int device = 0;
  double ms = 0.0;  // <= max_drop_ms by construction
};

// Merges per-device block streams into lockstep chunks covering all devices.
//
// Chunks are emitted only when every device has data. Clock skew makes one
// device's buffer head grow stale relative to the others; when the head
// timestamp lags the freshest head by more than one block duration the oldest
// samples of the leader are discarded, never more than max_drop_ms per event.
// Sequence gaps are zero-filled and flagged rather than treated as errors.
class StreamAligner {
 public:
  StreamAligner(int device_count, int chunk_len = kDefaultTickCount, double max_drop_ms = 60.0,
                double lead_threshold_ms = 5.0);

  void push(int device, const RawBlock& block);
  // The next expected block of `device` was discarded upstream (queue policy);
  // advances sequence tracking and charges the ledger without zero-filling.
  void mark_dropped(int device, int tick_count);

  std::vector<AlignedChunk> drain();

  const AlignLedger& ledger(int device) const { return ledgers_[static_cast<std::size_t>(device)]; }
  const std::vector<DropEvent>& drop_events() const { return drop_events_; }
  int device_count() const { return static_cast<int>(devices_.size()); }

 private:
  struct Entry {
    std::int16_t value[kChannels];
    std::int64_t ts_ns;
    bool fill;
  };
  struct DeviceState {
    std::deque<Entry> buf;
    bool started = false;
    std::uint16_t expected_seq = 0;
    std::int64_t last_ts_ns = 0;  // production time of the newest buffered sample
  };

  void drop_oldest(int device, std::int64_t count);

  int chunk_len_;
  std::int64_t max_drop_samples_;
  std::int64_t lead_threshold_ns_;
  std::int64_t global_index_ = 0;
  double pending_dropped_ms_ = 0.0;
  std::vector<DeviceState> devices_;
  std::vector<AlignLedger> ledgers_;
  std::vector<DropEvent> drop_events_;
};

}  // namespace nervedec::framing
