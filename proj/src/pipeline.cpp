#include "nervedec/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <semaphore>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "nervedec/rng.hpp"

namespace nervedec::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now().time_since_epoch())
      .count();
}

void busy_wait_ms(double ms) {
  if (ms <= 0.0) return;
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                           std::chrono::duration<double, std::milli>(ms));
  while (Clock::now() < deadline) {
    // spin; this stands in for compute bound to the emulated power budget
  }
}

constexpr double kBlockMs =
    1000.0 * framing::kDefaultTickCount / framing::kSampleRateHz;  // 5 ms

}  // namespace

std::string to_string(PowerMode mode) { return mode == PowerMode::kTenW ? "10W" : "5W"; }

std::optional<PowerMode> power_mode_from_string(const std::string& s) {
  if (s == "10W" || s == "10w" || s == "tenw") return PowerMode::kTenW;
  if (s == "5W" || s == "5w" || s == "fivew") return PowerMode::kFiveW;
  return std::nullopt;
}

EmulatedSource::EmulatedSource(std::vector<framing::DeviceConfig> devices,
                               std::vector<framing::SignalSource> signals, double duration_s,
                               std::uint64_t seed) {
  if (devices.empty() || devices.size() != signals.size())
    throw std::invalid_argument("EmulatedSource: device/signal count mismatch");
  end_ns_ = static_cast<std::int64_t>(duration_s * 1e9);
  for (std::size_t d = 0; d < devices.size(); ++d) {
    emulators_.emplace_back(devices[d], std::move(signals[d]),
                            derive_seed(seed, 0xDE << 8 | d));
    pending_.push_back(emulators_.back().next_block());
  }
}

std::optional<SourcedBlock> EmulatedSource::next() {
  int best = -1;
  for (std::size_t d = 0; d < pending_.size(); ++d) {
    if (pending_[d].emit_time_ns > end_ns_) continue;
    if (best < 0 || pending_[d].emit_time_ns < pending_[static_cast<std::size_t>(best)].emit_time_ns)
      best = static_cast<int>(d);
  }
  if (best < 0) return std::nullopt;
  SourcedBlock out{best, pending_[static_cast<std::size_t>(best)]};
  pending_[static_cast<std::size_t>(best)] = emulators_[static_cast<std::size_t>(best)].next_block();
  return out;
}

ReplaySource::ReplaySource(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ReplaySource: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  index_blocks(bytes);
}

ReplaySource::ReplaySource(std::span<const std::uint8_t> bytes) { index_blocks(bytes); }

void ReplaySource::index_blocks(std::span<const std::uint8_t> bytes) {
  const auto decoded = framing::decode_stream(bytes);
  std::vector<std::uint8_t> id_map(256, 0xFF);
  std::vector<std::int64_t> cum_ticks;
  for (const auto& block : decoded.blocks) {
    if (id_map[block.device_id] == 0xFF) {
      id_map[block.device_id] = static_cast<std::uint8_t>(device_count_++);
      cum_ticks.push_back(0);
    }
    const int dev = id_map[block.device_id];
    auto& ticks = cum_ticks[static_cast<std::size_t>(dev)];
    SourcedBlock sb;
    sb.device = dev;
    sb.timed.block = block;
    sb.timed.block.acq_timestamp_ns = ticks * 1000000000LL / framing::kSampleRateHz;
    ticks += block.tick_count;
    sb.timed.emit_time_ns = ticks * 1000000000LL / framing::kSampleRateHz;
    blocks_.push_back(std::move(sb));
  }
  std::stable_sort(blocks_.begin(), blocks_.end(), [](const SourcedBlock& a, const SourcedBlock& b) {
    return a.timed.emit_time_ns < b.timed.emit_time_ns;
  });
}

std::optional<SourcedBlock> ReplaySource::next() {
  if (at_ >= blocks_.size()) return std::nullopt;
  return blocks_[at_++];
}

double ReplaySource::duration_s() const {
  return blocks_.empty() ? 0.0 : static_cast<double>(blocks_.back().timed.emit_time_ns) / 1e9;
}

double median(std::vector<double> values) { return percentile(std::move(values), 50.0); }

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double rank = pct / 100.0 * (static_cast<double>(values.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(rank));
  const double frac = rank - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

void LatencyReport::finalize() {
  lag_ms.clear();
  inference_ms.clear();
  for (const auto& p : predictions) {
    lag_ms.push_back(static_cast<double>(p.produced_timestamp_ns - p.newest_sample_timestamp_ns) /
                     1e6);
    inference_ms.push_back(p.inference_ms);
  }
  median_lag_ms = median(lag_ms);
  p95_lag_ms = percentile(lag_ms, 95.0);
  median_inference_ms = median(inference_ms);
  throughput_hz = duration_s > 0.0 ? static_cast<double>(predictions.size()) / duration_s : 0.0;
  total_dropped_ms = 0.0;
  for (const auto& e : drop_events) total_dropped_ms += e.ms;
}

std::string measure_csv_header() {
  return "mode,model_count,predictions,median_lag_ms,p95_lag_ms,median_infer_ms,throughput_hz,"
         "dropped_ms\n";
}

std::string measure_csv_row(const std::string& mode, int model_count, const LatencyReport& r) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << mode << "," << model_count << "," << r.predictions.size() << ","
     << r.median_lag_ms << "," << r.p95_lag_ms << "," << r.median_inference_ms << ","
     << r.throughput_hz << "," << r.total_dropped_ms << "\n";
  return os.str();
}

namespace {

// Bounded single-producer single-consumer raw block queue. At capacity the
// oldest block is discarded (the source is never back-pressured); discards are
// handed to the consumer in order so alignment bookkeeping stays exact.
class RawQueue {
 public:
  explicit RawQueue(double capacity_ms)
      : capacity_samples_(static_cast<std::int64_t>(capacity_ms * framing::kSampleRateHz / 1000.0)) {}

  struct Popped {
    framing::RawBlock block;
    std::vector<std::uint16_t> dropped_before;  // tick counts, oldest first
  };

  void push(framing::RawBlock block) {
    std::lock_guard lock(mu_);
    queued_samples_ += block.tick_count;
    queue_.push_back(std::move(block));
    while (queued_samples_ > capacity_samples_ && queue_.size() > 1) {
      ++overflow_blocks_;
      drop_front_locked();
    }
  }

  // Blocks discarded by capacity overflow since the last call.
  int take_overflow_blocks() {
    std::lock_guard lock(mu_);
    const int n = overflow_blocks_;
    overflow_blocks_ = 0;
    return n;
  }

  std::optional<Popped> pop() {
    std::lock_guard lock(mu_);
    if (queue_.empty()) return std::nullopt;
    Popped out;
    out.dropped_before.swap(pending_drops_);
    out.block = std::move(queue_.front());
    queue_.pop_front();
    queued_samples_ -= out.block.tick_count;
    return out;
  }

  // Freshest-data policy: discard up to `blocks` whole blocks from the head.
  std::vector<std::uint16_t> drop_blocks(int blocks) {
    std::lock_guard lock(mu_);
    std::vector<std::uint16_t> dropped;
    for (int i = 0; i < blocks && !queue_.empty(); ++i) {
      dropped.push_back(queue_.front().tick_count);
      drop_front_locked();
    }
    // Merge into pending so the consumer marks them before the next block.
    pending_drops_.insert(pending_drops_.end(), dropped.begin(), dropped.end());
    return dropped;
  }

  double queued_ms() const {
    std::lock_guard lock(mu_);
    return static_cast<double>(queued_samples_) * 1000.0 / framing::kSampleRateHz;
  }

  bool empty() const {
    std::lock_guard lock(mu_);
    return queue_.empty();
  }

 private:
  void drop_front_locked() {
    pending_drops_.push_back(queue_.front().tick_count);
    queued_samples_ -= queue_.front().tick_count;
    queue_.pop_front();
  }

  mutable std::mutex mu_;
  std::deque<framing::RawBlock> queue_;
  std::vector<std::uint16_t> pending_drops_;
  std::int64_t queued_samples_ = 0;
  std::int64_t capacity_samples_;
  int overflow_blocks_ = 0;
};

struct StageShared {
  std::mutex window_mu;
  dsp::FeatureWindow window{224, 50};
  std::int64_t window_version = 0;
  std::condition_variable window_cv;
  std::atomic<bool> preproc_done{false};

  std::mutex pred_mu;
  std::vector<ensemble::Prediction> predictions;
};

struct RunContext {
  const PipelineConfig& config;
  const ensemble::Ensemble& ensemble;
  const RunOptions& options;
  int devices = 0;

  framing::StreamAligner aligner;
  std::unique_ptr<dsp::PreprocChain> chain;
  std::unique_ptr<dsp::FeatureExtractor> extractor;

  std::vector<DropEventRecord> drop_events;
  std::vector<std::int64_t> produced_samples;
  std::int64_t sink_errors = 0;
  std::size_t align_events_seen = 0;

  RunContext(const PipelineConfig& cfg, const ensemble::Ensemble& ens, const RunOptions& opt,
             int device_count)
      : config(cfg),
        ensemble(ens),
        options(opt),
        devices(device_count),
        aligner(device_count, framing::kDefaultTickCount, cfg.max_drop_ms),
        produced_samples(static_cast<std::size_t>(device_count), 0) {
    dsp::FeatureParams params = opt.feature_params;
    params.signal_scale = ens.signal_scale();
    const int channels = device_count * framing::kChannels;
    chain = std::make_unique<dsp::PreprocChain>(channels);
    extractor = std::make_unique<dsp::FeatureExtractor>(channels, params);
  }

  void record_align_events(double t_s) {
    const auto& events = aligner.drop_events();
    for (; align_events_seen < events.size(); ++align_events_seen) {
      drop_events.push_back({t_s, events[align_events_seen].device, events[align_events_seen].ms,
                             DropEventRecord::Origin::kRealign});
    }
  }
};

void deliver_prediction(RunContext& ctx, StageShared& shared, ensemble::Prediction pred,
                        hand::HandEmulator* hand_sink, DebugSink* debug_sink,
                        std::int64_t* last_pred_ns) {
  if (debug_sink != nullptr && !debug_sink->write(pred)) ++ctx.sink_errors;
  if (hand_sink != nullptr) {
    double dt_s = ctx.config.feature_stride_ms / 1000.0;
    if (*last_pred_ns >= 0 && pred.produced_timestamp_ns > *last_pred_ns) {
      dt_s = static_cast<double>(pred.produced_timestamp_ns - *last_pred_ns) / 1e9;
    }
    hand_sink->apply_frame(hand::encode_command(pred.states), dt_s);
    *last_pred_ns = pred.produced_timestamp_ns;
  }
  std::lock_guard lock(shared.pred_mu);
  shared.predictions.push_back(std::move(pred));
}

LatencyReport run_realtime(const PipelineConfig& config, BlockSource& source,
                           const ensemble::Ensemble& ensemble, const RunOptions& options) {
  const int devices = source.device_count();
  RunContext ctx(config, ensemble, options, devices);
  StageShared shared;
  const int rows = devices * framing::kChannels * dsp::kFeatureCount;
  shared.window = dsp::FeatureWindow(rows, ensemble.config(0).seq_len);

  std::deque<RawQueue> queues;
  for (int d = 0; d < devices; ++d) queues.emplace_back(config.raw_queue_capacity_ms);

  // Worker budget emulating the power mode's core count; acquisition is
  // I/O-bound and does not take a slot.
  std::counting_semaphore<8> workers(config.worker_count());

  std::atomic<bool> acq_done{false};
  std::condition_variable raw_cv;
  std::mutex raw_mu;
  const std::int64_t t0 = now_ns();
  std::int64_t last_emit_ns = 0;

  std::thread acq([&] {
    while (auto sb = source.next()) {
      const std::int64_t target = t0 + sb->timed.emit_time_ns;
      const auto deadline = Clock::time_point(std::chrono::nanoseconds(target));
      std::this_thread::sleep_until(deadline);
      framing::RawBlock block = std::move(sb->timed.block);
      block.acq_timestamp_ns += t0;
      ctx.produced_samples[static_cast<std::size_t>(sb->device)] += block.tick_count;
      queues[static_cast<std::size_t>(sb->device)].push(std::move(block));
      last_emit_ns = sb->timed.emit_time_ns;
      raw_cv.notify_one();
    }
    acq_done = true;
    raw_cv.notify_one();
  });

  std::thread preproc([&] {
    bool stalled = config.stall.at_s < 0.0;
    const double stride_ms = config.feature_stride_ms;
    while (true) {
      {
        std::unique_lock lock(raw_mu);
        raw_cv.wait_for(lock, std::chrono::milliseconds(2));
      }
      bool queues_empty = true;
      for (const auto& q : queues) queues_empty = queues_empty && q.empty();
      if (acq_done && queues_empty) break;
      if (queues_empty) continue;

      if (!stalled && static_cast<double>(now_ns() - t0) / 1e9 >= config.stall.at_s) {
        std::this_thread::sleep_for(
            std::chrono::duration<double, std::milli>(config.stall.duration_ms));
        stalled = true;
      }

      // Freshest-data policy: discard whole blocks, the same count from every
      // device, when the backlog exceeds one feature stride.
      double backlog_ms = 0.0;
      for (const auto& q : queues) backlog_ms = std::max(backlog_ms, q.queued_ms());
      if (backlog_ms > stride_ms) {
        const double drop_ms = std::min(backlog_ms - stride_ms, config.max_drop_ms);
        const int blocks = static_cast<int>(drop_ms / kBlockMs);
        if (blocks > 0) {
          const double t_s = static_cast<double>(now_ns() - t0) / 1e9;
          for (int d = 0; d < devices; ++d) {
            const auto dropped = queues[static_cast<std::size_t>(d)].drop_blocks(blocks);
            double ms = 0.0;
            for (std::uint16_t ticks : dropped) ms += ticks * 1000.0 / framing::kSampleRateHz;
            if (ms > 0.0)
              ctx.drop_events.push_back({t_s, d, ms, DropEventRecord::Origin::kQueuePolicy});
          }
        }
      }

      workers.acquire();
      for (int d = 0; d < devices; ++d) {
        const int overflowed = queues[static_cast<std::size_t>(d)].take_overflow_blocks();
        if (overflowed > 0) {
          const double t_s = static_cast<double>(now_ns() - t0) / 1e9;
          for (int i = 0; i < overflowed; ++i)
            ctx.drop_events.push_back({t_s, d, kBlockMs, DropEventRecord::Origin::kQueuePolicy});
        }
        while (auto popped = queues[static_cast<std::size_t>(d)].pop()) {
          for (std::uint16_t ticks : popped->dropped_before) ctx.aligner.mark_dropped(d, ticks);
          ctx.aligner.push(d, popped->block);
        }
      }
      const auto chunks = ctx.aligner.drain();
      ctx.record_align_events(static_cast<double>(now_ns() - t0) / 1e9);
      for (const auto& chunk : chunks) {
        busy_wait_ms(config.dsp_cost_ms_per_chunk * config.compute_scale());
        const auto filtered = ctx.chain->process(chunk.samples);
        const auto vectors = ctx.extractor->push(filtered.channels, chunk.newest_timestamp_ns);
        for (const auto& v : vectors) {
          std::lock_guard lock(shared.window_mu);
          shared.window.push(v);
          ++shared.window_version;
        }
        if (!vectors.empty()) shared.window_cv.notify_one();
      }
      workers.release();
    }
    shared.preproc_done = true;
    shared.window_cv.notify_one();
  });

  std::thread decode([&] {
    std::int64_t seen_version = 0;
    std::int64_t last_pred_ns = -1;
    const double infer_budget =
        config.infer_cost_ms_per_model * ensemble.model_count() * config.compute_scale();
    while (true) {
      dsp::FeatureWindow::Snapshot snap;
      {
        std::unique_lock lock(shared.window_mu);
        shared.window_cv.wait_for(lock, std::chrono::milliseconds(2), [&] {
          return shared.window_version > seen_version || shared.preproc_done.load();
        });
        if (shared.window_version == seen_version) {
          if (shared.preproc_done) break;
          continue;
        }
        seen_version = shared.window_version;
        if (!shared.window.full()) continue;
        snap = shared.window.snapshot();
      }
      workers.acquire();
      const std::int64_t infer_start = now_ns();
      busy_wait_ms(infer_budget);
      ensemble::Prediction pred = ensemble.infer(snap);
      pred.produced_timestamp_ns = now_ns();
      pred.inference_ms = static_cast<double>(pred.produced_timestamp_ns - infer_start) / 1e6;
      workers.release();
      deliver_prediction(ctx, shared, std::move(pred), options.hand, options.debug, &last_pred_ns);
    }
  });

  acq.join();
  preproc.join();
  decode.join();

  LatencyReport report;
  report.predictions = std::move(shared.predictions);
  report.duration_s = static_cast<double>(last_emit_ns) / 1e9;
  report.drop_events = std::move(ctx.drop_events);
  for (int d = 0; d < devices; ++d) report.ledgers.push_back(ctx.aligner.ledger(d));
  report.produced_samples = std::move(ctx.produced_samples);
  report.sink_errors = ctx.sink_errors;
  report.finalize();
  return report;
}

LatencyReport run_virtual(const PipelineConfig& config, BlockSource& source,
                          const ensemble::Ensemble& ensemble, const RunOptions& options) {
  const int devices = source.device_count();
  RunContext ctx(config, ensemble, options, devices);
  StageShared shared;
  const int rows = devices * framing::kChannels * dsp::kFeatureCount;
  shared.window = dsp::FeatureWindow(rows, ensemble.config(0).seq_len);

  struct VQueue {
    std::deque<framing::RawBlock> blocks;
    std::vector<std::uint16_t> pending_drops;
    std::int64_t queued_samples = 0;
  };
  std::vector<VQueue> queues(static_cast<std::size_t>(devices));
  const std::int64_t capacity_samples =
      static_cast<std::int64_t>(config.raw_queue_capacity_ms * framing::kSampleRateHz / 1000.0);

  const double scale = config.compute_scale();
  const double infer_cost_ms = config.infer_cost_ms_per_model * ensemble.model_count() * scale;
  std::int64_t preproc_free = 0, decode_free = 0;
  bool stall_applied = config.stall.at_s < 0.0;
  const std::int64_t stall_at = static_cast<std::int64_t>(config.stall.at_s * 1e9);
  std::int64_t last_pred_ns = -1;
  std::int64_t last_emit = 0;
  bool have_pending = false;
  std::int64_t pending_ready = 0;

  auto run_infer = [&](std::int64_t start_ns) {
    const auto snap = shared.window.snapshot();
    ensemble::Prediction pred = ensemble.infer(snap);
    pred.inference_ms = infer_cost_ms;
    pred.produced_timestamp_ns = start_ns + static_cast<std::int64_t>(infer_cost_ms * 1e6);
    decode_free = pred.produced_timestamp_ns;
    deliver_prediction(ctx, shared, std::move(pred), options.hand, options.debug, &last_pred_ns);
  };

  auto on_vector = [&](const dsp::FeatureVector& v, std::int64_t ready_ns) {
    if (have_pending && decode_free <= ready_ns) {
      run_infer(std::max(decode_free, pending_ready));
      have_pending = false;
    }
    shared.window.push(v);
    if (!shared.window.full()) return;
    if (decode_free <= ready_ns) {
      run_infer(ready_ns);
    } else {
      // Decoder busy: this snapshot is superseded by the next vector (the
      // decoder always takes the freshest data when it frees up).
      have_pending = true;
      pending_ready = ready_ns;
    }
  };

  auto preprocess_available = [&](std::int64_t vt) {
    const double stride_ms = config.feature_stride_ms;
    double backlog_ms = 0.0;
    for (const auto& q : queues)
      backlog_ms = std::max(backlog_ms, q.queued_samples * 1000.0 / framing::kSampleRateHz);
    if (backlog_ms > stride_ms) {
      const double drop_ms = std::min(backlog_ms - stride_ms, config.max_drop_ms);
      const int blocks = static_cast<int>(drop_ms / kBlockMs);
      if (blocks > 0) {
        for (int d = 0; d < devices; ++d) {
          auto& q = queues[static_cast<std::size_t>(d)];
          double ms = 0.0;
          for (int i = 0; i < blocks && !q.blocks.empty(); ++i) {
            q.pending_drops.push_back(q.blocks.front().tick_count);
            q.queued_samples -= q.blocks.front().tick_count;
            ms += q.blocks.front().tick_count * 1000.0 / framing::kSampleRateHz;
            q.blocks.pop_front();
          }
          if (ms > 0.0)
            ctx.drop_events.push_back({static_cast<double>(vt) / 1e9, d, ms,
                                       DropEventRecord::Origin::kQueuePolicy});
        }
      }
    }
    for (int d = 0; d < devices; ++d) {
      auto& q = queues[static_cast<std::size_t>(d)];
      for (std::uint16_t ticks : q.pending_drops) ctx.aligner.mark_dropped(d, ticks);
      q.pending_drops.clear();
      while (!q.blocks.empty()) {
        ctx.aligner.push(d, q.blocks.front());
        q.queued_samples -= q.blocks.front().tick_count;
        q.blocks.pop_front();
      }
    }
    const auto chunks = ctx.aligner.drain();
    ctx.record_align_events(static_cast<double>(vt) / 1e9);
    std::int64_t t = vt;
    for (const auto& chunk : chunks) {
      t += static_cast<std::int64_t>(config.dsp_cost_ms_per_chunk * scale * 1e6);
      const auto filtered = ctx.chain->process(chunk.samples);
      const auto vectors = ctx.extractor->push(filtered.channels, chunk.newest_timestamp_ns);
      for (const auto& v : vectors) on_vector(v, t);
    }
    preproc_free = t;
  };

  while (auto sb = source.next()) {
    const std::int64_t arrival = sb->timed.emit_time_ns;
    last_emit = std::max(last_emit, arrival);
    ctx.produced_samples[static_cast<std::size_t>(sb->device)] += sb->timed.block.tick_count;
    auto& q = queues[static_cast<std::size_t>(sb->device)];
    q.queued_samples += sb->timed.block.tick_count;
    q.blocks.push_back(std::move(sb->timed.block));
    while (q.queued_samples > capacity_samples && q.blocks.size() > 1) {
      q.pending_drops.push_back(q.blocks.front().tick_count);
      q.queued_samples -= q.blocks.front().tick_count;
      q.blocks.pop_front();
      ctx.drop_events.push_back({static_cast<double>(arrival) / 1e9, sb->device, kBlockMs,
                                 DropEventRecord::Origin::kQueuePolicy});
    }

    if (!stall_applied && arrival >= stall_at) {
      preproc_free = std::max(preproc_free, stall_at) +
                     static_cast<std::int64_t>(config.stall.duration_ms * 1e6);
      stall_applied = true;
    }
    if (preproc_free <= arrival) {
      preprocess_available(arrival);
    }
    // While stalled (preproc_free > arrival) blocks simply pile up.
  }
  // Source exhausted: drain whatever is left.
  preprocess_available(std::max(preproc_free, last_emit));
  if (have_pending) {
    run_infer(std::max(decode_free, pending_ready));
    have_pending = false;
  }

  LatencyReport report;
  report.predictions = std::move(shared.predictions);
  report.duration_s = static_cast<double>(last_emit) / 1e9;
  report.drop_events = std::move(ctx.drop_events);
  for (int d = 0; d < devices; ++d) report.ledgers.push_back(ctx.aligner.ledger(d));
  report.produced_samples = std::move(ctx.produced_samples);
  report.sink_errors = ctx.sink_errors;
  report.finalize();
  return report;
}

}  // namespace

LatencyReport run_pipeline(const PipelineConfig& config, BlockSource& source,
                           const ensemble::Ensemble& ensemble, const RunOptions& options) {
  if (source.device_count() < 1)
    throw std::invalid_argument("run_pipeline: source has no devices");
  const int rows = source.device_count() * framing::kChannels * dsp::kFeatureCount;
  if (rows != ensemble.config(0).input_channels)
    throw std::invalid_argument("run_pipeline: feature rows do not match the model input");
  if (options.pace == Pace::kRealtime) return run_realtime(config, source, ensemble, options);
  return run_virtual(config, source, ensemble, options);
}

}  // namespace nervedec::pipeline
