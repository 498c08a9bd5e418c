#include "nervedec/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace nervedec::dsp {

namespace {

using cplx = std::complex<double>;

// Left-half-plane Butterworth prototype poles on the unit circle.
std::vector<cplx> prototype_poles(int order) {
  std::vector<cplx> poles;
  poles.reserve(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order + 1.0) / (2.0 * order);
    poles.emplace_back(std::cos(theta), std::sin(theta));
  }
  return poles;
}

cplx bilinear(cplx s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

// Group poles into conjugate pairs and build denominators.
std::vector<Biquad> pair_poles(std::vector<cplx> poles) {
  std::vector<Biquad> sections;
  std::vector<cplx> reals;
  for (const auto& p : poles) {
    if (std::abs(p.imag()) < 1e-12) {
      reals.push_back(p);
      continue;
    }
    if (p.imag() < 0) continue;  // conjugate handled with its partner
    Biquad s;
    s.a1 = -2.0 * p.real();
    s.a2 = std::norm(p);
    sections.push_back(s);
  }
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    Biquad s;
    s.a1 = -(reals[i].real() + reals[i + 1].real());
    s.a2 = reals[i].real() * reals[i + 1].real();
    sections.push_back(s);
  }
  if (reals.size() % 2 != 0) throw std::logic_error("unpaired real pole");
  return sections;
}

void check_cutoff(double f, double fs) {
  if (!(f > 0.0 && f < fs / 2.0))
    throw std::invalid_argument("filter cutoff must lie strictly inside (0, Nyquist)");
}

}  // namespace

std::complex<double> SosFilter::response_at(double freq_hz, double fs_hz) const {
  const double w = 2.0 * std::numbers::pi * freq_hz / fs_hz;
  const cplx z1 = std::exp(cplx(0.0, -w));   // z^-1
  const cplx z2 = z1 * z1;
  cplx h(1.0, 0.0);
  for (const auto& s : sections) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return h;
}

double SosFilter::magnitude_db(double freq_hz, double fs_hz) const {
  return 20.0 * std::log10(std::abs(response_at(freq_hz, fs_hz)));
}

bool SosFilter::stable() const {
  for (const auto& s : sections) {
    // Jury criterion for a real quadratic: |a2| < 1 and |a1| < 1 + a2.
    if (!(std::abs(s.a2) < 1.0 && std::abs(s.a1) < 1.0 + s.a2)) return false;
  }
  return true;
}

std::string SosFilter::describe() const {
  std::ostringstream os;
  os.precision(15);
  for (std::size_t i = 0; i < sections.size(); ++i) {
    const auto& s = sections[i];
    os << "sos[" << i << "] b=[" << s.b0 << ", " << s.b1 << ", " << s.b2 << "] a=[1, " << s.a1
       << ", " << s.a2 << "]\n";
  }
  return os.str();
}

SosFilter design_lowpass(int order, double cutoff_hz, double fs_hz) {
  if (order < 2 || order % 2 != 0) throw std::invalid_argument("lowpass order must be even >= 2");
  check_cutoff(cutoff_hz, fs_hz);

  const double warped = 2.0 * fs_hz * std::tan(std::numbers::pi * cutoff_hz / fs_hz);
  std::vector<cplx> zpoles;
  for (const auto& p : prototype_poles(order)) zpoles.push_back(bilinear(warped * p, fs_hz));

  SosFilter f;
  f.sections = pair_poles(std::move(zpoles));
  for (auto& s : f.sections) {  // two zeros at z = -1 per section
    s.b0 = 1.0;
    s.b1 = 2.0;
    s.b2 = 1.0;
  }
  // Normalize to unity DC gain, folded into the first section.
  const double g = std::abs(f.response_at(0.0, fs_hz));
  f.sections.front().b0 /= g;
  f.sections.front().b1 /= g;
  f.sections.front().b2 /= g;
  return f;
}

SosFilter design_bandpass(int order, double low_hz, double high_hz, double fs_hz) {
  if (order < 2 || order % 2 != 0) throw std::invalid_argument("bandpass order must be even >= 2");
  check_cutoff(low_hz, fs_hz);
  check_cutoff(high_hz, fs_hz);
  if (low_hz >= high_hz) throw std::invalid_argument("bandpass cutoffs out of order");

  const double w1 = 2.0 * fs_hz * std::tan(std::numbers::pi * low_hz / fs_hz);
  const double w2 = 2.0 * fs_hz * std::tan(std::numbers::pi * high_hz / fs_hz);
  const double w0 = std::sqrt(w1 * w2);
  const double bw = w2 - w1;

  // Lowpass-to-bandpass: each prototype pole q yields the roots of
  // s^2 - bw*q*s + w0^2 = 0.
  std::vector<cplx> zpoles;
  for (const auto& q : prototype_poles(order / 2)) {
    const cplx bq = bw * q;
    const cplx disc = std::sqrt(bq * bq - 4.0 * w0 * w0);
    zpoles.push_back(bilinear((bq + disc) / 2.0, fs_hz));
    zpoles.push_back(bilinear((bq - disc) / 2.0, fs_hz));
  }

  SosFilter f;
  f.sections = pair_poles(std::move(zpoles));
  for (auto& s : f.sections) {  // one zero at z = +1 and one at z = -1 per section
    s.b0 = 1.0;
    s.b1 = 0.0;
    s.b2 = -1.0;
  }
  // Unity gain at the (warped-back) center frequency.
  const double f0 = fs_hz / std::numbers::pi * std::atan(w0 / (2.0 * fs_hz));
  const double g = std::abs(f.response_at(f0, fs_hz));
  f.sections.front().b0 /= g;
  f.sections.front().b2 /= g;
  return f;
}

ChannelFilter::ChannelFilter(const SosFilter& design)
    : sections_(design.sections), state_(design.sections.size()) {}

double ChannelFilter::step(double x) {
  for (std::size_t i = 0; i < sections_.size(); ++i) {
    const Biquad& c = sections_[i];
    State& st = state_[i];
    const double y = c.b0 * x + st.s1;
    st.s1 = c.b1 * x - c.a1 * y + st.s2;
    st.s2 = c.b2 * x - c.a2 * y;
    x = y;
  }
  return x;
}

void ChannelFilter::process(std::span<const double> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = step(in[i]);
}

void ChannelFilter::reset() {
  for (auto& st : state_) st = State{};
}

PreprocChain::PreprocChain(int channels, const PreprocConfig& config) : config_(config) {
  const SosFilter aa =
      design_lowpass(config.antialias_order, config.antialias_cutoff_hz, config.input_rate_hz);
  const SosFilter bp = design_bandpass(config.bandpass_order, config.bandpass_low_hz,
                                       config.bandpass_high_hz, config.output_rate_hz());
  antialias_.assign(static_cast<std::size_t>(channels), ChannelFilter(aa));
  bandpass_.assign(static_cast<std::size_t>(channels), ChannelFilter(bp));
}

PreprocChain::Output PreprocChain::process(const std::vector<std::vector<double>>& chunk) {
  if (static_cast<int>(chunk.size()) != channels())
    throw std::invalid_argument("PreprocChain: channel count mismatch");
  Output out;
  out.first_output_index = output_index_;
  out.channels.resize(chunk.size());
  const std::size_t n = chunk.empty() ? 0 : chunk.front().size();
  const int dec = config_.decimation;
  for (std::size_t ch = 0; ch < chunk.size(); ++ch) {
    if (chunk[ch].size() != n)
      throw std::invalid_argument("PreprocChain: ragged chunk");
    std::int64_t idx = input_index_;
    auto& dst = out.channels[ch];
    for (std::size_t i = 0; i < n; ++i, ++idx) {
      const double filtered = antialias_[ch].step(chunk[ch][i]);
      if (idx % dec == 0) dst.push_back(bandpass_[ch].step(filtered));
    }
  }
  input_index_ += static_cast<std::int64_t>(n);
  output_index_ += out.channels.empty() ? 0 : static_cast<std::int64_t>(out.channels.front().size());
  return out;
}

PreprocChain::Output PreprocChain::process(const std::vector<std::vector<std::int16_t>>& chunk) {
  std::vector<std::vector<double>> tmp(chunk.size());
  for (std::size_t ch = 0; ch < chunk.size(); ++ch) {
    tmp[ch].assign(chunk[ch].begin(), chunk[ch].end());
  }
  return process(tmp);
}

std::array<double, kFeatureCount> compute_features(std::span<const double> w,
                                                   const FeatureParams& p) {
  const std::size_t n = w.size();
  std::array<double, kFeatureCount> f{};
  if (n == 0) return f;

  double sum = 0.0, abs_sum = 0.0, sq_sum = 0.0, log_sum = 0.0, max_abs = 0.0;
  for (double x : w) {
    sum += x;
    abs_sum += std::abs(x);
    sq_sum += x * x;
    log_sum += std::log(std::abs(x) + p.log_guard);
    max_abs = std::max(max_abs, std::abs(x));
  }
  const double mean = sum / static_cast<double>(n);

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : w) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);

  double wl = 0.0;
  int zc = 0, wamp = 0, ssc = 0;
  for (std::size_t i = 1; i < n; ++i) {
    const double diff = w[i] - w[i - 1];
    wl += std::abs(diff);
    if (w[i] * w[i - 1] < 0.0 && std::abs(diff) >= p.zc_deadzone) ++zc;
    if (std::abs(diff) >= p.wamp_threshold) ++wamp;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if ((w[i] - w[i - 1]) * (w[i] - w[i + 1]) >= p.ssc_deadzone) ++ssc;
  }

  f[kMav] = abs_sum / static_cast<double>(n);
  f[kIav] = abs_sum;
  f[kRms] = std::sqrt(sq_sum / static_cast<double>(n));
  f[kVar] = m2;
  f[kWl] = wl;
  f[kZc] = zc;
  f[kSsc] = ssc;
  f[kWamp] = wamp;
  f[kLog] = std::exp(log_sum / static_cast<double>(n));
  f[kDamv] = n > 1 ? wl / static_cast<double>(n - 1) : 0.0;
  f[kSsi] = sq_sum;
  f[kMaxAbs] = max_abs;
  // Flat windows have no defined shape statistics; report 0 rather than 0/0.
  if (m2 > 1e-300) {
    f[kSkewness] = m3 / std::pow(m2, 1.5);
    f[kKurtosis] = m4 / (m2 * m2);
  }
  return f;
}

FeatureExtractor::FeatureExtractor(int channels, FeatureParams params)
    : channels_(channels), params_(params), history_(static_cast<std::size_t>(channels)) {
  if (params_.window < params_.stride)
    throw std::invalid_argument("FeatureExtractor: window must be >= stride");
  next_emit_ = params_.window;
}

std::vector<FeatureVector> FeatureExtractor::push(const std::vector<std::vector<double>>& chunk,
                                                  std::int64_t newest_ts_ns) {
  if (static_cast<int>(chunk.size()) != channels_)
    throw std::invalid_argument("FeatureExtractor: channel count mismatch");
  const std::size_t n = chunk.empty() ? 0 : chunk.front().size();
  for (int ch = 0; ch < channels_; ++ch) {
    auto& h = history_[static_cast<std::size_t>(ch)];
    for (double x : chunk[static_cast<std::size_t>(ch)]) h.push_back(x * params_.signal_scale);
  }
  seen_ += static_cast<std::int64_t>(n);

  std::vector<FeatureVector> out;
  while (seen_ >= next_emit_) {
    // The window ends `seen_ - next_emit_` samples before the newest one.
    const std::int64_t lag = seen_ - next_emit_;
    FeatureVector v;
    v.values.resize(static_cast<std::size_t>(channels_) * kFeatureCount);
    for (int ch = 0; ch < channels_; ++ch) {
      const auto& h = history_[static_cast<std::size_t>(ch)];
      const std::size_t end = h.size() - static_cast<std::size_t>(lag);
      std::span<const double> window(h.data() + end - static_cast<std::size_t>(params_.window),
                                     static_cast<std::size_t>(params_.window));
      const auto feats = compute_features(window, params_);
      std::copy(feats.begin(), feats.end(),
                v.values.begin() + static_cast<std::size_t>(ch) * kFeatureCount);
    }
    v.window_end_sample_index = next_emit_ - 1;
    v.acq_timestamp_ns = newest_ts_ns;
    out.push_back(std::move(v));
    next_emit_ += params_.stride;
  }

  // Trim history beyond what future windows can reach.
  const std::int64_t keep = params_.window + params_.stride;
  for (auto& h : history_) {
    if (static_cast<std::int64_t>(h.size()) > 2 * keep) {
      h.erase(h.begin(), h.end() - keep);
    }
  }
  return out;
}

FeatureWindow::FeatureWindow(int rows, int cols)
    : rows_(rows),
      cols_(cols),
      columns_(static_cast<std::size_t>(rows) * cols, 0.0),
      ts_(static_cast<std::size_t>(cols), 0),
      idx_(static_cast<std::size_t>(cols), 0) {}

void FeatureWindow::push(const FeatureVector& v) {
  if (static_cast<int>(v.values.size()) != rows_)
    throw std::invalid_argument("FeatureWindow: vector size mismatch");
  const int slot = (head_ + count_) % cols_;
  const int write = count_ < cols_ ? slot : head_;
  std::copy(v.values.begin(), v.values.end(),
            columns_.begin() + static_cast<std::size_t>(write) * rows_);
  ts_[static_cast<std::size_t>(write)] = v.acq_timestamp_ns;
  idx_[static_cast<std::size_t>(write)] = v.window_end_sample_index;
  if (count_ < cols_) {
    ++count_;
  } else {
    head_ = (head_ + 1) % cols_;  // oldest column evicted
  }
}

FeatureWindow::Snapshot FeatureWindow::snapshot() const {
  Snapshot s;
  s.rows = rows_;
  s.cols = cols_;
  s.data.assign(static_cast<std::size_t>(rows_) * cols_, 0.0);
  const int filled = count_;
  for (int c = 0; c < filled; ++c) {
    const int src = (head_ + c) % cols_;
    // Right-align so the newest column is always the last one.
    const int dst = cols_ - filled + c;
    for (int r = 0; r < rows_; ++r) {
      s.data[static_cast<std::size_t>(r) * cols_ + dst] =
          columns_[static_cast<std::size_t>(src) * rows_ + r];
    }
  }
  if (filled > 0) {
    const int newest = (head_ + filled - 1) % cols_;
    s.newest_timestamp_ns = ts_[static_cast<std::size_t>(newest)];
    s.newest_sample_index = idx_[static_cast<std::size_t>(newest)];
  }
  return s;
}

std::string features_to_csv(const std::vector<FeatureVector>& vectors, int channels,
                            double feature_rate_hz) {
  std::ostringstream os;
  os << "t,ch";
  for (int i = 1; i <= kFeatureCount; ++i) os << ",f" << i;
  os << "\n";
  os.precision(12);
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    const double t = static_cast<double>(k) / feature_rate_hz;
    for (int ch = 0; ch < channels; ++ch) {
      os << t << "," << ch;
      for (int f = 0; f < kFeatureCount; ++f) {
        os << "," << vectors[k].values[static_cast<std::size_t>(ch) * kFeatureCount + f];
      }
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace nervedec::dsp
