#include "nervedec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "nervedec/dsp.hpp"
#include "nervedec/framing.hpp"
#include "nervedec/rng.hpp"

namespace nervedec::synth {

namespace {

constexpr int kRate = framing::kSampleRateHz;
constexpr int kSignalChannels = 16;
constexpr double kRiseFallS = 0.3;

}  // namespace

std::string to_string(Mode mode) { return mode == Mode::kAble ? "able" : "amputee"; }

std::optional<Mode> mode_from_string(const std::string& s) {
  if (s == "able") return Mode::kAble;
  if (s == "amputee") return Mode::kAmputee;
  return std::nullopt;
}

void GestureSpec::validate() const {
  if (std::none_of(finger_mask.begin(), finger_mask.end(), [](bool b) { return b; }))
    throw std::invalid_argument("GestureSpec: at least one finger must be active");
  if (repetitions < 1) throw std::invalid_argument("GestureSpec: repetitions must be >= 1");
  if (hold_s <= 0.0) throw std::invalid_argument("GestureSpec: hold time must be positive");
}

std::optional<GestureSpec> named_gesture(const std::string& name) {
  static const std::vector<std::pair<std::string, std::array<bool, 5>>> table = {
      {"thumb", {true, false, false, false, false}},
      {"index", {false, true, false, false, false}},
      {"middle", {false, false, true, false, false}},
      {"ring", {false, false, false, true, false}},
      {"pinky", {false, false, false, false, true}},
      {"fist", {true, true, true, true, true}},
      {"index_pinch", {true, true, false, false, false}},
      {"pointing", {true, false, true, true, true}},
      {"horns", {true, false, true, true, false}},
  };
  for (const auto& [n, mask] : table) {
    if (n == name) {
      GestureSpec spec;
      spec.name = n;
      spec.finger_mask = mask;
      return spec;
    }
  }
  return std::nullopt;
}

std::vector<GestureSpec> default_gesture_set() {
  std::vector<GestureSpec> out;
  for (const char* n : {"thumb", "index", "middle", "ring", "pinky", "fist", "index_pinch",
                        "pointing", "horns"}) {
    out.push_back(*named_gesture(n));
  }
  return out;
}

std::vector<std::vector<double>> synth_intent(const GestureSpec& spec, std::uint64_t seed) {
  spec.validate();
  auto rng = make_rng(derive_seed(seed, 0xA11));
  std::uniform_real_distribution<double> rest_dist(1.0, 2.0);

  // Lay out the repetition schedule first, then paint the envelope.
  struct Rep {
    double start_s;
  };
  std::vector<Rep> reps;
  double t = rest_dist(rng);
  for (int r = 0; r < spec.repetitions; ++r) {
    reps.push_back({t});
    t += 2.0 * kRiseFallS + spec.hold_s;
    t += rest_dist(rng);
  }
  const double total_s = t;
  const std::int64_t n = static_cast<std::int64_t>(std::llround(total_s * kRate));

  std::vector<std::vector<double>> intents(5, std::vector<double>(static_cast<std::size_t>(n), 0.0));
  std::vector<double> envelope(static_cast<std::size_t>(n), 0.0);
  for (const auto& rep : reps) {
    const std::int64_t i0 = static_cast<std::int64_t>(std::llround(rep.start_s * kRate));
    const std::int64_t rise = static_cast<std::int64_t>(std::llround(kRiseFallS * kRate));
    const std::int64_t hold = static_cast<std::int64_t>(std::llround(spec.hold_s * kRate));
    for (std::int64_t i = 0; i < rise && i0 + i < n; ++i)
      envelope[static_cast<std::size_t>(i0 + i)] = static_cast<double>(i) / static_cast<double>(rise);
    for (std::int64_t i = 0; i < hold && i0 + rise + i < n; ++i)
      envelope[static_cast<std::size_t>(i0 + rise + i)] = 1.0;
    for (std::int64_t i = 0; i < rise && i0 + rise + hold + i < n; ++i)
      envelope[static_cast<std::size_t>(i0 + rise + hold + i)] =
          1.0 - static_cast<double>(i) / static_cast<double>(rise);
  }
  for (int f = 0; f < 5; ++f) {
    if (spec.finger_mask[static_cast<std::size_t>(f)]) intents[static_cast<std::size_t>(f)] = envelope;
  }
  return intents;
}

namespace {

// 25-600 Hz band-limited unit-RMS noise.
std::vector<double> bandlimited_noise(std::int64_t n, std::uint64_t seed) {
  static const dsp::SosFilter band = dsp::design_bandpass(4, 25.0, 600.0, kRate);
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  dsp::ChannelFilter filter(band);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& x : out) x = filter.step(gauss(rng));
  double sq = 0.0;
  for (double x : out) sq += x * x;
  const double rms = std::sqrt(sq / static_cast<double>(n));
  if (rms > 0.0) {
    for (auto& x : out) x /= rms;
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> synth_signal(const std::vector<std::vector<double>>& intents,
                                              Mode mode, double snr_db, std::uint64_t seed,
                                              MixingInfo* info) {
  if (intents.size() != 5) throw std::invalid_argument("synth_signal: expected 5 intent tracks");
  const std::int64_t n = static_cast<std::int64_t>(intents.front().size());
  for (const auto& track : intents) {
    if (static_cast<std::int64_t>(track.size()) != n)
      throw std::invalid_argument("synth_signal: ragged intent tracks");
  }

  auto gain_rng = make_rng(derive_seed(seed, 0x6A1));
  std::vector<std::array<double, 5>> gains(kSignalChannels, std::array<double, 5>{});
  if (mode == Mode::kAble) {
    // Median group (thumb/index/middle) on channels 0-3, ulnar (ring/pinky)
    // on 4-7; the second device is detached and records noise only.
    std::uniform_real_distribution<double> g(0.7, 1.3);
    for (int c = 0; c < 4; ++c)
      for (int f = 0; f < 3; ++f) gains[static_cast<std::size_t>(c)][static_cast<std::size_t>(f)] = g(gain_rng);
    for (int c = 4; c < 8; ++c)
      for (int f = 3; f < 5; ++f) gains[static_cast<std::size_t>(c)][static_cast<std::size_t>(f)] = g(gain_rng);
  } else {
    std::uniform_real_distribution<double> g(0.3, 1.0);
    for (int c = 0; c < kSignalChannels; ++c)
      for (int f = 0; f < 5; ++f) gains[static_cast<std::size_t>(c)][static_cast<std::size_t>(f)] = g(gain_rng);
  }

  // Noise floor referenced to the mean single-finger plateau amplitude.
  double ref = 0.0;
  int ref_count = 0;
  for (const auto& row : gains) {
    for (double v : row) {
      if (v > 0.0) {
        ref += v;
        ++ref_count;
      }
    }
  }
  ref = ref_count > 0 ? ref / ref_count : 1.0;
  const double noise_rms = ref * std::pow(10.0, -snr_db / 20.0);

  std::vector<std::vector<double>> signal(kSignalChannels);
  for (int c = 0; c < kSignalChannels; ++c) {
    auto& ch = signal[static_cast<std::size_t>(c)];
    ch.assign(static_cast<std::size_t>(n), 0.0);
    const auto& row = gains[static_cast<std::size_t>(c)];
    const bool live = std::any_of(row.begin(), row.end(), [](double v) { return v > 0.0; });
    if (live) {
      const auto carrier = bandlimited_noise(n, derive_seed(seed, 0xCA0 + static_cast<std::uint64_t>(c)));
      for (std::int64_t i = 0; i < n; ++i) {
        double drive = 0.0;
        for (int f = 0; f < 5; ++f) drive += row[static_cast<std::size_t>(f)] * intents[static_cast<std::size_t>(f)][static_cast<std::size_t>(i)];
        ch[static_cast<std::size_t>(i)] = drive * carrier[static_cast<std::size_t>(i)];
      }
    }
    const auto noise = bandlimited_noise(n, derive_seed(seed, 0x901 + static_cast<std::uint64_t>(c)));
    for (std::int64_t i = 0; i < n; ++i) ch[static_cast<std::size_t>(i)] += noise_rms * noise[static_cast<std::size_t>(i)];
  }

  if (info) {
    info->gains = gains;
    info->noise_rms = noise_rms;
  }
  return signal;
}

GestureSession make_session(const SessionPlan& plan) {
  const auto intents = synth_intent(plan.gesture, derive_seed(plan.seed, 0x1D7E47));

  // Session-level gain perturbation (+-3 dB per channel), the posture
  // surrogate: scale each channel of the mixing matrix.
  auto perturb_rng = make_rng(derive_seed(plan.seed, 0x905707));
  std::uniform_real_distribution<double> db(-3.0, 3.0);

  MixingInfo info;
  auto signal = synth_signal(intents, plan.mode, plan.snr_db, derive_seed(plan.seed, 0x516), &info);
  for (auto& ch : signal) {
    const double factor = std::pow(10.0, db(perturb_rng) / 20.0);
    for (auto& x : ch) x *= factor;
  }

  GestureSession session;
  session.gesture = plan.gesture.name;
  session.session_index = plan.session_index;
  session.mode = plan.mode;
  session.seed = plan.seed;

  session.signal.resize(signal.size());
  for (std::size_t c = 0; c < signal.size(); ++c) {
    auto& dst = session.signal[c];
    dst.resize(signal[c].size());
    for (std::size_t i = 0; i < signal[c].size(); ++i) {
      const double v = std::clamp(signal[c][i] * kLsbPerUnit, -32768.0, 32767.0);
      dst[i] = static_cast<std::int16_t>(std::lround(v));
    }
  }

  // Glove angle sampled at the end of each 20 ms tick; labels by threshold.
  const std::int64_t n = static_cast<std::int64_t>(intents.front().size());
  const int per_tick = kRate / kLabelRateHz;
  const std::int64_t ticks = n / per_tick;
  session.glove_angle.resize(static_cast<std::size_t>(ticks));
  session.labels.resize(static_cast<std::size_t>(ticks));
  for (std::int64_t t = 0; t < ticks; ++t) {
    const std::size_t at = static_cast<std::size_t>((t + 1) * per_tick - 1);
    for (int f = 0; f < 5; ++f) {
      const double angle = intents[static_cast<std::size_t>(f)][at];
      session.glove_angle[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)] = angle;
      session.labels[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)] = angle > kGloveThreshold;
    }
  }
  return session;
}

std::vector<SessionPlan> plan_dataset(const std::vector<GestureSpec>& gestures,
                                      const DatasetParams& params) {
  if (params.sessions_per_gesture < 4)
    throw std::invalid_argument("plan_dataset: at least four sessions per gesture");
  if (gestures.empty()) throw std::invalid_argument("plan_dataset: no gestures");

  std::vector<SessionPlan> plans;
  for (std::size_t g = 0; g < gestures.size(); ++g) {
    gestures[g].validate();
    for (int s = 0; s < params.sessions_per_gesture; ++s) {
      SessionPlan plan;
      plan.gesture = gestures[g];
      plan.session_index = s;
      plan.mode = params.mode;
      plan.snr_db = params.resolved_snr_db();
      plan.seed = derive_seed(params.seed, (static_cast<std::uint64_t>(g) << 20) | static_cast<std::uint64_t>(s));
      plan.validation = s == params.sessions_per_gesture - 1;  // chronologically last
      plans.push_back(std::move(plan));
    }
  }
  return plans;
}

DatasetSplit build_dataset(const std::vector<GestureSpec>& gestures, const DatasetParams& params) {
  DatasetSplit split;
  for (const auto& plan : plan_dataset(gestures, params)) {
    auto session = make_session(plan);
    (plan.validation ? split.validation : split.train).push_back(std::move(session));
  }
  return split;
}

std::vector<std::uint8_t> session_to_wire(const GestureSession& session) {
  using framing::kDefaultTickCount;
  framing::DeviceConfig dev0{.device_id = 0};
  framing::DeviceConfig dev1{.device_id = 1};

  const std::int64_t n = static_cast<std::int64_t>(session.signal.front().size());
  std::vector<std::uint8_t> out;
  std::uint16_t seq = 0;
  std::vector<std::int16_t> block(static_cast<std::size_t>(kDefaultTickCount) * framing::kChannels);
  for (std::int64_t base = 0; base + kDefaultTickCount <= n; base += kDefaultTickCount, ++seq) {
    for (int device = 0; device < 2; ++device) {
      for (int t = 0; t < kDefaultTickCount; ++t) {
        for (int c = 0; c < framing::kChannels; ++c) {
          block[static_cast<std::size_t>(t) * framing::kChannels + c] =
              session.signal[static_cast<std::size_t>(device * framing::kChannels + c)]
                            [static_cast<std::size_t>(base + t)];
        }
      }
      auto bytes = framing::encode_block(device == 0 ? dev0 : dev1, seq, block);
      out.insert(out.end(), bytes.begin(), bytes.end());
    }
  }
  return out;
}

std::string labels_to_csv(const GestureSession& session) {
  std::ostringstream os;
  os << "t,thumb,index,middle,ring,pinky\n";
  os.precision(6);
  for (std::size_t t = 0; t < session.labels.size(); ++t) {
    os << std::fixed << (static_cast<double>(t + 1) / kLabelRateHz);
    for (int f = 0; f < 5; ++f) os << "," << (session.labels[t][static_cast<std::size_t>(f)] ? 1 : 0);
    os << "\n";
  }
  return os.str();
}

namespace {

std::string session_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "session_%03d", index);
  return buf;
}

}  // namespace

void write_dataset(const std::vector<SessionPlan>& plans, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::json meta;
  meta["format"] = "nervedec-dataset";
  meta["version"] = 1;
  meta["label_rate_hz"] = kLabelRateHz;
  meta["glove_threshold"] = kGloveThreshold;
  auto& sessions = meta["sessions"] = nlohmann::json::array();

  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto& plan = plans[i];
    auto session = make_session(plan);
    const std::string stem = session_stem(static_cast<int>(i));

    const auto wire = session_to_wire(session);
    std::ofstream raw(fs::path(dir) / (stem + ".nrvraw"), std::ios::binary);
    raw.write(reinterpret_cast<const char*>(wire.data()), static_cast<std::streamsize>(wire.size()));
    if (!raw) throw std::runtime_error("write_dataset: failed writing " + stem + ".nrvraw");

    std::ofstream labels(fs::path(dir) / (stem + ".labels.csv"));
    labels << labels_to_csv(session);

    nlohmann::json js;
    js["file"] = stem + ".nrvraw";
    js["labels"] = stem + ".labels.csv";
    js["gesture"] = plan.gesture.name;
    js["finger_mask"] = plan.gesture.finger_mask;
    js["session_index"] = plan.session_index;
    js["mode"] = to_string(plan.mode);
    js["snr_db"] = plan.snr_db;
    js["seed"] = plan.seed;
    js["validation"] = plan.validation;
    sessions.push_back(std::move(js));
  }

  std::ofstream meta_out(fs::path(dir) / "meta.json");
  meta_out << meta.dump(2) << "\n";
  if (!meta_out) throw std::runtime_error("write_dataset: failed writing meta.json");
}

namespace {

GestureSession load_session(const std::filesystem::path& dir, const nlohmann::json& js) {
  namespace fs = std::filesystem;
  GestureSession session;
  session.gesture = js.at("gesture").get<std::string>();
  session.session_index = js.at("session_index").get<int>();
  session.seed = js.at("seed").get<std::uint64_t>();
  const auto mode = mode_from_string(js.at("mode").get<std::string>());
  if (!mode) throw std::runtime_error("load_dataset: unknown mode in meta.json");
  session.mode = *mode;

  std::ifstream raw(dir / js.at("file").get<std::string>(), std::ios::binary);
  if (!raw) throw std::runtime_error("load_dataset: missing " + js.at("file").get<std::string>());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(raw)),
                                  std::istreambuf_iterator<char>());
  const auto decoded = framing::decode_stream(bytes);

  session.signal.assign(kSignalChannels, {});
  for (const auto& block : decoded.blocks) {
    if (block.device_id > 1) continue;
    for (int t = 0; t < block.tick_count; ++t) {
      for (int c = 0; c < framing::kChannels; ++c) {
        session.signal[static_cast<std::size_t>(block.device_id * framing::kChannels + c)]
            .push_back(block.sample(t, c));
      }
    }
  }

  std::ifstream labels(dir / js.at("labels").get<std::string>());
  if (!labels) throw std::runtime_error("load_dataset: missing labels csv");
  std::string line;
  std::getline(labels, line);  // header
  while (std::getline(labels, line)) {
    if (line.empty()) continue;
    std::array<bool, 5> row{};
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');  // t
    for (int f = 0; f < 5; ++f) {
      std::getline(ss, field, ',');
      row[static_cast<std::size_t>(f)] = field == "1";
    }
    session.labels.push_back(row);
    // Angles are not serialized; reconstruct the thresholded view.
    std::array<double, 5> angle{};
    for (int f = 0; f < 5; ++f) angle[static_cast<std::size_t>(f)] = row[static_cast<std::size_t>(f)] ? 1.0 : 0.0;
    session.glove_angle.push_back(angle);
  }
  return session;
}

}  // namespace

DatasetSplit load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream meta_in(fs::path(dir) / "meta.json");
  if (!meta_in) throw std::runtime_error("load_dataset: missing meta.json in " + dir);
  nlohmann::json meta = nlohmann::json::parse(meta_in);

  DatasetSplit split;
  for (const auto& js : meta.at("sessions")) {
    auto session = load_session(dir, js);
    (js.at("validation").get<bool>() ? split.validation : split.train).push_back(std::move(session));
  }
  return split;
}

}  // namespace nervedec::synth
