#include "nervedec/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "nervedec/rng.hpp"

namespace nervedec::model {

void ModelConfig::validate() const {
  if (input_channels < 1 || seq_len < 1 || conv_out < 1 || gru_hidden < 1 || linear_hidden < 1)
    throw std::invalid_argument("ModelConfig: dimensions must be positive");
  if (conv_kernel < 1 || conv_kernel % 2 == 0)
    throw std::invalid_argument("ModelConfig: conv kernel must be odd");
  if (outputs != 5) throw std::invalid_argument("ModelConfig: outputs must be 5");
  if (dropout_p < 0.0 || dropout_p >= 1.0)
    throw std::invalid_argument("ModelConfig: dropout_p must be in [0, 1)");
  if (owned_count() == 0) throw std::invalid_argument("ModelConfig: finger_mask owns no finger");
}

int ModelConfig::owned_count() const {
  return static_cast<int>(std::count(finger_mask.begin(), finger_mask.end(), true));
}

std::int64_t parameter_count(const ModelConfig& c) {
  const std::int64_t conv = static_cast<std::int64_t>(c.conv_out) * c.input_channels * c.conv_kernel + c.conv_out;
  const std::int64_t h = c.gru_hidden;
  const std::int64_t enc = 3 * (h * c.conv_out + h * h + h);
  const std::int64_t dec = 3 * (h * h + h * h + h);
  const std::int64_t l1 = static_cast<std::int64_t>(c.linear_hidden) * h + c.linear_hidden;
  const std::int64_t l2 = static_cast<std::int64_t>(c.outputs) * c.linear_hidden + c.outputs;
  return conv + enc + dec + l1 + l2;
}

namespace {

void init_uniform(double* data, std::int64_t n, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (std::int64_t i = 0; i < n; ++i) data[i] = dist(rng);
}

GruParams make_gru(int input, int hidden) {
  GruParams g;
  g.wr = Matrix::Zero(hidden, input);
  g.wz = Matrix::Zero(hidden, input);
  g.wn = Matrix::Zero(hidden, input);
  g.ur = Matrix::Zero(hidden, hidden);
  g.uz = Matrix::Zero(hidden, hidden);
  g.un = Matrix::Zero(hidden, hidden);
  g.br = Vector::Zero(hidden);
  g.bz = Vector::Zero(hidden);
  g.bn = Vector::Zero(hidden);
  return g;
}

void init_gru(GruParams& g, int input, int hidden, std::mt19937_64& rng) {
  const double wb = 1.0 / std::sqrt(static_cast<double>(input));
  const double ub = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (Matrix* m : {&g.wr, &g.wz, &g.wn}) init_uniform(m->data(), m->size(), wb, rng);
  for (Matrix* m : {&g.ur, &g.uz, &g.un}) init_uniform(m->data(), m->size(), ub, rng);
  for (Vector* v : {&g.br, &g.bz, &g.bn}) init_uniform(v->data(), v->size(), ub, rng);
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.conv_w = Matrix::Zero(config.conv_out, config.input_channels * config.conv_kernel);
  p.conv_b = Vector::Zero(config.conv_out);
  p.enc = make_gru(config.conv_out, config.gru_hidden);
  p.dec = make_gru(config.gru_hidden, config.gru_hidden);
  p.l1_w = Matrix::Zero(config.linear_hidden, config.gru_hidden);
  p.l1_b = Vector::Zero(config.linear_hidden);
  p.l2_w = Matrix::Zero(config.outputs, config.linear_hidden);
  p.l2_b = Vector::Zero(config.outputs);

  auto rng = make_rng(seed);
  const double conv_bound = 1.0 / std::sqrt(static_cast<double>(config.input_channels * config.conv_kernel));
  init_uniform(p.conv_w.data(), p.conv_w.size(), conv_bound, rng);
  init_uniform(p.conv_b.data(), p.conv_b.size(), conv_bound, rng);
  init_gru(p.enc, config.conv_out, config.gru_hidden, rng);
  init_gru(p.dec, config.gru_hidden, config.gru_hidden, rng);
  const double l1_bound = 1.0 / std::sqrt(static_cast<double>(config.gru_hidden));
  init_uniform(p.l1_w.data(), p.l1_w.size(), l1_bound, rng);
  init_uniform(p.l1_b.data(), p.l1_b.size(), l1_bound, rng);
  const double l2_bound = 1.0 / std::sqrt(static_cast<double>(config.linear_hidden));
  init_uniform(p.l2_w.data(), p.l2_w.size(), l2_bound, rng);
  init_uniform(p.l2_b.data(), p.l2_b.size(), l2_bound, rng);
  return p;
}

namespace {

template <typename P>
std::vector<ParamBlock> blocks_of(P& p) {
  std::vector<ParamBlock> out;
  auto add = [&out](const char* name, auto& m) {
    out.push_back({name, m.data(), static_cast<std::int64_t>(m.size())});
  };
  add("conv_w", p.conv_w);
  add("conv_b", p.conv_b);
  add("enc.wr", p.enc.wr);
  add("enc.wz", p.enc.wz);
  add("enc.wn", p.enc.wn);
  add("enc.ur", p.enc.ur);
  add("enc.uz", p.enc.uz);
  add("enc.un", p.enc.un);
  add("enc.br", p.enc.br);
  add("enc.bz", p.enc.bz);
  add("enc.bn", p.enc.bn);
  add("dec.wr", p.dec.wr);
  add("dec.wz", p.dec.wz);
  add("dec.wn", p.dec.wn);
  add("dec.ur", p.dec.ur);
  add("dec.uz", p.dec.uz);
  add("dec.un", p.dec.un);
  add("dec.br", p.dec.br);
  add("dec.bz", p.dec.bz);
  add("dec.bn", p.dec.bn);
  add("l1_w", p.l1_w);
  add("l1_b", p.l1_b);
  add("l2_w", p.l2_w);
  add("l2_b", p.l2_b);
  return out;
}

}  // namespace

std::vector<ParamBlock> param_blocks(ModelParams& params) { return blocks_of(params); }
std::vector<ParamBlock> grad_blocks(Gradients& grads) { return blocks_of(grads); }

Gradients Gradients::zeros(const ModelConfig& c) {
  Gradients g;
  g.conv_w = Matrix::Zero(c.conv_out, c.input_channels * c.conv_kernel);
  g.conv_b = Vector::Zero(c.conv_out);
  g.enc = make_gru(c.conv_out, c.gru_hidden);
  g.dec = make_gru(c.gru_hidden, c.gru_hidden);
  g.l1_w = Matrix::Zero(c.linear_hidden, c.gru_hidden);
  g.l1_b = Vector::Zero(c.linear_hidden);
  g.l2_w = Matrix::Zero(c.outputs, c.linear_hidden);
  g.l2_b = Vector::Zero(c.outputs);
  return g;
}

struct ForwardCache {
  Matrix xcol;      // (in*kernel) x T, im2col of the input window
  Matrix conv_pre;  // conv_out x T
  Matrix conv_act;  // conv_out x T, post ReLU and dropout
  Matrix mask1;     // dropout multipliers for conv output

  struct GruCache {
    Matrix r, z, n, u, h;  // hidden x T; u = Un * h_prev
  };
  GruCache enc, dec;

  Vector dec_last_dropped;
  Vector mask2;
  Vector a1_pre, a1;
  Vector logits;
  std::array<double, 5> probs{};
};

namespace {

void fill_dropout_mask(double* data, std::int64_t n, double p, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double scale = 1.0 / (1.0 - p);
  for (std::int64_t i = 0; i < n; ++i) data[i] = u01(rng) < p ? 0.0 : scale;
}

void gru_forward(const GruParams& g, const Matrix& input, ForwardCache::GruCache& c) {
  const int hidden = static_cast<int>(g.ur.rows());
  const int steps = static_cast<int>(input.cols());
  c.r.resize(hidden, steps);
  c.z.resize(hidden, steps);
  c.n.resize(hidden, steps);
  c.u.resize(hidden, steps);
  c.h.resize(hidden, steps);
  Vector h_prev = Vector::Zero(hidden);
  for (int t = 0; t < steps; ++t) {
    const auto x = input.col(t);
    c.r.col(t) = (g.wr * x + g.ur * h_prev + g.br).unaryExpr([](double v) { return sigmoid(v); });
    c.z.col(t) = (g.wz * x + g.uz * h_prev + g.bz).unaryExpr([](double v) { return sigmoid(v); });
    c.u.col(t) = g.un * h_prev;
    c.n.col(t) = (g.wn * x + c.r.col(t).cwiseProduct(c.u.col(t)) + g.bn).array().tanh();
    c.h.col(t) = (Vector::Ones(hidden) - c.z.col(t)).cwiseProduct(c.n.col(t)) +
                 c.z.col(t).cwiseProduct(h_prev);
    h_prev = c.h.col(t);
  }
}

// Backward through one GRU over the full sequence. dh_out holds dL/dh_t
// contributions from consumers of each step's output; returns dL/dx per step.
Matrix gru_backward(const GruParams& g, const Matrix& input, const ForwardCache::GruCache& c,
                    const Matrix& dh_out, GruParams& grad) {
  const int hidden = static_cast<int>(g.ur.rows());
  const int steps = static_cast<int>(input.cols());
  Matrix dx(static_cast<int>(g.wr.cols()), steps);
  Vector dh = Vector::Zero(hidden);
  for (int t = steps - 1; t >= 0; --t) {
    dh += dh_out.col(t);
    const Vector h_prev = t > 0 ? Vector(c.h.col(t - 1)) : Vector(Vector::Zero(hidden));
    const auto r = c.r.col(t);
    const auto z = c.z.col(t);
    const auto n = c.n.col(t);
    const auto u = c.u.col(t);
    const auto x = input.col(t);

    const Vector dz = dh.cwiseProduct(h_prev - n);
    const Vector dn = dh.cwiseProduct(Vector::Ones(hidden) - z);
    Vector dh_prev = dh.cwiseProduct(z);

    const Vector dan = dn.cwiseProduct(Vector::Ones(hidden) - n.cwiseProduct(n));
    grad.wn += dan * x.transpose();
    grad.bn += dan;
    const Vector dr = dan.cwiseProduct(u);
    const Vector du = dan.cwiseProduct(r);
    grad.un += du * h_prev.transpose();
    dh_prev += g.un.transpose() * du;

    const Vector dar = dr.cwiseProduct(r).cwiseProduct(Vector::Ones(hidden) - r);
    grad.wr += dar * x.transpose();
    grad.br += dar;
    grad.ur += dar * h_prev.transpose();
    dh_prev += g.ur.transpose() * dar;

    const Vector daz = dz.cwiseProduct(z).cwiseProduct(Vector::Ones(hidden) - z);
    grad.wz += daz * x.transpose();
    grad.bz += daz;
    grad.uz += daz * h_prev.transpose();
    dh_prev += g.uz.transpose() * daz;

    dx.col(t) = g.wr.transpose() * dar + g.wz.transpose() * daz + g.wn.transpose() * dan;
    dh = dh_prev;
  }
  return dx;
}

void run_forward(const ModelParams& p, const WindowView& input, bool training,
                 std::uint64_t dropout_seed, ForwardCache& c) {
  const ModelConfig& cfg = p.config;
  if (input.rows != cfg.input_channels)
    throw std::invalid_argument("forward: input row count mismatch");
  if (input.end_col + 1 < cfg.seq_len)
    throw std::invalid_argument("forward: window shorter than seq_len");
  const int T = cfg.seq_len;
  const int K = cfg.conv_kernel;
  const int pad = (K - 1) / 2;

  c.xcol.resize(cfg.input_channels * K, T);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < cfg.input_channels; ++i) {
      for (int k = 0; k < K; ++k) {
        const int src = t + k - pad;
        c.xcol(i * K + k, t) = (src >= 0 && src < T) ? input.at(i, src, T) : 0.0;
      }
    }
  }

  c.conv_pre = p.conv_w * c.xcol;
  c.conv_pre.colwise() += p.conv_b;
  c.conv_act = c.conv_pre.cwiseMax(0.0);

  if (training && cfg.dropout_p > 0.0) {
    c.mask1.resize(cfg.conv_out, T);
    fill_dropout_mask(c.mask1.data(), c.mask1.size(), cfg.dropout_p, derive_seed(dropout_seed, 1));
    c.conv_act = c.conv_act.cwiseProduct(c.mask1);
  } else {
    c.mask1 = Matrix::Ones(cfg.conv_out, T);
  }

  gru_forward(p.enc, c.conv_act, c.enc);
  gru_forward(p.dec, c.enc.h, c.dec);

  const Vector dec_last = c.dec.h.col(T - 1);
  if (training && cfg.dropout_p > 0.0) {
    c.mask2.resize(cfg.gru_hidden);
    fill_dropout_mask(c.mask2.data(), c.mask2.size(), cfg.dropout_p, derive_seed(dropout_seed, 2));
    c.dec_last_dropped = dec_last.cwiseProduct(c.mask2);
  } else {
    c.mask2 = Vector::Ones(cfg.gru_hidden);
    c.dec_last_dropped = dec_last;
  }

  c.a1_pre = p.l1_w * c.dec_last_dropped + p.l1_b;
  c.a1 = c.a1_pre.cwiseMax(0.0);
  c.logits = p.l2_w * c.a1 + p.l2_b;
  for (int f = 0; f < cfg.outputs; ++f) c.probs[static_cast<std::size_t>(f)] = sigmoid(c.logits(f));
}

}  // namespace

std::array<double, 5> forward(const ModelParams& params, const WindowView& input, bool training,
                              std::uint64_t dropout_seed, ForwardCache* cache) {
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  run_forward(params, input, training, dropout_seed, c);
  return c.probs;
}

double compute_loss(const ModelParams& params, std::span<const Sample> batch, double weight_decay,
                    bool training, std::uint64_t dropout_seed, Gradients* grads) {
  if (batch.empty()) throw std::invalid_argument("compute_loss: empty batch");
  const ModelConfig& cfg = params.config;
  const int owned = cfg.owned_count();
  const double denom = static_cast<double>(batch.size()) * owned;
  const int T = cfg.seq_len;

  double loss = 0.0;
  ForwardCache cache;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    run_forward(params, batch[s].window, training, derive_seed(dropout_seed, s), cache);

    Vector dlogits = Vector::Zero(cfg.outputs);
    for (int f = 0; f < cfg.outputs; ++f) {
      if (!cfg.finger_mask[static_cast<std::size_t>(f)]) continue;
      const double z = cache.logits(f);
      const double y = batch[s].label[static_cast<std::size_t>(f)] ? 1.0 : 0.0;
      // Numerically stable BCE on the logit.
      loss += (std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)))) / denom;
      dlogits(f) = (sigmoid(z) - y) / denom;
    }

    if (!grads) continue;
    Gradients& g = *grads;

    g.l2_w += dlogits * cache.a1.transpose();
    g.l2_b += dlogits;
    const Vector da1 = params.l2_w.transpose() * dlogits;
    const Vector da1_pre =
        da1.cwiseProduct(cache.a1_pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    g.l1_w += da1_pre * cache.dec_last_dropped.transpose();
    g.l1_b += da1_pre;
    const Vector dd_dropped = params.l1_w.transpose() * da1_pre;
    const Vector dd_last = dd_dropped.cwiseProduct(cache.mask2);

    Matrix dec_dh = Matrix::Zero(cfg.gru_hidden, T);
    dec_dh.col(T - 1) = dd_last;
    const Matrix denc_h = gru_backward(params.dec, cache.enc.h, cache.dec, dec_dh, g.dec);
    const Matrix dconv_act = gru_backward(params.enc, cache.conv_act, cache.enc, denc_h, g.enc);

    const Matrix dconv_pre =
        dconv_act.cwiseProduct(cache.mask1)
            .cwiseProduct(cache.conv_pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    g.conv_w += dconv_pre * cache.xcol.transpose();
    g.conv_b += dconv_pre.rowwise().sum();
  }

  if (!std::isfinite(loss)) throw std::runtime_error("compute_loss: non-finite loss at output layer");

  if (weight_decay > 0.0) {
    auto blocks = param_blocks(const_cast<ModelParams&>(params));
    std::vector<ParamBlock> gblocks;
    if (grads) gblocks = grad_blocks(*grads);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      double sq = 0.0;
      for (std::int64_t i = 0; i < blocks[b].size; ++i) {
        const double w = blocks[b].data[i];
        sq += w * w;
        if (grads) gblocks[b].data[i] += 2.0 * weight_decay * w;
      }
      if (!std::isfinite(sq))
        throw std::runtime_error(std::string("compute_loss: non-finite weights in ") + blocks[b].name);
      loss += weight_decay * sq;
    }
  }
  return loss;
}

double PlateauScheduler::observe(double loss) {
  if (loss < best_) {
    best_ = loss;
    stale_ = 0;
  } else {
    ++stale_;
    if (stale_ >= patience_) {
      lr_ /= factor_;
      ++drops_;
      stale_ = 0;
    }
  }
  return lr_;
}

AdamOptimizer::AdamOptimizer(ModelParams& params, const TrainSpec& spec)
    : params_(params), beta1_(spec.beta1), beta2_(spec.beta2) {
  for (const auto& block : param_blocks(params_)) {
    m_.push_back(Eigen::VectorXd::Zero(block.size));
    v_.push_back(Eigen::VectorXd::Zero(block.size));
  }
}

void AdamOptimizer::step(Gradients& grads, double lr) {
  constexpr double eps = 1e-8;
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto pblocks = param_blocks(params_);
  auto gblocks = grad_blocks(grads);
  for (std::size_t b = 0; b < pblocks.size(); ++b) {
    double* w = pblocks[b].data;
    const double* g = gblocks[b].data;
    auto& m = m_[b];
    auto& v = v_[b];
    for (std::int64_t i = 0; i < pblocks[b].size; ++i) {
      m(i) = beta1_ * m(i) + (1.0 - beta1_) * g[i];
      v(i) = beta2_ * v(i) + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m(i) / bc1;
      const double vhat = v(i) / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void TrainSpec::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainSpec: epochs must be >= 1");
  if (batch < 1) throw std::invalid_argument("TrainSpec: batch must be >= 1");
  if (lr0 <= 0.0) throw std::invalid_argument("TrainSpec: lr0 must be positive");
  if (window_subsample < 1) throw std::invalid_argument("TrainSpec: window_subsample must be >= 1");
}

std::int64_t FeatureDataset::window_count(int seq_len, int subsample) const {
  std::int64_t n = 0;
  for (const auto& s : sessions) {
    for (int col = seq_len - 1; col < s.cols; col += subsample) ++n;
  }
  return n;
}

namespace {

struct WindowRef {
  int session;
  int col;
};

std::vector<WindowRef> enumerate_windows(const FeatureDataset& set, int seq_len, int subsample) {
  std::vector<WindowRef> refs;
  for (std::size_t s = 0; s < set.sessions.size(); ++s) {
    for (int col = seq_len - 1; col < set.sessions[s].cols; col += subsample) {
      refs.push_back({static_cast<int>(s), col});
    }
  }
  return refs;
}

}  // namespace

TrainResult train(ModelParams& params, const TrainSpec& spec, const FeatureDataset& train_set,
                  const FeatureDataset& val_set) {
  spec.validate();
  const ModelConfig& cfg = params.config;
  auto train_refs = enumerate_windows(train_set, cfg.seq_len, spec.window_subsample);
  auto val_refs = enumerate_windows(val_set, cfg.seq_len, spec.window_subsample);
  if (train_refs.empty()) throw std::invalid_argument("train: empty training set");

  auto rng = make_rng(derive_seed(spec.rng_seed, 0x7247));
  AdamOptimizer adam(params, spec);
  PlateauScheduler scheduler(spec.lr0, spec.plateau_patience, spec.lr_drop_factor);

  auto make_sample = [&](const FeatureDataset& set, const WindowRef& ref) {
    const auto& session = set.sessions[static_cast<std::size_t>(ref.session)];
    Sample sample;
    sample.window = session.window_at(ref.col, cfg.seq_len);
    sample.label = session.labels[static_cast<std::size_t>(ref.col)];
    return sample;
  };

  TrainResult result;
  double lr = spec.lr0;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    std::shuffle(train_refs.begin(), train_refs.end(), rng);

    double loss_sum = 0.0;
    std::int64_t batches = 0, correct = 0, counted = 0;
    Gradients grads = Gradients::zeros(cfg);
    for (std::size_t at = 0; at < train_refs.size(); at += static_cast<std::size_t>(spec.batch)) {
      const std::size_t take = std::min<std::size_t>(spec.batch, train_refs.size() - at);
      std::vector<Sample> batch;
      batch.reserve(take);
      for (std::size_t i = 0; i < take; ++i) batch.push_back(make_sample(train_set, train_refs[at + i]));

      for (auto& block : grad_blocks(grads)) std::fill(block.data, block.data + block.size, 0.0);
      const std::uint64_t seed = derive_seed(spec.rng_seed, (static_cast<std::uint64_t>(epoch) << 32) | at);
      loss_sum += compute_loss(params, batch, spec.weight_decay, true, seed, &grads);
      ++batches;
      adam.step(grads, lr);
    }

    // Accuracy on the training windows with the updated weights, dropout off.
    for (const auto& ref : train_refs) {
      const Sample s = make_sample(train_set, ref);
      const auto probs = forward(params, s.window);
      for (int f = 0; f < 5; ++f) {
        if (!cfg.finger_mask[static_cast<std::size_t>(f)]) continue;
        ++counted;
        if ((probs[static_cast<std::size_t>(f)] > 0.5) == s.label[static_cast<std::size_t>(f)]) ++correct;
      }
    }

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.train_loss = batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0;
    log.train_accuracy = counted > 0 ? static_cast<double>(correct) / static_cast<double>(counted) : 0.0;

    if (!val_refs.empty()) {
      double val_loss = 0.0;
      std::int64_t val_correct = 0, val_counted = 0, val_batches = 0;
      for (std::size_t at = 0; at < val_refs.size(); at += static_cast<std::size_t>(spec.batch)) {
        const std::size_t take = std::min<std::size_t>(spec.batch, val_refs.size() - at);
        std::vector<Sample> batch;
        for (std::size_t i = 0; i < take; ++i) batch.push_back(make_sample(val_set, val_refs[at + i]));
        val_loss += compute_loss(params, batch, 0.0, false, 0, nullptr);
        ++val_batches;
        for (const auto& s : batch) {
          const auto probs = forward(params, s.window);
          for (int f = 0; f < 5; ++f) {
            if (!cfg.finger_mask[static_cast<std::size_t>(f)]) continue;
            ++val_counted;
            if ((probs[static_cast<std::size_t>(f)] > 0.5) == s.label[static_cast<std::size_t>(f)]) ++val_correct;
          }
        }
      }
      log.val_loss = val_batches > 0 ? val_loss / static_cast<double>(val_batches) : 0.0;
      log.val_accuracy =
          val_counted > 0 ? static_cast<double>(val_correct) / static_cast<double>(val_counted) : 0.0;
    }
    result.log.push_back(log);

    lr = scheduler.observe(log.train_loss);
  }
  result.lr_drops = scheduler.drops();
  return result;
}

namespace {

constexpr char kCheckpointMagic[4] = {'N', 'D', 'E', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  os.write(kCheckpointMagic, 4);
  write_pod(os, kCheckpointVersion);
  const ModelConfig& c = params.config;
  for (std::int32_t v : {c.input_channels, c.seq_len, c.conv_out, c.conv_kernel, c.gru_hidden,
                         c.linear_hidden, c.outputs}) {
    write_pod(os, v);
  }
  write_pod(os, c.dropout_p);
  for (bool b : c.finger_mask) write_pod(os, static_cast<std::uint8_t>(b ? 1 : 0));
  write_pod(os, params.signal_scale);

  auto blocks = param_blocks(const_cast<ModelParams&>(params));
  std::uint64_t total = 0;
  for (const auto& b : blocks) total += static_cast<std::uint64_t>(b.size);
  write_pod(os, total);
  for (const auto& b : blocks) {
    os.write(reinterpret_cast<const char*>(b.data), b.size * static_cast<std::int64_t>(sizeof(double)));
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  std::uint32_t version = 0;
  read_pod(is, version);
  if (version != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: unsupported version in " + path);

  ModelConfig c;
  std::int32_t fields[7];
  for (auto& f : fields) read_pod(is, f);
  c.input_channels = fields[0];
  c.seq_len = fields[1];
  c.conv_out = fields[2];
  c.conv_kernel = fields[3];
  c.gru_hidden = fields[4];
  c.linear_hidden = fields[5];
  c.outputs = fields[6];
  read_pod(is, c.dropout_p);
  for (auto& b : c.finger_mask) {
    std::uint8_t v = 0;
    read_pod(is, v);
    b = v != 0;
  }

  ModelParams params = init_params(c, 0);
  read_pod(is, params.signal_scale);

  std::uint64_t total = 0;
  read_pod(is, total);
  auto blocks = param_blocks(params);
  std::uint64_t expect = 0;
  for (const auto& b : blocks) expect += static_cast<std::uint64_t>(b.size);
  if (total != expect) throw std::runtime_error("load_checkpoint: parameter count mismatch");
  for (auto& b : blocks) {
    is.read(reinterpret_cast<char*>(b.data), b.size * static_cast<std::int64_t>(sizeof(double)));
  }
  if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path);
  return params;
}

}  // namespace nervedec::model
