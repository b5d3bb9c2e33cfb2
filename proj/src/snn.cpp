#include "olfsim/snn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#if defined(__SSE2__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#endif

#include "olfsim/error.hpp"
#include "olfsim/rng.hpp"

namespace olfsim::snn {

namespace {

enum StreamTag : std::uint64_t { kInit = 1, kSplit = 2, kShuffle = 3 };

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
struct Net {
  Mat<S> w_in, w_out;
  S alpha, v_thr, in_gain, slope;
  SpikeMode mode;
};

template <class S>
struct Trajectory {
  Mat<S> u_h, s_h, u_o, s_o;
};

// Simulates one layer over all steps given its per-step drive (n x T).
template <class S>
void run_layer(const Mat<S>& drive, const Net<S>& net, Mat<S>& u, Mat<S>& s) {
  const auto n = drive.rows(), T = drive.cols();
  u.resize(n, T);
  s.resize(n, T);
  std::vector<S> v_buf(static_cast<std::size_t>(n), S(0));
  S* __restrict__ v = v_buf.data();
  const S* __restrict__ d = drive.data();
  S* __restrict__ up = u.data();
  S* __restrict__ sp = s.data();
  const S alpha = net.alpha, thr = net.v_thr, slope = net.slope;
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::Index o = t * n;
    if (net.mode == SpikeMode::Hard) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const S ui = alpha * v[i] + d[o + i];
        const S si = ui >= thr ? S(1) : S(0);
        up[o + i] = ui;
        sp[o + i] = si;
        v[i] = ui * (S(1) - si);
      }
    } else {
      for (Eigen::Index i = 0; i < n; ++i) {
        const S ui = alpha * v[i] + d[o + i];
        const S si = S(1) / (S(1) + std::exp(-slope * (ui - thr)));
        up[o + i] = ui;
        sp[o + i] = si;
        v[i] = ui * (S(1) - si);
      }
    }
  }
}

// Reverse-time pass of one layer. g_s holds dL/ds(t) per column, or a single
// column reused for every step when it has one column. The result is dL/du(t),
// which is also dL/d(drive)(t).
template <class S>
void backprop_layer(const Mat<S>& u, const Mat<S>& s, const Mat<S>& g_s, const Net<S>& net, Mat<S>& dsig,
                    Mat<S>& g_u) {
  const auto n = u.rows(), T = u.cols();
  const Eigen::Index gs_stride = g_s.cols() == 1 ? 0 : n;
  dsig.resize(n, T);
  {
    auto sig = (S(1) / (S(1) + (-net.slope * (u.array() - net.v_thr)).exp()));
    dsig.array() = net.slope * sig * (S(1) - sig);
  }
  g_u.resize(n, T);
  std::vector<S> gv_buf(static_cast<std::size_t>(n), S(0));
  S* __restrict__ gv = gv_buf.data();
  const S* __restrict__ up = u.data();
  const S* __restrict__ sp = s.data();
  const S* __restrict__ dp = dsig.data();
  const S* __restrict__ gp = g_s.data();
  S* __restrict__ out = g_u.data();
  const S alpha = net.alpha;
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const Eigen::Index o = t * n;
    const S* g = gp + t * gs_stride;
    for (Eigen::Index i = 0; i < n; ++i) {
      const S gvi = gv[i];
      const S du = dp[o + i] * (g[i] - gvi * up[o + i]) + gvi * (S(1) - sp[o + i]);
      out[o + i] = du;
      gv[i] = alpha * du;
    }
  }
}

// Buffers reused across samples; sized on first use.
template <class S>
struct Workspace {
  Trajectory<S> tr;
  Mat<S> x, drive, dsig, g_uo, g_sh, g_uh;
};

template <class S>
void simulate(const Net<S>& net, Workspace<S>& ws) {
  ws.drive.noalias() = net.w_in * ws.x;
  ws.drive *= net.in_gain;
  run_layer<S>(ws.drive, net, ws.tr.u_h, ws.tr.s_h);
  ws.drive.noalias() = net.w_out * ws.tr.s_h;
  run_layer<S>(ws.drive, net, ws.tr.u_o, ws.tr.s_o);
}

struct LossTerms {
  double loss;
  Eigen::VectorXd grad_counts;
};

LossTerms softmax_xent(const Eigen::VectorXd& counts, int label, double logit_scale) {
  Eigen::VectorXd z = logit_scale * counts;
  double zmax = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - zmax).exp();
  double sum = e.sum();
  Eigen::VectorXd p = e / sum;
  double loss = -(z(label) - zmax - std::log(sum));
  p(label) -= 1.0;
  return {loss, logit_scale * p};
}

// ws.x holds the scaled input.
template <class S>
double loss_and_grad_impl(const Net<S>& net, Workspace<S>& ws, int label, double logit_scale, Mat<S>* g_in,
                          Mat<S>* g_out, Eigen::VectorXd* counts_out) {
  simulate<S>(net, ws);
  const auto& tr = ws.tr;
  Eigen::VectorXd counts = tr.s_o.rowwise().sum().template cast<double>();
  if (counts_out) *counts_out = counts;
  auto terms = softmax_xent(counts, label, logit_scale);
  if (!g_in) return terms.loss;

  const Mat<S> gc = terms.grad_counts.cast<S>();
  backprop_layer<S>(tr.u_o, tr.s_o, gc, net, ws.dsig, ws.g_uo);
  g_out->noalias() = ws.g_uo * tr.s_h.transpose();
  ws.g_sh.noalias() = net.w_out.transpose() * ws.g_uo;
  backprop_layer<S>(tr.u_h, tr.s_h, ws.g_sh, net, ws.dsig, ws.g_uh);
  g_in->noalias() = ws.g_uh * ws.x.transpose();
  *g_in *= net.in_gain;
  return terms.loss;
}

template <class S>
Net<S> make_net(const SnnModel& m, double slope, SpikeMode mode) {
  Net<S> net;
  net.w_in = m.w_in.cast<S>();
  net.w_out = m.w_out.cast<S>();
  net.alpha = static_cast<S>(m.alpha);
  net.v_thr = static_cast<S>(m.v_thr);
  net.in_gain = static_cast<S>(m.dt / m.c);
  net.slope = static_cast<S>(slope);
  net.mode = mode;
  return net;
}

void require_codebook(const Matrix& w, double scale, int bits, const char* which) {
  auto book = codebook(scale, bits);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    double x = w.data()[i];
    if (!std::binary_search(book.begin(), book.end(), x))
      throw ValidationError(std::string("quantized model weight outside codebook in ") + which);
  }
}

using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajorF> sample_map(const channel::Dataset& ds, std::size_t index) {
  const auto& s = ds.samples.at(index);
  return {s.traces.data(), static_cast<Eigen::Index>(ds.n_or()), static_cast<Eigen::Index>(ds.t_total)};
}

std::uint64_t run_seed(std::uint64_t seed, int run) {
  return splitmix64(seed ^ splitmix64(0x5eed0000ULL + static_cast<std::uint64_t>(run)));
}

}  // namespace

void SnnModel::validate() const {
  if (n_in < 1 || n_hidden < 1 || n_out < 1) throw ValidationError("layer sizes must be positive");
  if (w_in.rows() != n_hidden || w_in.cols() != n_in) throw ValidationError("input weight shape mismatch");
  if (w_out.rows() != n_out || w_out.cols() != n_hidden) throw ValidationError("output weight shape mismatch");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in (0,1]");
  if (!(v_thr > 0.0)) throw ValidationError("v_thr must be positive");
  if (!(c > 0.0) || !(dt > 0.0)) throw ValidationError("C and dt must be positive");
  if (quant_bits < 0 || quant_bits > 16) throw ValidationError("quant_bits must lie in [0,16]");
}

SnnModel make_model(int n_in, int n_hidden, int n_out) {
  SnnModel m;
  m.n_in = n_in;
  m.n_hidden = n_hidden;
  m.n_out = n_out;
  m.w_in = Matrix::Zero(n_hidden, n_in);
  m.w_out = Matrix::Zero(n_out, n_hidden);
  return m;
}

std::pair<Vector, Vector> lif_step(const Vector& v, const Vector& spikes_in, const Matrix& w, const Vector& i_dc,
                                   const SnnModel& model) {
  if (w.rows() != v.size() || w.cols() != spikes_in.size() || i_dc.size() != v.size())
    throw ValidationError("lif_step dimension mismatch");
  Vector next = model.alpha * v + w * spikes_in + i_dc * (model.dt / model.c);
  Vector spikes = (next.array() >= model.v_thr).cast<double>().matrix();
  next = next.cwiseProduct((1.0 - spikes.array()).matrix());
  return {next, spikes};
}

namespace {
void check_runnable(const SnnModel& model) {
  model.validate();
  if (model.quant_bits > 0) {
    require_codebook(model.w_in, model.scale_in, model.quant_bits, "w_in");
    require_codebook(model.w_out, model.scale_out, model.quant_bits, "w_out");
  }
}

// ws.x holds the scaled input.
Eigen::VectorXi spike_counts(const Net<double>& net, Workspace<double>& ws) {
  simulate<double>(net, ws);
  return ws.tr.s_o.rowwise().sum().cast<int>();
}
}  // namespace

Eigen::VectorXi forward(const SnnModel& model, const Matrix& trace) {
  check_runnable(model);
  if (trace.rows() != model.n_in)
    throw ValidationError("trace has " + std::to_string(trace.rows()) + " rows, model expects " +
                          std::to_string(model.n_in));
  Workspace<double> ws;
  ws.x = model.input_scale * trace;
  return spike_counts(make_net<double>(model, 1.0, SpikeMode::Hard), ws);
}

int classify(const Eigen::VectorXi& counts) {
  if (counts.size() == 0) throw ValidationError("empty count vector");
  int best = 0;
  for (int k = 1; k < counts.size(); ++k)
    if (counts(k) > counts(best)) best = k;
  return best;
}

SurrogateSpike surrogate_spike(double x, double slope) {
  if (!(slope > 0.0)) throw ValidationError("surrogate slope must be positive");
  double sig = 1.0 / (1.0 + std::exp(-slope * x));
  return {x >= 0.0 ? 1.0 : 0.0, slope * sig * (1.0 - sig)};
}

std::vector<double> codebook(double scale, int bits) {
  const long levels = 1L << bits;
  const double step = 2.0 * scale / static_cast<double>(levels - 1);
  std::vector<double> book(static_cast<std::size_t>(levels));
  for (long k = 0; k < levels; ++k) book[static_cast<std::size_t>(k)] = -scale + static_cast<double>(k) * step;
  std::sort(book.begin(), book.end());
  return book;
}

Matrix quantize_weights(const Matrix& w, int bits, double* scale_out) {
  if (bits < 1) throw ValidationError("quantization needs at least 1 bit");
  const double scale = w.size() ? w.cwiseAbs().maxCoeff() : 0.0;
  if (scale_out) *scale_out = scale;
  if (scale == 0.0) return Matrix::Zero(w.rows(), w.cols());
  const long levels = 1L << bits;
  const double step = 2.0 * scale / static_cast<double>(levels - 1);
  Matrix q(w.rows(), w.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    long k = std::lround((w.data()[i] + scale) / step);
    k = std::clamp(k, 0L, levels - 1);
    q.data()[i] = -scale + static_cast<double>(k) * step;
  }
  return q;
}

LossAndGrad loss_and_gradient(const SnnModel& model, const Matrix& trace, int label, double surrogate_slope,
                              double logit_scale, SpikeMode mode) {
  model.validate();
  if (label < 0 || label >= model.n_out) throw ValidationError("label out of range");
  auto net = make_net<double>(model, surrogate_slope, mode);
  Workspace<double> ws;
  ws.x = model.input_scale * trace;
  LossAndGrad out;
  out.loss = loss_and_grad_impl<double>(net, ws, label, logit_scale, &out.grad_in, &out.grad_out, &out.counts);
  return out;
}

double loss_only(const SnnModel& model, const Matrix& trace, int label, double surrogate_slope, double logit_scale,
                 SpikeMode mode) {
  auto net = make_net<double>(model, surrogate_slope, mode);
  Workspace<double> ws;
  ws.x = model.input_scale * trace;
  return loss_and_grad_impl<double>(net, ws, label, logit_scale, nullptr, nullptr, nullptr);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (runs < 1) throw ValidationError("runs must be >= 1");
  if (split.train < 0 || split.validation < 0 || split.test < 0 ||
      std::abs(split.train + split.validation + split.test - 1.0) > 1e-9)
    throw ValidationError("split fractions must be non-negative and sum to 1");
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(surrogate_slope > 0.0)) throw ValidationError("surrogate slope must be positive");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (n_hidden < 1) throw ValidationError("n_hidden must be >= 1");
}

Partition split_dataset(const channel::Dataset& ds, const Split& split, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(ds.class_labels.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) by_class.at(ds.samples[i].label).push_back(i);
  Partition p;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    Rng rng = derive_rng(seed, {kSplit, c});
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = static_cast<double>(idx.size());
    auto n_train = static_cast<std::size_t>(std::lround(split.train * n));
    auto n_val = std::min(idx.size() - n_train, static_cast<std::size_t>(std::lround(split.validation * n)));
    p.train.insert(p.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    p.validation.insert(p.validation.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                        idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    p.test.insert(p.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  }
  if (p.train.empty() || p.validation.empty() || p.test.empty())
    throw ValidationError("dataset split leaves an empty partition (train " + std::to_string(p.train.size()) +
                          ", validation " + std::to_string(p.validation.size()) + ", test " +
                          std::to_string(p.test.size()) + ")");
  return p;
}

Matrix sample_matrix(const channel::Dataset& ds, std::size_t index) { return sample_map(ds, index).cast<double>(); }

Evaluation evaluate(const SnnModel& model, const channel::Dataset& ds, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ValidationError("cannot evaluate an empty partition");
  const auto k = static_cast<std::size_t>(model.n_out);
  Evaluation ev;
  ev.confusion.assign(k, std::vector<int>(k, 0));
  check_runnable(model);
  if (static_cast<std::size_t>(model.n_in) != ds.n_or()) throw ValidationError("model input size does not match dataset");
  const auto net = make_net<double>(model, 1.0, SpikeMode::Hard);
  Workspace<double> ws;
  int correct = 0;
  for (auto i : indices) {
    ws.x = sample_map(ds, i).cast<double>();
    ws.x *= model.input_scale;
    int pred = classify(spike_counts(net, ws));
    int truth = static_cast<int>(ds.samples[i].label);
    ev.confusion.at(static_cast<std::size_t>(truth)).at(static_cast<std::size_t>(pred))++;
    correct += pred == truth;
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(indices.size());
  return ev;
}

namespace {

struct Adam {
  Matrix m, v;
  long t = 0;
  void step(Matrix& w, const Matrix& g, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if (m.size() == 0) {
      m = Matrix::Zero(w.rows(), w.cols());
      v = Matrix::Zero(w.rows(), w.cols());
    }
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g.cwiseProduct(g);
    const double c1 = 1 - std::pow(b1, static_cast<double>(t)), c2 = 1 - std::pow(b2, static_cast<double>(t));
    w.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

// Far from threshold the surrogate derivative underflows and BPTT fills with
// subnormal floats, which are very slow on x86. Flushing them to zero changes
// gradients only below ~1e-38.
class FlushDenormals {
 public:
  FlushDenormals() {
#if defined(__SSE2__)
    saved_ = _mm_getcsr();
    _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
    _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
#endif
  }
  ~FlushDenormals() {
#if defined(__SSE2__)
    _mm_setcsr(saved_);
#endif
  }
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
  unsigned saved_ = 0;
};

void refresh_quantized(SnnModel& model, const Matrix& shadow_in, const Matrix& shadow_out) {
  if (model.quant_bits > 0) {
    model.w_in = quantize_weights(shadow_in, model.quant_bits, &model.scale_in);
    model.w_out = quantize_weights(shadow_out, model.quant_bits, &model.scale_out);
  } else {
    model.w_in = shadow_in;
    model.w_out = shadow_out;
    model.scale_in = model.scale_out = 0.0;
  }
}

}  // namespace

TrainResult train(const channel::Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  FlushDenormals ftz;
  if (ds.samples.empty()) throw ValidationError("dataset has no samples");
  std::vector<int> per_class(ds.class_labels.size(), 0);
  for (const auto& s : ds.samples) per_class.at(s.label)++;
  for (std::size_t c = 0; c < per_class.size(); ++c)
    if (per_class[c] == 0) throw ValidationError("class '" + ds.class_labels[c] + "' has no samples");

  TrainResult result;
  result.partition = split_dataset(ds, cfg.split, cfg.seed);

  SnnModel model = make_model(static_cast<int>(ds.n_or()), cfg.n_hidden, static_cast<int>(ds.class_labels.size()));
  model.alpha = cfg.alpha;
  model.v_thr = cfg.v_thr;
  model.c = cfg.c;
  model.dt = cfg.dt;
  model.quant_bits = cfg.quant_bits;
  model.input_scale = ds.input_rms > 0.0 ? 1.0 / ds.input_rms : 1.0;
  model.validate();

  Rng init = derive_rng(cfg.seed, {kInit});
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix shadow_in(model.n_hidden, model.n_in), shadow_out(model.n_out, model.n_hidden);
  const double sd_in = cfg.init_gain_in / std::sqrt(static_cast<double>(model.n_in));
  const double sd_out = cfg.init_gain_out / std::sqrt(static_cast<double>(model.n_hidden));
  for (Eigen::Index i = 0; i < shadow_in.size(); ++i) shadow_in.data()[i] = sd_in * n01(init);
  for (Eigen::Index i = 0; i < shadow_out.size(); ++i) shadow_out.data()[i] = sd_out * n01(init);
  refresh_quantized(model, shadow_in, shadow_out);

  Adam adam_in, adam_out;
  Workspace<float> ws;
  Mat<float> gi, go;
  Eigen::VectorXd counts;
  const float input_scale = static_cast<float>(model.input_scale);
  double best_val = -1.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = result.partition.train;
    Rng shuf = derive_rng(cfg.seed, {kShuffle, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), shuf);

    double loss_sum = 0.0;
    int correct = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      auto net = make_net<float>(model, cfg.surrogate_slope, SpikeMode::Hard);
      Matrix g_in = Matrix::Zero(model.n_hidden, model.n_in), g_out = Matrix::Zero(model.n_out, model.n_hidden);
      for (std::size_t k = b; k < e; ++k) {
        const auto idx = order[k];
        ws.x = sample_map(ds, idx);
        ws.x *= input_scale;
        const int label = static_cast<int>(ds.samples[idx].label);
        loss_sum += loss_and_grad_impl<float>(net, ws, label, cfg.logit_scale, &gi, &go, &counts);
        Eigen::VectorXi ic = counts.cast<int>();
        correct += classify(ic) == label;
        g_in += gi.cast<double>();
        g_out += go.cast<double>();
      }
      const double inv = 1.0 / static_cast<double>(e - b);
      g_in *= inv;
      g_out *= inv;
      if (cfg.optimizer == Optimizer::Adam) {
        adam_in.step(shadow_in, g_in, cfg.learning_rate);
        adam_out.step(shadow_out, g_out, cfg.learning_rate);
      } else {
        shadow_in -= cfg.learning_rate * g_in;
        shadow_out -= cfg.learning_rate * g_out;
      }
      refresh_quantized(model, shadow_in, shadow_out);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    rec.validation_accuracy = evaluate(model, ds, result.partition.validation).accuracy;
    result.history.push_back(rec);
    if (rec.validation_accuracy > best_val) {
      best_val = rec.validation_accuracy;
      result.best_epoch = epoch;
      result.model = model;
      result.shadow_in = shadow_in;
      result.shadow_out = shadow_out;
    }
  }
  result.test = evaluate(result.model, ds, result.partition.test);
  return result;
}

std::vector<TrainResult> train_runs(const channel::Dataset& ds, const TrainConfig& cfg, unsigned threads) {
  cfg.validate();
  std::vector<TrainResult> results(static_cast<std::size_t>(cfg.runs));
  auto one = [&](std::size_t r) {
    TrainConfig c = cfg;
    c.seed = run_seed(cfg.seed, static_cast<int>(r));
    results[r] = train(ds, c);
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cfg.runs)));
  if (threads == 1) {
    for (std::size_t r = 0; r < results.size(); ++r) one(r);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      try {
        for (std::size_t r = next++; r < results.size(); r = next++) one(r);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace olfsim::snn
