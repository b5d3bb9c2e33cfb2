#include "olfsim/channel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <mutex>
#include <thread>

#include "olfsim/error.hpp"

namespace olfsim::channel {

namespace {

constexpr std::uint64_t kOnsetStream = 0xffffffffULL;

void require_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string(name) + " must lie in [0,1]");
}

}  // namespace

void MarkovParams::validate() const {
  require_probability(p_close, "p_close");
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  if (!(sigma_open >= 0.0) || !(sigma_closed >= 0.0)) throw ValidationError("current s.d. must be >= 0");
}

void NoiseParams::validate() const {
  if (!(sigma_target >= 0.0)) throw ValidationError("noise sigma_target must be >= 0");
  if (!(cutoff_hz > 0.0)) throw ValidationError("noise cutoff_hz must be positive");
}

void ElectrodeParams::validate() const {
  if (!(r_gap > 0.0 && c_dl > 0.0 && r_t > 0.0)) throw ValidationError("electrode constants must be positive");
}

std::vector<ChannelState> simulate_channel_states(double p_open, double p_close, std::size_t steps, Rng& rng) {
  require_probability(p_open, "p_open");
  require_probability(p_close, "p_close");
  std::vector<ChannelState> states(steps, ChannelState::Closed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t t = 1; t < steps; ++t) {
    double r = u(rng);
    if (states[t - 1] == ChannelState::Closed)
      states[t] = r < p_open ? ChannelState::Open : ChannelState::Closed;
    else
      states[t] = r < p_close ? ChannelState::Closed : ChannelState::Open;
  }
  return states;
}

std::vector<double> states_to_current(const std::vector<ChannelState>& states, const MarkovParams& mp, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<double> out(states.size());
  for (std::size_t t = 0; t < states.size(); ++t) {
    double z = n01(rng);
    out[t] = states[t] == ChannelState::Open ? mp.mu_open + mp.sigma_open * z : mp.mu_closed + mp.sigma_closed * z;
  }
  return out;
}

std::vector<double> generate_noise(std::size_t steps, const NoiseParams& np, double dt, Rng& rng) {
  np.validate();
  std::vector<double> y(steps, 0.0);
  if (np.sigma_target == 0.0 || steps == 0) return y;
  const double a = std::exp(-2.0 * std::numbers::pi * np.cutoff_hz * dt);
  std::normal_distribution<double> n01(0.0, 1.0);
  double state = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    double x = n01(rng);
    state = t == 0 ? x : a * state + (1.0 - a) * x;
    y[t] = state;
  }
  double sq = 0.0;
  for (double v : y) sq += v * v;
  double rms = std::sqrt(sq / static_cast<double>(steps));
  if (rms > 0.0) {
    double k = np.sigma_target / rms;
    for (double& v : y) v *= k;
  }
  return y;
}

CellCurrent make_cell_current(double d_odor_or, int n_orco, std::size_t t_total, std::size_t t_data,
                              const MarkovParams& mp, const NoiseParams& np, Rng& rng,
                              std::optional<std::size_t> onset) {
  mp.validate();
  np.validate();
  if (!(d_odor_or >= 0.0 && d_odor_or <= 1.0)) throw ValidationError("odor/receptor response must lie in [0,1]");
  if (n_orco < 1) throw ValidationError("n_orco must be >= 1");
  if (t_data > t_total) throw ValidationError("t_data exceeds t_total");
  if (onset && *onset + t_data > t_total) throw ValidationError("onset places data segment past trace end");

  CellCurrent cell;
  if (onset) {
    cell.onset_index = *onset;
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, t_total - t_data);
    cell.onset_index = pick(rng);
  }
  const double p_open = mp.p_close * d_odor_or;
  std::vector<double> data(t_data, 0.0);
  for (int k = 0; k < n_orco; ++k) {
    auto states = simulate_channel_states(p_open, mp.p_close, t_data, rng);
    auto cur = states_to_current(states, mp, rng);
    for (std::size_t t = 0; t < t_data; ++t) data[t] += cur[t];
  }
  cell.current = generate_noise(t_total, np, mp.dt, rng);
  for (std::size_t t = 0; t < t_data; ++t) cell.current[cell.onset_index + t] += data[t];
  return cell;
}

std::vector<double> electrode_response(const std::vector<double>& current_pa, const ElectrodeParams& ep, double dt) {
  ep.validate();
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  const double decay = std::exp(-dt / ep.tau());
  const double gain = ep.r_parallel() * (1.0 - decay) * 1e-12;
  std::vector<double> v(current_pa.size());
  double state = 0.0;
  for (std::size_t k = 0; k < current_pa.size(); ++k) {
    state = decay * state + gain * current_pa[k];
    v[k] = state;
  }
  return v;
}

MarkovParams fit_markov_params(const std::vector<double>& current_pa, double threshold_pa, double dt) {
  if (current_pa.size() < 2) throw ValidationError("need at least 2 samples to fit gating");
  double sum_o = 0, sq_o = 0, sum_c = 0, sq_c = 0;
  std::size_t n_o = 0, n_c = 0, open_with_next = 0, closings = 0;
  for (std::size_t t = 0; t < current_pa.size(); ++t) {
    bool open = current_pa[t] > threshold_pa;
    double x = current_pa[t];
    if (open) {
      sum_o += x, sq_o += x * x, ++n_o;
      if (t + 1 < current_pa.size()) {
        ++open_with_next;
        if (current_pa[t + 1] <= threshold_pa) ++closings;
      }
    } else {
      sum_c += x, sq_c += x * x, ++n_c;
    }
  }
  if (n_o < 2 || n_c < 2 || open_with_next == 0) throw ValidationError("segment lacks both open and closed dwells");
  auto sd = [](double s, double q, std::size_t n) {
    double m = s / static_cast<double>(n);
    return std::sqrt(std::max(0.0, (q - static_cast<double>(n) * m * m) / static_cast<double>(n - 1)));
  };
  MarkovParams mp;
  mp.dt = dt;
  mp.p_close = static_cast<double>(closings) / static_cast<double>(open_with_next);
  mp.mu_open = sum_o / static_cast<double>(n_o);
  mp.sigma_open = sd(sum_o, sq_o, n_o);
  mp.mu_closed = sum_c / static_cast<double>(n_c);
  mp.sigma_closed = sd(sum_c, sq_c, n_c);
  return mp;
}

SensorTrace simulate_sensor_trace(double d_odor_or, const std::string& odor_id, const std::string& or_id,
                                  const GeneratorConfig& cfg, std::size_t onset, Rng& rng) {
  auto cell = make_cell_current(d_odor_or, cfg.n_orco, cfg.t_total, cfg.t_data, cfg.markov, cfg.noise, rng, onset);
  auto v = electrode_response(cell.current, cfg.electrode, cfg.markov.dt);
  SensorTrace tr;
  tr.voltage.assign(v.begin(), v.end());
  tr.dt = cfg.markov.dt;
  tr.onset_index = cell.onset_index;
  tr.data_length = cfg.t_data;
  tr.odor_id = odor_id;
  tr.or_id = or_id;
  tr.n_orco = cfg.n_orco;
  return tr;
}

Dataset generate_dataset(const door::ResponseMatrix& responses, const GeneratorConfig& cfg,
                         std::uint64_t master_seed) {
  if (responses.cols() == 0) throw ValidationError("receptor panel is empty");
  if (responses.rows() == 0) throw ValidationError("odor set is empty");
  if (responses.missing_count() > 0) throw ValidationError("response table has NA cells; impute first");
  if (cfg.samples_per_class == 0) throw ValidationError("samples_per_class must be >= 1");
  if (cfg.t_data > cfg.t_total) throw ValidationError("t_data exceeds t_total");
  cfg.markov.validate();
  cfg.noise.validate();
  cfg.electrode.validate();

  Dataset ds;
  ds.dt = cfg.markov.dt;
  ds.or_panel = responses.or_ids();
  ds.class_labels = responses.odor_ids();
  ds.n_orco = cfg.n_orco;
  ds.master_seed = master_seed;
  ds.t_total = cfg.t_total;
  ds.t_data = cfg.t_data;

  const std::size_t n_classes = responses.rows();
  const std::size_t total = n_classes * cfg.samples_per_class;
  ds.samples.resize(total);

  auto build = [&](std::size_t idx) {
    const std::size_t c = idx / cfg.samples_per_class;
    const std::size_t s = idx % cfg.samples_per_class;
    Rng onset_rng = derive_rng(master_seed, {c, s, kOnsetStream});
    std::uniform_int_distribution<std::size_t> pick(0, cfg.t_total - cfg.t_data);
    const std::size_t onset = pick(onset_rng);
    Sample& out = ds.samples[idx];
    out.label = static_cast<std::uint32_t>(c);
    out.onset = onset;
    out.traces.resize(responses.cols() * cfg.t_total);
    for (std::size_t o = 0; o < responses.cols(); ++o) {
      Rng rng = derive_rng(master_seed, {c, s, o});
      auto tr = simulate_sensor_trace(responses.at(c, o), ds.class_labels[c], ds.or_panel[o], cfg, onset, rng);
      std::copy(tr.voltage.begin(), tr.voltage.end(), out.traces.begin() + static_cast<std::ptrdiff_t>(o * cfg.t_total));
    }
  };

  const unsigned n_threads = std::max(1u, cfg.threads);
  if (n_threads == 1) {
    for (std::size_t i = 0; i < total; ++i) build(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mu;
    for (unsigned t = 0; t < n_threads; ++t) {
      pool.emplace_back([&] {
        try {
          for (std::size_t i = next++; i < total; i = next++) build(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  double sq = 0.0;
  std::size_t count = 0;
  for (const auto& smp : ds.samples) {
    for (float v : smp.traces) sq += static_cast<double>(v) * static_cast<double>(v);
    count += smp.traces.size();
  }
  ds.input_rms = count ? std::sqrt(sq / static_cast<double>(count)) : 0.0;
  return ds;
}

}  // namespace olfsim::channel
