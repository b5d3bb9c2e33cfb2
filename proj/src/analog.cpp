#include "olfsim/analog.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "olfsim/error.hpp"

namespace olfsim::analog {

void LnaParams::validate() const {
  if (!std::isfinite(gain_db)) throw ValidationError("LNA gain must be finite");
  if (!(output_swing > 0.0) || !std::isfinite(output_swing)) throw ValidationError("LNA output swing must be > 0");
  if (!std::isfinite(offset)) throw ValidationError("LNA offset must be finite");
}

double LnaParams::linear_gain() const { return std::pow(10.0, gain_db / 20.0); }

std::vector<double> lna_amplify(std::span<const double> v_in, const LnaParams& p) {
  p.validate();
  const double g = p.linear_gain();
  std::vector<double> out(v_in.size());
  std::transform(v_in.begin(), v_in.end(), out.begin(),
                 [&](double v) { return std::clamp(p.offset + g * v, -p.output_swing, p.output_swing); });
  return out;
}

void AnalogNeuronParams::validate() const {
  if (!(c1 > 0.0)) throw ValidationError("neuron c1 must be > 0");
  if (!(v_thr > v_ref)) throw ValidationError("neuron v_thr must exceed v_ref");
  if (!(r_leak >= 0.0)) throw ValidationError("neuron r_leak must be >= 0");
  if (!(t_refractory >= 0.0)) throw ValidationError("neuron t_refractory must be >= 0");
  if (!std::isfinite(v_dc)) throw ValidationError("neuron v_dc must be finite");
}

namespace {
StepResult finish(double v_next, const AnalogNeuronParams& p) {
  v_next = std::max(0.0, v_next);
  if (v_next >= p.v_thr) return {p.v_ref, true};
  return {v_next, false};
}
}  // namespace

StepResult analog_lif_step(double v, double i_in, const AnalogNeuronParams& p, double dt) {
  return finish(v - p.r_leak * dt + i_in * dt / p.c1, p);
}

StepResult analog_lif_step_alpha(double v, double i_in, const AnalogNeuronParams& p, double dt) {
  if (v == 0.0) return analog_lif_step(v, i_in, p, dt);
  const double alpha = 1.0 - p.r_leak * dt / v;
  return finish(alpha * v + i_in * dt / p.c1, p);
}

AnalogNeuron::AnalogNeuron(const AnalogNeuronParams& p, double v0) : p_(p), v_(v0) { p_.validate(); }

bool AnalogNeuron::step(double i_in, double dt) {
  if (hold_ > 0.5 * dt) {
    hold_ -= dt;
    v_ = p_.v_ref;
    return false;
  }
  auto r = analog_lif_step(v_, i_in, p_, dt);
  v_ = r.v_next;
  if (r.spiked) hold_ = p_.t_refractory;
  return r.spiked;
}

std::vector<double> simulate_neuron(std::span<const double> i_in, const AnalogNeuronParams& p, double dt) {
  if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
  AnalogNeuron n(p);
  std::vector<double> spikes;
  for (std::size_t k = 0; k < i_in.size(); ++k)
    if (n.step(i_in[k], dt)) spikes.push_back(static_cast<double>(k + 1) * dt);
  return spikes;
}

void SynapseWord::validate() const {
  for (int b : s)
    if (b != 0 && b != 1) throw ValidationError("synapse switch must be 0 or 1");
  if (!(u_t > 0.0) || !(n_slope > 0.0) || !(i0 > 0.0) || !(l > 0.0))
    throw ValidationError("synapse constants must be positive");
  for (double w : width)
    if (!(w > 0.0)) throw ValidationError("synapse widths must be positive");
}

SynapseWord synapse_word_from_code(unsigned code, SynapseWord base) {
  if (code > 15) throw ValidationError("synapse code must fit in 4 bits, got " + std::to_string(code));
  for (int i = 0; i < 4; ++i) base.s[static_cast<std::size_t>(i)] = static_cast<int>((code >> i) & 1U);
  return base;
}

double synapse_current(const SynapseWord& word) {
  word.validate();
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (!word.s[i]) continue;
    sum += word.i0 * word.width[i] / word.l * std::exp((word.w_levels[i] - word.v_th_n) / (word.n_slope * word.u_t));
  }
  return sum;
}

void InjectionMap::validate() const {
  if (!(amps_per_volt >= 0.0) || !std::isfinite(amps_per_volt))
    throw ValidationError("injection gain must be finite and >= 0");
}

double InjectionMap::operator()(double v_dc, double v_lna) const { return amps_per_volt * std::max(0.0, v_dc + v_lna); }

std::vector<std::size_t> EncodeResult::spike_counts() const {
  std::vector<std::size_t> c;
  c.reserve(spike_times.size());
  for (const auto& s : spike_times) c.push_back(s.size());
  return c;
}

EncodeResult encode_pipeline(const std::vector<std::vector<double>>& traces, const EncodeConfig& cfg) {
  if (traces.size() != cfg.neurons.size())
    throw ValidationError("encode needs one neuron per channel: " + std::to_string(traces.size()) + " traces, " +
                          std::to_string(cfg.neurons.size()) + " neurons");
  if (!(cfg.dt > 0.0)) throw ValidationError("dt must be > 0");
  cfg.lna.validate();
  cfg.injection.validate();

  EncodeResult r;
  r.spike_times.resize(traces.size());
  std::vector<aer::SpikeEvent> events;
  for (std::size_t c = 0; c < traces.size(); ++c) {
    const auto& np = cfg.neurons[c];
    np.validate();
    auto amp = lna_amplify(traces[c], cfg.lna);
    for (double& v : amp) v = cfg.injection(np.v_dc, v);
    r.spike_times[c] = simulate_neuron(amp, np, cfg.dt);
    for (double t : r.spike_times[c]) events.push_back({t, static_cast<int>(c)});
  }
  std::sort(events.begin(), events.end(), [](const aer::SpikeEvent& a, const aer::SpikeEvent& b) {
    return a.time != b.time ? a.time < b.time : a.neuron_id < b.neuron_id;
  });
  r.aer = aer::aer_transmit(events, cfg.receiver);
  return r;
}

}  // namespace olfsim::analog
