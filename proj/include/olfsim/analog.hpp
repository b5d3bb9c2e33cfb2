#pragma once

// Behavioral model of the mixed-signal front end: LNA, analog LIF soma with a
// constant-rate leak, 4-bit subthreshold synapse DAC, and the encode pipeline
// that feeds spikes through the AER link.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "olfsim/aer.hpp"

namespace olfsim::analog {

struct LnaParams {
  double gain_db = 50.05;
  double output_swing = 0.1;  // V, output clamps to +-swing
  double offset = 0.0;        // V

  void validate() const;
  double linear_gain() const;
};

std::vector<double> lna_amplify(std::span<const double> v_in, const LnaParams& p);

// Defaults put the resting injection (v_dc through the injection map) at 95%
// of the leak so a silent input produces no spikes.
struct AnalogNeuronParams {
  double v_dc = 0.2;            // V
  double r_leak = 5.0;          // V/s
  double v_ref = 0.1;           // V
  double c1 = 1e-12;            // F
  double v_thr = 0.6;           // V
  double t_refractory = 2e-3;   // s

  void validate() const;
};

struct StepResult {
  double v_next = 0.0;
  bool spiked = false;
};

// Leak form: v - r_leak*dt + i*dt/c1, floored at 0. On a spike v_next is v_ref.
StepResult analog_lif_step(double v, double i_in, const AnalogNeuronParams& p, double dt);

// Same update written as alpha*v + i*dt/c1 with alpha = 1 - r_leak*dt/v.
// Undefined at v == 0; falls back to the leak form there.
StepResult analog_lif_step_alpha(double v, double i_in, const AnalogNeuronParams& p, double dt);

// Stateful soma that applies the refractory hold between steps.
class AnalogNeuron {
 public:
  explicit AnalogNeuron(const AnalogNeuronParams& p, double v0 = 0.0);
  bool step(double i_in, double dt);
  double v() const { return v_; }

 private:
  AnalogNeuronParams p_;
  double v_;
  double hold_ = 0.0;
};

// Spike times (s) for a sampled input current held constant over each step.
std::vector<double> simulate_neuron(std::span<const double> i_in, const AnalogNeuronParams& p, double dt);

struct SynapseWord {
  std::array<double, 4> w_levels{0.3, 0.3, 0.3, 0.3};  // V, per-bit gate voltages
  std::array<int, 4> s{0, 0, 0, 0};                    // switches, 0 or 1
  std::array<double, 4> width{1.0, 2.0, 4.0, 8.0};     // binary-weighted W_i
  double i0 = 1e-9;       // A
  double l = 1.0;         // shared channel length (same units as width)
  double v_th_n = 0.45;   // V
  double n_slope = 1.5;
  double u_t = 0.025;     // V

  void validate() const;
};

// Switches set from the low 4 bits of `code` (bit i drives s[i]).
SynapseWord synapse_word_from_code(unsigned code, SynapseWord base = SynapseWord{});

double synapse_current(const SynapseWord& word);

// i = amps_per_volt * max(0, v_dc + v_lna)
struct InjectionMap {
  double amps_per_volt = 2.375e-11;

  void validate() const;
  double operator()(double v_dc, double v_lna) const;
};

struct EncodeConfig {
  LnaParams lna;
  std::vector<AnalogNeuronParams> neurons;  // one per channel
  InjectionMap injection;
  double dt = 1e-3;
  aer::ReceiverModel receiver;
};

struct EncodeResult {
  std::vector<std::vector<double>> spike_times;  // per channel
  aer::AerLog aer;

  std::vector<std::size_t> spike_counts() const;
};

// traces[c] is the electrode voltage of channel c.
EncodeResult encode_pipeline(const std::vector<std::vector<double>>& traces, const EncodeConfig& cfg);

}  // namespace olfsim::analog
