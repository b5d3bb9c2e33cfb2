#pragma once

// Synthetic electrode traces: two-state Markov gating per Orco-OR complex,
// Gaussian state currents, low-pass filtered baseline noise, random odor onset
// and an RC electrode.
//
// Units: currents in picoamperes, voltages in volts, dt in seconds.
// Outward (depolarizing) channel current is positive.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "olfsim/door.hpp"
#include "olfsim/rng.hpp"

namespace olfsim::channel {

struct MarkovParams {
  double p_close = 0.1;  // per step
  double dt = 1e-3;
  double mu_open = 2.0;  // pA
  double sigma_open = 0.3;
  double mu_closed = 0.0;
  double sigma_closed = 0.1;

  void validate() const;  // throws ValidationError
};

struct NoiseParams {
  double sigma_target = 0.5;  // pA RMS
  double cutoff_hz = 1000.0;

  void validate() const;
};

// Electrode loaded by C_dl in parallel with R_t and R_gap.
struct ElectrodeParams {
  double r_gap = 6.37e7;   // ohm
  double c_dl = 8.99e-11;  // F
  double r_t = 7.92e8;     // ohm

  void validate() const;
  double r_parallel() const { return r_t * r_gap / (r_t + r_gap); }
  double tau() const { return c_dl * r_parallel(); }
};

struct SensorTrace {
  std::vector<float> voltage;  // V
  double dt = 0.0;
  std::size_t onset_index = 0;
  std::size_t data_length = 0;
  std::string odor_id;
  std::string or_id;
  int n_orco = 0;
};

enum class ChannelState : std::uint8_t { Closed = 0, Open = 1 };

// State 0 is closed; state t depends on state t-1 through the transition
// probabilities.
std::vector<ChannelState> simulate_channel_states(double p_open, double p_close, std::size_t steps, Rng& rng);

std::vector<double> states_to_current(const std::vector<ChannelState>& states, const MarkovParams& mp, Rng& rng);

// White Gaussian noise through a single-pole low-pass, rescaled to an exact
// RMS of np.sigma_target.
std::vector<double> generate_noise(std::size_t steps, const NoiseParams& np, double dt, Rng& rng);

struct CellCurrent {
  std::vector<double> current;  // pA, length t_total
  std::size_t onset_index = 0;
};

// Sums n_orco independent channels (p_open = p_close * d_odor_or) over t_data
// steps and adds them into a t_total noise trace at the onset. The onset is
// drawn uniformly from [0, t_total - t_data] unless given.
CellCurrent make_cell_current(double d_odor_or, int n_orco, std::size_t t_total, std::size_t t_data,
                              const MarkovParams& mp, const NoiseParams& np, Rng& rng,
                              std::optional<std::size_t> onset = std::nullopt);

// Exact zero-order-hold update of C dV/dt = I - V/R_t - V/R_gap, V(0) = 0.
// Input in pA; output[k] is the voltage at the end of step k.
std::vector<double> electrode_response(const std::vector<double>& current_pa, const ElectrodeParams& ep, double dt);

// Estimates gating and current parameters from a recorded single-channel
// segment by thresholding at `threshold_pa` (dwell-time analysis).
MarkovParams fit_markov_params(const std::vector<double>& current_pa, double threshold_pa, double dt);

struct GeneratorConfig {
  int n_orco = 10;
  std::size_t samples_per_class = 100;
  std::size_t t_total = 5000;
  std::size_t t_data = 2000;
  MarkovParams markov;
  NoiseParams noise;
  ElectrodeParams electrode;
  unsigned threads = 1;
};

struct Sample {
  std::uint32_t label = 0;
  std::uint64_t onset = 0;
  std::vector<float> traces;  // n_or x t_total, row-major, volts

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::uint32_t version = 1;
  double dt = 1e-3;
  std::vector<std::string> or_panel;
  std::vector<std::string> class_labels;
  int n_orco = 0;
  std::uint64_t master_seed = 0;
  std::size_t t_total = 0;
  std::size_t t_data = 0;
  double input_rms = 0.0;   // RMS over all trace values; the SNN divides by it
  std::string provenance;   // free text (config hash, set name); stored verbatim
  std::vector<Sample> samples;

  std::size_t n_or() const { return or_panel.size(); }
  bool operator==(const Dataset&) const = default;
};

SensorTrace simulate_sensor_trace(double d_odor_or, const std::string& odor_id, const std::string& or_id,
                                  const GeneratorConfig& cfg, std::size_t onset, Rng& rng);

// `responses` holds one row per class (odorants plus optional SFR row) and
// one column per panel receptor. Samples are ordered class-major. Each sample
// has one onset shared by its receptors, drawn from its own stream; result is
// independent of cfg.threads.
Dataset generate_dataset(const door::ResponseMatrix& responses, const GeneratorConfig& cfg,
                         std::uint64_t master_seed);

}  // namespace olfsim::channel
