#pragma once

// Three-layer LIF spiking classifier.
//
// Per step, with u the pre-reset membrane and v the post-reset state:
//
//   hidden: u_h(t) = alpha * v_h(t-1) + (dt / C) * W_in * x(t)
//   output: u_o(t) = alpha * v_o(t-1) + W_out * s_h(t)
//   s(t)   = [u(t) >= v_thr],   v(t) = u(t) * (1 - s(t))      (reset to 0)
//
// x(t) is the analog receptor column scaled by input_scale. The class score is
// the output spike count summed over all steps. Training is BPTT with a
// logistic surrogate derivative for the spike nonlinearity, a softmax
// cross-entropy on scaled counts, and straight-through quantization of the
// weights.

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "olfsim/channel.hpp"

namespace olfsim::snn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SnnModel {
  int n_in = 0;
  int n_hidden = 50;
  int n_out = 0;
  Matrix w_in;   // n_hidden x n_in
  Matrix w_out;  // n_out x n_hidden
  double alpha = 0.95;
  double v_thr = 1.0;
  double c = 1.0;
  double dt = 1.0;
  int quant_bits = 4;        // 0 disables quantization
  double input_scale = 1.0;  // multiplies raw traces (1 / dataset RMS)
  // Codebook half-ranges (max |w|) for each matrix; 0 when not quantized.
  double scale_in = 0.0;
  double scale_out = 0.0;

  void validate() const;  // throws ValidationError
};

SnnModel make_model(int n_in, int n_hidden, int n_out);

// One discrete LIF update for a layer. Returns (v_next, spikes_out).
std::pair<Vector, Vector> lif_step(const Vector& v, const Vector& spikes_in, const Matrix& w, const Vector& i_dc,
                                   const SnnModel& model);

// Output spike totals per class. trace is n_in x T (raw units).
Eigen::VectorXi forward(const SnnModel& model, const Matrix& trace);

// argmax; ties go to the lowest index.
int classify(const Eigen::VectorXi& counts);

struct SurrogateSpike {
  double value;       // Heaviside(x), inclusive at 0
  double derivative;  // d/dx logistic(slope * x)
};
SurrogateSpike surrogate_spike(double x, double slope);

// Symmetric uniform codebook of 2^bits levels over [-max|w|, max|w|].
// Returns the quantized matrix; *scale receives max|w| when given.
Matrix quantize_weights(const Matrix& w, int bits, double* scale = nullptr);
std::vector<double> codebook(double scale, int bits);

enum class SpikeMode {
  Hard,     // forward Heaviside, backward logistic derivative (training)
  Relaxed,  // forward logistic, backward its exact derivative (gradient checks)
};

struct LossAndGrad {
  double loss = 0.0;
  Eigen::VectorXd counts;  // possibly fractional in Relaxed mode
  Matrix grad_in;
  Matrix grad_out;
};

// Forward + BPTT for one sample with the model's weights used as given (no
// quantization applied here).
LossAndGrad loss_and_gradient(const SnnModel& model, const Matrix& trace, int label, double surrogate_slope,
                              double logit_scale, SpikeMode mode);

// Loss only, same conventions as loss_and_gradient.
double loss_only(const SnnModel& model, const Matrix& trace, int label, double surrogate_slope, double logit_scale,
                 SpikeMode mode);

struct Split {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
  int epochs = 15;
  Split split;
  int runs = 10;
  double learning_rate = 0.01;
  double surrogate_slope = 5.0;
  double logit_scale = 0.05;
  int batch_size = 10;
  Optimizer optimizer = Optimizer::Sgd;
  double init_gain_in = 1.0;
  double init_gain_out = 1.0;
  std::uint64_t seed = 0;
  // model hyperparameters
  int n_hidden = 50;
  double alpha = 0.95;
  double v_thr = 1.0;
  double c = 1.0;
  double dt = 1.0;
  int quant_bits = 4;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
};

struct Partition {
  std::vector<std::size_t> train, validation, test;
};

// Stratified per class; each class's indices are shuffled with the seed.
// Throws ValidationError if any partition would be empty.
Partition split_dataset(const channel::Dataset& ds, const Split& split, std::uint64_t seed);

struct Evaluation {
  double accuracy = 0.0;
  std::vector<std::vector<int>> confusion;  // [true][predicted]
};

Evaluation evaluate(const SnnModel& model, const channel::Dataset& ds, const std::vector<std::size_t>& indices);

struct TrainResult {
  SnnModel model;  // checkpoint with best validation accuracy
  Matrix shadow_in, shadow_out;  // full-precision weights the checkpoint was quantized from
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  Partition partition;
  Evaluation test;
};

// Raw trace matrix (n_or x t_total) of one sample.
Matrix sample_matrix(const channel::Dataset& ds, std::size_t index);

TrainResult train(const channel::Dataset& ds, const TrainConfig& cfg);

// Runs cfg.runs independent trainings with seeds derived from cfg.seed and
// the run index, on up to `threads` threads. Output order is by run index.
std::vector<TrainResult> train_runs(const channel::Dataset& ds, const TrainConfig& cfg, unsigned threads);

}  // namespace olfsim::snn
