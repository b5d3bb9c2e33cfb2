#pragma once

// Address-event transmission over per-neuron request/acknowledge lines using
// the 4-phase handshake (req up, ack up, req down, ack down). Spikes that
// arrive while a line is busy wait in a per-line FIFO, so nothing is dropped.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "olfsim/error.hpp"
#include "olfsim/rng.hpp"

namespace olfsim::aer {

enum class Phase : std::uint8_t { ReqRise = 0, AckRise = 1, ReqFall = 2, AckFall = 3 };

const char* phase_name(Phase p);

struct SpikeEvent {
  double time = 0.0;  // s
  int neuron_id = 0;
};

struct PhaseTransition {
  double time = 0.0;
  Phase phase = Phase::ReqRise;
};

struct AerEvent {
  int neuron_id = 0;
  double time = 0.0;  // spike time
  std::vector<PhaseTransition> phase_log;
};

struct SignalRecord {
  double time = 0.0;
  int neuron_id = 0;
  Phase phase = Phase::ReqRise;
};

struct AerLog {
  std::vector<AerEvent> events;        // completed cycles, in completion order
  std::vector<SignalRecord> signals;   // every line transition, by (time, neuron)
};

// Receiver side of the handshake. The latency callback returns the delay
// from a request edge to the receiver's matching ack edge; a value above
// `timeout` (including infinity) is a stall.
struct ReceiverModel {
  double latency_min = 1e-6;
  double latency_max = 5e-6;
  double sender_delay = 1e-7;  // neuron's reaction from ack up to req down
  double timeout = 1e-3;
  std::uint64_t seed = 0;
  std::set<int> stalled_neurons;  // lines the receiver never acknowledges
  std::function<double(int neuron_id, Phase request_edge, Rng& rng)> latency;  // overrides the uniform draw
};

class ProtocolStallError : public RuntimeError {
 public:
  ProtocolStallError(int neuron_id, double time)
      : RuntimeError("AER handshake stalled on neuron " + std::to_string(neuron_id) + " at t=" +
                     std::to_string(time) + " s"),
        neuron_id_(neuron_id) {}
  int neuron_id() const { return neuron_id_; }

 private:
  int neuron_id_;
};

// Discrete-event simulation of the handshake for every spike. Throws
// ProtocolStallError when an acknowledgment does not arrive within timeout.
AerLog aer_transmit(const std::vector<SpikeEvent>& spikes, const ReceiverModel& rx);

}  // namespace olfsim::aer
