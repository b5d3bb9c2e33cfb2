#include "olfsim/aer.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <queue>
#include <tuple>

namespace olfsim::aer {

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::ReqRise: return "req_rise";
    case Phase::AckRise: return "ack_rise";
    case Phase::ReqFall: return "req_fall";
    case Phase::AckFall: return "ack_fall";
  }
  return "?";
}

namespace {

enum class Kind : std::uint8_t { Arrive, ReqRise, AckRise, ReqFall, AckFall };

struct QueueItem {
  double time;
  int neuron;
  std::uint64_t seq;
  Kind kind;
  double spike_time;  // Arrive only
  bool operator>(const QueueItem& o) const {
    return std::tie(time, neuron, seq) > std::tie(o.time, o.neuron, o.seq);
  }
};

struct Line {
  std::deque<double> pending;  // spike times waiting for (or in) a cycle
  bool busy = false;
  std::vector<PhaseTransition> current;
};

}  // namespace

AerLog aer_transmit(const std::vector<SpikeEvent>& spikes, const ReceiverModel& rx) {
  if (!(rx.latency_min >= 0.0 && rx.latency_max >= rx.latency_min))
    throw ValidationError("receiver latency range is invalid");
  if (!(rx.sender_delay >= 0.0) || !(rx.timeout > 0.0)) throw ValidationError("handshake timing is invalid");

  Rng rng{splitmix64(rx.seed)};
  std::uniform_real_distribution<double> lat(rx.latency_min, rx.latency_max);
  auto ack_latency = [&](int neuron, Phase edge) {
    if (rx.stalled_neurons.count(neuron)) return std::numeric_limits<double>::infinity();
    return rx.latency ? rx.latency(neuron, edge, rng) : lat(rng);
  };

  std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>> queue;
  std::uint64_t seq = 0;
  for (const auto& s : spikes) {
    if (!std::isfinite(s.time)) throw ValidationError("spike time must be finite");
    queue.push({s.time, s.neuron_id, seq++, Kind::Arrive, s.time});
  }

  std::map<int, Line> lines;
  AerLog log;
  log.events.reserve(spikes.size());
  log.signals.reserve(spikes.size() * 4);

  auto record = [&](Line& line, int neuron, double t, Phase p) {
    line.current.push_back({t, p});
    log.signals.push_back({t, neuron, p});
  };

  while (!queue.empty()) {
    QueueItem it = queue.top();
    queue.pop();
    Line& line = lines[it.neuron];
    switch (it.kind) {
      case Kind::Arrive:
        line.pending.push_back(it.spike_time);
        if (!line.busy) {
          line.busy = true;
          queue.push({it.time, it.neuron, seq++, Kind::ReqRise, 0.0});
        }
        break;
      case Kind::ReqRise: {
        record(line, it.neuron, it.time, Phase::ReqRise);
        double l = ack_latency(it.neuron, Phase::ReqRise);
        if (!(l <= rx.timeout)) throw ProtocolStallError(it.neuron, it.time);
        queue.push({it.time + l, it.neuron, seq++, Kind::AckRise, 0.0});
        break;
      }
      case Kind::AckRise:
        record(line, it.neuron, it.time, Phase::AckRise);
        queue.push({it.time + rx.sender_delay, it.neuron, seq++, Kind::ReqFall, 0.0});
        break;
      case Kind::ReqFall: {
        record(line, it.neuron, it.time, Phase::ReqFall);
        double l = ack_latency(it.neuron, Phase::ReqFall);
        if (!(l <= rx.timeout)) throw ProtocolStallError(it.neuron, it.time);
        queue.push({it.time + l, it.neuron, seq++, Kind::AckFall, 0.0});
        break;
      }
      case Kind::AckFall: {
        record(line, it.neuron, it.time, Phase::AckFall);
        AerEvent ev;
        ev.neuron_id = it.neuron;
        ev.time = line.pending.front();
        ev.phase_log = std::move(line.current);
        line.current.clear();
        line.pending.pop_front();
        log.events.push_back(std::move(ev));
        if (!line.pending.empty())
          queue.push({it.time, it.neuron, seq++, Kind::ReqRise, 0.0});
        else
          line.busy = false;
        break;
      }
    }
  }
  return log;
}

}  // namespace olfsim::aer
