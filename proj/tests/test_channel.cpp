#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "olfsim/channel.hpp"
#include "olfsim/dataset_io.hpp"
#include "olfsim/error.hpp"
#include "support.hpp"

using namespace olfsim;
using namespace olfsim::channel;

namespace {

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double rms(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

door::ResponseMatrix table(std::vector<std::string> odors, std::vector<std::string> ors, std::vector<double> v) {
  return door::ResponseMatrix(std::move(odors), std::move(ors), std::move(v));
}

GeneratorConfig small_config() {
  GeneratorConfig g;
  g.samples_per_class = 6;
  g.t_total = 400;
  g.t_data = 150;
  return g;
}

}  // namespace

TEST_CASE("gating: starts closed, d = 0 never opens, p_close = 1 closes immediately") {
  Rng rng(1);
  auto s = simulate_channel_states(0.0, 0.1, 1000, rng);
  CHECK(s.front() == ChannelState::Closed);
  CHECK(std::all_of(s.begin(), s.end(), [](auto x) { return x == ChannelState::Closed; }));

  auto t = simulate_channel_states(1.0, 1.0, 101, rng);
  for (std::size_t i = 0; i < t.size(); ++i)
    CHECK(t[i] == (i % 2 == 0 ? ChannelState::Closed : ChannelState::Open));
  CHECK_THROWS_AS(simulate_channel_states(1.2, 0.1, 10, rng), ValidationError);
}

TEST_CASE("gating: empirical open fraction approaches p_open / (p_open + p_close)") {
  Rng rng(7);
  const std::size_t n = 200000;
  for (auto [po, pc] : {std::pair{0.05, 0.1}, std::pair{0.3, 0.2}, std::pair{0.01, 0.5}}) {
    auto s = simulate_channel_states(po, pc, n, rng);
    const double frac = static_cast<double>(std::count(s.begin(), s.end(), ChannelState::Open)) / static_cast<double>(n);
    const double pi = po / (po + pc);
    // Correlated chain: variance inflation factor (1 + lambda) / (1 - lambda), lambda = 1 - po - pc.
    const double lambda = 1.0 - po - pc;
    const double sd = std::sqrt(pi * (1 - pi) / static_cast<double>(n) * (1 + lambda) / (1 - lambda));
    CHECK(std::abs(frac - pi) < 5 * sd);
  }
}

TEST_CASE("state currents follow the per-state Gaussians") {
  Rng rng(3);
  MarkovParams mp;
  std::vector<ChannelState> open(50000, ChannelState::Open), closed(50000, ChannelState::Closed);
  auto io = states_to_current(open, mp, rng);
  auto ic = states_to_current(closed, mp, rng);
  CHECK(mean(io) == doctest::Approx(mp.mu_open).epsilon(0.01));
  CHECK(mean(ic) == doctest::Approx(mp.mu_closed).scale(1.0).epsilon(0.005));
  std::vector<double> centred(io.size());
  std::transform(io.begin(), io.end(), centred.begin(), [&](double x) { return x - mp.mu_open; });
  CHECK(rms(centred) == doctest::Approx(mp.sigma_open).epsilon(0.02));
}

TEST_CASE("noise has exactly the requested RMS") {
  Rng rng(5);
  NoiseParams np{0.5, 1000.0};
  auto n = generate_noise(20000, np, 1e-3, rng);
  CHECK(rms(n) == doctest::Approx(0.5).epsilon(1e-12));
  NoiseParams zero{0.0, 1000.0};
  auto z = generate_noise(100, zero, 1e-3, rng);
  CHECK(std::all_of(z.begin(), z.end(), [](double x) { return x == 0.0; }));
}

TEST_CASE("noise spectrum is low-passed") {
  // Welch estimate with a plain DFT: high band power well below the DC band.
  Rng rng(17);
  const double dt = 1e-4, fc = 100.0;
  const std::size_t seg = 512, nseg = 32;
  auto x = generate_noise(seg * nseg, NoiseParams{1.0, fc}, dt, rng);
  std::vector<double> psd(seg / 2 + 1, 0.0);
  for (std::size_t s = 0; s < nseg; ++s) {
    for (std::size_t k = 0; k <= seg / 2; ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t i = 0; i < seg; ++i) {
        const double w = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(seg));
        acc += w * x[s * seg + i] *
               std::polar(1.0, -2 * std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(seg));
      }
      psd[k] += std::norm(acc);
    }
  }
  const double df = 1.0 / (static_cast<double>(seg) * dt);
  double low = 0.0, high = 0.0;
  std::size_t nl = 0, nh = 0;
  for (std::size_t k = 1; k < psd.size(); ++k) {
    const double f = static_cast<double>(k) * df;
    if (f <= fc / 4) low += psd[k], ++nl;
    if (f >= 10 * fc) high += psd[k], ++nh;
  }
  REQUIRE(nl > 0);
  REQUIRE(nh > 0);
  // One pole: |H|^2 falls ~ (fc/f)^2, i.e. at least 20 dB down a decade above fc.
  CHECK(high / static_cast<double>(nh) < 0.02 * low / static_cast<double>(nl));
}

TEST_CASE("electrode: exact step response of the RC load") {
  ElectrodeParams ep;
  const double dt = 1e-4;
  std::vector<double> i(2000, 2.0);
  auto v = electrode_response(i, ep, dt);
  const double rpar = ep.r_t * ep.r_gap / (ep.r_t + ep.r_gap);
  const double tau = ep.c_dl * rpar;
  for (std::size_t k = 0; k < v.size(); k += 97) {
    const double t = static_cast<double>(k + 1) * dt;
    CHECK(v[k] == doctest::Approx(2e-12 * rpar * (1 - std::exp(-t / tau))).epsilon(1e-10));
  }
  CHECK(electrode_response(std::vector<double>(10, 0.0), ep, dt) == std::vector<double>(10, 0.0));
}

TEST_CASE("electrode: linear in the input current") {
  ElectrodeParams ep;
  Rng rng(2);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> a(500), b(500), ab(500);
  for (std::size_t k = 0; k < a.size(); ++k) {
    a[k] = n(rng);
    b[k] = n(rng);
    ab[k] = 2.0 * a[k] - 0.5 * b[k];
  }
  auto va = electrode_response(a, ep, 1e-3), vb = electrode_response(b, ep, 1e-3), vab = electrode_response(ab, ep, 1e-3);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(vab[k] == doctest::Approx(2.0 * va[k] - 0.5 * vb[k]).scale(1e-6));
}

TEST_CASE("cell current: channel activity stays inside the data window") {
  Rng rng(8);
  MarkovParams mp;
  mp.sigma_open = mp.sigma_closed = 0.0;
  NoiseParams quiet{0.0, 1000.0};
  for (int trial = 0; trial < 20; ++trial) {
    auto cell = make_cell_current(1.0, 10, 500, 120, mp, quiet, rng);
    CHECK(cell.onset_index <= 500 - 120);
    for (std::size_t k = 0; k < cell.current.size(); ++k)
      if (k < cell.onset_index || k >= cell.onset_index + 120) CHECK(cell.current[k] == 0.0);
  }
  auto fixed = make_cell_current(0.5, 10, 500, 120, mp, quiet, rng, std::size_t{300});
  CHECK(fixed.onset_index == 300);
  CHECK_THROWS_AS(make_cell_current(0.5, 10, 500, 120, mp, quiet, rng, std::size_t{400}), ValidationError);
}

TEST_CASE("gating parameters are recovered from a simulated record") {
  Rng rng(13);
  MarkovParams truth;
  truth.p_close = 0.08;
  auto states = simulate_channel_states(0.04, truth.p_close, 400000, rng);
  auto cur = states_to_current(states, truth, rng);
  auto fit = fit_markov_params(cur, 1.0, truth.dt);
  CHECK(fit.p_close == doctest::Approx(truth.p_close).epsilon(0.05));
  CHECK(fit.mu_open == doctest::Approx(truth.mu_open).epsilon(0.01));
  CHECK(fit.sigma_open == doctest::Approx(truth.sigma_open).epsilon(0.05));
}

TEST_CASE("dataset: shape, labels and class-major order") {
  auto resp = table({"a", "b", "SFR"}, {"Or1", "Or2"}, {0.8, 0.1, 0.2, 0.9, 0.05, 0.05});
  auto g = small_config();
  auto ds = generate_dataset(resp, g, 99);
  CHECK(ds.samples.size() == 18);
  CHECK(ds.n_or() == 2);
  CHECK(ds.class_labels == std::vector<std::string>{"a", "b", "SFR"});
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK(ds.samples[i].label == i / 6);
    CHECK(ds.samples[i].traces.size() == 2 * g.t_total);
    CHECK(ds.samples[i].onset <= g.t_total - g.t_data);
  }
  CHECK(ds.input_rms > 0.0);
}

TEST_CASE("dataset: deterministic, thread-count independent, seed sensitive") {
  auto resp = table({"a", "b"}, {"Or1", "Or2", "Or3"}, {0.8, 0.1, 0.3, 0.2, 0.9, 0.5});
  auto g = small_config();
  auto one = generate_dataset(resp, g, 5);
  g.threads = 3;
  auto three = generate_dataset(resp, g, 5);
  CHECK(one == three);
  auto other = generate_dataset(resp, g, 6);
  CHECK_FALSE(one == other);
  CHECK(other.samples.size() == one.samples.size());
  CHECK(other.or_panel == one.or_panel);
}

TEST_CASE("dataset: stronger response gives larger mean voltage in the window") {
  auto resp = table({"strong", "none"}, {"Or1"}, {0.9, 0.0});
  auto g = small_config();
  g.samples_per_class = 20;
  auto ds = generate_dataset(resp, g, 1);
  auto window_mean = [&](const Sample& s) {
    double acc = 0.0;
    for (std::size_t k = s.onset; k < s.onset + g.t_data; ++k) acc += s.traces[k];
    return acc / static_cast<double>(g.t_data);
  };
  double strong = 0.0, none = 0.0;
  for (const auto& s : ds.samples) (s.label == 0 ? strong : none) += window_mean(s);
  CHECK(strong > 10 * std::abs(none));
}

TEST_CASE("dataset: invalid inputs") {
  auto g = small_config();
  auto resp = table({"a"}, {"Or1"}, {0.5});
  auto bad = g;
  bad.t_data = g.t_total + 1;
  CHECK_THROWS_AS(generate_dataset(resp, bad, 1), ValidationError);
  bad = g;
  bad.samples_per_class = 0;
  CHECK_THROWS_AS(generate_dataset(resp, bad, 1), ValidationError);
  CHECK_THROWS_AS(generate_dataset(table({"a"}, {"Or1"}, {std::nan("")}), g, 1), ValidationError);
}

TEST_CASE("dataset file round trip is exact") {
  auto resp = table({"a", "SFR"}, {"Or1", "Or2"}, {0.8, 0.1, 0.05, 0.02});
  auto ds = generate_dataset(resp, small_config(), 12);
  ds.provenance = "{\"config_hash\":\"abc\"}";
  std::stringstream buf;
  io::write_dataset(buf, ds);
  auto back = io::read_dataset(buf);
  CHECK(back == ds);

  testing::TempDir dir("ds");
  io::write_dataset(dir / "d.olfds", ds);
  CHECK(io::read_dataset(dir / "d.olfds") == ds);
}

TEST_CASE("dataset file: corruption is reported") {
  auto resp = table({"a"}, {"Or1"}, {0.4});
  auto ds = generate_dataset(resp, small_config(), 1);
  std::stringstream buf;
  io::write_dataset(buf, ds);
  const std::string bytes = buf.str();

  std::stringstream truncated(bytes.substr(0, bytes.size() - 7));
  CHECK_THROWS_AS(io::read_dataset(truncated), ValidationError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::stringstream m(bad_magic);
  CHECK_THROWS_AS(io::read_dataset(m), ValidationError);
  CHECK_THROWS_AS(io::read_dataset(std::filesystem::path("/nonexistent/x.olfds")), ValidationError);
}
