#include "olfsim/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "olfsim/error.hpp"

namespace olfsim::config {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

std::uint64_t dataset_seed(std::uint64_t master, const std::string& set, std::size_t n_or) {
  return splitmix64(master ^ splitmix64(fnv1a64("generate/" + set) + n_or));
}

std::uint64_t train_seed(std::uint64_t master, const std::string& set, std::size_t n_or) {
  return splitmix64(master ^ splitmix64(fnv1a64("train/" + set) + n_or));
}

const OdorSet& RunConfig::odor_set(const std::string& name) const {
  for (const auto& s : odor_sets)
    if (s.name == name) return s;
  throw ValidationError("unknown odor set '" + name + "'");
}

namespace {

const std::set<std::string> kFreeMaps = {"odor_sets.inline", "generate.panels"};

json defaults() {
  const channel::GeneratorConfig g;
  const snn::TrainConfig t;
  const EncodeSettings e;
  const aer::ReceiverModel rx;
  json j;
  j["master_seed"] = nullptr;
  j["runs"] = t.runs;
  j["paths"] = {{"response_matrix", "door_response_matrix_standin.csv"},
                {"whitelist", "single_or_units.txt"},
                {"output_dir", "olfsim_out"}};
  j["odor_sets"] = {{"file", "odor_sets_standin.json"},
                    {"inline", json::object()},
                    {"include_sfr", true},
                    {"sfr_source", "matrix"}};
  j["select"] = {{"curve_n", json::array()}};
  j["generate"] = {
      {"n_or", {3, 21}},
      {"panels", json::object()},
      {"n_orco", g.n_orco},
      {"samples_per_class", g.samples_per_class},
      {"t_total", g.t_total},
      {"t_data", g.t_data},
      {"markov",
       {{"p_close", g.markov.p_close},
        {"dt", g.markov.dt},
        {"mu_open", g.markov.mu_open},
        {"sigma_open", g.markov.sigma_open},
        {"mu_closed", g.markov.mu_closed},
        {"sigma_closed", g.markov.sigma_closed}}},
      {"noise", {{"sigma_target", g.noise.sigma_target}, {"cutoff_hz", g.noise.cutoff_hz}}},
      {"electrode", {{"r_gap", g.electrode.r_gap}, {"c_dl", g.electrode.c_dl}, {"r_t", g.electrode.r_t}}}};
  j["train"] = {{"epochs", t.epochs},
                {"split", {{"train", t.split.train}, {"validation", t.split.validation}, {"test", t.split.test}}},
                {"learning_rate", t.learning_rate},
                {"surrogate_slope", t.surrogate_slope},
                {"logit_scale", t.logit_scale},
                {"batch_size", t.batch_size},
                {"optimizer", "sgd"},
                {"init_gain_in", t.init_gain_in},
                {"init_gain_out", t.init_gain_out},
                {"n_hidden", t.n_hidden},
                {"alpha", t.alpha},
                {"v_thr", t.v_thr},
                {"c", t.c},
                {"dt", t.dt},
                {"quant_bits", t.quant_bits}};
  j["encode"] = {
      {"set", "blue"},
      {"n_or", e.n_or},
      {"lna", {{"gain_db", e.lna.gain_db}, {"output_swing", e.lna.output_swing}, {"offset", e.lna.offset}}},
      {"neuron",
       {{"v_dc", e.neuron.v_dc},
        {"r_leak", e.neuron.r_leak},
        {"v_ref", e.neuron.v_ref},
        {"c1", e.neuron.c1},
        {"v_thr", e.neuron.v_thr},
        {"t_refractory", e.neuron.t_refractory}}},
      {"injection", {{"amps_per_volt", e.injection.amps_per_volt}}},
      {"receiver",
       {{"latency_min", rx.latency_min},
        {"latency_max", rx.latency_max},
        {"sender_delay", rx.sender_delay},
        {"timeout", rx.timeout}}},
      {"sweep", {0.0, 0.5, 1.0, 2.0, 4.0}}};
  j["execution"] = {{"threads", 1}};
  return j;
}

void merge(json& base, const json& over, const std::string& path) {
  if (!over.is_object()) throw ValidationError("config section '" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (auto it = over.begin(); it != over.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ValidationError("unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object() && !kFreeMaps.count(key))
      merge(slot, it.value(), key);
    else
      slot = it.value();
  }
}

json parse_override(const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + spec + "' is not key=value");
  const std::string key = spec.substr(0, eq), raw = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string p; std::getline(ss, p, '.');) {
    if (p.empty()) throw ValidationError("override key '" + key + "' has an empty component");
    parts.push_back(p);
  }
  json out = value;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) out = json{{*it, out}};
  return out;
}

json read_json_file(const fs::path& p, const char* what) {
  std::ifstream f(p);
  if (!f) throw ValidationError(std::string("cannot open ") + what + " '" + p.string() + "'");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + " '" + p.string() + "' is not valid JSON: " + e.what(), 0);
  }
}

// Typed access that names the offending key.
template <class T>
T get(const json& root, const std::string& dotted) {
  const json* j = &root;
  std::stringstream ss(dotted);
  for (std::string p; std::getline(ss, p, '.');) j = &j->at(p);
  try {
    return j->get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config key '" + dotted + "' has the wrong type (" + j->dump() + ")");
  }
}

double positive(const json& root, const std::string& key) {
  double v = get<double>(root, key);
  if (!(v > 0.0)) throw ValidationError("config key '" + key + "' must be > 0");
  return v;
}

std::size_t count(const json& root, const std::string& key) {
  auto v = get<long long>(root, key);
  if (v < 1) throw ValidationError("config key '" + key + "' must be >= 1");
  return static_cast<std::size_t>(v);
}

std::vector<std::size_t> size_list(const json& root, const std::string& key) {
  auto raw = get<std::vector<long long>>(root, key);
  std::vector<std::size_t> out;
  for (auto v : raw) {
    if (v < 1) throw ValidationError("config key '" + key + "' entries must be >= 1");
    out.push_back(static_cast<std::size_t>(v));
  }
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end())
    throw ValidationError("config key '" + key + "' has duplicate entries");
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path q(p);
  return q.is_absolute() ? q : base / q;
}

void require_file(const fs::path& p, const char* what) {
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) throw ValidationError(std::string(what) + " '" + p.string() + "' does not exist");
}

void check_set_name(const std::string& name) {
  static const std::regex ok("[A-Za-z0-9_-]+");
  if (!std::regex_match(name, ok))
    throw ValidationError("odor set name '" + name + "' may only use letters, digits, '_' and '-'");
}

}  // namespace

std::string default_config_json() { return defaults().dump(2); }

RunConfig load_config(const LoadOptions& opts) {
  json eff = defaults();
  fs::path base = fs::current_path();
  if (opts.file) {
    merge(eff, read_json_file(*opts.file, "config file"), "");
    base = fs::absolute(*opts.file).parent_path();
  }
  for (const auto& o : opts.overrides) merge(eff, parse_override(o), "");

  RunConfig c;
  if (eff.at("master_seed").is_null())
    throw ValidationError("master_seed is required (set it in the config file or with --seed)");
  if (!eff.at("master_seed").is_number_unsigned() && !eff.at("master_seed").is_number_integer())
    throw ValidationError("master_seed must be a non-negative integer");
  if (eff.at("master_seed").is_number_integer() && eff.at("master_seed").get<long long>() < 0)
    throw ValidationError("master_seed must be a non-negative integer");
  c.master_seed = eff.at("master_seed").get<std::uint64_t>();
  c.runs = static_cast<int>(count(eff, "runs"));
  c.threads = static_cast<unsigned>(count(eff, "execution.threads"));

  c.response_matrix = resolve(base, get<std::string>(eff, "paths.response_matrix"));
  c.whitelist = resolve(base, get<std::string>(eff, "paths.whitelist"));
  require_file(c.response_matrix, "response matrix");
  require_file(c.whitelist, "unit whitelist");
  const std::size_t panel_max = door::load_unit_whitelist(c.whitelist).size();

  if (opts.output_dir)
    c.output_dir = *opts.output_dir;
  else if (const char* env = opts.use_env ? std::getenv("OLFSIM_OUTPUT_DIR") : nullptr; env && *env)
    c.output_dir = env;
  else
    c.output_dir = get<std::string>(eff, "paths.output_dir");

  // Odor sets: file entries plus inline entries.
  std::map<std::string, std::vector<std::string>> sets;
  const auto set_file = get<std::string>(eff, "odor_sets.file");
  if (!set_file.empty()) {
    auto p = resolve(base, set_file);
    require_file(p, "odor set file");
    json f = read_json_file(p, "odor set file");
    if (!f.is_object()) throw ValidationError("odor set file must map set names to odorant lists");
    for (auto it = f.begin(); it != f.end(); ++it) {
      try {
        sets[it.key()] = it.value().get<std::vector<std::string>>();
      } catch (const json::exception&) {
        throw ValidationError("odor set '" + it.key() + "' must be a list of odorant ids");
      }
    }
  }
  const json& inl = eff.at("odor_sets").at("inline");
  for (auto it = inl.begin(); it != inl.end(); ++it) {
    if (sets.count(it.key())) throw ValidationError("odor set '" + it.key() + "' is defined twice");
    sets[it.key()] = get<std::vector<std::string>>(inl, it.key());
  }
  if (sets.empty()) throw ValidationError("no odor sets configured");
  for (auto& [name, odors] : sets) {
    check_set_name(name);
    if (odors.empty()) throw ValidationError("odor set '" + name + "' is empty");
    c.odor_sets.push_back({name, odors});
  }
  c.include_sfr = get<bool>(eff, "odor_sets.include_sfr");
  const auto sfr = get<std::string>(eff, "odor_sets.sfr_source");
  if (sfr == "matrix")
    c.sfr_source = door::SfrSource::FromMatrix;
  else if (sfr == "zero")
    c.sfr_source = door::SfrSource::Zero;
  else
    throw ValidationError("odor_sets.sfr_source must be 'matrix' or 'zero', got '" + sfr + "'");

  c.curve_n = size_list(eff, "select.curve_n");
  if (c.curve_n.empty())
    for (std::size_t n = 1; n <= panel_max; ++n) c.curve_n.push_back(n);
  c.n_or = size_list(eff, "generate.n_or");
  for (auto n : c.curve_n)
    if (n > panel_max)
      throw ValidationError("select.curve_n value " + std::to_string(n) + " exceeds the panel size " +
                            std::to_string(panel_max));
  for (auto n : c.n_or)
    if (n > panel_max)
      throw ValidationError("generate.n_or value " + std::to_string(n) + " exceeds the panel size " +
                            std::to_string(panel_max));
  const json& panels = eff.at("generate").at("panels");
  for (auto it = panels.begin(); it != panels.end(); ++it) {
    c.odor_set(it.key());
    auto ids = get<std::vector<std::string>>(panels, it.key());
    if (ids.empty() || ids.size() > panel_max)
      throw ValidationError("explicit panel for '" + it.key() + "' must hold 1.." + std::to_string(panel_max) +
                            " receptors");
    c.explicit_panels[it.key()] = ids;
  }

  auto& g = c.generator;
  g.n_orco = static_cast<int>(count(eff, "generate.n_orco"));
  g.samples_per_class = count(eff, "generate.samples_per_class");
  g.t_total = count(eff, "generate.t_total");
  g.t_data = count(eff, "generate.t_data");
  if (g.t_data > g.t_total) throw ValidationError("generate.t_data must not exceed generate.t_total");
  g.markov.p_close = get<double>(eff, "generate.markov.p_close");
  g.markov.dt = positive(eff, "generate.markov.dt");
  g.markov.mu_open = get<double>(eff, "generate.markov.mu_open");
  g.markov.sigma_open = get<double>(eff, "generate.markov.sigma_open");
  g.markov.mu_closed = get<double>(eff, "generate.markov.mu_closed");
  g.markov.sigma_closed = get<double>(eff, "generate.markov.sigma_closed");
  g.noise.sigma_target = get<double>(eff, "generate.noise.sigma_target");
  g.noise.cutoff_hz = get<double>(eff, "generate.noise.cutoff_hz");
  g.electrode.r_gap = get<double>(eff, "generate.electrode.r_gap");
  g.electrode.c_dl = get<double>(eff, "generate.electrode.c_dl");
  g.electrode.r_t = get<double>(eff, "generate.electrode.r_t");
  g.threads = c.threads;
  g.markov.validate();
  g.noise.validate();
  g.electrode.validate();

  auto& t = c.train;
  t.runs = c.runs;
  t.epochs = static_cast<int>(count(eff, "train.epochs"));
  t.split.train = get<double>(eff, "train.split.train");
  t.split.validation = get<double>(eff, "train.split.validation");
  t.split.test = get<double>(eff, "train.split.test");
  t.learning_rate = get<double>(eff, "train.learning_rate");
  t.surrogate_slope = get<double>(eff, "train.surrogate_slope");
  t.logit_scale = get<double>(eff, "train.logit_scale");
  t.batch_size = static_cast<int>(count(eff, "train.batch_size"));
  const auto opt = get<std::string>(eff, "train.optimizer");
  if (opt == "sgd")
    t.optimizer = snn::Optimizer::Sgd;
  else if (opt == "adam")
    t.optimizer = snn::Optimizer::Adam;
  else
    throw ValidationError("train.optimizer must be 'sgd' or 'adam', got '" + opt + "'");
  t.init_gain_in = get<double>(eff, "train.init_gain_in");
  t.init_gain_out = get<double>(eff, "train.init_gain_out");
  t.n_hidden = static_cast<int>(count(eff, "train.n_hidden"));
  t.alpha = get<double>(eff, "train.alpha");
  t.v_thr = get<double>(eff, "train.v_thr");
  t.c = get<double>(eff, "train.c");
  t.dt = get<double>(eff, "train.dt");
  t.quant_bits = static_cast<int>(get<long long>(eff, "train.quant_bits"));
  t.seed = c.master_seed;
  t.validate();
  {
    auto probe = snn::make_model(1, t.n_hidden, 2);
    probe.alpha = t.alpha;
    probe.v_thr = t.v_thr;
    probe.c = t.c;
    probe.dt = t.dt;
    probe.quant_bits = t.quant_bits;
    probe.validate();
  }

  auto& e = c.encode;
  e.set = get<std::string>(eff, "encode.set");
  c.odor_set(e.set);
  e.n_or = count(eff, "encode.n_or");
  e.lna.gain_db = get<double>(eff, "encode.lna.gain_db");
  e.lna.output_swing = get<double>(eff, "encode.lna.output_swing");
  e.lna.offset = get<double>(eff, "encode.lna.offset");
  e.neuron.v_dc = get<double>(eff, "encode.neuron.v_dc");
  e.neuron.r_leak = get<double>(eff, "encode.neuron.r_leak");
  e.neuron.v_ref = get<double>(eff, "encode.neuron.v_ref");
  e.neuron.c1 = get<double>(eff, "encode.neuron.c1");
  e.neuron.v_thr = get<double>(eff, "encode.neuron.v_thr");
  e.neuron.t_refractory = get<double>(eff, "encode.neuron.t_refractory");
  e.injection.amps_per_volt = get<double>(eff, "encode.injection.amps_per_volt");
  e.receiver.latency_min = get<double>(eff, "encode.receiver.latency_min");
  e.receiver.latency_max = get<double>(eff, "encode.receiver.latency_max");
  e.receiver.sender_delay = get<double>(eff, "encode.receiver.sender_delay");
  e.receiver.timeout = get<double>(eff, "encode.receiver.timeout");
  e.sweep = get<std::vector<double>>(eff, "encode.sweep");
  for (double a : e.sweep)
    if (!(a >= 0.0)) throw ValidationError("encode.sweep factors must be >= 0");
  e.lna.validate();
  e.neuron.validate();
  e.injection.validate();

  json hashed = eff;
  hashed["paths"].erase("output_dir");
  hashed.erase("execution");
  c.effective_json = hashed.dump();
  c.hash = hex64(fnv1a64(c.effective_json));
  return c;
}

}  // namespace olfsim::config
