#include "olfsim/dataset_io.hpp"

#include <fstream>
#include "json.hpp"

#include "binary.hpp"

namespace olfsim::io {

using nlohmann::json;
using namespace detail;

namespace {
constexpr char kMagic[9] = "OLFSIMDS";
constexpr std::uint32_t kContainerVersion = 1;
}  // namespace

void write_dataset(std::ostream& out, const channel::Dataset& ds) {
  json h;
  h["version"] = ds.version;
  h["dt"] = ds.dt;
  h["or_panel"] = ds.or_panel;
  h["class_labels"] = ds.class_labels;
  h["n_orco"] = ds.n_orco;
  h["master_seed"] = ds.master_seed;
  h["t_total"] = ds.t_total;
  h["t_data"] = ds.t_data;
  h["input_rms"] = ds.input_rms;
  h["n_samples"] = ds.samples.size();
  h["provenance"] = ds.provenance;
  out.write(kMagic, 8);
  put<std::uint32_t>(out, kContainerVersion);
  put_string(out, h.dump());
  const std::size_t row = ds.n_or() * ds.t_total;
  for (const auto& s : ds.samples) {
    if (s.traces.size() != row) throw ValidationError("sample trace matrix does not match header shape");
    put<std::uint32_t>(out, s.label);
    put<std::uint64_t>(out, s.onset);
    out.write(reinterpret_cast<const char*>(s.traces.data()), static_cast<std::streamsize>(row * sizeof(float)));
  }
  if (!out) throw RuntimeError("failed writing dataset");
}

void write_dataset(const std::filesystem::path& path, const channel::Dataset& ds) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw RuntimeError("cannot create dataset file '" + path.string() + "'");
  write_dataset(f, ds);
}

channel::Dataset read_dataset(std::istream& in) {
  expect_magic(in, kMagic);
  auto ver = get<std::uint32_t>(in, "container version");
  if (ver != kContainerVersion) throw ValidationError("unsupported dataset container version " + std::to_string(ver));
  json h;
  try {
    h = json::parse(get_string(in, "dataset header"));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad dataset header: ") + e.what());
  }
  channel::Dataset ds;
  try {
    ds.version = h.at("version").get<std::uint32_t>();
    ds.dt = h.at("dt").get<double>();
    ds.or_panel = h.at("or_panel").get<std::vector<std::string>>();
    ds.class_labels = h.at("class_labels").get<std::vector<std::string>>();
    ds.n_orco = h.at("n_orco").get<int>();
    ds.master_seed = h.at("master_seed").get<std::uint64_t>();
    ds.t_total = h.at("t_total").get<std::size_t>();
    ds.t_data = h.at("t_data").get<std::size_t>();
    ds.input_rms = h.at("input_rms").get<double>();
    ds.provenance = h.at("provenance").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad dataset header: ") + e.what());
  }
  const auto n = h.at("n_samples").get<std::size_t>();
  const std::size_t row = ds.n_or() * ds.t_total;
  ds.samples.resize(n);
  for (auto& s : ds.samples) {
    s.label = get<std::uint32_t>(in, "sample label");
    if (s.label >= ds.class_labels.size()) throw ValidationError("sample label out of range");
    s.onset = get<std::uint64_t>(in, "sample onset");
    s.traces.resize(row);
    if (!in.read(reinterpret_cast<char*>(s.traces.data()), static_cast<std::streamsize>(row * sizeof(float))))
      throw ValidationError("truncated sample payload");
  }
  return ds;
}

channel::Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open dataset file '" + path.string() + "'");
  return read_dataset(f);
}

}  // namespace olfsim::io
