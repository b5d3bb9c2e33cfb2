#include "olfsim/model_io.hpp"

#include <fstream>

#include "binary.hpp"
#include "json.hpp"

namespace olfsim::io {

using nlohmann::json;
using namespace detail;

namespace {
constexpr char kMagic[9] = "OLFSIMNN";
constexpr std::uint32_t kVersion = 1;

void put_matrix(std::ostream& out, const snn::Matrix& m) {
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

void get_matrix(std::istream& in, snn::Matrix& m) {
  if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double))))
    throw ValidationError("truncated model weight payload");
}
}  // namespace

void write_model(std::ostream& out, const snn::SnnModel& m, const std::string& provenance) {
  m.validate();
  json h;
  h["n_in"] = m.n_in;
  h["n_hidden"] = m.n_hidden;
  h["n_out"] = m.n_out;
  h["alpha"] = m.alpha;
  h["v_thr"] = m.v_thr;
  h["c"] = m.c;
  h["dt"] = m.dt;
  h["quant_bits"] = m.quant_bits;
  h["input_scale"] = m.input_scale;
  h["scale_in"] = m.scale_in;
  h["scale_out"] = m.scale_out;
  h["provenance"] = provenance;
  out.write(kMagic, 8);
  put<std::uint32_t>(out, kVersion);
  put_string(out, h.dump());
  put_matrix(out, m.w_in);
  put_matrix(out, m.w_out);
  if (!out) throw RuntimeError("failed writing model");
}

void write_model(const std::filesystem::path& path, const snn::SnnModel& m, const std::string& provenance) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw RuntimeError("cannot create model file '" + path.string() + "'");
  write_model(f, m, provenance);
}

snn::SnnModel read_model(std::istream& in, std::string* provenance) {
  expect_magic(in, kMagic);
  if (auto v = get<std::uint32_t>(in, "model version"); v != kVersion)
    throw ValidationError("unsupported model file version " + std::to_string(v));
  snn::SnnModel m;
  try {
    json h = json::parse(get_string(in, "model header"));
    m = snn::make_model(h.at("n_in").get<int>(), h.at("n_hidden").get<int>(), h.at("n_out").get<int>());
    m.alpha = h.at("alpha").get<double>();
    m.v_thr = h.at("v_thr").get<double>();
    m.c = h.at("c").get<double>();
    m.dt = h.at("dt").get<double>();
    m.quant_bits = h.at("quant_bits").get<int>();
    m.input_scale = h.at("input_scale").get<double>();
    m.scale_in = h.at("scale_in").get<double>();
    m.scale_out = h.at("scale_out").get<double>();
    if (provenance) *provenance = h.at("provenance").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad model header: ") + e.what());
  }
  get_matrix(in, m.w_in);
  get_matrix(in, m.w_out);
  m.validate();
  return m;
}

snn::SnnModel read_model(const std::filesystem::path& path, std::string* provenance) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open model file '" + path.string() + "'");
  return read_model(f, provenance);
}

}  // namespace olfsim::io
