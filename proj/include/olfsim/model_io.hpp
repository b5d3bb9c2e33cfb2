#pragma once

// Model file: magic "OLFSIMNN", u32 version, length-prefixed JSON header
// {n_in, n_hidden, n_out, alpha, v_thr, c, dt, quant_bits, input_scale,
// scale_in, scale_out, provenance}, then w_in and w_out as float64
// column-major. Round trip is exact.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "olfsim/snn.hpp"

namespace olfsim::io {

void write_model(std::ostream& out, const snn::SnnModel& m, const std::string& provenance = {});
void write_model(const std::filesystem::path& path, const snn::SnnModel& m, const std::string& provenance = {});

snn::SnnModel read_model(std::istream& in, std::string* provenance = nullptr);
snn::SnnModel read_model(const std::filesystem::path& path, std::string* provenance = nullptr);

}  // namespace olfsim::io
