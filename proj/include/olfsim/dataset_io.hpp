#pragma once

// Binary dataset container.
//
//   bytes 0..7   magic "OLFSIMDS"
//   u32          container version
//   u64          header length N
//   N bytes      UTF-8 JSON header {version, dt, or_panel, class_labels,
//                n_orco, master_seed, t_total, t_data, input_rms,
//                n_samples, provenance}
//   per sample   u32 label, u64 onset, float32[n_or * t_total] (row = receptor)
//
// All integers and floats little-endian. Reading back what was written gives
// an identical Dataset and identical bytes.

#include <filesystem>
#include <iosfwd>

#include "olfsim/channel.hpp"

namespace olfsim::io {

void write_dataset(std::ostream& out, const channel::Dataset& ds);
void write_dataset(const std::filesystem::path& path, const channel::Dataset& ds);

channel::Dataset read_dataset(std::istream& in);
channel::Dataset read_dataset(const std::filesystem::path& path);

}  // namespace olfsim::io
