#pragma once

// Run configuration: built-in defaults, overlaid by a JSON file, then by
// `section.key=value` overrides. Unknown keys are rejected. Relative input
// paths resolve against the config file's directory.
//
// The config hash is FNV-1a over the canonical JSON of the effective config,
// leaving out paths.output_dir and the execution section, so where results go
// and how many threads computed them never change the outputs.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "olfsim/analog.hpp"
#include "olfsim/channel.hpp"
#include "olfsim/door.hpp"
#include "olfsim/snn.hpp"

namespace olfsim::config {

struct OdorSet {
  std::string name;
  std::vector<std::string> odors;
};

struct EncodeSettings {
  std::string set;
  std::size_t n_or = 3;
  analog::LnaParams lna;
  analog::AnalogNeuronParams neuron;
  analog::InjectionMap injection;
  aer::ReceiverModel receiver;  // seed is filled per sample
  std::vector<double> sweep;    // amplitude factors
};

struct RunConfig {
  std::uint64_t master_seed = 0;
  int runs = 10;
  unsigned threads = 1;

  std::filesystem::path response_matrix;
  std::filesystem::path whitelist;
  std::filesystem::path output_dir;

  std::vector<OdorSet> odor_sets;  // sorted by name
  bool include_sfr = true;
  door::SfrSource sfr_source = door::SfrSource::FromMatrix;

  std::vector<std::size_t> curve_n;  // separability curve points
  std::vector<std::size_t> n_or;     // panel sizes for generate/train
  // Set name -> receptor list. A set with an explicit panel is generated at
  // that panel's size only, without consulting select output.
  std::map<std::string, std::vector<std::string>> explicit_panels;

  channel::GeneratorConfig generator;
  snn::TrainConfig train;
  EncodeSettings encode;

  std::string effective_json;  // canonical, single line
  std::string hash;            // 16 hex digits

  const OdorSet& odor_set(const std::string& name) const;
};

struct LoadOptions {
  std::optional<std::filesystem::path> file;
  std::vector<std::string> overrides;  // "a.b=value"; value parsed as JSON, else taken as a string
  std::optional<std::filesystem::path> output_dir;  // wins over env and file
  bool use_env = true;                               // honour OLFSIM_OUTPUT_DIR
};

RunConfig load_config(const LoadOptions& opts);

// Built-in defaults as pretty JSON (master_seed is null and must be set).
std::string default_config_json();

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

// Stable per-work-item seeds.
std::uint64_t dataset_seed(std::uint64_t master, const std::string& set, std::size_t n_or);
std::uint64_t train_seed(std::uint64_t master, const std::string& set, std::size_t n_or);

}  // namespace olfsim::config
