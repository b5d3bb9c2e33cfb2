// olfsim: select -> generate -> train -> encode -> report.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "olfsim/commands.hpp"
#include "olfsim/config.hpp"
#include "olfsim/error.hpp"

#ifndef OLFSIM_DEFAULT_CONFIG
#define OLFSIM_DEFAULT_CONFIG ""
#endif

namespace {

struct Flags {
  std::string config = OLFSIM_DEFAULT_CONFIG;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<unsigned> threads;
  std::optional<std::string> output_dir;
  std::vector<std::size_t> n_or;
  std::optional<std::string> dataset;
};

olfsim::config::RunConfig load(const Flags& f) {
  olfsim::config::LoadOptions o;
  if (!f.config.empty()) o.file = f.config;
  o.overrides = f.overrides;
  if (f.seed) o.overrides.push_back("master_seed=" + std::to_string(*f.seed));
  if (f.runs) o.overrides.push_back("runs=" + std::to_string(*f.runs));
  if (f.threads) o.overrides.push_back("execution.threads=" + std::to_string(*f.threads));
  if (!f.n_or.empty()) {
    std::string list = "[";
    for (std::size_t i = 0; i < f.n_or.size(); ++i) list += (i ? "," : "") + std::to_string(f.n_or[i]);
    o.overrides.push_back("generate.n_or=" + list + "]");
  }
  if (f.output_dir) o.output_dir = *f.output_dir;
  return olfsim::config::load_config(o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic olfactory sensing pipeline: receptor selection, sensor simulation, SNN training, "
               "analog spike encoding"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("-c,--config", f.config, "JSON config file")->capture_default_str();
  app.add_option("--set", f.overrides, "Override a config key, e.g. --set train.epochs=20 (repeatable)");
  app.add_option("--seed", f.seed, "Master seed");
  app.add_option("--runs", f.runs, "Training runs per configuration");
  app.add_option("--threads", f.threads, "Worker threads (results do not depend on this)");
  app.add_option("-o,--output-dir", f.output_dir, "Output directory (overrides OLFSIM_OUTPUT_DIR)");
  app.add_option("--n-or", f.n_or, "Panel sizes, e.g. --n-or 3 21");
  bool print_defaults = false;

  auto* select = app.add_subcommand("select", "Greedy receptor elimination and separability curves");
  auto* generate = app.add_subcommand("generate", "Simulate sensor datasets for the selected panels");
  auto* train = app.add_subcommand("train", "Train and evaluate the spiking classifier");
  auto* encode = app.add_subcommand("encode", "Run traces through the LNA / analog neuron / AER model");
  encode->add_option("--dataset", f.dataset, "Dataset file (default: encode.set at encode.n_or)");
  auto* report = app.add_subcommand("report", "Collate curves and accuracy tables into summaries");
  auto* defaults = app.add_subcommand("defaults", "Print the built-in default config");
  defaults->callback([&] { print_defaults = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (print_defaults) {
      std::cout << olfsim::config::default_config_json() << "\n";
      return 0;
    }
    const auto cfg = load(f);
    std::cerr << "config " << cfg.hash << ", master seed " << cfg.master_seed << ", output '"
              << cfg.output_dir.string() << "'\n";
    olfsim::commands::Outcome out;
    if (select->parsed()) out = olfsim::commands::cmd_select(cfg, std::cerr);
    if (generate->parsed()) out = olfsim::commands::cmd_generate(cfg, std::cerr);
    if (train->parsed()) out = olfsim::commands::cmd_train(cfg, std::cerr);
    if (encode->parsed()) {
      std::optional<std::filesystem::path> ds;
      if (f.dataset) ds = *f.dataset;
      out = olfsim::commands::cmd_encode(cfg, ds, std::cerr);
    }
    if (report->parsed()) out = olfsim::commands::cmd_report(cfg, std::cerr);
    for (const auto& p : out.written) std::cout << p.string() << "\n";
    return 0;
  } catch (const olfsim::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
