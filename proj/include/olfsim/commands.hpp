#pragma once

// Pipeline commands. Each reads only the config and the declared artifacts in
// the output directory, and writes files whose headers carry the config hash
// and master seed:
//
//   select   -> selection_<set>.csv, panels.csv, separability_curve.csv
//   generate -> dataset_<set>_n<n>.olfds
//   train    -> model_<set>_n<n>_run<r>.olfmodel, accuracy.csv
//   encode   -> aer_events_class<k>.csv, rates.csv, rate_sweep.csv
//   report   -> fig3_summary.csv, fig5_summary.csv

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "olfsim/config.hpp"

namespace olfsim::commands {

struct Outcome {
  std::vector<std::filesystem::path> written;
  bool skipped = false;  // train: outputs already current
};

Outcome cmd_select(const config::RunConfig& cfg, std::ostream& log);
Outcome cmd_generate(const config::RunConfig& cfg, std::ostream& log);
Outcome cmd_train(const config::RunConfig& cfg, std::ostream& log);
// dataset defaults to dataset_<encode.set>_n<encode.n_or>.olfds in the output dir.
Outcome cmd_encode(const config::RunConfig& cfg, const std::optional<std::filesystem::path>& dataset,
                   std::ostream& log);
Outcome cmd_report(const config::RunConfig& cfg, std::ostream& log);

// Receptor matrix restricted to the whitelist with missing cells set to 0,
// and the per-set odor x receptor tables built from it (SFR row last).
door::ResponseMatrix load_panel_matrix(const config::RunConfig& cfg);
door::ResponseMatrix odor_table(const config::RunConfig& cfg, const door::ResponseMatrix& panel,
                                const std::string& set);

// Linear-interpolation quantile (q in [0,1]) of unsorted values.
double quantile(std::vector<double> values, double q);

std::filesystem::path dataset_path(const config::RunConfig& cfg, const std::string& set, std::size_t n_or);

}  // namespace olfsim::commands
