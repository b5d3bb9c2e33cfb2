#include "olfsim/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "olfsim/dataset_io.hpp"
#include "olfsim/error.hpp"
#include "olfsim/model_io.hpp"
#include "olfsim/selection.hpp"

namespace olfsim::commands {

namespace fs = std::filesystem;
using config::RunConfig;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string header(const RunConfig& cfg, const char* command) {
  return "# olfsim " + std::string(command) + " config_hash=" + cfg.hash +
         " master_seed=" + std::to_string(cfg.master_seed) + "\n# config=" + cfg.effective_json + "\n";
}

std::string provenance(const RunConfig& cfg, const char* command, const std::string& set, std::size_t n_or,
                       std::uint64_t seed) {
  nlohmann::json p;
  p["command"] = command;
  p["config_hash"] = cfg.hash;
  p["master_seed"] = cfg.master_seed;
  p["set"] = set;
  p["n_or"] = n_or;
  p["seed"] = seed;
  p["config"] = nlohmann::json::parse(cfg.effective_json);
  return p.dump();
}

// Writes through a temporary so a failed run never leaves a partial file.
void write_text(const fs::path& path, const std::string& content, Outcome& out) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw RuntimeError("cannot write '" + tmp.string() + "'");
    f << content;
    if (!f) throw RuntimeError("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
  out.written.push_back(path);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string join(const std::vector<std::string>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += v[i];
  }
  return s;
}

struct Table {
  std::string first_line;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw ValidationError("table is missing column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
  }
};

Table read_table(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open '" + path.string() + "'");
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (lineno == 1) t.first_line = line;
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line, ',');
    if (t.columns.empty()) {
      t.columns = cells;
      continue;
    }
    if (cells.size() != t.columns.size())
      throw ParseError("'" + path.filename().string() + "' row has " + std::to_string(cells.size()) +
                           " cells, expected " + std::to_string(t.columns.size()),
                       lineno);
    t.rows.push_back(std::move(cells));
  }
  if (t.columns.empty()) throw ValidationError("'" + path.string() + "' has no header row");
  return t;
}

bool same_hash(const std::string& first_line, const RunConfig& cfg) {
  return first_line.find("config_hash=" + cfg.hash + " ") != std::string::npos;
}

std::vector<std::size_t> generate_sizes(const RunConfig& cfg, const std::string& set) {
  std::vector<std::size_t> n = cfg.n_or;
  if (set == cfg.encode.set && !std::count(n.begin(), n.end(), cfg.encode.n_or)) n.push_back(cfg.encode.n_or);
  std::sort(n.begin(), n.end());
  return n;
}

fs::path model_path(const RunConfig& cfg, const std::string& set, std::size_t n, int run) {
  return cfg.output_dir / ("model_" + set + "_n" + std::to_string(n) + "_run" + std::to_string(run) + ".olfmodel");
}

struct Job {
  std::string set;
  std::size_t n_or;
  std::vector<std::string> panel;  // only for explicit panels
};

std::vector<Job> generate_jobs(const RunConfig& cfg) {
  std::vector<Job> jobs;
  for (const auto& s : cfg.odor_sets) {
    if (auto it = cfg.explicit_panels.find(s.name); it != cfg.explicit_panels.end()) {
      jobs.push_back({s.name, it->second.size(), it->second});
      continue;
    }
    for (auto n : generate_sizes(cfg, s.name)) jobs.push_back({s.name, n, {}});
  }
  return jobs;
}

}  // namespace

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ValidationError("quantile of an empty list");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

fs::path dataset_path(const RunConfig& cfg, const std::string& set, std::size_t n_or) {
  return cfg.output_dir / ("dataset_" + set + "_n" + std::to_string(n_or) + ".olfds");
}

door::ResponseMatrix load_panel_matrix(const RunConfig& cfg) {
  auto m = door::load_response_matrix(cfg.response_matrix);
  auto keep = door::load_unit_whitelist(cfg.whitelist);
  return door::impute_missing(door::filter_single_or_units(m, keep));
}

door::ResponseMatrix odor_table(const RunConfig& cfg, const door::ResponseMatrix& panel, const std::string& set) {
  return door::select_odors(panel, cfg.odor_set(set).odors, cfg.include_sfr, cfg.sfr_source);
}

Outcome cmd_select(const RunConfig& cfg, std::ostream& log) {
  Outcome out;
  ensure_dir(cfg.output_dir);
  const auto panel = load_panel_matrix(cfg);
  const std::string head = header(cfg, "select");

  std::vector<std::pair<std::string, door::ResponseMatrix>> tables;
  std::string panels = head + "set,n_or,panel\n";
  for (const auto& s : cfg.odor_sets) {
    auto table = odor_table(cfg, panel, s.name);
    auto trace = selection::reduce(table, 1);
    std::string csv = head + "step,removed_or,remaining,separability\n";
    csv += "0,," + std::to_string(table.cols()) + "," + num(trace.initial_separability) + "\n";
    for (std::size_t k = 0; k < trace.removed_or_ids.size(); ++k)
      csv += std::to_string(k + 1) + "," + trace.removed_or_ids[k] + "," + std::to_string(table.cols() - k - 1) +
             "," + num(trace.separability_after_each[k]) + "\n";
    write_text(cfg.output_dir / ("selection_" + s.name + ".csv"), csv, out);

    for (auto n : generate_sizes(cfg, s.name)) {
      // Survivors after removing the first cols-n eliminated receptors, in matrix order.
      std::set<std::string> gone(trace.removed_or_ids.begin(),
                                 trace.removed_or_ids.begin() + static_cast<std::ptrdiff_t>(table.cols() - n));
      std::vector<std::string> keep;
      for (const auto& id : table.or_ids())
        if (!gone.count(id)) keep.push_back(id);
      panels += s.name + "," + std::to_string(n) + "," + join(keep, ';') + "\n";
    }
    log << "select: " << s.name << " (" << table.rows() << " odor rows, " << table.cols() << " receptors)\n";
    tables.emplace_back(s.name, std::move(table));
  }
  write_text(cfg.output_dir / "panels.csv", panels, out);

  auto curve = selection::separability_curve(tables, cfg.curve_n);
  std::string csv = head + "set,n_or,separability,normalized\n";
  for (const auto& p : curve) csv += p.set + "," + std::to_string(p.n_or) + "," + num(p.raw) + "," + num(p.normalized) + "\n";
  write_text(cfg.output_dir / "separability_curve.csv", csv, out);
  return out;
}

Outcome cmd_generate(const RunConfig& cfg, std::ostream& log) {
  Outcome out;
  ensure_dir(cfg.output_dir);
  const auto panel = load_panel_matrix(cfg);
  const auto jobs = generate_jobs(cfg);

  std::map<std::pair<std::string, std::size_t>, std::vector<std::string>> selected;
  const bool need_select = std::any_of(jobs.begin(), jobs.end(), [](const Job& j) { return j.panel.empty(); });
  if (need_select) {
    const auto pfile = cfg.output_dir / "panels.csv";
    if (!fs::exists(pfile))
      throw ValidationError("'" + pfile.string() + "' not found; run 'select' first or give explicit panels");
    auto t = read_table(pfile);
    if (!same_hash(t.first_line, cfg)) log << "generate: note: panels.csv was written under a different config\n";
    const auto cs = t.col("set"), cn = t.col("n_or"), cp = t.col("panel");
    for (const auto& r : t.rows) selected[{r[cs], std::stoul(r[cn])}] = split(r[cp], ';');
  }

  for (const auto& job : jobs) {
    std::vector<std::string> ids = job.panel;
    if (ids.empty()) {
      auto it = selected.find({job.set, job.n_or});
      if (it == selected.end())
        throw ValidationError("panels.csv has no panel for set '" + job.set + "' at n_or=" +
                              std::to_string(job.n_or) + "; rerun 'select'");
      ids = it->second;
    }
    auto table = odor_table(cfg, panel, job.set);
    std::vector<std::size_t> cols;
    for (const auto& id : ids) {
      auto c = table.find_or(id);
      if (!c) throw ValidationError("panel receptor '" + id + "' is not in the filtered matrix");
      cols.push_back(*c);
    }
    const auto seed = config::dataset_seed(cfg.master_seed, job.set, job.n_or);
    auto ds = channel::generate_dataset(table.with_columns(cols), cfg.generator, seed);
    ds.provenance = provenance(cfg, "generate", job.set, job.n_or, seed);
    const auto path = dataset_path(cfg, job.set, job.n_or);
    fs::path tmp = path;
    tmp += ".tmp";
    io::write_dataset(tmp, ds);
    fs::rename(tmp, path);
    out.written.push_back(path);
    log << "generate: " << path.filename().string() << " (" << ds.samples.size() << " samples, "
        << ds.class_labels.size() << " classes, " << ds.n_or() << " receptors)\n";
  }
  return out;
}

Outcome cmd_train(const RunConfig& cfg, std::ostream& log) {
  Outcome out;
  ensure_dir(cfg.output_dir);
  std::vector<std::pair<std::string, std::size_t>> jobs;
  for (const auto& s : cfg.odor_sets) {
    if (auto it = cfg.explicit_panels.find(s.name); it != cfg.explicit_panels.end())
      jobs.emplace_back(s.name, it->second.size());
    else
      for (auto n : cfg.n_or) jobs.emplace_back(s.name, n);
  }

  const auto acc_path = cfg.output_dir / "accuracy.csv";
  if (fs::exists(acc_path)) {
    std::ifstream f(acc_path);
    std::string first;
    std::getline(f, first);
    bool complete = same_hash(first, cfg);
    for (const auto& [set, n] : jobs)
      for (int r = 0; complete && r < cfg.runs; ++r) complete = fs::exists(model_path(cfg, set, n, r));
    if (complete) {
      log << "train: outputs for config " << cfg.hash << " already exist in '" << cfg.output_dir.string()
          << "'; nothing to do\n";
      out.skipped = true;
      return out;
    }
  }

  std::string csv = header(cfg, "train") + "set,n_or,row,best_epoch,test_accuracy,q1,q3\n";
  for (const auto& [set, n] : jobs) {
    const auto dpath = dataset_path(cfg, set, n);
    if (!fs::exists(dpath))
      throw ValidationError("dataset '" + dpath.string() + "' not found; run 'generate' first");
    auto ds = io::read_dataset(dpath);
    if (ds.n_or() != n) throw ValidationError("dataset '" + dpath.string() + "' has the wrong receptor count");
    snn::TrainConfig tc = cfg.train;
    tc.seed = config::train_seed(cfg.master_seed, set, n);
    auto results = snn::train_runs(ds, tc, cfg.threads);
    std::vector<double> accs;
    for (std::size_t r = 0; r < results.size(); ++r) {
      const auto& res = results[r];
      const auto mpath = model_path(cfg, set, n, static_cast<int>(r));
      fs::path tmp = mpath;
      tmp += ".tmp";
      io::write_model(tmp, res.model, provenance(cfg, "train", set, n, tc.seed));
      fs::rename(tmp, mpath);
      out.written.push_back(mpath);
      accs.push_back(res.test.accuracy);
      csv += set + "," + std::to_string(n) + "," + std::to_string(r) + "," + std::to_string(res.best_epoch) + "," +
             num(res.test.accuracy) + ",,\n";
    }
    const double med = quantile(accs, 0.5), q1 = quantile(accs, 0.25), q3 = quantile(accs, 0.75);
    csv += set + "," + std::to_string(n) + ",summary,," + num(med) + "," + num(q1) + "," + num(q3) + "\n";
    log << "train: " << set << " n_or=" << n << " median test accuracy " << num(med) << " (q1 " << num(q1)
        << ", q3 " << num(q3) << ")\n";
  }
  write_text(acc_path, csv, out);
  return out;
}

Outcome cmd_encode(const RunConfig& cfg, const std::optional<fs::path>& dataset, std::ostream& log) {
  Outcome out;
  ensure_dir(cfg.output_dir);
  const fs::path dpath = dataset ? *dataset : dataset_path(cfg, cfg.encode.set, cfg.encode.n_or);
  if (!fs::exists(dpath)) throw ValidationError("dataset '" + dpath.string() + "' not found");
  const auto ds = io::read_dataset(dpath);
  if (ds.samples.empty()) throw ValidationError("dataset '" + dpath.string() + "' has no samples");

  analog::EncodeConfig ec;
  ec.lna = cfg.encode.lna;
  ec.neurons.assign(ds.n_or(), cfg.encode.neuron);
  ec.injection = cfg.encode.injection;
  ec.dt = ds.dt;
  ec.receiver = cfg.encode.receiver;
  const double duration = static_cast<double>(ds.t_total) * ds.dt;

  auto traces_of = [&](std::size_t idx, double factor) {
    std::vector<std::vector<double>> tr(ds.n_or(), std::vector<double>(ds.t_total));
    const auto& s = ds.samples[idx];
    for (std::size_t c = 0; c < ds.n_or(); ++c)
      for (std::size_t k = 0; k < ds.t_total; ++k) tr[c][k] = factor * static_cast<double>(s.traces[c * ds.t_total + k]);
    return tr;
  };

  const std::string head = header(cfg, "encode");
  std::string rates = head + "class,label,channel,or_id,spikes,rate_hz\n";
  std::optional<std::size_t> first_sample;
  for (std::size_t k = 0; k < ds.class_labels.size(); ++k) {
    auto it = std::find_if(ds.samples.begin(), ds.samples.end(), [&](const auto& s) { return s.label == k; });
    if (it == ds.samples.end()) continue;
    const auto idx = static_cast<std::size_t>(it - ds.samples.begin());
    if (!first_sample) first_sample = idx;
    ec.receiver.seed = splitmix64(cfg.master_seed ^ config::fnv1a64("encode/" + std::to_string(k)));
    auto r = analog::encode_pipeline(traces_of(idx, 1.0), ec);
    std::string ev = head + "time_s,neuron_id,phase\n";
    for (const auto& sig : r.aer.signals)
      ev += num(sig.time) + "," + std::to_string(sig.neuron_id) + "," + aer::phase_name(sig.phase) + "\n";
    write_text(cfg.output_dir / ("aer_events_class" + std::to_string(k) + ".csv"), ev, out);
    for (std::size_t c = 0; c < ds.n_or(); ++c) {
      const auto n = r.spike_times[c].size();
      rates += std::to_string(k) + "," + ds.class_labels[k] + "," + std::to_string(c) + "," + ds.or_panel[c] + "," +
               std::to_string(n) + "," + num(static_cast<double>(n) / duration) + "\n";
    }
    log << "encode: class " << k << " (" << ds.class_labels[k] << ") " << r.aer.events.size() << " AER events\n";
  }
  write_text(cfg.output_dir / "rates.csv", rates, out);

  std::string sweep = head + "factor,channel,or_id,spikes\n";
  ec.receiver.seed = splitmix64(cfg.master_seed ^ config::fnv1a64("encode/sweep"));
  for (double a : cfg.encode.sweep) {
    auto r = analog::encode_pipeline(traces_of(*first_sample, a), ec);
    for (std::size_t c = 0; c < ds.n_or(); ++c)
      sweep += num(a) + "," + std::to_string(c) + "," + ds.or_panel[c] + "," +
               std::to_string(r.spike_times[c].size()) + "\n";
  }
  write_text(cfg.output_dir / "rate_sweep.csv", sweep, out);
  return out;
}

Outcome cmd_report(const RunConfig& cfg, std::ostream& log) {
  Outcome out;
  const auto acc_path = cfg.output_dir / "accuracy.csv";
  const auto curve_path = cfg.output_dir / "separability_curve.csv";
  if (!fs::exists(acc_path) && !fs::exists(curve_path))
    throw ValidationError("nothing to report: neither accuracy.csv nor separability_curve.csv in '" +
                          cfg.output_dir.string() + "'");
  const std::string head = header(cfg, "report");

  if (fs::exists(acc_path)) {
    auto t = read_table(acc_path);
    const auto cs = t.col("set"), cn = t.col("n_or"), cr = t.col("row"), ca = t.col("test_accuracy");
    std::map<std::pair<std::string, std::size_t>, std::vector<double>> groups;
    for (const auto& r : t.rows)
      if (r[cr] != "summary") groups[{r[cs], std::stoul(r[cn])}].push_back(std::stod(r[ca]));
    std::string csv = head + "set,n_or,runs,median,q1,q3,min,max\n";
    for (const auto& [key, v] : groups)
      csv += key.first + "," + std::to_string(key.second) + "," + std::to_string(v.size()) + "," +
             num(quantile(v, 0.5)) + "," + num(quantile(v, 0.25)) + "," + num(quantile(v, 0.75)) + "," +
             num(*std::min_element(v.begin(), v.end())) + "," + num(*std::max_element(v.begin(), v.end())) + "\n";
    write_text(cfg.output_dir / "fig5_summary.csv", csv, out);
  } else {
    log << "report: accuracy.csv not found, skipping accuracy summary\n";
  }

  if (fs::exists(curve_path)) {
    auto t = read_table(curve_path);
    const auto cs = t.col("set"), cn = t.col("n_or"), cv = t.col("normalized");
    std::vector<std::string> sets;
    std::map<std::size_t, std::map<std::string, std::string>> grid;
    for (const auto& r : t.rows) {
      if (std::find(sets.begin(), sets.end(), r[cs]) == sets.end()) sets.push_back(r[cs]);
      grid[std::stoul(r[cn])][r[cs]] = r[cv];
    }
    std::string csv = head + "n_or";
    for (const auto& s : sets) csv += "," + s;
    csv += "\n";
    for (const auto& [n, row] : grid) {
      csv += std::to_string(n);
      for (const auto& s : sets) {
        auto it = row.find(s);
        csv += "," + (it == row.end() ? std::string() : it->second);
      }
      csv += "\n";
    }
    write_text(cfg.output_dir / "fig3_summary.csv", csv, out);
  } else {
    log << "report: separability_curve.csv not found, skipping separability summary\n";
  }
  return out;
}

}  // namespace olfsim::commands
