#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "olfsim/commands.hpp"
#include "olfsim/config.hpp"
#include "olfsim/dataset_io.hpp"
#include "olfsim/error.hpp"
#include "support.hpp"

using namespace olfsim;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kData = OLFSIM_DATA_DIR;

struct RunResult {
  int code;
  std::string out, err;
};

RunResult run_cli(const fs::path& dir, const std::string& args, const std::string& env = "") {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.string() + "' && " + env + " '" + OLFSIM_CLI + "' " + args + " > '" +
                          out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testing::read_file(out), testing::read_file(err)};
}

// Small but complete pipeline config with absolute input paths.
json small_config() {
  json j;
  j["master_seed"] = 7;
  j["runs"] = 1;
  j["paths"] = {{"response_matrix", kData + "/door_response_matrix_standin.csv"},
                {"whitelist", kData + "/single_or_units.txt"},
                {"output_dir", "out"}};
  j["odor_sets"] = {{"file", kData + "/odor_sets_standin.json"}};
  j["generate"] = {{"n_or", {3}}, {"samples_per_class", 10}, {"t_total", 300}, {"t_data", 150}};
  j["train"] = {{"epochs", 1}, {"n_hidden", 8}, {"batch_size", 5}};
  j["encode"] = {{"set", "blue"}, {"n_or", 3}};
  return j;
}

fs::path write_config(const testing::TempDir& dir, const json& j, const std::string& name = "cfg.json") {
  testing::write_file(dir / name, j.dump(2));
  return dir / name;
}

config::RunConfig load(const fs::path& file, std::vector<std::string> overrides = {}) {
  config::LoadOptions o;
  o.file = file;
  o.overrides = std::move(overrides);
  o.use_env = false;
  return config::load_config(o);
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::vector<std::string> data_lines(const fs::path& p) {
  std::vector<std::string> v;
  for (auto& l : lines(testing::read_file(p)))
    if (!l.empty() && l[0] != '#') v.push_back(l);
  return v;
}

}  // namespace

TEST_CASE("config: defaults load once a seed is given") {
  testing::TempDir dir("cfg");
  auto cfg = load(write_config(dir, small_config()));
  CHECK(cfg.master_seed == 7);
  CHECK(cfg.odor_sets.size() == 3);
  CHECK(cfg.odor_sets[0].name == "blue");
  CHECK(cfg.generator.samples_per_class == 10);
  CHECK(cfg.train.epochs == 1);
  CHECK(cfg.train.n_hidden == 8);
  CHECK(cfg.output_dir == "out");  // outputs stay relative to the working directory
  CHECK(cfg.hash.size() == 16);
  auto j = json::parse(cfg.effective_json);
  CHECK(j["master_seed"] == 7);
}

TEST_CASE("config: seed is mandatory") {
  testing::TempDir dir("cfg");
  auto j = small_config();
  j.erase("master_seed");
  CHECK_THROWS_AS(load(write_config(dir, j)), ValidationError);
  j["master_seed"] = nullptr;
  CHECK_THROWS_AS(load(write_config(dir, j)), ValidationError);
  CHECK(load(write_config(dir, j), {"master_seed=3"}).master_seed == 3);
}

TEST_CASE("config: unknown keys, bad types and missing files are rejected") {
  testing::TempDir dir("cfg");
  auto j = small_config();
  j["train"]["epochz"] = 3;
  CHECK_THROWS_AS(load(write_config(dir, j)), ValidationError);
  j = small_config();
  j["train"]["epochs"] = "many";
  CHECK_THROWS_AS(load(write_config(dir, j)), ValidationError);
  j = small_config();
  j["paths"]["whitelist"] = "/nonexistent/units.txt";
  CHECK_THROWS_AS(load(write_config(dir, j)), ValidationError);
  testing::write_file(dir / "broken.json", "{ not json");
  CHECK_THROWS_AS(load(dir / "broken.json"), ValidationError);
  CHECK_THROWS_AS(load(write_config(dir, small_config()), {"train.nope=1"}), ValidationError);
  CHECK_THROWS_AS(load(write_config(dir, small_config()), {"novalue"}), ValidationError);
}

TEST_CASE("config: overrides apply after the file, and hash tracks content") {
  testing::TempDir dir("cfg");
  const auto file = write_config(dir, small_config());
  auto base = load(file);
  auto more = load(file, {"train.epochs=4", "encode.lna.gain_db=40"});
  CHECK(more.train.epochs == 4);
  CHECK(more.encode.lna.gain_db == 40.0);
  CHECK(more.hash != base.hash);
  // Where outputs go and how many threads run do not change the hash.
  auto moved = load(file, {"paths.output_dir=\"elsewhere\"", "execution.threads=4"});
  CHECK(moved.threads == 4);
  CHECK(moved.hash == base.hash);
  CHECK(load(file).hash == base.hash);
}

TEST_CASE("config: output directory precedence is flag, then environment, then file") {
  testing::TempDir dir("cfg");
  const auto file = write_config(dir, small_config());
  ::setenv("OLFSIM_OUTPUT_DIR", (dir / "from_env").c_str(), 1);
  config::LoadOptions o;
  o.file = file;
  CHECK(config::load_config(o).output_dir == dir / "from_env");
  o.output_dir = dir / "from_flag";
  CHECK(config::load_config(o).output_dir == dir / "from_flag");
  o.output_dir.reset();
  o.use_env = false;
  CHECK(config::load_config(o).output_dir == "out");
  ::unsetenv("OLFSIM_OUTPUT_DIR");
}

TEST_CASE("config: odor set validation") {
  testing::TempDir dir("cfg");
  auto j = small_config();
  j["odor_sets"]["inline"] = {{"empty", json::array()}};
  CHECK_THROWS_AS(load(write_config(dir, j)), ValidationError);
  j["odor_sets"]["inline"] = {{"bad name!", {"x"}}};
  CHECK_THROWS_AS(load(write_config(dir, j)), ValidationError);
  auto ok = load(write_config(dir, small_config()));
  CHECK_THROWS_AS(ok.odor_set("purple"), ValidationError);
}

TEST_CASE("config: per-item seeds are stable and distinct") {
  CHECK(config::dataset_seed(1, "blue", 3) == config::dataset_seed(1, "blue", 3));
  CHECK(config::dataset_seed(1, "blue", 3) != config::dataset_seed(1, "blue", 21));
  CHECK(config::dataset_seed(1, "blue", 3) != config::dataset_seed(1, "green", 3));
  CHECK(config::dataset_seed(1, "blue", 3) != config::train_seed(1, "blue", 3));
  CHECK(config::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(config::hex64(255) == "00000000000000ff");
}

TEST_CASE("quantile interpolates linearly") {
  CHECK(commands::quantile({3.0}, 0.5) == 3.0);
  CHECK(commands::quantile({4.0, 1.0, 3.0, 2.0}, 0.5) == doctest::Approx(2.5));
  CHECK(commands::quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.25) == doctest::Approx(2.0));
  CHECK(commands::quantile({1.0, 2.0}, 1.0) == 2.0);
}

TEST_CASE("cli: defaults, help and usage errors") {
  testing::TempDir dir("cli");
  auto d = run_cli(dir.path(), "defaults");
  CHECK(d.code == 0);
  auto j = json::parse(d.out);
  CHECK(j["master_seed"].is_null());
  CHECK(j.contains("train"));
  CHECK(run_cli(dir.path(), "--help").code == 0);
  CHECK(run_cli(dir.path(), "").code == 1);
  CHECK(run_cli(dir.path(), "frobnicate").code == 1);
}

TEST_CASE("cli: validation failures exit with 1 and a diagnostic") {
  testing::TempDir dir("cli");
  auto j = small_config();
  j["master_seed"] = nullptr;
  write_config(dir, j);
  auto r = run_cli(dir.path(), "select -c cfg.json");
  CHECK(r.code == 1);
  CHECK(r.err.find("master_seed") != std::string::npos);

  write_config(dir, small_config());
  CHECK(run_cli(dir.path(), "train -c cfg.json").code == 1);  // no dataset yet
  CHECK(run_cli(dir.path(), "select -c cfg.json --set select.bogus=1").code == 1);
  j = small_config();
  j["odor_sets"]["inline"] = {{"nothing", json::array()}};
  write_config(dir, j, "empty.json");
  CHECK(run_cli(dir.path(), "generate -c empty.json").code == 1);
}

TEST_CASE("cli: stalled AER receiver is a runtime failure") {
  testing::TempDir dir("cli");
  write_config(dir, small_config());
  REQUIRE(run_cli(dir.path(), "select -c cfg.json").code == 0);
  // Long enough traces for the analog neurons to fire.
  REQUIRE(run_cli(dir.path(), "generate -c cfg.json --set generate.t_total=3000 --set generate.t_data=2000").code == 0);
  // Acknowledgment latency longer than the timeout.
  auto r = run_cli(dir.path(),
                   "encode -c cfg.json --set generate.t_total=3000 --set generate.t_data=2000 "
                   "--set encode.receiver.latency_min=0.01 --set encode.receiver.latency_max=0.02");
  CHECK(r.code == 2);
  CHECK(r.err.find("stalled") != std::string::npos);
}

TEST_CASE("cli: full pipeline, provenance headers and reruns") {
  testing::TempDir dir("cli");
  write_config(dir, small_config());
  const auto out = dir / "out";
  auto cfg = load(dir / "cfg.json");

  REQUIRE(run_cli(dir.path(), "select -c cfg.json").code == 0);
  for (auto name : {"selection_blue.csv", "selection_orange.csv", "selection_green.csv", "panels.csv",
                    "separability_curve.csv"}) {
    REQUIRE(fs::exists(out / name));
    auto first = lines(testing::read_file(out / name)).at(0);
    CHECK(first.find("config_hash=" + cfg.hash) != std::string::npos);
    CHECK(first.find("master_seed=7") != std::string::npos);
  }
  // Curve: global max of the normalized column is 1.
  double mx = 0;
  for (auto& l : data_lines(out / "separability_curve.csv")) {
    if (l.rfind("set,", 0) == 0) continue;
    mx = std::max(mx, std::stod(l.substr(l.rfind(',') + 1)));
  }
  CHECK(mx == doctest::Approx(1.0));
  const auto sel = testing::read_file(out / "selection_blue.csv");
  REQUIRE(run_cli(dir.path(), "select -c cfg.json").code == 0);
  CHECK(testing::read_file(out / "selection_blue.csv") == sel);

  REQUIRE(run_cli(dir.path(), "generate -c cfg.json").code == 0);
  auto ds = io::read_dataset(out / "dataset_green_n3.olfds");
  CHECK(ds.samples.size() == 40);  // 3 odors + SFR, 10 each
  CHECK(ds.n_or() == 3);
  CHECK(ds.provenance.find(cfg.hash) != std::string::npos);

  REQUIRE(run_cli(dir.path(), "train -c cfg.json").code == 0);
  auto acc = data_lines(out / "accuracy.csv");
  REQUIRE(acc.size() == 1 + 3 * 2);  // header, then one run row and one summary row per set
  for (std::size_t i = 1; i < acc.size(); i += 2) {
    auto run_acc = acc[i].substr(0, acc[i].rfind(",,"));
    run_acc = run_acc.substr(run_acc.rfind(',') + 1);
    CHECK(acc[i + 1].find(",summary,,") != std::string::npos);
    // With one run the summary median equals that run.
    CHECK(acc[i + 1].find(",summary,," + run_acc + ",") != std::string::npos);
  }
  CHECK(fs::exists(out / "model_blue_n3_run0.olfmodel"));
  const auto acc_bytes = testing::read_file(out / "accuracy.csv");
  auto again = run_cli(dir.path(), "train -c cfg.json");
  CHECK(again.code == 0);
  CHECK(again.err.find("nothing to do") != std::string::npos);
  CHECK(testing::read_file(out / "accuracy.csv") == acc_bytes);

  REQUIRE(run_cli(dir.path(), "encode -c cfg.json").code == 0);
  auto rates = data_lines(out / "rates.csv");
  CHECK(rates.size() == 1 + 4 * 3);  // 4 classes x 3 channels
  auto events = data_lines(out / "aer_events_class0.csv");
  CHECK(events.at(0) == "time_s,neuron_id,phase");
  CHECK((events.size() - 1) % 4 == 0);
  // Sweep counts never fall as the amplitude grows.
  std::map<std::string, long> last;
  for (auto& l : data_lines(out / "rate_sweep.csv")) {
    if (l.rfind("factor", 0) == 0) continue;
    auto parts = lines(std::string(l));
    std::vector<std::string> f;
    std::stringstream ss(l);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    const long n = std::stol(f.at(3));
    if (last.count(f[1])) CHECK(n >= last[f[1]]);
    last[f[1]] = n;
  }

  REQUIRE(run_cli(dir.path(), "report -c cfg.json").code == 0);
  CHECK(data_lines(out / "fig5_summary.csv").size() == 1 + 3);
  CHECK(fs::exists(out / "fig3_summary.csv"));
}

TEST_CASE("cli: zero-amplitude input produces no spikes") {
  testing::TempDir dir("cli");
  channel::Dataset ds;
  ds.or_panel = {"Or1", "Or2", "Or3"};
  ds.class_labels = {"silent"};
  ds.t_total = 500;
  ds.t_data = 100;
  ds.input_rms = 1.0;
  ds.samples.push_back({0, 0, std::vector<float>(1500, 0.0f)});
  io::write_dataset(dir / "zero.olfds", ds);
  write_config(dir, small_config());
  REQUIRE(run_cli(dir.path(), "encode -c cfg.json --dataset zero.olfds").code == 0);
  for (auto& l : data_lines(dir / "out" / "rates.csv")) {
    if (l.rfind("class", 0) == 0) continue;
    CHECK(l.find(",0,0") != std::string::npos);
  }
}

TEST_CASE("cli: seed changes payload but not schema; output dir from flag and environment") {
  testing::TempDir dir("cli");
  write_config(dir, small_config());
  REQUIRE(run_cli(dir.path(), "select -c cfg.json").code == 0);
  REQUIRE(run_cli(dir.path(), "generate -c cfg.json").code == 0);
  REQUIRE(run_cli(dir.path(), "select -c cfg.json --seed 8 -o out8").code == 0);
  REQUIRE(run_cli(dir.path(), "generate -c cfg.json --seed 8 -o out8").code == 0);
  auto a = io::read_dataset(dir / "out" / "dataset_blue_n3.olfds");
  auto b = io::read_dataset(dir / "out8" / "dataset_blue_n3.olfds");
  CHECK(a.samples.size() == b.samples.size());
  CHECK(a.or_panel == b.or_panel);
  CHECK(a.samples[0].traces.size() == b.samples[0].traces.size());
  CHECK(a.samples[0].traces != b.samples[0].traces);
  CHECK(b.provenance.find("\"master_seed\":8") != std::string::npos);

  auto r = run_cli(dir.path(), "select -c cfg.json", "OLFSIM_OUTPUT_DIR='" + (dir / "envout").string() + "'");
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "envout" / "panels.csv"));
}
