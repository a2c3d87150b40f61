// Command-line front end: run simulations, cascade benchmarks and ablation
// sweeps from JSON configs or named presets, exporting CSV/JSON reports.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "edrvfl/bench.hpp"
#include "edrvfl/errors.hpp"

namespace fs = std::filesystem;
using edrvfl::bench::ExperimentConfig;
using nlohmann::json;

namespace {

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw edrvfl::ConfigError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw edrvfl::ConfigError("invalid JSON in '" + path + "': " + e.what());
  }
  return j;
}

std::string resolve_preset(const std::string& name) {
  std::vector<fs::path> candidates;
  if (const char* dir = std::getenv("EDRVFL_PRESET_DIR")) {
    candidates.push_back(fs::path(dir) / (name + ".json"));
  }
  candidates.push_back(fs::path("presets") / (name + ".json"));
  for (const auto& p : candidates) {
    if (fs::exists(p)) return p.string();
  }
  std::string tried;
  for (const auto& p : candidates) tried += " " + p.string();
  throw edrvfl::ConfigError("preset '" + name + "' not found, tried:" + tried);
}

struct CommonArgs {
  std::string config_path;
  std::string preset;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::string style = "";  // ridge|forward|both
  std::string exec = "";   // serial|openmp
  bool per_rep_curves = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  auto* cfg = cmd->add_option("--config", a.config_path, "JSON config file");
  auto* pre = cmd->add_option("--preset", a.preset, "named preset (presets/<name>.json)");
  cfg->excludes(pre);
  cmd->add_option("--out", a.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--seed", a.seed, "override the config seed");
  cmd->add_option("--reps", a.reps, "override the repetition count");
  cmd->add_option("--style", a.style, "ridge, forward or both")
      ->check(CLI::IsMember({"ridge", "forward", "both"}));
  cmd->add_option("--exec", a.exec, "serial or openmp")
      ->check(CLI::IsMember({"serial", "openmp"}));
  cmd->add_flag("--per-rep-curves", a.per_rep_curves, "export raw per-repetition curve rows");
}

ExperimentConfig load_config(const CommonArgs& a, const std::string& forced_mode) {
  std::string path = a.config_path;
  if (path.empty()) {
    if (a.preset.empty()) throw edrvfl::ConfigError("pass --config or --preset");
    path = resolve_preset(a.preset);
  }
  json j = load_json_file(path);
  j["mode"] = forced_mode;
  ExperimentConfig cfg = edrvfl::bench::config_from_json(j);
  if (a.seed) cfg.seed = *a.seed;
  if (a.reps) cfg.reps = *a.reps;
  if (a.style == "ridge") cfg.styles = {edrvfl::iol::Style::ridge};
  if (a.style == "forward") cfg.styles = {edrvfl::iol::Style::forward};
  if (a.style == "both") {
    cfg.styles = {edrvfl::iol::Style::ridge, edrvfl::iol::Style::forward};
  }
  if (a.exec == "serial") cfg.exec = edrvfl::ExecPolicy::serial;
  if (a.exec == "openmp") cfg.exec = edrvfl::ExecPolicy::openmp;
  if (a.per_rep_curves) cfg.export_cfg.per_rep_curves = true;
  return cfg;
}

void write_report(const edrvfl::bench::ExperimentReport& report, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path csv_path = fs::path(out_dir) / (report.run_id + ".csv");
  const fs::path json_path = fs::path(out_dir) / (report.run_id + ".json");
  {
    std::ofstream out(csv_path);
    if (!out) throw edrvfl::ConfigError("cannot write '" + csv_path.string() + "'");
    edrvfl::bench::export_csv(report, out);
  }
  {
    std::ofstream out(json_path);
    if (!out) throw edrvfl::ConfigError("cannot write '" + json_path.string() + "'");
    edrvfl::bench::export_json(report, out);
  }
  std::cout << "wrote " << csv_path.string() << "\n";
  std::cout << "wrote " << json_path.string() << "\n";
}

json parse_axis_value(const std::string& token) {
  try {
    return json::parse(token);
  } catch (const json::parse_error&) {
    return json(token);  // bare strings, e.g. normalization names
  }
}

int run(int argc, char** argv) {
  CLI::App app{"streaming incremental learner for stacked random-feature networks"};
  app.require_subcommand(1);

  CommonArgs sim_args, bench_args, abl_args;
  std::string abl_axis;
  std::vector<std::string> abl_values;
  std::string export_in, export_out;

  auto* sim = app.add_subcommand("simulate", "bare linear study on a generated stream");
  add_common(sim, sim_args);
  auto* ben = app.add_subcommand("bench", "cascade experiment on a CSV or generated source");
  add_common(ben, bench_args);
  auto* abl = app.add_subcommand("ablate", "sweep one config axis, seeds paired");
  add_common(abl, abl_args);
  abl->add_option("--axis", abl_axis,
                  "n_nodes | n_layers | lambda | batch_fraction | normalization | activation")
      ->required();
  abl->add_option("--values", abl_values, "axis values (JSON scalars)")->required();
  auto* exp = app.add_subcommand("export", "re-emit a JSON report as CSV");
  exp->add_option("--in", export_in, "report JSON path")->required();
  exp->add_option("--out", export_out, "CSV path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  if (sim->parsed()) {
    const ExperimentConfig cfg = load_config(sim_args, "simulate");
    const auto result = edrvfl::bench::run_simulation(cfg);
    write_report(result.report, sim_args.out_dir);
    std::cout << result.report.summary.dump(2) << "\n";
  } else if (ben->parsed()) {
    const ExperimentConfig cfg = load_config(bench_args, "bench");
    const auto report = edrvfl::bench::run_experiment(cfg);
    write_report(report, bench_args.out_dir);
    std::cout << report.summary.dump(2) << "\n";
  } else if (abl->parsed()) {
    const ExperimentConfig cfg = load_config(abl_args, "bench");
    std::vector<json> values;
    for (const auto& v : abl_values) values.push_back(parse_axis_value(v));
    const auto report = edrvfl::bench::ablation_sweep(cfg, abl_axis, values);
    fs::create_directories(abl_args.out_dir);
    const fs::path path =
        fs::path(abl_args.out_dir) / (cfg.name + "-" + abl_axis + "-ablation.json");
    std::ofstream out(path);
    if (!out) throw edrvfl::ConfigError("cannot write '" + path.string() + "'");
    out << edrvfl::bench::ablation_to_json(report).dump(2) << "\n";
    std::cout << "wrote " << path.string() << "\n";
  } else if (exp->parsed()) {
    const auto report = edrvfl::bench::report_from_json(load_json_file(export_in));
    if (export_out.empty()) {
      edrvfl::bench::export_csv(report, std::cout);
    } else {
      std::ofstream out(export_out);
      if (!out) throw edrvfl::ConfigError("cannot write '" + export_out + "'");
      edrvfl::bench::export_csv(report, out);
      std::cout << "wrote " << export_out << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const edrvfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const edrvfl::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
