#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "edrvfl/exec.hpp"
#include "edrvfl/features.hpp"
#include "edrvfl/iol.hpp"
#include "edrvfl/regret.hpp"
#include "edrvfl/stream.hpp"

namespace edrvfl::bench {

inline constexpr const char* kLibraryVersion = "1.0.0";

enum class EnsembleChoice { mean, median, softmax_mean };

struct SplitConfig {
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct CsvSourceConfig {
  std::string path;
  std::vector<std::string> targets;
  bool shuffle = true;
  std::uint64_t shuffle_seed = 0;
};

struct ExportConfig {
  bool per_rep_curves = false;  // raw per-repetition curve rows in the CSV
};

// One declarative description drives both runners; presets are these, as JSON.
struct ExperimentConfig {
  std::string name = "experiment";
  std::string mode = "bench";  // "simulate" (bare linear learner) or "bench" (cascade)
  stream::Task task = stream::Task::regression;
  std::vector<iol::Style> styles = {iol::Style::ridge, iol::Style::forward};
  std::uint64_t seed = 0;
  std::size_t reps = 1;
  double lambda = 1.0;
  std::vector<double> per_layer_lambda;  // optional override, one per layer
  double s_factor = 1.0;
  iol::SurrogatePolicy surrogate{};
  bool clip_predictions = false;
  ExecPolicy exec = ExecPolicy::openmp;
  std::optional<stream::SyntheticConfig> synthetic;
  std::optional<CsvSourceConfig> csv;
  double batch_fraction = 0.05;
  features::NetworkConfig network;
  stream::NormMethod normalization = stream::NormMethod::none;
  SplitConfig split;
  EnsembleChoice ensemble = EnsembleChoice::mean;
  ExportConfig export_cfg;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);

struct ReportRow {
  std::string style;
  long rep = 0;  // -1 marks aggregate rows
  double t = 0.0;
  std::string series;
  std::string stat;  // "value" for raw rows; "mean"/"std"/quartiles for aggregates
  double value = 0.0;
};

struct ExperimentReport {
  std::string run_id;
  nlohmann::json config_echo;
  std::string library_version = kLibraryVersion;
  std::vector<ReportRow> rows;
  nlohmann::json summary;
};

// Deterministic id: config digest + seed, no timestamps.
std::string make_run_id(const ExperimentConfig& cfg);

double metric_rmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);
double metric_accuracy(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& onehot_truth);
std::vector<double> per_class_accuracy(const Eigen::MatrixXd& scores,
                                       const Eigen::MatrixXd& onehot_truth);

// Per-trial outcome of the bare-linear synthetic study.
struct TrialOutcome {
  double final_oracle_dist = 0.0;  // ||beta_final - beta_oracle||^2
  double cum_loss = 0.0;
  double cum_loss_clipped = 0.0;
  double cr_vs_expert = 0.0;          // clipped learner losses vs offline expert
  double cr_vs_expert_raw = 0.0;      // unclipped variant
  double cr_vs_expert_shifted = 0.0;  // prior term dropped
  double cr_vs_oracle = 0.0;
  double bound = 0.0;  // style bound at measured constants
  bool bound_satisfied = false;
  double y_max = 0.0;
  double d_max = 0.0;
};

struct SimulationResult {
  // outcome[style_index][rep]
  std::vector<std::vector<TrialOutcome>> outcomes;
  std::vector<iol::Style> styles;
  ExperimentReport report;
};

// Streams the generating oracle's batches through a single linear learner per
// style (paired across styles: same stream per repetition), recording regret
// ledgers, oracle distances and bound checks.
SimulationResult run_simulation(const ExperimentConfig& cfg);

// Full cascade experiment: split, normalize with training statistics, chunk,
// then one online pass per (style, repetition) with online test evaluation
// after every step (and before the first).
ExperimentReport run_experiment(const ExperimentConfig& cfg);

struct AblationPoint {
  nlohmann::json value;
  std::string run_id;
  std::uint64_t stream_hash = 0;
  nlohmann::json final_metrics;
};

struct AblationReport {
  std::string axis;
  std::vector<AblationPoint> points;
  nlohmann::json summary;
};

// Re-runs the base config with one axis swept; seeds are shared so the
// comparison is paired. Axes that do not touch the stream keep stream_hash
// constant across points. Supported axes: n_nodes, n_layers, lambda,
// batch_fraction, normalization, activation.
AblationReport ablation_sweep(const ExperimentConfig& base, const std::string& axis,
                              const std::vector<nlohmann::json>& values);

void export_csv(const ExperimentReport& report, std::ostream& out);
void export_json(const ExperimentReport& report, std::ostream& out);
nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);
nlohmann::json ablation_to_json(const AblationReport& report);

}  // namespace edrvfl::bench
