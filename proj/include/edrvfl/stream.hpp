#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edrvfl/errors.hpp"

namespace edrvfl::stream {

enum class Task { regression, classification };

struct Batch {
  Eigen::MatrixXd x;  // rows x k
  Eigen::MatrixXd y;  // rows x m
  std::size_t index = 0;
};

// Per-column affine map: normalized = (value - offset) / scale.
struct ColumnStats {
  std::vector<double> offset;
  std::vector<double> scale;
  bool empty() const { return offset.empty(); }
};

struct StreamMetadata {
  std::string source;                // "synthetic" or the CSV path
  Task task = Task::regression;
  std::string normalization = "none";
  ColumnStats x_stats;
  ColumnStats y_stats;               // identity for classification targets
  std::vector<double> class_labels;  // original label value per one-hot column
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;
  bool shuffled = false;
  std::uint64_t shuffle_seed = 0;
};

struct BatchStream {
  std::vector<Batch> batches;
  std::size_t k = 0;  // feature columns
  std::size_t m = 0;  // target columns
  StreamMetadata meta;

  std::size_t rows() const {
    std::size_t n = 0;
    for (const auto& b : batches) n += static_cast<std::size_t>(b.x.rows());
    return n;
  }
};

// Flat row form, used before splitting/chunking.
struct RowTable {
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
  StreamMetadata meta;
};

enum class NoiseScale {
  absolute,    // eps ~ N(0, noise_factor^2)
  signal_std,  // eps ~ N(0, (noise_factor * ||oracle||_2)^2), i.e. relative to the
               // std of x.beta for x ~ N(0, I)
};

struct SyntheticConfig {
  std::size_t t_horizon = 1000;  // number of batches
  std::size_t batch_size = 10;
  std::size_t k = 23;
  double oracle_mean = 20.0;
  double oracle_std = 1.0;
  double noise_factor = 0.15;
  NoiseScale noise_scale = NoiseScale::signal_std;
  std::uint64_t seed = 0;
};

struct SyntheticStream {
  BatchStream stream;
  Eigen::VectorXd oracle_weights;  // k, the generating weights
};

// x entries i.i.d. standard normal, y = x.oracle + eps. Deterministic per seed.
SyntheticStream generate_synthetic_stream(const SyntheticConfig& cfg);

struct CsvOptions {
  std::vector<std::string> target_columns;
  Task task = Task::regression;
  bool shuffle = true;  // seeded row shuffle before chunking
  std::uint64_t shuffle_seed = 0;
};

// Header CSV, all cells numeric. Classification requires exactly one target
// column whose distinct values become one-hot columns (mapping recorded in
// metadata). Malformed cells raise ConfigError with row/column coordinates.
RowTable load_csv_rows(const std::string& path, const CsvOptions& opt);

// floor(rows * fraction) rows per batch, ceil(1 / fraction) batches; the final
// batch takes the remainder and short final batches are kept.
BatchStream chunk_rows(const RowTable& rows, double batch_fraction);

BatchStream load_csv_stream(const std::string& path, const CsvOptions& opt, double batch_fraction);

enum class NormMethod { none, zscore, minmax01 };

// stats_rows == 0 uses all rows as the statistics source, otherwise the
// leading stats_rows rows (the training prefix). Zero-variance columns pass
// through unchanged under zscore; constant columns map to 0 under minmax01.
// include_targets is normally false for classification (one-hot targets).
RowTable normalize_rows(const RowTable& in, NormMethod method, std::size_t stats_rows = 0,
                        bool include_targets = true);
BatchStream normalize(const BatchStream& in, NormMethod method, std::size_t stats_batches = 0,
                      bool include_targets = true);

// Undo the recorded target map (for reporting on the original scale).
Eigen::MatrixXd denormalize_targets(const StreamMetadata& meta, const Eigen::MatrixXd& y);

std::string norm_method_name(NormMethod m);

struct FoldPlan {
  std::vector<std::size_t> validation;  // shared held-out rows
  struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
  };
  std::vector<Fold> folds;
};

// Disjoint index sets; fold tests cover all non-holdout rows exactly once.
// Throws ConfigError when rows cannot populate every fold.
FoldPlan partition_folds(std::size_t n_rows, std::size_t n_folds, double holdout_fraction,
                         std::uint64_t seed);

// Pull-based access used by the online runner, so tests can instrument how
// often each batch is touched (the runner never retrains on old batches).
struct IBatchSource {
  virtual ~IBatchSource() = default;
  virtual std::size_t size() const = 0;
  virtual const Batch& at(std::size_t i) = 0;
};

struct StreamSource final : IBatchSource {
  explicit StreamSource(const BatchStream& s) : stream_(&s) {}
  std::size_t size() const override { return stream_->batches.size(); }
  const Batch& at(std::size_t i) override { return stream_->batches.at(i); }

 private:
  const BatchStream* stream_;
};

// FNV-1a over dimensions and raw matrix bytes; used to verify paired ablation
// sweeps really saw identical streams.
std::uint64_t stream_hash(const BatchStream& s);

}  // namespace edrvfl::stream
