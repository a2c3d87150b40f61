#include "edrvfl/stream.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "edrvfl/rng.hpp"

namespace edrvfl::stream {

SyntheticStream generate_synthetic_stream(const SyntheticConfig& cfg) {
  if (cfg.t_horizon == 0 || cfg.batch_size == 0 || cfg.k == 0) {
    throw ConfigError("generate_synthetic_stream: t_horizon, batch_size and k must be positive");
  }
  auto rng = make_engine(cfg.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  Eigen::VectorXd oracle(cfg.k);
  for (std::size_t i = 0; i < cfg.k; ++i) oracle[i] = cfg.oracle_mean + cfg.oracle_std * unit(rng);

  const double noise_sd = cfg.noise_scale == NoiseScale::signal_std
                              ? cfg.noise_factor * oracle.norm()
                              : cfg.noise_factor;

  SyntheticStream out;
  out.oracle_weights = oracle;
  out.stream.k = cfg.k;
  out.stream.m = 1;
  out.stream.meta.source = "synthetic";
  out.stream.meta.task = Task::regression;
  out.stream.batches.reserve(cfg.t_horizon);
  for (std::size_t t = 0; t < cfg.t_horizon; ++t) {
    Batch b;
    b.index = t;
    b.x.resize(cfg.batch_size, cfg.k);
    b.y.resize(cfg.batch_size, 1);
    for (Eigen::Index r = 0; r < b.x.rows(); ++r) {
      for (Eigen::Index c = 0; c < b.x.cols(); ++c) b.x(r, c) = unit(rng);
      b.y(r, 0) = b.x.row(r).dot(oracle) + noise_sd * unit(rng);
    }
    out.stream.batches.push_back(std::move(b));
  }
  return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  auto e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t row, const std::string& col) {
  const std::string cell = trim(raw);
  if (cell.empty()) {
    throw ConfigError("csv: empty cell at data row " + std::to_string(row) + ", column '" + col + "'");
  }
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ConfigError("csv: non-numeric cell '" + cell + "' at data row " + std::to_string(row) +
                      ", column '" + col + "'");
  }
  return value;
}

}  // namespace

RowTable load_csv_rows(const std::string& path, const CsvOptions& opt) {
  std::ifstream in(path);
  if (!in) throw ConfigError("csv: cannot open '" + path + "'");
  if (opt.target_columns.empty()) throw ConfigError("csv: no target columns given");
  if (opt.task == Task::classification && opt.target_columns.size() != 1) {
    throw ConfigError("csv: classification expects exactly one target column");
  }

  std::string line;
  if (!std::getline(in, line)) throw ConfigError("csv: '" + path + "' is empty");
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);

  std::vector<std::size_t> target_idx;
  for (const auto& name : opt.target_columns) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("csv: target column '" + name + "' not in header");
    target_idx.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  std::vector<bool> is_target(header.size(), false);
  for (auto i : target_idx) is_target[i] = true;

  std::vector<std::vector<double>> rows;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row_no;
    auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw ConfigError("csv: data row " + std::to_string(row_no) + " has " +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(header.size()));
    }
    std::vector<double> parsed(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) parsed[c] = parse_cell(cells[c], row_no, header[c]);
    rows.push_back(std::move(parsed));
  }
  if (rows.empty()) throw ConfigError("csv: '" + path + "' has no data rows");

  if (opt.shuffle) {
    auto rng = make_engine(opt.shuffle_seed);
    std::shuffle(rows.begin(), rows.end(), rng);
  }

  const std::size_t n = rows.size();
  const std::size_t k = header.size() - target_idx.size();

  RowTable out;
  out.meta.source = path;
  out.meta.task = opt.task;
  out.meta.shuffled = opt.shuffle;
  out.meta.shuffle_seed = opt.shuffle_seed;
  out.meta.target_names = opt.target_columns;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!is_target[c]) out.meta.feature_names.push_back(header[c]);
  }

  out.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (std::size_t r = 0; r < n; ++r) {
    Eigen::Index xc = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (!is_target[c]) out.x(static_cast<Eigen::Index>(r), xc++) = rows[r][c];
    }
  }

  if (opt.task == Task::classification) {
    std::map<double, std::size_t> classes;
    for (std::size_t r = 0; r < n; ++r) classes.emplace(rows[r][target_idx[0]], 0);
    std::size_t next = 0;
    for (auto& [label, slot] : classes) slot = next++;
    out.meta.class_labels.resize(classes.size());
    for (const auto& [label, slot] : classes) out.meta.class_labels[slot] = label;
    out.y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(classes.size()));
    for (std::size_t r = 0; r < n; ++r) {
      out.y(static_cast<Eigen::Index>(r),
            static_cast<Eigen::Index>(classes.at(rows[r][target_idx[0]]))) = 1.0;
    }
  } else {
    out.y.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(target_idx.size()));
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < target_idx.size(); ++c) {
        out.y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][target_idx[c]];
      }
    }
  }
  return out;
}

BatchStream chunk_rows(const RowTable& rows, double batch_fraction) {
  const std::size_t n = static_cast<std::size_t>(rows.x.rows());
  if (!(batch_fraction > 0.0) || batch_fraction > 1.0) {
    throw ConfigError("chunk_rows: batch_fraction must be in (0, 1]");
  }
  const std::size_t size = static_cast<std::size_t>(std::floor(static_cast<double>(n) * batch_fraction));
  if (size == 0) throw ConfigError("chunk_rows: batch_fraction yields empty batches");
  const std::size_t count = static_cast<std::size_t>(std::ceil(1.0 / batch_fraction));

  BatchStream out;
  out.k = static_cast<std::size_t>(rows.x.cols());
  out.m = static_cast<std::size_t>(rows.y.cols());
  out.meta = rows.meta;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < count && begin < n; ++i) {
    const bool last = (i + 1 == count);
    const std::size_t len = last ? n - begin : std::min(size, n - begin);
    Batch b;
    b.index = i;
    b.x = rows.x.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(len));
    b.y = rows.y.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(len));
    out.batches.push_back(std::move(b));
    begin += len;
  }
  return out;
}

BatchStream load_csv_stream(const std::string& path, const CsvOptions& opt, double batch_fraction) {
  return chunk_rows(load_csv_rows(path, opt), batch_fraction);
}

namespace {

ColumnStats compute_stats(const Eigen::MatrixXd& data, std::size_t stats_rows, NormMethod method) {
  const Eigen::Index n = stats_rows == 0 ? data.rows() : static_cast<Eigen::Index>(stats_rows);
  ColumnStats st;
  st.offset.assign(static_cast<std::size_t>(data.cols()), 0.0);
  st.scale.assign(static_cast<std::size_t>(data.cols()), 1.0);
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    const auto col = data.col(c).head(n);
    if (method == NormMethod::zscore) {
      const double mean = col.mean();
      const double var = (col.array() - mean).square().sum() / static_cast<double>(n);
      const double sd = std::sqrt(var);
      if (sd > 0.0) {
        st.offset[static_cast<std::size_t>(c)] = mean;
        st.scale[static_cast<std::size_t>(c)] = sd;
      }  // zero-variance column passes through unchanged
    } else if (method == NormMethod::minmax01) {
      const double lo = col.minCoeff();
      const double hi = col.maxCoeff();
      st.offset[static_cast<std::size_t>(c)] = lo;
      st.scale[static_cast<std::size_t>(c)] = hi > lo ? hi - lo : 1.0;  // constant column -> 0
    }
  }
  return st;
}

void apply_stats(Eigen::MatrixXd& data, const ColumnStats& st) {
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    data.col(c) = (data.col(c).array() - st.offset[static_cast<std::size_t>(c)]) /
                  st.scale[static_cast<std::size_t>(c)];
  }
}

}  // namespace

RowTable normalize_rows(const RowTable& in, NormMethod method, std::size_t stats_rows,
                        bool include_targets) {
  RowTable out = in;
  out.meta.normalization = norm_method_name(method);
  if (method == NormMethod::none) return out;
  if (stats_rows > static_cast<std::size_t>(in.x.rows())) {
    throw ConfigError("normalize: stats_rows exceeds available rows");
  }
  out.meta.x_stats = compute_stats(in.x, stats_rows, method);
  apply_stats(out.x, out.meta.x_stats);
  if (include_targets) {
    out.meta.y_stats = compute_stats(in.y, stats_rows, method);
    apply_stats(out.y, out.meta.y_stats);
  }
  return out;
}

BatchStream normalize(const BatchStream& in, NormMethod method, std::size_t stats_batches,
                      bool include_targets) {
  if (stats_batches > in.batches.size()) {
    throw ConfigError("normalize: stats_batches exceeds available batches");
  }
  // Flatten, delegate, re-chunk along the original batch boundaries.
  RowTable flat;
  flat.meta = in.meta;
  const std::size_t n = in.rows();
  flat.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in.k));
  flat.y.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in.m));
  Eigen::Index at = 0;
  std::size_t stats_rows = 0;
  for (std::size_t i = 0; i < in.batches.size(); ++i) {
    const auto& b = in.batches[i];
    flat.x.middleRows(at, b.x.rows()) = b.x;
    flat.y.middleRows(at, b.y.rows()) = b.y;
    at += b.x.rows();
    if (stats_batches != 0 && i < stats_batches) stats_rows += static_cast<std::size_t>(b.x.rows());
  }
  RowTable normed = normalize_rows(flat, method, stats_rows, include_targets);

  BatchStream out;
  out.k = in.k;
  out.m = in.m;
  out.meta = normed.meta;
  at = 0;
  for (const auto& b : in.batches) {
    Batch nb;
    nb.index = b.index;
    nb.x = normed.x.middleRows(at, b.x.rows());
    nb.y = normed.y.middleRows(at, b.y.rows());
    at += b.x.rows();
    out.batches.push_back(std::move(nb));
  }
  return out;
}

Eigen::MatrixXd denormalize_targets(const StreamMetadata& meta, const Eigen::MatrixXd& y) {
  if (meta.y_stats.empty()) return y;
  Eigen::MatrixXd out = y;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    out.col(c) = out.col(c).array() * meta.y_stats.scale[static_cast<std::size_t>(c)] +
                 meta.y_stats.offset[static_cast<std::size_t>(c)];
  }
  return out;
}

std::string norm_method_name(NormMethod m) {
  switch (m) {
    case NormMethod::zscore: return "zscore";
    case NormMethod::minmax01: return "minmax01";
    default: return "none";
  }
}

FoldPlan partition_folds(std::size_t n_rows, std::size_t n_folds, double holdout_fraction,
                         std::uint64_t seed) {
  if (n_folds < 2) throw ConfigError("partition_folds: n_folds must be >= 2");
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) {
    throw ConfigError("partition_folds: holdout_fraction must be in [0, 1)");
  }
  std::vector<std::size_t> idx(n_rows);
  std::iota(idx.begin(), idx.end(), 0);
  auto rng = make_engine(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  const std::size_t n_holdout =
      static_cast<std::size_t>(std::floor(static_cast<double>(n_rows) * holdout_fraction));
  const std::size_t remaining = n_rows - n_holdout;
  if (remaining < n_folds) {
    throw ConfigError("partition_folds: " + std::to_string(remaining) +
                      " rows cannot populate " + std::to_string(n_folds) + " folds");
  }

  FoldPlan plan;
  plan.validation.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_holdout));
  const std::size_t base = remaining / n_folds;
  const std::size_t extra = remaining % n_folds;
  std::size_t begin = n_holdout;
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (std::size_t f = 0; f < n_folds; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    spans.emplace_back(begin, len);
    begin += len;
  }
  for (std::size_t f = 0; f < n_folds; ++f) {
    FoldPlan::Fold fold;
    fold.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(spans[f].first),
                     idx.begin() + static_cast<std::ptrdiff_t>(spans[f].first + spans[f].second));
    for (std::size_t g = 0; g < n_folds; ++g) {
      if (g == f) continue;
      fold.train.insert(fold.train.end(),
                        idx.begin() + static_cast<std::ptrdiff_t>(spans[g].first),
                        idx.begin() + static_cast<std::ptrdiff_t>(spans[g].first + spans[g].second));
    }
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

namespace {

void hash_bytes(std::uint64_t& h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

std::uint64_t stream_hash(const BatchStream& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::uint64_t dims[2] = {s.k, s.m};
  hash_bytes(h, dims, sizeof(dims));
  for (const auto& b : s.batches) {
    const std::uint64_t shape[2] = {static_cast<std::uint64_t>(b.x.rows()),
                                    static_cast<std::uint64_t>(b.x.cols())};
    hash_bytes(h, shape, sizeof(shape));
    hash_bytes(h, b.x.data(), sizeof(double) * static_cast<std::size_t>(b.x.size()));
    hash_bytes(h, b.y.data(), sizeof(double) * static_cast<std::size_t>(b.y.size()));
  }
  return h;
}

}  // namespace edrvfl::stream
