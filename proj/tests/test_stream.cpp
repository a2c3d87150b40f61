#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"

#include "edrvfl/stream.hpp"

using namespace edrvfl;
using namespace edrvfl::stream;

namespace {

std::string write_temp_csv(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path.string();
}

}  // namespace

TEST_CASE("synthetic stream is deterministic per seed") {
  SyntheticConfig cfg;
  cfg.t_horizon = 7;
  cfg.batch_size = 4;
  cfg.k = 5;
  cfg.seed = 42;
  const auto a = generate_synthetic_stream(cfg);
  const auto b = generate_synthetic_stream(cfg);
  REQUIRE(a.stream.batches.size() == 7);
  CHECK(a.oracle_weights == b.oracle_weights);
  for (std::size_t t = 0; t < 7; ++t) {
    CHECK(a.stream.batches[t].x == b.stream.batches[t].x);
    CHECK(a.stream.batches[t].y == b.stream.batches[t].y);
  }
  cfg.seed = 43;
  const auto c = generate_synthetic_stream(cfg);
  CHECK(a.stream.batches[0].x != c.stream.batches[0].x);
  CHECK(stream_hash(a.stream) == stream_hash(b.stream));
  CHECK(stream_hash(a.stream) != stream_hash(c.stream));
}

TEST_CASE("synthetic stream with zero noise is exactly linear") {
  SyntheticConfig cfg;
  cfg.t_horizon = 3;
  cfg.batch_size = 6;
  cfg.k = 4;
  cfg.noise_factor = 0.0;
  cfg.seed = 1;
  const auto s = generate_synthetic_stream(cfg);
  for (const auto& b : s.stream.batches) {
    const Eigen::MatrixXd expect = b.x * s.oracle_weights;
    CHECK((b.y - expect).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("noise_scale signal_std scales the residual by the generator norm") {
  SyntheticConfig cfg;
  cfg.t_horizon = 50;
  cfg.batch_size = 10;
  cfg.k = 8;
  cfg.oracle_mean = 20.0;
  cfg.noise_factor = 1.0;
  cfg.seed = 5;

  auto residual_sd = [](const SyntheticStream& s) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& b : s.stream.batches) {
      const Eigen::MatrixXd r = b.y - b.x * s.oracle_weights;
      acc += r.squaredNorm();
      n += static_cast<std::size_t>(r.size());
    }
    return std::sqrt(acc / static_cast<double>(n));
  };

  cfg.noise_scale = NoiseScale::absolute;
  const double sd_abs = residual_sd(generate_synthetic_stream(cfg));
  cfg.noise_scale = NoiseScale::signal_std;
  const auto rel = generate_synthetic_stream(cfg);
  const double sd_rel = residual_sd(rel);
  CHECK(sd_abs == doctest::Approx(1.0).epsilon(0.15));
  CHECK(sd_rel == doctest::Approx(rel.oracle_weights.norm()).epsilon(0.15));
  CHECK(sd_rel / sd_abs > 10.0);
}

TEST_CASE("synthetic config validation") {
  SyntheticConfig cfg;
  cfg.t_horizon = 0;
  CHECK_THROWS_AS(generate_synthetic_stream(cfg), ConfigError);
}

TEST_CASE("csv loader: regression fixture") {
  const auto path = write_temp_csv("edrvfl_reg.csv",
                                   "a,b,target\n"
                                   "1.0,2.0,3.5\n"
                                   "4.0,5.0,-1.25\n"
                                   "7.0,8.0,0.0\n");
  CsvOptions opt;
  opt.target_columns = {"target"};
  opt.shuffle = false;
  const RowTable t = load_csv_rows(path, opt);
  REQUIRE(t.x.rows() == 3);
  REQUIRE(t.x.cols() == 2);
  REQUIRE(t.y.cols() == 1);
  CHECK(t.x(0, 0) == 1.0);
  CHECK(t.x(2, 1) == 8.0);
  CHECK(t.y(1, 0) == -1.25);
  CHECK(t.meta.feature_names == std::vector<std::string>{"a", "b"});
  CHECK(t.meta.target_names == std::vector<std::string>{"target"});
  CHECK_FALSE(t.meta.shuffled);
}

TEST_CASE("csv loader: target column may sit anywhere") {
  const auto path = write_temp_csv("edrvfl_mid.csv",
                                   "a,target,b\n"
                                   "1.0,10.0,2.0\n"
                                   "3.0,20.0,4.0\n");
  CsvOptions opt;
  opt.target_columns = {"target"};
  opt.shuffle = false;
  const RowTable t = load_csv_rows(path, opt);
  CHECK(t.x(0, 0) == 1.0);
  CHECK(t.x(0, 1) == 2.0);
  CHECK(t.y(0, 0) == 10.0);
  CHECK(t.y(1, 0) == 20.0);
}

TEST_CASE("csv loader: seeded shuffle is deterministic and seed-sensitive") {
  std::string body = "a,target\n";
  for (int i = 0; i < 30; ++i) body += std::to_string(i) + ".0," + std::to_string(i) + ".5\n";
  const auto path = write_temp_csv("edrvfl_shuf.csv", body);
  CsvOptions opt;
  opt.target_columns = {"target"};
  opt.shuffle = true;
  opt.shuffle_seed = 9;
  const RowTable a = load_csv_rows(path, opt);
  const RowTable b = load_csv_rows(path, opt);
  CHECK(a.x == b.x);
  opt.shuffle_seed = 10;
  const RowTable c = load_csv_rows(path, opt);
  CHECK(a.x != c.x);
  // same multiset of rows either way
  std::multiset<double> sa, sc;
  for (Eigen::Index r = 0; r < a.x.rows(); ++r) {
    sa.insert(a.x(r, 0));
    sc.insert(c.x(r, 0));
  }
  CHECK(sa == sc);
}

TEST_CASE("csv loader: classification one-hot with sorted label mapping") {
  const auto path = write_temp_csv("edrvfl_cls.csv",
                                   "f,label\n"
                                   "0.1,3\n"
                                   "0.2,1\n"
                                   "0.3,2\n"
                                   "0.4,1\n");
  CsvOptions opt;
  opt.target_columns = {"label"};
  opt.task = Task::classification;
  opt.shuffle = false;
  const RowTable t = load_csv_rows(path, opt);
  REQUIRE(t.y.cols() == 3);
  CHECK(t.meta.class_labels == std::vector<double>{1.0, 2.0, 3.0});
  // row 0 has label 3 -> last column; rows 1 and 3 label 1 -> first column
  CHECK(t.y(0, 2) == 1.0);
  CHECK(t.y(1, 0) == 1.0);
  CHECK(t.y(2, 1) == 1.0);
  CHECK(t.y(3, 0) == 1.0);
  CHECK(t.y.rowwise().sum().minCoeff() == 1.0);
  CHECK(t.y.rowwise().sum().maxCoeff() == 1.0);
}

TEST_CASE("csv loader: error coordinates and validation") {
  const auto bad_cell = write_temp_csv("edrvfl_bad.csv", "a,t\n1.0,2.0\nx,3.0\n");
  CsvOptions opt;
  opt.target_columns = {"t"};
  CHECK_THROWS_WITH_AS(load_csv_rows(bad_cell, opt),
                       "csv: non-numeric cell 'x' at data row 2, column 'a'", ConfigError);

  const auto ragged = write_temp_csv("edrvfl_ragged.csv", "a,t\n1.0,2.0,9.0\n");
  CHECK_THROWS_AS(load_csv_rows(ragged, opt), ConfigError);

  const auto fine = write_temp_csv("edrvfl_fine.csv", "a,t\n1.0,2.0\n");
  CsvOptions missing;
  missing.target_columns = {"nope"};
  CHECK_THROWS_AS(load_csv_rows(fine, missing), ConfigError);
  CHECK_THROWS_AS(load_csv_rows("/nonexistent/path.csv", opt), ConfigError);

  CsvOptions multi;
  multi.target_columns = {"a", "t"};
  multi.task = Task::classification;
  CHECK_THROWS_AS(load_csv_rows(fine, multi), ConfigError);
}

TEST_CASE("chunk_rows: floor sizing, ceil count, remainder in the final batch") {
  RowTable t;
  t.x.resize(10, 2);
  t.y.resize(10, 1);
  for (int r = 0; r < 10; ++r) {
    t.x(r, 0) = r;
    t.x(r, 1) = 2 * r;
    t.y(r, 0) = -r;
  }

  SUBCASE("fraction 0.3 over 10 rows gives 3,3,3,1") {
    const BatchStream s = chunk_rows(t, 0.3);
    REQUIRE(s.batches.size() == 4);
    CHECK(s.batches[0].x.rows() == 3);
    CHECK(s.batches[1].x.rows() == 3);
    CHECK(s.batches[2].x.rows() == 3);
    CHECK(s.batches[3].x.rows() == 1);
    CHECK(s.batches[3].x(0, 0) == 9.0);  // order preserved
    CHECK(s.rows() == 10);
  }
  SUBCASE("fraction 1.0 gives one batch") {
    const BatchStream s = chunk_rows(t, 1.0);
    REQUIRE(s.batches.size() == 1);
    CHECK(s.batches[0].x.rows() == 10);
  }
  SUBCASE("oversized final batch absorbs the remainder") {
    RowTable wide;
    wide.x.resize(100, 1);
    wide.y.resize(100, 1);
    wide.x.setZero();
    wide.y.setZero();
    const BatchStream s = chunk_rows(wide, 0.095);  // size 9, count 11
    REQUIRE(s.batches.size() == 11);
    for (std::size_t i = 0; i + 1 < s.batches.size(); ++i) CHECK(s.batches[i].x.rows() == 9);
    CHECK(s.batches.back().x.rows() == 10);
  }
  SUBCASE("degenerate fractions are rejected") {
    CHECK_THROWS_AS(chunk_rows(t, 0.0), ConfigError);
    CHECK_THROWS_AS(chunk_rows(t, 1.5), ConfigError);
    CHECK_THROWS_AS(chunk_rows(t, 0.05), ConfigError);  // floor(10 * 0.05) == 0
  }
}

TEST_CASE("zscore normalization: prefix statistics, zero-variance passthrough, inverse") {
  RowTable t;
  t.x.resize(6, 2);
  t.y.resize(6, 1);
  // column 1 is constant; only the first four rows feed the statistics
  t.x << 1, 7, 2, 7, 3, 7, 4, 7, 100, 7, -50, 7;
  t.y << 2, 4, 6, 8, 10, 12;

  const RowTable n = normalize_rows(t, NormMethod::zscore, 4, true);
  // column 0 prefix: mean 2.5, population sd sqrt(1.25)
  const double sd = std::sqrt(1.25);
  CHECK(n.x(0, 0) == doctest::Approx((1 - 2.5) / sd).epsilon(1e-12));
  CHECK(n.x(4, 0) == doctest::Approx((100 - 2.5) / sd).epsilon(1e-12));
  // zero-variance column untouched
  CHECK(n.x.col(1).minCoeff() == 7.0);
  CHECK(n.x.col(1).maxCoeff() == 7.0);
  // target prefix: mean 5, sd sqrt(5)
  CHECK(n.y(0, 0) == doctest::Approx((2.0 - 5.0) / std::sqrt(5.0)).epsilon(1e-12));
  CHECK(n.meta.normalization == "zscore");

  const Eigen::MatrixXd back = denormalize_targets(n.meta, n.y);
  CHECK((back - t.y).cwiseAbs().maxCoeff() < 1e-12);

  const RowTable keep = normalize_rows(t, NormMethod::zscore, 0, false);
  CHECK(keep.y == t.y);  // targets untouched when excluded

  CHECK_THROWS_AS(normalize_rows(t, NormMethod::zscore, 7, true), ConfigError);
}

TEST_CASE("minmax01 normalization maps the stats range onto [0,1]") {
  RowTable t;
  t.x.resize(4, 2);
  t.y.resize(4, 1);
  t.x << 0, 5, 2, 5, 4, 5, 8, 5;
  t.y << 1, 2, 3, 4;
  const RowTable n = normalize_rows(t, NormMethod::minmax01, 0, false);
  CHECK(n.x(0, 0) == 0.0);
  CHECK(n.x(3, 0) == 1.0);
  CHECK(n.x(1, 0) == doctest::Approx(0.25));
  // constant column collapses to zero
  CHECK(n.x.col(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("batch normalize matches row normalize across batch boundaries") {
  SyntheticConfig cfg;
  cfg.t_horizon = 5;
  cfg.batch_size = 4;
  cfg.k = 3;
  cfg.seed = 2;
  const auto syn = generate_synthetic_stream(cfg);
  const BatchStream normed = normalize(syn.stream, NormMethod::zscore, 2, true);
  REQUIRE(normed.batches.size() == 5);

  RowTable flat;
  flat.meta = syn.stream.meta;
  flat.x.resize(20, 3);
  flat.y.resize(20, 1);
  for (std::size_t i = 0; i < 5; ++i) {
    flat.x.middleRows(static_cast<Eigen::Index>(4 * i), 4) = syn.stream.batches[i].x;
    flat.y.middleRows(static_cast<Eigen::Index>(4 * i), 4) = syn.stream.batches[i].y;
  }
  const RowTable ref = normalize_rows(flat, NormMethod::zscore, 8, true);
  for (std::size_t i = 0; i < 5; ++i) {
    const Eigen::MatrixXd expect = ref.x.middleRows(static_cast<Eigen::Index>(4 * i), 4);
    CHECK((normed.batches[i].x - expect).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("partition_folds: disjoint cover with carved holdout") {
  const FoldPlan plan = partition_folds(23, 4, 0.2, 11);
  CHECK(plan.validation.size() == 4);  // floor(23 * 0.2)
  REQUIRE(plan.folds.size() == 4);

  std::set<std::size_t> seen(plan.validation.begin(), plan.validation.end());
  std::size_t covered = plan.validation.size();
  for (const auto& f : plan.folds) {
    CHECK(f.train.size() + f.test.size() == 19);
    for (auto i : f.test) {
      CHECK(seen.insert(i).second);  // test rows appear in exactly one fold
      ++covered;
    }
    std::set<std::size_t> train(f.train.begin(), f.train.end());
    for (auto i : f.test) CHECK(train.count(i) == 0);
  }
  CHECK(covered == 23);

  // fold sizes differ by at most one
  std::size_t mn = 1000, mx = 0;
  for (const auto& f : plan.folds) {
    mn = std::min(mn, f.test.size());
    mx = std::max(mx, f.test.size());
  }
  CHECK(mx - mn <= 1);

  CHECK_THROWS_AS(partition_folds(23, 1, 0.2, 0), ConfigError);
  CHECK_THROWS_AS(partition_folds(5, 5, 0.2, 0), ConfigError);  // 4 rows left for 5 folds
  CHECK_THROWS_AS(partition_folds(10, 2, 1.0, 0), ConfigError);
}

TEST_CASE("load_csv_stream: one-call pipeline") {
  const auto path = write_temp_csv("edrvfl_pipe.csv",
                                   "a,t\n1,1\n2,2\n3,3\n4,4\n5,5\n6,6\n7,7\n8,8\n9,9\n10,10\n");
  CsvOptions opt;
  opt.target_columns = {"t"};
  opt.shuffle = false;
  const BatchStream s = load_csv_stream(path, opt, 0.5);
  REQUIRE(s.batches.size() == 2);
  CHECK(s.batches[0].x.rows() == 5);
  CHECK(s.k == 1);
  CHECK(s.m == 1);
}
