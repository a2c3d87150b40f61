// Wall-clock comparison of the serial and OpenMP execution policies on the
// two parallel lanes (feature extraction row blocks, per-layer updates),
// asserting bit-identical outputs along the way.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <omp.h>

#include "edrvfl/exec.hpp"
#include "edrvfl/features.hpp"
#include "edrvfl/iol.hpp"
#include "edrvfl/rng.hpp"
#include "edrvfl/stream.hpp"

using edrvfl::ExecPolicy;

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct Workload {
  edrvfl::stream::BatchStream stream;
  edrvfl::features::RandomWeights weights;
};

Workload make_workload(std::size_t rows, std::size_t k, std::size_t nodes, std::size_t layers,
                       std::size_t batches) {
  edrvfl::stream::SyntheticConfig sc;
  sc.t_horizon = batches;
  sc.batch_size = rows / batches;
  sc.k = k;
  sc.seed = 7;
  Workload w;
  w.stream = edrvfl::stream::generate_synthetic_stream(sc).stream;
  edrvfl::features::NetworkConfig net;
  net.n_nodes = nodes;
  net.n_layers = layers;
  net.seed = 11;
  w.weights = edrvfl::features::init_random_weights(k, net);
  return w;
}

bool identical(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t rows = 4000, k = 16, nodes = 96, layers = 8, batches = 40, trials = 3;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    const std::size_t v = static_cast<std::size_t>(std::strtoull(argv[i + 1], nullptr, 10));
    if (flag == "--rows") rows = v;
    else if (flag == "--k") k = v;
    else if (flag == "--nodes") nodes = v;
    else if (flag == "--layers") layers = v;
    else if (flag == "--batches") batches = v;
    else if (flag == "--trials") trials = v;
    else {
      std::fprintf(stderr, "unknown flag %s\n", flag.c_str());
      return 2;
    }
  }
  std::printf("threads available: %d\n", omp_get_max_threads());
  std::printf("workload: rows=%zu k=%zu nodes=%zu layers=%zu batches=%zu\n", rows, k, nodes,
              layers, batches);

  const Workload w = make_workload(rows, k, nodes, layers, batches);
  Eigen::MatrixXd x_all(static_cast<Eigen::Index>(w.stream.rows()),
                        static_cast<Eigen::Index>(w.stream.k));
  {
    Eigen::Index at = 0;
    for (const auto& b : w.stream.batches) {
      x_all.middleRows(at, b.x.rows()) = b.x;
      at += b.x.rows();
    }
  }

  // Lane 1: feature extraction over row blocks.
  double best_serial = 1e300, best_omp = 1e300;
  std::vector<Eigen::MatrixXd> feats_serial, feats_omp;
  for (std::size_t t = 0; t < trials; ++t) {
    double t0 = now_ms();
    feats_serial = edrvfl::features::extract_features(x_all, w.weights, ExecPolicy::serial);
    best_serial = std::min(best_serial, now_ms() - t0);
    t0 = now_ms();
    feats_omp = edrvfl::features::extract_features(x_all, w.weights, ExecPolicy::openmp);
    best_omp = std::min(best_omp, now_ms() - t0);
  }
  bool ok = true;
  for (std::size_t l = 0; l < feats_serial.size(); ++l) {
    ok = ok && identical(feats_serial[l], feats_omp[l]);
  }
  std::printf("extract_features  serial %8.2f ms   openmp %8.2f ms   speedup %.2fx   %s\n",
              best_serial, best_omp, best_serial / best_omp, ok ? "identical" : "MISMATCH");
  if (!ok) return 1;

  // Lane 2: the online pass, layers updated in parallel.
  auto run_pass = [&](ExecPolicy policy, double* ms) {
    auto learner = edrvfl::iol::init_ensemble(w.weights, w.stream.m, 0.5, edrvfl::iol::Style::ridge);
    edrvfl::stream::StreamSource source(w.stream);
    edrvfl::iol::RunOptions opt;
    opt.exec = policy;
    const double t0 = now_ms();
    learner = edrvfl::iol::run_iol(std::move(learner), source, opt);
    *ms = now_ms() - t0;
    return learner;
  };
  double ms_serial = 0.0, ms_omp = 0.0, best_run_serial = 1e300, best_run_omp = 1e300;
  edrvfl::iol::EnsembleLearner l_serial, l_omp;
  for (std::size_t t = 0; t < trials; ++t) {
    l_serial = run_pass(ExecPolicy::serial, &ms_serial);
    best_run_serial = std::min(best_run_serial, ms_serial);
    l_omp = run_pass(ExecPolicy::openmp, &ms_omp);
    best_run_omp = std::min(best_run_omp, ms_omp);
  }
  ok = l_serial.layers.size() == l_omp.layers.size();
  for (std::size_t l = 0; ok && l < l_serial.layers.size(); ++l) {
    ok = identical(l_serial.layers[l].beta, l_omp.layers[l].beta) &&
         identical(l_serial.layers[l].eta, l_omp.layers[l].eta);
  }
  std::printf("run_iol (ridge)   serial %8.2f ms   openmp %8.2f ms   speedup %.2fx   %s\n",
              best_run_serial, best_run_omp, best_run_serial / best_run_omp,
              ok ? "identical" : "MISMATCH");
  return ok ? 0 : 1;
}
