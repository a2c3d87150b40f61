// Acceptance gate: nine release criteria, one verdict line each.
// Exit status is nonzero if any criterion fails; skipped criteria
// (missing optional datasets) do not fail the gate.
#include <Eigen/Dense>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "edrvfl/bench.hpp"
#include "edrvfl/features.hpp"
#include "edrvfl/iol.hpp"
#include "edrvfl/regret.hpp"
#include "edrvfl/rng.hpp"
#include "edrvfl/stream.hpp"

using namespace edrvfl;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

bool g_any_fail = false;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
  if (!pass) g_any_fail = true;
}

void report_skip(int criterion, const std::string& detail) {
  std::printf("[SKIP] criterion %d: %s\n", criterion, detail.c_str());
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return buf;
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                              double scale = 1.0) {
  std::normal_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * unit(rng);
  }
  return m;
}

double rel_diff(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  return (got - want).norm() / want.norm();
}

// 1. Final incremental ridge state equals the primal solve of the stacked
//    regularized least-squares system, per layer, across random cascades.
void criterion_1() {
  const auto start = Clock::now();
  const std::array<features::Activation, 4> acts = {
      features::Activation::sigmoid, features::Activation::relu, features::Activation::swish,
      features::Activation::tanh_fn};
  const std::array<features::WeightInit, 3> inits = {features::WeightInit::standard_normal,
                                                     features::WeightInit::xavier,
                                                     features::WeightInit::kaiming};
  const std::array<double, 4> lambdas = {0.005, 0.1, 1.0, 10.0};
  const std::size_t horizon = 20, batch = 5, k = 8, nodes = 16, layers = 3;

  double worst = 0.0;
  for (std::size_t inst = 0; inst < 25; ++inst) {
    stream::SyntheticConfig sc;
    sc.t_horizon = horizon;
    sc.batch_size = batch;
    sc.k = k;
    sc.seed = derive_seed(1001, "c1-stream", inst);
    const auto syn = stream::generate_synthetic_stream(sc);

    features::NetworkConfig net;
    net.n_nodes = nodes;
    net.n_layers = layers;
    net.activation = acts[inst % acts.size()];
    net.init = inits[inst % inits.size()];
    net.seed = derive_seed(1001, "c1-net", inst);
    const auto weights = features::init_random_weights(k, net);
    const double lambda = lambdas[inst % lambdas.size()];

    iol::EnsembleLearner learner = iol::init_ensemble(weights, syn.stream.m, lambda,
                                                      iol::Style::ridge);
    stream::StreamSource src(syn.stream);
    learner = iol::run_iol(std::move(learner), src);

    // stack every layer's features over the full stream
    const std::size_t rows = syn.stream.rows();
    std::vector<Eigen::MatrixXd> stacked(layers);
    for (auto& s : stacked) s.resize(rows, weights.layer_feature_dim());
    Eigen::MatrixXd y_stack(rows, syn.stream.m);
    std::size_t row0 = 0;
    for (const auto& b : syn.stream.batches) {
      const auto feats = features::extract_features(b.x, weights);
      for (std::size_t l = 0; l < layers; ++l) {
        stacked[l].middleRows(row0, b.x.rows()) = feats[l];
      }
      y_stack.middleRows(row0, b.x.rows()) = b.y;
      row0 += b.x.rows();
    }
    for (std::size_t l = 0; l < layers; ++l) {
      const Eigen::MatrixXd off = iol::offline_ridge_solve_primal(stacked[l], y_stack, lambda);
      worst = std::max(worst, rel_diff(learner.layers[l].beta, off));
    }
  }
  const double elapsed = seconds_since(start);
  const bool pass = worst < 1e-8 && elapsed < 10.0;
  report(1, pass,
         fmt("ridge incremental matches stacked primal solve: max rel diff %.2e "
             "(25 cascades, every activation; %.1f s, limit 10 s)",
             worst, elapsed));
}

// 2. Forward state equals the lookahead-objective minimizer at every step,
//    for a zero prior and a nonzero prior.
void criterion_2() {
  const auto start = Clock::now();
  const std::size_t horizon = 20, batch = 5, k = 8;
  const double lambda = 0.7;

  stream::SyntheticConfig sc;
  sc.t_horizon = horizon;
  sc.batch_size = batch;
  sc.k = k;
  sc.seed = derive_seed(2002, "c2-stream", 0);
  const auto syn = stream::generate_synthetic_stream(sc);
  const auto& batches = syn.stream.batches;

  auto rng = make_engine(derive_seed(2002, "c2-prior", 0));
  double worst = 0.0;
  for (bool with_prior : {false, true}) {
    const Eigen::MatrixXd prior = with_prior
                                      ? random_matrix(k, 1, rng, 0.5).eval()
                                      : Eigen::MatrixXd::Zero(k, 1).eval();
    iol::LearnerState state = iol::init_learner(lambda, k, 1, iol::Style::forward, &prior);
    Eigen::MatrixXd d_stack(0, k), y_stack(0, 1);
    for (std::size_t t = 0; t < horizon; ++t) {
      const Eigen::MatrixXd& d = batches[t].x;
      const Eigen::MatrixXd& y = batches[t].y;
      const Eigen::MatrixXd& dn = t + 1 < horizon ? batches[t + 1].x : batches[t].x;
      state = iol::forward_step(std::move(state), d, y, dn);

      d_stack.conservativeResize(d_stack.rows() + d.rows(), Eigen::NoChange);
      d_stack.bottomRows(d.rows()) = d;
      y_stack.conservativeResize(y_stack.rows() + y.rows(), Eigen::NoChange);
      y_stack.bottomRows(y.rows()) = y;
      const Eigen::MatrixXd off = iol::offline_forward_solve(d_stack, y_stack, dn, lambda, &prior);
      worst = std::max(worst, rel_diff(state.beta, off));
    }
  }
  const double elapsed = seconds_since(start);
  const bool pass = worst < 1e-8 && elapsed < 10.0;
  report(2, pass,
         fmt("forward per-step matches lookahead objective minimizer: max rel diff %.2e "
             "(T=20, zero and nonzero priors; %.1f s, limit 10 s)",
             worst, elapsed));
}

// 3. Rank-b rate update vs dense inversion on 1000 random SPD/batch pairs.
void criterion_3() {
  auto rng = make_engine(derive_seed(3003, "c3", 0));
  std::uniform_int_distribution<Eigen::Index> dim_pick(2, 12), batch_pick(1, 8);
  std::uniform_real_distribution<double> jitter(0.3, 2.0);
  double worst_diff = 0.0, worst_asym = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index p = dim_pick(rng), b = batch_pick(rng);
    const Eigen::MatrixXd a = random_matrix(p, p, rng);
    const Eigen::MatrixXd eta =
        a * a.transpose() + jitter(rng) * Eigen::MatrixXd::Identity(p, p);
    const Eigen::MatrixXd d = random_matrix(b, p, rng);

    const Eigen::MatrixXd got = iol::smw_rate_update(eta, d);
    const Eigen::MatrixXd dense = (eta.inverse() + d.transpose() * d).inverse();
    worst_diff = std::max(worst_diff, (got - dense).norm());
    worst_asym = std::max(worst_asym, (got - got.transpose()).norm());
  }
  const bool pass = worst_diff < 1e-10 && worst_asym < 1e-12;
  report(3, pass,
         fmt("rank-b rate update matches dense inversion: max diff %.2e (limit 1e-10), "
             "max asymmetry %.2e (limit 1e-12), 1000 pairs",
             worst_diff, worst_asym));
}

bench::ExperimentConfig batch_sim_config(std::size_t reps) {
  bench::ExperimentConfig cfg;
  cfg.name = "acceptance-batch-sim";
  cfg.mode = "simulate";
  cfg.seed = 0;
  cfg.reps = reps;
  cfg.lambda = 0.005;
  cfg.styles = {iol::Style::ridge, iol::Style::forward};
  stream::SyntheticConfig sc;
  sc.t_horizon = 1000;
  sc.batch_size = 10;
  sc.noise_factor = 0.15;  // sd = 0.15 ||oracle||, k/oracle moments at defaults
  cfg.synthetic = sc;
  return cfg;
}

// 4. Clipped cumulative regret vs the offline expert stays within the
//    style-matched bound in every one of 50 seeded trials.
void criterion_4() {
  const auto start = Clock::now();
  const bench::ExperimentConfig cfg = batch_sim_config(50);
  const bench::SimulationResult sim = bench::run_simulation(cfg);
  std::size_t satisfied = 0, total = 0;
  for (const auto& per_style : sim.outcomes) {
    for (const auto& o : per_style) {
      ++total;
      if (o.bound_satisfied) ++satisfied;
    }
  }
  const double elapsed = seconds_since(start);
  const bool pass = satisfied == total && total == 100 && elapsed < 120.0;
  report(4, pass,
         fmt("clipped cumulative regret within style bound: %zu/%zu trials "
             "(50 seeds x 2 styles; %.1f s, limit 120 s)",
             satisfied, total, elapsed));
}

// 5. The single-log bound ratio is 4 to within 1e-12 across a 729-point grid.
void criterion_5() {
  const std::array<double, 3> horizons = {1.0, 100.0, 10000.0};
  const std::array<std::size_t, 3> batches = {1, 10, 100};
  const std::array<std::size_t, 3> dims = {2, 24, 500};
  const std::array<double, 3> lambdas = {0.001, 1.0, 100.0};
  const std::array<double, 3> d_maxes = {0.1, 1.0, 10.0};
  const std::array<double, 3> y_maxes = {0.5, 1.0, 25.0};
  double worst = 0.0;
  std::size_t points = 0;
  for (double T : horizons) {
    for (std::size_t b : batches) {
      for (std::size_t dim : dims) {
        for (double lambda : lambdas) {
          for (double dm : d_maxes) {
            for (double ym : y_maxes) {
              regret::BoundParams p;
              p.horizon = static_cast<std::size_t>(T);
              p.batch_size = b;
              p.feature_dim = dim;
              p.lambda = lambda;
              p.d_max = dm;
              p.y_max = ym;
              worst = std::max(worst,
                               std::abs(regret::bound_ratio_ridge_over_forward_single_log(p) - 4.0));
              ++points;
            }
          }
        }
      }
    }
  }
  const bool pass = worst <= 1e-12 && points == 729;
  report(5, pass,
         fmt("ridge over single-log forward bound ratio is 4: max |ratio - 4| = %.2e "
             "over %zu grid points (limit 1e-12)",
             worst, points));
}

// 6. The batch simulation reproduces the reference oracle distances
//    (0.521 ridge, 0.430 forward, within 20%) and the forward style wins
//    at least 90% of paired trials.
void criterion_6() {
  const auto start = Clock::now();
  const std::size_t reps = 200;
  const bench::ExperimentConfig cfg = batch_sim_config(reps);
  const bench::SimulationResult sim = bench::run_simulation(cfg);

  double ridge_mean = 0.0, forward_mean = 0.0;
  std::size_t ridge_idx = 0, forward_idx = 1;
  for (std::size_t si = 0; si < sim.styles.size(); ++si) {
    if (sim.styles[si] == iol::Style::ridge) ridge_idx = si;
    if (sim.styles[si] == iol::Style::forward) forward_idx = si;
  }
  for (const auto& o : sim.outcomes[ridge_idx]) ridge_mean += o.final_oracle_dist;
  for (const auto& o : sim.outcomes[forward_idx]) forward_mean += o.final_oracle_dist;
  ridge_mean /= static_cast<double>(reps);
  forward_mean /= static_cast<double>(reps);
  std::size_t wins = 0;
  for (std::size_t rep = 0; rep < reps; ++rep) {
    if (sim.outcomes[forward_idx][rep].final_oracle_dist <
        sim.outcomes[ridge_idx][rep].final_oracle_dist) {
      ++wins;
    }
  }

  const bool ridge_ok = ridge_mean >= 0.8 * 0.521 && ridge_mean <= 1.2 * 0.521;
  const bool forward_ok = forward_mean >= 0.8 * 0.430 && forward_mean <= 1.2 * 0.430;
  const std::size_t wins_needed = (reps * 9 + 9) / 10;
  const bool wins_ok = wins >= wins_needed;
  const double elapsed = seconds_since(start);
  const bool pass = ridge_ok && forward_ok && wins_ok && elapsed < 600.0;
  report(6, pass,
         fmt("batch simulation reference distances: ridge %.4f in [%.4f, %.4f] %s; "
             "forward %.4f in [%.4f, %.4f] %s; forward wins %zu/%zu (need >= %zu) %s "
             "(%.1f s, limit 600 s)",
             ridge_mean, 0.8 * 0.521, 1.2 * 0.521, ridge_ok ? "ok" : "MISS", forward_mean,
             0.8 * 0.430, 1.2 * 0.430, forward_ok ? "ok" : "MISS", wins, reps, wins_needed,
             wins_ok ? "ok" : "MISS", elapsed));
}

// 7. Analytic bound growth rates match central finite differences, and the
//    forward rate sits below the ridge rate at every grid point.
void criterion_7() {
  std::vector<regret::BoundParams> sets(3);
  sets[0].y_max = 21.0; sets[0].d_max = 3.5; sets[0].batch_size = 10;
  sets[0].feature_dim = 23; sets[0].lambda = 0.005;
  sets[1].y_max = 1.5; sets[1].d_max = 2.0; sets[1].batch_size = 52;
  sets[1].feature_dim = 94; sets[1].lambda = 16.0;
  sets[2].y_max = 1.0; sets[2].d_max = 1.0; sets[2].batch_size = 1;
  sets[2].feature_dim = 2; sets[2].lambda = 1.0;

  double worst_rel = 0.0;
  for (const auto& p : sets) {
    for (double t : {10.0, 100.0, 1000.0}) {
      const double h = 1e-4 * t;
      const double fd_r =
          (regret::ridge_bound_at(p, t + h) - regret::ridge_bound_at(p, t - h)) / (2.0 * h);
      const double an_r = regret::ridge_bound_derivative(p, t);
      worst_rel = std::max(worst_rel, std::abs(fd_r - an_r) / std::abs(an_r));
      const double fd_f =
          (regret::forward_bound_at(p, t + h) - regret::forward_bound_at(p, t - h)) / (2.0 * h);
      const double an_f = regret::forward_bound_derivative(p, t);
      worst_rel = std::max(worst_rel, std::abs(fd_f - an_f) / std::abs(an_f));
    }
  }

  // rate ordering across the full criterion-5 grid
  bool ordered = true;
  const std::array<std::size_t, 3> batches = {1, 10, 100};
  const std::array<std::size_t, 3> dims = {2, 24, 500};
  const std::array<double, 3> lambdas = {0.001, 1.0, 100.0};
  const std::array<double, 3> d_maxes = {0.1, 1.0, 10.0};
  const std::array<double, 3> y_maxes = {0.5, 1.0, 25.0};
  for (std::size_t b : batches) {
    for (std::size_t dim : dims) {
      for (double lambda : lambdas) {
        for (double dm : d_maxes) {
          for (double ym : y_maxes) {
            regret::BoundParams p;
            p.batch_size = b;
            p.feature_dim = dim;
            p.lambda = lambda;
            p.d_max = dm;
            p.y_max = ym;
            for (double t : {1.0, 10.0, 100.0, 1000.0}) {
              if (!(regret::forward_bound_derivative(p, t) <
                    regret::ridge_bound_derivative(p, t))) {
                ordered = false;
              }
            }
          }
        }
      }
    }
  }
  const bool pass = worst_rel < 1e-6 && ordered;
  report(7, pass,
         fmt("bound growth rates: max FD rel err %.2e (limit 1e-6); forward rate < ridge "
             "rate at all 972 grid evaluations: %s",
             worst_rel, ordered ? "yes" : "NO"));
}

bench::ExperimentConfig load_preset(const std::string& path) {
  std::ifstream in(path);
  json j;
  in >> j;
  return bench::config_from_json(j);
}

// 8. Dataset baselines, when the fetched CSVs are present.
void criterion_8() {
  const auto start = Clock::now();
  std::vector<std::string> missing;
  for (const char* path : {"data/weather_izmir.csv", "data/letters.csv"}) {
    if (!std::filesystem::exists(path)) missing.push_back(path);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    report_skip(8, "dataset files missing (" + list +
                       "); run scripts/fetch_datasets.sh and re-run to evaluate");
    return;
  }

  const auto izmir = bench::run_experiment(load_preset("presets/weather_izmir_baseline.json"));
  const double izmir_fwd =
      izmir.summary.at("styles").at("forward").at("final_rmse_mean").get<double>();
  const bool izmir_ok = izmir_fwd >= 0.85 * 0.0213 && izmir_fwd <= 1.15 * 0.0213;

  const auto letters = bench::run_experiment(load_preset("presets/letters_baseline.json"));
  const double let_fwd =
      letters.summary.at("styles").at("forward").at("final_acc_mean").get<double>();
  const double let_ridge =
      letters.summary.at("styles").at("ridge").at("final_acc_mean").get<double>();
  const bool letters_ok = let_fwd >= 0.85 * 0.9262 && let_fwd <= 1.15 * 0.9262;
  const bool order_ok = let_fwd > let_ridge;

  const double elapsed = seconds_since(start);
  const bool pass = izmir_ok && letters_ok && order_ok && elapsed < 900.0;
  report(8, pass,
         fmt("dataset baselines: izmir forward rmse %.4f vs 0.0213 +-15%% %s; letters forward "
             "acc %.4f vs 0.9262 +-15%% %s; forward > ridge (%.4f > %.4f) %s (%.0f s, "
             "limit 900 s)",
             izmir_fwd, izmir_ok ? "ok" : "MISS", let_fwd, letters_ok ? "ok" : "MISS", let_fwd,
             let_ridge, order_ok ? "ok" : "MISS", elapsed));
}

// 9. Equal seeds give byte-identical CSV exports carrying every series a
//    redraw of the mean curves and final-distance boxplots needs.
void criterion_9() {
  const bench::ExperimentConfig cfg = load_preset("presets/synthetic_single.json");
  const bench::SimulationResult a = bench::run_simulation(cfg);
  const bench::SimulationResult b = bench::run_simulation(cfg);
  std::ostringstream csv_a, csv_b;
  bench::export_csv(a.report, csv_a);
  bench::export_csv(b.report, csv_b);
  const bool identical = csv_a.str() == csv_b.str();

  const std::vector<std::string> mean_series = {
      "learner_loss", "learner_loss_clipped", "oracle_loss", "immediate_regret",
      "irt",          "irt_lead",             "cum_immediate"};
  const std::vector<std::string> final_series = {
      "final_oracle_dist", "cr_vs_expert", "cr_vs_expert_raw", "cr_vs_expert_shifted",
      "cr_vs_oracle",      "bound",        "bound_satisfied"};
  bool series_ok = true;
  for (const char* style : {"ridge", "forward"}) {
    for (const auto& series : mean_series) {
      bool found = false;
      for (const auto& row : a.report.rows) {
        if (row.style == style && row.rep == -1 && row.series == series && row.stat == "mean") {
          found = true;
          break;
        }
      }
      series_ok = series_ok && found;
    }
    bool curve = false, finals = true;
    for (const auto& row : a.report.rows) {
      if (row.style == style && row.series == "bound_curve") curve = true;
    }
    for (const auto& series : final_series) {
      bool found = false;
      for (const auto& row : a.report.rows) {
        if (row.style == style && row.rep == 0 && row.series == series) {
          found = true;
          break;
        }
      }
      finals = finals && found;
    }
    series_ok = series_ok && curve && finals;
  }
  const bool pass = identical && series_ok;
  report(9, pass,
         fmt("determinism and export: byte-identical CSV %s (%zu bytes); curve and "
             "boxplot series present %s",
             identical ? "yes" : "NO", csv_a.str().size(), series_ok ? "yes" : "NO"));
}

}  // namespace

int main() {
  std::printf("acceptance gate, library %s\n", bench::kLibraryVersion);
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  if (g_any_fail) {
    std::printf("acceptance: FAILURES present\n");
    return 1;
  }
  std::printf("acceptance: all evaluated criteria passed\n");
  return 0;
}
