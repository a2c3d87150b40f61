#include "edrvfl/bench.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "edrvfl/errors.hpp"
#include "edrvfl/regret.hpp"
#include "edrvfl/rng.hpp"

namespace edrvfl::bench {

namespace {

using Eigen::MatrixXd;
using nlohmann::json;

stream::Task task_from_name(const std::string& s) {
  if (s == "regression") return stream::Task::regression;
  if (s == "classification") return stream::Task::classification;
  throw ConfigError("unknown task '" + s + "'");
}

std::string task_name(stream::Task t) {
  return t == stream::Task::regression ? "regression" : "classification";
}

stream::NormMethod norm_from_name(const std::string& s) {
  if (s == "none") return stream::NormMethod::none;
  if (s == "zscore") return stream::NormMethod::zscore;
  if (s == "minmax01") return stream::NormMethod::minmax01;
  throw ConfigError("unknown normalization '" + s + "'");
}

EnsembleChoice ensemble_from_name(const std::string& s) {
  if (s == "mean") return EnsembleChoice::mean;
  if (s == "median") return EnsembleChoice::median;
  if (s == "softmax_mean") return EnsembleChoice::softmax_mean;
  throw ConfigError("unknown ensemble mode '" + s + "'");
}

std::string ensemble_name(EnsembleChoice e) {
  switch (e) {
    case EnsembleChoice::mean: return "mean";
    case EnsembleChoice::median: return "median";
    case EnsembleChoice::softmax_mean: return "softmax_mean";
  }
  return "mean";
}

ExecPolicy exec_from_name(const std::string& s) {
  if (s == "serial") return ExecPolicy::serial;
  if (s == "openmp") return ExecPolicy::openmp;
  throw ConfigError("unknown exec policy '" + s + "'");
}

stream::NoiseScale noise_scale_from_name(const std::string& s) {
  if (s == "absolute") return stream::NoiseScale::absolute;
  if (s == "signal_std") return stream::NoiseScale::signal_std;
  throw ConfigError("unknown noise scale '" + s + "'");
}

double max_abs(const MatrixXd& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

// Type-7 quantile on a sorted copy, matching the usual boxplot convention.
double quantile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  c.name = j.value("name", c.name);
  c.mode = j.value("mode", c.mode);
  if (c.mode != "bench" && c.mode != "simulate") {
    throw ConfigError("mode must be 'bench' or 'simulate', got '" + c.mode + "'");
  }
  if (j.contains("task")) c.task = task_from_name(j.at("task").get<std::string>());
  if (j.contains("styles")) {
    c.styles.clear();
    for (const auto& s : j.at("styles")) c.styles.push_back(iol::style_from_name(s));
    if (c.styles.empty()) throw ConfigError("styles must not be empty");
  }
  c.seed = j.value("seed", c.seed);
  c.reps = j.value("reps", c.reps);
  if (c.reps == 0) throw ConfigError("reps must be at least 1");
  c.lambda = j.value("lambda", c.lambda);
  if (!(c.lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (j.contains("per_layer_lambda")) {
    c.per_layer_lambda = j.at("per_layer_lambda").get<std::vector<double>>();
    for (double l : c.per_layer_lambda) {
      if (!(l > 0.0)) throw ConfigError("per_layer_lambda entries must be positive");
    }
  }
  c.s_factor = j.value("s_factor", c.s_factor);
  if (!(c.s_factor > 0.0)) throw ConfigError("s_factor must be positive");
  if (j.contains("surrogate")) {
    const auto& s = j.at("surrogate");
    c.surrogate.kind = iol::surrogate_from_name(s.value("policy", std::string("repeat_last")));
    c.surrogate.seed = s.value("seed", std::uint64_t{0});
  }
  c.clip_predictions = j.value("clip_predictions", c.clip_predictions);
  if (j.contains("exec")) c.exec = exec_from_name(j.at("exec").get<std::string>());
  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    stream::SyntheticConfig sc;
    sc.t_horizon = s.value("t_horizon", sc.t_horizon);
    sc.batch_size = s.value("batch_size", sc.batch_size);
    sc.k = s.value("k", sc.k);
    sc.oracle_mean = s.value("oracle_mean", sc.oracle_mean);
    sc.oracle_std = s.value("oracle_std", sc.oracle_std);
    sc.noise_factor = s.value("noise_factor", sc.noise_factor);
    if (s.contains("noise_scale")) {
      sc.noise_scale = noise_scale_from_name(s.at("noise_scale").get<std::string>());
    }
    if (sc.t_horizon == 0 || sc.batch_size == 0 || sc.k == 0) {
      throw ConfigError("synthetic t_horizon, batch_size and k must be positive");
    }
    c.synthetic = sc;
  }
  if (j.contains("csv")) {
    const auto& s = j.at("csv");
    CsvSourceConfig cc;
    cc.path = s.at("path").get<std::string>();
    cc.targets = s.at("targets").get<std::vector<std::string>>();
    cc.shuffle = s.value("shuffle", cc.shuffle);
    cc.shuffle_seed = s.value("shuffle_seed", cc.shuffle_seed);
    c.csv = cc;
  }
  c.batch_fraction = j.value("batch_fraction", c.batch_fraction);
  if (!(c.batch_fraction > 0.0) || c.batch_fraction > 1.0) {
    throw ConfigError("batch_fraction must lie in (0, 1]");
  }
  if (j.contains("network")) {
    const auto& s = j.at("network");
    c.network.n_nodes = s.value("n_nodes", c.network.n_nodes);
    c.network.n_layers = s.value("n_layers", c.network.n_layers);
    if (s.contains("activation")) {
      c.network.activation = features::activation_from_name(s.at("activation").get<std::string>());
    }
    if (s.contains("init")) {
      c.network.init = features::init_from_name(s.at("init").get<std::string>());
    }
    c.network.weight_scale = s.value("weight_scale", c.network.weight_scale);
    if (c.network.n_nodes == 0 || c.network.n_layers == 0) {
      throw ConfigError("network n_nodes and n_layers must be positive");
    }
  }
  if (!c.per_layer_lambda.empty() && c.per_layer_lambda.size() != c.network.n_layers) {
    throw ConfigError("per_layer_lambda must list one value per layer");
  }
  if (j.contains("normalization")) {
    c.normalization = norm_from_name(j.at("normalization").get<std::string>());
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    c.split.holdout_fraction = s.value("holdout_fraction", c.split.holdout_fraction);
    c.split.seed = s.value("seed", c.split.seed);
    if (c.split.holdout_fraction < 0.0 || c.split.holdout_fraction >= 1.0) {
      throw ConfigError("split holdout_fraction must lie in [0, 1)");
    }
  }
  if (j.contains("ensemble")) {
    c.ensemble = ensemble_from_name(j.at("ensemble").get<std::string>());
  }
  if (j.contains("export")) {
    c.export_cfg.per_rep_curves = j.at("export").value("per_rep_curves", false);
  }
  if (c.mode == "simulate" && !c.synthetic) {
    throw ConfigError("simulate mode requires a synthetic block");
  }
  if (c.mode == "bench" && !c.synthetic && !c.csv) {
    throw ConfigError("bench mode requires a csv or synthetic source");
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["mode"] = c.mode;
  j["task"] = task_name(c.task);
  j["styles"] = json::array();
  for (auto s : c.styles) j["styles"].push_back(iol::style_name(s));
  j["seed"] = c.seed;
  j["reps"] = c.reps;
  j["lambda"] = c.lambda;
  if (!c.per_layer_lambda.empty()) j["per_layer_lambda"] = c.per_layer_lambda;
  j["s_factor"] = c.s_factor;
  j["surrogate"] = {{"policy", iol::surrogate_name(c.surrogate.kind)}, {"seed", c.surrogate.seed}};
  j["clip_predictions"] = c.clip_predictions;
  j["exec"] = c.exec == ExecPolicy::openmp ? "openmp" : "serial";
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    j["synthetic"] = {{"t_horizon", s.t_horizon},
                      {"batch_size", s.batch_size},
                      {"k", s.k},
                      {"oracle_mean", s.oracle_mean},
                      {"oracle_std", s.oracle_std},
                      {"noise_factor", s.noise_factor},
                      {"noise_scale",
                       s.noise_scale == stream::NoiseScale::absolute ? "absolute" : "signal_std"}};
  }
  if (c.csv) {
    j["csv"] = {{"path", c.csv->path},
                {"targets", c.csv->targets},
                {"shuffle", c.csv->shuffle},
                {"shuffle_seed", c.csv->shuffle_seed}};
  }
  j["batch_fraction"] = c.batch_fraction;
  j["network"] = {{"n_nodes", c.network.n_nodes},
                  {"n_layers", c.network.n_layers},
                  {"activation", features::activation_name(c.network.activation)},
                  {"init", features::init_name(c.network.init)},
                  {"weight_scale", c.network.weight_scale}};
  j["normalization"] = stream::norm_method_name(c.normalization);
  j["split"] = {{"holdout_fraction", c.split.holdout_fraction}, {"seed", c.split.seed}};
  j["ensemble"] = ensemble_name(c.ensemble);
  j["export"] = {{"per_rep_curves", c.export_cfg.per_rep_curves}};
  return j;
}

std::string make_run_id(const ExperimentConfig& cfg) {
  const std::uint64_t digest = splitmix64(fnv1a(config_to_json(cfg).dump()));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
  return cfg.name + "-" + buf;
}

double metric_rmse(const MatrixXd& pred, const MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw ConfigError("metric_rmse: shape mismatch");
  }
  if (pred.size() == 0) return 0.0;
  return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
}

double metric_accuracy(const MatrixXd& scores, const MatrixXd& onehot_truth) {
  if (scores.rows() != onehot_truth.rows() || scores.cols() != onehot_truth.cols()) {
    throw ConfigError("metric_accuracy: shape mismatch");
  }
  if (scores.rows() == 0) return 0.0;
  const auto pred = features::classify(scores);
  const auto truth = features::classify(onehot_truth);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == truth[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

std::vector<double> per_class_accuracy(const MatrixXd& scores, const MatrixXd& onehot_truth) {
  if (scores.rows() != onehot_truth.rows() || scores.cols() != onehot_truth.cols()) {
    throw ConfigError("per_class_accuracy: shape mismatch");
  }
  const std::size_t n_classes = static_cast<std::size_t>(scores.cols());
  const auto pred = features::classify(scores);
  const auto truth = features::classify(onehot_truth);
  std::vector<double> hits(n_classes, 0.0), totals(n_classes, 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    totals[static_cast<std::size_t>(truth[i])] += 1.0;
    if (pred[i] == truth[i]) hits[static_cast<std::size_t>(truth[i])] += 1.0;
  }
  std::vector<double> acc(n_classes, 0.0);
  for (std::size_t c = 0; c < n_classes; ++c) {
    acc[c] = totals[c] > 0.0 ? hits[c] / totals[c] : 0.0;
  }
  return acc;
}

namespace {

struct TrialRecord {
  TrialOutcome outcome;
  regret::RegretLedger ledger;
  double wall_ms = 0.0;
};

// One bare linear run over a generated stream; features are the raw inputs.
TrialRecord run_trial(const stream::SyntheticStream& syn, iol::Style style,
                      const ExperimentConfig& cfg, std::uint64_t rep) {
  const auto& batches = syn.stream.batches;
  const std::size_t horizon = batches.size();
  const std::size_t k = syn.stream.k;
  const MatrixXd oracle = syn.oracle_weights;

  const auto t_start = std::chrono::steady_clock::now();
  iol::LearnerState state = iol::init_learner(cfg.lambda, k, 1, style);
  regret::RegretLedger ledger;
  ledger.learner_loss.reserve(horizon);
  ledger.learner_loss_clipped.reserve(horizon);
  ledger.oracle_loss.reserve(horizon);
  ledger.immediate.reserve(horizon);
  ledger.irt.reserve(horizon);
  ledger.irt_lead.reserve(horizon);
  std::size_t max_batch = 0;

  for (std::size_t t = 0; t < horizon; ++t) {
    const MatrixXd& d = batches[t].x;
    const MatrixXd& y = batches[t].y;
    max_batch = std::max(max_batch, static_cast<std::size_t>(d.rows()));
    ledger.d_max = std::max(ledger.d_max, max_abs(d));
    ledger.y_max = std::max(ledger.y_max, max_abs(y));

    const double loss = regret::batch_loss(d, state.beta, y);
    ledger.learner_loss.push_back(loss);
    ledger.learner_loss_clipped.push_back(
        regret::batch_loss_clipped(d, state.beta, y, ledger.y_max));
    const double oracle_loss = regret::batch_loss(d, oracle, y);
    ledger.oracle_loss.push_back(oracle_loss);
    ledger.immediate.push_back(regret::immediate_regret(loss, oracle_loss));

    if (style == iol::Style::ridge) {
      const MatrixXd beta_pre = state.beta;
      state = iol::ridge_step(std::move(state), d, y);
      const double irt = regret::regret_term_ridge(d, beta_pre, y, state.eta);
      ledger.irt.push_back(irt);
      ledger.irt_lead.push_back(irt);  // one rate convention for this style
    } else {
      const MatrixXd* look = nullptr;
      MatrixXd surrogate_d;
      bool skip = false;
      if (t + 1 < horizon) {
        look = &batches[t + 1].x;
      } else {
        switch (cfg.surrogate.kind) {
          case iol::SurrogatePolicy::Kind::repeat_last:
            look = &d;
            break;
          case iol::SurrogatePolicy::Kind::random_seen: {
            auto rng = make_engine(derive_seed(cfg.surrogate.seed, "sim-surrogate", rep));
            std::uniform_int_distribution<std::size_t> pick(0, horizon - 1);
            surrogate_d = batches[pick(rng)].x;
            look = &surrogate_d;
            break;
          }
          case iol::SurrogatePolicy::Kind::none:
            skip = true;
            break;
        }
      }
      if (skip) {
        ledger.irt.push_back(0.0);
        ledger.irt_lead.push_back(0.0);
      } else {
        // Rate covering batches 1..t+1 exactly; the state's rate still leads
        // by one batch, so the first step recomputes the intermediate.
        const MatrixXd eta_lag = t == 0 ? iol::smw_rate_update(state.eta, d) : state.eta;
        state = iol::forward_step(std::move(state), d, y, *look);
        ledger.irt.push_back(regret::regret_terms_forward(d, y, *look, state.beta, eta_lag).value);
        ledger.irt_lead.push_back(
            regret::regret_terms_forward(d, y, *look, state.beta, state.eta).value);
      }
    }
  }
  const auto t_end = std::chrono::steady_clock::now();

  TrialRecord rec;
  rec.wall_ms = std::chrono::duration<double, std::milli>(t_end - t_start).count();
  rec.outcome.final_oracle_dist = (state.beta - oracle).squaredNorm();
  rec.outcome.cum_loss = ledger.cum_learner_loss();
  rec.outcome.cum_loss_clipped = ledger.cum_learner_loss_clipped();
  rec.outcome.y_max = ledger.y_max;
  rec.outcome.d_max = ledger.d_max;

  // Offline expert on the whole stream; both styles share this comparator.
  const std::size_t total_rows = syn.stream.rows();
  MatrixXd d_stack(total_rows, k), y_stack(total_rows, 1);
  std::size_t row = 0;
  for (const auto& b : batches) {
    d_stack.middleRows(static_cast<Eigen::Index>(row), b.x.rows()) = b.x;
    y_stack.middleRows(static_cast<Eigen::Index>(row), b.y.rows()) = b.y;
    row += static_cast<std::size_t>(b.x.rows());
  }
  const MatrixXd expert = iol::offline_ridge_solve(d_stack, y_stack, cfg.lambda);
  const auto cr_clip = regret::cumulative_regret(ledger.learner_loss_clipped, d_stack, y_stack,
                                                 expert, cfg.lambda);
  const auto cr_raw =
      regret::cumulative_regret(ledger.learner_loss, d_stack, y_stack, expert, cfg.lambda);
  rec.outcome.cr_vs_expert = cr_clip.vs_expert;
  rec.outcome.cr_vs_expert_raw = cr_raw.vs_expert;
  rec.outcome.cr_vs_expert_shifted = cr_clip.vs_expert_shifted;
  rec.outcome.cr_vs_oracle = regret::cumulative_regret_vs_oracle(ledger);

  regret::BoundParams bp;
  bp.y_max = ledger.y_max;
  bp.d_max = ledger.d_max;
  bp.batch_size = max_batch;
  bp.feature_dim = k;
  bp.horizon = horizon;
  bp.lambda = cfg.lambda;
  bp.s = cfg.s_factor;
  rec.outcome.bound =
      style == iol::Style::ridge ? regret::ridge_bound(bp) : regret::forward_bound(bp);
  rec.outcome.bound_satisfied = rec.outcome.cr_vs_expert <= rec.outcome.bound;

  rec.ledger = std::move(ledger);
  return rec;
}

void push_row(std::vector<ReportRow>& rows, const std::string& style, long rep, double t,
              const std::string& series, const std::string& stat, double value) {
  ReportRow r;
  r.style = style;
  r.rep = rep;
  r.t = t;
  r.series = series;
  r.stat = stat;
  r.value = value;
  rows.push_back(std::move(r));
}

}  // namespace

SimulationResult run_simulation(const ExperimentConfig& cfg) {
  if (cfg.mode != "simulate") throw ConfigError("run_simulation: config mode is not 'simulate'");
  if (!cfg.synthetic) throw ConfigError("run_simulation: missing synthetic block");
  const std::size_t n_styles = cfg.styles.size();
  const std::size_t reps = cfg.reps;

  // records[style][rep], filled by independent slots so the openmp pool and
  // the serial path produce identical aggregates.
  std::vector<std::vector<TrialRecord>> records(n_styles, std::vector<TrialRecord>(reps));
  parallel_for(reps, cfg.exec, [&](std::size_t rep) {
    stream::SyntheticConfig sc = *cfg.synthetic;
    sc.seed = derive_seed(cfg.seed, "stream", rep);
    const stream::SyntheticStream syn = stream::generate_synthetic_stream(sc);
    for (std::size_t si = 0; si < n_styles; ++si) {
      records[si][rep] = run_trial(syn, cfg.styles[si], cfg, rep);
    }
  });

  const std::size_t horizon = cfg.synthetic->t_horizon;
  SimulationResult result;
  result.styles = cfg.styles;
  result.outcomes.assign(n_styles, {});
  ExperimentReport& report = result.report;
  report.run_id = make_run_id(cfg);
  report.config_echo = config_to_json(cfg);

  json summary;
  summary["mode"] = "simulate";
  summary["reps"] = reps;
  summary["horizon"] = horizon;

  const std::array<const char*, 6> series_names = {"learner_loss", "learner_loss_clipped",
                                                   "oracle_loss",  "immediate_regret",
                                                   "irt",          "irt_lead"};

  for (std::size_t si = 0; si < n_styles; ++si) {
    const std::string sname = iol::style_name(cfg.styles[si]);
    auto& recs = records[si];
    result.outcomes[si].reserve(reps);
    for (auto& r : recs) result.outcomes[si].push_back(r.outcome);

    // Mean curves over repetitions, one row per step.
    std::vector<double> cum_immediate_mean(horizon, 0.0);
    for (std::size_t t = 0; t < horizon; ++t) {
      std::array<double, 6> acc{};
      for (const auto& r : recs) {
        const auto& lg = r.ledger;
        acc[0] += lg.learner_loss[t];
        acc[1] += lg.learner_loss_clipped[t];
        acc[2] += lg.oracle_loss[t];
        acc[3] += lg.immediate[t];
        acc[4] += lg.irt[t];
        acc[5] += lg.irt_lead[t];
      }
      for (std::size_t s = 0; s < series_names.size(); ++s) {
        push_row(report.rows, sname, -1, static_cast<double>(t), series_names[s], "mean",
                 acc[s] / static_cast<double>(reps));
      }
      cum_immediate_mean[t] =
          (t == 0 ? 0.0 : cum_immediate_mean[t - 1]) + acc[3] / static_cast<double>(reps);
      push_row(report.rows, sname, -1, static_cast<double>(t), "cum_immediate", "mean",
               cum_immediate_mean[t]);
    }

    // Bound growth at the worst observed constants, for curve overlays.
    regret::BoundParams bp;
    bp.batch_size = cfg.synthetic->batch_size;
    bp.feature_dim = cfg.synthetic->k;
    bp.horizon = horizon;
    bp.lambda = cfg.lambda;
    bp.s = cfg.s_factor;
    for (const auto& r : recs) {
      bp.y_max = std::max(bp.y_max, r.outcome.y_max);
      bp.d_max = std::max(bp.d_max, r.outcome.d_max);
    }
    for (std::size_t t = 0; t < horizon; ++t) {
      const double at = static_cast<double>(t + 1);
      const double v = cfg.styles[si] == iol::Style::ridge ? regret::ridge_bound_at(bp, at)
                                                           : regret::forward_bound_at(bp, at);
      push_row(report.rows, sname, -1, static_cast<double>(t), "bound_curve", "value", v);
    }

    if (cfg.export_cfg.per_rep_curves) {
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const auto& lg = recs[rep].ledger;
        for (std::size_t t = 0; t < horizon; ++t) {
          const std::array<double, 6> vals = {lg.learner_loss[t], lg.learner_loss_clipped[t],
                                              lg.oracle_loss[t],  lg.immediate[t],
                                              lg.irt[t],          lg.irt_lead[t]};
          for (std::size_t s = 0; s < series_names.size(); ++s) {
            push_row(report.rows, sname, static_cast<long>(rep), static_cast<double>(t),
                     series_names[s], "value", vals[s]);
          }
        }
      }
    }

    // Per-repetition end-of-run scalars.
    std::vector<double> final_dist, cr_clip, cr_raw, bounds, wall;
    std::size_t satisfied = 0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const auto& o = recs[rep].outcome;
      const double t_end = static_cast<double>(horizon);
      push_row(report.rows, sname, static_cast<long>(rep), t_end, "final_oracle_dist", "value",
               o.final_oracle_dist);
      push_row(report.rows, sname, static_cast<long>(rep), t_end, "cr_vs_expert", "value",
               o.cr_vs_expert);
      push_row(report.rows, sname, static_cast<long>(rep), t_end, "cr_vs_expert_raw", "value",
               o.cr_vs_expert_raw);
      push_row(report.rows, sname, static_cast<long>(rep), t_end, "cr_vs_expert_shifted", "value",
               o.cr_vs_expert_shifted);
      push_row(report.rows, sname, static_cast<long>(rep), t_end, "cr_vs_oracle", "value",
               o.cr_vs_oracle);
      push_row(report.rows, sname, static_cast<long>(rep), t_end, "bound", "value", o.bound);
      push_row(report.rows, sname, static_cast<long>(rep), t_end, "bound_satisfied", "value",
               o.bound_satisfied ? 1.0 : 0.0);
      final_dist.push_back(o.final_oracle_dist);
      cr_clip.push_back(o.cr_vs_expert);
      cr_raw.push_back(o.cr_vs_expert_raw);
      bounds.push_back(o.bound);
      wall.push_back(recs[rep].wall_ms);
      if (o.bound_satisfied) ++satisfied;
    }
    json s;
    s["final_oracle_dist_mean"] = mean_of(final_dist);
    s["final_oracle_dist_std"] = std_of(final_dist);
    s["cr_vs_expert_mean"] = mean_of(cr_clip);
    s["cr_vs_expert_raw_mean"] = mean_of(cr_raw);
    s["bound_mean"] = mean_of(bounds);
    s["bound_satisfied_count"] = satisfied;
    s["timing"] = {{"mean_trial_ms", mean_of(wall)}};  // JSON only, never CSV
    summary["styles"][sname] = std::move(s);
  }

  // Paired comparisons when both styles ran on the same streams.
  auto index_of = [&](iol::Style st) -> long {
    for (std::size_t i = 0; i < cfg.styles.size(); ++i) {
      if (cfg.styles[i] == st) return static_cast<long>(i);
    }
    return -1;
  };
  const long ri = index_of(iol::Style::ridge);
  const long fi = index_of(iol::Style::forward);
  if (ri >= 0 && fi >= 0) {
    std::size_t wins_dist = 0, wins_cr = 0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const auto& r = records[static_cast<std::size_t>(ri)][rep].outcome;
      const auto& f = records[static_cast<std::size_t>(fi)][rep].outcome;
      if (f.final_oracle_dist < r.final_oracle_dist) ++wins_dist;
      if (f.cr_vs_expert_raw < r.cr_vs_expert_raw) ++wins_cr;
    }
    summary["forward_wins_final_dist"] = wins_dist;
    summary["forward_wins_cr"] = wins_cr;
  }

  report.summary = std::move(summary);
  return result;
}

namespace {

struct EvalContext {
  const std::vector<MatrixXd>* test_features = nullptr;
  const MatrixXd* y_test = nullptr;
  stream::Task task = stream::Task::regression;
  EnsembleChoice ensemble = EnsembleChoice::mean;
};

struct EvalPoint {
  double ensemble_metric = 0.0;
  std::vector<double> layer_metrics;
  std::vector<double> class_acc;  // classification only
};

EvalPoint evaluate_learner(const iol::EnsembleLearner& learner, const EvalContext& ctx) {
  const std::size_t n_layers = learner.layers.size();
  std::vector<MatrixXd> preds(n_layers);
  EvalPoint p;
  p.layer_metrics.resize(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    preds[l] = (*ctx.test_features)[l] * learner.layers[l].beta;
    p.layer_metrics[l] = ctx.task == stream::Task::regression
                             ? metric_rmse(preds[l], *ctx.y_test)
                             : metric_accuracy(preds[l], *ctx.y_test);
  }
  features::EnsembleMode mode = features::EnsembleMode::regression_mean;
  if (ctx.task == stream::Task::classification) {
    mode = features::EnsembleMode::classification_softmax_mean;
  } else if (ctx.ensemble == EnsembleChoice::median) {
    mode = features::EnsembleMode::regression_median;
  }
  const MatrixXd combined = features::ensemble_predict(preds, mode);
  if (ctx.task == stream::Task::regression) {
    p.ensemble_metric = metric_rmse(combined, *ctx.y_test);
  } else {
    p.ensemble_metric = metric_accuracy(combined, *ctx.y_test);
    p.class_acc = per_class_accuracy(combined, *ctx.y_test);
  }
  return p;
}

struct BenchRun {
  std::vector<EvalPoint> evals;                    // t = 0..T inclusive
  std::vector<regret::RegretLedger> layer_ledger;  // train-side, per layer
  std::vector<double> train_loss_total;            // per step, summed over layers
  double cr_sum = 0.0;
  double cr_sum_clipped = 0.0;
  double ensemble_bound = 0.0;
  json per_layer_summary = json::array();
  double wall_ms = 0.0;
};

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.mode != "bench") throw ConfigError("run_experiment: config mode is not 'bench'");

  // Assemble the row table: a CSV load or a flattened synthetic stream.
  stream::RowTable rows;
  if (cfg.csv) {
    stream::CsvOptions opt;
    opt.target_columns = cfg.csv->targets;
    opt.task = cfg.task;
    opt.shuffle = cfg.csv->shuffle;
    opt.shuffle_seed = cfg.csv->shuffle_seed;
    rows = stream::load_csv_rows(cfg.csv->path, opt);
  } else if (cfg.synthetic) {
    stream::SyntheticConfig sc = *cfg.synthetic;
    sc.seed = derive_seed(cfg.seed, "stream", 0);
    const auto syn = stream::generate_synthetic_stream(sc);
    const std::size_t n = syn.stream.rows();
    rows.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(syn.stream.k));
    rows.y.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(syn.stream.m));
    Eigen::Index at = 0;
    for (const auto& b : syn.stream.batches) {
      rows.x.middleRows(at, b.x.rows()) = b.x;
      rows.y.middleRows(at, b.y.rows()) = b.y;
      at += b.x.rows();
    }
    rows.meta = syn.stream.meta;
  } else {
    throw ConfigError("run_experiment: no data source configured");
  }

  const std::size_t n_rows = static_cast<std::size_t>(rows.x.rows());
  if (n_rows < 2) throw ConfigError("run_experiment: need at least two rows");

  // Seeded index split; both sides keep their original relative order.
  std::size_t n_test = static_cast<std::size_t>(
      std::floor(static_cast<double>(n_rows) * cfg.split.holdout_fraction));
  if (cfg.split.holdout_fraction > 0.0 && n_test == 0) n_test = 1;
  if (n_test >= n_rows) throw ConfigError("run_experiment: holdout leaves no training rows");
  std::vector<std::size_t> order(n_rows);
  std::iota(order.begin(), order.end(), 0);
  {
    auto rng = make_engine(derive_seed(cfg.split.seed, "split", 0));
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<long>(n_test));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<long>(n_test), order.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  const std::size_t n_train = train_idx.size();

  // Training rows first so the normalizer's statistics prefix is the training
  // data only; the holdout is transformed with the same map.
  stream::RowTable combined;
  combined.meta = rows.meta;
  combined.x.resize(rows.x.rows(), rows.x.cols());
  combined.y.resize(rows.y.rows(), rows.y.cols());
  for (std::size_t i = 0; i < n_train; ++i) {
    combined.x.row(static_cast<Eigen::Index>(i)) = rows.x.row(static_cast<Eigen::Index>(train_idx[i]));
    combined.y.row(static_cast<Eigen::Index>(i)) = rows.y.row(static_cast<Eigen::Index>(train_idx[i]));
  }
  for (std::size_t i = 0; i < n_test; ++i) {
    combined.x.row(static_cast<Eigen::Index>(n_train + i)) =
        rows.x.row(static_cast<Eigen::Index>(test_idx[i]));
    combined.y.row(static_cast<Eigen::Index>(n_train + i)) =
        rows.y.row(static_cast<Eigen::Index>(test_idx[i]));
  }
  const bool norm_targets = cfg.task == stream::Task::regression;
  const stream::RowTable normed =
      stream::normalize_rows(combined, cfg.normalization, n_train, norm_targets);

  stream::RowTable train_rows;
  train_rows.meta = normed.meta;
  train_rows.x = normed.x.topRows(static_cast<Eigen::Index>(n_train));
  train_rows.y = normed.y.topRows(static_cast<Eigen::Index>(n_train));
  const MatrixXd x_test = normed.x.bottomRows(static_cast<Eigen::Index>(n_test));
  const MatrixXd y_test = normed.y.bottomRows(static_cast<Eigen::Index>(n_test));

  const stream::BatchStream train_stream = stream::chunk_rows(train_rows, cfg.batch_fraction);
  const std::size_t horizon = train_stream.batches.size();
  const std::size_t k = train_stream.k;
  const std::size_t m = train_stream.m;
  const std::size_t n_layers = cfg.network.n_layers;
  const std::size_t n_styles = cfg.styles.size();
  const std::vector<double>* pll = cfg.per_layer_lambda.empty() ? nullptr : &cfg.per_layer_lambda;

  // runs[rep][style]
  std::vector<std::vector<BenchRun>> runs(cfg.reps, std::vector<BenchRun>(n_styles));
  parallel_for(cfg.reps, cfg.exec, [&](std::size_t rep) {
    features::NetworkConfig net = cfg.network;
    net.seed = derive_seed(cfg.seed, "network", rep);
    const features::RandomWeights weights = features::init_random_weights(k, net);

    // Holdout and stacked-training features depend only on the repetition's
    // weights, so both styles share one evaluation of each.
    const std::vector<MatrixXd> test_features =
        features::extract_features(x_test, weights, ExecPolicy::serial);
    const std::vector<MatrixXd> train_features_stacked =
        features::extract_features(train_rows.x, weights, ExecPolicy::serial);

    EvalContext ectx;
    ectx.test_features = &test_features;
    ectx.y_test = &y_test;
    ectx.task = cfg.task;
    ectx.ensemble = cfg.ensemble;

    for (std::size_t si = 0; si < n_styles; ++si) {
      BenchRun& run = runs[rep][si];
      run.layer_ledger.assign(n_layers, {});
      const auto t_start = std::chrono::steady_clock::now();
      iol::EnsembleLearner learner =
          iol::init_ensemble(weights, m, cfg.lambda, cfg.styles[si], pll);
      run.evals.reserve(horizon + 1);
      run.evals.push_back(evaluate_learner(learner, ectx));

      iol::RunOptions opt;
      opt.surrogate = cfg.surrogate;
      opt.exec = ExecPolicy::serial;  // the repetition pool is the parallel lane
      opt.before_update = [&](const iol::StepContext& ctx) {
        double total = 0.0;
        for (std::size_t l = 0; l < n_layers; ++l) {
          auto& lg = run.layer_ledger[l];
          const MatrixXd& d = (*ctx.layer_features)[l];
          lg.d_max = std::max(lg.d_max, max_abs(d));
          lg.y_max = std::max(lg.y_max, max_abs(*ctx.y));
          const double loss = regret::batch_loss(d, ctx.learner->layers[l].beta, *ctx.y);
          lg.learner_loss.push_back(loss);
          lg.learner_loss_clipped.push_back(
              regret::batch_loss_clipped(d, ctx.learner->layers[l].beta, *ctx.y, lg.y_max));
          total += loss;
        }
        run.train_loss_total.push_back(total);
      };
      opt.after_update = [&](std::size_t, const iol::EnsembleLearner& state) {
        run.evals.push_back(evaluate_learner(state, ectx));
      };
      stream::StreamSource source(train_stream);
      learner = iol::run_iol(std::move(learner), source, opt);
      const auto t_end = std::chrono::steady_clock::now();
      run.wall_ms = std::chrono::duration<double, std::milli>(t_end - t_start).count();

      // Per-layer cumulative regret against that layer's offline expert, plus
      // the stacked worst-case bound.
      std::vector<regret::BoundParams> layer_params;
      std::size_t max_batch = 0;
      for (const auto& b : train_stream.batches) {
        max_batch = std::max(max_batch, static_cast<std::size_t>(b.x.rows()));
      }
      for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& lg = run.layer_ledger[l];
        const double lam = pll ? (*pll)[l] : cfg.lambda;
        const MatrixXd expert =
            iol::offline_ridge_solve(train_features_stacked[l], train_rows.y, lam);
        const auto cr = regret::cumulative_regret(lg.learner_loss, train_features_stacked[l],
                                                  train_rows.y, expert, lam);
        const auto crc = regret::cumulative_regret(lg.learner_loss_clipped,
                                                   train_features_stacked[l], train_rows.y,
                                                   expert, lam);
        regret::BoundParams bp;
        bp.y_max = lg.y_max;
        bp.d_max = lg.d_max;
        bp.batch_size = max_batch;
        bp.feature_dim = weights.layer_feature_dim();
        bp.horizon = horizon;
        bp.lambda = lam;
        bp.s = cfg.s_factor;
        layer_params.push_back(bp);
        const double bound = cfg.styles[si] == iol::Style::ridge ? regret::ridge_bound(bp)
                                                                 : regret::forward_bound(bp);
        run.cr_sum += cr.vs_expert;
        run.cr_sum_clipped += crc.vs_expert;
        json lj;
        lj["layer"] = l + 1;
        lj["cr_vs_expert"] = cr.vs_expert;
        lj["cr_vs_expert_clipped"] = crc.vs_expert;
        lj["bound"] = bound;
        lj["bound_satisfied"] = crc.vs_expert <= bound;
        run.per_layer_summary.push_back(std::move(lj));
      }
      run.ensemble_bound = cfg.styles[si] == iol::Style::ridge
                               ? regret::ensemble_ridge_bound(layer_params)
                               : regret::ensemble_forward_bound(layer_params);
    }
  });

  ExperimentReport report;
  report.run_id = make_run_id(cfg);
  report.config_echo = config_to_json(cfg);
  const std::string metric = cfg.task == stream::Task::regression ? "rmse" : "acc";

  json summary;
  summary["mode"] = "bench";
  summary["rows_total"] = n_rows;
  summary["rows_train"] = n_train;
  summary["rows_test"] = n_test;
  summary["horizon"] = horizon;
  summary["feature_dim"] = cfg.network.n_nodes + k;
  summary["stream_hash"] = stream::stream_hash(train_stream);
  if (!train_stream.meta.class_labels.empty()) {
    summary["class_labels"] = train_stream.meta.class_labels;
  }

  for (std::size_t si = 0; si < n_styles; ++si) {
    const std::string sname = iol::style_name(cfg.styles[si]);

    for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
      const BenchRun& run = runs[rep][si];
      double cum = 0.0;
      for (std::size_t t = 0; t < run.evals.size(); ++t) {
        const EvalPoint& p = run.evals[t];
        const double td = static_cast<double>(t);
        const long repl = static_cast<long>(rep);
        push_row(report.rows, sname, repl, td, "test_" + metric + "_ensemble", "value",
                 p.ensemble_metric);
        cum += p.ensemble_metric;
        push_row(report.rows, sname, repl, td, "test_" + metric + "_ensemble_cum", "value",
                 cum / static_cast<double>(t + 1));
        for (std::size_t l = 0; l < p.layer_metrics.size(); ++l) {
          push_row(report.rows, sname, repl, td, "test_" + metric + "_layer" + std::to_string(l + 1),
                   "value", p.layer_metrics[l]);
        }
        const std::vector<double>& lm = p.layer_metrics;
        push_row(report.rows, sname, repl, td, "test_" + metric + "_layers", "min",
                 *std::min_element(lm.begin(), lm.end()));
        push_row(report.rows, sname, repl, td, "test_" + metric + "_layers", "q1",
                 quantile(lm, 0.25));
        push_row(report.rows, sname, repl, td, "test_" + metric + "_layers", "median",
                 quantile(lm, 0.5));
        push_row(report.rows, sname, repl, td, "test_" + metric + "_layers", "q3",
                 quantile(lm, 0.75));
        push_row(report.rows, sname, repl, td, "test_" + metric + "_layers", "max",
                 *std::max_element(lm.begin(), lm.end()));
        for (std::size_t c = 0; c < p.class_acc.size(); ++c) {
          push_row(report.rows, sname, repl, td, "test_acc_class" + std::to_string(c), "value",
                   p.class_acc[c]);
        }
      }
      for (std::size_t t = 0; t < run.train_loss_total.size(); ++t) {
        push_row(report.rows, sname, static_cast<long>(rep), static_cast<double>(t),
                 "train_loss_total", "value", run.train_loss_total[t]);
      }
      const double t_end = static_cast<double>(horizon);
      push_row(report.rows, sname, static_cast<long>(rep), t_end, "cr_sum_layers", "value",
               runs[rep][si].cr_sum);
      push_row(report.rows, sname, static_cast<long>(rep), t_end, "cr_sum_layers_clipped", "value",
               runs[rep][si].cr_sum_clipped);
      push_row(report.rows, sname, static_cast<long>(rep), t_end, "ensemble_bound", "value",
               runs[rep][si].ensemble_bound);
    }

    // Aggregate ensemble-metric curve over repetitions.
    for (std::size_t t = 0; t <= horizon; ++t) {
      std::vector<double> vals;
      vals.reserve(cfg.reps);
      for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
        vals.push_back(runs[rep][si].evals[t].ensemble_metric);
      }
      push_row(report.rows, sname, -1, static_cast<double>(t), "test_" + metric + "_ensemble",
               "mean", mean_of(vals));
      push_row(report.rows, sname, -1, static_cast<double>(t), "test_" + metric + "_ensemble",
               "std", std_of(vals));
    }

    std::vector<double> finals, crs, crs_clip, bounds, wall;
    for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
      finals.push_back(runs[rep][si].evals.back().ensemble_metric);
      crs.push_back(runs[rep][si].cr_sum);
      crs_clip.push_back(runs[rep][si].cr_sum_clipped);
      bounds.push_back(runs[rep][si].ensemble_bound);
      wall.push_back(runs[rep][si].wall_ms);
    }
    json s;
    s["final_" + metric + "_mean"] = mean_of(finals);
    s["final_" + metric + "_std"] = std_of(finals);
    s["cr_sum_layers_mean"] = mean_of(crs);
    s["cr_sum_layers_clipped_mean"] = mean_of(crs_clip);
    s["ensemble_bound_mean"] = mean_of(bounds);
    s["per_layer_rep0"] = runs[0][si].per_layer_summary;
    s["timing"] = {{"mean_run_ms", mean_of(wall)}};  // JSON only, never CSV
    summary["styles"][sname] = std::move(s);
  }

  report.summary = std::move(summary);
  return report;
}

AblationReport ablation_sweep(const ExperimentConfig& base, const std::string& axis,
                              const std::vector<json>& values) {
  if (values.empty()) throw ConfigError("ablation_sweep: no values");
  AblationReport out;
  out.axis = axis;
  for (const auto& v : values) {
    ExperimentConfig cfg = base;
    if (axis == "n_nodes") {
      cfg.network.n_nodes = v.get<std::size_t>();
    } else if (axis == "n_layers") {
      cfg.network.n_layers = v.get<std::size_t>();
    } else if (axis == "lambda") {
      cfg.lambda = v.get<double>();
    } else if (axis == "batch_fraction") {
      cfg.batch_fraction = v.get<double>();
    } else if (axis == "normalization") {
      cfg.normalization = norm_from_name(v.get<std::string>());
    } else if (axis == "activation") {
      cfg.network.activation = features::activation_from_name(v.get<std::string>());
    } else {
      throw ConfigError("ablation_sweep: unsupported axis '" + axis + "'");
    }
    cfg.name = base.name + "-" + axis;
    const ExperimentReport rep = run_experiment(cfg);
    AblationPoint p;
    p.value = v;
    p.run_id = rep.run_id;
    p.stream_hash = rep.summary.at("stream_hash").get<std::uint64_t>();
    p.final_metrics = rep.summary.at("styles");
    out.points.push_back(std::move(p));
  }
  json s;
  s["axis"] = axis;
  s["n_points"] = out.points.size();
  s["seed"] = base.seed;  // shared across points: paired comparison
  out.summary = std::move(s);
  return out;
}

nlohmann::json ablation_to_json(const AblationReport& report) {
  json j;
  j["axis"] = report.axis;
  j["summary"] = report.summary;
  j["points"] = json::array();
  for (const auto& p : report.points) {
    j["points"].push_back({{"value", p.value},
                           {"run_id", p.run_id},
                           {"stream_hash", p.stream_hash},
                           {"final_metrics", p.final_metrics}});
  }
  return j;
}

}  // namespace edrvfl::bench
