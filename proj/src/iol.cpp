#include "edrvfl/iol.hpp"

#include <cmath>
#include <iostream>
#include <mutex>
#include <utility>

#include "edrvfl/rng.hpp"
#include "edrvfl/tolerances.hpp"

namespace edrvfl::iol {

namespace {

std::mutex g_warn_mutex;
std::function<void(const std::string&)> g_warn_handler;

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.size();
  const auto cols = rows == 0 ? 0 : j.at(0).size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j.at(r).at(c).get<double>();
    }
  }
  return m;
}

}  // namespace

void set_warning_handler(std::function<void(const std::string&)> handler) {
  std::lock_guard<std::mutex> lock(g_warn_mutex);
  g_warn_handler = std::move(handler);
}

void emit_warning(const std::string& message) {
  std::lock_guard<std::mutex> lock(g_warn_mutex);
  if (g_warn_handler) {
    g_warn_handler(message);
  } else {
    std::cerr << "[edrvfl] warning: " << message << '\n';
  }
}

LearnerState init_learner(double lambda, std::size_t feature_dim, std::size_t target_dim,
                          Style style, const Eigen::MatrixXd* beta0) {
  if (!(lambda > 0.0)) throw ConfigError("init_learner: lambda must be positive");
  if (feature_dim == 0 || target_dim == 0) {
    throw ConfigError("init_learner: dimensions must be positive");
  }
  LearnerState s;
  s.lambda = lambda;
  s.style = style;
  s.t = 0;
  const auto p = static_cast<Eigen::Index>(feature_dim);
  const auto m = static_cast<Eigen::Index>(target_dim);
  s.eta = Eigen::MatrixXd::Identity(p, p) / lambda;
  if (beta0 != nullptr) {
    if (beta0->rows() != p || beta0->cols() != m) {
      throw ConfigError("init_learner: beta0 shape mismatch");
    }
    s.beta0 = *beta0;
  } else {
    s.beta0 = Eigen::MatrixXd::Zero(p, m);
  }
  s.beta = s.beta0;
  return s;
}

Eigen::MatrixXd smw_rate_update(const Eigen::MatrixXd& eta, const Eigen::MatrixXd& d,
                                double* rcond_out) {
  if (d.cols() != eta.rows()) throw ConfigError("smw_rate_update: shape mismatch");
  const Eigen::Index b = d.rows();
  const Eigen::MatrixXd de = d * eta;                                     // b x p
  Eigen::MatrixXd inner = Eigen::MatrixXd::Identity(b, b) + de * d.transpose();
  inner = 0.5 * (inner + inner.transpose().eval());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(inner);
  if (ldlt.info() != Eigen::Success) {
    throw NumericalError("smw_rate_update: inner factorization failed");
  }
  // SPD inner matrix (I + PSD): the LDLT diagonal ratio is a cheap rcond proxy.
  const auto diag = ldlt.vectorD();
  const double dmax = diag.maxCoeff();
  const double dmin = diag.minCoeff();
  const double rcond = dmax > 0.0 ? dmin / dmax : 0.0;
  if (rcond_out != nullptr) *rcond_out = rcond;
  if (!(rcond > tol::kRcondWarn)) {
    emit_warning("smw_rate_update: inner rcond " + std::to_string(rcond) + " below threshold");
  }
  Eigen::MatrixXd next = eta - de.transpose() * ldlt.solve(de);
  next = 0.5 * (next + next.transpose().eval());
  if (!next.allFinite()) throw NumericalError("smw_rate_update: non-finite rate");
  return next;
}

LearnerState ridge_step(LearnerState s, const Eigen::MatrixXd& d, const Eigen::MatrixXd& y) {
  if (s.style != Style::ridge) throw ConfigError("ridge_step: learner style is not ridge");
  if (d.rows() != y.rows() || d.cols() != s.beta.rows() || y.cols() != s.beta.cols()) {
    throw ConfigError("ridge_step: shape mismatch");
  }
  s.eta = smw_rate_update(s.eta, d);
  s.beta -= s.eta * (d.transpose() * (d * s.beta) - d.transpose() * y);
  if (!s.beta.allFinite()) throw NumericalError("ridge_step: non-finite state");
  ++s.t;
  return s;
}

LearnerState forward_step(LearnerState s, const Eigen::MatrixXd& d, const Eigen::MatrixXd& y,
                          const Eigen::MatrixXd& d_next) {
  if (s.style != Style::forward) throw ConfigError("forward_step: learner style is not forward");
  if (d.rows() != y.rows() || d.cols() != s.beta.rows() || y.cols() != s.beta.cols() ||
      d_next.cols() != s.beta.rows()) {
    throw ConfigError("forward_step: shape mismatch");
  }
  // The rate leads by one batch: the Gram of every batch enters once, so the
  // first step absorbs the current batch before its lookahead.
  if (s.t == 0) s.eta = smw_rate_update(s.eta, d);
  s.eta = smw_rate_update(s.eta, d_next);
  const Eigen::MatrixXd gn_beta = d_next.transpose() * (d_next * s.beta);
  s.beta -= s.eta * (gn_beta - d.transpose() * y);
  if (s.beta0.squaredNorm() > 0.0) {
    const Eigen::MatrixXd correction = d_next.transpose() * (d_next * s.beta0) -
                                       d.transpose() * (d * s.beta0);
    s.beta += s.eta * correction;
  }
  if (!s.beta.allFinite()) throw NumericalError("forward_step: non-finite state");
  ++s.t;
  return s;
}

Eigen::MatrixXd offline_ridge_solve_primal(const Eigen::MatrixXd& d, const Eigen::MatrixXd& y,
                                           double lambda, const Eigen::MatrixXd* beta0) {
  if (!(lambda > 0.0)) throw ConfigError("offline_ridge_solve: lambda must be positive");
  const Eigen::Index p = d.cols();
  Eigen::MatrixXd gram = d.transpose() * d;
  gram.diagonal().array() += lambda;
  Eigen::MatrixXd rhs = d.transpose() * y;
  if (beta0 != nullptr) rhs += lambda * (*beta0);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) throw NumericalError("offline_ridge_solve: factorization failed");
  (void)p;
  return ldlt.solve(rhs);
}

Eigen::MatrixXd offline_ridge_solve_dual(const Eigen::MatrixXd& d, const Eigen::MatrixXd& y,
                                         double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("offline_ridge_solve: lambda must be positive");
  Eigen::MatrixXd gram = d * d.transpose();
  gram.diagonal().array() += lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) throw NumericalError("offline_ridge_solve: factorization failed");
  return d.transpose() * ldlt.solve(y);
}

Eigen::MatrixXd offline_ridge_solve(const Eigen::MatrixXd& d, const Eigen::MatrixXd& y,
                                    double lambda, const Eigen::MatrixXd* beta0) {
  // The dual form inverts the n x n Gram; only equivalent for a zero prior.
  const bool prior_zero = beta0 == nullptr || beta0->squaredNorm() == 0.0;
  if (prior_zero && d.rows() < d.cols()) return offline_ridge_solve_dual(d, y, lambda);
  return offline_ridge_solve_primal(d, y, lambda, beta0);
}

Eigen::MatrixXd offline_forward_solve(const Eigen::MatrixXd& d, const Eigen::MatrixXd& y,
                                      const Eigen::MatrixXd& d_next, double lambda,
                                      const Eigen::MatrixXd* beta0) {
  if (!(lambda > 0.0)) throw ConfigError("offline_forward_solve: lambda must be positive");
  if (d.cols() != d_next.cols()) throw ConfigError("offline_forward_solve: width mismatch");
  Eigen::MatrixXd gram = d.transpose() * d + d_next.transpose() * d_next;
  gram.diagonal().array() += lambda;
  Eigen::MatrixXd rhs = d.transpose() * y;
  if (beta0 != nullptr) {
    rhs += lambda * (*beta0) + d_next.transpose() * (d_next * (*beta0));
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) {
    throw NumericalError("offline_forward_solve: factorization failed");
  }
  return ldlt.solve(rhs);
}

SurrogatePolicy::Kind surrogate_from_name(const std::string& s) {
  if (s == "repeat_last") return SurrogatePolicy::Kind::repeat_last;
  if (s == "random_seen") return SurrogatePolicy::Kind::random_seen;
  if (s == "none") return SurrogatePolicy::Kind::none;
  throw ConfigError("unknown surrogate policy '" + s + "'");
}

std::string surrogate_name(SurrogatePolicy::Kind k) {
  switch (k) {
    case SurrogatePolicy::Kind::repeat_last: return "repeat_last";
    case SurrogatePolicy::Kind::random_seen: return "random_seen";
    case SurrogatePolicy::Kind::none: return "none";
  }
  return "repeat_last";
}

Style style_from_name(const std::string& s) {
  if (s == "ridge") return Style::ridge;
  if (s == "forward") return Style::forward;
  throw ConfigError("unknown style '" + s + "'");
}

std::string style_name(Style s) { return s == Style::ridge ? "ridge" : "forward"; }

EnsembleLearner init_ensemble(const features::RandomWeights& weights, std::size_t target_dim,
                              double lambda, Style style,
                              const std::vector<double>* per_layer_lambda) {
  EnsembleLearner e;
  e.weights = weights;
  const std::size_t dim = weights.layer_feature_dim();
  if (per_layer_lambda != nullptr && per_layer_lambda->size() != weights.w.size()) {
    throw ConfigError("init_ensemble: per-layer lambda count mismatch");
  }
  for (std::size_t l = 0; l < weights.w.size(); ++l) {
    const double lam = per_layer_lambda != nullptr ? (*per_layer_lambda)[l] : lambda;
    e.layers.push_back(init_learner(lam, dim, target_dim, style));
  }
  return e;
}

EnsembleLearner run_iol(EnsembleLearner learner, stream::IBatchSource& source,
                        const RunOptions& opt) {
  const std::size_t horizon = source.size();
  if (horizon == 0) return learner;
  if (learner.layers.empty()) throw ConfigError("run_iol: learner has no layers");
  const Style style = learner.style();
  for (const auto& l : learner.layers) {
    if (l.style != style) throw ConfigError("run_iol: mixed learner styles");
  }
  const std::size_t n_layers = learner.layers.size();

  // Current batch's features/labels; the forward path refills `next` so every
  // batch is pulled from the source exactly once.
  std::vector<Eigen::MatrixXd> cur_d;
  Eigen::MatrixXd cur_y;
  std::vector<Eigen::MatrixXd> next_d;
  Eigen::MatrixXd next_y;

  {
    const auto& b0 = source.at(0);
    cur_d = features::extract_features(b0.x, learner.weights, opt.exec);
    cur_y = b0.y;
  }

  for (std::size_t t = 0; t < horizon; ++t) {
    if (opt.before_update) {
      StepContext ctx;
      ctx.t = t;
      ctx.layer_features = &cur_d;
      ctx.y = &cur_y;
      ctx.learner = &learner;
      opt.before_update(ctx);
    }

    if (style == Style::ridge) {
      parallel_for(n_layers, opt.exec, [&](std::size_t l) {
        learner.layers[l] = ridge_step(std::move(learner.layers[l]), cur_d[l], cur_y);
      });
    } else {
      // Lookahead features: next batch, or a surrogate at the horizon.
      bool skip_update = false;
      const std::vector<Eigen::MatrixXd>* look = nullptr;
      if (t + 1 < horizon) {
        const auto& nb = source.at(t + 1);
        next_d = features::extract_features(nb.x, learner.weights, opt.exec);
        next_y = nb.y;
        look = &next_d;
      } else {
        switch (opt.surrogate.kind) {
          case SurrogatePolicy::Kind::repeat_last:
            look = &cur_d;  // reuse the cached features, no re-pull
            break;
          case SurrogatePolicy::Kind::random_seen: {
            auto rng = make_engine(opt.surrogate.seed);
            std::uniform_int_distribution<std::size_t> pick(0, horizon - 1);
            const auto& sb = source.at(pick(rng));
            next_d = features::extract_features(sb.x, learner.weights, opt.exec);
            look = &next_d;
            break;
          }
          case SurrogatePolicy::Kind::none:
            skip_update = true;
            break;
        }
      }
      if (!skip_update) {
        parallel_for(n_layers, opt.exec, [&](std::size_t l) {
          learner.layers[l] =
              forward_step(std::move(learner.layers[l]), cur_d[l], cur_y, (*look)[l]);
        });
      }
      if (t + 1 < horizon) {
        cur_d = std::move(next_d);
        cur_y = std::move(next_y);
        next_d.clear();
      }
    }

    if (style == Style::ridge && t + 1 < horizon) {
      const auto& nb = source.at(t + 1);
      cur_d = features::extract_features(nb.x, learner.weights, opt.exec);
      cur_y = nb.y;
    }

    if (opt.after_update) opt.after_update(t, learner);
  }
  return learner;
}

nlohmann::json LearnerState::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["layout"] = "row-major";  // matrices as arrays of rows, 8-byte floats
  j["style"] = style == Style::ridge ? "ridge" : "forward";
  j["lambda"] = lambda;
  j["t"] = t;
  j["beta"] = matrix_to_json(beta);
  j["eta"] = matrix_to_json(eta);
  j["beta0"] = matrix_to_json(beta0);
  return j;
}

LearnerState LearnerState::from_json(const nlohmann::json& j) {
  LearnerState s;
  s.style = j.at("style").get<std::string>() == "forward" ? Style::forward : Style::ridge;
  s.lambda = j.at("lambda").get<double>();
  s.t = j.at("t").get<std::size_t>();
  s.beta = matrix_from_json(j.at("beta"));
  s.eta = matrix_from_json(j.at("eta"));
  s.beta0 = matrix_from_json(j.at("beta0"));
  return s;
}

nlohmann::json EnsembleLearner::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["weights"] = weights.to_json();
  j["layers"] = nlohmann::json::array();
  for (const auto& l : layers) j["layers"].push_back(l.to_json());
  return j;
}

EnsembleLearner EnsembleLearner::from_json(const nlohmann::json& j) {
  EnsembleLearner e;
  e.weights = features::RandomWeights::from_json(j.at("weights"));
  for (const auto& l : j.at("layers")) e.layers.push_back(LearnerState::from_json(l));
  return e;
}

}  // namespace edrvfl::iol
