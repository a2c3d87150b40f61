#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "edrvfl/errors.hpp"
#include "edrvfl/exec.hpp"
#include "edrvfl/features.hpp"
#include "edrvfl/stream.hpp"

namespace edrvfl::iol {

enum class Style { ridge, forward };

// One layer's online learner. Invariants maintained by the step functions:
//   ridge:   eta == (lambda I + sum_{q<=t} Dq'Dq)^-1
//   forward: eta == (lambda I + sum_{q<=t+1} Dq'Dq)^-1   (t > 0; rate leads by
//            one batch because each step also absorbs the lookahead Gram)
// eta is kept symmetric by explicit symmetrization after every update.
struct LearnerState {
  Eigen::MatrixXd beta;   // p x m
  Eigen::MatrixXd eta;    // p x p
  Eigen::MatrixXd beta0;  // p x m prior center
  double lambda = 1.0;
  Style style = Style::ridge;
  std::size_t t = 0;  // processed batches

  nlohmann::json to_json() const;
  static LearnerState from_json(const nlohmann::json& j);
};

LearnerState init_learner(double lambda, std::size_t feature_dim, std::size_t target_dim,
                          Style style, const Eigen::MatrixXd* beta0 = nullptr);

// Warnings (e.g. rcond of the SMW inner solve under tol::kRcondWarn) go
// through a replaceable handler; default writes one line to stderr.
void set_warning_handler(std::function<void(const std::string&)> handler);
void emit_warning(const std::string& message);

// eta' = eta - eta D' (I_b + D eta D')^-1 D eta, via an LDLT solve of the
// b x b inner system; result symmetrized. rcond_out (optional) receives a
// cheap reciprocal-condition estimate of the inner matrix.
Eigen::MatrixXd smw_rate_update(const Eigen::MatrixXd& eta, const Eigen::MatrixXd& d,
                                double* rcond_out = nullptr);

// Absorb batch d into the rate, then descend: beta' = beta - eta'(D'D beta - D'y).
LearnerState ridge_step(LearnerState s, const Eigen::MatrixXd& d, const Eigen::MatrixXd& y);

// Absorb the lookahead Gram (plus the current batch's on the first step),
// then beta' = beta - eta'(Dn'Dn beta - D'y) + eta'(Dn'Dn - D'D) beta0.
LearnerState forward_step(LearnerState s, const Eigen::MatrixXd& d, const Eigen::MatrixXd& y,
                          const Eigen::MatrixXd& d_next);

// Exact batch solves used as equivalence oracles. The ridge solve picks the
// primal or dual Gram by whichever is smaller; both agree to tol::kRateAgreement.
Eigen::MatrixXd offline_ridge_solve(const Eigen::MatrixXd& d, const Eigen::MatrixXd& y,
                                    double lambda, const Eigen::MatrixXd* beta0 = nullptr);
Eigen::MatrixXd offline_ridge_solve_primal(const Eigen::MatrixXd& d, const Eigen::MatrixXd& y,
                                           double lambda, const Eigen::MatrixXd* beta0 = nullptr);
Eigen::MatrixXd offline_ridge_solve_dual(const Eigen::MatrixXd& d, const Eigen::MatrixXd& y,
                                         double lambda);

// Minimizer of the forward objective
//   lambda/2 ||b - b0||^2 + 1/2 ||D b - Y||^2 + 1/2 ||Dn (b - b0)||^2
// = (lambda I + D'D + Dn'Dn)^-1 (D'Y + lambda b0 + Dn'Dn b0).
Eigen::MatrixXd offline_forward_solve(const Eigen::MatrixXd& d, const Eigen::MatrixXd& y,
                                      const Eigen::MatrixXd& d_next, double lambda,
                                      const Eigen::MatrixXd* beta0 = nullptr);

struct SurrogatePolicy {
  enum class Kind { repeat_last, random_seen, none };
  Kind kind = Kind::repeat_last;
  std::uint64_t seed = 0;  // for random_seen
};

SurrogatePolicy::Kind surrogate_from_name(const std::string& s);
std::string surrogate_name(SurrogatePolicy::Kind k);
Style style_from_name(const std::string& s);
std::string style_name(Style s);

// The full stacked model: fixed random weights plus one learner per layer.
struct EnsembleLearner {
  features::RandomWeights weights;
  std::vector<LearnerState> layers;

  Style style() const { return layers.empty() ? Style::ridge : layers.front().style; }
  nlohmann::json to_json() const;
  static EnsembleLearner from_json(const nlohmann::json& j);
};

// Same lambda for every layer unless per-layer values are supplied.
EnsembleLearner init_ensemble(const features::RandomWeights& weights, std::size_t target_dim,
                              double lambda, Style style,
                              const std::vector<double>* per_layer_lambda = nullptr);

struct StepContext {
  std::size_t t = 0;
  const std::vector<Eigen::MatrixXd>* layer_features = nullptr;  // current batch, per layer
  const Eigen::MatrixXd* y = nullptr;
  const EnsembleLearner* learner = nullptr;  // pre-update
};

struct RunOptions {
  SurrogatePolicy surrogate{};
  ExecPolicy exec = ExecPolicy::serial;
  std::function<void(const StepContext&)> before_update;
  std::function<void(std::size_t t, const EnsembleLearner&)> after_update;
};

// Online pass over the stream: extract the cascade for the incoming batch,
// update every layer (parallel across layers under the openmp policy), move
// on. Each batch is pulled exactly once; the forward style caches the
// lookahead batch's features and labels so nothing is revisited. Exception:
// the random_seen surrogate policy re-pulls one already-seen batch at the end.
EnsembleLearner run_iol(EnsembleLearner learner, stream::IBatchSource& source,
                        const RunOptions& opt = {});

}  // namespace edrvfl::iol
