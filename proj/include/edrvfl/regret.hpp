#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "edrvfl/errors.hpp"

namespace edrvfl::regret {

// L(beta) = 1/2 ||D beta - Y||_F^2; matrix targets reduce via the trace.
double batch_loss(const Eigen::MatrixXd& d, const Eigen::MatrixXd& beta,
                  const Eigen::MatrixXd& y);
double batch_loss_clipped(const Eigen::MatrixXd& d, const Eigen::MatrixXd& beta,
                          const Eigen::MatrixXd& y, double clip);

// IR = 2 (L_t(learner) - L_t(reference)).
double immediate_regret(double learner_loss, double reference_loss);

// Translated immediate-regret form for the ridge style:
//   tr[(D beta - Y)' D eta D' (D beta - Y)], beta pre-update, eta post-absorb.
double regret_term_ridge(const Eigen::MatrixXd& d, const Eigen::MatrixXd& beta_pre,
                         const Eigen::MatrixXd& y, const Eigen::MatrixXd& eta);

// Forward-style translated form, term1 - term2 with
//   term1 = tr[(D'Y)' eta (D'Y)],
//   term2 = tr[(Dn'Dn beta_next)' eta (Dn'Dn beta_next)], beta_next post-update.
// Callers choose the eta indexing; the ledger records both the lagged rate
// (before the step) and the leading rate (after it), since the source
// material carries both notations.
struct ForwardRegretTerms {
  double term1 = 0.0;
  double term2 = 0.0;
  double value = 0.0;
};
ForwardRegretTerms regret_terms_forward(const Eigen::MatrixXd& d, const Eigen::MatrixXd& y,
                                        const Eigen::MatrixXd& d_next,
                                        const Eigen::MatrixXd& beta_next,
                                        const Eigen::MatrixXd& eta);

// Per-step record of one learner's run, accumulated by the callers' hooks.
struct RegretLedger {
  std::vector<double> learner_loss;        // pre-update L_t(beta_t)
  std::vector<double> learner_loss_clipped;
  std::vector<double> oracle_loss;         // L_t(beta_oracle), when an oracle exists
  std::vector<double> immediate;           // 2 (learner - oracle)
  std::vector<double> irt;                 // translated form, lagged eta
  std::vector<double> irt_lead;            // translated form, leading eta (forward)
  double d_max = 0.0;                      // running max |D| entry
  double y_max = 0.0;                      // running max of |Y| and clipped |D beta|

  double cum_learner_loss() const;
  double cum_learner_loss_clipped() const;
  double cum_immediate() const;
};

// Bregman gap of the prior term: 1/2 lambda ||b - b0||_F^2.
double prior_gap(const Eigen::MatrixXd& beta, const Eigen::MatrixXd& beta0, double lambda);

struct CumulativeRegret {
  double vs_expert = 0.0;          // sum L_t(beta_t) - [prior_gap(expert) + L(expert)]
  double vs_expert_shifted = 0.0;  // variant without the prior term
};

// expert_beta is the fixed comparator (normally the full-stream ridge solve);
// d_stack/y_stack are the stacked stream the expert is scored on.
CumulativeRegret cumulative_regret(const std::vector<double>& learner_losses,
                                   const Eigen::MatrixXd& d_stack, const Eigen::MatrixXd& y_stack,
                                   const Eigen::MatrixXd& expert_beta, double lambda,
                                   const Eigen::MatrixXd* beta0 = nullptr);

// Sum of immediate regrets against the generating oracle; a separate
// comparator from the optimal offline expert above.
double cumulative_regret_vs_oracle(const RegretLedger& ledger);

struct BoundParams {
  double y_max = 1.0;
  double d_max = 1.0;
  std::size_t batch_size = 1;   // b (the max batch size when sizes vary)
  std::size_t feature_dim = 1;  // N + k
  std::size_t horizon = 1;      // T
  double lambda = 1.0;
  double s = 1.0;               // regularizer amplification factor
};

// gamma_r = 2 Ym^2 b (N+k) ln(1 + T Dm^2 b / (lambda s)).
double ridge_bound(const BoundParams& p);
// Tight two-log forward bound:
//   1/2 Ym^2 b (N+k) [ln(1 + T Dm^2 b/(lambda s)) - ln(1 + (T-1) Dm^2 b/(lambda s + 2 Dm^2 b))].
double forward_bound(const BoundParams& p);
// Looser single-log form; ridge_bound / this == 4 identically.
double forward_bound_single_log(const BoundParams& p);
double bound_ratio_ridge_over_forward_single_log(const BoundParams& p);

// Growth rates in the horizon (a1 = 2 Ym^2 b (N+k), a2 = Dm^2 b / (lambda s)):
//   ridge:   a1 a2 / (1 + a2 t)
//   forward: (a1/4) [a2/(1 + a2 t) - a2/(1 + a2 + a2 t)]
double ridge_bound_derivative(const BoundParams& p, double t);
double forward_bound_derivative(const BoundParams& p, double t);

// Bounds as functions of a continuous horizon, for finite-difference checks.
double ridge_bound_at(const BoundParams& p, double t);
double forward_bound_at(const BoundParams& p, double t);

// Ensemble bounds: L times the single-learner bound evaluated at the worst
// per-layer constants (min lambda, max Dm, max Ym).
double ensemble_ridge_bound(const std::vector<BoundParams>& per_layer);
double ensemble_forward_bound(const std::vector<BoundParams>& per_layer);

}  // namespace edrvfl::regret
