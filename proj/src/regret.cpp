#include "edrvfl/regret.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace edrvfl::regret {

double batch_loss(const Eigen::MatrixXd& d, const Eigen::MatrixXd& beta,
                  const Eigen::MatrixXd& y) {
  return 0.5 * (d * beta - y).squaredNorm();
}

double batch_loss_clipped(const Eigen::MatrixXd& d, const Eigen::MatrixXd& beta,
                          const Eigen::MatrixXd& y, double clip) {
  const Eigen::MatrixXd pred = (d * beta).cwiseMax(-clip).cwiseMin(clip);
  return 0.5 * (pred - y).squaredNorm();
}

double immediate_regret(double learner_loss, double reference_loss) {
  return 2.0 * (learner_loss - reference_loss);
}

double regret_term_ridge(const Eigen::MatrixXd& d, const Eigen::MatrixXd& beta_pre,
                         const Eigen::MatrixXd& y, const Eigen::MatrixXd& eta) {
  const Eigen::MatrixXd residual = d * beta_pre - y;          // b x m
  const Eigen::MatrixXd v = d.transpose() * residual;         // p x m
  return (v.transpose() * (eta * v)).trace();
}

ForwardRegretTerms regret_terms_forward(const Eigen::MatrixXd& d, const Eigen::MatrixXd& y,
                                        const Eigen::MatrixXd& d_next,
                                        const Eigen::MatrixXd& beta_next,
                                        const Eigen::MatrixXd& eta) {
  ForwardRegretTerms out;
  const Eigen::MatrixXd v1 = d.transpose() * y;                              // p x m
  const Eigen::MatrixXd v2 = d_next.transpose() * (d_next * beta_next);      // p x m
  out.term1 = (v1.transpose() * (eta * v1)).trace();
  out.term2 = (v2.transpose() * (eta * v2)).trace();
  out.value = out.term1 - out.term2;
  return out;
}

double RegretLedger::cum_learner_loss() const {
  return std::accumulate(learner_loss.begin(), learner_loss.end(), 0.0);
}

double RegretLedger::cum_learner_loss_clipped() const {
  return std::accumulate(learner_loss_clipped.begin(), learner_loss_clipped.end(), 0.0);
}

double RegretLedger::cum_immediate() const {
  return std::accumulate(immediate.begin(), immediate.end(), 0.0);
}

double prior_gap(const Eigen::MatrixXd& beta, const Eigen::MatrixXd& beta0, double lambda) {
  return 0.5 * lambda * (beta - beta0).squaredNorm();
}

CumulativeRegret cumulative_regret(const std::vector<double>& learner_losses,
                                   const Eigen::MatrixXd& d_stack, const Eigen::MatrixXd& y_stack,
                                   const Eigen::MatrixXd& expert_beta, double lambda,
                                   const Eigen::MatrixXd* beta0) {
  const double learner = std::accumulate(learner_losses.begin(), learner_losses.end(), 0.0);
  const double expert_loss = batch_loss(d_stack, expert_beta, y_stack);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(expert_beta.rows(), expert_beta.cols());
  const double gap = prior_gap(expert_beta, beta0 != nullptr ? *beta0 : zero, lambda);
  CumulativeRegret out;
  out.vs_expert = learner - (gap + expert_loss);
  out.vs_expert_shifted = learner - expert_loss;
  return out;
}

double cumulative_regret_vs_oracle(const RegretLedger& ledger) {
  return ledger.cum_immediate();
}

namespace {

// Shared core so the exact 2 / (1/2) scaling survives in floating point and
// the ridge-to-forward single-log ratio is 4 to the last bit.
double bound_core(const BoundParams& p, double t) {
  const double b = static_cast<double>(p.batch_size);
  const double dim = static_cast<double>(p.feature_dim);
  const double a2 = p.d_max * p.d_max * b / (p.lambda * p.s);
  return p.y_max * p.y_max * b * dim * std::log1p(t * a2);
}

void check_params(const BoundParams& p) {
  if (!(p.lambda > 0.0) || !(p.s > 0.0)) throw ConfigError("bound: lambda and s must be positive");
  if (p.batch_size == 0 || p.feature_dim == 0) throw ConfigError("bound: sizes must be positive");
}

}  // namespace

double ridge_bound_at(const BoundParams& p, double t) {
  check_params(p);
  return 2.0 * bound_core(p, t);
}

double ridge_bound(const BoundParams& p) {
  return ridge_bound_at(p, static_cast<double>(p.horizon));
}

double forward_bound_at(const BoundParams& p, double t) {
  check_params(p);
  const double b = static_cast<double>(p.batch_size);
  const double dim = static_cast<double>(p.feature_dim);
  const double g2 = p.d_max * p.d_max * b;
  const double first = std::log1p(t * g2 / (p.lambda * p.s));
  const double second = std::log1p((t - 1.0) * g2 / (p.lambda * p.s + 2.0 * g2));
  return 0.5 * p.y_max * p.y_max * b * dim * (first - second);
}

double forward_bound(const BoundParams& p) {
  return forward_bound_at(p, static_cast<double>(p.horizon));
}

double forward_bound_single_log(const BoundParams& p) {
  check_params(p);
  return 0.5 * bound_core(p, static_cast<double>(p.horizon));
}

double bound_ratio_ridge_over_forward_single_log(const BoundParams& p) {
  return ridge_bound(p) / forward_bound_single_log(p);
}

double ridge_bound_derivative(const BoundParams& p, double t) {
  check_params(p);
  const double b = static_cast<double>(p.batch_size);
  const double a1 = 2.0 * p.y_max * p.y_max * b * static_cast<double>(p.feature_dim);
  const double a2 = p.d_max * p.d_max * b / (p.lambda * p.s);
  return a1 * a2 / (1.0 + a2 * t);
}

double forward_bound_derivative(const BoundParams& p, double t) {
  check_params(p);
  const double b = static_cast<double>(p.batch_size);
  const double a1 = 2.0 * p.y_max * p.y_max * b * static_cast<double>(p.feature_dim);
  const double a2 = p.d_max * p.d_max * b / (p.lambda * p.s);
  return 0.25 * a1 * (a2 / (1.0 + a2 * t) - a2 / (1.0 + a2 + a2 * t));
}

namespace {

BoundParams worst_case(const std::vector<BoundParams>& per_layer) {
  if (per_layer.empty()) throw ConfigError("ensemble bound: no layers");
  BoundParams w = per_layer.front();
  for (const auto& p : per_layer) {
    w.y_max = std::max(w.y_max, p.y_max);
    w.d_max = std::max(w.d_max, p.d_max);
    w.lambda = std::min(w.lambda, p.lambda);
    w.batch_size = std::max(w.batch_size, p.batch_size);
    w.feature_dim = std::max(w.feature_dim, p.feature_dim);
    w.horizon = std::max(w.horizon, p.horizon);
  }
  return w;
}

}  // namespace

double ensemble_ridge_bound(const std::vector<BoundParams>& per_layer) {
  return static_cast<double>(per_layer.size()) * ridge_bound(worst_case(per_layer));
}

double ensemble_forward_bound(const std::vector<BoundParams>& per_layer) {
  return static_cast<double>(per_layer.size()) * forward_bound(worst_case(per_layer));
}

}  // namespace edrvfl::regret
