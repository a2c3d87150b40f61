#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

// vendored single header, vendor/ is on the include path
#include "json.hpp"

#include "edrvfl/errors.hpp"
#include "edrvfl/exec.hpp"

namespace edrvfl::features {

enum class Activation { sigmoid, relu, swish, tanh_fn };
enum class WeightInit { standard_normal, xavier, kaiming };

struct NetworkConfig {
  std::size_t n_nodes = 32;   // hidden nodes per layer (N)
  std::size_t n_layers = 4;   // stacked layers (L)
  Activation activation = Activation::sigmoid;
  WeightInit init = WeightInit::standard_normal;
  double weight_scale = 1.0;  // extra uniform multiplier on the drawn weights
  std::uint64_t seed = 0;
};

// Fixed (never trained) random weights. w[0] is k x N; deeper layers
// (N+k) x N, matching enhanced-plus-input stacking without bias terms.
struct RandomWeights {
  std::vector<Eigen::MatrixXd> w;
  NetworkConfig cfg;
  std::size_t input_dim = 0;

  std::size_t layer_feature_dim() const { return cfg.n_nodes + input_dim; }
  nlohmann::json to_json() const;
  static RandomWeights from_json(const nlohmann::json& j);
};

RandomWeights init_random_weights(std::size_t input_dim, const NetworkConfig& cfg);

// Per-layer design matrices. Layer 1: D1 = [g(X W1) | X]; layer l: the
// previous enhanced block concatenated with X feeds Wl, and Dl = [Hl | X].
// Layers are sequential by construction; rows are evaluated in parallel
// blocks under the openmp policy.
std::vector<Eigen::MatrixXd> extract_features(const Eigen::MatrixXd& x, const RandomWeights& w,
                                              ExecPolicy policy = ExecPolicy::serial);

Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& z, Activation a);

enum class EnsembleMode { regression_mean, regression_median, classification_softmax_mean };

// Combine per-layer readout outputs. classification_softmax_mean turns each
// layer's scores into row-stochastic probabilities before averaging.
Eigen::MatrixXd ensemble_predict(const std::vector<Eigen::MatrixXd>& per_layer, EnsembleMode mode);

// Row-wise argmax; ties resolve to the lowest index.
std::vector<int> classify(const Eigen::MatrixXd& scores);

std::string activation_name(Activation a);
std::string init_name(WeightInit w);
Activation activation_from_name(const std::string& s);
WeightInit init_from_name(const std::string& s);

}  // namespace edrvfl::features
