#include "edrvfl/features.hpp"

#include <algorithm>
#include <cmath>

#include "edrvfl/rng.hpp"

namespace edrvfl::features {

namespace {

double sigmoid(double v) {
  // split form avoids overflow in exp for large |v|
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double init_sd(WeightInit init, std::size_t fan_in, std::size_t fan_out) {
  switch (init) {
    case WeightInit::xavier:
      return std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    case WeightInit::kaiming:
      return std::sqrt(2.0 / static_cast<double>(fan_in));
    default:
      return 1.0;
  }
}

}  // namespace

RandomWeights init_random_weights(std::size_t input_dim, const NetworkConfig& cfg) {
  if (input_dim == 0) throw ConfigError("init_random_weights: input_dim must be positive");
  if (cfg.n_nodes == 0 || cfg.n_layers == 0) {
    throw ConfigError("init_random_weights: n_nodes and n_layers must be positive");
  }
  RandomWeights out;
  out.cfg = cfg;
  out.input_dim = input_dim;
  auto rng = make_engine(cfg.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::size_t fan_in = l == 0 ? input_dim : input_dim + cfg.n_nodes;
    const double sd = cfg.weight_scale * init_sd(cfg.init, fan_in, cfg.n_nodes);
    Eigen::MatrixXd w(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(cfg.n_nodes));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = sd * unit(rng);
    }
    out.w.push_back(std::move(w));
  }
  return out;
}

Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::sigmoid:
      return z.unaryExpr([](double v) { return sigmoid(v); });
    case Activation::relu:
      return z.unaryExpr([](double v) { return v > 0.0 ? v : 0.0; });
    case Activation::swish:
      return z.unaryExpr([](double v) { return v * sigmoid(v); });
    case Activation::tanh_fn:
      return z.unaryExpr([](double v) { return std::tanh(v); });
  }
  throw ConfigError("apply_activation: unknown activation");
}

namespace {

// Row-block product + activation so the openmp policy can split rows without
// changing any result bit (each output row is produced by exactly one thread).
Eigen::MatrixXd activated_product(const Eigen::MatrixXd& in, const Eigen::MatrixXd& w,
                                  Activation act, ExecPolicy policy) {
  Eigen::MatrixXd out(in.rows(), w.cols());
  const std::size_t n_blocks = 8;
  const auto rows = static_cast<std::size_t>(in.rows());
  // The row partition is fixed by the input size alone, never by the policy:
  // each block's product is one independent GEMM, so the serial and openmp
  // paths run identical arithmetic and differ only in scheduling.
  if (rows >= 2 * n_blocks) {
    const std::size_t block = (rows + n_blocks - 1) / n_blocks;
    parallel_for((rows + block - 1) / block, policy, [&](std::size_t b) {
      const auto begin = static_cast<Eigen::Index>(b * block);
      const auto len = static_cast<Eigen::Index>(std::min(block, rows - b * block));
      out.middleRows(begin, len) = apply_activation(in.middleRows(begin, len) * w, act);
    });
  } else {
    out = apply_activation(in * w, act);
  }
  return out;
}

}  // namespace

std::vector<Eigen::MatrixXd> extract_features(const Eigen::MatrixXd& x, const RandomWeights& w,
                                              ExecPolicy policy) {
  if (static_cast<std::size_t>(x.cols()) != w.input_dim) {
    throw ConfigError("extract_features: input width does not match weights");
  }
  std::vector<Eigen::MatrixXd> layers;
  layers.reserve(w.w.size());
  Eigen::MatrixXd h;  // enhanced block of the previous layer
  for (std::size_t l = 0; l < w.w.size(); ++l) {
    if (l == 0) {
      h = activated_product(x, w.w[l], w.cfg.activation, policy);
    } else {
      Eigen::MatrixXd in(x.rows(), h.cols() + x.cols());
      in << h, x;
      h = activated_product(in, w.w[l], w.cfg.activation, policy);
    }
    Eigen::MatrixXd d(x.rows(), h.cols() + x.cols());
    d << h, x;
    layers.push_back(std::move(d));
  }
  return layers;
}

Eigen::MatrixXd ensemble_predict(const std::vector<Eigen::MatrixXd>& per_layer, EnsembleMode mode) {
  if (per_layer.empty()) throw ConfigError("ensemble_predict: no layer predictions");
  const auto rows = per_layer.front().rows();
  const auto cols = per_layer.front().cols();
  for (const auto& p : per_layer) {
    if (p.rows() != rows || p.cols() != cols) {
      throw ConfigError("ensemble_predict: layer prediction shapes differ");
    }
  }
  const double n = static_cast<double>(per_layer.size());

  if (mode == EnsembleMode::regression_mean) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(rows, cols);
    for (const auto& p : per_layer) acc += p;
    return acc / n;
  }
  if (mode == EnsembleMode::regression_median) {
    Eigen::MatrixXd out(rows, cols);
    std::vector<double> v(per_layer.size());
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        for (std::size_t l = 0; l < per_layer.size(); ++l) v[l] = per_layer[l](r, c);
        std::sort(v.begin(), v.end());
        const std::size_t mid = v.size() / 2;
        out(r, c) = v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
      }
    }
    return out;
  }

  // classification_softmax_mean: stabilized row softmax per layer, then mean
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(rows, cols);
  for (const auto& p : per_layer) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double mx = p.row(r).maxCoeff();
      Eigen::RowVectorXd e = (p.row(r).array() - mx).exp();
      acc.row(r) += e / e.sum();
    }
  }
  return acc / n;
}

std::vector<int> classify(const Eigen::MatrixXd& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    int best = 0;
    double best_v = scores(r, 0);
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(r, c) > best_v) {  // strict: ties keep the lowest index
        best_v = scores(r, c);
        best = static_cast<int>(c);
      }
    }
    out[static_cast<std::size_t>(r)] = best;
  }
  return out;
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::relu: return "relu";
    case Activation::swish: return "swish";
    case Activation::tanh_fn: return "tanh";
  }
  return "sigmoid";
}

std::string init_name(WeightInit w) {
  switch (w) {
    case WeightInit::standard_normal: return "standard_normal";
    case WeightInit::xavier: return "xavier";
    case WeightInit::kaiming: return "kaiming";
  }
  return "standard_normal";
}

Activation activation_from_name(const std::string& s) {
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "relu") return Activation::relu;
  if (s == "swish") return Activation::swish;
  if (s == "tanh") return Activation::tanh_fn;
  throw ConfigError("unknown activation '" + s + "'");
}

WeightInit init_from_name(const std::string& s) {
  if (s == "standard_normal") return WeightInit::standard_normal;
  if (s == "xavier") return WeightInit::xavier;
  if (s == "kaiming") return WeightInit::kaiming;
  throw ConfigError("unknown weight init '" + s + "'");
}

namespace {

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
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j.at(r).at(c).get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json RandomWeights::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["layout"] = "row-major";  // matrices stored as arrays of rows, 8-byte floats
  j["seed"] = cfg.seed;
  j["input_dim"] = input_dim;
  j["n_nodes"] = cfg.n_nodes;
  j["n_layers"] = cfg.n_layers;
  j["activation"] = activation_name(cfg.activation);
  j["init"] = init_name(cfg.init);
  j["weight_scale"] = cfg.weight_scale;
  j["w"] = nlohmann::json::array();
  for (const auto& m : w) j["w"].push_back(matrix_to_json(m));
  return j;
}

RandomWeights RandomWeights::from_json(const nlohmann::json& j) {
  RandomWeights out;
  out.cfg.seed = j.at("seed").get<std::uint64_t>();
  out.input_dim = j.at("input_dim").get<std::size_t>();
  out.cfg.n_nodes = j.at("n_nodes").get<std::size_t>();
  out.cfg.n_layers = j.at("n_layers").get<std::size_t>();
  out.cfg.activation = activation_from_name(j.at("activation").get<std::string>());
  out.cfg.init = init_from_name(j.at("init").get<std::string>());
  out.cfg.weight_scale = j.at("weight_scale").get<double>();
  for (const auto& m : j.at("w")) out.w.push_back(matrix_from_json(m));
  return out;
}

}  // namespace edrvfl::features
