#include "hazardbench/deepsurv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "hazardbench/error.hpp"
#include "hazardbench/metrics.hpp"
#include "hazardbench/rng.hpp"
#include "survival_order.hpp"
#include "text_io.hpp"

namespace hazardbench {

const char* activation_name(Activation activation) {
  return activation == Activation::ReLU ? "relu" : "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "identity") return Activation::Identity;
  throw HazardError(ErrorCode::InvalidArgument,
                    "deepsurv: unknown activation '" + name + "'");
}

namespace {

void check_network(const RiskNetwork& net) {
  if (net.layers.empty()) {
    throw HazardError(ErrorCode::InvalidArgument, "deepsurv: network has no layers");
  }
  Eigen::Index dim = net.input_dim;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    if (layer.weights.cols() != dim || layer.weights.rows() != layer.biases.size()) {
      throw HazardError(ErrorCode::DimensionMismatch,
                        "deepsurv: layer " + std::to_string(l) +
                            " dimensions do not chain");
    }
    dim = layer.weights.rows();
  }
  if (dim != 1 || net.layers.back().activation != Activation::Identity) {
    throw HazardError(ErrorCode::InvalidArgument,
                      "deepsurv: final layer must map to one output with identity "
                      "activation");
  }
}

Eigen::MatrixXd apply_activation(Eigen::MatrixXd z, Activation activation) {
  if (activation == Activation::ReLU) z = z.cwiseMax(0.0);
  return z;
}

// Negative mean log partial likelihood of a risk vector, with its gradient.
// All exponentials run relative to the running risk-set maximum, and the
// cumulative hazard sum is carried in units of the newest denominator, so
// each factor stays in [0, 1].
struct EtaLoss {
  double value = 0.0;
  Eigen::VectorXd d_eta;
};

EtaLoss eta_loss(const detail::TimeOrder& order,
                 const std::vector<std::uint8_t>& events, const Eigen::VectorXd& eta,
                 bool with_gradient) {
  const double d_total = static_cast<double>(order.total_events);
  if (order.total_events == 0) {
    throw HazardError(ErrorCode::NoEvents, "deepsurv: no events in the batch");
  }

  // decreasing time: accumulate risk-set denominators
  std::vector<double> log_denom(order.blocks.size(), 0.0);
  double shift = -std::numeric_limits<double>::infinity();
  double s0 = 0.0;
  double sum_terms = 0.0;
  for (std::size_t b = order.blocks.size(); b-- > 0;) {
    const auto& block = order.blocks[b];
    for (Eigen::Index k = block.first; k < block.last; ++k) {
      const Eigen::Index row = order.index[static_cast<std::size_t>(k)];
      if (eta[row] > shift) {
        const double rescale = s0 > 0.0 ? std::exp(shift - eta[row]) : 0.0;
        s0 *= rescale;
        shift = eta[row];
      }
      s0 += std::exp(eta[row] - shift);
      if (events[static_cast<std::size_t>(row)]) sum_terms += eta[row];
    }
    if (block.n_events > 0) {
      log_denom[b] = shift + std::log(s0);
      sum_terms -= static_cast<double>(block.n_events) * log_denom[b];
    }
  }

  EtaLoss result;
  result.value = -sum_terms / d_total;
  if (!with_gradient) return result;

  // increasing time: cumulative hazard rescaled to the newest denominator
  result.d_eta.resize(eta.size());
  double cumulative = 0.0;
  double log_denom_current = 0.0;
  bool seen_event_block = false;
  for (std::size_t b = 0; b < order.blocks.size(); ++b) {
    const auto& block = order.blocks[b];
    if (block.n_events > 0) {
      cumulative = seen_event_block
                       ? cumulative * std::exp(log_denom[b] - log_denom_current)
                       : 0.0;
      cumulative += static_cast<double>(block.n_events);
      log_denom_current = log_denom[b];
      seen_event_block = true;
    }
    for (Eigen::Index k = block.first; k < block.last; ++k) {
      const Eigen::Index row = order.index[static_cast<std::size_t>(k)];
      const double expected =
          seen_event_block ? std::exp(eta[row] - log_denom_current) * cumulative : 0.0;
      const double observed = events[static_cast<std::size_t>(row)] ? 1.0 : 0.0;
      result.d_eta[row] = -(observed - expected) / d_total;
    }
  }
  return result;
}

double weight_penalty(const RiskNetwork& net, double l2_penalty) {
  if (l2_penalty == 0.0) return 0.0;
  double sum = 0.0;
  for (const auto& layer : net.layers) sum += layer.weights.squaredNorm();
  return 0.5 * l2_penalty * sum;
}

}  // namespace

RiskNetwork initialize_network(Eigen::Index input_dim,
                               const std::vector<Eigen::Index>& hidden_sizes,
                               std::uint64_t seed) {
  if (input_dim < 1) {
    throw HazardError(ErrorCode::InvalidArgument, "deepsurv: input_dim must be >= 1");
  }
  Xoshiro256pp rng(seed);
  RiskNetwork net;
  net.input_dim = input_dim;
  net.seed = seed;

  std::vector<Eigen::Index> dims;
  dims.push_back(input_dim);
  for (Eigen::Index h : hidden_sizes) {
    if (h < 1) {
      throw HazardError(ErrorCode::InvalidArgument,
                        "deepsurv: hidden layer sizes must be >= 1");
    }
    dims.push_back(h);
  }
  dims.push_back(1);

  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    const Eigen::Index fan_in = dims[l];
    const Eigen::Index fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    layer.weights.resize(fan_out, fan_in);
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) {
        layer.weights(r, c) = rng.uniform_range(-bound, bound);
      }
    }
    layer.biases = Eigen::VectorXd::Zero(fan_out);
    layer.activation =
        (l + 2 == dims.size()) ? Activation::Identity : Activation::ReLU;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

double forward_risk(const RiskNetwork& net, Eigen::Ref<const Eigen::VectorXd> x) {
  check_network(net);
  if (x.size() != net.input_dim) {
    throw HazardError(ErrorCode::DimensionMismatch,
                      "deepsurv: input has length " + std::to_string(x.size()) +
                          ", network expects " + std::to_string(net.input_dim));
  }
  Eigen::VectorXd a = x;
  for (const auto& layer : net.layers) {
    Eigen::VectorXd z = layer.weights * a + layer.biases;
    if (layer.activation == Activation::ReLU) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a[0];
}

Eigen::VectorXd forward_risk_batch(const RiskNetwork& net, const Eigen::MatrixXd& X) {
  check_network(net);
  if (X.cols() != net.input_dim) {
    throw HazardError(ErrorCode::DimensionMismatch,
                      "deepsurv: batch has " + std::to_string(X.cols()) +
                          " columns, network expects " + std::to_string(net.input_dim));
  }
  Eigen::MatrixXd a = X;
  for (const auto& layer : net.layers) {
    Eigen::MatrixXd z =
        (a * layer.weights.transpose()).rowwise() + layer.biases.transpose();
    a = apply_activation(std::move(z), layer.activation);
  }
  return a.col(0);
}

std::pair<double, std::vector<LayerGradient>> cox_nn_loss_and_gradient(
    const RiskNetwork& net, const SurvivalDataset& data, double l2_penalty) {
  check_network(net);
  if (data.p() != net.input_dim) {
    throw HazardError(ErrorCode::DimensionMismatch,
                      "deepsurv: data has " + std::to_string(data.p()) +
                          " covariates, network expects " +
                          std::to_string(net.input_dim));
  }
  const detail::TimeOrder order = detail::make_time_order(data);

  // forward pass, keeping each layer's input and pre-activation
  const std::size_t n_layers = net.layers.size();
  std::vector<Eigen::MatrixXd> inputs(n_layers);
  std::vector<Eigen::MatrixXd> pre_activations(n_layers);
  Eigen::MatrixXd a = data.covariates;
  for (std::size_t l = 0; l < n_layers; ++l) {
    inputs[l] = a;
    pre_activations[l] =
        (a * net.layers[l].weights.transpose()).rowwise() +
        net.layers[l].biases.transpose();
    a = apply_activation(pre_activations[l], net.layers[l].activation);
  }
  const Eigen::VectorXd eta = a.col(0);

  EtaLoss loss = eta_loss(order, data.events, eta, true);
  const double total_loss = loss.value + weight_penalty(net, l2_penalty);

  // backward pass
  std::vector<LayerGradient> gradients(n_layers);
  Eigen::MatrixXd delta = loss.d_eta;  // n x 1, identity output activation
  for (std::size_t l = n_layers; l-- > 0;) {
    if (net.layers[l].activation == Activation::ReLU) {
      delta.array() *= (pre_activations[l].array() > 0.0).cast<double>();
    }
    gradients[l].weights.noalias() = delta.transpose() * inputs[l];
    if (l2_penalty != 0.0) gradients[l].weights += l2_penalty * net.layers[l].weights;
    gradients[l].biases = delta.colwise().sum().transpose();
    if (l > 0) delta = delta * net.layers[l].weights;
  }
  return {total_loss, std::move(gradients)};
}

double cox_nn_loss(const RiskNetwork& net, const SurvivalDataset& data,
                   double l2_penalty) {
  check_network(net);
  if (data.p() != net.input_dim) {
    throw HazardError(ErrorCode::DimensionMismatch,
                      "deepsurv: data has " + std::to_string(data.p()) +
                          " covariates, network expects " +
                          std::to_string(net.input_dim));
  }
  const detail::TimeOrder order = detail::make_time_order(data);
  const Eigen::VectorXd eta = forward_risk_batch(net, data.covariates);
  return eta_loss(order, data.events, eta, false).value +
         weight_penalty(net, l2_penalty);
}

std::pair<RiskNetwork, TrainTrace> train(const SurvivalDataset& data_train,
                                         const SurvivalDataset& data_val,
                                         const TrainConfig& config) {
  if (data_train.variable_names != data_val.variable_names) {
    throw HazardError(ErrorCode::DimensionMismatch,
                      "deepsurv: training and validation schemas differ");
  }
  if (config.n_epochs < 1 || !(config.learning_rate > 0.0) ||
      config.l2_penalty < 0.0 || config.checkpoint_interval < 1) {
    throw HazardError(ErrorCode::InvalidArgument, "deepsurv: invalid train config");
  }

  // Reorder the training rows canonically once, so accumulation order (and
  // therefore the whole trajectory) is independent of input row order.
  const detail::TimeOrder input_order = detail::make_time_order(data_train);
  const SurvivalDataset ordered = select_rows(data_train, input_order.index);
  const detail::TimeOrder order = detail::make_time_order(ordered);

  RiskNetwork net =
      initialize_network(data_train.p(), config.hidden_sizes, config.seed);
  net.config = config;

  std::vector<LayerGradient> velocity;
  if (config.optimizer == TrainConfig::Optimizer::Momentum) {
    for (const auto& layer : net.layers) {
      velocity.push_back({Eigen::MatrixXd::Zero(layer.weights.rows(),
                                                layer.weights.cols()),
                          Eigen::VectorXd::Zero(layer.biases.size())});
    }
  }

  TrainTrace trace;
  const std::size_t n_layers = net.layers.size();
  std::vector<Eigen::MatrixXd> inputs(n_layers), pre_activations(n_layers);

  for (int epoch = 1; epoch <= config.n_epochs; ++epoch) {
    // forward
    Eigen::MatrixXd a = ordered.covariates;
    for (std::size_t l = 0; l < n_layers; ++l) {
      inputs[l] = a;
      pre_activations[l] = (a * net.layers[l].weights.transpose()).rowwise() +
                           net.layers[l].biases.transpose();
      a = apply_activation(pre_activations[l], net.layers[l].activation);
    }
    const Eigen::VectorXd eta = a.col(0);

    EtaLoss loss = eta_loss(order, ordered.events, eta, true);
    const double total_loss = loss.value + weight_penalty(net, config.l2_penalty);
    if (!std::isfinite(total_loss)) {
      throw HazardError(ErrorCode::DivergedLoss,
                        "deepsurv: loss diverged at epoch " + std::to_string(epoch) +
                            "; consider a lower learning rate");
    }

    // backward + update
    Eigen::MatrixXd delta = loss.d_eta;
    for (std::size_t l = n_layers; l-- > 0;) {
      if (net.layers[l].activation == Activation::ReLU) {
        delta.array() *= (pre_activations[l].array() > 0.0).cast<double>();
      }
      Eigen::MatrixXd grad_w = delta.transpose() * inputs[l];
      if (config.l2_penalty != 0.0) grad_w += config.l2_penalty * net.layers[l].weights;
      Eigen::VectorXd grad_b = delta.colwise().sum().transpose();
      if (l > 0) delta = delta * net.layers[l].weights;

      if (config.optimizer == TrainConfig::Optimizer::Momentum) {
        velocity[l].weights = config.momentum * velocity[l].weights -
                              config.learning_rate * grad_w;
        velocity[l].biases = config.momentum * velocity[l].biases -
                             config.learning_rate * grad_b;
        net.layers[l].weights += velocity[l].weights;
        net.layers[l].biases += velocity[l].biases;
      } else {
        net.layers[l].weights -= config.learning_rate * grad_w;
        net.layers[l].biases -= config.learning_rate * grad_b;
      }
    }

    if (epoch % config.checkpoint_interval == 0 || epoch == config.n_epochs) {
      const Eigen::VectorXd eta_train = forward_risk_batch(net, ordered.covariates);
      const Eigen::VectorXd eta_val = forward_risk_batch(net, data_val.covariates);
      TrainTrace::Point point;
      point.epoch = epoch;
      point.train_loss = eta_loss(order, ordered.events, eta_train, false).value +
                         weight_penalty(net, config.l2_penalty);
      point.train_cindex =
          concordance_index(ordered.times, ordered.events, eta_train).c_index;
      point.val_cindex =
          concordance_index(data_val.times, data_val.events, eta_val).c_index;
      trace.points.push_back(point);
    }
  }
  return {std::move(net), std::move(trace)};
}

std::string TrainTrace::to_csv() const {
  std::string out = "epoch,train_loss,train_cindex,val_cindex\n";
  for (const auto& point : points) {
    out += std::to_string(point.epoch);
    out += ',';
    out += detail::format_double(point.train_loss);
    out += ',';
    out += detail::format_double(point.train_cindex);
    out += ',';
    out += detail::format_double(point.val_cindex);
    out += '\n';
  }
  return out;
}

namespace {

nlohmann::json config_to_json(const TrainConfig& config) {
  nlohmann::json j;
  j["n_epochs"] = config.n_epochs;
  j["learning_rate"] = config.learning_rate;
  j["l2_penalty"] = config.l2_penalty;
  j["hidden_sizes"] = config.hidden_sizes;
  j["seed"] = config.seed;
  j["optimizer"] =
      config.optimizer == TrainConfig::Optimizer::Momentum ? "momentum" : "gd";
  j["momentum"] = config.momentum;
  j["checkpoint_interval"] = config.checkpoint_interval;
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig config;
  config.n_epochs = j.at("n_epochs").get<int>();
  config.learning_rate = j.at("learning_rate").get<double>();
  config.l2_penalty = j.at("l2_penalty").get<double>();
  config.hidden_sizes = j.at("hidden_sizes").get<std::vector<Eigen::Index>>();
  config.seed = j.at("seed").get<std::uint64_t>();
  config.optimizer = j.at("optimizer").get<std::string>() == "momentum"
                         ? TrainConfig::Optimizer::Momentum
                         : TrainConfig::Optimizer::GradientDescent;
  config.momentum = j.at("momentum").get<double>();
  config.checkpoint_interval = j.at("checkpoint_interval").get<int>();
  return config;
}

}  // namespace

std::string RiskNetwork::to_json() const {
  nlohmann::json j;
  j["input_dim"] = input_dim;
  j["layers"] = nlohmann::json::array();
  for (const auto& layer : layers) {
    nlohmann::json l;
    l["rows"] = layer.weights.rows();
    l["cols"] = layer.weights.cols();
    std::vector<double> weights;
    weights.reserve(static_cast<std::size_t>(layer.weights.size()));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        weights.push_back(layer.weights(r, c));
      }
    }
    l["weights"] = weights;
    l["biases"] = std::vector<double>(layer.biases.data(),
                                      layer.biases.data() + layer.biases.size());
    l["activation"] = activation_name(layer.activation);
    j["layers"].push_back(l);
  }
  j["seed"] = seed;
  j["config"] = config_to_json(config);
  return j.dump(2) + "\n";
}

RiskNetwork RiskNetwork::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  RiskNetwork net;
  net.input_dim = j.at("input_dim").get<Eigen::Index>();
  for (const auto& l : j.at("layers")) {
    DenseLayer layer;
    const Eigen::Index rows = l.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = l.at("cols").get<Eigen::Index>();
    const auto weights = l.at("weights").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(weights.size()) != rows * cols) {
      throw HazardError(ErrorCode::DimensionMismatch,
                        "deepsurv: layer weight count does not match rows*cols");
    }
    layer.weights.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        layer.weights(r, c) = weights[static_cast<std::size_t>(r * cols + c)];
      }
    }
    const auto biases = l.at("biases").get<std::vector<double>>();
    layer.biases = Eigen::Map<const Eigen::VectorXd>(
        biases.data(), static_cast<Eigen::Index>(biases.size()));
    layer.activation = activation_from_name(l.at("activation").get<std::string>());
    net.layers.push_back(std::move(layer));
  }
  net.seed = j.at("seed").get<std::uint64_t>();
  net.config = config_from_json(j.at("config"));
  check_network(net);
  return net;
}

}  // namespace hazardbench
