#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hazardbench/dataset.hpp"

namespace hazardbench {

enum class Activation { ReLU, Identity };

const char* activation_name(Activation activation);
Activation activation_from_name(const std::string& name);

struct DenseLayer {
  Eigen::MatrixXd weights;  // fan_out x fan_in
  Eigen::VectorXd biases;   // fan_out
  Activation activation = Activation::ReLU;
};

struct TrainConfig {
  int n_epochs = 10000;  // commonly 10000, 20000 or 25000
  double learning_rate = 1e-3;
  double l2_penalty = 1e-4;
  std::vector<Eigen::Index> hidden_sizes = {32, 32};
  std::uint64_t seed = 0;
  enum class Optimizer { GradientDescent, Momentum } optimizer = Optimizer::GradientDescent;
  double momentum = 0.9;
  int checkpoint_interval = 500;
};

// Feed-forward network mapping a covariate row to a scalar log-risk.  The
// final layer has one output and identity activation, so a single identity
// layer reduces to the linear Cox predictor.
struct RiskNetwork {
  Eigen::Index input_dim = 0;
  std::vector<DenseLayer> layers;
  std::uint64_t seed = 0;     // initialization seed, kept for provenance
  TrainConfig config;         // how the network was (or would be) trained

  std::string to_json() const;
  static RiskNetwork from_json(const std::string& text);
};

struct TrainTrace {
  struct Point {
    int epoch;
    double train_loss;
    double train_cindex;
    double val_cindex;
  };
  std::vector<Point> points;

  std::string to_csv() const;  // header: epoch,train_loss,train_cindex,val_cindex
};

// Seeded Glorot-uniform weights, zero biases.
RiskNetwork initialize_network(Eigen::Index input_dim,
                               const std::vector<Eigen::Index>& hidden_sizes,
                               std::uint64_t seed);

// Deterministic scalar log-risk for one covariate row (RiskModel contract).
double forward_risk(const RiskNetwork& net, Eigen::Ref<const Eigen::VectorXd> x);

// Batched forward pass, one risk per row of X.
Eigen::VectorXd forward_risk_batch(const RiskNetwork& net, const Eigen::MatrixXd& X);

struct LayerGradient {
  Eigen::MatrixXd weights;
  Eigen::VectorXd biases;
};

// Negative mean log partial likelihood with the network output in place of
// the linear predictor, plus (l2/2)*||W||^2 on the weights (biases are not
// penalized).  Gradients come from backpropagation through the full batch
// and are exact for the returned loss.
std::pair<double, std::vector<LayerGradient>> cox_nn_loss_and_gradient(
    const RiskNetwork& net, const SurvivalDataset& data, double l2_penalty);

// Loss only (same value as cox_nn_loss_and_gradient's first component).
double cox_nn_loss(const RiskNetwork& net, const SurvivalDataset& data,
                   double l2_penalty);

// Full-batch gradient descent for exactly n_epochs from the seeded
// initialization; no early stopping.  The trace records train loss and both
// concordance indices every checkpoint_interval epochs and at the final
// epoch.  Throws DivergedLoss when the loss stops being finite.
std::pair<RiskNetwork, TrainTrace> train(const SurvivalDataset& data_train,
                                         const SurvivalDataset& data_val,
                                         const TrainConfig& config);

class NetworkRiskModel : public RiskModel {
 public:
  explicit NetworkRiskModel(const RiskNetwork& net) : net_(&net) {}
  double log_risk(Eigen::Ref<const Eigen::VectorXd> x) const override {
    return forward_risk(*net_, x);
  }

 private:
  const RiskNetwork* net_;
};

}  // namespace hazardbench
