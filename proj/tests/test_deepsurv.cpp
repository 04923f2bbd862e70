#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "hazardbench/cox.hpp"
#include "hazardbench/deepsurv.hpp"
#include "hazardbench/error.hpp"
#include "hazardbench/metrics.hpp"
#include "hazardbench/pipeline.hpp"
#include "oracles.hpp"

using namespace hazardbench;

namespace {

// straight-line re-evaluation with plain loops, independent of Eigen
double naive_forward(const RiskNetwork& net, const Eigen::VectorXd& x) {
  std::vector<double> a(x.data(), x.data() + x.size());
  for (const auto& layer : net.layers) {
    std::vector<double> z(static_cast<std::size_t>(layer.weights.rows()), 0.0);
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      double sum = layer.biases[r];
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        sum += layer.weights(r, c) * a[static_cast<std::size_t>(c)];
      }
      z[static_cast<std::size_t>(r)] =
          layer.activation == Activation::ReLU ? std::max(0.0, sum) : sum;
    }
    a = std::move(z);
  }
  return a[0];
}

RiskNetwork identity_net(const Eigen::VectorXd& beta) {
  RiskNetwork net;
  net.input_dim = beta.size();
  DenseLayer layer;
  layer.weights = beta.transpose();
  layer.biases = Eigen::VectorXd::Zero(1);
  layer.activation = Activation::Identity;
  net.layers.push_back(std::move(layer));
  return net;
}

SyntheticCohort make_cohort(Eigen::Index n, std::uint64_t seed, bool quadratic) {
  GeneratorSpec spec;
  spec.n = n;
  spec.p = 4;
  if (quadratic) {
    spec.risk_form = QuadraticRisk{Eigen::VectorXd::Constant(4, 0.5)};
  } else {
    Eigen::VectorXd beta(4);
    beta << 0.8, -0.6, 0.4, -0.3;
    spec.risk_form = LinearRisk{beta};
  }
  spec.baseline = ExponentialBaseline{0.05};
  spec.censoring_horizon = 30.0;
  spec.seed = seed;
  return generate_synthetic(spec);
}

}  // namespace

TEST_CASE("zero parameters give zero risk") {
  RiskNetwork net = initialize_network(3, {4}, 1);
  for (auto& layer : net.layers) {
    layer.weights.setZero();
    layer.biases.setZero();
  }
  Xoshiro256pp rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd x(3);
    for (int k = 0; k < 3; ++k) x[k] = rng.normal();
    CHECK(forward_risk(net, x) == 0.0);
  }
}

TEST_CASE("a single identity layer is the linear predictor") {
  Eigen::VectorXd beta(3);
  beta << 0.5, -1.0, 2.0;
  const RiskNetwork net = identity_net(beta);
  Eigen::VectorXd x(3);
  x << 1.0, 2.0, 3.0;
  CHECK(forward_risk(net, x) == doctest::Approx(x.dot(beta)).epsilon(1e-15));
}

TEST_CASE("forward pass matches the straight-line oracle") {
  const RiskNetwork net = initialize_network(5, {7, 3}, 11);
  Xoshiro256pp rng(13);
  Eigen::MatrixXd batch(20, 5);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(5);
    for (int k = 0; k < 5; ++k) x[k] = rng.normal();
    batch.row(trial) = x.transpose();
    CHECK(forward_risk(net, x) == doctest::Approx(naive_forward(net, x)).epsilon(1e-12));
  }
  const Eigen::VectorXd risks = forward_risk_batch(net, batch);
  for (int trial = 0; trial < 20; ++trial) {
    CHECK(risks[trial] ==
          doctest::Approx(naive_forward(net, batch.row(trial).transpose()))
              .epsilon(1e-12));
  }
}

TEST_CASE("identity network reduces the loss to the Cox objective") {
  const auto data = oracles::random_dataset(30, 3, 17);  // continuous: no ties
  Eigen::VectorXd beta(3);
  beta << 0.4, -0.7, 0.2;
  const RiskNetwork net = identity_net(beta);
  const double d = static_cast<double>(data.n_events());
  const double loss = cox_nn_loss(net, data, 0.0);
  const double reference = -log_partial_likelihood(data, beta) / d;
  CHECK(loss == doctest::Approx(reference).epsilon(1e-12));
}

TEST_CASE("zero weights contribute no penalty") {
  RiskNetwork net = initialize_network(3, {4}, 19);
  for (auto& layer : net.layers) layer.weights.setZero();
  const auto data = oracles::random_dataset(20, 3, 23);
  CHECK(cox_nn_loss(net, data, 0.5) == cox_nn_loss(net, data, 0.0));
}

TEST_CASE("backpropagation matches finite differences") {
  const auto data = oracles::random_dataset(10, 3, 29);
  for (const double l2 : {0.0, 0.01}) {
    RiskNetwork net = initialize_network(3, {2}, 31);
    const auto [loss, gradients] = cox_nn_loss_and_gradient(net, data, l2);
    CHECK(std::isfinite(loss));

    double max_relative_error = 0.0;
    const double step = 1e-5;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      for (Eigen::Index r = 0; r < net.layers[l].weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < net.layers[l].weights.cols(); ++c) {
          RiskNetwork hi = net, lo = net;
          hi.layers[l].weights(r, c) += step;
          lo.layers[l].weights(r, c) -= step;
          const double fd =
              (cox_nn_loss(hi, data, l2) - cox_nn_loss(lo, data, l2)) / (2.0 * step);
          const double analytic = gradients[l].weights(r, c);
          const double rel = std::abs(analytic - fd) /
                             std::max(std::abs(analytic) + std::abs(fd), 1e-8);
          max_relative_error = std::max(max_relative_error, rel);
        }
        RiskNetwork hi = net, lo = net;
        hi.layers[l].biases[r] += step;
        lo.layers[l].biases[r] -= step;
        const double fd =
            (cox_nn_loss(hi, data, l2) - cox_nn_loss(lo, data, l2)) / (2.0 * step);
        const double analytic = gradients[l].biases[r];
        const double rel = std::abs(analytic - fd) /
                           std::max(std::abs(analytic) + std::abs(fd), 1e-8);
        max_relative_error = std::max(max_relative_error, rel);
      }
    }
    CHECK(max_relative_error < 1e-4);
  }
}

TEST_CASE("loss gradient sums to zero over subjects") {
  // the Cox score balances observed and expected events; the bias gradient
  // of an identity output layer is exactly that sum
  const auto data = oracles::random_dataset(25, 2, 37);
  const RiskNetwork net = initialize_network(2, {}, 41);
  const auto [loss, gradients] = cox_nn_loss_and_gradient(net, data, 0.0);
  CHECK(std::abs(gradients.back().biases[0]) < 1e-12);
}

TEST_CASE("subject order does not change the loss or the training result") {
  const auto cohort = make_cohort(120, 43, false);
  const auto& data = cohort.data;

  std::vector<Eigen::Index> permutation(static_cast<std::size_t>(data.n()));
  std::iota(permutation.begin(), permutation.end(), Eigen::Index{0});
  Xoshiro256pp rng(47);
  rng.shuffle(permutation);
  const SurvivalDataset shuffled = select_rows(data, permutation);

  const RiskNetwork net = initialize_network(4, {5}, 53);
  CHECK(std::abs(cox_nn_loss(net, data, 1e-3) - cox_nn_loss(net, shuffled, 1e-3)) <
        1e-9);

  TrainConfig config;
  config.n_epochs = 200;
  config.learning_rate = 1e-3;
  config.hidden_sizes = {5};
  config.seed = 53;
  const auto val = make_cohort(40, 59, false);
  const auto [net_a, trace_a] = train(data, val.data, config);
  const auto [net_b, trace_b] = train(shuffled, val.data, config);
  REQUIRE(net_a.layers.size() == net_b.layers.size());
  for (std::size_t l = 0; l < net_a.layers.size(); ++l) {
    CHECK(net_a.layers[l].weights == net_b.layers[l].weights);
    CHECK(net_a.layers[l].biases == net_b.layers[l].biases);
  }
  REQUIRE(trace_a.points.size() == trace_b.points.size());
  for (std::size_t k = 0; k < trace_a.points.size(); ++k) {
    CHECK(trace_a.points[k].train_loss == trace_b.points[k].train_loss);
    CHECK(trace_a.points[k].train_cindex == trace_b.points[k].train_cindex);
  }
}

TEST_CASE("small learning rates descend monotonically") {
  const auto cohort = make_cohort(60, 61, false);
  const auto val = make_cohort(30, 67, false);
  TrainConfig config;
  config.n_epochs = 100;
  config.learning_rate = 1e-4;
  config.l2_penalty = 0.0;
  config.hidden_sizes = {4};
  config.seed = 71;
  config.checkpoint_interval = 1;
  const auto [net, trace] = train(cohort.data, val.data, config);
  REQUIRE(trace.points.size() == 100);
  for (std::size_t k = 1; k < trace.points.size(); ++k) {
    CHECK(trace.points[k].train_loss <= trace.points[k - 1].train_loss + 1e-12);
  }
}

TEST_CASE("doubling the output layer preserves the risk ranking exactly") {
  const RiskNetwork net = initialize_network(3, {6}, 73);
  RiskNetwork doubled = net;
  doubled.layers.back().weights *= 2.0;
  doubled.layers.back().biases *= 2.0;

  const auto data = oracles::random_dataset(50, 3, 79);
  const Eigen::VectorXd risks = forward_risk_batch(net, data.covariates);
  const Eigen::VectorXd doubled_risks = forward_risk_batch(doubled, data.covariates);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    CHECK(doubled_risks[i] == 2.0 * risks[i]);
  }
  const auto base = concordance_index(data.times, data.events, risks);
  const auto scaled = concordance_index(data.times, data.events, doubled_risks);
  CHECK(base.c_index == scaled.c_index);
  CHECK(base.concordant == scaled.concordant);
}

TEST_CASE("training twice with one seed is bit-identical") {
  const auto cohort = make_cohort(100, 83, false);
  const auto val = make_cohort(40, 89, false);
  TrainConfig config;
  config.n_epochs = 300;
  config.learning_rate = 1e-3;
  config.hidden_sizes = {6};
  config.seed = 97;
  const auto [net_a, trace_a] = train(cohort.data, val.data, config);
  const auto [net_b, trace_b] = train(cohort.data, val.data, config);
  REQUIRE(trace_a.points.size() == trace_b.points.size());
  for (std::size_t k = 0; k < trace_a.points.size(); ++k) {
    CHECK(trace_a.points[k].epoch == trace_b.points[k].epoch);
    CHECK(trace_a.points[k].train_loss == trace_b.points[k].train_loss);
    CHECK(trace_a.points[k].train_cindex == trace_b.points[k].train_cindex);
    CHECK(trace_a.points[k].val_cindex == trace_b.points[k].val_cindex);
  }
  for (std::size_t l = 0; l < net_a.layers.size(); ++l) {
    CHECK(net_a.layers[l].weights == net_b.layers[l].weights);
  }
  CHECK(trace_a.to_csv() == trace_b.to_csv());
}

TEST_CASE("a runaway learning rate raises DivergedLoss with the epoch") {
  const auto cohort = make_cohort(50, 101, false);
  const auto val = make_cohort(25, 103, false);
  TrainConfig config;
  config.n_epochs = 5000;
  config.learning_rate = 1e8;
  config.hidden_sizes = {8};
  config.seed = 107;
  try {
    train(cohort.data, val.data, config);
    FAIL("expected DivergedLoss");
  } catch (const HazardError& e) {
    CHECK(e.code() == ErrorCode::DivergedLoss);
    CHECK(e.numerical());
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("linear cohorts: the network matches the Cox fit") {
  const auto cohort = make_cohort(2000, 109, false);
  const auto [train_data, val_data] = split(cohort.data, 0.75, 109);

  const CoxFit cox = fit_cox(train_data);
  const Eigen::VectorXd cox_val = val_data.covariates * cox.beta;
  const double cox_c =
      concordance_index(val_data.times, val_data.events, cox_val).c_index;

  const StandardizeResult train_std = standardize(train_data);
  const StandardizeResult val_std = standardize(val_data, train_std.stats);
  TrainConfig config;
  config.n_epochs = 10000;
  config.learning_rate = 1e-2;
  config.l2_penalty = 1e-4;
  config.hidden_sizes = {8};
  config.seed = 109;
  const auto [net, trace] = train(train_std.data, val_std.data, config);
  const double net_c = trace.points.back().val_cindex;

  CHECK(std::abs(net_c - cox_c) < 0.05);
}

TEST_CASE("quadratic cohorts: the network beats the linear model") {
  const auto cohort = make_cohort(2000, 3, true);
  const auto [train_data, val_data] = split(cohort.data, 0.75, 3);

  const CoxFit cox = fit_cox(train_data);
  const Eigen::VectorXd cox_val = val_data.covariates * cox.beta;
  const double cox_c =
      concordance_index(val_data.times, val_data.events, cox_val).c_index;

  const StandardizeResult train_std = standardize(train_data);
  const StandardizeResult val_std = standardize(val_data, train_std.stats);
  TrainConfig config;
  config.n_epochs = 10000;
  config.learning_rate = 1e-2;
  config.l2_penalty = 1e-4;
  config.hidden_sizes = {8};
  config.seed = 3;
  const auto [net, trace] = train(train_std.data, val_std.data, config);
  const double net_c = trace.points.back().val_cindex;

  CHECK(net_c >= cox_c + 0.05);
}

TEST_CASE("initialization is bounded, seeded and correctly shaped") {
  const RiskNetwork net = initialize_network(7, {5, 3}, 113);
  REQUIRE(net.layers.size() == 3);
  CHECK(net.layers[0].weights.rows() == 5);
  CHECK(net.layers[0].weights.cols() == 7);
  CHECK(net.layers[1].weights.rows() == 3);
  CHECK(net.layers[2].weights.rows() == 1);
  CHECK(net.layers[0].activation == Activation::ReLU);
  CHECK(net.layers[2].activation == Activation::Identity);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const double fan_in = static_cast<double>(net.layers[l].weights.cols());
    const double fan_out = static_cast<double>(net.layers[l].weights.rows());
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    CHECK(net.layers[l].weights.cwiseAbs().maxCoeff() <= bound);
    CHECK(net.layers[l].biases.cwiseAbs().maxCoeff() == 0.0);
  }
  const RiskNetwork again = initialize_network(7, {5, 3}, 113);
  CHECK(net.layers[0].weights == again.layers[0].weights);
}

TEST_CASE("input validation") {
  const RiskNetwork net = initialize_network(3, {2}, 127);
  CHECK_THROWS_AS(forward_risk(net, Eigen::VectorXd::Zero(4)), HazardError);

  auto censored = oracles::random_dataset(10, 3, 131);
  std::fill(censored.events.begin(), censored.events.end(), 0);
  CHECK_THROWS_AS(cox_nn_loss(net, censored, 0.0), HazardError);

  TrainConfig config;
  config.n_epochs = 0;
  const auto cohort = make_cohort(30, 137, false);
  CHECK_THROWS_AS(train(cohort.data, cohort.data, config), HazardError);
}

TEST_CASE("network json round trip with the documented keys") {
  const RiskNetwork net = initialize_network(4, {3}, 139);
  const std::string json = net.to_json();
  for (const char* field : {"\"input_dim\"", "\"layers\"", "\"rows\"", "\"cols\"",
                            "\"weights\"", "\"biases\"", "\"activation\"", "\"seed\"",
                            "\"config\""}) {
    CHECK(json.find(field) != std::string::npos);
  }
  const RiskNetwork restored = RiskNetwork::from_json(json);
  CHECK(restored.input_dim == net.input_dim);
  REQUIRE(restored.layers.size() == net.layers.size());
  Eigen::VectorXd x(4);
  x << 0.3, -0.8, 1.1, 0.0;
  CHECK(forward_risk(restored, x) == forward_risk(net, x));
}

TEST_CASE("trace csv format") {
  TrainTrace trace;
  trace.points.push_back({500, 1.25, 0.61, 0.58});
  trace.points.push_back({1000, 1.10, 0.66, 0.59});
  const std::string csv = trace.to_csv();
  CHECK(csv.rfind("epoch,train_loss,train_cindex,val_cindex\n", 0) == 0);
  CHECK(csv.find("500,1.25,0.61,0.58\n") != std::string::npos);
}
