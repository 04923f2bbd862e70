#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hazardbench/cox.hpp"
#include "hazardbench/error.hpp"
#include "hazardbench/rng.hpp"
#include "hazardbench/stats.hpp"
#include "oracles.hpp"

using namespace hazardbench;

namespace {

// rows (t, e, x): (1,T,1), (2,T,0), (3,F,1), (4,T,0)
SurvivalDataset four_row_dataset() {
  return oracles::make_dataset({1, 2, 3, 4}, {1, 1, 0, 1}, {{1}, {0}, {1}, {0}});
}

// closed form for the dataset above: b - log(2 e^b + 2) - log(e^b + 2) - log(1)
double four_row_loglik(double b) {
  return b - std::log(2.0 * std::exp(b) + 2.0) - std::log(std::exp(b) + 2.0);
}

Eigen::VectorXd scalar(double b) {
  Eigen::VectorXd beta(1);
  beta << b;
  return beta;
}

}  // namespace

TEST_CASE("zero beta collapses to risk-set sizes") {
  const auto data = oracles::random_dataset(30, 2, 5);
  double expected = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (!data.events[static_cast<std::size_t>(i)]) continue;
    Eigen::Index risk_set = 0;
    for (Eigen::Index j = 0; j < data.n(); ++j) {
      if (data.times[j] >= data.times[i]) ++risk_set;
    }
    expected -= std::log(static_cast<double>(risk_set));
  }
  const double actual =
      log_partial_likelihood(data, Eigen::VectorXd::Zero(2), TieMethod::Breslow);
  CHECK(actual == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("four-row dataset matches the hand-expanded formula") {
  const auto data = four_row_dataset();
  for (double b : {0.5, -1.0, 0.0, 2.3}) {
    const double fitted = log_partial_likelihood(data, scalar(b));
    CHECK(fitted == doctest::Approx(four_row_loglik(b)).epsilon(1e-12));
    CHECK(fitted ==
          doctest::Approx(oracles::naive_log_partial_likelihood(data, scalar(b)))
              .epsilon(1e-12));
  }
}

TEST_CASE("extreme beta stays finite") {
  const auto data = four_row_dataset();
  for (double b : {500.0, 1000.0, -1000.0}) {
    CHECK(std::isfinite(log_partial_likelihood(data, scalar(b))));
  }
}

TEST_CASE("dimension mismatch is rejected") {
  const auto data = four_row_dataset();
  CHECK_THROWS_AS(log_partial_likelihood(data, Eigen::VectorXd::Zero(2)), HazardError);
  CHECK_THROWS_AS(gradient_and_hessian(data, Eigen::VectorXd::Zero(3)), HazardError);
}

TEST_CASE("gradient matches finite differences on the four-row dataset") {
  const auto data = four_row_dataset();
  const auto [gradient, hessian] = gradient_and_hessian(data, scalar(0.0));
  const Eigen::VectorXd fd = oracles::finite_difference_gradient(
      [&](const Eigen::VectorXd& b) { return log_partial_likelihood(data, b); },
      scalar(0.0), 1e-5);
  CHECK(std::abs(gradient[0] - fd[0]) < 1e-6);
  CHECK(hessian(0, 0) < 0.0);
}

TEST_CASE("constant covariate columns contribute zero gradient") {
  auto data = oracles::make_dataset({1, 2, 3, 4}, {1, 1, 0, 1},
                                    {{1, 5}, {0, 5}, {1, 5}, {0, 5}});
  for (double b1 : {0.0, 0.7, -1.2}) {
    for (double b2 : {0.0, 0.3}) {
      Eigen::VectorXd beta(2);
      beta << b1, b2;
      const auto result = gradient_and_hessian(data, beta);
      CHECK(std::abs(result.gradient[1]) < 1e-12);
    }
  }
}

TEST_CASE("hessian is exactly symmetric") {
  const auto data = oracles::random_dataset(25, 3, 9);
  Xoshiro256pp rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd beta(3);
    for (int k = 0; k < 3; ++k) beta[k] = rng.normal();
    const auto result = gradient_and_hessian(data, beta);
    CHECK((result.hessian - result.hessian.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("derivatives match finite differences on random datasets") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    // continuous times for breslow, gridded times so efron sees real ties
    for (const bool force_ties : {false, true}) {
      const auto data = oracles::random_dataset(20, 3, seed, 0.3, force_ties);
      const TieMethod method = force_ties ? TieMethod::Efron : TieMethod::Breslow;
      Xoshiro256pp rng(seed + 100);
      Eigen::VectorXd beta(3);
      for (int k = 0; k < 3; ++k) beta[k] = 0.5 * rng.normal();

      const auto result = gradient_and_hessian(data, beta, method);
      const Eigen::VectorXd fd_gradient = oracles::finite_difference_gradient(
          [&](const Eigen::VectorXd& b) {
            return log_partial_likelihood(data, b, method);
          },
          beta, 1e-5);
      CHECK((result.gradient - fd_gradient).cwiseAbs().maxCoeff() < 1e-6);

      // second derivatives: difference the (already validated) gradient
      Eigen::MatrixXd fd_hessian(3, 3);
      const double step = 1e-5;
      for (Eigen::Index k = 0; k < 3; ++k) {
        Eigen::VectorXd hi = beta, lo = beta;
        hi[k] += step;
        lo[k] -= step;
        fd_hessian.col(k) = (gradient_and_hessian(data, hi, method).gradient -
                             gradient_and_hessian(data, lo, method).gradient) /
                            (2.0 * step);
      }
      CHECK((result.hessian - fd_hessian).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("likelihood is invariant under covariate location shifts") {
  const auto data = oracles::random_dataset(40, 3, 21);
  Eigen::VectorXd beta(3);
  beta << 0.4, -0.2, 0.9;
  const double base = log_partial_likelihood(data, beta);
  auto shifted = data;
  shifted.covariates.col(1).array() += 37.5;
  CHECK(std::abs(log_partial_likelihood(shifted, beta) - base) < 1e-9);
}

TEST_CASE("column rescaling rescales the coefficient") {
  const auto data = oracles::random_dataset(120, 2, 31, 0.2);
  const CoxFit base = fit_cox(data);
  REQUIRE(base.converged);

  auto scaled = data;
  const double c = 4.0;
  scaled.covariates.col(0) *= c;
  const CoxFit rescaled = fit_cox(scaled);
  CHECK(std::abs(rescaled.beta[0] - base.beta[0] / c) < 1e-6);
  CHECK(std::abs(rescaled.beta[1] - base.beta[1]) < 1e-6);
  CHECK(std::abs(rescaled.log_likelihood - base.log_likelihood) < 1e-8);
}

TEST_CASE("breslow and efron coincide without ties") {
  const auto data = oracles::random_dataset(60, 2, 41);
  CoxConfig breslow, efron;
  efron.tie_method = TieMethod::Efron;
  const CoxFit fit_b = fit_cox(data, breslow);
  const CoxFit fit_e = fit_cox(data, efron);
  CHECK((fit_b.beta - fit_e.beta).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("efron matches its direct-summation oracle") {
  const auto data = oracles::random_dataset(25, 2, 47, 0.3, true);
  Eigen::VectorXd beta(2);
  beta << 0.3, -0.6;
  const double fitted = log_partial_likelihood(data, beta, TieMethod::Efron);
  const double direct = oracles::naive_log_partial_likelihood_efron(data, beta);
  CHECK(fitted == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("fit matches the grid-plus-bisection oracle on the golden dataset") {
  const auto data = four_row_dataset();
  const double oracle_argmax =
      oracles::grid_plus_bisection_argmax(four_row_loglik, -10.0, 10.0, 1e-9);
  const CoxFit fit = fit_cox(data);
  CHECK(fit.converged);
  CHECK(std::abs(fit.beta[0] - oracle_argmax) < 1e-5);
  // analytic optimum of the same expression is log(sqrt(2))
  CHECK(fit.beta[0] == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("accepted iterates never decrease the log partial likelihood") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const auto data = oracles::random_dataset(50, 3, seed);
    const CoxFit fit = fit_cox(data);
    for (std::size_t k = 1; k < fit.iteration_loglik.size(); ++k) {
      CHECK(fit.iteration_loglik[k] >= fit.iteration_loglik[k - 1]);
    }
    CHECK(fit.log_likelihood == fit.iteration_loglik.back());
  }
}

TEST_CASE("independent covariate is insignificant in most replications") {
  int passed = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Xoshiro256pp rng(seed * 977 + 13);
    const Eigen::Index n = 500;
    SurvivalDataset data;
    data.times.resize(n);
    data.events.resize(static_cast<std::size_t>(n));
    data.covariates.resize(n, 1);
    data.variable_names = {"noise"};
    for (Eigen::Index i = 0; i < n; ++i) {
      data.covariates(i, 0) = rng.normal();
      const double t = -std::log(rng.uniform_pos()) / 0.05;
      data.times[i] = std::min(t, 30.0);
      data.events[static_cast<std::size_t>(i)] = t <= 30.0 ? 1 : 0;
    }
    const CoxFit fit = fit_cox(data);
    if (fit.p_values[0] > 0.05) ++passed;
  }
  CHECK(passed >= 90);
}

TEST_CASE("hazard ratio arithmetic") {
  CHECK(std::abs(hazard_ratio(0.3554) - 1.4268) < 1e-4);
  CHECK(std::abs(hazard_ratio(-0.0480) - 0.9531) < 1e-4);

  const auto data = oracles::random_dataset(80, 2, 53);
  const CoxFit fit = fit_cox(data);
  for (Eigen::Index k = 0; k < fit.beta.size(); ++k) {
    CHECK(fit.hazard_ratios[k] == hazard_ratio(fit.beta[k]));
    CHECK(fit.p_values[k] >= 0.0);
    CHECK(fit.p_values[k] <= 1.0);
    if (fit.standard_errors[k] > 0.0) {
      CHECK(fit.ci_lower[k] < fit.hazard_ratios[k]);
      CHECK(fit.hazard_ratios[k] < fit.ci_upper[k]);
    }
  }
}

TEST_CASE("wald p-value is exactly 1 at beta = 0") {
  CHECK(wald_p_value(0.0) == 1.0);
  CHECK(norm_cdf(0.0) == 0.5);
  // symmetric tails
  CHECK(wald_p_value(1.96) == doctest::Approx(0.05).epsilon(5e-3));
}

TEST_CASE("constant column is rejected by name") {
  const auto data = oracles::make_dataset({1, 2, 3}, {1, 1, 0},
                                          {{1, 7}, {2, 7}, {3, 7}}, {"age", "fixed"});
  try {
    fit_cox(data);
    FAIL("expected ConstantColumn");
  } catch (const HazardError& e) {
    CHECK(e.code() == ErrorCode::ConstantColumn);
    CHECK(std::string(e.what()).find("fixed") != std::string::npos);
  }
}

TEST_CASE("collinear covariates raise SingularHessian") {
  auto data = oracles::random_dataset(40, 1, 61);
  SurvivalDataset doubled = data;
  doubled.covariates.conservativeResize(Eigen::NoChange, 2);
  doubled.covariates.col(1) = doubled.covariates.col(0);
  doubled.variable_names = {"a", "a_copy"};
  try {
    fit_cox(doubled);
    FAIL("expected SingularHessian");
  } catch (const HazardError& e) {
    CHECK(e.code() == ErrorCode::SingularHessian);
    CHECK(e.numerical());
  }
}

TEST_CASE("perfect separation is reported, not guessed") {
  // covariate rank matches event order exactly: monotone likelihood
  const auto data = oracles::make_dataset(
      {1, 2, 3, 4, 5, 6}, {1, 1, 1, 1, 1, 1},
      {{6}, {5}, {4}, {3}, {2}, {1}});
  try {
    const CoxFit fit = fit_cox(data);
    CHECK_FALSE(fit.converged);
  } catch (const HazardError& e) {
    CHECK(e.code() == ErrorCode::SingularHessian);
  }
}

TEST_CASE("baseline hazard: single event with everyone at risk") {
  const auto data =
      oracles::make_dataset({2, 3, 4, 5}, {1, 0, 0, 0}, {{0.3}, {-1}, {2}, {0}});
  CoxFit fit;
  fit.beta = scalar(0.0);
  fit.variable_names = {"x1"};
  const BaselineHazard baseline = breslow_baseline(data, fit);
  REQUIRE(baseline.event_times.size() == 1);
  CHECK(baseline.event_times[0] == 2.0);
  CHECK(baseline.cumulative_hazard[0] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("baseline hazard matches hand summation on the golden dataset") {
  const auto data = four_row_dataset();
  const CoxFit fit = fit_cox(data);
  const BaselineHazard baseline = breslow_baseline(data, fit);
  const double r = std::exp(fit.beta[0]);

  REQUIRE(baseline.event_times.size() == 3);
  const double h1 = 1.0 / (2.0 * r + 2.0);
  const double h2 = h1 + 1.0 / (r + 2.0);
  const double h3 = h2 + 1.0 / 1.0;
  CHECK(baseline.cumulative_hazard[0] == doctest::Approx(h1).epsilon(1e-12));
  CHECK(baseline.cumulative_hazard[1] == doctest::Approx(h2).epsilon(1e-12));
  CHECK(baseline.cumulative_hazard[2] == doctest::Approx(h3).epsilon(1e-12));
}

TEST_CASE("cumulative hazard is non-decreasing") {
  const auto data = oracles::random_dataset(80, 2, 71, 0.4, true);
  const CoxFit fit = fit_cox(data);
  const BaselineHazard baseline = breslow_baseline(data, fit);
  for (std::size_t k = 1; k < baseline.cumulative_hazard.size(); ++k) {
    CHECK(baseline.cumulative_hazard[k] >= baseline.cumulative_hazard[k - 1]);
    CHECK(baseline.event_times[k] > baseline.event_times[k - 1]);
  }
  CHECK(baseline.cumulative_hazard.front() >= 0.0);
}

TEST_CASE("survival prediction") {
  const auto data = four_row_dataset();
  const CoxFit fit = fit_cox(data);
  const BaselineHazard baseline = breslow_baseline(data, fit);

  // before the first event time the curve is exactly 1
  CHECK(predict_survival(fit, baseline, scalar(0.0), 0.0) == 1.0);
  CHECK(predict_survival(fit, baseline, scalar(1.0), 0.5) == 1.0);

  // zero linear predictor reduces to exp(-H0)
  const double t = 2.5;
  CHECK(predict_survival(fit, baseline, scalar(0.0), t) ==
        doctest::Approx(std::exp(-baseline.cumulative_at(t))).epsilon(1e-14));

  CHECK_THROWS_AS(predict_survival(fit, baseline, scalar(1.0), -1.0), HazardError);
}

TEST_CASE("survival curves are monotone in time") {
  const auto data = oracles::random_dataset(60, 2, 83);
  const CoxFit fit = fit_cox(data);
  const BaselineHazard baseline = breslow_baseline(data, fit);
  Xoshiro256pp rng(97);
  const double t_max = data.times.maxCoeff() * 1.2;
  for (int pair = 0; pair < 1000; ++pair) {
    Eigen::VectorXd x(2);
    x << rng.normal(), rng.normal();
    double t1 = rng.uniform() * t_max;
    double t2 = rng.uniform() * t_max;
    if (t1 > t2) std::swap(t1, t2);
    CHECK(predict_survival(fit, baseline, x, t1) >=
          predict_survival(fit, baseline, x, t2));
  }
}

TEST_CASE("linear risk scoring") {
  const auto data = oracles::random_dataset(50, 3, 91);
  const CoxFit fit = fit_cox(data);

  CHECK(predict_risk(fit, Eigen::VectorXd::Zero(3)) == 0.0);

  Eigen::VectorXd unit = Eigen::VectorXd::Zero(3);
  unit[1] = 1.0;
  CHECK(predict_risk(fit, unit) == fit.beta[1]);

  Xoshiro256pp rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd x1(3), x2(3);
    for (int k = 0; k < 3; ++k) {
      x1[k] = rng.normal();
      x2[k] = rng.normal();
    }
    const double difference = (x1 - x2).dot(fit.beta);
    if (difference > 0.0) {
      CHECK(predict_risk(fit, x1) > predict_risk(fit, x2));
    } else if (difference < 0.0) {
      CHECK(predict_risk(fit, x1) < predict_risk(fit, x2));
    }
  }

  CHECK_THROWS_AS(predict_risk(fit, Eigen::VectorXd::Zero(2)), HazardError);
}

TEST_CASE("cox fit serializes with the documented field names") {
  const auto data = oracles::random_dataset(40, 2, 101);
  const CoxFit fit = fit_cox(data);
  const std::string json = fit.to_json();
  for (const char* field :
       {"\"variables\"", "\"name\"", "\"beta\"", "\"se\"", "\"hr\"", "\"p\"",
        "\"ci_lower\"", "\"ci_upper\"", "\"log_likelihood\"", "\"tie_method\"",
        "\"converged\"", "\"iterations\""}) {
    CHECK(json.find(field) != std::string::npos);
  }
  const CoxFit restored = CoxFit::from_json(json);
  CHECK(restored.beta.isApprox(fit.beta));
  CHECK(restored.variable_names == fit.variable_names);
  CHECK(restored.converged == fit.converged);
  CHECK(restored.iterations == fit.iterations);
  CHECK(restored.tie_method == fit.tie_method);
}
