#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "hazardbench/dataset.hpp"

namespace hazardbench {

enum class TieMethod { Breslow, Efron };

const char* tie_method_name(TieMethod method);
TieMethod tie_method_from_name(const std::string& name);

// Multiplicative effect of a one-unit covariate increase on the hazard.
inline double hazard_ratio(double beta) { return std::exp(beta); }

struct CoxConfig {
  TieMethod tie_method = TieMethod::Breslow;
  int max_iterations = 100;
  double tolerance = 1e-9;        // absolute change in log partial likelihood
  double step_tolerance = 1e-8;   // max-norm of the Newton step
  int step_halving_limit = 10;
  double beta_bound = 50.0;       // |beta| beyond this signals monotone likelihood
};

// Fitted proportional-hazards model.  hazard_ratios[k] == exp(beta[k]);
// p-values are two-sided Wald; ci bounds are exp(beta +- 1.96 se).
struct CoxFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd standard_errors;
  Eigen::VectorXd hazard_ratios;
  Eigen::VectorXd p_values;
  Eigen::VectorXd ci_lower;
  Eigen::VectorXd ci_upper;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  TieMethod tie_method = TieMethod::Breslow;
  std::vector<std::string> variable_names;
  // log partial likelihood at each accepted iterate, starting at beta = 0
  std::vector<double> iteration_loglik;

  std::string to_json() const;
  static CoxFit from_json(const std::string& text);
};

// Step-function estimate of the cumulative baseline hazard at the distinct
// event times (Breslow estimator).
struct BaselineHazard {
  std::vector<double> event_times;        // strictly increasing
  std::vector<double> cumulative_hazard;  // non-negative, non-decreasing

  double cumulative_at(double t) const;   // 0 before the first event time

  std::string to_csv() const;  // header: time,cumulative_hazard
  static BaselineHazard from_csv(const std::string& text);
};

// Log partial likelihood at `beta`.  Risk sets R(t) contain every subject
// with time >= t; inner sums are log-sum-exp stabilized, so extreme linear
// predictors cannot overflow.
double log_partial_likelihood(const SurvivalDataset& data,
                              const Eigen::VectorXd& beta,
                              TieMethod tie_method = TieMethod::Breslow);

struct GradientHessian {
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;  // symmetric, negative semi-definite
};

// Exact analytic first and second derivatives of log_partial_likelihood.
GradientHessian gradient_and_hessian(const SurvivalDataset& data,
                                     const Eigen::VectorXd& beta,
                                     TieMethod tie_method = TieMethod::Breslow);

// Newton-Raphson from beta = 0 with step halving.  Rejects constant
// covariate columns; throws SingularHessian when the information matrix is
// not invertible; reports converged = false (never throws) when the
// iteration budget is exhausted or the likelihood is monotone.
CoxFit fit_cox(const SurvivalDataset& data, const CoxConfig& config = {});

// Breslow cumulative baseline hazard under the fitted coefficients.
BaselineHazard breslow_baseline(const SurvivalDataset& data, const CoxFit& fit);

// S(t | x) = exp(-H0(t) * exp(x . beta)), a step function between event times.
double predict_survival(const CoxFit& fit, const BaselineHazard& baseline,
                        Eigen::Ref<const Eigen::VectorXd> x, double t);

// Linear log-risk x . beta; the RiskModel contract for the Cox model.
double predict_risk(const CoxFit& fit, Eigen::Ref<const Eigen::VectorXd> x);

class CoxRiskModel : public RiskModel {
 public:
  explicit CoxRiskModel(const CoxFit& fit) : fit_(&fit) {}
  double log_risk(Eigen::Ref<const Eigen::VectorXd> x) const override {
    return predict_risk(*fit_, x);
  }

 private:
  const CoxFit* fit_;
};

}  // namespace hazardbench
