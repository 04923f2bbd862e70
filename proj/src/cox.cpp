#include "hazardbench/cox.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "hazardbench/error.hpp"
#include "hazardbench/stats.hpp"
#include "survival_order.hpp"
#include "text_io.hpp"

namespace hazardbench {

const char* tie_method_name(TieMethod method) {
  return method == TieMethod::Breslow ? "breslow" : "efron";
}

TieMethod tie_method_from_name(const std::string& name) {
  if (name == "breslow") return TieMethod::Breslow;
  if (name == "efron") return TieMethod::Efron;
  throw HazardError(ErrorCode::InvalidArgument,
                    "cox: unknown tie method '" + name + "' (breslow or efron)");
}

namespace {

using detail::TimeOrder;

// One sweep over the risk sets in decreasing time order.  Accumulators are
// kept relative to the running maximum of the linear predictor inside the
// current risk set, so every exp() argument is <= 0 and the sums cannot
// overflow for any beta.
struct LikelihoodPass {
  double loglik = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
  // log of the full risk-set denominator at each event time, ascending;
  // these are the Breslow baseline-hazard denominators
  std::vector<double> log_denominators;
  std::vector<double> event_block_times;
};

LikelihoodPass run_pass(const SurvivalDataset& data, const TimeOrder& order,
                        const Eigen::VectorXd& beta, TieMethod tie_method,
                        bool with_derivatives) {
  const Eigen::Index p = data.p();
  const Eigen::VectorXd eta = data.covariates * beta;

  LikelihoodPass pass;
  if (with_derivatives) {
    pass.gradient = Eigen::VectorXd::Zero(p);
    pass.hessian = Eigen::MatrixXd::Zero(p, p);
  }

  double shift = -std::numeric_limits<double>::infinity();
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

  Eigen::VectorXd e1(p), mean(p), diff1(p);
  Eigen::MatrixXd e2(p, p);

  for (auto block = order.blocks.rbegin(); block != order.blocks.rend(); ++block) {
    // subjects tied at this time enter the risk set before its events score
    for (Eigen::Index k = block->first; k < block->last; ++k) {
      const Eigen::Index row = order.index[static_cast<std::size_t>(k)];
      if (eta[row] > shift) {
        const double rescale = s0 > 0.0 ? std::exp(shift - eta[row]) : 0.0;
        s0 *= rescale;
        if (with_derivatives) {
          s1 *= rescale;
          s2 *= rescale;
        }
        shift = eta[row];
      }
      const double r = std::exp(eta[row] - shift);
      s0 += r;
      if (with_derivatives) {
        s1.noalias() += r * data.covariates.row(row).transpose();
        s2.noalias() += r * data.covariates.row(row).transpose() * data.covariates.row(row);
      }
    }
    if (block->n_events == 0) continue;

    const double d = static_cast<double>(block->n_events);
    double sum_eta = 0.0;
    double event_e0 = 0.0;
    if (with_derivatives && tie_method == TieMethod::Efron) {
      e1.setZero();
      e2.setZero();
    }
    Eigen::VectorXd sum_x = Eigen::VectorXd::Zero(p);
    for (Eigen::Index k = block->first; k < block->last; ++k) {
      const Eigen::Index row = order.index[static_cast<std::size_t>(k)];
      if (!data.events[static_cast<std::size_t>(row)]) continue;
      sum_eta += eta[row];
      const double r = std::exp(eta[row] - shift);
      event_e0 += r;
      if (with_derivatives) {
        sum_x.noalias() += data.covariates.row(row).transpose();
        if (tie_method == TieMethod::Efron) {
          e1.noalias() += r * data.covariates.row(row).transpose();
          e2.noalias() += r * data.covariates.row(row).transpose() * data.covariates.row(row);
        }
      }
    }

    pass.log_denominators.push_back(shift + std::log(s0));
    pass.event_block_times.push_back(block->time);

    pass.loglik += sum_eta;
    if (with_derivatives) pass.gradient += sum_x;

    if (tie_method == TieMethod::Breslow) {
      pass.loglik -= d * (std::log(s0) + shift);
      if (with_derivatives) {
        mean = s1 / s0;
        pass.gradient.noalias() -= d * mean;
        pass.hessian.noalias() -= d * (s2 / s0 - mean * mean.transpose());
      }
    } else {
      for (Eigen::Index l = 0; l < block->n_events; ++l) {
        const double c = static_cast<double>(l) / d;
        const double denom = s0 - c * event_e0;
        pass.loglik -= std::log(denom) + shift;
        if (with_derivatives) {
          mean = (s1 - c * e1) / denom;
          pass.gradient.noalias() -= mean;
          pass.hessian.noalias() -= (s2 - c * e2) / denom - mean * mean.transpose();
        }
      }
    }
  }

  // event times were visited in descending order
  std::reverse(pass.log_denominators.begin(), pass.log_denominators.end());
  std::reverse(pass.event_block_times.begin(), pass.event_block_times.end());

  if (!std::isfinite(pass.loglik)) {
    throw HazardError(ErrorCode::NonFiniteResult,
                      "cox: log partial likelihood is not finite");
  }
  return pass;
}

void check_beta_dimension(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
  if (beta.size() != data.p()) {
    throw HazardError(ErrorCode::DimensionMismatch,
                      "cox: beta has length " + std::to_string(beta.size()) +
                          " but the dataset has " + std::to_string(data.p()) +
                          " covariates");
  }
}

void check_fittable(const SurvivalDataset& data) {
  if (data.p() < 1) {
    throw HazardError(ErrorCode::InvalidArgument, "cox: dataset has no covariates");
  }
  if (data.n_events() < 1) {
    throw HazardError(ErrorCode::NoEvents, "cox: no events to fit");
  }
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    const double lo = data.covariates.col(j).minCoeff();
    const double hi = data.covariates.col(j).maxCoeff();
    if (lo == hi) {
      throw HazardError(ErrorCode::ConstantColumn,
                        "cox: covariate '" +
                            data.variable_names[static_cast<std::size_t>(j)] +
                            "' is constant");
    }
  }
}

// Newton direction from -H d = g; the information matrix must be positive
// definite for the step to exist.
Eigen::VectorXd newton_direction(const Eigen::MatrixXd& hessian,
                                 const Eigen::VectorXd& gradient, int iteration) {
  const Eigen::MatrixXd info = -hessian;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  const auto& d = ldlt.vectorD();
  const double d_max = d.maxCoeff();
  const double d_min = d.minCoeff();
  if (ldlt.info() != Eigen::Success || !(d_max > 0.0) ||
      d_min <= 1e-12 * std::max(1.0, d_max)) {
    throw HazardError(ErrorCode::SingularHessian,
                      "cox: singular Hessian at iteration " + std::to_string(iteration) +
                          "; covariates may be collinear or separate the events "
                          "(consider removing the offending variables)");
  }
  return ldlt.solve(gradient);
}

}  // namespace

double log_partial_likelihood(const SurvivalDataset& data, const Eigen::VectorXd& beta,
                              TieMethod tie_method) {
  check_beta_dimension(data, beta);
  const TimeOrder order = detail::make_time_order(data);
  return run_pass(data, order, beta, tie_method, false).loglik;
}

GradientHessian gradient_and_hessian(const SurvivalDataset& data,
                                     const Eigen::VectorXd& beta, TieMethod tie_method) {
  check_beta_dimension(data, beta);
  const TimeOrder order = detail::make_time_order(data);
  LikelihoodPass pass = run_pass(data, order, beta, tie_method, true);
  // the accumulation fills both triangles identically up to rounding;
  // symmetrize so H == H^T holds exactly
  Eigen::MatrixXd h = 0.5 * (pass.hessian + pass.hessian.transpose());
  return GradientHessian{std::move(pass.gradient), std::move(h)};
}

CoxFit fit_cox(const SurvivalDataset& data, const CoxConfig& config) {
  check_fittable(data);
  const TimeOrder order = detail::make_time_order(data);
  const Eigen::Index p = data.p();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  LikelihoodPass current = run_pass(data, order, beta, config.tie_method, true);

  CoxFit fit;
  fit.tie_method = config.tie_method;
  fit.variable_names = data.variable_names;
  fit.iteration_loglik.push_back(current.loglik);
  fit.converged = false;

  for (int iteration = 1; iteration <= config.max_iterations; ++iteration) {
    fit.iterations = iteration;
    Eigen::VectorXd step =
        newton_direction(current.hessian, current.gradient, iteration);

    // halve until the log partial likelihood does not decrease
    bool accepted = false;
    double new_loglik = 0.0;
    double best_candidate = -std::numeric_limits<double>::infinity();
    for (int halving = 0; halving <= config.step_halving_limit; ++halving) {
      const Eigen::VectorXd candidate = beta + step;
      new_loglik =
          run_pass(data, order, candidate, config.tie_method, false).loglik;
      best_candidate = std::max(best_candidate, new_loglik);
      if (new_loglik >= current.loglik) {
        beta = candidate;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // no ascent left beyond evaluation noise means we are at the optimum;
      // a real remaining decrease means the iteration is stuck
      fit.converged =
          best_candidate >= current.loglik - 1e-10 * (1.0 + std::abs(current.loglik));
      break;
    }

    const double delta_loglik = std::abs(new_loglik - current.loglik);
    const double step_norm = step.cwiseAbs().maxCoeff();
    current = run_pass(data, order, beta, config.tie_method, true);
    fit.iteration_loglik.push_back(current.loglik);

    if (beta.cwiseAbs().maxCoeff() > config.beta_bound) {
      // monotone likelihood: coefficients are drifting to infinity
      break;
    }
    // A vanishing likelihood change only counts as convergence when the
    // Newton step has also stopped moving; near a monotone-likelihood
    // asymptote the change underflows while the step keeps marching.
    if ((delta_loglik < config.tolerance && step_norm < 0.1) ||
        step_norm < config.step_tolerance) {
      fit.converged = true;
      break;
    }
  }

  fit.beta = beta;
  fit.log_likelihood = current.loglik;

  const Eigen::MatrixXd info =
      -0.5 * (current.hessian + current.hessian.transpose());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  const auto& d = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || !(d.maxCoeff() > 0.0) ||
      d.minCoeff() <= 1e-12 * std::max(1.0, d.maxCoeff())) {
    throw HazardError(ErrorCode::SingularHessian,
                      "cox: singular Hessian at the final iterate (iteration " +
                          std::to_string(fit.iterations) +
                          "); covariates may be collinear or separate the events "
                          "(consider removing the offending variables)");
  }
  const Eigen::MatrixXd covariance =
      ldlt.solve(Eigen::MatrixXd::Identity(p, p));

  fit.standard_errors = covariance.diagonal().cwiseSqrt();
  fit.hazard_ratios.resize(p);
  fit.p_values.resize(p);
  fit.ci_lower.resize(p);
  fit.ci_upper.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const double se = fit.standard_errors[k];
    fit.hazard_ratios[k] = hazard_ratio(beta[k]);
    fit.p_values[k] = wald_p_value(beta[k] / se);
    fit.ci_lower[k] = std::exp(beta[k] - kZ975 * se);
    fit.ci_upper[k] = std::exp(beta[k] + kZ975 * se);
  }
  return fit;
}

BaselineHazard breslow_baseline(const SurvivalDataset& data, const CoxFit& fit) {
  check_beta_dimension(data, fit.beta);
  const TimeOrder order = detail::make_time_order(data);
  // Breslow denominators come from the same stabilized sweep; tie method
  // does not change the full risk-set sums
  LikelihoodPass pass = run_pass(data, order, fit.beta, TieMethod::Breslow, false);

  BaselineHazard baseline;
  baseline.event_times = pass.event_block_times;
  baseline.cumulative_hazard.reserve(pass.log_denominators.size());
  double cumulative = 0.0;
  std::size_t block_index = 0;
  for (const auto& block : order.blocks) {
    if (block.n_events == 0) continue;
    cumulative += static_cast<double>(block.n_events) *
                  std::exp(-pass.log_denominators[block_index]);
    baseline.cumulative_hazard.push_back(cumulative);
    ++block_index;
  }
  return baseline;
}

double BaselineHazard::cumulative_at(double t) const {
  const auto it = std::upper_bound(event_times.begin(), event_times.end(), t);
  if (it == event_times.begin()) return 0.0;
  return cumulative_hazard[static_cast<std::size_t>(it - event_times.begin()) - 1];
}

double predict_survival(const CoxFit& fit, const BaselineHazard& baseline,
                        Eigen::Ref<const Eigen::VectorXd> x, double t) {
  if (t < 0.0) {
    throw HazardError(ErrorCode::InvalidArgument, "cox: negative prediction time");
  }
  return std::exp(-baseline.cumulative_at(t) * std::exp(predict_risk(fit, x)));
}

double predict_risk(const CoxFit& fit, Eigen::Ref<const Eigen::VectorXd> x) {
  if (x.size() != fit.beta.size()) {
    throw HazardError(ErrorCode::DimensionMismatch,
                      "cox: covariate row has length " + std::to_string(x.size()) +
                          " but the fit has " + std::to_string(fit.beta.size()) +
                          " coefficients");
  }
  return fit.beta.dot(x);
}

std::string CoxFit::to_json() const {
  nlohmann::json j;
  j["variables"] = nlohmann::json::array();
  for (Eigen::Index k = 0; k < beta.size(); ++k) {
    nlohmann::json row;
    row["name"] = variable_names[static_cast<std::size_t>(k)];
    row["beta"] = beta[k];
    row["se"] = standard_errors[k];
    row["hr"] = hazard_ratios[k];
    row["p"] = p_values[k];
    row["ci_lower"] = ci_lower[k];
    row["ci_upper"] = ci_upper[k];
    j["variables"].push_back(row);
  }
  j["log_likelihood"] = log_likelihood;
  j["tie_method"] = tie_method_name(tie_method);
  j["converged"] = converged;
  j["iterations"] = iterations;
  return j.dump(2) + "\n";
}

CoxFit CoxFit::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  CoxFit fit;
  const auto& variables = j.at("variables");
  const Eigen::Index p = static_cast<Eigen::Index>(variables.size());
  fit.beta.resize(p);
  fit.standard_errors.resize(p);
  fit.hazard_ratios.resize(p);
  fit.p_values.resize(p);
  fit.ci_lower.resize(p);
  fit.ci_upper.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const auto& row = variables[static_cast<std::size_t>(k)];
    fit.variable_names.push_back(row.at("name").get<std::string>());
    fit.beta[k] = row.at("beta").get<double>();
    fit.standard_errors[k] = row.at("se").get<double>();
    fit.hazard_ratios[k] = row.at("hr").get<double>();
    fit.p_values[k] = row.at("p").get<double>();
    fit.ci_lower[k] = row.at("ci_lower").get<double>();
    fit.ci_upper[k] = row.at("ci_upper").get<double>();
  }
  fit.log_likelihood = j.at("log_likelihood").get<double>();
  fit.tie_method = tie_method_from_name(j.at("tie_method").get<std::string>());
  fit.converged = j.at("converged").get<bool>();
  fit.iterations = j.at("iterations").get<int>();
  return fit;
}

std::string BaselineHazard::to_csv() const {
  std::string out = "time,cumulative_hazard\n";
  for (std::size_t i = 0; i < event_times.size(); ++i) {
    out += detail::format_double(event_times[i]);
    out += ',';
    out += detail::format_double(cumulative_hazard[i]);
    out += '\n';
  }
  return out;
}

BaselineHazard BaselineHazard::from_csv(const std::string& text) {
  BaselineHazard baseline;
  std::size_t pos = text.find('\n');
  if (pos == std::string::npos) {
    throw HazardError(ErrorCode::UnparsableNumber, "cox: empty baseline hazard file");
  }
  ++pos;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    const auto t = detail::parse_double(detail::trim(line.substr(0, comma)));
    const auto h = detail::parse_double(detail::trim(line.substr(comma + 1)));
    if (comma == std::string_view::npos || !t || !h) {
      throw HazardError(ErrorCode::UnparsableNumber,
                        "cox: unparsable baseline hazard line");
    }
    baseline.event_times.push_back(*t);
    baseline.cumulative_hazard.push_back(*h);
  }
  return baseline;
}

}  // namespace hazardbench
