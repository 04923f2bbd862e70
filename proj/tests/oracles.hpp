// Independent reference implementations used to freeze expected values.
// Everything here is written as plainly as possible (direct summation, no
// stabilization, no shared code with the library's computation paths).
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "hazardbench/dataset.hpp"
#include "hazardbench/rng.hpp"

namespace oracles {

inline hazardbench::SurvivalDataset make_dataset(
    const std::vector<double>& times, const std::vector<int>& events,
    const std::vector<std::vector<double>>& rows,
    std::vector<std::string> names = {}) {
  hazardbench::SurvivalDataset data;
  const auto n = static_cast<Eigen::Index>(times.size());
  const auto p = static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size());
  data.times.resize(n);
  data.events.resize(times.size());
  data.covariates.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.times[i] = times[static_cast<std::size_t>(i)];
    data.events[static_cast<std::size_t>(i)] =
        events[static_cast<std::size_t>(i)] ? 1 : 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      data.covariates(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  if (names.empty()) {
    for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  }
  data.variable_names = std::move(names);
  return data;
}

// Direct-summation log partial likelihood (Breslow ties): for every event
// subject i, accumulate eta_i - log(sum over {j : t_j >= t_i} of exp(eta_j)),
// with tied events at the same time each contributing the same denominator.
inline double naive_log_partial_likelihood(const hazardbench::SurvivalDataset& data,
                                           const Eigen::VectorXd& beta) {
  const Eigen::Index n = data.n();
  double loglik = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!data.events[static_cast<std::size_t>(i)]) continue;
    const double eta_i = data.covariates.row(i).dot(beta);
    double denom = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (data.times[j] >= data.times[i]) {
        denom += std::exp(data.covariates.row(j).dot(beta));
      }
    }
    loglik += eta_i - std::log(denom);
  }
  return loglik;
}

// Efron analogue: events tied at time t share the risk-set sum minus a
// (l/d)-scaled share of their own exp(eta).
inline double naive_log_partial_likelihood_efron(
    const hazardbench::SurvivalDataset& data, const Eigen::VectorXd& beta) {
  const Eigen::Index n = data.n();
  std::vector<double> distinct_event_times;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.events[static_cast<std::size_t>(i)]) {
      distinct_event_times.push_back(data.times[i]);
    }
  }
  std::sort(distinct_event_times.begin(), distinct_event_times.end());
  distinct_event_times.erase(
      std::unique(distinct_event_times.begin(), distinct_event_times.end()),
      distinct_event_times.end());

  double loglik = 0.0;
  for (double t : distinct_event_times) {
    double risk_sum = 0.0, event_sum = 0.0;
    int d = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double r = std::exp(data.covariates.row(j).dot(beta));
      if (data.times[j] >= t) risk_sum += r;
      if (data.times[j] == t && data.events[static_cast<std::size_t>(j)]) {
        event_sum += r;
        loglik += data.covariates.row(j).dot(beta);
        ++d;
      }
    }
    for (int l = 0; l < d; ++l) {
      loglik -= std::log(risk_sum - (static_cast<double>(l) / d) * event_sum);
    }
  }
  return loglik;
}

// Central finite differences of a scalar function of a vector.
inline Eigen::VectorXd finite_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& at,
    double step = 1e-5) {
  Eigen::VectorXd grad(at.size());
  for (Eigen::Index k = 0; k < at.size(); ++k) {
    Eigen::VectorXd hi = at, lo = at;
    hi[k] += step;
    lo[k] -= step;
    grad[k] = (f(hi) - f(lo)) / (2.0 * step);
  }
  return grad;
}

inline Eigen::MatrixXd finite_difference_hessian(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& at,
    double step = 1e-5) {
  const Eigen::Index p = at.size();
  Eigen::MatrixXd hessian(p, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = 0; b < p; ++b) {
      Eigen::VectorXd pp = at, pm = at, mp = at, mm = at;
      pp[a] += step; pp[b] += step;
      pm[a] += step; pm[b] -= step;
      mp[a] -= step; mp[b] += step;
      mm[a] -= step; mm[b] -= step;
      hessian(a, b) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * step * step);
    }
  }
  return hessian;
}

// Coarse grid to bracket the maximum of a 1-D concave function, then
// bisection on the numerical derivative sign down to `tol`.
inline double grid_plus_bisection_argmax(const std::function<double(double)>& f,
                                         double lo, double hi, double tol = 1e-9) {
  const int grid_points = 2001;
  double best_x = lo, best_f = f(lo);
  for (int i = 1; i < grid_points; ++i) {
    const double x = lo + (hi - lo) * i / (grid_points - 1);
    const double fx = f(x);
    if (fx > best_f) {
      best_f = fx;
      best_x = x;
    }
  }
  const double grid_step = (hi - lo) / (grid_points - 1);
  double a = best_x - grid_step, b = best_x + grid_step;
  const double derivative_step = 1e-7;
  auto derivative_sign = [&](double x) {
    return f(x + derivative_step) - f(x - derivative_step);
  };
  while (b - a > tol) {
    const double mid = 0.5 * (a + b);
    if (derivative_sign(mid) > 0.0) {
      a = mid;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

// Random right-censored dataset with standard-normal covariates.
inline hazardbench::SurvivalDataset random_dataset(Eigen::Index n, Eigen::Index p,
                                                   std::uint64_t seed,
                                                   double censor_fraction = 0.3,
                                                   bool force_ties = false) {
  hazardbench::Xoshiro256pp rng(seed);
  hazardbench::SurvivalDataset data;
  data.times.resize(n);
  data.events.resize(static_cast<std::size_t>(n));
  data.covariates.resize(n, p);
  for (Eigen::Index j = 0; j < p; ++j) data.variable_names.push_back("x" + std::to_string(j + 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) data.covariates(i, j) = rng.normal();
    double t = -std::log(rng.uniform_pos());
    if (force_ties) t = std::ceil(t * 4.0) / 4.0;  // quarter-day grid
    data.times[i] = t;
    data.events[static_cast<std::size_t>(i)] = rng.uniform() > censor_fraction ? 1 : 0;
  }
  // guarantee at least one event
  data.events[0] = 1;
  return data;
}

}  // namespace oracles
