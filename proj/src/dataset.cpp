#include "hazardbench/dataset.hpp"

#include <cmath>
#include <unordered_set>

#include "hazardbench/error.hpp"

namespace hazardbench {

SurvivalDataset validate_dataset(const SurvivalDataset& raw) {
  const Eigen::Index n = raw.times.size();
  if (static_cast<Eigen::Index>(raw.events.size()) != n ||
      raw.covariates.rows() != n) {
    throw HazardError(
        ErrorCode::LengthMismatch,
        "dataset: times (" + std::to_string(n) + "), events (" +
            std::to_string(raw.events.size()) + ") and covariate rows (" +
            std::to_string(raw.covariates.rows()) + ") must all have equal length");
  }
  if (n < 1) {
    throw HazardError(ErrorCode::NoEvents, "dataset: no subjects");
  }
  if (static_cast<Eigen::Index>(raw.variable_names.size()) != raw.covariates.cols()) {
    throw HazardError(ErrorCode::LengthMismatch,
                      "dataset: " + std::to_string(raw.variable_names.size()) +
                          " variable names for " + std::to_string(raw.covariates.cols()) +
                          " covariate columns");
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = raw.times[i];
    if (!std::isfinite(t)) {
      throw HazardError(ErrorCode::NonFiniteValue,
                        "dataset: non-finite time at row " + std::to_string(i));
    }
    if (t < 0.0) {
      throw HazardError(ErrorCode::NegativeTime,
                        "dataset: negative time at row " + std::to_string(i));
    }
  }
  for (Eigen::Index j = 0; j < raw.covariates.cols(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isfinite(raw.covariates(i, j))) {
        throw HazardError(ErrorCode::NonFiniteValue,
                          "dataset: non-finite covariate at row " + std::to_string(i) +
                              ", column '" + raw.variable_names[static_cast<std::size_t>(j)] +
                              "'");
      }
    }
  }

  bool any_event = false;
  for (std::uint8_t e : raw.events) any_event = any_event || (e != 0);
  if (!any_event) {
    throw HazardError(ErrorCode::NoEvents,
                      "dataset: all subjects censored; a fit would be degenerate");
  }

  std::unordered_set<std::string> seen;
  for (const auto& name : raw.variable_names) {
    if (!seen.insert(name).second) {
      throw HazardError(ErrorCode::DuplicateVariableName,
                        "dataset: duplicate variable name '" + name + "'");
    }
  }
  return raw;
}

SurvivalDataset select_columns(const SurvivalDataset& data,
                               const std::vector<Eigen::Index>& columns) {
  SurvivalDataset out;
  out.times = data.times;
  out.events = data.events;
  out.covariates.resize(data.n(), static_cast<Eigen::Index>(columns.size()));
  out.variable_names.reserve(columns.size());
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const Eigen::Index j = columns[k];
    if (j < 0 || j >= data.p()) {
      throw HazardError(ErrorCode::DimensionMismatch,
                        "dataset: column index " + std::to_string(j) + " out of range");
    }
    out.covariates.col(static_cast<Eigen::Index>(k)) = data.covariates.col(j);
    out.variable_names.push_back(data.variable_names[static_cast<std::size_t>(j)]);
  }
  return out;
}

SurvivalDataset select_rows(const SurvivalDataset& data,
                            const std::vector<Eigen::Index>& rows) {
  SurvivalDataset out;
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  out.times.resize(m);
  out.events.resize(rows.size());
  out.covariates.resize(m, data.p());
  out.variable_names = data.variable_names;
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index i = rows[static_cast<std::size_t>(k)];
    if (i < 0 || i >= data.n()) {
      throw HazardError(ErrorCode::DimensionMismatch,
                        "dataset: row index " + std::to_string(i) + " out of range");
    }
    out.times[k] = data.times[i];
    out.events[static_cast<std::size_t>(k)] = data.events[static_cast<std::size_t>(i)];
    out.covariates.row(k) = data.covariates.row(i);
  }
  return out;
}

}  // namespace hazardbench
