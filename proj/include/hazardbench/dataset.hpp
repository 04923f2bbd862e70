#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace hazardbench {

// Right-censored survival data: follow-up time in days, an event indicator
// (true = the endpoint was observed, false = censored), and a dense covariate
// matrix with one named column per variable.
//
// Invariants (enforced by validate_dataset, assumed by every model):
//   - times, events and covariate rows have the same length n >= 1
//   - all times are finite and >= 0, all covariates finite
//   - at least one event is observed
//   - variable names are unique
// A validated dataset is immutable by convention and safe to share across
// concurrent readers.
struct SurvivalDataset {
  Eigen::VectorXd times;
  std::vector<std::uint8_t> events;  // 1 = event observed, 0 = censored
  Eigen::MatrixXd covariates;        // n x p
  std::vector<std::string> variable_names;

  Eigen::Index n() const { return times.size(); }
  Eigen::Index p() const { return covariates.cols(); }

  Eigen::Index n_events() const {
    Eigen::Index count = 0;
    for (std::uint8_t e : events) count += e ? 1 : 0;
    return count;
  }
};

// Row view used when iterating subjects one at a time.
struct Subject {
  double time;
  bool event;
  Eigen::RowVectorXd covariate_row;
};

inline Subject subject_at(const SurvivalDataset& data, Eigen::Index i) {
  return Subject{data.times[i], data.events[static_cast<std::size_t>(i)] != 0,
                 data.covariates.row(i)};
}

// Common interface over every fitted model: maps a covariate row to a scalar
// log-risk where larger means more hazardous.  Scoring is deterministic
// given fixed model state.
class RiskModel {
 public:
  virtual ~RiskModel() = default;
  virtual double log_risk(Eigen::Ref<const Eigen::VectorXd> x) const = 0;
};

// Checks every dataset invariant and returns the dataset unchanged, so
// validating an already-valid dataset is the identity.  Throws HazardError
// with LengthMismatch, NonFiniteValue (with row/column location),
// NegativeTime, NoEvents or DuplicateVariableName.
SurvivalDataset validate_dataset(const SurvivalDataset& raw);

// New dataset containing the given covariate columns (times/events shared).
SurvivalDataset select_columns(const SurvivalDataset& data,
                               const std::vector<Eigen::Index>& columns);

// New dataset containing the given subject rows, in the given order.
SurvivalDataset select_rows(const SurvivalDataset& data,
                            const std::vector<Eigen::Index>& rows);

}  // namespace hazardbench
