#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hazardbench/dataset.hpp"

namespace hazardbench {

// Pre-validation staging form of a CSV cohort.  Cells may be missing
// (empty field); the time and event columns are already split out and the
// event column decoded ({1,true,yes} / {0,false,no}, case-insensitive).
struct RawTable {
  std::vector<std::string> variable_names;  // covariate columns only
  std::vector<std::optional<double>> times;
  std::vector<std::optional<bool>> events;
  std::vector<std::vector<std::optional<double>>> covariates;  // row-major

  std::size_t n_rows() const { return times.size(); }
  std::size_t n_cols() const { return variable_names.size(); }
};

// Parses a CSV cohort (comma separated, header row, period decimal
// separator, empty field = missing, UTF-8).
RawTable load_csv(const std::string& text, const std::string& time_column,
                  const std::string& event_column);
RawTable load_csv_file(const std::string& path, const std::string& time_column,
                       const std::string& event_column);

enum class ImputeStrategy { CaseDeletion, ConditionalMean };

ImputeStrategy impute_strategy_from_name(const std::string& name);

// Resolves missing covariates.  Rows missing time or event are always
// dropped.  CaseDeletion drops any row with a missing covariate;
// ConditionalMean fills with the column mean within the subject's event
// group, falling back to the overall column mean.
RawTable impute(const RawTable& table, ImputeStrategy strategy);

// Complete table -> validated dataset (fails on any remaining missing cell).
SurvivalDataset to_dataset(const RawTable& table);

struct StandardizationStats {
  Eigen::VectorXd means;
  Eigen::VectorXd stddevs;              // sample (n-1) standard deviation
  std::vector<std::uint8_t> constant;   // flagged columns pass through unscaled
};

struct StandardizeResult {
  SurvivalDataset data;
  StandardizationStats stats;
};

// Z-scores every covariate column, either with freshly computed statistics
// or with the provided ones (train statistics applied to validation data).
StandardizeResult standardize(const SurvivalDataset& data);
StandardizeResult standardize(const SurvivalDataset& data,
                              const StandardizationStats& stats);

// Seeded uniform shuffle, then a train/validation partition with
// round(fraction * n) training rows.
std::pair<SurvivalDataset, SurvivalDataset> split(const SurvivalDataset& data,
                                                  double fraction,
                                                  std::uint64_t seed);

// --- synthetic cohorts -----------------------------------------------------

struct LinearRisk {
  Eigen::VectorXd beta_true;
};

// h(x) = sum_k weights[k] * (x_k^2 - 1); mean-zero under standard normal
// covariates, and orthogonal to every linear predictor.
struct QuadraticRisk {
  Eigen::VectorXd weights;
};

struct ExponentialBaseline {
  double lambda0 = 0.05;
};

struct WeibullBaseline {
  double lambda0 = 0.05;
  double k = 1.5;
};

struct GeneratorSpec {
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  std::variant<LinearRisk, QuadraticRisk> risk_form;
  std::variant<ExponentialBaseline, WeibullBaseline> baseline;
  double censoring_horizon = 30.0;     // administrative cutoff, days
  double extra_censoring_rate = 0.0;   // independent exponential censoring
  std::uint64_t seed = 0;

  std::string to_json() const;
  static GeneratorSpec from_json(const std::string& text);

  // The documented demonstration cohort: n = 2293, p = 51 standard-normal
  // covariates, 14 active variables with alternating-sign coefficients,
  // exponential baseline 0.05/day, 30-day administrative censoring.
  static GeneratorSpec default_cohort(std::uint64_t seed);
  static Eigen::VectorXd default_active_beta();  // the 51-vector behind it
};

struct SyntheticCohort {
  SurvivalDataset data;
  Eigen::VectorXd true_log_risk;  // ground-truth h(x) per subject
};

// Inverse-transform sampling with multiplicative hazard exp(h(x)).
// Deterministic per seed; the stream is xoshiro256++ as documented in rng.hpp.
SyntheticCohort generate_synthetic(const GeneratorSpec& spec);

// Cohort CSV round trip (header: time,event,<variables...>).
std::string cohort_to_csv(const SurvivalDataset& data);
SurvivalDataset cohort_from_csv(const std::string& text,
                                const std::string& time_column = "time",
                                const std::string& event_column = "event",
                                ImputeStrategy strategy = ImputeStrategy::CaseDeletion);

}  // namespace hazardbench
