#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hazardbench/cox.hpp"
#include "hazardbench/dataset.hpp"
#include "hazardbench/deepsurv.hpp"
#include "hazardbench/pipeline.hpp"
#include "hazardbench/screening.hpp"

namespace hazardbench {

// Pipeline scores with the network alone (screened, standardized inputs);
// AverageScore averages the Cox and network scores after mapping each onto
// its training-set quantile scale.
enum class EnsembleMode { Pipeline, AverageScore };

const char* ensemble_mode_name(EnsembleMode mode);
EnsembleMode ensemble_mode_from_name(const std::string& name);

// Empirical quantile of `score` within the sorted reference scores, with
// midranks for ties and linear interpolation between neighbours; 0 below the
// minimum, 1 above the maximum.  Invariant under increasing affine maps of
// both arguments.
double rank_normalize(double score, const std::vector<double>& sorted_scores);

// Screening -> multivariate Cox -> standardized DeepSurv, frozen together
// with everything needed to score unseen rows.
struct EnsembleModel {
  EnsembleMode mode = EnsembleMode::Pipeline;
  std::vector<std::string> input_variables;       // full training schema
  std::vector<Eigen::Index> selected;             // indices into input_variables
  ScreeningReport screening;
  CoxFit cox;                                     // on the selected raw columns
  RiskNetwork network;                            // on selected, standardized columns
  StandardizationStats standardization;           // training statistics, selected columns
  std::vector<double> cox_train_scores;           // sorted rank-normalization references
  std::vector<double> network_train_scores;       // sorted

  std::string to_json() const;
  static EnsembleModel from_json(const std::string& text);
};

struct EnsembleFitResult {
  EnsembleModel model;
  TrainTrace trace;
};

// Runs the whole pipeline on the training split: univariate screen at
// `alpha`, joint refit on the survivors, z-scoring by training statistics,
// then network training (validation data is only watched, never fitted).
EnsembleFitResult fit_ensemble(const SurvivalDataset& train_data,
                               const SurvivalDataset& val_data, double alpha,
                               const TrainConfig& train_config,
                               EnsembleMode mode = EnsembleMode::Pipeline);

// Scores one full covariate row (original schema, unscaled).
double ensemble_risk(const EnsembleModel& model, Eigen::Ref<const Eigen::VectorXd> x);

// Component scores used by the evaluation grid.
double ensemble_cox_risk(const EnsembleModel& model,
                         Eigen::Ref<const Eigen::VectorXd> x);
double ensemble_network_risk(const EnsembleModel& model,
                             Eigen::Ref<const Eigen::VectorXd> x);

// The 2 x 3 concordance grid (Training/Validation x CoxPH/DeepSurv/Ensembled).
struct EvaluationReport {
  enum Split { kTraining = 0, kValidation = 1 };
  enum Model { kCox = 0, kDeepSurv = 1, kEnsembled = 2 };

  std::array<std::array<std::optional<double>, 3>, 2> c_index;
  int n_epochs = 0;
  std::uint64_t seed = 0;
  EnsembleMode mode = EnsembleMode::Pipeline;

  std::string to_text() const;  // aligned table
  std::string to_csv() const;   // dataset,coxph,deepsurv,ensembled
  std::string to_json() const;
};

// Fills the grid by scoring both splits with all three models.  A cell with
// no comparable pairs is reported as missing, never as a failure.
EvaluationReport evaluate(const EnsembleModel& model, const SurvivalDataset& train_data,
                          const SurvivalDataset& val_data);

}  // namespace hazardbench
