#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hazardbench/cox.hpp"
#include "hazardbench/dataset.hpp"

namespace hazardbench {

struct VariableStats {
  double beta = 0.0;
  double hr = 1.0;
  double p = 1.0;
};

struct ScreeningRow {
  std::string variable_name;
  std::optional<VariableStats> univariate;    // absent when the fit failed
  bool selected = false;                      // univariate p < alpha
  std::optional<VariableStats> multivariate;  // present exactly when selected
  std::string note;                           // failure note, empty otherwise
};

// Per-variable screen followed by a joint refit on the survivors; one row
// per input variable, in input column order.
struct ScreeningReport {
  std::vector<ScreeningRow> rows;
  double alpha = 0.05;

  std::vector<std::string> selected_names() const;

  std::string to_json() const;
  static ScreeningReport from_json(const std::string& text);
  std::string to_csv() const;
};

// Fits one single-covariate Cox model per column and gates on the Wald
// p-value.  A column whose fit fails (constant column, singular Hessian) is
// recorded with a note and selected = false; the screen itself never aborts.
ScreeningReport univariate_screen(const SurvivalDataset& data, double alpha = 0.05,
                                  const CoxConfig& config = {});

// Joint Cox fit on exactly the selected columns; fills the multivariate
// entries of the report and returns the fit for downstream use.
std::pair<ScreeningReport, CoxFit> multivariate_refit(const SurvivalDataset& data,
                                                      const ScreeningReport& report,
                                                      const CoxConfig& config = {});

}  // namespace hazardbench
