#include "hazardbench/screening.hpp"

#include <json.hpp>

#include "hazardbench/error.hpp"
#include "text_io.hpp"

namespace hazardbench {

ScreeningReport univariate_screen(const SurvivalDataset& data, double alpha,
                                  const CoxConfig& config) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw HazardError(ErrorCode::InvalidArgument,
                      "screening: alpha must lie in [0, 1]");
  }
  ScreeningReport report;
  report.alpha = alpha;
  report.rows.reserve(static_cast<std::size_t>(data.p()));

  for (Eigen::Index j = 0; j < data.p(); ++j) {
    ScreeningRow row;
    row.variable_name = data.variable_names[static_cast<std::size_t>(j)];
    try {
      const SurvivalDataset single = select_columns(data, {j});
      const CoxFit fit = fit_cox(single, config);
      row.univariate = VariableStats{fit.beta[0], fit.hazard_ratios[0], fit.p_values[0]};
      row.selected = fit.p_values[0] < alpha;
      if (!fit.converged) row.note = "fit did not converge";
    } catch (const HazardError& e) {
      row.selected = false;
      row.note = std::string(error_code_name(e.code())) + ": " + e.what();
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::pair<ScreeningReport, CoxFit> multivariate_refit(const SurvivalDataset& data,
                                                      const ScreeningReport& report,
                                                      const CoxConfig& config) {
  std::vector<Eigen::Index> selected_columns;
  for (std::size_t k = 0; k < report.rows.size(); ++k) {
    if (report.rows[k].selected) {
      selected_columns.push_back(static_cast<Eigen::Index>(k));
    }
  }
  if (selected_columns.empty()) {
    throw HazardError(ErrorCode::NoVariablesSelected,
                      "screening: no variables passed the univariate gate");
  }
  if (report.rows.size() != static_cast<std::size_t>(data.p())) {
    throw HazardError(ErrorCode::DimensionMismatch,
                      "screening: report covers " + std::to_string(report.rows.size()) +
                          " variables, data has " + std::to_string(data.p()));
  }

  const SurvivalDataset selected = select_columns(data, selected_columns);
  CoxFit fit = fit_cox(selected, config);

  ScreeningReport completed = report;
  for (std::size_t k = 0; k < selected_columns.size(); ++k) {
    auto& row = completed.rows[static_cast<std::size_t>(selected_columns[k])];
    row.multivariate = VariableStats{fit.beta[static_cast<Eigen::Index>(k)],
                                     fit.hazard_ratios[static_cast<Eigen::Index>(k)],
                                     fit.p_values[static_cast<Eigen::Index>(k)]};
  }
  return {std::move(completed), std::move(fit)};
}

std::vector<std::string> ScreeningReport::selected_names() const {
  std::vector<std::string> names;
  for (const auto& row : rows) {
    if (row.selected) names.push_back(row.variable_name);
  }
  return names;
}

namespace {

nlohmann::json stats_to_json(const std::optional<VariableStats>& stats) {
  if (!stats.has_value()) return nullptr;
  nlohmann::json j;
  j["beta"] = stats->beta;
  j["hr"] = stats->hr;
  j["p"] = stats->p;
  return j;
}

std::optional<VariableStats> stats_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return VariableStats{j.at("beta").get<double>(), j.at("hr").get<double>(),
                       j.at("p").get<double>()};
}

}  // namespace

std::string ScreeningReport::to_json() const {
  nlohmann::json j;
  j["alpha"] = alpha;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json r;
    r["variable"] = row.variable_name;
    r["univariate"] = stats_to_json(row.univariate);
    r["selected"] = row.selected;
    r["multivariate"] = stats_to_json(row.multivariate);
    if (!row.note.empty()) r["note"] = row.note;
    j["rows"].push_back(r);
  }
  return j.dump(2) + "\n";
}

ScreeningReport ScreeningReport::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  ScreeningReport report;
  report.alpha = j.at("alpha").get<double>();
  for (const auto& r : j.at("rows")) {
    ScreeningRow row;
    row.variable_name = r.at("variable").get<std::string>();
    row.univariate = stats_from_json(r.at("univariate"));
    row.selected = r.at("selected").get<bool>();
    row.multivariate = stats_from_json(r.at("multivariate"));
    if (r.contains("note")) row.note = r.at("note").get<std::string>();
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string ScreeningReport::to_csv() const {
  std::string out =
      "variable,univariate_beta,univariate_hr,univariate_p,selected,"
      "multivariate_beta,multivariate_hr,multivariate_p,note\n";
  auto append_stats = [&out](const std::optional<VariableStats>& stats) {
    if (stats.has_value()) {
      out += detail::format_double(stats->beta);
      out += ',';
      out += detail::format_double(stats->hr);
      out += ',';
      out += detail::format_double(stats->p);
    } else {
      out += ",,";
    }
  };
  for (const auto& row : rows) {
    out += row.variable_name;
    out += ',';
    append_stats(row.univariate);
    out += row.selected ? ",1," : ",0,";
    append_stats(row.multivariate);
    out += ',';
    out += row.note;
    out += '\n';
  }
  return out;
}

}  // namespace hazardbench
