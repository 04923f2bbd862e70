#include "hazardbench/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "hazardbench/error.hpp"
#include "hazardbench/metrics.hpp"
#include "text_io.hpp"

namespace hazardbench {

const char* ensemble_mode_name(EnsembleMode mode) {
  return mode == EnsembleMode::Pipeline ? "pipeline" : "average";
}

EnsembleMode ensemble_mode_from_name(const std::string& name) {
  if (name == "pipeline") return EnsembleMode::Pipeline;
  if (name == "average") return EnsembleMode::AverageScore;
  throw HazardError(ErrorCode::InvalidArgument,
                    "ensemble: unknown mode '" + name + "' (pipeline or average)");
}

// midrank quantile of a value that occurs in the sorted reference
static double midrank_position(double value, const std::vector<double>& sorted_scores) {
  const auto lo = std::lower_bound(sorted_scores.begin(), sorted_scores.end(), value);
  const auto hi = std::upper_bound(lo, sorted_scores.end(), value);
  const double below = static_cast<double>(lo - sorted_scores.begin());
  const double equal = static_cast<double>(hi - lo);
  return (below + 0.5 * (equal - 1.0)) /
         static_cast<double>(sorted_scores.size() - 1);
}

double rank_normalize(double score, const std::vector<double>& sorted_scores) {
  const std::size_t m = sorted_scores.size();
  if (m == 0) {
    throw HazardError(ErrorCode::InvalidArgument,
                      "ensemble: empty rank-normalization reference");
  }
  if (m == 1) return 0.5;
  if (score <= sorted_scores.front()) {
    return score < sorted_scores.front() ? 0.0 : midrank_position(score, sorted_scores);
  }
  if (score >= sorted_scores.back()) {
    return score > sorted_scores.back() ? 1.0 : midrank_position(score, sorted_scores);
  }
  const auto lo = std::lower_bound(sorted_scores.begin(), sorted_scores.end(), score);
  const auto hi = std::upper_bound(lo, sorted_scores.end(), score);
  if (lo != hi) return midrank_position(score, sorted_scores);

  // strictly between two stored values: interpolate between their positions
  const double below_value = *(lo - 1);
  const double above_value = *lo;
  const double q_below = midrank_position(below_value, sorted_scores);
  const double q_above = midrank_position(above_value, sorted_scores);
  const double t = (score - below_value) / (above_value - below_value);
  return q_below + t * (q_above - q_below);
}

namespace {

std::vector<Eigen::Index> columns_by_name(const std::vector<std::string>& schema,
                                          const std::vector<std::string>& wanted) {
  std::vector<Eigen::Index> indices;
  indices.reserve(wanted.size());
  for (const auto& name : wanted) {
    const auto it = std::find(schema.begin(), schema.end(), name);
    if (it == schema.end()) {
      throw HazardError(ErrorCode::UnknownVariable,
                        "ensemble: variable '" + name + "' not present in the data");
    }
    indices.push_back(static_cast<Eigen::Index>(it - schema.begin()));
  }
  return indices;
}

Eigen::VectorXd standardized_subrow(const EnsembleModel& model,
                                    Eigen::Ref<const Eigen::VectorXd> x) {
  Eigen::VectorXd z(static_cast<Eigen::Index>(model.selected.size()));
  for (std::size_t k = 0; k < model.selected.size(); ++k) {
    double value = x[model.selected[k]] - model.standardization.means[static_cast<Eigen::Index>(k)];
    if (!model.standardization.constant[k]) {
      value /= model.standardization.stddevs[static_cast<Eigen::Index>(k)];
    }
    z[static_cast<Eigen::Index>(k)] = value;
  }
  return z;
}

Eigen::VectorXd raw_subrow(const EnsembleModel& model,
                           Eigen::Ref<const Eigen::VectorXd> x) {
  Eigen::VectorXd sub(static_cast<Eigen::Index>(model.selected.size()));
  for (std::size_t k = 0; k < model.selected.size(); ++k) {
    sub[static_cast<Eigen::Index>(k)] = x[model.selected[k]];
  }
  return sub;
}

void check_row(const EnsembleModel& model, Eigen::Ref<const Eigen::VectorXd> x) {
  if (x.size() != static_cast<Eigen::Index>(model.input_variables.size())) {
    throw HazardError(ErrorCode::DimensionMismatch,
                      "ensemble: row has length " + std::to_string(x.size()) +
                          ", model expects " +
                          std::to_string(model.input_variables.size()));
  }
}

}  // namespace

EnsembleFitResult fit_ensemble(const SurvivalDataset& train_data,
                               const SurvivalDataset& val_data, double alpha,
                               const TrainConfig& train_config, EnsembleMode mode) {
  if (train_data.variable_names != val_data.variable_names) {
    throw HazardError(ErrorCode::DimensionMismatch,
                      "ensemble: training and validation schemas differ");
  }

  EnsembleModel model;
  model.mode = mode;
  model.input_variables = train_data.variable_names;

  model.screening = univariate_screen(train_data, alpha);
  auto [completed, cox_fit] = multivariate_refit(train_data, model.screening);
  model.screening = std::move(completed);
  model.cox = std::move(cox_fit);

  for (std::size_t k = 0; k < model.screening.rows.size(); ++k) {
    if (model.screening.rows[k].selected) {
      model.selected.push_back(static_cast<Eigen::Index>(k));
    }
  }

  const SurvivalDataset train_selected = select_columns(train_data, model.selected);
  const SurvivalDataset val_selected = select_columns(val_data, model.selected);
  StandardizeResult train_std = standardize(train_selected);
  model.standardization = train_std.stats;
  const StandardizeResult val_std = standardize(val_selected, model.standardization);

  auto [network, trace] = train(train_std.data, val_std.data, train_config);
  model.network = std::move(network);

  // training-set score distributions anchor the rank-normalized combination
  model.cox_train_scores.reserve(static_cast<std::size_t>(train_selected.n()));
  model.network_train_scores.reserve(static_cast<std::size_t>(train_selected.n()));
  const Eigen::VectorXd net_scores =
      forward_risk_batch(model.network, train_std.data.covariates);
  for (Eigen::Index i = 0; i < train_selected.n(); ++i) {
    model.cox_train_scores.push_back(
        predict_risk(model.cox, train_selected.covariates.row(i).transpose()));
    model.network_train_scores.push_back(net_scores[i]);
  }
  std::sort(model.cox_train_scores.begin(), model.cox_train_scores.end());
  std::sort(model.network_train_scores.begin(), model.network_train_scores.end());

  return EnsembleFitResult{std::move(model), std::move(trace)};
}

double ensemble_cox_risk(const EnsembleModel& model,
                         Eigen::Ref<const Eigen::VectorXd> x) {
  check_row(model, x);
  return predict_risk(model.cox, raw_subrow(model, x));
}

double ensemble_network_risk(const EnsembleModel& model,
                             Eigen::Ref<const Eigen::VectorXd> x) {
  check_row(model, x);
  return forward_risk(model.network, standardized_subrow(model, x));
}

double ensemble_risk(const EnsembleModel& model, Eigen::Ref<const Eigen::VectorXd> x) {
  check_row(model, x);
  if (model.mode == EnsembleMode::Pipeline) {
    return forward_risk(model.network, standardized_subrow(model, x));
  }
  const double cox_q =
      rank_normalize(ensemble_cox_risk(model, x), model.cox_train_scores);
  const double net_q =
      rank_normalize(ensemble_network_risk(model, x), model.network_train_scores);
  return 0.5 * (cox_q + net_q);
}

namespace {

// risk vectors for one dataset under each of the three scoring rules,
// mapping model variables onto the dataset's columns by name
struct SplitScores {
  Eigen::VectorXd cox;
  Eigen::VectorXd network;
  Eigen::VectorXd ensemble;
};

SplitScores score_split(const EnsembleModel& model, const SurvivalDataset& data) {
  std::vector<std::string> selected_names;
  selected_names.reserve(model.selected.size());
  for (Eigen::Index k : model.selected) {
    selected_names.push_back(model.input_variables[static_cast<std::size_t>(k)]);
  }
  const std::vector<Eigen::Index> data_columns =
      columns_by_name(data.variable_names, selected_names);

  SplitScores scores;
  scores.cox.resize(data.n());
  scores.network.resize(data.n());
  scores.ensemble.resize(data.n());
  Eigen::VectorXd raw(static_cast<Eigen::Index>(data_columns.size()));
  Eigen::VectorXd z(static_cast<Eigen::Index>(data_columns.size()));
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (std::size_t k = 0; k < data_columns.size(); ++k) {
      raw[static_cast<Eigen::Index>(k)] = data.covariates(i, data_columns[k]);
      double value = raw[static_cast<Eigen::Index>(k)] -
                     model.standardization.means[static_cast<Eigen::Index>(k)];
      if (!model.standardization.constant[k]) {
        value /= model.standardization.stddevs[static_cast<Eigen::Index>(k)];
      }
      z[static_cast<Eigen::Index>(k)] = value;
    }
    scores.cox[i] = predict_risk(model.cox, raw);
    scores.network[i] = forward_risk(model.network, z);
    if (model.mode == EnsembleMode::Pipeline) {
      scores.ensemble[i] = scores.network[i];
    } else {
      scores.ensemble[i] =
          0.5 * (rank_normalize(scores.cox[i], model.cox_train_scores) +
                 rank_normalize(scores.network[i], model.network_train_scores));
    }
  }
  return scores;
}

std::optional<double> cell_c_index(const Eigen::VectorXd& times,
                                   const std::vector<std::uint8_t>& events,
                                   const Eigen::VectorXd& risks) {
  try {
    return concordance_index(times, events, risks).c_index;
  } catch (const HazardError& e) {
    if (e.code() == ErrorCode::NoComparablePairs) return std::nullopt;
    throw;
  }
}

}  // namespace

EvaluationReport evaluate(const EnsembleModel& model, const SurvivalDataset& train_data,
                          const SurvivalDataset& val_data) {
  EvaluationReport report;
  report.n_epochs = model.network.config.n_epochs;
  report.seed = model.network.config.seed;
  report.mode = model.mode;

  const SurvivalDataset* datasets[2] = {&train_data, &val_data};
  for (int s = 0; s < 2; ++s) {
    const SplitScores scores = score_split(model, *datasets[s]);
    report.c_index[s][EvaluationReport::kCox] =
        cell_c_index(datasets[s]->times, datasets[s]->events, scores.cox);
    report.c_index[s][EvaluationReport::kDeepSurv] =
        cell_c_index(datasets[s]->times, datasets[s]->events, scores.network);
    report.c_index[s][EvaluationReport::kEnsembled] =
        cell_c_index(datasets[s]->times, datasets[s]->events, scores.ensemble);
  }
  return report;
}

namespace {

std::string cell_text(const std::optional<double>& value) {
  if (!value.has_value()) return "n/a";
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.4f", *value);
  return buf;
}

}  // namespace

std::string EvaluationReport::to_text() const {
  const std::string ensembled_head =
      "Ensembled(nEpochs=" + std::to_string(n_epochs) + ")";
  std::string out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-12s %8s %9s %s\n", "Dataset", "CoxPH",
                "DeepSurv", ensembled_head.c_str());
  out += line;
  const char* split_names[2] = {"Training", "Validation"};
  for (int s = 0; s < 2; ++s) {
    std::snprintf(line, sizeof(line), "%-12s %8s %9s %s\n", split_names[s],
                  cell_text(c_index[s][kCox]).c_str(),
                  cell_text(c_index[s][kDeepSurv]).c_str(),
                  cell_text(c_index[s][kEnsembled]).c_str());
    out += line;
  }
  return out;
}

std::string EvaluationReport::to_csv() const {
  auto cell = [](const std::optional<double>& value) {
    return value.has_value() ? detail::format_double(*value) : std::string();
  };
  std::string out = "dataset,coxph,deepsurv,ensembled\n";
  const char* split_names[2] = {"Training", "Validation"};
  for (int s = 0; s < 2; ++s) {
    out += split_names[s];
    out += ',';
    out += cell(c_index[s][kCox]);
    out += ',';
    out += cell(c_index[s][kDeepSurv]);
    out += ',';
    out += cell(c_index[s][kEnsembled]);
    out += '\n';
  }
  return out;
}

std::string EvaluationReport::to_json() const {
  nlohmann::json j;
  j["config"]["n_epochs"] = n_epochs;
  j["config"]["seed"] = seed;
  j["config"]["mode"] = ensemble_mode_name(mode);
  const char* split_keys[2] = {"training", "validation"};
  const char* model_keys[3] = {"coxph", "deepsurv", "ensembled"};
  for (int s = 0; s < 2; ++s) {
    for (int m = 0; m < 3; ++m) {
      if (c_index[s][m].has_value()) {
        j["c_index"][split_keys[s]][model_keys[m]] = *c_index[s][m];
      } else {
        j["c_index"][split_keys[s]][model_keys[m]] = nullptr;
      }
    }
  }
  return j.dump(2) + "\n";
}

std::string EnsembleModel::to_json() const {
  nlohmann::json j;
  j["mode"] = ensemble_mode_name(mode);
  j["input_variables"] = input_variables;
  j["selected"] = selected;
  j["screening"] = nlohmann::json::parse(screening.to_json());
  j["cox"] = nlohmann::json::parse(cox.to_json());
  j["network"] = nlohmann::json::parse(network.to_json());
  nlohmann::json std_vars = nlohmann::json::array();
  for (std::size_t k = 0; k < selected.size(); ++k) {
    nlohmann::json v;
    v["name"] = input_variables[static_cast<std::size_t>(selected[k])];
    v["mean"] = standardization.means[static_cast<Eigen::Index>(k)];
    v["stddev"] = standardization.stddevs[static_cast<Eigen::Index>(k)];
    v["constant"] = standardization.constant[k] != 0;
    std_vars.push_back(v);
  }
  j["standardization"]["variables"] = std_vars;
  j["cox_train_scores"] = cox_train_scores;
  j["network_train_scores"] = network_train_scores;
  return j.dump(2) + "\n";
}

EnsembleModel EnsembleModel::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  EnsembleModel model;
  model.mode = ensemble_mode_from_name(j.at("mode").get<std::string>());
  model.input_variables = j.at("input_variables").get<std::vector<std::string>>();
  model.selected = j.at("selected").get<std::vector<Eigen::Index>>();
  model.screening = ScreeningReport::from_json(j.at("screening").dump());
  model.cox = CoxFit::from_json(j.at("cox").dump());
  model.network = RiskNetwork::from_json(j.at("network").dump());
  const auto& std_vars = j.at("standardization").at("variables");
  const Eigen::Index k = static_cast<Eigen::Index>(std_vars.size());
  model.standardization.means.resize(k);
  model.standardization.stddevs.resize(k);
  model.standardization.constant.resize(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& v = std_vars[static_cast<std::size_t>(i)];
    model.standardization.means[i] = v.at("mean").get<double>();
    model.standardization.stddevs[i] = v.at("stddev").get<double>();
    model.standardization.constant[static_cast<std::size_t>(i)] =
        v.at("constant").get<bool>() ? 1 : 0;
  }
  model.cox_train_scores = j.at("cox_train_scores").get<std::vector<double>>();
  model.network_train_scores = j.at("network_train_scores").get<std::vector<double>>();
  return model;
}

}  // namespace hazardbench
