#include "hazardbench/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "hazardbench/error.hpp"
#include "hazardbench/rng.hpp"
#include "text_io.hpp"

namespace hazardbench {

namespace {

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::optional<bool> parse_event(std::string_view cell) {
  const std::string v = lower(cell);
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  return std::nullopt;
}

}  // namespace

RawTable load_csv(const std::string& text, const std::string& time_column,
                  const std::string& event_column) {
  std::vector<std::string_view> lines;
  {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string::npos) end = text.size();
      if (end > pos) lines.emplace_back(text.data() + pos, end - pos);
      pos = end + 1;
    }
  }
  if (lines.empty()) {
    throw HazardError(ErrorCode::MissingColumn, "pipeline: empty CSV (no header row)");
  }

  const auto header = split_line(lines[0]);
  std::size_t time_index = header.size();
  std::size_t event_index = header.size();
  RawTable table;
  std::vector<std::size_t> covariate_indices;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string name(detail::trim(header[j]));
    if (name == time_column) {
      time_index = j;
    } else if (name == event_column) {
      event_index = j;
    } else {
      covariate_indices.push_back(j);
      table.variable_names.push_back(name);
    }
  }
  if (time_index == header.size()) {
    throw HazardError(ErrorCode::MissingColumn,
                      "pipeline: time column '" + time_column + "' not in header");
  }
  if (event_index == header.size()) {
    throw HazardError(ErrorCode::MissingColumn,
                      "pipeline: event column '" + event_column + "' not in header");
  }
  {
    auto names = table.variable_names;
    std::sort(names.begin(), names.end());
    const auto dup = std::adjacent_find(names.begin(), names.end());
    if (dup != names.end()) {
      throw HazardError(ErrorCode::DuplicateVariableName,
                        "pipeline: duplicate CSV column '" + *dup + "'");
    }
  }

  for (std::size_t row = 1; row < lines.size(); ++row) {
    const auto fields = split_line(lines[row]);
    if (fields.size() != header.size()) {
      throw HazardError(ErrorCode::RaggedRow,
                        "pipeline: row " + std::to_string(row) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(header.size()));
    }
    auto cell_at = [&](std::size_t j) { return detail::trim(fields[j]); };

    const auto time_cell = cell_at(time_index);
    if (time_cell.empty()) {
      table.times.push_back(std::nullopt);
    } else {
      const auto value = detail::parse_double(time_cell);
      if (!value) {
        throw HazardError(ErrorCode::UnparsableNumber,
                          "pipeline: unparsable time '" + std::string(time_cell) +
                              "' at row " + std::to_string(row));
      }
      table.times.push_back(*value);
    }

    const auto event_cell = cell_at(event_index);
    if (event_cell.empty()) {
      table.events.push_back(std::nullopt);
    } else {
      const auto flag = parse_event(event_cell);
      if (!flag) {
        throw HazardError(ErrorCode::UnparsableNumber,
                          "pipeline: unparsable event '" + std::string(event_cell) +
                              "' at row " + std::to_string(row) +
                              " (expected 1/true/yes or 0/false/no)");
      }
      table.events.push_back(*flag);
    }

    std::vector<std::optional<double>> covariate_row;
    covariate_row.reserve(covariate_indices.size());
    for (std::size_t j : covariate_indices) {
      const auto cell = cell_at(j);
      if (cell.empty()) {
        covariate_row.push_back(std::nullopt);
        continue;
      }
      const auto value = detail::parse_double(cell);
      if (!value) {
        throw HazardError(ErrorCode::UnparsableNumber,
                          "pipeline: unparsable number '" + std::string(cell) +
                              "' at row " + std::to_string(row) + ", column '" +
                              std::string(detail::trim(header[j])) + "'");
      }
      covariate_row.push_back(*value);
    }
    table.covariates.push_back(std::move(covariate_row));
  }
  return table;
}

RawTable load_csv_file(const std::string& path, const std::string& time_column,
                       const std::string& event_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw HazardError(ErrorCode::InvalidArgument, "pipeline: cannot open '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_csv(buffer.str(), time_column, event_column);
}

ImputeStrategy impute_strategy_from_name(const std::string& name) {
  if (name == "case-deletion") return ImputeStrategy::CaseDeletion;
  if (name == "conditional-mean") return ImputeStrategy::ConditionalMean;
  throw HazardError(ErrorCode::InvalidArgument,
                    "pipeline: unknown imputation strategy '" + name +
                        "' (case-deletion or conditional-mean)");
}

RawTable impute(const RawTable& table, ImputeStrategy strategy) {
  RawTable out;
  out.variable_names = table.variable_names;

  // rows missing time or event are unusable under either strategy
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < table.n_rows(); ++i) {
    if (table.times[i].has_value() && table.events[i].has_value()) rows.push_back(i);
  }

  if (strategy == ImputeStrategy::CaseDeletion) {
    for (std::size_t i : rows) {
      const auto& r = table.covariates[i];
      const bool complete =
          std::all_of(r.begin(), r.end(), [](const auto& c) { return c.has_value(); });
      if (!complete) continue;
      out.times.push_back(table.times[i]);
      out.events.push_back(table.events[i]);
      out.covariates.push_back(r);
    }
    if (out.times.empty()) {
      throw HazardError(ErrorCode::AllRowsDeleted,
                        "pipeline: case deletion removed every row");
    }
    return out;
  }

  // conditional mean: per column, mean within the subject's event group,
  // overall column mean when the group has no observed values
  const std::size_t p = table.n_cols();
  std::vector<double> sum_event(p, 0.0), sum_censored(p, 0.0);
  std::vector<std::size_t> n_event(p, 0), n_censored(p, 0);
  for (std::size_t i : rows) {
    const bool is_event = *table.events[i];
    for (std::size_t j = 0; j < p; ++j) {
      const auto& cell = table.covariates[i][j];
      if (!cell.has_value()) continue;
      if (is_event) {
        sum_event[j] += *cell;
        n_event[j] += 1;
      } else {
        sum_censored[j] += *cell;
        n_censored[j] += 1;
      }
    }
  }
  for (std::size_t j = 0; j < p; ++j) {
    if (n_event[j] + n_censored[j] == 0) {
      throw HazardError(ErrorCode::ColumnAllMissing,
                        "pipeline: column '" + table.variable_names[j] +
                            "' has no observed values to average");
    }
  }
  auto group_mean = [&](std::size_t j, bool is_event) {
    const std::size_t n_group = is_event ? n_event[j] : n_censored[j];
    const double sum_group = is_event ? sum_event[j] : sum_censored[j];
    if (n_group > 0) return sum_group / static_cast<double>(n_group);
    return (sum_event[j] + sum_censored[j]) /
           static_cast<double>(n_event[j] + n_censored[j]);
  };

  for (std::size_t i : rows) {
    out.times.push_back(table.times[i]);
    out.events.push_back(table.events[i]);
    auto r = table.covariates[i];
    for (std::size_t j = 0; j < p; ++j) {
      if (!r[j].has_value()) r[j] = group_mean(j, *table.events[i]);
    }
    out.covariates.push_back(std::move(r));
  }
  if (out.times.empty()) {
    throw HazardError(ErrorCode::AllRowsDeleted,
                      "pipeline: no rows with observed time and event remain");
  }
  return out;
}

SurvivalDataset to_dataset(const RawTable& table) {
  const Eigen::Index n = static_cast<Eigen::Index>(table.n_rows());
  const Eigen::Index p = static_cast<Eigen::Index>(table.n_cols());
  SurvivalDataset data;
  data.times.resize(n);
  data.events.resize(static_cast<std::size_t>(n));
  data.covariates.resize(n, p);
  data.variable_names = table.variable_names;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t row = static_cast<std::size_t>(i);
    if (!table.times[row].has_value() || !table.events[row].has_value()) {
      throw HazardError(ErrorCode::NonFiniteValue,
                        "pipeline: missing time/event at row " + std::to_string(i) +
                            "; run impute first");
    }
    data.times[i] = *table.times[row];
    data.events[row] = *table.events[row] ? 1 : 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto& cell = table.covariates[row][static_cast<std::size_t>(j)];
      if (!cell.has_value()) {
        throw HazardError(ErrorCode::NonFiniteValue,
                          "pipeline: missing covariate at row " + std::to_string(i) +
                              ", column '" +
                              table.variable_names[static_cast<std::size_t>(j)] +
                              "'; run impute first");
      }
      data.covariates(i, j) = *cell;
    }
  }
  return validate_dataset(data);
}

static StandardizeResult apply_standardization(const SurvivalDataset& data,
                                               const StandardizationStats& stats) {
  if (stats.means.size() != data.p() || stats.stddevs.size() != data.p()) {
    throw HazardError(ErrorCode::DimensionMismatch,
                      "pipeline: standardization statistics cover " +
                          std::to_string(stats.means.size()) + " columns, data has " +
                          std::to_string(data.p()));
  }
  StandardizeResult result;
  result.data = data;
  result.stats = stats;
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    result.data.covariates.col(j).array() -= stats.means[j];
    if (!stats.constant[static_cast<std::size_t>(j)]) {
      result.data.covariates.col(j) /= stats.stddevs[j];
    }
  }
  return result;
}

StandardizeResult standardize(const SurvivalDataset& data) {
  const Eigen::Index n = data.n();
  StandardizationStats stats;
  stats.means.resize(data.p());
  stats.stddevs.resize(data.p());
  stats.constant.resize(static_cast<std::size_t>(data.p()));
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    const double mean = data.covariates.col(j).mean();
    double variance = 0.0;
    if (n > 1) {
      variance = (data.covariates.col(j).array() - mean).square().sum() /
                 static_cast<double>(n - 1);
    }
    const double sd = std::sqrt(variance);
    stats.means[j] = mean;
    stats.stddevs[j] = sd;
    stats.constant[static_cast<std::size_t>(j)] = (sd == 0.0) ? 1 : 0;
  }
  return apply_standardization(data, stats);
}

StandardizeResult standardize(const SurvivalDataset& data,
                              const StandardizationStats& stats) {
  return apply_standardization(data, stats);
}

std::pair<SurvivalDataset, SurvivalDataset> split(const SurvivalDataset& data,
                                                  double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw HazardError(ErrorCode::InvalidArgument,
                      "pipeline: split fraction must lie in (0, 1)");
  }
  const Eigen::Index n = data.n();
  if (n < 2) {
    throw HazardError(ErrorCode::EmptyPartition,
                      "pipeline: cannot split fewer than 2 rows");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Xoshiro256pp rng(seed);
  rng.shuffle(order);

  const Eigen::Index n_train =
      static_cast<Eigen::Index>(std::llround(fraction * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n) {
    throw HazardError(ErrorCode::EmptyPartition,
                      "pipeline: split leaves an empty partition (train size " +
                          std::to_string(n_train) + " of " + std::to_string(n) + ")");
  }
  std::vector<Eigen::Index> train_rows(order.begin(), order.begin() + n_train);
  std::vector<Eigen::Index> val_rows(order.begin() + n_train, order.end());
  return {select_rows(data, train_rows), select_rows(data, val_rows)};
}

// --- synthetic cohorts -------------------------------------------------------

namespace {

void check_spec(const GeneratorSpec& spec) {
  if (spec.n < 1) {
    throw HazardError(ErrorCode::InvalidArgument, "pipeline: generator needs n >= 1");
  }
  if (spec.p < 1) {
    throw HazardError(ErrorCode::InvalidArgument, "pipeline: generator needs p >= 1");
  }
  const Eigen::Index coef_len =
      std::holds_alternative<LinearRisk>(spec.risk_form)
          ? std::get<LinearRisk>(spec.risk_form).beta_true.size()
          : std::get<QuadraticRisk>(spec.risk_form).weights.size();
  if (coef_len != spec.p) {
    throw HazardError(ErrorCode::DimensionMismatch,
                      "pipeline: risk coefficients have length " +
                          std::to_string(coef_len) + ", expected p = " +
                          std::to_string(spec.p));
  }
  double lambda0 = 0.0, shape = 1.0;
  if (std::holds_alternative<ExponentialBaseline>(spec.baseline)) {
    lambda0 = std::get<ExponentialBaseline>(spec.baseline).lambda0;
  } else {
    lambda0 = std::get<WeibullBaseline>(spec.baseline).lambda0;
    shape = std::get<WeibullBaseline>(spec.baseline).k;
  }
  if (!(lambda0 > 0.0)) {
    throw HazardError(ErrorCode::InvalidArgument, "pipeline: lambda0 must be > 0");
  }
  if (!(shape > 0.0)) {
    throw HazardError(ErrorCode::InvalidArgument, "pipeline: Weibull k must be > 0");
  }
  if (!(spec.censoring_horizon > 0.0)) {
    throw HazardError(ErrorCode::InvalidArgument,
                      "pipeline: censoring horizon must be > 0");
  }
  if (spec.extra_censoring_rate < 0.0) {
    throw HazardError(ErrorCode::InvalidArgument,
                      "pipeline: extra censoring rate must be >= 0");
  }
}

}  // namespace

SyntheticCohort generate_synthetic(const GeneratorSpec& spec) {
  check_spec(spec);
  Xoshiro256pp rng(spec.seed);

  SyntheticCohort cohort;
  cohort.data.times.resize(spec.n);
  cohort.data.events.resize(static_cast<std::size_t>(spec.n));
  cohort.data.covariates.resize(spec.n, spec.p);
  cohort.true_log_risk.resize(spec.n);
  cohort.data.variable_names.reserve(static_cast<std::size_t>(spec.p));
  for (Eigen::Index j = 0; j < spec.p; ++j) {
    cohort.data.variable_names.push_back("x" + std::to_string(j + 1));
  }

  for (Eigen::Index i = 0; i < spec.n; ++i) {
    for (Eigen::Index j = 0; j < spec.p; ++j) {
      cohort.data.covariates(i, j) = rng.normal();
    }
    double h = 0.0;
    if (std::holds_alternative<LinearRisk>(spec.risk_form)) {
      h = cohort.data.covariates.row(i).dot(
          std::get<LinearRisk>(spec.risk_form).beta_true);
    } else {
      const auto& weights = std::get<QuadraticRisk>(spec.risk_form).weights;
      for (Eigen::Index j = 0; j < spec.p; ++j) {
        const double x = cohort.data.covariates(i, j);
        h += weights[j] * (x * x - 1.0);
      }
    }
    cohort.true_log_risk[i] = h;

    // inverse-transform event time under hazard lambda0 * exp(h)
    const double u = rng.uniform_pos();
    double event_time;
    if (std::holds_alternative<ExponentialBaseline>(spec.baseline)) {
      const double lambda0 = std::get<ExponentialBaseline>(spec.baseline).lambda0;
      event_time = -std::log(u) / (lambda0 * std::exp(h));
    } else {
      const auto& weibull = std::get<WeibullBaseline>(spec.baseline);
      event_time =
          std::pow(-std::log(u) / (weibull.lambda0 * std::exp(h)), 1.0 / weibull.k);
    }

    double censor_time = spec.censoring_horizon;
    if (spec.extra_censoring_rate > 0.0) {
      const double c = -std::log(rng.uniform_pos()) / spec.extra_censoring_rate;
      censor_time = std::min(censor_time, c);
    }

    cohort.data.times[i] = std::min(event_time, censor_time);
    cohort.data.events[static_cast<std::size_t>(i)] =
        (event_time <= censor_time) ? 1 : 0;
  }
  return cohort;
}

Eigen::VectorXd GeneratorSpec::default_active_beta() {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(51);
  const double magnitudes[14] = {0.5, 0.45, 0.4,  0.35, 0.35, 0.3,  0.3,
                                 0.25, 0.25, 0.2, 0.2,  0.2,  0.15, 0.15};
  for (int k = 0; k < 14; ++k) {
    beta[k] = (k % 2 == 0 ? 1.0 : -1.0) * magnitudes[k];
  }
  return beta;
}

GeneratorSpec GeneratorSpec::default_cohort(std::uint64_t seed) {
  GeneratorSpec spec;
  spec.n = 2293;
  spec.p = 51;
  spec.risk_form = LinearRisk{default_active_beta()};
  spec.baseline = ExponentialBaseline{0.05};
  spec.censoring_horizon = 30.0;
  spec.extra_censoring_rate = 0.0;
  spec.seed = seed;
  return spec;
}

std::string GeneratorSpec::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  j["p"] = p;
  if (std::holds_alternative<LinearRisk>(risk_form)) {
    const auto& linear = std::get<LinearRisk>(risk_form);
    j["risk_form"]["type"] = "linear";
    j["risk_form"]["beta_true"] =
        std::vector<double>(linear.beta_true.data(),
                            linear.beta_true.data() + linear.beta_true.size());
  } else {
    const auto& quadratic = std::get<QuadraticRisk>(risk_form);
    j["risk_form"]["type"] = "quadratic";
    j["risk_form"]["weights"] =
        std::vector<double>(quadratic.weights.data(),
                            quadratic.weights.data() + quadratic.weights.size());
  }
  if (std::holds_alternative<ExponentialBaseline>(baseline)) {
    j["baseline"]["type"] = "exponential";
    j["baseline"]["lambda0"] = std::get<ExponentialBaseline>(baseline).lambda0;
  } else {
    j["baseline"]["type"] = "weibull";
    j["baseline"]["lambda0"] = std::get<WeibullBaseline>(baseline).lambda0;
    j["baseline"]["k"] = std::get<WeibullBaseline>(baseline).k;
  }
  j["censoring_horizon"] = censoring_horizon;
  j["extra_censoring_rate"] = extra_censoring_rate;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

GeneratorSpec GeneratorSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw HazardError(ErrorCode::InvalidArgument,
                      std::string("pipeline: invalid generator spec JSON: ") + e.what());
  }
  try {
    GeneratorSpec spec;
    spec.n = j.at("n").get<Eigen::Index>();
    spec.p = j.at("p").get<Eigen::Index>();
    const auto& risk = j.at("risk_form");
    const std::string risk_type = risk.at("type").get<std::string>();
    if (risk_type == "linear") {
      const auto values = risk.at("beta_true").get<std::vector<double>>();
      LinearRisk linear;
      linear.beta_true =
          Eigen::Map<const Eigen::VectorXd>(values.data(),
                                            static_cast<Eigen::Index>(values.size()));
      spec.risk_form = std::move(linear);
    } else if (risk_type == "quadratic") {
      const auto values = risk.at("weights").get<std::vector<double>>();
      QuadraticRisk quadratic;
      quadratic.weights =
          Eigen::Map<const Eigen::VectorXd>(values.data(),
                                            static_cast<Eigen::Index>(values.size()));
      spec.risk_form = std::move(quadratic);
    } else {
      throw HazardError(ErrorCode::InvalidArgument,
                        "pipeline: unknown risk_form type '" + risk_type + "'");
    }
    const auto& base = j.at("baseline");
    const std::string base_type = base.at("type").get<std::string>();
    if (base_type == "exponential") {
      spec.baseline = ExponentialBaseline{base.at("lambda0").get<double>()};
    } else if (base_type == "weibull") {
      spec.baseline = WeibullBaseline{base.at("lambda0").get<double>(),
                                      base.at("k").get<double>()};
    } else {
      throw HazardError(ErrorCode::InvalidArgument,
                        "pipeline: unknown baseline type '" + base_type + "'");
    }
    spec.censoring_horizon = j.at("censoring_horizon").get<double>();
    spec.extra_censoring_rate = j.at("extra_censoring_rate").get<double>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw HazardError(ErrorCode::InvalidArgument,
                      std::string("pipeline: generator spec missing field: ") + e.what());
  }
}

std::string cohort_to_csv(const SurvivalDataset& data) {
  std::string out = "time,event";
  for (const auto& name : data.variable_names) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    out += detail::format_double(data.times[i]);
    out += ',';
    out += data.events[static_cast<std::size_t>(i)] ? '1' : '0';
    for (Eigen::Index j = 0; j < data.p(); ++j) {
      out += ',';
      out += detail::format_double(data.covariates(i, j));
    }
    out += '\n';
  }
  return out;
}

SurvivalDataset cohort_from_csv(const std::string& text, const std::string& time_column,
                                const std::string& event_column,
                                ImputeStrategy strategy) {
  return to_dataset(impute(load_csv(text, time_column, event_column), strategy));
}

}  // namespace hazardbench
