#include "hazardbench/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hazardbench/cox.hpp"
#include "hazardbench/dataset.hpp"
#include "hazardbench/deepsurv.hpp"
#include "hazardbench/ensemble.hpp"
#include "hazardbench/error.hpp"
#include "hazardbench/log.hpp"
#include "hazardbench/metrics.hpp"
#include "hazardbench/pipeline.hpp"
#include "hazardbench/screening.hpp"
#include "text_io.hpp"

namespace hazardbench {

namespace {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw HazardError(ErrorCode::InvalidArgument, "cli: cannot open '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw HazardError(ErrorCode::InvalidArgument,
                      "cli: cannot write '" + path.string() + "'");
  }
  out << content;
  log_info("wrote " + path.string());
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw HazardError(ErrorCode::InvalidArgument,
                      "cli: output directory '" + out + "' is not writable");
  }
  return dir;
}

// Options shared by every data-consuming subcommand.
struct DataOptions {
  std::string input;
  std::string time_col = "time";
  std::string event_col = "event";
  std::string impute_strategy = "case-deletion";
};

void add_data_options(CLI::App* cmd, DataOptions& options) {
  cmd->add_option("--input", options.input, "input cohort CSV")->required();
  cmd->add_option("--time-col", options.time_col, "name of the follow-up time column");
  cmd->add_option("--event-col", options.event_col, "name of the event column");
  cmd->add_option("--impute", options.impute_strategy,
                  "missing-data strategy: case-deletion or conditional-mean");
}

SurvivalDataset load_cohort(const DataOptions& options) {
  const RawTable raw =
      load_csv_file(options.input, options.time_col, options.event_col);
  const RawTable complete =
      impute(raw, impute_strategy_from_name(options.impute_strategy));
  SurvivalDataset data = to_dataset(complete);
  log_info("loaded " + std::to_string(data.n()) + " subjects, " +
           std::to_string(data.p()) + " variables, " +
           std::to_string(data.n_events()) + " events from " + options.input);
  return data;
}

struct TrainOptions {
  double split_fraction = 0.8;
  std::uint64_t seed = 0;
  int epochs = 10000;
  double learning_rate = 1e-3;
  double l2_penalty = 1e-4;
  std::vector<Eigen::Index> hidden = {32, 32};

  TrainConfig to_config() const {
    TrainConfig config;
    config.n_epochs = epochs;
    config.learning_rate = learning_rate;
    config.l2_penalty = l2_penalty;
    config.hidden_sizes = hidden;
    config.seed = seed;
    return config;
  }
};

void add_train_options(CLI::App* cmd, TrainOptions& options) {
  cmd->add_option("--split", options.split_fraction, "training fraction (default 0.8)");
  cmd->add_option("--seed", options.seed, "seed for splitting and initialization");
  cmd->add_option("--epochs", options.epochs, "training epochs");
  cmd->add_option("--lr", options.learning_rate, "learning rate");
  cmd->add_option("--l2", options.l2_penalty, "L2 penalty on weights");
  cmd->add_option("--hidden", options.hidden, "hidden layer sizes, e.g. 32,32")
      ->delimiter(',');
}

int dispatch(CLI::App& app, const std::vector<std::string>& args) {
  // CLI11 wants argv-style reversed arguments
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return 1;
  } catch (const HazardError& e) {
    log_error(e.what());
    return e.numerical() ? 2 : 1;
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"survival modeling toolbench: Cox regression, DeepSurv-style "
               "risk networks, screening, ensembles and evaluation"};
  app.require_subcommand(1);

  std::string out_dir = ".";

  // simulate ------------------------------------------------------------
  auto* simulate_cmd =
      app.add_subcommand("simulate", "generate a synthetic cohort CSV from a "
                                     "generator spec JSON");
  std::string simulate_spec_path;
  bool simulate_default = false;
  std::uint64_t simulate_seed = 0;
  bool simulate_seed_set = false;
  simulate_cmd->add_option("--input", simulate_spec_path, "generator spec JSON");
  simulate_cmd->add_flag("--default-cohort", simulate_default,
                         "use the built-in 2293x51 demonstration cohort");
  simulate_cmd
      ->add_option("--seed", simulate_seed, "override the spec's seed")
      ->each([&](const std::string&) { simulate_seed_set = true; });
  simulate_cmd->add_option("--out", out_dir, "output directory")->required();
  simulate_cmd->callback([&] {
    GeneratorSpec spec;
    if (simulate_default) {
      spec = GeneratorSpec::default_cohort(simulate_seed_set ? simulate_seed : 0);
    } else if (!simulate_spec_path.empty()) {
      spec = GeneratorSpec::from_json(read_file(simulate_spec_path));
      if (simulate_seed_set) spec.seed = simulate_seed;
    } else {
      throw HazardError(ErrorCode::InvalidArgument,
                        "cli: simulate needs --input or --default-cohort");
    }
    const fs::path dir = prepare_out_dir(out_dir);
    const SyntheticCohort cohort = generate_synthetic(spec);
    write_file(dir / "cohort.csv", cohort_to_csv(cohort.data));
    std::string truth = "true_log_risk\n";
    for (Eigen::Index i = 0; i < cohort.true_log_risk.size(); ++i) {
      truth += detail::format_double(cohort.true_log_risk[i]);
      truth += '\n';
    }
    write_file(dir / "true_risk.csv", truth);
    write_file(dir / "generator_spec.json", spec.to_json());
  });

  // screen ---------------------------------------------------------------
  auto* screen_cmd = app.add_subcommand(
      "screen", "univariate screen plus multivariate refit (risk-factor table)");
  DataOptions screen_data;
  add_data_options(screen_cmd, screen_data);
  double screen_alpha = 0.05;
  std::string screen_tie = "breslow";
  screen_cmd->add_option("--alpha", screen_alpha, "significance gate (default 0.05)");
  screen_cmd->add_option("--tie", screen_tie, "tie handling: breslow or efron");
  screen_cmd->add_option("--out", out_dir, "output directory")->required();
  screen_cmd->callback([&] {
    const SurvivalDataset data = load_cohort(screen_data);
    CoxConfig config;
    config.tie_method = tie_method_from_name(screen_tie);
    ScreeningReport report = univariate_screen(data, screen_alpha, config);
    const std::size_t n_selected = report.selected_names().size();
    log_info("selected " + std::to_string(n_selected) + " of " +
             std::to_string(report.rows.size()) + " variables at alpha " +
             detail::format_double(screen_alpha));
    if (n_selected > 0) {
      report = multivariate_refit(data, report, config).first;
    } else {
      log_warn("no variables selected; multivariate columns stay empty");
    }
    const fs::path dir = prepare_out_dir(out_dir);
    write_file(dir / "screening.json", report.to_json());
    write_file(dir / "screening.csv", report.to_csv());
  });

  // fit-cox ---------------------------------------------------------------
  auto* fitcox_cmd = app.add_subcommand(
      "fit-cox", "multivariate Cox fit with baseline hazard");
  DataOptions fitcox_data;
  add_data_options(fitcox_cmd, fitcox_data);
  std::string fitcox_tie = "breslow";
  fitcox_cmd->add_option("--tie", fitcox_tie, "tie handling: breslow or efron");
  fitcox_cmd->add_option("--out", out_dir, "output directory")->required();
  fitcox_cmd->callback([&] {
    const SurvivalDataset data = load_cohort(fitcox_data);
    CoxConfig config;
    config.tie_method = tie_method_from_name(fitcox_tie);
    const CoxFit fit = fit_cox(data, config);
    if (!fit.converged) {
      log_warn("cox fit did not converge after " + std::to_string(fit.iterations) +
               " iterations");
    }
    const BaselineHazard baseline = breslow_baseline(data, fit);
    const fs::path dir = prepare_out_dir(out_dir);
    write_file(dir / "cox_fit.json", fit.to_json());
    write_file(dir / "baseline_hazard.csv", baseline.to_csv());
  });

  // fit-deepsurv ------------------------------------------------------------
  auto* fitnet_cmd = app.add_subcommand(
      "fit-deepsurv", "train the neural risk model on a train/validation split");
  DataOptions fitnet_data;
  add_data_options(fitnet_cmd, fitnet_data);
  TrainOptions fitnet_train;
  add_train_options(fitnet_cmd, fitnet_train);
  fitnet_cmd->add_option("--out", out_dir, "output directory")->required();
  fitnet_cmd->callback([&] {
    const SurvivalDataset data = load_cohort(fitnet_data);
    auto [train_data, val_data] =
        split(data, fitnet_train.split_fraction, fitnet_train.seed);
    const StandardizeResult train_std = standardize(train_data);
    const StandardizeResult val_std = standardize(val_data, train_std.stats);
    auto [network, trace] =
        train(train_std.data, val_std.data, fitnet_train.to_config());
    const fs::path dir = prepare_out_dir(out_dir);
    write_file(dir / "network.json", network.to_json());
    write_file(dir / "trace.csv", trace.to_csv());
  });

  // ensemble ------------------------------------------------------------
  auto* ensemble_cmd = app.add_subcommand(
      "ensemble", "screen, fit Cox and the risk network, evaluate both splits");
  DataOptions ensemble_data;
  add_data_options(ensemble_cmd, ensemble_data);
  TrainOptions ensemble_train;
  add_train_options(ensemble_cmd, ensemble_train);
  double ensemble_alpha = 0.05;
  std::string ensemble_mode = "pipeline";
  ensemble_cmd->add_option("--alpha", ensemble_alpha, "screening gate");
  ensemble_cmd->add_option("--mode", ensemble_mode,
                           "combination rule: pipeline or average");
  ensemble_cmd->add_option("--out", out_dir, "output directory")->required();
  ensemble_cmd->callback([&] {
    const SurvivalDataset data = load_cohort(ensemble_data);
    auto [train_data, val_data] =
        split(data, ensemble_train.split_fraction, ensemble_train.seed);
    const EnsembleFitResult result =
        fit_ensemble(train_data, val_data, ensemble_alpha,
                     ensemble_train.to_config(),
                     ensemble_mode_from_name(ensemble_mode));
    const EvaluationReport report = evaluate(result.model, train_data, val_data);
    const fs::path dir = prepare_out_dir(out_dir);
    write_file(dir / "ensemble.json", result.model.to_json());
    write_file(dir / "trace.csv", result.trace.to_csv());
    write_file(dir / "evaluation.json", report.to_json());
    write_file(dir / "evaluation.csv", report.to_csv());
    write_file(dir / "evaluation.txt", report.to_text());
  });

  // evaluate ------------------------------------------------------------
  auto* evaluate_cmd = app.add_subcommand(
      "evaluate", "score a saved ensemble bundle on a cohort");
  DataOptions evaluate_data;
  add_data_options(evaluate_cmd, evaluate_data);
  std::string bundle_path;
  double evaluate_split = 0.8;
  std::uint64_t evaluate_seed = 0;
  evaluate_cmd->add_option("--bundle", bundle_path, "ensemble bundle JSON")->required();
  evaluate_cmd->add_option("--split", evaluate_split, "training fraction");
  evaluate_cmd->add_option("--seed", evaluate_seed, "split seed");
  evaluate_cmd->add_option("--out", out_dir, "output directory")->required();
  evaluate_cmd->callback([&] {
    const SurvivalDataset data = load_cohort(evaluate_data);
    const EnsembleModel model = EnsembleModel::from_json(read_file(bundle_path));
    auto [train_data, val_data] = split(data, evaluate_split, evaluate_seed);
    const EvaluationReport report = evaluate(model, train_data, val_data);
    const fs::path dir = prepare_out_dir(out_dir);
    write_file(dir / "evaluation.json", report.to_json());
    write_file(dir / "evaluation.csv", report.to_csv());
    write_file(dir / "evaluation.txt", report.to_text());
  });

  // km ------------------------------------------------------------------
  auto* km_cmd = app.add_subcommand("km", "Kaplan-Meier curve of a cohort");
  DataOptions km_data;
  add_data_options(km_cmd, km_data);
  km_cmd->add_option("--out", out_dir, "output directory")->required();
  km_cmd->callback([&] {
    const SurvivalDataset data = load_cohort(km_data);
    const KaplanMeierCurve curve = kaplan_meier(data.times, data.events);
    const fs::path dir = prepare_out_dir(out_dir);
    write_file(dir / "km.csv", curve.to_csv());
  });

  // curves ----------------------------------------------------------------
  auto* curves_cmd = app.add_subcommand(
      "curves", "model survival curve for a covariate profile");
  std::string curves_fit_path;
  std::string curves_baseline_path;
  std::string curves_profile_path;
  curves_cmd->add_option("--fit", curves_fit_path, "cox_fit.json from fit-cox")
      ->required();
  curves_cmd
      ->add_option("--baseline", curves_baseline_path,
                   "baseline_hazard.csv from fit-cox")
      ->required();
  curves_cmd->add_option("--profile", curves_profile_path,
                         "JSON of {variable: value}; unlisted variables are 0");
  curves_cmd->add_option("--out", out_dir, "output directory")->required();
  curves_cmd->callback([&] {
    const CoxFit fit = CoxFit::from_json(read_file(curves_fit_path));
    const BaselineHazard baseline =
        BaselineHazard::from_csv(read_file(curves_baseline_path));
    Eigen::VectorXd x = Eigen::VectorXd::Zero(fit.beta.size());
    if (!curves_profile_path.empty()) {
      const nlohmann::json profile =
          nlohmann::json::parse(read_file(curves_profile_path));
      for (const auto& [name, value] : profile.items()) {
        const auto it = std::find(fit.variable_names.begin(),
                                  fit.variable_names.end(), name);
        if (it == fit.variable_names.end()) {
          throw HazardError(ErrorCode::UnknownVariable,
                            "cli: profile variable '" + name + "' not in the fit");
        }
        x[it - fit.variable_names.begin()] = value.get<double>();
      }
    }
    std::string csv = "time,survival\n";
    csv += "0,1\n";
    for (double t : baseline.event_times) {
      csv += detail::format_double(t);
      csv += ',';
      csv += detail::format_double(predict_survival(fit, baseline, x, t));
      csv += '\n';
    }
    const fs::path dir = prepare_out_dir(out_dir);
    write_file(dir / "survival_curve.csv", csv);
  });

  return dispatch(app, args);
}

}  // namespace hazardbench
