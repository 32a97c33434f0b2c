// fairsvm command-line front end.
//
// Exit codes: 0 success, 1 unexpected failure, 2 invalid input,
// 3 infeasible constraint level, 4 data integrity failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fairsvm/data.hpp"
#include "fairsvm/experiment.hpp"
#include "fairsvm/metrics.hpp"
#include "fairsvm/model_io.hpp"
#include "fairsvm/svm.hpp"

using namespace fairsvm;

namespace {

constexpr int kExitOk = 0, kExitFailure = 1, kExitInput = 2, kExitInfeasible = 3, kExitIntegrity = 4;

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("'" + path + "': " + e.what());
  }
}

// Writes to `path`, or stdout when it is empty or "-".
template <typename Fn>
void with_output(const std::string& path, Fn fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  fn(f);
}

// ---------------------------------------------------------------------------
// Experiment flags. Only flags given on the command line end up in the JSON
// object; the config file is applied on top of it.
// ---------------------------------------------------------------------------

struct ExperimentFlags {
  std::string config;
  std::string dataset, schema, data_dir, train_csv, test_csv, synthetic, output, kernel;
  double synthetic_scale = 1, synthetic_test_scale = 10, coef0 = 1, eo_epsilon = 0;
  double test_fraction = 0.3, accuracy_slack = 0.05;
  int degree = 3, folds = 5, runs = 1;
  long subsample = 0;
  unsigned workers = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> models, orientations, formats;
  std::vector<double> C, gamma, rho_sweep;
  bool undersample = false, no_accuracy_slack = false;
  std::vector<std::pair<std::string, CLI::Option*>> opts;

  void add(CLI::App* app) {
    app->add_option("--config", config, "JSON experiment config (overrides flags)")->check(CLI::ExistingFile);
    opts = {
        {"dataset", app->add_option("--dataset", dataset, "Dataset label used in reports")},
        {"schema", app->add_option("--schema", schema, "Dataset schema JSON")},
        {"data_dir", app->add_option("--data-dir", data_dir, "Directory with the raw files")},
        {"train_csv", app->add_option("--train-csv", train_csv, "Prepared training CSV")},
        {"test_csv", app->add_option("--test-csv", test_csv, "Prepared test CSV")},
        {"synthetic", app->add_option("--synthetic", synthetic, "Synthetic family (mistreatment)")},
        {"synthetic_scale", app->add_option("--synthetic-scale", synthetic_scale, "Training size multiplier")},
        {"synthetic_test_scale", app->add_option("--synthetic-test-scale", synthetic_test_scale, "Test size multiplier")},
        {"models", app->add_option("--models", models, "svm, svm_mt, ferm, combined")},
        {"kernel", app->add_option("--kernel", kernel, "rbf, linear or polynomial")},
        {"degree", app->add_option("--degree", degree, "Polynomial degree")},
        {"coef0", app->add_option("--coef0", coef0, "Polynomial offset")},
        {"C", app->add_option("--C", C, "C grid")},
        {"gamma", app->add_option("--gamma", gamma, "Kernel gamma grid")},
        {"rho_sweep", app->add_option("--rho-sweep", rho_sweep, "Minimum-separation levels")},
        {"orientations", app->add_option("--orientations", orientations, "a_minus_b, b_minus_a, auto")},
        {"eo_epsilon", app->add_option("--eo-epsilon", eo_epsilon, "Equal-opportunity tolerance")},
        {"folds", app->add_option("--folds", folds, "Cross-validation folds (0 disables)")},
        {"seed", app->add_option("--seed", seed, "Base seed (required unless the config lists seeds)")},
        {"runs", app->add_option("--runs", runs, "Number of seeded runs")},
        {"undersample", app->add_flag("--undersample", undersample, "Undersample the majority label")},
        {"subsample", app->add_option("--subsample", subsample, "Cap the training pool at this many samples")},
        {"test_fraction", app->add_option("--test-fraction", test_fraction, "Holdout fraction without a test file")},
        {"accuracy_slack", app->add_option("--accuracy-slack", accuracy_slack, "Accuracy slack for selection")},
        {"no_accuracy_slack", app->add_flag("--no-accuracy-slack", no_accuracy_slack, "Select on DFPR alone")},
        {"output", app->add_option("--output", output, "Output directory")},
        {"formats", app->add_option("--formats", formats, "csv, json, markdown")},
        {"workers", app->add_option("--workers", workers, "Parallel grid cells")},
    };
  }

  bool given(const std::string& key) const {
    for (const auto& [k, o] : opts) {
      if (k == key) return o->count() > 0;
    }
    return false;
  }

  ExperimentConfig resolve() const {
    nlohmann::json j = nlohmann::json::object();
    auto put = [&](const char* key, const auto& value) {
      if (given(key)) j[key] = value;
    };
    put("dataset", dataset);
    put("schema", schema);
    put("data_dir", data_dir);
    put("train_csv", train_csv);
    put("test_csv", test_csv);
    put("synthetic", synthetic);
    put("synthetic_scale", synthetic_scale);
    put("synthetic_test_scale", synthetic_test_scale);
    put("models", models);
    put("kernel", kernel);
    put("degree", degree);
    put("coef0", coef0);
    put("C", C);
    put("gamma", gamma);
    put("rho_sweep", rho_sweep);
    put("orientations", orientations);
    put("eo_epsilon", eo_epsilon);
    put("folds", folds);
    put("seed", seed);
    put("runs", runs);
    put("undersample", undersample);
    put("subsample", subsample);
    put("test_fraction", test_fraction);
    put("accuracy_slack", accuracy_slack);
    if (no_accuracy_slack) j["accuracy_slack"] = nullptr;
    put("output", output);
    put("formats", formats);
    put("workers", workers);
    ExperimentConfig cfg = config_from_json(j);
    if (!config.empty()) cfg = config_from_json(read_json_file(config), cfg);
    if (cfg.seeds.empty()) throw InputError("--seed is required (or list seeds in the config)");
    if (cfg.dataset.empty()) {
      if (!cfg.source.synthetic.empty()) cfg.dataset = cfg.source.synthetic;
      else if (!cfg.source.schema.empty()) cfg.dataset = load_schema(cfg.source.schema).name;
    }
    cfg.validate();
    return cfg;
  }
};

// ---------------------------------------------------------------------------
// Single-model training flags
// ---------------------------------------------------------------------------

struct TrainFlags {
  std::string config;
  std::string model = "svm", kernel = "rbf", orientation = "auto";
  double C = 1.0, gamma = 1.0, coef0 = 1.0, epsilon = 0.0;
  std::optional<double> rho;
  int degree = 3;
  CLI::Option *model_opt = nullptr, *kernel_opt = nullptr, *orientation_opt = nullptr,
              *C_opt = nullptr, *gamma_opt = nullptr, *coef0_opt = nullptr, *eps_opt = nullptr,
              *degree_opt = nullptr;

  void add(CLI::App* app) {
    app->add_option("--config", config, "JSON with model settings (overrides flags)")->check(CLI::ExistingFile);
    model_opt = app->add_option("--model", model, "svm, svm_mt, ferm or combined");
    kernel_opt = app->add_option("--kernel", kernel, "rbf, linear or polynomial");
    C_opt = app->add_option("--C", C, "Soft-margin penalty");
    gamma_opt = app->add_option("--gamma", gamma, "Kernel gamma");
    degree_opt = app->add_option("--degree", degree, "Polynomial degree");
    coef0_opt = app->add_option("--coef0", coef0, "Polynomial offset");
    app->add_option("--rho", rho, "Minimum separation level in (0, 1]");
    orientation_opt = app->add_option("--orientation", orientation, "auto, a_minus_b or b_minus_a");
    eps_opt = app->add_option("--epsilon", epsilon, "Equal-opportunity tolerance");
  }

  void apply_config() {
    if (config.empty()) return;
    const auto j = read_json_file(config);
    try {
      for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        const auto& v = it.value();
        if (k == "model") model = v.get<std::string>();
        else if (k == "kernel") kernel = v.get<std::string>();
        else if (k == "C") C = v.get<double>();
        else if (k == "gamma") gamma = v.get<double>();
        else if (k == "degree") degree = v.get<int>();
        else if (k == "coef0") coef0 = v.get<double>();
        else if (k == "rho") rho = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
        else if (k == "orientation") orientation = v.get<std::string>();
        else if (k == "epsilon" || k == "eo_epsilon") epsilon = v.get<double>();
        else throw InputError("train config: unknown key '" + k + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("train config: ") + e.what());
    }
  }

  std::pair<TrainConfig, FairnessSpec> resolve() {
    apply_config();
    const ModelKind kind = model_kind_from_string(model);
    TrainConfig tc;
    tc.C = C;
    const KernelFamily fam = kernel_family_from_string(kernel);
    tc.kernel = fam == KernelFamily::linear ? KernelSpec::linear()
                : fam == KernelFamily::rbf  ? KernelSpec::rbf(gamma)
                                            : KernelSpec::polynomial(degree, gamma, coef0);
    tc.orientation = orientation_from_string(orientation);
    FairnessSpec spec;
    if (uses_separation(kind)) {
      if (!rho) throw InputError("--rho is required for model " + model);
      spec.min_sep_rho = rho;
    } else if (rho) {
      throw InputError("--rho only applies to svm_mt and combined");
    }
    if (uses_opportunity(kind)) spec.eo_epsilon = epsilon;
    return {tc, spec};
  }
};

nlohmann::ordered_json model_summary(const TrainedModel& m) {
  nlohmann::ordered_json j;
  j["status"] = qp::to_string(m.status);
  j["objective"] = m.objective;
  j["bias"] = m.bias;
  j["support_vectors"] = m.support_vectors.rows();
  j["iterations"] = m.iterations;
  j["kkt_residual"] = m.kkt_residual;
  if (m.rho) {
    j["rho"] = *m.rho;
    j["orientation"] = to_string(m.orientation);
  }
  if (m.separation_value) j["separation_value"] = *m.separation_value;
  if (m.epsilon) j["epsilon"] = std::isfinite(*m.epsilon) ? nlohmann::ordered_json(*m.epsilon) : nlohmann::ordered_json("inf");
  if (m.opportunity_value) j["opportunity_value"] = *m.opportunity_value;
  j["solve_seconds"] = m.solve_seconds;
  j["gram_seconds"] = m.gram_seconds;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-constrained kernel SVMs: training, evaluation and experiment runs"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Verify raw files and write the preprocessed dataset");
  std::string p_schema, p_dir = "data/raw", p_out, p_test_out, p_report;
  bool p_record = false;
  prepare->add_option("--schema", p_schema, "Dataset schema JSON")->required()->check(CLI::ExistingFile);
  prepare->add_option("--data-dir", p_dir, "Directory with the raw files");
  prepare->add_option("--out", p_out, "Prepared training CSV");
  prepare->add_option("--test-out", p_test_out, "Prepared test CSV (schemas with a split)");
  prepare->add_option("--report", p_report, "Preprocessing report JSON (default: stdout)");
  prepare->add_flag("--record-checksums", p_record, "Store digests of files that have none in the schema");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one model on a prepared CSV");
  TrainFlags t_flags;
  std::string t_data, t_out;
  t_flags.add(train_cmd);
  train_cmd->add_option("--data", t_data, "Prepared CSV (label,group,features)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", t_out, "Model file")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a model file on a prepared CSV");
  std::string e_model, e_data, e_format = "json";
  eval_cmd->add_option("--model-file", e_model, "Model file written by train")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", e_data, "Prepared CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--format", e_format, "json or csv");

  // grid-search
  auto* grid_cmd = app.add_subcommand("grid-search", "Cross-validated hyperparameter search");
  ExperimentFlags g_flags;
  g_flags.add(grid_cmd);

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "Seeded runs with model selection and reports");
  ExperimentFlags x_flags;
  x_flags.add(exp_cmd);

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Solver timing of SVM, SVM-MT and FERM");
  BenchmarkConfig b;
  std::string b_data, b_format = "markdown", b_orientation = "b_minus_a", b_out;
  bench_cmd->add_option("--n", b.n, "Synthetic sample count");
  bench_cmd->add_option("--runs", b.runs, "Repetitions");
  bench_cmd->add_option("--seed", b.seed, "Base seed")->required();
  bench_cmd->add_option("--data", b_data, "Prepared CSV to time instead of synthetic data")->check(CLI::ExistingFile);
  bench_cmd->add_option("--C", b.C, "Soft-margin penalty");
  bench_cmd->add_option("--gamma", b.gamma, "RBF gamma");
  bench_cmd->add_option("--rho", b.rho, "Minimum separation level");
  bench_cmd->add_option("--epsilon", b.epsilon, "Equal-opportunity tolerance");
  bench_cmd->add_option("--orientation", b_orientation, "Separation orientation");
  bench_cmd->add_option("--format", b_format, "markdown or json");
  bench_cmd->add_option("--out", b_out, "Output file (default: stdout)");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Write a draw of the synthetic family as a prepared CSV");
  std::uint64_t s_seed = 0;
  double s_scale = 1.0;
  std::string s_out;
  synth_cmd->add_option("--seed", s_seed, "Seed")->required();
  synth_cmd->add_option("--scale", s_scale, "Size multiplier (1 gives n = 400)");
  synth_cmd->add_option("--out", s_out, "Output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*prepare) {
      if (p_record) {
        for (const auto& name : record_checksums(p_schema, p_dir)) {
          std::cerr << "recorded sha256 for " << name << '\n';
        }
      }
      const DatasetSchema schema = load_schema(p_schema);
      const LoadedData data = load_dataset(schema, p_dir);
      if (!p_out.empty()) write_dataset_csv(data.train, p_out);
      if (data.test) {
        if (!p_test_out.empty()) write_dataset_csv(*data.test, p_test_out);
        else if (!p_out.empty()) std::cerr << "note: schema has a test split; pass --test-out to write it\n";
      }
      with_output(p_report, [&](std::ostream& o) { o << data.report.to_json().dump(2) << '\n'; });
    } else if (*train_cmd) {
      auto [tc, spec] = t_flags.resolve();
      const GroupedDataset d = read_dataset_csv(t_data);
      const TrainedModel m = train(d, tc, spec);
      save_model(m, t_out);
      std::cout << model_summary(m).dump(2) << '\n';
      if (m.status != qp::QpStatus::optimal) {
        std::cerr << "warning: solver stopped with status " << qp::to_string(m.status) << '\n';
      }
    } else if (*eval_cmd) {
      const TrainedModel m = load_model(e_model);
      const GroupedDataset d = read_dataset_csv(e_data);
      const EvalReport r = evaluate(predict(m, d).labels, d);
      if (e_format == "csv") {
        std::cout << eval_report_csv_header() << '\n' << to_csv_row(r) << '\n';
      } else if (e_format == "json") {
        std::cout << to_json(r).dump(2) << '\n';
      } else {
        throw InputError("--format must be json or csv");
      }
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    } else if (*grid_cmd) {
      const ExperimentConfig cfg = g_flags.resolve();
      const LoadedSource src = load_source(cfg);
      const auto split = run_split(cfg, src, cfg.seeds.front());
      ExperimentResult res;
      nlohmann::ordered_json best = nlohmann::ordered_json::array();
      for (ModelKind m : cfg.models) {
        GridResult g = grid_search(split.first, cfg, m, derive_seed(cfg.seeds.front(), kSeedFolds));
        nlohmann::ordered_json e;
        e["model"] = to_string(m);
        e["C"] = g.best.C;
        e["gamma"] = g.best.gamma;
        e["rho"] = g.best.rho ? nlohmann::ordered_json(*g.best.rho) : nlohmann::ordered_json(nullptr);
        e["orientation"] = g.best.rho ? nlohmann::ordered_json(to_string(g.best.orientation)) : nlohmann::ordered_json(nullptr);
        for (const auto& s : g.scores) {
          if (s.candidate == g.best) {
            e["cv_dfpr"] = s.dfpr ? nlohmann::ordered_json(*s.dfpr) : nlohmann::ordered_json(nullptr);
            e["cv_precision"] = s.precision ? nlohmann::ordered_json(*s.precision) : nlohmann::ordered_json(nullptr);
            e["cv_accuracy"] = s.accuracy ? nlohmann::ordered_json(*s.accuracy) : nlohmann::ordered_json(nullptr);
          }
        }
        e["warnings"] = g.warnings;
        best.push_back(e);
        res.searches.push_back({m, 0, std::move(g)});
      }
      if (!cfg.output.empty()) {
        std::filesystem::create_directories(cfg.output);
        with_output((std::filesystem::path(cfg.output) / "trace.csv").string(),
                    [&](std::ostream& o) { write_trace_csv(res, o); });
        with_output((std::filesystem::path(cfg.output) / "best.json").string(),
                    [&](std::ostream& o) { o << best.dump(2) << '\n'; });
      }
      std::cout << best.dump(2) << '\n';
    } else if (*exp_cmd) {
      const ExperimentConfig cfg = x_flags.resolve();
      const ExperimentResult res = run_experiment(cfg);
      if (!cfg.output.empty()) {
        for (const auto& p : write_reports(res, cfg)) std::cerr << "wrote " << p << '\n';
      }
      emit_report(res.rows, ReportFormat::markdown, std::cout);
      for (const auto& n : res.notes) std::cerr << "note: " << n << '\n';
    } else if (*bench_cmd) {
      b.orientation = orientation_from_string(b_orientation);
      if (b_format != "markdown" && b_format != "json") throw InputError("--format must be markdown or json");
      std::optional<GroupedDataset> fixed;
      if (!b_data.empty()) fixed = read_dataset_csv(b_data);
      const BenchmarkResult r = run_benchmark(b, fixed, b_data.empty() ? "mistreatment family" : b_data);
      with_output(b_out, [&](std::ostream& o) {
        if (b_format == "json") o << to_json(r).dump(2) << '\n';
        else print_benchmark_markdown(r, o);
      });
    } else if (*synth_cmd) {
      const GroupedDataset d = mistreatment_family(s_seed, s_scale);
      with_output(s_out, [&](std::ostream& o) { write_dataset_csv(d, o); });
    }
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const DataIntegrityError& e) {
    std::cerr << "data integrity: " << e.what() << '\n';
    return kExitIntegrity;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}
