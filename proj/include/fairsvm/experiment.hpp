#pragma once

// Cross-validated hyperparameter search, repeated seeded experiment runs and
// report emission (CSV, JSON, Markdown).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairsvm/data.hpp"
#include "fairsvm/error.hpp"
#include "fairsvm/metrics.hpp"
#include "fairsvm/random.hpp"
#include "fairsvm/svm.hpp"

namespace fairsvm {

enum class ModelKind { svm, svm_mt, ferm, combined };

inline const char* to_string(ModelKind m) {
  switch (m) {
    case ModelKind::svm: return "svm";
    case ModelKind::svm_mt: return "svm_mt";
    case ModelKind::ferm: return "ferm";
    case ModelKind::combined: return "combined";
  }
  return "unknown";
}

inline const char* display_name(ModelKind m) {
  switch (m) {
    case ModelKind::svm: return "SVM";
    case ModelKind::svm_mt: return "SVM-MT";
    case ModelKind::ferm: return "FERM";
    case ModelKind::combined: return "SVM-MT+EO";
  }
  return "unknown";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "svm") return ModelKind::svm;
  if (s == "svm_mt" || s == "svm-mt") return ModelKind::svm_mt;
  if (s == "ferm") return ModelKind::ferm;
  if (s == "combined") return ModelKind::combined;
  throw InputError("unknown model '" + s + "' (expected svm, svm_mt, ferm or combined)");
}

inline bool uses_separation(ModelKind m) { return m == ModelKind::svm_mt || m == ModelKind::combined; }
inline bool uses_opportunity(ModelKind m) { return m == ModelKind::ferm || m == ModelKind::combined; }

enum class ReportFormat { csv, json, markdown };

inline const char* to_string(ReportFormat f) {
  switch (f) {
    case ReportFormat::csv: return "csv";
    case ReportFormat::json: return "json";
    case ReportFormat::markdown: return "markdown";
  }
  return "unknown";
}

inline ReportFormat report_format_from_string(const std::string& s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  throw InputError("unknown report format '" + s + "'");
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Where the samples come from. Exactly one of schema, train_csv or synthetic
/// is set.
struct DataSource {
  std::string schema;                 // schema JSON; raw files are read from data_dir
  std::string data_dir = "data/raw";
  std::string train_csv;              // prepared label,group,features file
  std::string test_csv;               // optional companion of train_csv
  std::string synthetic;              // "mistreatment"
  double synthetic_scale = 1.0;
  double synthetic_test_scale = 10.0;
};

struct ExperimentConfig {
  std::string dataset;
  DataSource source;
  std::vector<ModelKind> models = {ModelKind::svm, ModelKind::svm_mt, ModelKind::ferm};
  KernelFamily kernel = KernelFamily::rbf;
  int degree = 3;
  double coef0 = 1.0;
  std::vector<double> C_grid = {0.01, 0.1, 1, 10, 100, 1000};
  std::vector<double> gamma_grid = {0.001, 0.01, 0.1, 1, 10};
  std::vector<double> rho_sweep = {0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<Orientation> orientations = {Orientation::a_minus_b, Orientation::b_minus_a};
  double eo_epsilon = 0.0;
  int folds = 5;  // 0 disables cross-validation (single candidate only)
  std::vector<std::uint64_t> seeds;
  bool undersample = false;
  std::optional<Index> subsample;  // stratified cap on the training pool
  double test_fraction = 0.3;      // used when the source has no test split
  std::optional<double> accuracy_slack = 0.05;
  std::string output;
  std::vector<ReportFormat> formats = {ReportFormat::csv, ReportFormat::json,
                                       ReportFormat::markdown};
  unsigned workers = 1;

  int runs() const { return static_cast<int>(seeds.size()); }

  KernelSpec kernel_spec(double gamma) const {
    KernelSpec k;
    k.family = kernel;
    k.gamma = kernel == KernelFamily::linear ? 1.0 : gamma;
    k.degree = kernel == KernelFamily::polynomial ? degree : 1;
    k.coef0 = kernel == KernelFamily::polynomial ? coef0 : 0.0;
    return k;
  }

  void validate() const {
    if (dataset.empty()) throw InputError("config: dataset name is required");
    if (dataset.find_first_of(",\"\n\r") != std::string::npos) {
      throw InputError("config: dataset name may not contain commas, quotes or newlines");
    }
    const int sources = !source.schema.empty() + !source.train_csv.empty() + !source.synthetic.empty();
    if (sources != 1) throw InputError("config: set exactly one of schema, train_csv or synthetic");
    if (!source.synthetic.empty() && source.synthetic != "mistreatment") {
      throw InputError("config: unknown synthetic family '" + source.synthetic + "'");
    }
    if (!source.synthetic.empty() && !(source.synthetic_scale > 0 && source.synthetic_test_scale > 0)) {
      throw InputError("config: synthetic scales must be positive");
    }
    if (models.empty()) throw InputError("config: no models");
    if (C_grid.empty() || gamma_grid.empty()) throw InputError("config: grids must be nonempty");
    for (double c : C_grid) {
      if (!(c > 0 && std::isfinite(c))) throw InputError("config: C values must be positive");
    }
    for (double g : gamma_grid) {
      if (!(g > 0 && std::isfinite(g))) throw InputError("config: gamma values must be positive");
    }
    const bool needs_rho = std::any_of(models.begin(), models.end(), uses_separation);
    if (needs_rho) {
      if (rho_sweep.empty()) throw InputError("config: rho_sweep must be nonempty");
      if (orientations.empty()) throw InputError("config: orientations must be nonempty");
    }
    for (double r : rho_sweep) {
      if (!(r > 0 && r <= 1)) throw InputError("config: rho values must lie in (0, 1]");
    }
    if (!(eo_epsilon >= 0)) throw InputError("config: eo_epsilon must be >= 0");
    if (folds == 1 || folds < 0) throw InputError("config: folds must be 0 or at least 2");
    if (seeds.empty()) throw InputError("config: at least one seed is required");
    if (subsample && *subsample < 8) throw InputError("config: subsample must be at least 8");
    if (!(test_fraction > 0 && test_fraction < 1)) throw InputError("config: test_fraction must lie in (0, 1)");
    if (accuracy_slack && !(*accuracy_slack >= 0)) throw InputError("config: accuracy_slack must be >= 0");
    if (formats.empty()) throw InputError("config: no report formats");
    kernel_spec(gamma_grid.front()).validate();
  }
};

namespace detail {

template <typename T>
std::vector<T> json_list(const nlohmann::json& v, const char* key) {
  if (!v.is_array()) throw InputError(std::string("config: '") + key + "' must be a list");
  std::vector<T> out;
  for (const auto& e : v) out.push_back(e.get<T>());
  return out;
}

}  // namespace detail

/// Applies the keys present in `j` on top of `base`. Unknown keys are errors.
inline ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {}) {
  if (!j.is_object()) throw InputError("config: top level must be an object");
  ExperimentConfig c = std::move(base);
  std::optional<int> runs;
  std::optional<std::uint64_t> seed;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const auto& v = it.value();
      if (k == "dataset") c.dataset = v.get<std::string>();
      else if (k == "schema") c.source.schema = v.get<std::string>();
      else if (k == "data_dir") c.source.data_dir = v.get<std::string>();
      else if (k == "train_csv") c.source.train_csv = v.get<std::string>();
      else if (k == "test_csv") c.source.test_csv = v.get<std::string>();
      else if (k == "synthetic") c.source.synthetic = v.get<std::string>();
      else if (k == "synthetic_scale") c.source.synthetic_scale = v.get<double>();
      else if (k == "synthetic_test_scale") c.source.synthetic_test_scale = v.get<double>();
      else if (k == "models" || k == "model") {
        c.models.clear();
        if (v.is_string()) {
          c.models.push_back(model_kind_from_string(v.get<std::string>()));
        } else {
          for (const auto& m : detail::json_list<std::string>(v, "models")) c.models.push_back(model_kind_from_string(m));
        }
      } else if (k == "kernel") c.kernel = kernel_family_from_string(v.get<std::string>());
      else if (k == "degree") c.degree = v.get<int>();
      else if (k == "coef0") c.coef0 = v.get<double>();
      else if (k == "C") c.C_grid = detail::json_list<double>(v, "C");
      else if (k == "gamma") c.gamma_grid = detail::json_list<double>(v, "gamma");
      else if (k == "rho_sweep") c.rho_sweep = detail::json_list<double>(v, "rho_sweep");
      else if (k == "orientations") {
        c.orientations.clear();
        for (const auto& o : detail::json_list<std::string>(v, "orientations")) c.orientations.push_back(orientation_from_string(o));
      } else if (k == "eo_epsilon") c.eo_epsilon = v.get<double>();
      else if (k == "folds") c.folds = v.get<int>();
      else if (k == "seeds") c.seeds = detail::json_list<std::uint64_t>(v, "seeds");
      else if (k == "seed") seed = v.get<std::uint64_t>();
      else if (k == "runs") runs = v.get<int>();
      else if (k == "undersample") c.undersample = v.get<bool>();
      else if (k == "subsample") {
        if (v.is_null()) c.subsample.reset();
        else c.subsample = v.get<Index>();
      } else if (k == "test_fraction") c.test_fraction = v.get<double>();
      else if (k == "accuracy_slack") {
        if (v.is_null()) c.accuracy_slack.reset();
        else c.accuracy_slack = v.get<double>();
      } else if (k == "output") c.output = v.get<std::string>();
      else if (k == "formats") {
        c.formats.clear();
        for (const auto& f : detail::json_list<std::string>(v, "formats")) c.formats.push_back(report_format_from_string(f));
      } else if (k == "workers") c.workers = v.get<unsigned>();
      else throw InputError("config: unknown key '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  if (!seed && runs && !j.contains("seeds") && !c.seeds.empty()) seed = c.seeds.front();
  if (seed) {
    // A base seed expands to consecutive run seeds.
    const int n = runs.value_or(c.seeds.empty() ? 1 : c.runs());
    c.seeds.clear();
    for (int r = 0; r < n; ++r) c.seeds.push_back(*seed + static_cast<std::uint64_t>(r));
  }
  if (runs && *runs != c.runs()) {
    throw InputError("config: runs = " + std::to_string(*runs) + " but " +
                     std::to_string(c.runs()) + " seeds are listed");
  }
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config '" + path + "': " + e.what());
  }
  return config_from_json(j, std::move(base));
}

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["dataset"] = c.dataset;
  if (!c.source.schema.empty()) {
    j["schema"] = c.source.schema;
    j["data_dir"] = c.source.data_dir;
  }
  if (!c.source.train_csv.empty()) j["train_csv"] = c.source.train_csv;
  if (!c.source.test_csv.empty()) j["test_csv"] = c.source.test_csv;
  if (!c.source.synthetic.empty()) {
    j["synthetic"] = c.source.synthetic;
    j["synthetic_scale"] = c.source.synthetic_scale;
    j["synthetic_test_scale"] = c.source.synthetic_test_scale;
  }
  j["models"] = nlohmann::ordered_json::array();
  for (auto m : c.models) j["models"].push_back(to_string(m));
  j["kernel"] = to_string(c.kernel);
  if (c.kernel == KernelFamily::polynomial) {
    j["degree"] = c.degree;
    j["coef0"] = c.coef0;
  }
  j["C"] = c.C_grid;
  j["gamma"] = c.gamma_grid;
  j["rho_sweep"] = c.rho_sweep;
  j["orientations"] = nlohmann::ordered_json::array();
  for (auto o : c.orientations) j["orientations"].push_back(to_string(o));
  j["eo_epsilon"] = c.eo_epsilon;
  j["folds"] = c.folds;
  j["seeds"] = c.seeds;
  j["runs"] = c.runs();
  j["undersample"] = c.undersample;
  j["subsample"] = c.subsample ? nlohmann::ordered_json(*c.subsample) : nlohmann::ordered_json(nullptr);
  j["test_fraction"] = c.test_fraction;
  j["accuracy_slack"] = c.accuracy_slack ? nlohmann::ordered_json(*c.accuracy_slack) : nlohmann::ordered_json(nullptr);
  j["output"] = c.output;
  j["formats"] = nlohmann::ordered_json::array();
  for (auto f : c.formats) j["formats"].push_back(to_string(f));
  j["workers"] = c.workers;
  return j;
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

struct Candidate {
  double C = 1.0;
  double gamma = 1.0;
  std::optional<double> rho;
  Orientation orientation = Orientation::automatic;

  bool operator==(const Candidate&) const = default;
};

/// Candidates in trace order: rho, orientation, C, gamma.
inline std::vector<Candidate> candidates(const ExperimentConfig& cfg, ModelKind model) {
  std::vector<Candidate> out;
  std::vector<std::optional<double>> rhos;
  std::vector<Orientation> orients;
  if (uses_separation(model)) {
    rhos.assign(cfg.rho_sweep.begin(), cfg.rho_sweep.end());
    orients = cfg.orientations;
  } else {
    rhos = {std::nullopt};
    orients = {Orientation::automatic};
  }
  const std::vector<double> gammas =
      cfg.kernel == KernelFamily::linear ? std::vector<double>{1.0} : cfg.gamma_grid;
  for (const auto& r : rhos)
    for (auto o : orients)
      for (double c : cfg.C_grid)
        for (double g : gammas) out.push_back({c, g, r, o});
  return out;
}

/// Trains `model` with the hyperparameters of `cand`.
inline TrainedModel train_candidate(const GroupedDataset& d, const ExperimentConfig& cfg,
                                    ModelKind model, const Candidate& cand,
                                    const Eigen::MatrixXd* gram = nullptr) {
  TrainConfig tc;
  tc.C = cand.C;
  tc.kernel = cfg.kernel_spec(cand.gamma);
  tc.orientation = cand.orientation;
  tc.workers = 1;
  FairnessSpec spec;
  if (uses_separation(model)) spec.min_sep_rho = cand.rho;
  if (uses_opportunity(model)) spec.eo_epsilon = cfg.eo_epsilon;
  return train(d, tc, spec, gram);
}

struct TraceEntry {
  Candidate candidate;
  int fold = 0;
  bool ok = false;
  std::string error;
  EvalReport report;
  double solve_seconds = 0.0;
  double gram_seconds = 0.0;
};

struct CandidateScore {
  Candidate candidate;
  int folds_ok = 0;
  std::optional<double> dfpr, precision, accuracy;  // fold means over defined values
  bool eligible = false;
};

struct GridResult {
  Candidate best;
  std::vector<TraceEntry> trace;
  std::vector<CandidateScore> scores;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::optional<double> mean_defined(const std::vector<std::optional<double>>& v) {
  double sum = 0.0;
  int n = 0;
  for (const auto& x : v) {
    if (x) {
      sum += *x;
      ++n;
    }
  }
  return n ? std::optional<double>(sum / n) : std::nullopt;
}

// Selection order: lower DFPR, higher precision, smaller C, then the remaining
// fields in a fixed order so the choice never depends on evaluation order.
inline bool better(const CandidateScore& x, const CandidateScore& y) {
  if (*x.dfpr != *y.dfpr) return *x.dfpr < *y.dfpr;
  const double px = x.precision.value_or(-1.0), py = y.precision.value_or(-1.0);
  if (px != py) return px > py;
  if (x.candidate.C != y.candidate.C) return x.candidate.C < y.candidate.C;
  if (x.candidate.gamma != y.candidate.gamma) return x.candidate.gamma < y.candidate.gamma;
  const double rx = x.candidate.rho.value_or(0.0), ry = y.candidate.rho.value_or(0.0);
  if (rx != ry) return rx < ry;
  return static_cast<int>(x.candidate.orientation) < static_cast<int>(y.candidate.orientation);
}

template <typename Body>
void parallel_for(std::size_t count, unsigned workers, Body body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(1, count))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// Picks the best scored candidate. Candidates with a failed fold or undefined
/// mean DFPR are ineligible; with an accuracy slack, candidates whose mean
/// accuracy trails the best by more than the slack are dropped first.
inline void select_candidate(GridResult& g, const std::optional<double>& accuracy_slack) {
  double best_acc = -1.0;
  for (auto& s : g.scores) {
    if (s.eligible) best_acc = std::max(best_acc, s.accuracy.value_or(-1.0));
  }
  const CandidateScore* best = nullptr;
  for (auto& s : g.scores) {
    if (!s.eligible) continue;
    if (accuracy_slack && s.accuracy.value_or(-1.0) < best_acc - *accuracy_slack) continue;
    if (best == nullptr || detail::better(s, *best)) best = &s;
  }
  if (best == nullptr) throw DegenerateProblemError("grid search: no candidate could be evaluated");
  g.best = best->candidate;
}

/// k-fold cross-validated search over the candidates of `model`. Every
/// (candidate, fold) cell is trained and scored on the fold's validation part.
/// One Gram matrix per (fold, gamma) is shared by all cells using it.
inline GridResult grid_search(const GroupedDataset& train_set, const ExperimentConfig& cfg,
                              ModelKind model, std::uint64_t seed) {
  cfg.validate();
  GridResult g;
  const auto cands = candidates(cfg, model);
  if (cfg.folds == 0) {
    if (cands.size() != 1) throw InputError("grid search without folds needs a single candidate");
    g.best = cands.front();
    g.scores.push_back({cands.front(), 0, std::nullopt, std::nullopt, std::nullopt, true});
    return g;
  }
  const auto folds = make_folds(train_set, cfg.folds, seed);
  std::vector<double> gammas;
  for (const auto& c : cands) {
    if (std::find(gammas.begin(), gammas.end(), c.gamma) == gammas.end()) gammas.push_back(c.gamma);
  }
  const std::size_t nf = folds.size();
  g.trace.resize(cands.size() * nf);

  // One task per (fold, gamma).
  detail::parallel_for(nf * gammas.size(), cfg.workers, [&](std::size_t task) {
    const std::size_t f = task / gammas.size();
    const double gamma = gammas[task % gammas.size()];
    const GroupedDataset tr = train_set.subset(folds[f].train);
    const GroupedDataset va = train_set.subset(folds[f].validation);
    const KernelSpec ks = cfg.kernel_spec(gamma);
    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::MatrixXd K = gram(ks, tr.x, 1u);
    const Eigen::MatrixXd cross = gram(ks, va.x, tr.x, 1u);
    const double gram_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (std::size_t ci = 0; ci < cands.size(); ++ci) {
      if (cands[ci].gamma != gamma) continue;
      TraceEntry& e = g.trace[ci * nf + f];
      e.candidate = cands[ci];
      e.fold = static_cast<int>(f);
      e.gram_seconds = gram_seconds;
      try {
        const TrainedModel m = train_candidate(tr, cfg, model, cands[ci], &K);
        e.solve_seconds = m.solve_seconds;
        if (m.status != qp::QpStatus::optimal) {
          e.error = std::string("solver stopped: ") + qp::to_string(m.status);
        } else {
          e.report = evaluate(predict_from_gram(m, cross).labels, va);
          e.ok = true;
        }
      } catch (const std::exception& ex) {
        e.error = ex.what();
      }
    }
  });

  for (std::size_t ci = 0; ci < cands.size(); ++ci) {
    CandidateScore s;
    s.candidate = cands[ci];
    std::vector<std::optional<double>> dfpr, prec, acc;
    for (std::size_t f = 0; f < nf; ++f) {
      const TraceEntry& e = g.trace[ci * nf + f];
      if (!e.ok) continue;
      ++s.folds_ok;
      dfpr.push_back(e.report.dfpr);
      prec.push_back(e.report.precision);
      acc.push_back(e.report.accuracy);
    }
    s.dfpr = detail::mean_defined(dfpr);
    s.precision = detail::mean_defined(prec);
    s.accuracy = detail::mean_defined(acc);
    s.eligible = s.folds_ok == static_cast<int>(nf) && s.dfpr.has_value();
    if (s.folds_ok < static_cast<int>(nf)) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s candidate C=%g gamma=%g%s excluded: %d of %zu folds failed",
                    to_string(model), s.candidate.C, s.candidate.gamma,
                    s.candidate.rho ? (" rho=" + std::to_string(*s.candidate.rho)).c_str() : "",
                    static_cast<int>(nf) - s.folds_ok, nf);
      g.warnings.push_back(buf);
    }
    g.scores.push_back(std::move(s));
  }
  select_candidate(g, cfg.accuracy_slack);
  return g;
}

// ---------------------------------------------------------------------------
// Experiment runs
// ---------------------------------------------------------------------------

struct Stat {
  std::optional<double> mean;
  std::optional<double> std;  // sample standard deviation; absent for one run

  bool operator==(const Stat&) const = default;
};

inline Stat summarize(const std::vector<std::optional<double>>& values) {
  std::vector<double> v;
  for (const auto& x : values) {
    if (x) v.push_back(*x);
  }
  Stat s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (values.size() > 1 && v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - *s.mean) * (x - *s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

struct ResultRow {
  std::string dataset;
  ModelKind model = ModelKind::svm;
  double C = 1.0;
  double gamma = 1.0;
  std::optional<double> rho;
  std::optional<Orientation> orientation;
  std::optional<double> epsilon;
  int runs = 0;
  std::vector<std::uint64_t> seeds;
  Stat precision, dfpr, deo, accuracy;
  Stat wall_time, solve_time, gram_time;

  bool operator==(const ResultRow&) const = default;
};

struct RunRecord {
  ModelKind model = ModelKind::svm;
  int run = 0;
  std::uint64_t seed = 0;
  Candidate chosen;
  EvalReport test;
  double wall_seconds = 0.0;
  double solve_seconds = 0.0;
  double gram_seconds = 0.0;
  Index train_size = 0;
  Index test_size = 0;
};

struct SearchRecord {
  ModelKind model = ModelKind::svm;
  int run = 0;
  GridResult grid;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<RunRecord> runs;
  std::vector<SearchRecord> searches;
  std::vector<std::string> notes;
};

// Seed streams derived from a run seed.
inline constexpr std::uint64_t kSeedUndersample = 1, kSeedHoldout = 2, kSeedFolds = 3,
                               kSeedSynthTrain = 4, kSeedSynthTest = 5, kSeedSubsample = 6;

/// Stratified random subset of about n samples.
inline GroupedDataset stratified_subsample(const GroupedDataset& d, Index n, std::uint64_t seed) {
  if (n >= d.size()) return d;
  const double frac = static_cast<double>(n) / static_cast<double>(d.size());
  return d.subset(holdout_split(d, frac, seed).validation);
}

struct LoadedSource {
  std::optional<LoadedData> data;  // absent for synthetic sources
};

inline LoadedSource load_source(const ExperimentConfig& cfg) {
  LoadedSource out;
  if (!cfg.source.schema.empty()) {
    out.data = load_dataset(load_schema(cfg.source.schema), cfg.source.data_dir);
  } else if (!cfg.source.train_csv.empty()) {
    LoadedData d;
    d.train = read_dataset_csv(cfg.source.train_csv);
    if (!cfg.source.test_csv.empty()) d.test = read_dataset_csv(cfg.source.test_csv);
    out.data = std::move(d);
  }
  return out;
}

/// Train/test sets of one run: synthetic draws, or the loaded pool after the
/// optional subsample, undersampling and holdout split (in that order).
inline std::pair<GroupedDataset, GroupedDataset> run_split(const ExperimentConfig& cfg,
                                                           const LoadedSource& src,
                                                           std::uint64_t seed) {
  if (!src.data) {
    GroupedDataset tr = mistreatment_family(derive_seed(seed, kSeedSynthTrain), cfg.source.synthetic_scale);
    GroupedDataset te = mistreatment_family(derive_seed(seed, kSeedSynthTest), cfg.source.synthetic_test_scale);
    if (cfg.subsample) tr = stratified_subsample(tr, *cfg.subsample, derive_seed(seed, kSeedSubsample));
    if (cfg.undersample) tr = undersample_majority_label(tr, derive_seed(seed, kSeedUndersample));
    return {std::move(tr), std::move(te)};
  }
  GroupedDataset pool = src.data->train;
  if (cfg.subsample) pool = stratified_subsample(pool, *cfg.subsample, derive_seed(seed, kSeedSubsample));
  if (cfg.undersample) pool = undersample_majority_label(pool, derive_seed(seed, kSeedUndersample));
  if (src.data->test) return {std::move(pool), *src.data->test};
  const Fold split = holdout_split(pool, cfg.test_fraction, derive_seed(seed, kSeedHoldout));
  return {pool.subset(split.train), pool.subset(split.validation)};
}

namespace detail {

inline Candidate most_frequent(const std::vector<Candidate>& v) {
  std::size_t best = 0, best_count = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto count = static_cast<std::size_t>(std::count(v.begin(), v.end(), v[i]));
    if (count > best_count) {
      best = i;
      best_count = count;
    }
  }
  return v[best];
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult out;
  const LoadedSource src = load_source(cfg);
  if (src.data) out.notes = src.data->report.notes;

  for (int r = 0; r < cfg.runs(); ++r) {
    const std::uint64_t seed = cfg.seeds[static_cast<std::size_t>(r)];
    const auto [train_set, test_set] = run_split(cfg, src, seed);
    for (ModelKind model : cfg.models) {
      GridResult g = grid_search(train_set, cfg, model, derive_seed(seed, kSeedFolds));
      RunRecord rec;
      rec.model = model;
      rec.run = r;
      rec.seed = seed;
      rec.chosen = g.best;
      rec.train_size = train_set.size();
      rec.test_size = test_set.size();
      const auto t0 = std::chrono::steady_clock::now();
      const TrainedModel m = train_candidate(train_set, cfg, model, g.best);
      rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rec.solve_seconds = m.solve_seconds;
      rec.gram_seconds = m.gram_seconds;
      if (m.status != qp::QpStatus::optimal) {
        out.notes.push_back(std::string(to_string(model)) + " run " + std::to_string(r) +
                            ": final solve stopped with status " + qp::to_string(m.status));
      }
      rec.test = evaluate(predict(m, test_set).labels, test_set);
      out.runs.push_back(std::move(rec));
      out.searches.push_back({model, r, std::move(g)});
    }
  }

  for (ModelKind model : cfg.models) {
    ResultRow row;
    row.dataset = cfg.dataset;
    row.model = model;
    row.runs = cfg.runs();
    row.seeds = cfg.seeds;
    std::vector<Candidate> chosen;
    std::vector<std::optional<double>> prec, dfpr, deo, acc, wall, solve, gramt;
    for (const auto& rec : out.runs) {
      if (rec.model != model) continue;
      chosen.push_back(rec.chosen);
      prec.push_back(rec.test.precision);
      dfpr.push_back(rec.test.dfpr);
      deo.push_back(rec.test.deo);
      acc.push_back(rec.test.accuracy);
      wall.push_back(rec.wall_seconds);
      solve.push_back(rec.solve_seconds);
      gramt.push_back(rec.gram_seconds);
    }
    const Candidate c = detail::most_frequent(chosen);
    row.C = c.C;
    row.gamma = c.gamma;
    row.rho = c.rho;
    if (c.rho) row.orientation = c.orientation;
    if (uses_opportunity(model)) row.epsilon = cfg.eo_epsilon;
    row.precision = summarize(prec);
    row.dfpr = summarize(dfpr);
    row.deo = summarize(deo);
    row.accuracy = summarize(acc);
    row.wall_time = summarize(wall);
    row.solve_time = summarize(solve);
    row.gram_time = summarize(gramt);
    out.rows.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& result_row_fields() {
  static const std::vector<std::string> f = {
      "dataset",         "model",          "C",               "gamma",
      "rho",             "orientation",    "epsilon",         "runs",
      "seeds",           "precision_mean", "precision_std",   "dfpr_mean",
      "dfpr_std",        "deo_mean",       "deo_std",         "accuracy_mean",
      "accuracy_std",    "wall_time_mean", "wall_time_std",   "solve_time_mean",
      "solve_time_std",  "gram_time_mean", "gram_time_std"};
  return f;
}

/// Report fields that carry measured durations.
inline bool is_timing_field(const std::string& name) {
  return name.find("_time") != std::string::npos || name.find("seconds") != std::string::npos;
}

/// Rows sorted by dataset, then by model in declaration order.
inline std::vector<ResultRow> ordered(std::vector<ResultRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& x, const ResultRow& y) {
    if (x.dataset != y.dataset) return x.dataset < y.dataset;
    return static_cast<int>(x.model) < static_cast<int>(y.model);
  });
  return rows;
}

namespace detail {

inline std::string real17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string opt17(const std::optional<double>& v) { return v ? real17(*v) : std::string(); }

inline std::string join_seeds(const std::vector<std::uint64_t>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ";" : "") + std::to_string(s[i]);
  return out;
}

inline nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  for (char ch : line) {
    if (ch == ',') out.emplace_back();
    else if (ch != '\r') out.back() += ch;
  }
  return out;
}

inline std::optional<double> parse_opt(const std::string& s, const std::string& field) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("report: bad number '" + s + "' in field " + field);
  }
}

inline std::string fmt3(const Stat& s) {
  if (!s.mean) return "n/a";
  char buf[64];
  if (s.std) std::snprintf(buf, sizeof(buf), "%.3f ± %.3f", *s.mean, *s.std);
  else std::snprintf(buf, sizeof(buf), "%.3f", *s.mean);
  return buf;
}

}  // namespace detail

inline std::string to_csv_row(const ResultRow& r) {
  using detail::opt17;
  std::vector<std::string> v = {
      r.dataset,
      to_string(r.model),
      detail::real17(r.C),
      detail::real17(r.gamma),
      opt17(r.rho),
      r.orientation ? to_string(*r.orientation) : "",
      opt17(r.epsilon),
      std::to_string(r.runs),
      detail::join_seeds(r.seeds),
      opt17(r.precision.mean), opt17(r.precision.std),
      opt17(r.dfpr.mean), opt17(r.dfpr.std),
      opt17(r.deo.mean), opt17(r.deo.std),
      opt17(r.accuracy.mean), opt17(r.accuracy.std),
      opt17(r.wall_time.mean), opt17(r.wall_time.std),
      opt17(r.solve_time.mean), opt17(r.solve_time.std),
      opt17(r.gram_time.mean), opt17(r.gram_time.std)};
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

inline nlohmann::ordered_json to_json(const ResultRow& r) {
  using detail::opt_json;
  nlohmann::ordered_json j;
  j["dataset"] = r.dataset;
  j["model"] = to_string(r.model);
  j["C"] = r.C;
  j["gamma"] = r.gamma;
  j["rho"] = opt_json(r.rho);
  j["orientation"] = r.orientation ? nlohmann::ordered_json(to_string(*r.orientation)) : nlohmann::ordered_json(nullptr);
  j["epsilon"] = opt_json(r.epsilon);
  j["runs"] = r.runs;
  j["seeds"] = r.seeds;
  auto stat = [&](const char* name, const Stat& s) {
    j[std::string(name) + "_mean"] = opt_json(s.mean);
    j[std::string(name) + "_std"] = opt_json(s.std);
  };
  stat("precision", r.precision);
  stat("dfpr", r.dfpr);
  stat("deo", r.deo);
  stat("accuracy", r.accuracy);
  stat("wall_time", r.wall_time);
  stat("solve_time", r.solve_time);
  stat("gram_time", r.gram_time);
  return j;
}

namespace detail {

inline ResultRow row_from_fields(const std::map<std::string, std::string>& f,
                                 const std::map<std::string, std::optional<double>>& num) {
  ResultRow r;
  auto need = [&](const std::string& k) -> const std::string& {
    auto it = f.find(k);
    if (it == f.end()) throw InputError("report: missing field " + k);
    return it->second;
  };
  auto real = [&](const std::string& k) {
    auto it = num.find(k);
    if (it == num.end()) throw InputError("report: missing field " + k);
    return it->second;
  };
  r.dataset = need("dataset");
  r.model = model_kind_from_string(need("model"));
  if (!real("C") || !real("gamma")) throw InputError("report: C and gamma are required");
  r.C = *real("C");
  r.gamma = *real("gamma");
  r.rho = real("rho");
  if (!need("orientation").empty()) r.orientation = orientation_from_string(need("orientation"));
  r.epsilon = real("epsilon");
  try {
    r.runs = std::stoi(need("runs"));
    std::stringstream ss(need("seeds"));
    std::string tok;
    while (std::getline(ss, tok, ';')) r.seeds.push_back(std::stoull(tok));
  } catch (const std::logic_error&) {
    throw InputError("report: bad runs or seeds field");
  }
  auto stat = [&](const std::string& name) { return Stat{real(name + "_mean"), real(name + "_std")}; };
  r.precision = stat("precision");
  r.dfpr = stat("dfpr");
  r.deo = stat("deo");
  r.accuracy = stat("accuracy");
  r.wall_time = stat("wall_time");
  r.solve_time = stat("solve_time");
  r.gram_time = stat("gram_time");
  return r;
}

inline bool is_text_field(const std::string& k) {
  return k == "dataset" || k == "model" || k == "orientation" || k == "runs" || k == "seeds";
}

}  // namespace detail

inline void emit_report(const std::vector<ResultRow>& rows_in, ReportFormat format, std::ostream& out) {
  if (rows_in.empty()) throw InputError("emit_report: no rows");
  const auto rows = ordered(rows_in);
  if (format == ReportFormat::csv) {
    const auto& f = result_row_fields();
    for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << f[i];
    out << '\n';
    for (const auto& r : rows) out << to_csv_row(r) << '\n';
  } else if (format == ReportFormat::json) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : rows) j.push_back(to_json(r));
    out << j.dump(2) << '\n';
  } else {
    out << "| Dataset | Model | C | gamma | rho | Precision | DFPR | DEO | Accuracy | Solve time (s) |\n";
    out << "|---|---|---|---|---|---|---|---|---|---|\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      // Lowest and second-lowest mean DFPR within the dataset (as printed).
      std::vector<double> values;
      for (const auto& o : rows) {
        if (o.dataset == rows[i].dataset && o.dfpr.mean) {
          values.push_back(std::round(*o.dfpr.mean * 1000.0) / 1000.0);
        }
      }
      std::sort(values.begin(), values.end());
      values.erase(std::unique(values.begin(), values.end()), values.end());
      const auto& r = rows[i];
      std::string dfpr = detail::fmt3(r.dfpr);
      if (r.dfpr.mean && values.size() > 1) {
        const double mine = std::round(*r.dfpr.mean * 1000.0) / 1000.0;
        if (mine == values[0]) dfpr = "**" + dfpr + "**";
        else if (mine == values[1]) dfpr = "*" + dfpr + "*";
      }
      char hyper[96], rho[32] = "-";
      if (r.rho) std::snprintf(rho, sizeof(rho), "%g", *r.rho);
      std::snprintf(hyper, sizeof(hyper), "%g | %g | %s", r.C, r.gamma, rho);
      out << "| " << r.dataset << " | " << display_name(r.model) << " | " << hyper << " | "
          << detail::fmt3(r.precision) << " | " << dfpr << " | " << detail::fmt3(r.deo) << " | "
          << detail::fmt3(r.accuracy) << " | " << detail::fmt3(r.solve_time) << " |\n";
    }
  }
  if (!out) throw std::runtime_error("emit_report: write failed");
}

inline std::string emit_report(const std::vector<ResultRow>& rows, ReportFormat format) {
  std::ostringstream s;
  emit_report(rows, format, s);
  return s.str();
}

inline std::vector<ResultRow> read_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("report: empty csv");
  const auto header = detail::split_csv_line(line);
  if (header != result_row_fields()) throw InputError("report: unexpected csv header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) throw InputError("report: wrong number of csv fields");
    std::map<std::string, std::string> text;
    std::map<std::string, std::optional<double>> num;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (detail::is_text_field(header[i])) text[header[i]] = cells[i];
      else num[header[i]] = detail::parse_opt(cells[i], header[i]);
    }
    rows.push_back(detail::row_from_fields(text, num));
  }
  return rows;
}

inline std::vector<ResultRow> read_report_json(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("report: ") + e.what());
  }
  if (!j.is_array()) throw InputError("report: json top level must be an array");
  std::vector<ResultRow> rows;
  for (const auto& o : j) {
    std::map<std::string, std::string> text;
    std::map<std::string, std::optional<double>> num;
    try {
      for (const auto& k : result_row_fields()) {
        if (!o.contains(k)) throw InputError("report: missing field " + k);
        const auto& v = o.at(k);
        if (k == "seeds") {
          std::vector<std::uint64_t> s = v.get<std::vector<std::uint64_t>>();
          text[k] = detail::join_seeds(s);
        } else if (k == "runs") {
          text[k] = std::to_string(v.get<int>());
        } else if (detail::is_text_field(k)) {
          text[k] = v.is_null() ? std::string() : v.get<std::string>();
        } else {
          num[k] = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("report: ") + e.what());
    }
    rows.push_back(detail::row_from_fields(text, num));
  }
  return rows;
}

/// Full cross-validation trace, one line per (model, run, candidate, fold).
inline void write_trace_csv(const ExperimentResult& res, std::ostream& out) {
  out << "model,run,rho,orientation,C,gamma,fold,status,error,precision,dfpr,deo,accuracy,"
         "solve_seconds,gram_seconds\n";
  for (const auto& s : res.searches) {
    for (const auto& e : s.grid.trace) {
      std::string err = e.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::replace(err.begin(), err.end(), '\n', ' ');
      out << to_string(s.model) << ',' << s.run << ',' << detail::opt17(e.candidate.rho) << ','
          << (e.candidate.rho ? to_string(e.candidate.orientation) : "") << ','
          << detail::real17(e.candidate.C) << ',' << detail::real17(e.candidate.gamma) << ','
          << e.fold << ',' << (e.ok ? "ok" : "failed") << ',' << err << ','
          << (e.ok ? detail::csv_real(e.report.precision) : "") << ','
          << (e.ok ? detail::csv_real(e.report.dfpr) : "") << ','
          << (e.ok ? detail::csv_real(e.report.deo) : "") << ','
          << (e.ok ? detail::real17(e.report.accuracy) : "") << ','
          << detail::real17(e.solve_seconds) << ',' << detail::real17(e.gram_seconds) << '\n';
    }
  }
}

/// Per-run test metrics of the selected models.
inline void write_runs_csv(const ExperimentResult& res, std::ostream& out) {
  out << "model,run,seed,C,gamma,rho,orientation,train_size,test_size," << eval_report_csv_header()
      << ",wall_seconds,solve_seconds,gram_seconds\n";
  for (const auto& r : res.runs) {
    out << to_string(r.model) << ',' << r.run << ',' << r.seed << ',' << detail::real17(r.chosen.C)
        << ',' << detail::real17(r.chosen.gamma) << ',' << detail::opt17(r.chosen.rho) << ','
        << (r.chosen.rho ? to_string(r.chosen.orientation) : "") << ',' << r.train_size << ','
        << r.test_size << ',' << to_csv_row(r.test) << ',' << detail::real17(r.wall_seconds) << ','
        << detail::real17(r.solve_seconds) << ',' << detail::real17(r.gram_seconds) << '\n';
  }
}

/// Writes results.{csv,json,md} (as configured), trace.csv, runs.csv and
/// config.json into cfg.output. Returns the written paths.
inline std::vector<std::string> write_reports(const ExperimentResult& res, const ExperimentConfig& cfg) {
  if (cfg.output.empty()) throw InputError("no output directory configured");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.output, ec);
  if (ec) throw std::runtime_error("cannot create '" + cfg.output + "': " + ec.message());
  std::vector<std::string> written;
  auto open = [&](const std::string& name) {
    const std::string path = (fs::path(cfg.output) / name).string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    written.push_back(path);
    return f;
  };
  for (auto fmt : cfg.formats) {
    const char* name = fmt == ReportFormat::csv ? "results.csv" : fmt == ReportFormat::json ? "results.json" : "results.md";
    auto f = open(name);
    emit_report(res.rows, fmt, f);
  }
  {
    auto f = open("trace.csv");
    write_trace_csv(res, f);
  }
  {
    auto f = open("runs.csv");
    write_runs_csv(res, f);
  }
  {
    auto f = open("config.json");
    f << to_json(cfg).dump(2) << '\n';
  }
  if (!res.notes.empty()) {
    auto f = open("notes.txt");
    for (const auto& n : res.notes) f << n << '\n';
  }
  return written;
}

/// Drops the columns whose header names a timing field from CSV text.
inline std::string strip_timing_columns(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  std::vector<bool> keep;
  bool first = true;
  while (std::getline(in, line)) {
    const auto cells = detail::split_csv_line(line);
    if (first) {
      for (const auto& c : cells) keep.push_back(!is_timing_field(c));
      first = false;
    }
    bool lead = true;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i < keep.size() && !keep[i]) continue;
      out << (lead ? "" : ",") << cells[i];
      lead = false;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace fairsvm

namespace fairsvm {

// ---------------------------------------------------------------------------
// Solver timing
// ---------------------------------------------------------------------------

struct BenchmarkConfig {
  Index n = 2000;  // synthetic sample count (ignored with a fixed dataset)
  int runs = 5;
  std::uint64_t seed = 0;
  double C = kMistreatmentC;
  double gamma = kMistreatmentGamma;
  double rho = 0.1;
  double epsilon = 0.0;
  Orientation orientation = Orientation::b_minus_a;
};

struct BenchmarkResult {
  std::string source;
  Index n = 0;
  std::vector<ModelKind> models = {ModelKind::svm, ModelKind::svm_mt, ModelKind::ferm};
  std::vector<std::vector<double>> solve_seconds;  // [model][run]
  std::vector<double> gram_seconds;                // [run], shared by the models
  std::vector<std::vector<std::string>> status;    // [model][run]

  Stat solve(std::size_t m) const { return summarize({solve_seconds[m].begin(), solve_seconds[m].end()}); }

  /// Mean solve time strictly increases along `models`.
  bool ordering_holds() const {
    for (std::size_t m = 0; m + 1 < models.size(); ++m) {
      if (!(*solve(m).mean < *solve(m + 1).mean)) return false;
    }
    return true;
  }
};

/// Times the vanilla, minimum-separation and equal-opportunity solves on the
/// same Gram matrix. Without `fixed`, each run draws n samples of the
/// synthetic family from a seed derived from cfg.seed + run.
inline BenchmarkResult run_benchmark(const BenchmarkConfig& cfg,
                                     const std::optional<GroupedDataset>& fixed = std::nullopt,
                                     const std::string& label = "mistreatment family") {
  if (cfg.runs < 1) throw InputError("benchmark: runs must be positive");
  if (!fixed && cfg.n < 8) throw InputError("benchmark: n must be at least 8");
  BenchmarkResult r;
  r.source = label;
  r.solve_seconds.assign(r.models.size(), {});
  r.status.assign(r.models.size(), {});
  TrainConfig tc;
  tc.C = cfg.C;
  tc.kernel = KernelSpec::rbf(cfg.gamma);
  tc.orientation = cfg.orientation;
  for (int run = 0; run < cfg.runs; ++run) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(run);
    const GroupedDataset d =
        fixed ? *fixed
              : mistreatment_family(derive_seed(seed, kSeedSynthTrain), static_cast<double>(cfg.n) / 400.0);
    r.n = d.size();
    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::MatrixXd K = gram(tc.kernel, d.x);
    r.gram_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    for (std::size_t m = 0; m < r.models.size(); ++m) {
      FairnessSpec spec;
      if (uses_separation(r.models[m])) spec.min_sep_rho = cfg.rho;
      if (uses_opportunity(r.models[m])) spec.eo_epsilon = cfg.epsilon;
      try {
        const TrainedModel tm = train(d, tc, spec, &K);
        r.solve_seconds[m].push_back(tm.solve_seconds);
        r.status[m].push_back(qp::to_string(tm.status));
      } catch (const InfeasibleError&) {
        r.solve_seconds[m].push_back(0.0);
        r.status[m].push_back("infeasible");
      }
    }
  }
  return r;
}

inline nlohmann::ordered_json to_json(const BenchmarkResult& r) {
  nlohmann::ordered_json j;
  j["source"] = r.source;
  j["n"] = r.n;
  j["runs"] = r.gram_seconds.size();
  j["gram_time_mean"] = *summarize({r.gram_seconds.begin(), r.gram_seconds.end()}).mean;
  for (std::size_t m = 0; m < r.models.size(); ++m) {
    const Stat s = r.solve(m);
    nlohmann::ordered_json e;
    e["solve_time_mean"] = *s.mean;
    e["solve_time_std"] = s.std ? nlohmann::ordered_json(*s.std) : nlohmann::ordered_json(nullptr);
    e["solve_time_runs"] = r.solve_seconds[m];
    e["status"] = r.status[m];
    j["models"][to_string(r.models[m])] = e;
  }
  j["increasing_solve_time"] = r.ordering_holds();
  return j;
}

inline void print_benchmark_markdown(const BenchmarkResult& r, std::ostream& out) {
  out << "Solver time on " << r.source << " (n = " << r.n << ", " << r.gram_seconds.size()
      << " runs; Gram construction excluded)\n\n";
  out << "| Model | Solve time (s) | Status |\n|---|---|---|\n";
  for (std::size_t m = 0; m < r.models.size(); ++m) {
    const Stat s = r.solve(m);
    char buf[96];
    if (s.std) std::snprintf(buf, sizeof(buf), "%.4f ± %.4f", *s.mean, *s.std);
    else std::snprintf(buf, sizeof(buf), "%.4f", *s.mean);
    out << "| " << display_name(r.models[m]) << " | " << buf << " | " << r.status[m].front() << " |\n";
  }
  char gbuf[64];
  std::snprintf(gbuf, sizeof(gbuf), "%.4f", *summarize({r.gram_seconds.begin(), r.gram_seconds.end()}).mean);
  out << "\nGram construction: " << gbuf << " s per run\n";
  out << "SVM < SVM-MT < FERM: " << (r.ordering_holds() ? "holds" : "does not hold") << '\n';
}

}  // namespace fairsvm
