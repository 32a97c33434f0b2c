#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairsvm/dataset.hpp"
#include "fairsvm/error.hpp"

namespace fairsvm {

/// Confusion counts of one group, positive class = +1.
struct Confusion {
  long tp = 0, fp = 0, tn = 0, fn = 0;

  long total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

struct GroupConfusion {
  std::array<Confusion, 2> groups;  // indexed by Group

  const Confusion& operator[](Group g) const { return groups[static_cast<std::size_t>(g)]; }
  Confusion& operator[](Group g) { return groups[static_cast<std::size_t>(g)]; }
  Confusion pooled() const {
    const Confusion &a = groups[0], &b = groups[1];
    return {a.tp + b.tp, a.fp + b.fp, a.tn + b.tn, a.fn + b.fn};
  }
};

/// Rates are empty (std::nullopt) when their denominator is zero; such rates
/// are left out of the group differences and noted in `warnings`.
struct EvalReport {
  GroupConfusion confusion;
  std::optional<double> tpr_a, tpr_b, fpr_a, fpr_b;
  std::optional<double> dfpr;  // |fpr_a - fpr_b|
  std::optional<double> deo;   // |tpr_a - tpr_b|
  std::optional<double> precision;  // pooled tp / (tp + fp)
  double accuracy = 0.0;
  long n = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::optional<double> ratio(long num, long den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

inline std::optional<double> abs_diff(const std::optional<double>& a,
                                      const std::optional<double>& b) {
  if (!a || !b) return std::nullopt;
  return std::abs(*a - *b);
}

}  // namespace detail

inline EvalReport evaluate(std::span<const Label> predictions, std::span<const Label> truth,
                           std::span<const Group> groups) {
  if (predictions.size() != truth.size() || truth.size() != groups.size()) {
    throw InputError("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(truth.size()) + " samples");
  }
  EvalReport r;
  r.n = static_cast<long>(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    Confusion& c = r.confusion[groups[i]];
    const bool pred_pos = predictions[i] == 1;
    if (truth[i] == 1) {
      (pred_pos ? c.tp : c.fn) += 1;
    } else {
      (pred_pos ? c.fp : c.tn) += 1;
    }
  }
  const Confusion &a = r.confusion[Group::a], &b = r.confusion[Group::b];
  r.tpr_a = detail::ratio(a.tp, a.tp + a.fn);
  r.tpr_b = detail::ratio(b.tp, b.tp + b.fn);
  r.fpr_a = detail::ratio(a.fp, a.fp + a.tn);
  r.fpr_b = detail::ratio(b.fp, b.fp + b.tn);
  r.dfpr = detail::abs_diff(r.fpr_a, r.fpr_b);
  r.deo = detail::abs_diff(r.tpr_a, r.tpr_b);
  const Confusion all = r.confusion.pooled();
  r.precision = detail::ratio(all.tp, all.tp + all.fp);
  r.accuracy = r.n > 0 ? static_cast<double>(all.tp + all.tn) / static_cast<double>(r.n) : 0.0;

  auto note = [&](const std::optional<double>& v, const char* what) {
    if (!v) r.warnings.push_back(std::string(what) + " undefined (empty denominator)");
  };
  note(r.tpr_a, "tpr_a");
  note(r.tpr_b, "tpr_b");
  note(r.fpr_a, "fpr_a");
  note(r.fpr_b, "fpr_b");
  note(r.precision, "precision");
  return r;
}

inline EvalReport evaluate(std::span<const Label> predictions, const GroupedDataset& truth) {
  return evaluate(predictions, truth.y, truth.s);
}

// ---------------------------------------------------------------------------
// Flat serialization. Field order is fixed; undefined values are written as
// "undefined" in CSV and null in JSON.
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& eval_report_fields() {
  static const std::vector<std::string> fields = {
      "n",     "accuracy", "precision", "tpr_a", "tpr_b", "fpr_a", "fpr_b", "dfpr",
      "deo",   "tp_a",     "fp_a",      "tn_a",  "fn_a",  "tp_b",  "fp_b",  "tn_b",
      "fn_b"};
  return fields;
}

namespace detail {

inline std::string csv_real(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", *v);
  return buf;
}

inline nlohmann::ordered_json json_real(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace detail

inline std::string eval_report_csv_header() {
  std::string out;
  for (const auto& f : eval_report_fields()) out += (out.empty() ? "" : ",") + f;
  return out;
}

inline std::string to_csv_row(const EvalReport& r) {
  using detail::csv_real;
  const Confusion &a = r.confusion[Group::a], &b = r.confusion[Group::b];
  std::ostringstream s;
  s << r.n << ',' << csv_real(r.accuracy) << ',' << csv_real(r.precision) << ','
    << csv_real(r.tpr_a) << ',' << csv_real(r.tpr_b) << ',' << csv_real(r.fpr_a) << ','
    << csv_real(r.fpr_b) << ',' << csv_real(r.dfpr) << ',' << csv_real(r.deo) << ',' << a.tp
    << ',' << a.fp << ',' << a.tn << ',' << a.fn << ',' << b.tp << ',' << b.fp << ',' << b.tn
    << ',' << b.fn;
  return s.str();
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  using detail::json_real;
  const Confusion &a = r.confusion[Group::a], &b = r.confusion[Group::b];
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["accuracy"] = r.accuracy;
  j["precision"] = json_real(r.precision);
  j["tpr_a"] = json_real(r.tpr_a);
  j["tpr_b"] = json_real(r.tpr_b);
  j["fpr_a"] = json_real(r.fpr_a);
  j["fpr_b"] = json_real(r.fpr_b);
  j["dfpr"] = json_real(r.dfpr);
  j["deo"] = json_real(r.deo);
  j["tp_a"] = a.tp;
  j["fp_a"] = a.fp;
  j["tn_a"] = a.tn;
  j["fn_a"] = a.fn;
  j["tp_b"] = b.tp;
  j["fp_b"] = b.fp;
  j["tn_b"] = b.tn;
  j["fn_b"] = b.fn;
  j["warnings"] = r.warnings;
  return j;
}

// ---------------------------------------------------------------------------
// Disparate mistreatment probe
// ---------------------------------------------------------------------------

struct ProbeStep {
  std::optional<double> d_tpr_a, d_tpr_b, d_fpr_a, d_fpr_b;
  bool flagged = false;  // one group's TPR rose while the other's fell
};

struct MistreatmentDiagnostic {
  std::vector<ProbeStep> steps;  // steps[i] compares reports i and i + 1

  bool any_flagged() const {
    for (const auto& s : steps) {
      if (s.flagged) return true;
    }
    return false;
  }
};

inline constexpr double kProbeThreshold = 0.01;

/// Walks a sweep of reports ordered by increasing constraint strength and marks
/// the steps where the TPRs of the two groups move in opposite directions by
/// more than kProbeThreshold each. Fewer than two reports give no steps.
inline MistreatmentDiagnostic disparate_mistreatment_probe(std::span<const EvalReport> reports) {
  MistreatmentDiagnostic out;
  auto delta = [](const std::optional<double>& from, const std::optional<double>& to) {
    return from && to ? std::optional<double>(*to - *from) : std::nullopt;
  };
  for (std::size_t i = 0; i + 1 < reports.size(); ++i) {
    const EvalReport &p = reports[i], &q = reports[i + 1];
    ProbeStep s;
    s.d_tpr_a = delta(p.tpr_a, q.tpr_a);
    s.d_tpr_b = delta(p.tpr_b, q.tpr_b);
    s.d_fpr_a = delta(p.fpr_a, q.fpr_a);
    s.d_fpr_b = delta(p.fpr_b, q.fpr_b);
    if (s.d_tpr_a && s.d_tpr_b) {
      const double da = *s.d_tpr_a, db = *s.d_tpr_b;
      s.flagged = std::abs(da) > kProbeThreshold && std::abs(db) > kProbeThreshold &&
                  (da > 0) != (db > 0);
    }
    out.steps.push_back(s);
  }
  return out;
}

/// Finite-class uniform deviation bound sqrt((log|F| + log(1/delta)) / (2n)).
inline double uniform_bound(double card_f, double delta, long n) {
  if (!(card_f >= 1.0)) throw InputError("uniform_bound: |F| must be >= 1");
  if (!(delta > 0.0 && delta <= 1.0)) throw InputError("uniform_bound: delta must lie in (0, 1]");
  if (n < 1) throw InputError("uniform_bound: n must be positive");
  return std::sqrt((std::log(card_f) + std::log(1.0 / delta)) / (2.0 * static_cast<double>(n)));
}

}  // namespace fairsvm
