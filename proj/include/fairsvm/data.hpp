#pragma once

// Dataset ingestion and preprocessing, resampling, fold construction and
// synthetic Gaussian data.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "fairsvm/dataset.hpp"
#include "fairsvm/error.hpp"
#include "fairsvm/random.hpp"

namespace fairsvm {

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

/// Row predicate applied before preprocessing. Ordering operators compare
/// numerically; `in` / `not_in` compare the trimmed text.
struct RowFilter {
  std::string column;
  std::string op;  // == != < <= > >= in not_in
  std::vector<std::string> values;
};

struct DataFile {
  std::string role;  // "data", "train" or "test"
  std::string name;  // file name inside the data directory
  std::string url;
  std::string sha256;  // empty: not verified
  int skip_rows = 0;   // lines to skip before the header / first record
};

struct DatasetSchema {
  std::string name;
  char delimiter = ',';
  bool has_header = true;
  std::vector<std::string> column_names;  // required without a header
  std::string target_column;
  std::vector<std::string> positive_values;
  std::vector<std::string> negative_values;
  std::string sensitive_column;
  std::vector<std::string> group_a_values;
  std::vector<std::string> group_b_values;  // empty: every other value
  std::vector<std::string> feature_columns;  // empty: all remaining columns
  std::vector<std::string> categorical_columns;
  std::vector<std::string> drop_columns;
  std::vector<std::string> missing_tokens = {"?"};
  double unknown_drop_threshold = 1.0;
  bool include_sensitive_feature = false;
  std::vector<RowFilter> row_filters;
  std::vector<DataFile> files;
  std::string notes;

  void validate() const {
    if (target_column.empty()) throw InputError("schema: target_column is required");
    if (sensitive_column.empty()) throw InputError("schema: sensitive_column is required");
    if (positive_values.empty() || negative_values.empty()) {
      throw InputError("schema: positive_values and negative_values are required");
    }
    if (group_a_values.empty()) throw InputError("schema: group_a_values is required");
    for (const auto& c : drop_columns) {
      if (c == target_column || c == sensitive_column) {
        throw InputError("schema: '" + c + "' is the target or sensitive column and cannot be dropped");
      }
    }
    if (!has_header && column_names.empty()) {
      throw InputError("schema: column_names are required when has_header is false");
    }
    if (!(unknown_drop_threshold >= 0.0 && unknown_drop_threshold <= 1.0)) {
      throw InputError("schema: unknown_drop_threshold must lie in [0, 1]");
    }
    static const std::set<std::string> ops = {"==", "!=", "<", "<=", ">", ">=", "in", "not_in"};
    for (const auto& f : row_filters) {
      if (!ops.count(f.op)) throw InputError("schema: unknown filter operator '" + f.op + "'");
      if (f.values.empty()) throw InputError("schema: filter on '" + f.column + "' has no values");
    }
  }

  const DataFile* file(const std::string& role) const {
    for (const auto& f : files) {
      if (f.role == role) return &f;
    }
    return nullptr;
  }
};

namespace detail {

template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

inline std::vector<std::string> read_string_list(const nlohmann::json& j, const char* key) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  for (const auto& v : j[key]) out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
  return out;
}

}  // namespace detail

inline DatasetSchema schema_from_json(const nlohmann::json& j) {
  DatasetSchema s;
  try {
    detail::read_optional(j, "name", s.name);
    if (j.contains("delimiter")) {
      const auto d = j["delimiter"].get<std::string>();
      if (d.size() != 1) throw InputError("schema: delimiter must be a single character");
      s.delimiter = d == "\\t" ? '\t' : d[0];
    }
    detail::read_optional(j, "has_header", s.has_header);
    s.column_names = detail::read_string_list(j, "column_names");
    detail::read_optional(j, "target_column", s.target_column);
    s.positive_values = detail::read_string_list(j, "positive_values");
    s.negative_values = detail::read_string_list(j, "negative_values");
    detail::read_optional(j, "sensitive_column", s.sensitive_column);
    s.group_a_values = detail::read_string_list(j, "group_a_values");
    s.group_b_values = detail::read_string_list(j, "group_b_values");
    s.feature_columns = detail::read_string_list(j, "feature_columns");
    s.categorical_columns = detail::read_string_list(j, "categorical_columns");
    s.drop_columns = detail::read_string_list(j, "drop_columns");
    if (j.contains("missing_token")) s.missing_tokens = {j["missing_token"].get<std::string>()};
    if (j.contains("missing_tokens")) s.missing_tokens = detail::read_string_list(j, "missing_tokens");
    detail::read_optional(j, "unknown_drop_threshold", s.unknown_drop_threshold);
    detail::read_optional(j, "include_sensitive_feature", s.include_sensitive_feature);
    detail::read_optional(j, "notes", s.notes);
    if (j.contains("row_filters")) {
      for (const auto& f : j["row_filters"]) {
        RowFilter rf;
        rf.column = f.at("column").get<std::string>();
        rf.op = f.at("op").get<std::string>();
        if (f.at("value").is_array()) {
          rf.values = detail::read_string_list(f, "value");
        } else {
          rf.values = {f["value"].is_string() ? f["value"].get<std::string>() : f["value"].dump()};
        }
        s.row_filters.push_back(std::move(rf));
      }
    }
    if (j.contains("files")) {
      for (const auto& f : j["files"]) {
        DataFile df;
        df.role = f.value("role", "data");
        df.name = f.at("name").get<std::string>();
        df.url = f.value("url", "");
        df.sha256 = f.value("sha256", "");
        df.skip_rows = f.value("skip_rows", 0);
        s.files.push_back(std::move(df));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("schema: ") + e.what());
  }
  s.validate();
  return s;
}

inline DatasetSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open schema '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("schema '" + path + "': " + e.what());
  }
  return schema_from_json(j);
}

// ---------------------------------------------------------------------------
// Delimited text
// ---------------------------------------------------------------------------

struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  Index column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return static_cast<Index>(i);
    }
    throw InputError("column '" + name + "' not found");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// One record with double-quote escaping. Returns false at end of input.
inline bool read_record(std::istream& in, char delim, std::vector<std::string>& out) {
  out.clear();
  std::string line;
  if (!std::getline(in, line)) return false;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0;; ++i) {
    if (i == line.size()) {
      if (quoted) {  // embedded newline
        std::string more;
        if (!std::getline(in, more)) break;
        field += '\n';
        line = more;
        i = static_cast<std::size_t>(-1);
        continue;
      }
      break;
    }
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(trim(field));
  return true;
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline bool contains(const std::vector<std::string>& list, const std::string& v) {
  return std::find(list.begin(), list.end(), v) != list.end();
}

// Text comparison that also accepts numerically equal spellings ("1" vs "1.0").
inline bool value_matches(const std::string& cell, const std::string& wanted) {
  if (cell == wanted) return true;
  const auto a = parse_number(cell), b = parse_number(wanted);
  return a && b && *a == *b;
}

inline bool any_matches(const std::vector<std::string>& list, const std::string& v) {
  for (const auto& w : list) {
    if (value_matches(v, w)) return true;
  }
  return false;
}

}  // namespace detail

inline RawTable read_table(const std::string& path, const DatasetSchema& schema,
                           int skip_rows = 0) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open data file '" + path + "'");
  RawTable t;
  std::string skipped;
  for (int i = 0; i < skip_rows && std::getline(in, skipped); ++i) {
  }
  std::vector<std::string> rec;
  if (schema.has_header) {
    if (!detail::read_record(in, schema.delimiter, rec)) throw InputError("'" + path + "' is empty");
    t.columns = rec;
  }
  if (!schema.column_names.empty()) t.columns = schema.column_names;
  long line = 0;
  while (detail::read_record(in, schema.delimiter, rec)) {
    ++line;
    if (rec.size() == 1 && rec[0].empty()) continue;  // blank line
    if (rec.size() != t.columns.size()) {
      throw InputError("'" + path + "' record " + std::to_string(line) + " has " +
                       std::to_string(rec.size()) + " fields, expected " +
                       std::to_string(t.columns.size()));
    }
    t.rows.push_back(rec);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

struct DroppedFeature {
  std::string name;
  std::string reason;
};

struct PreprocessReport {
  long rows_read = 0;
  long rows_filtered = 0;  // removed by row predicates
  long rows_kept = 0;
  std::vector<DroppedFeature> dropped_features;
  std::map<std::string, long> imputed_counts;
  std::map<std::string, std::pair<double, double>> standardization;  // mean, std
  std::map<std::string, std::vector<std::string>> one_hot;
  std::vector<std::string> auto_categorical;  // non-numeric columns not declared categorical
  long feature_count = 0;
  // Filled when a held-out file is transformed with the training statistics.
  long test_rows_read = 0;
  long test_rows_filtered = 0;
  long test_rows_kept = 0;
  long test_unseen_categories = 0;
  std::vector<std::string> notes;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["rows_read"] = rows_read;
    j["rows_filtered"] = rows_filtered;
    j["rows_kept"] = rows_kept;
    j["feature_count"] = feature_count;
    auto& dropped = j["dropped_features"] = nlohmann::ordered_json::array();
    for (const auto& d : dropped_features) dropped.push_back({{"name", d.name}, {"reason", d.reason}});
    j["imputed_counts"] = imputed_counts;
    auto& st = j["standardization"] = nlohmann::ordered_json::object();
    for (const auto& [name, ms] : standardization) st[name] = {{"mean", ms.first}, {"std", ms.second}};
    j["one_hot"] = one_hot;
    j["auto_categorical"] = auto_categorical;
    if (test_rows_read > 0) {
      j["test_rows_read"] = test_rows_read;
      j["test_rows_filtered"] = test_rows_filtered;
      j["test_rows_kept"] = test_rows_kept;
      j["test_unseen_categories"] = test_unseen_categories;
    }
    j["notes"] = notes;
    return j;
  }
};

/// Feature pipeline fitted on training rows and reapplied to held-out rows:
/// unknown-heavy columns dropped, numeric columns median-imputed and
/// standardized (population statistics), categorical columns mode-imputed and
/// one-hot encoded over the training categories.
class Preprocessor {
 public:
  explicit Preprocessor(DatasetSchema schema) : schema_(std::move(schema)) { schema_.validate(); }

  /// Fits on `table` and returns the transformed training set.
  GroupedDataset fit_transform(const RawTable& table, PreprocessReport& report) {
    RawTable kept = filter(table, report.rows_read, report.rows_filtered);
    report.rows_kept = static_cast<long>(kept.rows.size());
    if (kept.rows.empty()) throw InputError("no rows left after the schema's row filters");
    fit(kept, report);
    long unseen = 0;
    GroupedDataset d = transform_rows(kept, unseen);
    report.feature_count = d.dim();
    return d;
  }

  /// Applies the fitted pipeline to held-out rows.
  GroupedDataset transform(const RawTable& table, PreprocessReport& report) const {
    if (features_.empty() && !fitted_) throw InputError("preprocessor is not fitted");
    RawTable kept = filter(table, report.test_rows_read, report.test_rows_filtered);
    report.test_rows_kept = static_cast<long>(kept.rows.size());
    return transform_rows(kept, report.test_unseen_categories);
  }

 private:
  struct Feature {
    std::string name;
    Index column = 0;
    bool categorical = false;
    double fill = 0.0;  // numeric median
    double mean = 0.0;
    double std = 1.0;
    std::string mode;                     // categorical fill
    std::vector<std::string> categories;  // sorted
  };

  bool is_missing(const std::string& v) const {
    return v.empty() || detail::contains(schema_.missing_tokens, v);
  }

  RawTable filter(const RawTable& table, long& read, long& filtered) const {
    read = static_cast<long>(table.rows.size());
    std::vector<std::pair<Index, const RowFilter*>> preds;
    for (const auto& f : schema_.row_filters) preds.emplace_back(table.column(f.column), &f);
    RawTable out;
    out.columns = table.columns;
    for (const auto& row : table.rows) {
      bool keep = true;
      for (const auto& [col, f] : preds) {
        keep = keep && passes(row[static_cast<std::size_t>(col)], *f);
      }
      if (keep) out.rows.push_back(row);
    }
    filtered = read - static_cast<long>(out.rows.size());
    return out;
  }

  static bool passes(const std::string& cell, const RowFilter& f) {
    if (f.op == "in") return detail::any_matches(f.values, cell);
    if (f.op == "not_in") return !detail::any_matches(f.values, cell);
    if (f.op == "==") return detail::value_matches(cell, f.values[0]);
    if (f.op == "!=") return !detail::value_matches(cell, f.values[0]);
    const auto a = detail::parse_number(cell), b = detail::parse_number(f.values[0]);
    if (!a || !b) return false;
    if (f.op == "<") return *a < *b;
    if (f.op == "<=") return *a <= *b;
    if (f.op == ">") return *a > *b;
    return *a >= *b;
  }

  void fit(const RawTable& t, PreprocessReport& report) {
    features_.clear();
    target_col_ = t.column(schema_.target_column);
    sensitive_col_ = t.column(schema_.sensitive_column);
    const auto n = static_cast<double>(t.rows.size());

    std::vector<Index> candidates;
    if (!schema_.feature_columns.empty()) {
      for (const auto& name : schema_.feature_columns) candidates.push_back(t.column(name));
    } else {
      for (std::size_t c = 0; c < t.columns.size(); ++c) candidates.push_back(static_cast<Index>(c));
    }
    for (Index c : candidates) {
      const std::string& name = t.columns[static_cast<std::size_t>(c)];
      if (c == target_col_) continue;
      if (c == sensitive_col_ && !schema_.include_sensitive_feature) continue;
      if (detail::contains(schema_.drop_columns, name)) continue;

      std::vector<std::string> present;
      long missing = 0;
      for (const auto& row : t.rows) {
        const std::string& v = row[static_cast<std::size_t>(c)];
        if (is_missing(v)) {
          ++missing;
        } else {
          present.push_back(v);
        }
      }
      const double frac = static_cast<double>(missing) / n;
      if (present.empty() || frac > schema_.unknown_drop_threshold) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "unknown fraction %.4f exceeds threshold %.4f", frac,
                      schema_.unknown_drop_threshold);
        report.dropped_features.push_back({name, buf});
        continue;
      }

      Feature f;
      f.name = name;
      f.column = c;
      f.categorical = detail::contains(schema_.categorical_columns, name);
      if (!f.categorical) {
        for (const auto& v : present) {
          if (!detail::parse_number(v)) {
            f.categorical = true;
            report.auto_categorical.push_back(name);
            break;
          }
        }
      }
      if (missing > 0) report.imputed_counts[name] = missing;

      if (f.categorical) {
        std::map<std::string, long> counts;
        for (const auto& v : present) ++counts[v];
        long best = -1;
        for (const auto& [v, k] : counts) {
          f.categories.push_back(v);
          if (k > best) {
            best = k;
            f.mode = v;
          }
        }
        if (f.categories.size() < 2) {
          report.dropped_features.push_back({name, "constant"});
          continue;
        }
        std::vector<std::string> expanded;
        for (const auto& v : f.categories) expanded.push_back(name + "=" + v);
        report.one_hot[name] = expanded;
      } else {
        std::vector<double> values;
        for (const auto& v : present) values.push_back(*detail::parse_number(v));
        std::vector<double> sorted = values;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t m = sorted.size();
        f.fill = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
        for (long k = 0; k < missing; ++k) values.push_back(f.fill);
        double sum = 0.0;
        for (double v : values) sum += v;
        f.mean = sum / n;
        double ss = 0.0;
        for (double v : values) ss += (v - f.mean) * (v - f.mean);
        f.std = std::sqrt(ss / n);
        if (!(f.std > 1e-12 * std::max(1.0, std::abs(f.mean)))) {
          report.dropped_features.push_back({name, "constant"});
          continue;
        }
        report.standardization[name] = {f.mean, f.std};
      }
      features_.push_back(std::move(f));
    }
    fitted_ = true;
  }

  GroupedDataset transform_rows(const RawTable& t, long& unseen) const {
    const Index target = t.column(schema_.target_column);
    const Index sensitive = t.column(schema_.sensitive_column);
    Index dim = 0;
    for (const auto& f : features_) dim += f.categorical ? static_cast<Index>(f.categories.size()) : 1;

    GroupedDataset d;
    d.x = Eigen::MatrixXd::Zero(static_cast<Index>(t.rows.size()), dim);
    for (const auto& f : features_) {
      if (f.categorical) {
        for (const auto& v : f.categories) d.feature_names.push_back(f.name + "=" + v);
      } else {
        d.feature_names.push_back(f.name);
      }
    }
    std::set<std::string> bad_targets, bad_groups;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto& row = t.rows[r];
      const std::string& tv = row[static_cast<std::size_t>(target)];
      if (detail::any_matches(schema_.positive_values, tv)) {
        d.y.push_back(1);
      } else if (detail::any_matches(schema_.negative_values, tv)) {
        d.y.push_back(-1);
      } else {
        bad_targets.insert(tv);
        d.y.push_back(0);
      }
      const std::string& sv = row[static_cast<std::size_t>(sensitive)];
      if (detail::any_matches(schema_.group_a_values, sv)) {
        d.s.push_back(Group::a);
      } else if (schema_.group_b_values.empty() ? !is_missing(sv)
                                                : detail::any_matches(schema_.group_b_values, sv)) {
        d.s.push_back(Group::b);
      } else {
        bad_groups.insert(sv);
        d.s.push_back(Group::b);
      }

      Index col = 0;
      for (const auto& f : features_) {
        const std::string& v = row[static_cast<std::size_t>(f.column)];
        if (f.categorical) {
          const std::string& key = is_missing(v) ? f.mode : v;
          const auto it = std::lower_bound(f.categories.begin(), f.categories.end(), key);
          if (it != f.categories.end() && *it == key) {
            d.x(static_cast<Index>(r), col + (it - f.categories.begin())) = 1.0;
          } else {
            ++unseen;
          }
          col += static_cast<Index>(f.categories.size());
        } else {
          const auto num = is_missing(v) ? std::optional<double>(f.fill) : detail::parse_number(v);
          if (!num) {
            throw InputError("column '" + f.name + "' has non-numeric value '" + v + "'");
          }
          d.x(static_cast<Index>(r), col) = (*num - f.mean) / f.std;
          ++col;
        }
      }
    }
    auto listing = [](const std::set<std::string>& vals) {
      std::string out;
      int shown = 0;
      for (const auto& v : vals) {
        if (shown++ == 10) {
          out += ", ...";
          break;
        }
        out += (out.empty() ? "'" : ", '") + v + "'";
      }
      return out;
    };
    if (!bad_targets.empty()) {
      throw InputError("target column '" + schema_.target_column + "' has unmapped values " +
                       listing(bad_targets));
    }
    if (!bad_groups.empty()) {
      throw InputError("sensitive column '" + schema_.sensitive_column +
                       "' has unmapped values " + listing(bad_groups));
    }
    return d;
  }

  DatasetSchema schema_;
  std::vector<Feature> features_;
  Index target_col_ = 0;
  Index sensitive_col_ = 0;
  bool fitted_ = false;
};

struct LoadedData {
  GroupedDataset train;
  std::optional<GroupedDataset> test;  // present when the schema provides a split
  PreprocessReport report;
};

/// Loads one file, fitting the preprocessing on its own rows.
inline LoadedData load_csv(const std::string& path, const DatasetSchema& schema,
                           int skip_rows = 0) {
  LoadedData out;
  Preprocessor pre(schema);
  out.train = pre.fit_transform(read_table(path, schema, skip_rows), out.report);
  return out;
}

/// Loads a train/test pair; the test file is transformed with training statistics.
inline LoadedData load_split(const std::string& train_path, const std::string& test_path,
                             const DatasetSchema& schema, int train_skip = 0, int test_skip = 0) {
  LoadedData out;
  Preprocessor pre(schema);
  out.train = pre.fit_transform(read_table(train_path, schema, train_skip), out.report);
  out.test = pre.transform(read_table(test_path, schema, test_skip), out.report);
  return out;
}

// ---------------------------------------------------------------------------
// Raw file integrity
// ---------------------------------------------------------------------------

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataIntegrityError("cannot read '" + path + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest initialisation failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  char byte[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof(byte), "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

/// Checks that every file of the schema exists in `dir` with the recorded
/// digest. Returns the names of files without a recorded digest.
inline std::vector<std::string> verify_files(const DatasetSchema& schema, const std::string& dir) {
  std::vector<std::string> unverified;
  for (const auto& f : schema.files) {
    const auto path = std::filesystem::path(dir) / f.name;
    if (!std::filesystem::exists(path)) {
      throw DataIntegrityError("missing raw file '" + path.string() + "'. Download it from " +
                               (f.url.empty() ? std::string("the dataset's source") : f.url) +
                               " into '" + dir + "'.");
    }
    if (f.sha256.empty()) {
      unverified.push_back(f.name);
      continue;
    }
    const std::string got = sha256_file(path.string());
    if (got != f.sha256) {
      throw DataIntegrityError("checksum mismatch for '" + path.string() + "': expected " +
                               f.sha256 + ", got " + got + ". Re-download it from " + f.url +
                               " or update the schema if the upstream file changed.");
    }
  }
  return unverified;
}

/// Fills in the empty sha256 entries of the schema file at `schema_path` with
/// the digests of the files found in `dir`; recorded digests are still
/// verified. Returns the names of the files whose digest was recorded.
inline std::vector<std::string> record_checksums(const std::string& schema_path, const std::string& dir) {
  std::ifstream in(schema_path);
  if (!in) throw InputError("cannot open schema '" + schema_path + "'");
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("schema '" + schema_path + "': " + e.what());
  }
  in.close();
  const DatasetSchema schema = schema_from_json(nlohmann::json::parse(j.dump()));
  const auto unverified = verify_files(schema, dir);
  if (unverified.empty()) return {};
  for (auto& f : j["files"]) {
    const std::string name = f.at("name").get<std::string>();
    if (std::find(unverified.begin(), unverified.end(), name) == unverified.end()) continue;
    f["sha256"] = sha256_file((std::filesystem::path(dir) / name).string());
  }
  std::ofstream out(schema_path);
  if (!out) throw std::runtime_error("cannot write '" + schema_path + "'");
  out << j.dump(2) << '\n';
  return unverified;
}

/// Verifies and loads the files named by the schema from `dir`.
inline LoadedData load_dataset(const DatasetSchema& schema, const std::string& dir) {
  const auto unverified = verify_files(schema, dir);
  const auto path = [&](const DataFile& f) { return (std::filesystem::path(dir) / f.name).string(); };
  LoadedData out;
  if (const DataFile* tr = schema.file("train")) {
    const DataFile* te = schema.file("test");
    if (te == nullptr) throw InputError("schema lists a train file without a test file");
    out = load_split(path(*tr), path(*te), schema, tr->skip_rows, te->skip_rows);
  } else if (const DataFile* d = schema.file("data")) {
    out = load_csv(path(*d), schema, d->skip_rows);
  } else {
    throw InputError("schema lists no data files");
  }
  for (const auto& name : unverified) out.report.notes.push_back("checksum not recorded for " + name);
  return out;
}

// ---------------------------------------------------------------------------
// Prepared dataset files: label,group,<features...>
// ---------------------------------------------------------------------------

inline void write_dataset_csv(const GroupedDataset& d, std::ostream& out) {
  out << "label,group";
  for (Index j = 0; j < d.dim(); ++j) {
    out << ',' << (d.feature_names.empty() ? "x" + std::to_string(j) : d.feature_names[static_cast<std::size_t>(j)]);
  }
  out << '\n';
  char buf[40];
  for (Index i = 0; i < d.size(); ++i) {
    out << d.y[static_cast<std::size_t>(i)] << ',' << to_string(d.s[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < d.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", d.x(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

inline void write_dataset_csv(const GroupedDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_dataset_csv(d, out);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline GroupedDataset read_dataset_csv(std::istream& in, const std::string& what = "dataset") {
  std::vector<std::string> rec;
  if (!detail::read_record(in, ',', rec) || rec.size() < 2 || rec[0] != "label" || rec[1] != "group") {
    throw InputError(what + ": expected a 'label,group,...' header");
  }
  GroupedDataset d;
  d.feature_names.assign(rec.begin() + 2, rec.end());
  const auto dim = static_cast<Index>(d.feature_names.size());
  std::vector<double> values;
  long line = 1;
  while (detail::read_record(in, ',', rec)) {
    ++line;
    if (rec.size() == 1 && rec[0].empty()) continue;
    if (static_cast<Index>(rec.size()) != dim + 2) {
      throw InputError(what + ": line " + std::to_string(line) + " has the wrong number of fields");
    }
    const auto label = detail::parse_number(rec[0]);
    if (!label || (*label != 1.0 && *label != -1.0)) {
      throw InputError(what + ": line " + std::to_string(line) + " has label '" + rec[0] + "'");
    }
    d.y.push_back(static_cast<Label>(*label));
    if (rec[1] != "a" && rec[1] != "b") {
      throw InputError(what + ": line " + std::to_string(line) + " has group '" + rec[1] + "'");
    }
    d.s.push_back(rec[1] == "a" ? Group::a : Group::b);
    for (Index j = 0; j < dim; ++j) {
      const auto v = detail::parse_number(rec[static_cast<std::size_t>(j + 2)]);
      if (!v) throw InputError(what + ": line " + std::to_string(line) + " has a non-numeric feature");
      values.push_back(*v);
    }
  }
  d.x.resize(static_cast<Index>(d.y.size()), dim);
  for (Index i = 0; i < d.x.rows(); ++i) {
    for (Index j = 0; j < dim; ++j) d.x(i, j) = values[static_cast<std::size_t>(i * dim + j)];
  }
  d.validate();
  return d;
}

inline GroupedDataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset '" + path + "'");
  return read_dataset_csv(in, path);
}

// ---------------------------------------------------------------------------
// Resampling and splits
// ---------------------------------------------------------------------------

/// Indices kept when the more frequent label is randomly thinned to the size
/// of the other. Returned in increasing order.
inline std::vector<Index> undersample_indices(const GroupedDataset& d, std::uint64_t seed) {
  d.validate();
  std::vector<Index> pos, neg;
  for (Index i = 0; i < d.size(); ++i) (d.y[static_cast<std::size_t>(i)] == 1 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw DegenerateProblemError("undersampling needs both labels");
  std::vector<Index>& major = pos.size() > neg.size() ? pos : neg;
  const std::vector<Index>& minor = pos.size() > neg.size() ? neg : pos;
  Rng rng(seed);
  rng.shuffle(major);
  major.resize(minor.size());
  std::vector<Index> keep = minor;
  keep.insert(keep.end(), major.begin(), major.end());
  std::sort(keep.begin(), keep.end());
  return keep;
}

inline GroupedDataset undersample_majority_label(const GroupedDataset& d, std::uint64_t seed) {
  return d.subset(undersample_indices(d, seed));
}

struct Fold {
  std::vector<Index> train;
  std::vector<Index> validation;
};

namespace detail {

// Shuffled member lists of the four (label, group) cells.
inline std::vector<std::vector<Index>> shuffled_cells(const GroupedDataset& d, Rng& rng) {
  std::vector<std::vector<Index>> cells(4);
  for (Index i = 0; i < d.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    cells[(d.y[k] == 1 ? 2u : 0u) + static_cast<std::size_t>(d.s[k])].push_back(i);
  }
  for (auto& c : cells) rng.shuffle(c);
  return cells;
}

}  // namespace detail

/// k folds stratified on the (label, group) cells. Cell members are dealt
/// round-robin with the dealer position carried across cells, so fold sizes
/// differ by at most one.
inline std::vector<Fold> make_folds(const GroupedDataset& d, int k, std::uint64_t seed) {
  d.validate();
  if (k < 2) throw InputError("make_folds: k must be at least 2");
  if (k > d.size()) {
    throw InputError("make_folds: k = " + std::to_string(k) + " exceeds n = " + std::to_string(d.size()));
  }
  Rng rng(seed);
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  std::size_t dealer = 0;
  for (const auto& cell : detail::shuffled_cells(d, rng)) {
    for (Index i : cell) {
      folds[dealer].validation.push_back(i);
      dealer = (dealer + 1) % folds.size();
    }
  }
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::sort(folds[f].validation.begin(), folds[f].validation.end());
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) folds[f].train.insert(folds[f].train.end(), folds[g].validation.begin(), folds[g].validation.end());
    }
    std::sort(folds[f].train.begin(), folds[f].train.end());
  }
  return folds;
}

/// Stratified holdout split; each cell contributes round(fraction * size)
/// samples to the test side, keeping at least one on the training side.
inline Fold holdout_split(const GroupedDataset& d, double test_fraction, std::uint64_t seed) {
  d.validate();
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InputError("holdout_split: test fraction must lie in (0, 1)");
  }
  Rng rng(seed);
  Fold out;
  for (const auto& cell : detail::shuffled_cells(d, rng)) {
    auto take = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(cell.size())));
    if (take >= cell.size() && !cell.empty()) take = cell.size() - 1;
    out.validation.insert(out.validation.end(), cell.begin(), cell.begin() + static_cast<long>(take));
    out.train.insert(out.train.end(), cell.begin() + static_cast<long>(take), cell.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

struct GaussianCell {
  Group group = Group::a;
  Label label = 1;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // empty: zero covariance
  Index count = 0;
};

/// Gaussian samples per (group, label) cell, emitted cell by cell.
inline GroupedDataset synthesize(const std::vector<GaussianCell>& cells, std::uint64_t seed) {
  if (cells.empty()) throw InputError("synthesize: no cells");
  const Index dim = cells.front().mean.size();
  Index n = 0;
  std::vector<Eigen::MatrixXd> factors;
  for (const auto& c : cells) {
    if (c.mean.size() != dim) throw InputError("synthesize: cell means differ in dimension");
    if (c.count < 0) throw InputError("synthesize: negative cell count");
    if (c.label != 1 && c.label != -1) throw InputError("synthesize: labels must be +-1");
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(dim, dim);
    if (c.cov.size() > 0) {
      if (c.cov.rows() != dim || c.cov.cols() != dim) throw InputError("synthesize: covariance shape");
      if ((c.cov - c.cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, c.cov.cwiseAbs().maxCoeff())) {
        throw InputError("synthesize: covariance is not symmetric");
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.cov);
      const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
      if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
        throw InputError("synthesize: covariance is not positive semidefinite");
      }
      L = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
    factors.push_back(std::move(L));
    n += c.count;
  }
  Rng rng(seed);
  GroupedDataset d;
  d.x.resize(n, dim);
  Index row = 0;
  Eigen::VectorXd z(dim);
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto& c = cells[k];
    for (Index i = 0; i < c.count; ++i, ++row) {
      for (Index j = 0; j < dim; ++j) z(j) = rng.normal();
      d.x.row(row) = (c.mean + factors[k] * z).transpose();
      d.y.push_back(c.label);
      d.s.push_back(c.group);
    }
  }
  for (Index j = 0; j < dim; ++j) d.feature_names.push_back("x" + std::to_string(j));
  return d;
}

/// Two-feature, four-cluster family with a majority of group-a positives and
/// a majority of group-b negatives. Feature 1 carries the group offset (+-1).
/// `scale` multiplies the base counts (150, 50, 30, 170) for a+, a-, b+, b-,
/// so scale 1 gives n = 400.
inline GroupedDataset mistreatment_family(std::uint64_t seed, double scale = 1.0) {
  if (!(scale > 0.0)) throw InputError("mistreatment_family: scale must be positive");
  auto cell = [&](Group g, Label y, double mx, double my, double count) {
    Eigen::Matrix2d cov;
    cov << 1.0, 0.0, 0.0, 0.25;
    return GaussianCell{g, y, Eigen::Vector2d(mx, my), cov,
                        static_cast<Index>(std::llround(count * scale))};
  };
  return synthesize({cell(Group::a, 1, 1.5, 1.0, 150), cell(Group::a, -1, -1.0, 1.0, 50),
                     cell(Group::b, 1, 1.0, -1.0, 30), cell(Group::b, -1, -0.3, -1.0, 170)},
                    seed);
}

/// Hyperparameters the family was calibrated with.
inline constexpr double kMistreatmentGamma = 0.1;
inline constexpr double kMistreatmentC = 0.1;

}  // namespace fairsvm
