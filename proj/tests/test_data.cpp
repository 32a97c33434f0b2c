#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "fairsvm/data.hpp"

namespace fairsvm {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("fairsvm_test_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::ofstream(p) << content;
    return p.string();
  }
  std::string str() const { return path_.string(); }

 private:
  fs::path path_;
};

DatasetSchema toy_schema() {
  return schema_from_json(nlohmann::json::parse(R"({
    "name": "toy",
    "target_column": "outcome",
    "positive_values": ["yes"],
    "negative_values": ["no"],
    "sensitive_column": "sex",
    "group_a_values": ["M"],
    "categorical_columns": ["color"],
    "drop_columns": ["id"],
    "missing_token": "?",
    "unknown_drop_threshold": 0.3
  })"));
}

constexpr const char* kToy =
    "id,age,color,score,mostly_missing,sex,outcome\n"
    "1,1,red,?,?,M,yes\n"
    "2,2,blue,4,?,F,no\n"
    "3,3,?,6,1,F,yes\n"
    "4,?,red,8,?,M,no\n";

TEST(Schema, RejectsInconsistentDefinitions) {
  auto j = nlohmann::json::parse(R"({"target_column": "t", "positive_values": ["1"],
      "negative_values": ["0"], "sensitive_column": "s", "group_a_values": ["x"],
      "drop_columns": ["t"]})");
  EXPECT_THROW(schema_from_json(j), InputError);
  j["drop_columns"] = nlohmann::json::array();
  EXPECT_NO_THROW(schema_from_json(j));
  j["row_filters"] = {{{"column", "t"}, {"op", "~"}, {"value", "1"}}};
  EXPECT_THROW(schema_from_json(j), InputError);
}

TEST(LoadCsv, StandardizesImputesAndEncodes) {
  TempDir dir;
  const LoadedData r = load_csv(dir.file("toy.csv", kToy), toy_schema());
  const GroupedDataset& d = r.train;
  ASSERT_EQ(d.size(), 4);
  EXPECT_EQ(d.y, (std::vector<Label>{1, -1, 1, -1}));
  EXPECT_EQ(d.s, (std::vector<Group>{Group::a, Group::b, Group::b, Group::a}));
  EXPECT_EQ(d.feature_names,
            (std::vector<std::string>{"age", "color=blue", "color=red", "score"}));

  // age: 1, 2, 3 and a median fill of 2 -> mean 2, population std sqrt(1/2).
  const double sd = std::sqrt(0.5);
  EXPECT_NEAR(d.x(0, 0), -1.0 / sd, 1e-12);
  EXPECT_NEAR(d.x(3, 0), 0.0, 1e-12);
  // color: missing row 2 takes the mode "red".
  EXPECT_EQ(d.x(2, 1), 0.0);
  EXPECT_EQ(d.x(2, 2), 1.0);
  for (Index i = 0; i < d.size(); ++i) EXPECT_EQ(d.x(i, 1) + d.x(i, 2), 1.0);

  ASSERT_EQ(r.report.dropped_features.size(), 1u);
  EXPECT_EQ(r.report.dropped_features[0].name, "mostly_missing");
  EXPECT_EQ(r.report.imputed_counts.at("age"), 1);
  EXPECT_EQ(r.report.imputed_counts.at("score"), 1);
  EXPECT_EQ(r.report.rows_read, r.report.rows_kept + r.report.rows_filtered);
  EXPECT_EQ(r.report.feature_count, 4);
}

TEST(LoadCsv, StandardizedColumnExample) {
  TempDir dir;
  const std::string path = dir.file("c.csv", "v,s,t\n1,a,1\n2,b,0\n3,a,1\n");
  DatasetSchema s = schema_from_json(nlohmann::json::parse(R"({"target_column": "t",
      "positive_values": ["1"], "negative_values": ["0"], "sensitive_column": "s",
      "group_a_values": ["a"]})"));
  const GroupedDataset d = load_csv(path, s).train;
  EXPECT_NEAR(d.x(0, 0), -1.224744871391589, 1e-12);
  EXPECT_NEAR(d.x(1, 0), 0.0, 1e-15);
  EXPECT_NEAR(d.x(2, 0), 1.224744871391589, 1e-12);
}

TEST(LoadCsv, TrainingColumnsHaveUnitStatistics) {
  TempDir dir;
  std::ostringstream csv;
  csv << "a,b,k,s,t\n";
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    csv << 5 + 3 * rng.normal() << ',' << rng.uniform() * 100 << ",7," << (i % 2 ? "g" : "h")
        << ',' << (i % 3 ? "p" : "n") << '\n';
  }
  DatasetSchema s = schema_from_json(nlohmann::json::parse(R"({"target_column": "t",
      "positive_values": ["p"], "negative_values": ["n"], "sensitive_column": "s",
      "group_a_values": ["g"]})"));
  const LoadedData r = load_csv(dir.file("u.csv", csv.str()), s);
  ASSERT_EQ(r.train.dim(), 2);  // the constant column is dropped
  EXPECT_EQ(r.report.dropped_features.at(0).reason, "constant");
  for (Index j = 0; j < 2; ++j) {
    const Eigen::VectorXd c = r.train.x.col(j);
    const double mean = c.mean();
    const double sd = std::sqrt((c.array() - mean).square().mean());
    EXPECT_LE(std::abs(mean), 1e-9);
    EXPECT_LE(std::abs(sd - 1.0), 1e-9);
  }
}

TEST(LoadSplit, TestUsesTrainingStatistics) {
  TempDir dir;
  const std::string train = dir.file("tr.csv", "v,s,t\n1,a,1\n2,b,0\n3,a,1\n");
  const std::string test = dir.file("te.csv", "v,s,t\n10,a,1\n11,b,0\n");
  DatasetSchema s = schema_from_json(nlohmann::json::parse(R"({"target_column": "t",
      "positive_values": ["1"], "negative_values": ["0"], "sensitive_column": "s",
      "group_a_values": ["a"]})"));
  const LoadedData r = load_split(train, test, s);
  ASSERT_TRUE(r.test.has_value());
  const double sd = std::sqrt(2.0 / 3.0);
  EXPECT_NEAR(r.test->x(0, 0), 8.0 / sd, 1e-12);
  EXPECT_GT(r.test->x.col(0).mean(), 1.0);
  EXPECT_EQ(r.report.test_rows_kept, 2);
}

TEST(LoadCsv, UnmappedValuesAreListed) {
  TempDir dir;
  const std::string path = dir.file("bad.csv", "v,s,t\n1,a,1\n2,b,maybe\n3,a,unsure\n");
  DatasetSchema s = schema_from_json(nlohmann::json::parse(R"({"target_column": "t",
      "positive_values": ["1"], "negative_values": ["0"], "sensitive_column": "s",
      "group_a_values": ["a"]})"));
  try {
    load_csv(path, s);
    FAIL();
  } catch (const InputError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'maybe'"), std::string::npos);
    EXPECT_NE(msg.find("'unsure'"), std::string::npos);
  }
}

TEST(LoadCsv, RowFiltersAndQuotedFields) {
  TempDir dir;
  const std::string path = dir.file("f.csv",
                                    "v,desc,s,t\n"
                                    "1,\"a, quoted\",a,1\n"
                                    "40,plain,b,0\n"
                                    "3,\"say \"\"hi\"\"\",a,0\n"
                                    "2,x,b,1\n");
  DatasetSchema s = schema_from_json(nlohmann::json::parse(R"({"target_column": "t",
      "positive_values": ["1"], "negative_values": ["0"], "sensitive_column": "s",
      "group_a_values": ["a"], "feature_columns": ["v"],
      "row_filters": [{"column": "v", "op": "<=", "value": 30}]})"));
  const LoadedData r = load_csv(path, s);
  EXPECT_EQ(r.report.rows_read, 4);
  EXPECT_EQ(r.report.rows_filtered, 1);
  EXPECT_EQ(r.train.size(), 3);
  const RawTable t = read_table(path, s);
  EXPECT_EQ(t.rows[0][1], "a, quoted");
  EXPECT_EQ(t.rows[2][1], "say \"hi\"");
}

TEST(Integrity, ChecksumsAndMissingFiles) {
  TempDir dir;
  dir.file("abc.txt", "abc");
  EXPECT_EQ(sha256_file(dir.str() + "/abc.txt"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  DatasetSchema s = toy_schema();
  s.files = {{"data", "abc.txt", "https://example.org/abc", "deadbeef", 0}};
  EXPECT_THROW(verify_files(s, dir.str()), DataIntegrityError);
  s.files[0].sha256 = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad";
  EXPECT_TRUE(verify_files(s, dir.str()).empty());
  s.files[0].name = "absent.txt";
  EXPECT_THROW(verify_files(s, dir.str()), DataIntegrityError);
}

TEST(DatasetCsv, RoundTripIsExact) {
  Rng rng(8);
  std::vector<GaussianCell> cells = {
      {Group::a, 1, Eigen::Vector2d(1.0, 0.5), Eigen::Matrix2d::Identity(), 5},
      {Group::b, -1, Eigen::Vector2d(-1.0, 0.0), Eigen::Matrix2d::Identity() * 0.1, 4}};
  const GroupedDataset d = synthesize(cells, 12);
  std::stringstream buf;
  write_dataset_csv(d, buf);
  const GroupedDataset back = read_dataset_csv(buf);
  EXPECT_TRUE((back.x.array() == d.x.array()).all());
  EXPECT_EQ(back.y, d.y);
  EXPECT_EQ(back.s, d.s);
  EXPECT_EQ(fingerprint(back), fingerprint(d));
}

GroupedDataset labelled(std::vector<Label> y, std::vector<Group> s) {
  GroupedDataset d;
  d.x = Eigen::MatrixXd::Zero(static_cast<Index>(y.size()), 1);
  for (Index i = 0; i < d.x.rows(); ++i) d.x(i, 0) = static_cast<double>(i);
  d.y = std::move(y);
  d.s = std::move(s);
  return d;
}

TEST(Undersample, ForcesEqualLabelCounts) {
  const GroupedDataset d = labelled({1, 1, -1, 1}, {Group::a, Group::b, Group::a, Group::b});
  const GroupedDataset u = undersample_majority_label(d, 5);
  EXPECT_EQ(u.size(), 2);
  EXPECT_EQ(u.count_label(1), 1);
  EXPECT_EQ(u.count_label(-1), 1);
  EXPECT_EQ(undersample_indices(d, 5), undersample_indices(d, 5));

  const GroupedDataset balanced = labelled({1, -1, 1, -1}, {Group::a, Group::a, Group::b, Group::b});
  EXPECT_EQ(undersample_indices(balanced, 1), (std::vector<Index>{0, 1, 2, 3}));
}

TEST(Undersample, MinoritySamplesUntouched) {
  std::vector<Label> y;
  std::vector<Group> s;
  for (int i = 0; i < 30; ++i) {
    y.push_back(i % 4 == 0 ? -1 : 1);
    s.push_back(i % 2 ? Group::a : Group::b);
  }
  const GroupedDataset d = labelled(y, s);
  const auto keep = undersample_indices(d, 77);
  for (Index i = 0; i < d.size(); ++i) {
    if (d.y[static_cast<std::size_t>(i)] == -1) {
      EXPECT_TRUE(std::binary_search(keep.begin(), keep.end(), i));
    }
  }
  EXPECT_NE(undersample_indices(d, 77), undersample_indices(d, 78));
}

TEST(Folds, PartitionAndSizes) {
  std::vector<Label> y(10, 1);
  std::vector<Group> s(10, Group::a);
  for (int i = 0; i < 10; i += 2) y[static_cast<std::size_t>(i)] = -1;
  const auto folds = make_folds(labelled(y, s), 5, 3);
  ASSERT_EQ(folds.size(), 5u);
  std::set<Index> all;
  for (const auto& f : folds) {
    EXPECT_EQ(f.validation.size(), 2u);
    EXPECT_EQ(f.train.size() + f.validation.size(), 10u);
    all.insert(f.validation.begin(), f.validation.end());
  }
  EXPECT_EQ(all.size(), 10u);
}

TEST(Folds, StratifiedTrainingSplitsCoverCells) {
  const GroupedDataset d = labelled({1, 1, -1, -1, 1, 1, -1, -1},
                                    {Group::a, Group::a, Group::a, Group::a, Group::b, Group::b,
                                     Group::b, Group::b});
  for (int k : {2, 4}) {
    for (const auto& f : make_folds(d, k, 11)) {
      const GroupedDataset tr = d.subset(f.train);
      for (Group g : {Group::a, Group::b}) {
        for (Label l : {-1, 1}) EXPECT_GE(tr.count(g, l), 1);
      }
    }
  }
}

TEST(Folds, DeterministicAndValidated) {
  Rng rng(2);
  std::vector<Label> y;
  std::vector<Group> s;
  for (int i = 0; i < 37; ++i) {
    y.push_back(rng.below(2) ? 1 : -1);
    s.push_back(rng.below(2) ? Group::a : Group::b);
  }
  const GroupedDataset d = labelled(y, s);
  const auto a = make_folds(d, 5, 9), b = make_folds(d, 5, 9);
  for (std::size_t f = 0; f < a.size(); ++f) EXPECT_EQ(a[f].validation, b[f].validation);
  EXPECT_THROW(make_folds(d, 38, 1), InputError);
  EXPECT_THROW(make_folds(d, 1, 1), InputError);
}

TEST(Holdout, StratifiedAndDisjoint) {
  std::vector<Label> y;
  std::vector<Group> s;
  for (int i = 0; i < 100; ++i) {
    y.push_back(i % 5 == 0 ? 1 : -1);
    s.push_back(i % 3 == 0 ? Group::a : Group::b);
  }
  const GroupedDataset d = labelled(y, s);
  const Fold f = holdout_split(d, 0.3, 4);
  std::vector<Index> merged = f.train;
  merged.insert(merged.end(), f.validation.begin(), f.validation.end());
  std::sort(merged.begin(), merged.end());
  for (Index i = 0; i < 100; ++i) EXPECT_EQ(merged[static_cast<std::size_t>(i)], i);
  const GroupedDataset te = d.subset(f.validation);
  EXPECT_NEAR(static_cast<double>(te.count_label(1)) / te.size(), 0.2, 0.05);
}

TEST(Synthesize, ExactCountsAndPlantedPoints) {
  std::vector<GaussianCell> cells;
  for (Group g : {Group::a, Group::b}) {
    for (Label l : {-1, 1}) {
      cells.push_back({g, l, Eigen::Vector2d(l, g == Group::a ? 1.0 : -1.0), {}, 100});
    }
  }
  const GroupedDataset d = synthesize(cells, 1);
  EXPECT_EQ(d.size(), 400);
  for (Group g : {Group::a, Group::b}) {
    for (Label l : {-1, 1}) EXPECT_EQ(d.count(g, l), 100);
  }
  for (Index i = 0; i < d.size(); ++i) {
    EXPECT_EQ(d.x(i, 0), d.y[static_cast<std::size_t>(i)]);  // zero variance
  }
}

TEST(Synthesize, SampleMeanWithinFiveSigma) {
  Eigen::Matrix2d cov;
  cov << 2.0, 0.6, 0.6, 1.0;
  const GaussianCell cell{Group::a, 1, Eigen::Vector2d(3.0, -1.0), cov, 10000};
  const GroupedDataset d = synthesize({cell}, 99);
  const Eigen::RowVector2d mean = d.x.colwise().mean();
  for (Index j = 0; j < 2; ++j) {
    EXPECT_LE(std::abs(mean(j) - cell.mean(j)), 5.0 * std::sqrt(cov(j, j) / 10000.0));
  }
  const Eigen::MatrixXd centered = d.x.rowwise() - mean;
  const Eigen::MatrixXd emp = centered.transpose() * centered / 10000.0;
  EXPECT_NEAR(emp(0, 1), 0.6, 0.1);
}

TEST(Synthesize, DeterministicAndValidated) {
  const GaussianCell cell{Group::b, -1, Eigen::Vector2d(0, 0), Eigen::Matrix2d::Identity(), 5};
  EXPECT_TRUE((synthesize({cell}, 4).x.array() == synthesize({cell}, 4).x.array()).all());
  GaussianCell bad = cell;
  bad.cov << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(synthesize({bad}, 1), InputError);
}

TEST(MistreatmentFamily, CellCountsScale) {
  const GroupedDataset d = mistreatment_family(2);
  EXPECT_EQ(d.size(), 400);
  EXPECT_EQ(d.count(Group::a, 1), 150);
  EXPECT_EQ(d.count(Group::a, -1), 50);
  EXPECT_EQ(d.count(Group::b, 1), 30);
  EXPECT_EQ(d.count(Group::b, -1), 170);
  const GroupedDataset big = mistreatment_family(2, 2.5);
  EXPECT_EQ(big.size(), 1000);
  EXPECT_EQ(big.count(Group::b, 1), 75);
  EXPECT_TRUE((mistreatment_family(2).x.array() == d.x.array()).all());
  EXPECT_FALSE((mistreatment_family(3).x.array() == d.x.array()).all());
}

TEST(MistreatmentFamily, GroupsSeparateOnSecondAxis) {
  const GroupedDataset d = mistreatment_family(5, 10.0);
  double a = 0, b = 0;
  for (Index i = 0; i < d.size(); ++i) (d.s[static_cast<std::size_t>(i)] == Group::a ? a : b) += d.x(i, 1);
  EXPECT_NEAR(a / static_cast<double>(d.count(Group::a, 1) + d.count(Group::a, -1)), 1.0, 0.05);
  EXPECT_NEAR(b / static_cast<double>(d.count(Group::b, 1) + d.count(Group::b, -1)), -1.0, 0.05);
}

}  // namespace
}  // namespace fairsvm
