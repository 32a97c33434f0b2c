#include <cmath>

#include <gtest/gtest.h>

#include "fairsvm/metrics.hpp"
#include "fairsvm/random.hpp"

namespace fairsvm {
namespace {

struct Labelled {
  std::vector<Label> pred, truth;
  std::vector<Group> group;

  void add(Group g, Label t, Label p, int count) {
    for (int i = 0; i < count; ++i) {
      pred.push_back(p);
      truth.push_back(t);
      group.push_back(g);
    }
  }
  EvalReport eval() const { return evaluate(pred, truth, group); }
};

TEST(Evaluate, FalsePositiveRatesFromCounts) {
  Labelled l;
  l.add(Group::a, -1, 1, 10);
  l.add(Group::a, -1, -1, 90);
  l.add(Group::b, -1, 1, 30);
  l.add(Group::b, -1, -1, 70);
  l.add(Group::a, 1, 1, 5);
  l.add(Group::b, 1, 1, 5);
  const EvalReport r = l.eval();
  EXPECT_DOUBLE_EQ(*r.fpr_a, 0.1);
  EXPECT_DOUBLE_EQ(*r.fpr_b, 0.3);
  EXPECT_NEAR(*r.dfpr, 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(*r.precision, 10.0 / 50.0);
  EXPECT_EQ(r.confusion[Group::a].total(), 105);
}

TEST(Evaluate, IdenticalRatesGiveZeroDisparity) {
  Labelled l;
  for (Group g : {Group::a, Group::b}) {
    l.add(g, 1, 1, 3);
    l.add(g, 1, -1, 1);
    l.add(g, -1, 1, 2);
    l.add(g, -1, -1, 6);
  }
  const EvalReport r = l.eval();
  EXPECT_EQ(*r.dfpr, 0.0);
  EXPECT_EQ(*r.deo, 0.0);
}

TEST(Evaluate, MatchesDoubleLoopCounting) {
  Rng rng(50);
  for (int trial = 0; trial < 30; ++trial) {
    Labelled l;
    for (int i = 0; i < 50; ++i) {
      l.pred.push_back(rng.below(2) ? 1 : -1);
      l.truth.push_back(rng.below(2) ? 1 : -1);
      l.group.push_back(rng.below(2) ? Group::a : Group::b);
    }
    const EvalReport r = l.eval();
    for (Group g : {Group::a, Group::b}) {
      long tp = 0, fp = 0, tn = 0, fn = 0;
      for (int p : {-1, 1}) {
        for (int t : {-1, 1}) {
          long count = 0;
          for (std::size_t i = 0; i < l.pred.size(); ++i) {
            count += l.group[i] == g && l.pred[i] == p && l.truth[i] == t;
          }
          if (p == 1 && t == 1) tp = count;
          if (p == 1 && t == -1) fp = count;
          if (p == -1 && t == -1) tn = count;
          if (p == -1 && t == 1) fn = count;
        }
      }
      EXPECT_EQ(r.confusion[g], (Confusion{tp, fp, tn, fn}));
    }
    double correct = 0;
    for (std::size_t i = 0; i < l.pred.size(); ++i) correct += l.pred[i] == l.truth[i];
    EXPECT_DOUBLE_EQ(r.accuracy, correct / 50.0);
  }
}

TEST(Evaluate, GroupSwapLeavesDisparitiesUnchanged) {
  Rng rng(51);
  Labelled l;
  for (int i = 0; i < 80; ++i) {
    l.pred.push_back(rng.below(3) ? 1 : -1);
    l.truth.push_back(rng.below(2) ? 1 : -1);
    l.group.push_back(rng.below(2) ? Group::a : Group::b);
  }
  Labelled swapped = l;
  for (Group& g : swapped.group) g = g == Group::a ? Group::b : Group::a;
  const EvalReport r = l.eval(), s = swapped.eval();
  EXPECT_EQ(*r.dfpr, *s.dfpr);
  EXPECT_EQ(*r.deo, *s.deo);
  EXPECT_EQ(*r.fpr_a, *s.fpr_b);
}

TEST(Evaluate, PerfectClassifier) {
  Labelled l;
  l.add(Group::a, 1, 1, 4);
  l.add(Group::a, -1, -1, 3);
  l.add(Group::b, 1, 1, 2);
  l.add(Group::b, -1, -1, 5);
  const EvalReport r = l.eval();
  EXPECT_EQ(*r.dfpr, 0.0);
  EXPECT_EQ(*r.deo, 0.0);
  EXPECT_EQ(*r.precision, 1.0);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Evaluate, EmptyCellsAreUndefinedNotNan) {
  Labelled l;
  l.add(Group::a, 1, 1, 3);
  l.add(Group::a, -1, -1, 3);
  l.add(Group::b, 1, -1, 2);  // group b has no negatives
  const EvalReport r = l.eval();
  EXPECT_FALSE(r.fpr_b.has_value());
  EXPECT_FALSE(r.dfpr.has_value());
  ASSERT_TRUE(r.deo.has_value());
  EXPECT_EQ(*r.deo, 1.0);
  EXPECT_FALSE(r.warnings.empty());
  const std::string row = to_csv_row(r);
  EXPECT_NE(row.find("undefined"), std::string::npos);
  EXPECT_EQ(row.find("nan"), std::string::npos);
  EXPECT_TRUE(to_json(r)["dfpr"].is_null());
}

TEST(Evaluate, LengthMismatchIsInputError) {
  const std::vector<Label> p = {1, -1}, t = {1};
  const std::vector<Group> g = {Group::a};
  EXPECT_THROW(evaluate(p, t, g), InputError);
}

TEST(Serialization, CsvAndJsonFieldsAgree) {
  Labelled l;
  l.add(Group::a, 1, 1, 3);
  l.add(Group::a, -1, 1, 1);
  l.add(Group::b, -1, -1, 2);
  l.add(Group::b, 1, -1, 2);
  const EvalReport r = l.eval();
  const auto& fields = eval_report_fields();
  const std::string header = eval_report_csv_header();
  std::vector<std::string> values;
  std::stringstream ss(to_csv_row(r));
  for (std::string v; std::getline(ss, v, ',');) values.push_back(v);
  ASSERT_EQ(values.size(), fields.size());
  const auto j = to_json(r);
  for (std::size_t i = 0; i < fields.size(); ++i) {
    ASSERT_TRUE(j.contains(fields[i]));
    if (j[fields[i]].is_null()) {
      EXPECT_EQ(values[i], "undefined");
    } else {
      EXPECT_EQ(std::stod(values[i]), j[fields[i]].get<double>()) << fields[i];
    }
  }
}

EvalReport with_rates(double tpr_a, double tpr_b, double fpr_a, double fpr_b) {
  EvalReport r;
  r.tpr_a = tpr_a;
  r.tpr_b = tpr_b;
  r.fpr_a = fpr_a;
  r.fpr_b = fpr_b;
  return r;
}

TEST(Probe, IdenticalReportsNotFlagged) {
  const std::vector<EvalReport> r = {with_rates(0.8, 0.6, 0.1, 0.2),
                                     with_rates(0.8, 0.6, 0.1, 0.2)};
  const auto d = disparate_mistreatment_probe(r);
  ASSERT_EQ(d.steps.size(), 1u);
  EXPECT_FALSE(d.any_flagged());
  EXPECT_EQ(*d.steps[0].d_tpr_a, 0.0);
}

TEST(Probe, OpposingTprMovesFlagged) {
  const std::vector<EvalReport> r = {with_rates(0.9, 0.6, 0.1, 0.1),
                                     with_rates(0.8, 0.7, 0.15, 0.2)};
  const auto d = disparate_mistreatment_probe(r);
  EXPECT_TRUE(d.steps[0].flagged);
  EXPECT_NEAR(*d.steps[0].d_tpr_a, -0.1, 1e-12);
  EXPECT_NEAR(*d.steps[0].d_tpr_b, 0.1, 1e-12);
  EXPECT_NEAR(*d.steps[0].d_fpr_b, 0.1, 1e-12);
}

TEST(Probe, SmallOrSameSignMovesNotFlagged) {
  const std::vector<EvalReport> r = {with_rates(0.9, 0.6, 0, 0), with_rates(0.895, 0.7, 0, 0),
                                     with_rates(0.95, 0.8, 0, 0)};
  const auto d = disparate_mistreatment_probe(r);
  ASSERT_EQ(d.steps.size(), 2u);
  EXPECT_FALSE(d.any_flagged());
  EXPECT_TRUE(disparate_mistreatment_probe(std::span<const EvalReport>(r.data(), 1)).steps.empty());
}

TEST(UniformBound, ClosedFormExamples) {
  EXPECT_EQ(uniform_bound(1.0, 1.0, 17), 0.0);
  EXPECT_NEAR(uniform_bound(std::exp(1.0), std::exp(-1.0), 1), 1.0, 1e-15);
  const double v = uniform_bound(100.0, 0.05, 500);
  EXPECT_NEAR(uniform_bound(100.0, 0.05, 1000), v / std::sqrt(2.0), 1e-15);
  EXPECT_LT(uniform_bound(10.0, 0.1, 1000000), uniform_bound(10.0, 0.1, 100));
  EXPECT_GE(uniform_bound(20.0, 0.1, 10), uniform_bound(10.0, 0.1, 10));
}

TEST(UniformBound, RejectsInvalidArguments) {
  EXPECT_THROW(uniform_bound(10.0, 0.0, 10), InputError);
  EXPECT_THROW(uniform_bound(10.0, 1.5, 10), InputError);
  EXPECT_THROW(uniform_bound(0.5, 0.5, 10), InputError);
  EXPECT_THROW(uniform_bound(10.0, 0.5, 0), InputError);
}

}  // namespace
}  // namespace fairsvm
