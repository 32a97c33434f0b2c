#include <cmath>

#include <gtest/gtest.h>

#include "fairsvm/kernels.hpp"
#include "fairsvm/random.hpp"
#include "oracles.hpp"

namespace fairsvm {
namespace {

Eigen::MatrixXd random_points(Rng& rng, Index n, Index d) {
  Eigen::MatrixXd x(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < d; ++k) x(i, k) = 2.0 * rng.normal();
  return x;
}

TEST(KernelEval, RbfOfIdenticalPointsIsOne) {
  Eigen::Vector3d x(0.3, -1.2, 4.0);
  for (double gamma : {1e-3, 0.5, 10.0}) {
    EXPECT_EQ(kernel_eval(KernelSpec::rbf(gamma), x, x), 1.0);
  }
}

TEST(KernelEval, LinearIsDotProduct) {
  EXPECT_DOUBLE_EQ(kernel_eval(KernelSpec::linear(), Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4)),
                   11.0);
}

TEST(KernelEval, RbfHandValue) {
  // exp(-0.5 * |(0,0) - (2,0)|^2) = exp(-2)
  const double k = kernel_eval(KernelSpec::rbf(0.5), Eigen::Vector2d(0, 0), Eigen::Vector2d(2, 0));
  EXPECT_NEAR(k, 0.1353352832366127, 1e-15);
  EXPECT_NEAR(k, 0.135335, 1e-6);
}

TEST(KernelEval, PolynomialMatchesFormula) {
  const auto spec = KernelSpec::polynomial(3, 0.5, 1.0);
  // (0.5 * 11 + 1)^3
  EXPECT_DOUBLE_EQ(kernel_eval(spec, Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4)), 274.625);
}

TEST(KernelEval, SymmetricInArguments) {
  Rng rng(3);
  for (auto spec : {KernelSpec::linear(), KernelSpec::rbf(0.7), KernelSpec::polynomial(2)}) {
    const Eigen::MatrixXd x = random_points(rng, 2, 5);
    EXPECT_EQ(kernel_eval(spec, x.row(0), x.row(1)), kernel_eval(spec, x.row(1), x.row(0)));
  }
}

TEST(KernelEval, DimensionMismatchIsInputError) {
  EXPECT_THROW(kernel_eval(KernelSpec::rbf(1.0), Eigen::Vector2d(0, 0), Eigen::Vector3d(0, 0, 0)),
               InputError);
}

TEST(KernelSpec, RejectsInvalidParameters) {
  EXPECT_THROW(KernelSpec::rbf(0.0).validate(), InputError);
  EXPECT_THROW(KernelSpec::rbf(-1.0).validate(), InputError);
  EXPECT_THROW(KernelSpec::polynomial(0).validate(), InputError);
  EXPECT_THROW(KernelSpec::polynomial(2, 1.0, -0.5).validate(), InputError);
  EXPECT_NO_THROW(KernelSpec::linear().validate());
}

TEST(Gram, SinglePointRbf) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(1, 3, 0.25);
  const Eigen::MatrixXd k = gram(KernelSpec::rbf(2.0), x);
  ASSERT_EQ(k.rows(), 1);
  EXPECT_EQ(k(0, 0), 1.0);
}

TEST(Gram, TwoIdenticalPointsRbf) {
  Eigen::MatrixXd x(2, 2);
  x << 1.5, -2.0, 1.5, -2.0;
  EXPECT_EQ(gram(KernelSpec::rbf(0.3), x), Eigen::MatrixXd::Ones(2, 2));
}

TEST(Gram, LinearEqualsNaiveXXt) {
  Rng rng(11);
  const Eigen::MatrixXd x = random_points(rng, 3, 4);
  Eigen::MatrixXd expected(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += x(i, k) * x(j, k);
      expected(i, j) = s;
    }
  EXPECT_LE((gram(KernelSpec::linear(), x) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gram, CrossGramMatchesNaive) {
  Rng rng(12);
  const Eigen::MatrixXd a = random_points(rng, 4, 3), b = random_points(rng, 6, 3);
  const auto spec = KernelSpec::rbf(0.2);
  const Eigen::MatrixXd k = gram(spec, a, b);
  ASSERT_EQ(k.rows(), 4);
  ASSERT_EQ(k.cols(), 6);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j)
      EXPECT_NEAR(k(i, j), testing::naive_kernel(spec, a.row(i), b.row(j)), 1e-15);
  EXPECT_THROW(gram(spec, a, Eigen::MatrixXd::Zero(2, 4)), InputError);
}

TEST(Gram, DatasetOverloadTagsSources) {
  GroupedDataset d;
  d.x = Eigen::MatrixXd::Identity(3, 2);
  d.y = {1, -1, 1};
  d.s = {Group::a, Group::b, Group::a};
  GroupedDataset other = d;
  other.x(0, 0) = 5.0;
  const GramMatrix self = gram(KernelSpec::rbf(1.0), d, d);
  EXPECT_TRUE(self.is_self());
  const GramMatrix cross = gram(KernelSpec::rbf(1.0), d, other);
  EXPECT_FALSE(cross.is_self());
  EXPECT_EQ(cross.values.rows(), 3);
}

// Property sweep over random datasets with n <= 50.
TEST(GramProperties, SymmetricPsdAndBounded) {
  Rng rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.below(50));
    const Index d = 1 + static_cast<Index>(rng.below(6));
    const Eigen::MatrixXd x = random_points(rng, n, d);
    const double gamma = std::pow(10.0, -2.0 + 3.0 * rng.uniform());
    for (auto spec : {KernelSpec::rbf(gamma), KernelSpec::linear(),
                      KernelSpec::polynomial(2, 0.3, 1.0)}) {
      const Eigen::MatrixXd k = gram(spec, x);
      double asym = 0.0;
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) asym = std::max(asym, std::abs(k(i, j) - k(j, i)));
      EXPECT_LE(asym, 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k, Eigen::EigenvaluesOnly);
      const double scale = std::max(1.0, k.diagonal().maxCoeff());
      EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-8 * scale) << to_string(spec.family);
      if (spec.family == KernelFamily::rbf) {
        EXPECT_GE(k.minCoeff(), 0.0);  // distant points may underflow to zero
        EXPECT_LE(k.maxCoeff(), 1.0);
        for (Index i = 0; i < n; ++i) EXPECT_EQ(k(i, i), 1.0);
      }
    }
  }
}

TEST(GramProperties, BitwiseIndependentOfWorkerCount) {
  Rng rng(5);
  const Eigen::MatrixXd x = random_points(rng, 37, 4), y = random_points(rng, 23, 4);
  const auto spec = KernelSpec::rbf(0.37);
  const Eigen::MatrixXd ref = gram(spec, x, 1);
  const Eigen::MatrixXd ref_cross = gram(spec, x, y, 1);
  for (unsigned workers : {2u, 3u, 8u}) {
    EXPECT_TRUE((gram(spec, x, workers).array() == ref.array()).all());
    EXPECT_TRUE((gram(spec, x, y, workers).array() == ref_cross.array()).all());
  }
}

}  // namespace
}  // namespace fairsvm
