//
// Copyright 2026 The dpsyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "dpsyn/rongauss.h"

#include <cmath>
#include <vector>

#include "gtest/gtest.h"

namespace dpsyn {
namespace {

TEST(RonGaussTest, ProjectionIsOrthonormal) {
  for (auto [d, p] : std::vector<std::pair<int, int>>{{10, 3}, {50, 50}, {120, 100}}) {
    Rng rng = RngStream(1, d);
    Matrix w = RandomOrthonormal(d, p, rng);
    EXPECT_LT((w.transpose() * w - Matrix::Identity(p, p)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(RonGaussTest, InfiniteEpsilonMeanIsEmpiricalMean) {
  Rng rng = RngStream(2, 2);
  Matrix x = StandardNormalMatrix(30, 6, rng);
  x.rowwise().normalize();
  LabeledTable t = MakeTable(x, std::vector<int>(30, 0), 1);
  auto model = FitRonGauss(t, 4, PrivacySpec{}, rng);
  ASSERT_TRUE(model.ok());
  Vector expected = x.colwise().mean().transpose();
  EXPECT_LT((model->means[0] - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(model->mean_sigma[0], 0.0);
}

TEST(RonGaussTest, NoiseScaleFromUnitNormSensitivity) {
  Rng rng = RngStream(3, 3);
  Matrix x = StandardNormalMatrix(40, 5, rng);
  std::vector<int> y(40);
  for (int i = 0; i < 40; ++i) y[i] = i < 10 ? 0 : 1;
  LabeledTable t = MakeTable(x, y, 2);
  auto model = FitRonGauss(t, 3, PrivacySpec{2.0, 1e-5}, rng);
  ASSERT_TRUE(model.ok());
  EXPECT_DOUBLE_EQ(model->mean_sigma[0], *CalibrateGaussian(2.0 / 10, 1.0, 5e-6));
  EXPECT_DOUBLE_EQ(model->mean_sigma[1], *CalibrateGaussian(2.0 / 30, 1.0, 5e-6));
  for (const auto& cov : model->covs) {
    EXPECT_LT((cov - cov.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
  }
  EXPECT_NEAR(model->class_probs.sum(), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(model->class_probs[0], 0.25);
}

TEST(RonGaussTest, EmptyClassAndBadProjection) {
  Rng rng = RngStream(4, 4);
  LabeledTable t = MakeTable(Matrix::Ones(3, 2), {0, 0, 0}, 2);
  EXPECT_FALSE(FitRonGauss(t, 2, PrivacySpec{}, rng).ok());
  LabeledTable ok = MakeTable(Matrix::Ones(3, 2), {0, 0, 0}, 1);
  EXPECT_FALSE(FitRonGauss(ok, 3, PrivacySpec{}, rng).ok());
}

TEST(RonGaussTest, ZeroRowsWarn) {
  Rng rng = RngStream(5, 5);
  Matrix x = StandardNormalMatrix(5, 3, rng);
  x.row(2).setZero();
  Warnings w;
  auto model = FitRonGauss(MakeTable(x, std::vector<int>(5, 0), 1), 2, PrivacySpec{}, rng, &w);
  ASSERT_TRUE(model.ok());
  ASSERT_FALSE(w.empty());
  EXPECT_NE(w[0].find("ZeroVector"), std::string::npos);
}

TEST(RonGaussTest, ZeroCovarianceGivesDoubledMeanDirection) {
  Rng rng = RngStream(6, 6);
  RonGaussModel m;
  m.projection = RandomOrthonormal(5, 2, rng);
  m.means = {StandardNormalVector(5, rng)};
  m.covs = {Matrix::Zero(2, 2)};
  m.class_probs = Vector::Ones(1);
  Matrix s = SampleRonGaussClass(m, 0, 7, rng);
  Vector expected = m.projection * m.projection.transpose() * m.means[0] + m.means[0];
  for (int i = 0; i < 7; ++i) {
    EXPECT_LT((s.row(i).transpose() - expected).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(RonGaussTest, SampledProjectedCovarianceMatches) {
  Rng rng = RngStream(7, 7);
  RonGaussModel m;
  m.projection = RandomOrthonormal(6, 3, rng);
  m.means = {StandardNormalVector(6, rng)};
  Matrix a = StandardNormalMatrix(3, 3, rng);
  m.covs = {a * a.transpose()};
  m.class_probs = Vector::Ones(1);
  const int n = 100000;
  Matrix s = SampleRonGaussClass(m, 0, n, rng);
  Matrix z = m.projection.transpose() * (s.transpose().colwise() - m.means[0]);  // 3 x n
  Vector zmean = z.rowwise().mean();
  Matrix centered = z.colwise() - zmean;
  Matrix emp = centered * centered.transpose() / (n - 1.0);
  EXPECT_LT((emp - m.covs[0]).norm() / m.covs[0].norm(), 0.05);
}

TEST(RonGaussTest, LabelCountsWithinBinomialBand) {
  Rng rng = RngStream(8, 8);
  RonGaussModel m;
  m.projection = RandomOrthonormal(3, 2, rng);
  m.means = {Vector::Zero(3), Vector::Ones(3)};
  m.covs = {Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  m.class_probs = Vector::Constant(2, 0.5);
  LabeledTable schema = MakeTable(Matrix(0, 3), {}, 2);
  LabeledTable s = SampleRonGauss(m, 10000, schema, rng);
  const double band = 3.0 * std::sqrt(10000 * 0.25);
  EXPECT_NEAR(s.ClassCounts()[0], 5000, band);
  EXPECT_EQ(s.num_features(), 3);

  Rng a = RngStream(9, 9), b = RngStream(9, 9);
  EXPECT_EQ(SampleRonGauss(m, 50, schema, a).features, SampleRonGauss(m, 50, schema, b).features);
}

TEST(RonGaussTest, FullRankNoiselessClassMeansConverge) {
  // p = d, epsilon = inf: sample means approach 2 mu (double-counted mean).
  Rng rng = RngStream(10, 10);
  Matrix x = StandardNormalMatrix(200, 4, rng);
  x.col(0).array() += 3.0;
  auto model = FitRonGauss(MakeTable(x, std::vector<int>(200, 0), 1), 4, PrivacySpec{}, rng);
  Matrix s = SampleRonGaussClass(*model, 0, 50000, rng);
  Vector mean = s.colwise().mean().transpose();
  EXPECT_LT((mean - 2.0 * model->means[0]).cwiseAbs().maxCoeff(), 0.02);
}

TEST(RonGaussTest, JsonRoundTrip) {
  Rng rng = RngStream(11, 11);
  auto model = FitRonGauss(MakeTable(StandardNormalMatrix(20, 4, rng), std::vector<int>(20, 0), 1),
                           2, PrivacySpec{3.0, 1e-5}, rng);
  auto back = RonGaussFromJson(nlohmann::json::parse(ToJson(*model).dump()));
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(back->projection, model->projection);
  EXPECT_EQ(back->covs[0], model->covs[0]);
  EXPECT_EQ(back->means[0], model->means[0]);
}

}  // namespace
}  // namespace dpsyn
