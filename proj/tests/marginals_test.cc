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

#include "dpsyn/marginals.h"

#include <cmath>
#include <vector>

#include "gtest/gtest.h"

namespace dpsyn {
namespace {

LabeledTable Binned(const std::vector<std::vector<int>>& rows, const std::vector<int>& labels,
                    std::vector<int> domain, int num_classes) {
  Matrix x(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) x(i, j) = rows[i][j];
  }
  LabeledTable t = MakeTable(x, labels, num_classes);
  t.domain_sizes = std::move(domain);
  return t;
}

TEST(MeasureTest, BinaryFeature) {
  LabeledTable t = Binned({{0}, {0}, {1}, {1}}, {0, 0, 0, 0}, {2}, 1);
  auto m = Measure(t, {0});
  ASSERT_TRUE(m.ok());
  EXPECT_EQ(m->probs, Vector::Constant(2, 0.5));
}

TEST(MeasureTest, PairCoveringEveryCellOnce) {
  LabeledTable t = Binned({{0}, {0}, {1}, {1}}, {0, 1, 0, 1}, {2}, 2);
  auto m = Measure(t, {0, 1});
  ASSERT_TRUE(m.ok());
  EXPECT_EQ(m->probs, Vector::Constant(4, 0.25));
}

TEST(MeasureTest, PairMarginalizesToSingletons) {
  LabeledTable t = Binned({{0}, {3}, {1}, {3}, {2}, {3}}, {0, 1, 2, 1, 1, 0}, {4}, 3);
  auto pair = Measure(t, {0, 1});
  auto label = Measure(t, {1});
  auto feature = Measure(t, {0});
  EXPECT_EQ(MarginOf(*pair, 1), label->probs);
  EXPECT_EQ(MarginOf(*pair, 0), feature->probs);
  // Layout: x * C + y.
  EXPECT_DOUBLE_EQ(pair->probs[3 * 3 + 1], 2.0 / 6.0);
}

TEST(MeasureTest, RejectsContinuousTable) {
  LabeledTable t = MakeTable(Matrix::Zero(2, 1), {0, 0}, 1);
  EXPECT_FALSE(Measure(t, {0}).ok());
}

TEST(AddNoiseTest, InfiniteEpsilonUnchanged) {
  MarginalTable m{{0}, {3}, Vector::Constant(3, 1.0 / 3.0), 0.0, 10};
  Rng rng = RngStream(1, 1);
  auto out = AddNoise(m, kInfinity, 1e-5, 10, rng);
  EXPECT_EQ(out->probs, m.probs);
  EXPECT_EQ(out->noise_sigma, 0.0);
}

TEST(AddNoiseTest, ProbabilitySpaceStdIsSigmaOverN) {
  const int cells = 100000;
  MarginalTable m{{0}, {cells}, Vector::Zero(cells), 0.0, 0};
  Rng rng = RngStream(2, 2);
  auto out = AddNoise(m, 1.0, 1e-5, 500.0, rng);
  const double sigma = *CalibrateGaussian(1.0, 1.0, 1e-5);
  EXPECT_DOUBLE_EQ(out->noise_sigma, sigma);
  const double sd = std::sqrt(out->probs.squaredNorm() / cells);
  EXPECT_NEAR(sd, sigma / 500.0, 0.01 * sigma / 500.0);

  Rng a = RngStream(3, 3), b = RngStream(3, 3);
  EXPECT_EQ(AddNoise(m, 1.0, 1e-5, 50, a)->probs, AddNoise(m, 1.0, 1e-5, 50, b)->probs);
}

MarginalSet OneTable(Vector probs) {
  MarginalSet set;
  set.num_features = 1;
  set.domain = {static_cast<int>(probs.size()), 2};
  set.tables.push_back({{0}, {static_cast<int>(probs.size())}, std::move(probs), 1.0, 10});
  return set;
}

TEST(RepairTest, ClipThenNormalize) {
  Vector p(3);
  p << -0.1, 0.6, 0.5;
  MarginalSet out = Repair(OneTable(p));
  EXPECT_DOUBLE_EQ(out.tables[0].probs[0], 0.0);
  EXPECT_DOUBLE_EQ(out.tables[0].probs[1], 6.0 / 11.0);
  EXPECT_DOUBLE_EQ(out.tables[0].probs[2], 5.0 / 11.0);
}

TEST(RepairTest, AllZeroBecomesUniformWithWarning) {
  Vector p(4);
  p << -0.1, -0.2, 0.0, -0.3;
  Warnings w;
  MarginalSet out = Repair(OneTable(p), &w);
  EXPECT_EQ(out.tables[0].probs, Vector::Constant(4, 0.25));
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("DegenerateTable"), std::string::npos);
}

LabeledTable RandomBinned(int n, int d, int num_classes, uint64_t seed) {
  Rng rng = RngStream(seed, 0);
  std::uniform_int_distribution<int> bin(0, kNumBins - 1), cls(0, num_classes - 1);
  Matrix x(n, d);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    y[i] = cls(rng);
    for (int j = 0; j < d; ++j) x(i, j) = bin(rng);
  }
  LabeledTable t = MakeTable(x, y, num_classes);
  t.domain_sizes.assign(d, kNumBins);
  return t;
}

TEST(RepairTest, NoiselessInputIsFixedPoint) {
  LabeledTable t = RandomBinned(200, 3, 3, 4);
  const auto cliques = DefaultCliques(3);
  Rng rng = RngStream(4, 4);
  std::vector<MeasurementBudget> budgets(cliques.size());
  auto set = MeasureNoisy(t, cliques, budgets, rng, nullptr);
  ASSERT_TRUE(set.ok());
  for (size_t k = 0; k < cliques.size(); ++k) {
    auto exact = Measure(t, cliques[k]);
    EXPECT_LT((set->tables[k].probs - exact->probs).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(RepairTest, ConsistentIdempotentAndInverseVarianceWeighted) {
  LabeledTable t = RandomBinned(300, 4, 3, 5);
  const auto cliques = DefaultCliques(4);
  Rng rng = RngStream(5, 5);
  std::vector<MeasurementBudget> budgets(cliques.size(), {0.5, 1e-6});
  MarginalSet raw;
  raw.num_features = 4;
  raw.domain = AttributeDomains(t);
  for (size_t k = 0; k < cliques.size(); ++k) {
    auto noisy = AddNoise(*Measure(t, cliques[k]), 0.5, 1e-6, 300, rng);
    raw.tables.push_back(*noisy);
  }
  MarginalSet once = Repair(raw);
  const Vector consensus = FindTable(once, {4})->probs;
  EXPECT_NEAR(consensus.sum(), 1.0, 1e-12);
  for (const auto& tab : once.tables) {
    EXPECT_GE(tab.probs.minCoeff(), 0.0);
    EXPECT_NEAR(tab.probs.sum(), 1.0, 1e-9);
    if (tab.clique.size() == 2) {
      EXPECT_LT((MarginOf(tab, 4) - consensus).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
  MarginalSet twice = Repair(once);
  for (size_t k = 0; k < once.tables.size(); ++k) {
    EXPECT_LT((twice.tables[k].probs - once.tables[k].probs).cwiseAbs().maxCoeff(), 1e-12);
  }

  // Independent recomputation of the consensus: clip/normalize each table,
  // weight its label margin by 1 / (cells per label * (sigma / n)^2).
  Vector num = Vector::Zero(3);
  double den = 0.0;
  for (const auto& tab : raw.tables) {
    if (std::find(tab.clique.begin(), tab.clique.end(), 4) == tab.clique.end()) continue;
    Vector p = tab.probs.cwiseMax(0.0);
    p /= p.sum();
    Vector margin = Vector::Zero(3);
    for (Eigen::Index i = 0; i < p.size(); ++i) margin[i % 3] += p[i];
    const double per_label = static_cast<double>(p.size()) / 3.0;
    const double w = 1.0 / (per_label * std::pow(tab.noise_sigma / 300.0, 2));
    num += w * margin;
    den += w;
  }
  EXPECT_LT((num / den - consensus).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MarginalJsonTest, RoundTrip) {
  LabeledTable t = RandomBinned(50, 2, 2, 6);
  Rng rng = RngStream(6, 6);
  const auto cliques = DefaultCliques(2);
  auto set = MeasureNoisy(t, cliques, std::vector<MeasurementBudget>(cliques.size(), {1, 1e-5}),
                          rng, nullptr);
  auto back = MarginalSetFromJson(nlohmann::json::parse(ToJson(*set).dump()));
  ASSERT_TRUE(back.ok());
  ASSERT_EQ(back->tables.size(), set->tables.size());
  for (size_t k = 0; k < set->tables.size(); ++k) {
    EXPECT_EQ(back->tables[k].probs, set->tables[k].probs);
    EXPECT_EQ(back->tables[k].clique, set->tables[k].clique);
    EXPECT_EQ(back->tables[k].noise_sigma, set->tables[k].noise_sigma);
  }
}

}  // namespace
}  // namespace dpsyn
