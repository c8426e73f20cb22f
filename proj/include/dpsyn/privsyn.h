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

// Marginal-based synthesis with a 1:8 budget split between 1-way and
// {feature, label} marginals, followed by a greedy record-update pass that
// pulls a random initial dataset toward the measured marginals.

#ifndef DPSYN_PRIVSYN_H_
#define DPSYN_PRIVSYN_H_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dpsyn/common.h"
#include "dpsyn/dataset.h"
#include "dpsyn/marginals.h"
#include "dpsyn/privacy.h"
#include "dpsyn/rng.h"

namespace dpsyn {

inline constexpr double kSingletonShare = 1.0 / 9.0;

// The singleton group gets epsilon/9 split over d+1 tables, the pair group
// 8 epsilon/9 split over d tables; delta is split the same way.
inline std::vector<MeasurementBudget> PrivSynBudgets(int num_features,
                                                     const PrivacySpec& privacy) {
  const int d = num_features;
  std::vector<MeasurementBudget> budgets;
  for (int a = 0; a <= d; ++a) {
    budgets.push_back({privacy.epsilon * kSingletonShare / (d + 1),
                       privacy.delta * kSingletonShare / (d + 1)});
  }
  for (int i = 0; i < d; ++i) {
    budgets.push_back({privacy.epsilon * (1.0 - kSingletonShare) / d,
                       privacy.delta * (1.0 - kSingletonShare) / d});
  }
  return budgets;
}

inline absl::StatusOr<MarginalSet> PrivSynFitMarginals(const LabeledTable& train_binned,
                                                       const PrivacySpec& privacy, Rng& rng,
                                                       Warnings* warnings = nullptr) {
  if (!train_binned.is_discrete()) {
    return absl::InvalidArgumentError("UnbinnedInput: table is not discretized");
  }
  RETURN_IF_ERROR(privacy.Validate());
  const int d = train_binned.num_features();
  return MeasureNoisy(train_binned, DefaultCliques(d), PrivSynBudgets(d, privacy), rng,
                      warnings);
}

struct GumOptions {
  int max_sweeps = 200;
  double tol = 0.02;  // mean L1 over driving marginals
};

struct GumDiagnostics {
  int sweeps = 0;
  bool converged = false;
  std::vector<double> error_history;  // initial state first
  long moves = 0;
};

namespace internal {

// Integer part of a real transfer, rounding half down; moving this many
// records strictly reduces L1 whenever it is positive.
inline long TransferAmount(double excess, double deficit) {
  const double x = std::min(excess, deficit);
  if (!(x > 0.0)) return 0;
  const double f = std::floor(x);
  return static_cast<long>(x - f > 0.5 ? f + 1.0 : f);
}

struct DrivingMarginal {
  int feature = 0;
  bool with_label = false;
  Vector target;  // probabilities, layout of the table (x * C + y, or x)
};

class GumSynthesizer {
 public:
  GumSynthesizer(const MarginalSet& set, int n) : set_(set), n_(n) {
    const int label = set.label_attr();
    for (int i = 0; i < set.num_features; ++i) {
      DrivingMarginal m;
      m.feature = i;
      if (const MarginalTable* pair = FindTable(set, {i, label})) {
        m.with_label = true;
        m.target = pair->probs;
      } else if (const MarginalTable* single = FindTable(set, {i})) {
        m.target = single->probs;
      } else {
        continue;
      }
      driving_.push_back(std::move(m));
    }
  }

  void Initialize(Rng& rng) {
    const int d = set_.num_features;
    const int num_classes = set_.num_classes();
    const int label = set_.label_attr();
    features_.assign(d, std::vector<int>(n_, 0));
    labels_.assign(n_, 0);

    Vector label_probs = Vector::Constant(num_classes, 1.0 / num_classes);
    if (const MarginalTable* t = FindTable(set_, {label})) {
      label_probs = t->probs;
    } else if (!driving_.empty() && driving_.front().with_label) {
      label_probs = MarginOf(*FindTable(set_, {driving_.front().feature, label}), label);
    }
    std::vector<int> counts = ApportionCounts(
        std::vector<double>(label_probs.data(), label_probs.data() + label_probs.size()), n_);
    int r = 0;
    for (int y = 0; y < num_classes; ++y) {
      for (int k = 0; k < counts[y]; ++k) labels_[r++] = y;
    }
    std::shuffle(labels_.begin(), labels_.end(), rng);

    for (int i = 0; i < d; ++i) {
      Vector probs = Vector::Constant(set_.domain[i], 1.0 / set_.domain[i]);
      if (const MarginalTable* t = FindTable(set_, {i})) probs = t->probs;
      std::discrete_distribution<int> dist(probs.data(), probs.data() + probs.size());
      for (int k = 0; k < n_; ++k) features_[i][k] = dist(rng);
    }
  }

  double MeanError() const {
    if (driving_.empty()) return 0.0;
    double total = 0.0;
    for (const auto& m : driving_) total += L1(m);
    return total / static_cast<double>(driving_.size());
  }

  // One pass over all driving marginals; returns the number of rewrites.
  long Sweep(Rng& rng) {
    long moves = 0;
    for (const auto& m : driving_) moves += SweepMarginal(m, rng);
    return moves;
  }

  LabeledTable ToTable(const LabeledTable& schema) const {
    LabeledTable out = schema.EmptyLike();
    const int d = set_.num_features;
    out.features.resize(n_, d);
    for (int i = 0; i < d; ++i) {
      for (int k = 0; k < n_; ++k) out.features(k, i) = features_[i][k];
    }
    out.labels = labels_;
    out.domain_sizes.assign(set_.domain.begin(), set_.domain.end() - 1);
    return out;
  }

 private:
  int Slices(const DrivingMarginal& m) const { return m.with_label ? set_.num_classes() : 1; }
  int CellOf(const DrivingMarginal& m, int row) const {
    const int x = features_[m.feature][row];
    return m.with_label ? x * set_.num_classes() + labels_[row] : x;
  }

  Vector Counts(const DrivingMarginal& m) const {
    Vector c = Vector::Zero(m.target.size());
    for (int k = 0; k < n_; ++k) c[CellOf(m, k)] += 1.0;
    return c;
  }

  double L1(const DrivingMarginal& m) const {
    return (Counts(m) / static_cast<double>(n_) - m.target).cwiseAbs().sum();
  }

  long SweepMarginal(const DrivingMarginal& m, Rng& rng) {
    const int slices = Slices(m);
    const int bins = set_.domain[m.feature];
    Vector counts = Counts(m);
    const Vector target = m.target * static_cast<double>(n_);

    // Rows by cell, shuffled so the rewritten records are a random subset.
    std::vector<std::vector<int>> rows_in(counts.size());
    for (int k = 0; k < n_; ++k) rows_in[CellOf(m, k)].push_back(k);
    for (auto& rows : rows_in) std::shuffle(rows.begin(), rows.end(), rng);

    long moves = 0;
    for (int y = 0; y < slices; ++y) {
      auto cell = [&](int x) { return slices > 1 ? x * slices + y : x; };
      while (true) {
        int over = -1, under = -1;
        double excess = 0.0, deficit = 0.0;
        for (int x = 0; x < bins; ++x) {
          const double diff = counts[cell(x)] - target[cell(x)];
          if (diff > excess) excess = diff, over = x;
          if (-diff > deficit) deficit = -diff, under = x;
        }
        if (over < 0 || under < 0) break;
        // Only records not yet rewritten this sweep are eligible; rewritten
        // ones sit in deficit cells, which never become donors.
        long amount = std::min<long>(TransferAmount(excess, deficit),
                                     static_cast<long>(rows_in[cell(over)].size()));
        if (amount <= 0) break;
        for (long t = 0; t < amount; ++t) {
          const int row = rows_in[cell(over)].back();
          rows_in[cell(over)].pop_back();
          features_[m.feature][row] = under;
        }
        counts[cell(over)] -= static_cast<double>(amount);
        counts[cell(under)] += static_cast<double>(amount);
        moves += amount;
      }
    }
    return moves;
  }

  const MarginalSet& set_;
  int n_;
  std::vector<DrivingMarginal> driving_;
  std::vector<std::vector<int>> features_;  // per attribute, column-major
  std::vector<int> labels_;
};

}  // namespace internal

// Greedy record-update synthesis. Labels are apportioned from the label
// marginal and never edited; features start from their singletons and are
// rewritten within label slices to match each {feature, label} table.
// Reaching max_sweeps without meeting tol is reported in `diagnostics`.
inline LabeledTable GumSynthesize(const MarginalSet& set, int n, const GumOptions& options,
                                  const LabeledTable& schema, Rng& rng,
                                  GumDiagnostics* diagnostics = nullptr) {
  GumDiagnostics diag;
  internal::GumSynthesizer gum(set, n);
  gum.Initialize(rng);
  double err = gum.MeanError();
  diag.error_history.push_back(err);
  while (!(err <= options.tol) && diag.sweeps < options.max_sweeps) {
    const long moved = gum.Sweep(rng);
    ++diag.sweeps;
    diag.moves += moved;
    err = gum.MeanError();
    diag.error_history.push_back(err);
    if (moved == 0) break;
  }
  diag.converged = err <= options.tol;
  if (diagnostics != nullptr) *diagnostics = std::move(diag);
  return gum.ToTable(schema);
}

}  // namespace dpsyn

#endif  // DPSYN_PRIVSYN_H_
