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

// Discrete marginals over a binned table: measurement, Gaussian noise in
// count space, and consistency repair.
//
// Attributes are numbered 0..d-1 for features and d for the label. A table's
// cells are flattened row-major over its clique, last attribute fastest, so a
// {feature, label} pair stores P(x, y) at x * C + y.

#ifndef DPSYN_MARGINALS_H_
#define DPSYN_MARGINALS_H_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "dpsyn/common.h"
#include "dpsyn/dataset.h"
#include "dpsyn/privacy.h"
#include "dpsyn/rng.h"
#include "json.hpp"

namespace dpsyn {

struct MarginalTable {
  std::vector<int> clique;  // attribute indices, ascending
  std::vector<int> domain;  // domain size of each clique attribute
  Vector probs;
  double noise_sigma = 0.0;  // per-cell noise std in count space
  double n_ref = 0.0;

  Eigen::Index num_cells() const { return probs.size(); }
  bool Contains(int attr) const {
    return std::find(clique.begin(), clique.end(), attr) != clique.end();
  }
};

struct MarginalSet {
  int num_features = 0;
  std::vector<int> domain;  // d + 1 entries, label last
  std::vector<MarginalTable> tables;

  int label_attr() const { return num_features; }
  int num_classes() const { return domain.back(); }
};

// All singletons {0}..{d} followed by the pairs {i, label}.
inline std::vector<std::vector<int>> DefaultCliques(int num_features) {
  std::vector<std::vector<int>> cliques;
  for (int a = 0; a <= num_features; ++a) cliques.push_back({a});
  for (int i = 0; i < num_features; ++i) cliques.push_back({i, num_features});
  return cliques;
}

inline std::vector<int> AttributeDomains(const LabeledTable& binned) {
  std::vector<int> domain = binned.domain_sizes;
  domain.push_back(binned.num_classes());
  return domain;
}

inline int AttributeValue(const LabeledTable& t, int row, int attr) {
  return attr == t.num_features() ? t.labels[row]
                                  : static_cast<int>(t.features(row, attr));
}

// Exact normalized counts of `clique` in a discretized table.
inline absl::StatusOr<MarginalTable> Measure(const LabeledTable& binned,
                                             const std::vector<int>& clique) {
  if (!binned.is_discrete()) {
    return absl::InvalidArgumentError("UnbinnedInput: table is not discretized");
  }
  const int d = binned.num_features();
  const std::vector<int> domains = AttributeDomains(binned);
  MarginalTable m;
  m.clique = clique;
  Eigen::Index cells = 1;
  for (int a : clique) {
    if (a < 0 || a > d) {
      return absl::InvalidArgumentError(absl::StrCat("clique attribute ", a, " out of range"));
    }
    m.domain.push_back(domains[a]);
    cells *= domains[a];
  }
  m.probs = Vector::Zero(cells);
  const int n = binned.num_rows();
  for (int r = 0; r < n; ++r) {
    Eigen::Index idx = 0;
    for (size_t k = 0; k < clique.size(); ++k) {
      idx = idx * m.domain[k] + AttributeValue(binned, r, clique[k]);
    }
    m.probs[idx] += 1.0;
  }
  if (n > 0) m.probs /= static_cast<double>(n);
  m.n_ref = n;
  return m;
}

// Adds N(0, sigma^2) to every cell count, sigma calibrated for count-space L2
// sensitivity 1. The result is left unnormalized until Repair.
inline absl::StatusOr<MarginalTable> AddNoise(const MarginalTable& marginal, double epsilon,
                                              double delta, double n, Rng& rng) {
  ASSIGN_OR_RETURN(const double sigma, CalibrateGaussian(1.0, epsilon, delta));
  MarginalTable out = marginal;
  out.noise_sigma = sigma;
  out.n_ref = n;
  if (sigma == 0.0) return out;
  Vector counts = marginal.probs * n;
  counts = AddGaussianNoise(counts, sigma, rng);
  out.probs = counts / n;
  return out;
}

// Sums a table over everything except `attr`.
inline Vector MarginOf(const MarginalTable& t, int attr) {
  size_t pos = std::find(t.clique.begin(), t.clique.end(), attr) - t.clique.begin();
  Eigen::Index stride = 1;
  for (size_t k = pos + 1; k < t.domain.size(); ++k) stride *= t.domain[k];
  Vector margin = Vector::Zero(t.domain[pos]);
  for (Eigen::Index idx = 0; idx < t.num_cells(); ++idx) {
    margin[(idx / stride) % t.domain[pos]] += t.probs[idx];
  }
  return margin;
}

namespace internal {

// Clip negatives, renormalize; an all-zero table becomes uniform.
inline void ClipAndNormalize(MarginalTable& t, Warnings* warnings) {
  t.probs = t.probs.cwiseMax(0.0);
  const double total = t.probs.sum();
  if (!(total > 0.0)) {
    t.probs.setConstant(1.0 / static_cast<double>(t.num_cells()));
    if (warnings != nullptr) {
      warnings->push_back(absl::StrCat("DegenerateTable: clique of size ", t.clique.size(),
                                       " was all-zero after clipping; set to uniform"));
    }
    return;
  }
  t.probs /= total;
}

// Per-cell variance (probability space) of the label margin implied by t.
inline double LabelMarginVariance(const MarginalTable& t, int label_attr) {
  double cells_per_label = static_cast<double>(t.num_cells());
  cells_per_label /= t.domain[std::find(t.clique.begin(), t.clique.end(), label_attr) -
                              t.clique.begin()];
  const double s = t.n_ref > 0 ? t.noise_sigma / t.n_ref : 0.0;
  return cells_per_label * s * s;
}

}  // namespace internal

// Clip + renormalize every table, then make all tables that contain the label
// agree on an inverse-variance weighted consensus label marginal.
inline MarginalSet Repair(const MarginalSet& in, Warnings* warnings = nullptr) {
  MarginalSet out = in;
  for (auto& t : out.tables) internal::ClipAndNormalize(t, warnings);

  const int label = out.label_attr();
  std::vector<size_t> with_label;
  for (size_t k = 0; k < out.tables.size(); ++k) {
    if (out.tables[k].Contains(label)) with_label.push_back(k);
  }
  if (with_label.empty()) return out;

  // Noiseless tables, if any, are exact and dominate.
  bool any_exact = false;
  for (size_t k : with_label) {
    if (internal::LabelMarginVariance(out.tables[k], label) == 0.0) any_exact = true;
  }
  Vector consensus = Vector::Zero(out.num_classes());
  double weight_sum = 0.0;
  for (size_t k : with_label) {
    const double var = internal::LabelMarginVariance(out.tables[k], label);
    double w;
    if (any_exact) {
      w = var == 0.0 ? 1.0 : 0.0;
    } else {
      w = 1.0 / var;
    }
    consensus += w * MarginOf(out.tables[k], label);
    weight_sum += w;
  }
  consensus /= weight_sum;
  consensus /= consensus.sum();

  const int num_classes = out.num_classes();
  for (size_t k : with_label) {
    MarginalTable& t = out.tables[k];
    if (t.clique.size() == 1) {
      t.probs = consensus;
      continue;
    }
    const Vector margin = MarginOf(t, label);
    const Eigen::Index slice = t.num_cells() / num_classes;
    for (int y = 0; y < num_classes; ++y) {
      // Cells with label y are idx = x * C + y for the {feature, label} layout.
      for (Eigen::Index x = 0; x < slice; ++x) {
        double& cell = t.probs[x * num_classes + y];
        if (margin[y] > 0.0) {
          cell *= consensus[y] / margin[y];
        } else {
          cell = consensus[y] / static_cast<double>(slice);
        }
      }
      if (!(margin[y] > 0.0) && consensus[y] > 0.0 && warnings != nullptr) {
        warnings->push_back(absl::StrCat("DegenerateTable: empty label slice ", y,
                                         " filled uniformly"));
      }
    }
  }
  return out;
}

// Measures every clique exactly, noises each with its own (epsilon, delta),
// and repairs. `budgets[k]` pairs with `cliques[k]`.
struct MeasurementBudget {
  double epsilon = kInfinity;
  double delta = kDefaultDelta;
};

inline absl::StatusOr<MarginalSet> MeasureNoisy(const LabeledTable& binned,
                                                const std::vector<std::vector<int>>& cliques,
                                                const std::vector<MeasurementBudget>& budgets,
                                                Rng& rng, Warnings* warnings) {
  MarginalSet set;
  set.num_features = binned.num_features();
  set.domain = AttributeDomains(binned);
  const double n = binned.num_rows();
  for (size_t k = 0; k < cliques.size(); ++k) {
    ASSIGN_OR_RETURN(MarginalTable exact, Measure(binned, cliques[k]));
    ASSIGN_OR_RETURN(MarginalTable noisy,
                     AddNoise(exact, budgets[k].epsilon, budgets[k].delta, n, rng));
    set.tables.push_back(std::move(noisy));
  }
  return Repair(set, warnings);
}

inline const MarginalTable* FindTable(const MarginalSet& set, const std::vector<int>& clique) {
  for (const auto& t : set.tables) {
    if (t.clique == clique) return &t;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json ToJson(const MarginalSet& set) {
  nlohmann::json j;
  j["format"] = "dpsyn-marginals";
  j["version"] = 1;
  j["num_features"] = set.num_features;
  j["domain"] = set.domain;
  j["tables"] = nlohmann::json::array();
  for (const auto& t : set.tables) {
    j["tables"].push_back({{"clique", t.clique},
                           {"domain", t.domain},
                           {"probs", std::vector<double>(t.probs.data(),
                                                         t.probs.data() + t.probs.size())},
                           {"sigma", t.noise_sigma},
                           {"n_ref", t.n_ref}});
  }
  return j;
}

inline absl::StatusOr<MarginalSet> MarginalSetFromJson(const nlohmann::json& j) {
  if (j.value("format", "") != "dpsyn-marginals") {
    return absl::InvalidArgumentError("not a dpsyn-marginals document");
  }
  MarginalSet set;
  set.num_features = j.at("num_features");
  set.domain = j.at("domain").get<std::vector<int>>();
  for (const auto& tj : j.at("tables")) {
    MarginalTable t;
    t.clique = tj.at("clique").get<std::vector<int>>();
    t.domain = tj.at("domain").get<std::vector<int>>();
    auto probs = tj.at("probs").get<std::vector<double>>();
    t.probs = Eigen::Map<Vector>(probs.data(), static_cast<Eigen::Index>(probs.size()));
    t.noise_sigma = tj.at("sigma");
    t.n_ref = tj.at("n_ref");
    Eigen::Index cells = 1;
    for (int s : t.domain) cells *= s;
    if (cells != t.num_cells() || t.clique.size() != t.domain.size()) {
      return absl::InvalidArgumentError("ShapeMismatch: marginal table size");
    }
    set.tables.push_back(std::move(t));
  }
  return set;
}

}  // namespace dpsyn

#endif  // DPSYN_MARGINALS_H_
