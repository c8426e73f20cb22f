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

// Graphical-model synthesis over the star clique set (every singleton plus
// every {feature, label} pair). On a star the maximum-likelihood estimate
// from consistent marginals is closed form: P(y) prod_i P(x_i | y).

#ifndef DPSYN_PGM_H_
#define DPSYN_PGM_H_

#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "dpsyn/common.h"
#include "dpsyn/dataset.h"
#include "dpsyn/marginals.h"
#include "dpsyn/privacy.h"
#include "dpsyn/rng.h"
#include "json.hpp"

namespace dpsyn {

struct StarModel {
  Vector label_marginal;             // C
  std::vector<Matrix> conditionals;  // per feature: domain_i x C, columns sum to 1
  double measurement_epsilon = kInfinity;
  double measurement_delta = 0.0;

  int num_features() const { return static_cast<int>(conditionals.size()); }
  int num_classes() const { return static_cast<int>(label_marginal.size()); }
};

// Conditionals from a repaired marginal set: P(x | y) = P(x, y) / P(y).
inline StarModel StarFromMarginals(const MarginalSet& set, Warnings* warnings) {
  StarModel model;
  const int label = set.label_attr();
  const int num_classes = set.num_classes();
  model.label_marginal = FindTable(set, {label})->probs;
  for (int i = 0; i < set.num_features; ++i) {
    const MarginalTable* pair = FindTable(set, {i, label});
    Matrix cond(set.domain[i], num_classes);
    for (int y = 0; y < num_classes; ++y) {
      double mass = 0.0;
      for (int x = 0; x < set.domain[i]; ++x) mass += pair->probs[x * num_classes + y];
      for (int x = 0; x < set.domain[i]; ++x) {
        cond(x, y) = mass > 0.0 ? pair->probs[x * num_classes + y] / mass
                                : 1.0 / set.domain[i];
      }
      if (!(mass > 0.0) && warnings != nullptr) {
        warnings->push_back(
            absl::StrCat("feature ", i, ": zero label cell ", y, ", uniform conditional"));
      }
    }
    model.conditionals.push_back(std::move(cond));
  }
  return model;
}

// Budget is split uniformly over the 2d+1 measurements, delta likewise.
inline absl::StatusOr<StarModel> FitStarModel(const LabeledTable& train_binned,
                                              const PrivacySpec& privacy, Rng& rng,
                                              Warnings* warnings = nullptr) {
  if (!train_binned.is_discrete()) {
    return absl::InvalidArgumentError("UnbinnedInput: table is not discretized");
  }
  RETURN_IF_ERROR(privacy.Validate());
  const auto cliques = DefaultCliques(train_binned.num_features());
  const double parts = static_cast<double>(cliques.size());
  MeasurementBudget budget{privacy.epsilon / parts, privacy.delta / parts};
  std::vector<MeasurementBudget> budgets(cliques.size(), budget);
  ASSIGN_OR_RETURN(MarginalSet set, MeasureNoisy(train_binned, cliques, budgets, rng, warnings));
  StarModel model = StarFromMarginals(set, warnings);
  model.measurement_epsilon = budget.epsilon;
  model.measurement_delta = budget.delta;
  return model;
}

// y ~ P(y), then each x_i ~ P(x_i | y) independently. `schema` supplies names.
inline LabeledTable SampleStarModel(const StarModel& model, int n, const LabeledTable& schema,
                                    Rng& rng) {
  LabeledTable out = schema.EmptyLike();
  const int d = model.num_features();
  out.features.resize(n, d);
  out.labels.resize(n);
  std::discrete_distribution<int> label_dist(model.label_marginal.data(),
                                             model.label_marginal.data() +
                                                 model.label_marginal.size());
  std::vector<std::vector<std::discrete_distribution<int>>> cond(d);
  for (int i = 0; i < d; ++i) {
    for (int y = 0; y < model.num_classes(); ++y) {
      const auto col = model.conditionals[i].col(y);
      cond[i].emplace_back(col.data(), col.data() + col.size());
    }
  }
  for (int r = 0; r < n; ++r) {
    const int y = label_dist(rng);
    out.labels[r] = y;
    for (int i = 0; i < d; ++i) out.features(r, i) = cond[i][y](rng);
  }
  out.domain_sizes.assign(d, 0);
  for (int i = 0; i < d; ++i) out.domain_sizes[i] = static_cast<int>(model.conditionals[i].rows());
  return out;
}

inline nlohmann::json ToJson(const StarModel& model) {
  nlohmann::json j;
  j["format"] = "dpsyn-star";
  j["version"] = 1;
  j["label_marginal"] = std::vector<double>(
      model.label_marginal.data(), model.label_marginal.data() + model.label_marginal.size());
  j["measurement_epsilon"] = std::isfinite(model.measurement_epsilon)
                                 ? nlohmann::json(model.measurement_epsilon)
                                 : nlohmann::json("inf");
  j["measurement_delta"] = model.measurement_delta;
  j["conditionals"] = nlohmann::json::array();
  for (const auto& c : model.conditionals) {
    nlohmann::json cj;
    cj["rows"] = c.rows();
    cj["cols"] = c.cols();
    cj["values"] = std::vector<double>(c.data(), c.data() + c.size());
    j["conditionals"].push_back(std::move(cj));
  }
  return j;
}

inline absl::StatusOr<StarModel> StarModelFromJson(const nlohmann::json& j) {
  if (j.value("format", "") != "dpsyn-star") {
    return absl::InvalidArgumentError("not a dpsyn-star model");
  }
  StarModel model;
  auto lm = j.at("label_marginal").get<std::vector<double>>();
  model.label_marginal = Eigen::Map<Vector>(lm.data(), static_cast<Eigen::Index>(lm.size()));
  const auto& eps = j.at("measurement_epsilon");
  model.measurement_epsilon = eps.is_string() ? kInfinity : eps.get<double>();
  model.measurement_delta = j.at("measurement_delta");
  for (const auto& cj : j.at("conditionals")) {
    const int rows = cj.at("rows"), cols = cj.at("cols");
    auto v = cj.at("values").get<std::vector<double>>();
    if (cols != model.num_classes() || static_cast<int>(v.size()) != rows * cols) {
      return absl::InvalidArgumentError("ShapeMismatch: conditional table");
    }
    model.conditionals.push_back(Eigen::Map<Matrix>(v.data(), rows, cols));
  }
  return model;
}

}  // namespace dpsyn

#endif  // DPSYN_PGM_H_
