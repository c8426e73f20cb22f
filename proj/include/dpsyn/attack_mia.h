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

// Black-box membership inference against a released synthetic table. A
// record scores higher the closer it lies to some synthetic row.

#ifndef DPSYN_ATTACK_MIA_H_
#define DPSYN_ATTACK_MIA_H_

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "dpsyn/common.h"
#include "dpsyn/dataset.h"

namespace dpsyn {

struct MiaResult {
  double auc = 0.5;
  std::vector<double> scores;      // members first, then non-members
  std::vector<bool> member_flags;
};

// P(score(member) > score(nonmember)) + 0.5 P(equal), from the rank sum of
// the positives with midranks for ties.
inline absl::StatusOr<double> AucFromScores(const std::vector<double>& positives,
                                            const std::vector<double>& negatives) {
  if (positives.empty() || negatives.empty()) {
    return absl::InvalidArgumentError("EmptySet: AUC needs both classes");
  }
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(positives.size() + negatives.size());
  for (double s : positives) pooled.emplace_back(s, 1);
  for (double s : negatives) pooled.emplace_back(s, 0);
  std::sort(pooled.begin(), pooled.end());
  const size_t n = pooled.size();
  double rank_sum = 0.0;
  for (size_t i = 0; i < n;) {
    size_t j = i;
    while (j + 1 < n && pooled[j + 1].first == pooled[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) {
      if (pooled[k].second) rank_sum += midrank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(positives.size());
  const double nn = static_cast<double>(negatives.size());
  return (rank_sum - 0.5 * np * (np + 1.0)) / (np * nn);
}

// -min_s ||x - s|| for every row of `queries` against the rows of `synth`.
inline std::vector<double> DistanceScores(const Matrix& synth_t, const Matrix& queries) {
  std::vector<double> out(queries.rows());
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    const Vector q = queries.row(i).transpose();
    out[i] = -std::sqrt((synth_t.colwise() - q).colwise().squaredNorm().minCoeff());
  }
  return out;
}

inline absl::StatusOr<MiaResult> BlackboxAttack(const LabeledTable& synth,
                                                const LabeledTable& members,
                                                const LabeledTable& nonmembers) {
  if (synth.num_rows() == 0 || members.num_rows() == 0 || nonmembers.num_rows() == 0) {
    return absl::InvalidArgumentError("EmptySet: synthetic, member and non-member sets must be non-empty");
  }
  if (members.num_features() != synth.num_features() ||
      nonmembers.num_features() != synth.num_features()) {
    return absl::InvalidArgumentError("ShapeMismatch: feature spaces differ");
  }
  const ContinuousTransform transform = ContinuousTransform::Fit(synth.features);
  const Matrix synth_t = transform.Apply(synth.features).transpose();
  std::vector<double> pos = DistanceScores(synth_t, transform.Apply(members.features));
  std::vector<double> neg = DistanceScores(synth_t, transform.Apply(nonmembers.features));
  MiaResult result;
  ASSIGN_OR_RETURN(result.auc, AucFromScores(pos, neg));
  result.scores = pos;
  result.scores.insert(result.scores.end(), neg.begin(), neg.end());
  result.member_flags.assign(pos.size(), true);
  result.member_flags.resize(result.scores.size(), false);
  return result;
}

}  // namespace dpsyn

#endif  // DPSYN_ATTACK_MIA_H_
