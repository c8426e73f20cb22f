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

// Statistical fidelity: per-column histogram intersection (overlap score)
// and mean distance from synthetic rows to their k nearest reference rows.

#ifndef DPSYN_EVAL_STATISTICAL_H_
#define DPSYN_EVAL_STATISTICAL_H_

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <utility>
#include <vector>

#include "absl/strings/str_cat.h"
#include "dpsyn/common.h"
#include "dpsyn/dataset.h"

namespace dpsyn {

inline const std::vector<int>& DefaultOverlapBins() {
  static const std::vector<int> kBins = {25, 50, 100};
  return kBins;
}

// sum_c min(p_c, q_c) over normalized histograms on identical bins.
inline absl::StatusOr<double> HistogramIntersection(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("BinMismatch: ", p.size(), " vs ", q.size(), " bins"));
  }
  return p.cwiseMin(q).sum();
}

// Normalized histogram of `values` over `bins` equal-width bins after
// min-max scaling by [lo, hi]; the maximum falls in the last bin.
inline Vector EqualWidthHistogram(const Eigen::Ref<const Vector>& values, double lo, double hi,
                                  int bins) {
  Vector h = Vector::Zero(bins);
  if (values.size() == 0) return h;
  const double width = hi - lo;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    int b = 0;
    if (width > 0.0) {
      const double u = (values[i] - lo) / width;
      b = std::clamp(static_cast<int>(std::floor(u * bins)), 0, bins - 1);
    }
    h[b] += 1.0;
  }
  return h / static_cast<double>(values.size());
}

struct OverlapResult {
  std::map<int, double> per_bins;  // bin count -> mean HI over features
  double mean = 0.0;               // mean over bin counts
};

// Mean over features of the histogram intersection; bounds are the min and
// max of each feature over both tables.
inline OverlapResult OverlapScore(const Matrix& real, const Matrix& synth,
                                  const std::vector<int>& bin_counts = DefaultOverlapBins()) {
  OverlapResult result;
  const Eigen::Index d = real.cols();
  for (int bins : bin_counts) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      double lo = real.col(j).minCoeff(), hi = real.col(j).maxCoeff();
      if (synth.rows() > 0) {
        lo = std::min(lo, synth.col(j).minCoeff());
        hi = std::max(hi, synth.col(j).maxCoeff());
      }
      Vector p = EqualWidthHistogram(real.col(j), lo, hi, bins);
      Vector q = EqualWidthHistogram(synth.col(j), lo, hi, bins);
      total += p.cwiseMin(q).sum();
    }
    result.per_bins[bins] = d > 0 ? total / static_cast<double>(d) : 1.0;
    result.mean += result.per_bins[bins];
  }
  if (!bin_counts.empty()) result.mean /= static_cast<double>(bin_counts.size());
  return result;
}

namespace internal {

// k smallest squared distances from `query` to the rows of `ref`, ordered by
// (distance, row index). Partial sums are abandoned once they exceed the
// current k-th best; completed sums are computed in the same dimension order
// as a plain evaluation, so results are bit-identical to brute force.
inline std::vector<std::pair<double, int>> KNearest(const Matrix& ref_t,
                                                    const Eigen::Ref<const Vector>& query, int k) {
  const Eigen::Index d = ref_t.rows();
  const int n = static_cast<int>(ref_t.cols());
  std::priority_queue<std::pair<double, int>> heap;  // max-heap on (d2, index)
  for (int r = 0; r < n; ++r) {
    const double* col = ref_t.data() + static_cast<Eigen::Index>(r) * d;
    const bool full = static_cast<int>(heap.size()) == k;
    const double bound = full ? heap.top().first : kInfinity;
    double s = 0.0;
    Eigen::Index j = 0;
    for (; j < d; ++j) {
      const double diff = col[j] - query[j];
      s += diff * diff;
      if (s > bound) break;
    }
    if (j < d) continue;
    if (!full) {
      heap.emplace(s, r);
    } else if (std::make_pair(s, r) < heap.top()) {
      heap.pop();
      heap.emplace(s, r);
    }
  }
  std::vector<std::pair<double, int>> out;
  while (!heap.empty()) {
    out.push_back(heap.top());
    heap.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace internal

// Mean over synthetic rows and their k nearest reference rows of the
// Euclidean distance.
inline absl::StatusOr<double> KnnDistanceScore(const Matrix& synth, const Matrix& reference,
                                               int k = 10) {
  if (reference.rows() == 0) return absl::InvalidArgumentError("EmptyReference");
  if (k < 1 || k > reference.rows()) {
    return absl::InvalidArgumentError(
        absl::StrCat("k = ", k, " must lie in [1, ", reference.rows(), "]"));
  }
  if (synth.rows() == 0) return 0.0;
  const Matrix ref_t = reference.transpose();
  const Matrix synth_t = synth.transpose();
  double total = 0.0;
  for (Eigen::Index i = 0; i < synth_t.cols(); ++i) {
    double row_sum = 0.0;
    for (const auto& [d2, idx] : internal::KNearest(ref_t, synth_t.col(i), k)) {
      row_sum += std::sqrt(d2);
    }
    total += row_sum / k;
  }
  return total / static_cast<double>(synth.rows());
}

}  // namespace dpsyn

#endif  // DPSYN_EVAL_STATISTICAL_H_
