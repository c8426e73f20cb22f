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

// Central finite-difference oracle shared by unit and acceptance tests.

#ifndef DPSYN_TESTS_GRADIENT_CHECK_H_
#define DPSYN_TESTS_GRADIENT_CHECK_H_

#include <algorithm>
#include <cmath>
#include <functional>

#include "dpsyn/common.h"

namespace dpsyn::testing {

inline Vector FiniteDifferenceGradient(const std::function<double(const Vector&)>& loss,
                                       const Vector& params, double h = 1e-5) {
  Vector grad(params.size());
  Vector p = params;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double orig = p[k];
    p[k] = orig + h;
    const double up = loss(p);
    p[k] = orig - h;
    const double down = loss(p);
    p[k] = orig;
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

// max_k |a_k - f_k| / max(|a_k| + |f_k|, floor).
inline double MaxRelativeError(const Vector& analytic, const Vector& numeric,
                               double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < analytic.size(); ++k) {
    const double denom = std::max(std::abs(analytic[k]) + std::abs(numeric[k]), floor);
    worst = std::max(worst, std::abs(analytic[k] - numeric[k]) / denom);
  }
  return worst;
}

}  // namespace dpsyn::testing

#endif  // DPSYN_TESTS_GRADIENT_CHECK_H_
