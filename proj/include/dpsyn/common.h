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

#ifndef DPSYN_COMMON_H_
#define DPSYN_COMMON_H_

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

// Early-return helpers in the usual Google style.
#define DPSYN_CONCAT_INNER_(a, b) a##b
#define DPSYN_CONCAT_(a, b) DPSYN_CONCAT_INNER_(a, b)

#define RETURN_IF_ERROR(expr)                 \
  do {                                        \
    const absl::Status _dpsyn_status = (expr); \
    if (!_dpsyn_status.ok()) return _dpsyn_status; \
  } while (false)

#define DPSYN_ASSIGN_OR_RETURN_IMPL_(tmp, lhs, expr) \
  auto tmp = (expr);                                 \
  if (!tmp.ok()) return tmp.status();                \
  lhs = std::move(tmp).value()

#define ASSIGN_OR_RETURN(lhs, expr) \
  DPSYN_ASSIGN_OR_RETURN_IMPL_(DPSYN_CONCAT_(_dpsyn_statusor_, __LINE__), lhs, expr)

namespace dpsyn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Non-fatal diagnostics collected by operations that have a "warning
// channel" (e.g. a class too small to stratify).
using Warnings = std::vector<std::string>;

inline bool AllFinite(const Matrix& m) { return m.allFinite(); }

}  // namespace dpsyn

#endif  // DPSYN_COMMON_H_
