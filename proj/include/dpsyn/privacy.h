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

// Gaussian mechanism calibration and Renyi-DP accounting for the (Poisson
// subsampled) Gaussian mechanism.

#ifndef DPSYN_PRIVACY_H_
#define DPSYN_PRIVACY_H_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "absl/strings/str_cat.h"
#include "dpsyn/common.h"
#include "dpsyn/rng.h"

namespace dpsyn {

inline constexpr double kDefaultDelta = 1e-5;

struct PrivacySpec {
  double epsilon = kInfinity;
  double delta = kDefaultDelta;

  bool is_private() const { return std::isfinite(epsilon); }

  absl::Status Validate() const {
    if (!(epsilon > 0.0)) {
      return absl::InvalidArgumentError("epsilon must be > 0 (or infinity)");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
      return absl::InvalidArgumentError("delta must lie in (0, 1)");
    }
    return absl::OkStatus();
  }
};

struct GaussianMech {
  double sensitivity = 0.0;
  double sigma = 0.0;
};

// sigma = sqrt(2 ln(1.25/delta)) * sensitivity / epsilon. Infinite epsilon
// means no noise.
inline absl::StatusOr<double> CalibrateGaussian(double sensitivity, double epsilon,
                                                double delta) {
  if (!(sensitivity >= 0.0) || !(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "InvalidParams: sensitivity=", sensitivity, " epsilon=", epsilon,
        " delta=", delta));
  }
  if (std::isinf(epsilon) || sensitivity == 0.0) return 0.0;
  return std::sqrt(2.0 * std::log(1.25 / delta)) * sensitivity / epsilon;
}

// Inverse of CalibrateGaussian for epsilon.
inline double GaussianEpsilon(double sensitivity, double sigma, double delta) {
  if (sigma == 0.0) return sensitivity == 0.0 ? 0.0 : kInfinity;
  return std::sqrt(2.0 * std::log(1.25 / delta)) * sensitivity / sigma;
}

inline Vector AddGaussianNoise(const Vector& v, double sigma, Rng& rng) {
  if (sigma == 0.0) return v;
  std::normal_distribution<double> dist(0.0, sigma);
  Vector out = v;
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += dist(rng);
  return out;
}

// ---------------------------------------------------------------------------
// RDP accountant

// Orders 2..64 plus 128 and 256.
inline std::vector<double> DefaultRdpOrders() {
  std::vector<double> orders;
  for (int a = 2; a <= 64; ++a) orders.push_back(a);
  orders.push_back(128);
  orders.push_back(256);
  return orders;
}

struct AccountantState {
  std::vector<double> orders;
  std::vector<double> rdp;
  long steps = 0;

  static AccountantState Empty(std::vector<double> orders = DefaultRdpOrders()) {
    AccountantState s;
    s.rdp.assign(orders.size(), 0.0);
    s.orders = std::move(orders);
    return s;
  }

  // Sequential composition: RDP adds per order.
  AccountantState Compose(const AccountantState& other) const {
    AccountantState out = *this;
    for (size_t i = 0; i < rdp.size(); ++i) out.rdp[i] += other.rdp[i];
    out.steps += other.steps;
    return out;
  }
};

namespace internal {

inline double LogAddExp(double a, double b) {
  if (a == -kInfinity) return b;
  if (b == -kInfinity) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

inline double LogBinomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// log A_alpha for the Poisson-subsampled Gaussian at integer alpha:
//   A = sum_{i=0}^{alpha} C(alpha,i) (1-q)^(alpha-i) q^i exp((i^2 - i) / (2 sigma^2)).
inline double LogAIntegerOrder(double q, double sigma, int alpha) {
  double log_a = -kInfinity;
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  for (int i = 0; i <= alpha; ++i) {
    double term = LogBinomial(alpha, i) + i * log_q + (alpha - i) * log_1mq +
                  (static_cast<double>(i) * i - i) / (2.0 * sigma * sigma);
    log_a = LogAddExp(log_a, term);
  }
  return log_a;
}

}  // namespace internal

// RDP of `steps` compositions of the subsampled Gaussian with sampling rate q
// and noise multiplier sigma, at every order of the default grid. Orders must
// be integers (q < 1 uses the binomial expansion).
inline absl::StatusOr<AccountantState> RdpSubsampledGaussian(
    double q, double noise_multiplier, long steps,
    std::vector<double> orders = DefaultRdpOrders()) {
  if (!(q > 0.0 && q <= 1.0) || !(noise_multiplier > 0.0) || steps < 1) {
    return absl::InvalidArgumentError(absl::StrCat(
        "InvalidParams: q=", q, " noise_multiplier=", noise_multiplier,
        " steps=", steps));
  }
  AccountantState state = AccountantState::Empty(std::move(orders));
  state.steps = steps;
  const double sigma2 = noise_multiplier * noise_multiplier;
  for (size_t i = 0; i < state.orders.size(); ++i) {
    const double alpha = state.orders[i];
    double per_step;
    if (q == 1.0) {
      per_step = alpha / (2.0 * sigma2);
    } else {
      if (alpha != std::floor(alpha)) {
        return absl::InvalidArgumentError("subsampled RDP requires integer orders");
      }
      per_step = internal::LogAIntegerOrder(q, noise_multiplier,
                                            static_cast<int>(alpha)) /
                 (alpha - 1.0);
      // Subsampling never hurts; guards against rounding above the q=1 value.
      per_step = std::clamp(per_step, 0.0, alpha / (2.0 * sigma2));
    }
    if (!std::isfinite(per_step)) {
      return absl::InternalError("NumericalOverflow in RDP computation");
    }
    state.rdp[i] = per_step * static_cast<double>(steps);
  }
  return state;
}

struct EpsilonResult {
  double epsilon = kInfinity;
  double order = 0.0;
};

// eps = min_alpha rdp_alpha + ln(1/delta) / (alpha - 1).
inline absl::StatusOr<EpsilonResult> RdpToEpsilon(const AccountantState& state,
                                                  double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError("delta must lie in (0, 1)");
  }
  if (state.orders.empty() || state.orders.size() != state.rdp.size()) {
    return absl::InvalidArgumentError("EmptyState: accountant has no orders");
  }
  EpsilonResult best;
  const double log_inv_delta = std::log(1.0 / delta);
  for (size_t i = 0; i < state.orders.size(); ++i) {
    const double eps = state.rdp[i] + log_inv_delta / (state.orders[i] - 1.0);
    if (eps < best.epsilon) {
      best.epsilon = eps;
      best.order = state.orders[i];
    }
  }
  return best;
}

inline absl::StatusOr<double> DpSgdEpsilon(double q, double noise_multiplier,
                                           long steps, double delta) {
  ASSIGN_OR_RETURN(AccountantState state,
                   RdpSubsampledGaussian(q, noise_multiplier, steps));
  ASSIGN_OR_RETURN(EpsilonResult r, RdpToEpsilon(state, delta));
  return r.epsilon;
}

// Smallest-found noise multiplier whose accounted epsilon lies in
// [0.99 * epsilon, epsilon]. Infinite epsilon returns 0.
inline absl::StatusOr<double> CalibrateNoiseMultiplier(double q, long steps,
                                                       double epsilon, double delta) {
  if (std::isinf(epsilon) && epsilon > 0) return 0.0;
  if (!(epsilon > 0.0)) return absl::InvalidArgumentError("epsilon must be > 0");
  constexpr double kMaxSigma = 1e6;
  auto eps_at = [&](double sigma) { return DpSgdEpsilon(q, sigma, steps, delta); };

  double hi = 1.0;
  ASSIGN_OR_RETURN(double eps_hi, eps_at(hi));
  while (eps_hi > epsilon) {
    if (hi >= kMaxSigma) {
      return absl::FailedPreconditionError(absl::StrCat(
          "Unachievable: epsilon=", epsilon, " not reachable with sigma <= 1e6"));
    }
    hi = std::min(hi * 2.0, kMaxSigma);
    ASSIGN_OR_RETURN(eps_hi, eps_at(hi));
  }
  double lo = hi / 2.0;
  ASSIGN_OR_RETURN(double eps_lo, eps_at(lo));
  while (eps_lo <= epsilon) {
    hi = lo;
    eps_hi = eps_lo;
    lo /= 2.0;
    if (lo < 1e-6) break;
    ASSIGN_OR_RETURN(eps_lo, eps_at(lo));
  }
  // Invariant: eps(hi) <= epsilon < eps(lo); eps is decreasing in sigma.
  for (int iter = 0; iter < 200; ++iter) {
    if (eps_hi >= 0.99 * epsilon && (hi - lo) / hi < 1e-3) break;
    const double mid = 0.5 * (lo + hi);
    ASSIGN_OR_RETURN(double eps_mid, eps_at(mid));
    if (eps_mid <= epsilon) {
      hi = mid;
      eps_hi = eps_mid;
    } else {
      lo = mid;
    }
  }
  if (eps_hi > epsilon || eps_hi < 0.99 * epsilon) {
    return absl::InternalError(absl::StrCat(
        "noise calibration did not converge: eps(", hi, ")=", eps_hi));
  }
  return hi;
}

// Sequential-composition budget split proportional to weights.
inline std::vector<double> SplitBudget(double epsilon, const std::vector<double>& weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> parts;
  parts.reserve(weights.size());
  for (double w : weights) parts.push_back(epsilon * w / total);
  return parts;
}

inline std::vector<double> SplitBudgetUniform(double epsilon, int parts) {
  return SplitBudget(epsilon, std::vector<double>(parts, 1.0));
}

}  // namespace dpsyn

#endif  // DPSYN_PRIVACY_H_
