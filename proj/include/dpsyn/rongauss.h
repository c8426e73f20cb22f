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

// RON-Gauss: a per-class Gaussian fitted in a random orthonormal projection
// of unit-normalized rows, with Gaussian-mechanism noise on the mean and the
// projected covariance.
//
// Sampling follows the published algorithm as written: z ~ N(W^T mu, Sigma)
// and the output is W z + mu, so the mean direction inside span(W) is counted
// twice. This is intentional.

#ifndef DPSYN_RONGAUSS_H_
#define DPSYN_RONGAUSS_H_

#include <algorithm>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "dpsyn/common.h"
#include "dpsyn/dataset.h"
#include "dpsyn/privacy.h"
#include "dpsyn/rng.h"
#include "json.hpp"

namespace dpsyn {

struct RonGaussModel {
  Matrix projection;         // d x p, orthonormal columns
  std::vector<Vector> means;  // per class, length d
  std::vector<Matrix> covs;   // per class, p x p, symmetric PSD
  Vector class_probs;
  std::vector<double> mean_sigma;  // per class
  std::vector<double> cov_sigma;   // per class

  int dim() const { return static_cast<int>(projection.rows()); }
  int projected_dim() const { return static_cast<int>(projection.cols()); }
  int num_classes() const { return static_cast<int>(means.size()); }
};

inline int DefaultProjectionDim(int d) { return std::min(d, 100); }

// Thin Q of a seeded Gaussian d x p matrix.
inline Matrix RandomOrthonormal(int d, int p, Rng& rng) {
  Matrix g = StandardNormalMatrix(d, p, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(d, p);
}

// (S + S^T) / 2 with negative eigenvalues clipped to zero.
inline Matrix RepairPsd(const Matrix& s) {
  Matrix sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  Vector lambda = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
}

namespace internal {

// Scales each column to unit norm; all-zero columns stay zero.
inline int NormalizeColumns(Matrix& x) {
  int zeros = 0;
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const double norm = x.col(i).norm();
    if (norm > 0.0) {
      x.col(i) /= norm;
    } else {
      ++zeros;
    }
  }
  return zeros;
}

}  // namespace internal

// Per class: unit-normalize rows, DP mean (sensitivity 2/n_c), center,
// re-normalize, project, DP covariance (sensitivity 2/n_c). Each class gets
// (epsilon/2, delta/2) for the mean and the same for the covariance; classes
// are disjoint so they compose in parallel. Class frequencies are public.
inline absl::StatusOr<RonGaussModel> FitRonGauss(const LabeledTable& train, int p,
                                                 const PrivacySpec& privacy, Rng& rng,
                                                 Warnings* warnings = nullptr) {
  RETURN_IF_ERROR(privacy.Validate());
  const int d = train.num_features();
  if (p < 1 || p > d) {
    return absl::InvalidArgumentError(absl::StrCat("projection dim ", p, " not in [1, ", d, "]"));
  }
  RonGaussModel model;
  model.projection = RandomOrthonormal(d, p, rng);
  const std::vector<double> freq = train.ClassFrequencies();
  model.class_probs = Eigen::Map<const Vector>(freq.data(), static_cast<Eigen::Index>(freq.size()));

  for (int c = 0; c < train.num_classes(); ++c) {
    const std::vector<int> rows = train.RowsOfClass(c);
    const int n_c = static_cast<int>(rows.size());
    if (n_c == 0) {
      return absl::InvalidArgumentError(absl::StrCat("EmptyClass: class ", c, " has no rows"));
    }
    Matrix x(d, n_c);  // one example per column
    for (int k = 0; k < n_c; ++k) x.col(k) = train.features.row(rows[k]).transpose();
    if (int zeros = internal::NormalizeColumns(x); zeros > 0 && warnings != nullptr) {
      warnings->push_back(absl::StrCat("ZeroVector: ", zeros, " all-zero rows in class ", c));
    }

    const double sensitivity = 2.0 / n_c;
    ASSIGN_OR_RETURN(const double mean_sigma,
                     CalibrateGaussian(sensitivity, privacy.epsilon / 2, privacy.delta / 2));
    Vector mu = x.rowwise().mean();
    mu = AddGaussianNoise(mu, mean_sigma, rng);

    x.colwise() -= mu;
    internal::NormalizeColumns(x);
    Matrix xbar = model.projection.transpose() * x;  // p x n_c
    Matrix cov = xbar * xbar.transpose() / static_cast<double>(n_c);
    const double cov_sigma = mean_sigma;  // same sensitivity and budget share
    if (cov_sigma > 0.0) cov += cov_sigma * StandardNormalMatrix(p, p, rng);

    model.means.push_back(std::move(mu));
    model.covs.push_back(RepairPsd(cov));
    model.mean_sigma.push_back(mean_sigma);
    model.cov_sigma.push_back(cov_sigma);
  }
  return model;
}

// n draws from class c: W z + mu_c with z ~ N(W^T mu_c, Sigma_c), one per row.
inline Matrix SampleRonGaussClass(const RonGaussModel& model, int c, int n, Rng& rng) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(model.covs[c]);
  const Matrix factor = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const Vector center = model.projection.transpose() * model.means[c];
  Matrix z = factor * StandardNormalMatrix(model.projected_dim(), n, rng);
  z.colwise() += center;
  Matrix x = model.projection * z;
  x.colwise() += model.means[c];
  return x.transpose();
}

// Labels drawn from class_probs, then features per class.
inline LabeledTable SampleRonGauss(const RonGaussModel& model, int n, const LabeledTable& schema,
                                   Rng& rng) {
  LabeledTable out = schema.EmptyLike();
  out.domain_sizes.clear();
  std::discrete_distribution<int> label_dist(model.class_probs.data(),
                                             model.class_probs.data() + model.class_probs.size());
  out.labels.resize(n);
  std::vector<int> counts(model.num_classes(), 0);
  for (int& y : out.labels) ++counts[y = label_dist(rng)];
  out.features.resize(n, model.dim());
  std::vector<int> next(model.num_classes(), 0);
  std::vector<Matrix> per_class;
  for (int c = 0; c < model.num_classes(); ++c) {
    per_class.push_back(SampleRonGaussClass(model, c, counts[c], rng));
  }
  for (int i = 0; i < n; ++i) {
    const int y = out.labels[i];
    out.features.row(i) = per_class[y].row(next[y]++);
  }
  return out;
}

namespace internal {

inline nlohmann::json MatrixJson(const Matrix& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"values", std::vector<double>(m.data(), m.data() + m.size())}};
}

inline absl::StatusOr<Matrix> MatrixFromJson(const nlohmann::json& j) {
  const int rows = j.at("rows"), cols = j.at("cols");
  auto v = j.at("values").get<std::vector<double>>();
  if (static_cast<long>(v.size()) != static_cast<long>(rows) * cols) {
    return absl::InvalidArgumentError("ShapeMismatch: matrix size");
  }
  return Matrix(Eigen::Map<Matrix>(v.data(), rows, cols));
}

}  // namespace internal

inline nlohmann::json ToJson(const RonGaussModel& model) {
  nlohmann::json j;
  j["format"] = "dpsyn-rongauss";
  j["version"] = 1;
  j["projection"] = internal::MatrixJson(model.projection);
  j["class_probs"] = internal::MatrixJson(model.class_probs);
  j["classes"] = nlohmann::json::array();
  for (int c = 0; c < model.num_classes(); ++c) {
    j["classes"].push_back({{"mean", internal::MatrixJson(model.means[c])},
                            {"cov", internal::MatrixJson(model.covs[c])},
                            {"mean_sigma", model.mean_sigma[c]},
                            {"cov_sigma", model.cov_sigma[c]}});
  }
  return j;
}

inline absl::StatusOr<RonGaussModel> RonGaussFromJson(const nlohmann::json& j) {
  if (j.value("format", "") != "dpsyn-rongauss") {
    return absl::InvalidArgumentError("not a dpsyn-rongauss model");
  }
  RonGaussModel model;
  ASSIGN_OR_RETURN(model.projection, internal::MatrixFromJson(j.at("projection")));
  ASSIGN_OR_RETURN(Matrix probs, internal::MatrixFromJson(j.at("class_probs")));
  model.class_probs = probs.col(0);
  for (const auto& cj : j.at("classes")) {
    ASSIGN_OR_RETURN(Matrix mean, internal::MatrixFromJson(cj.at("mean")));
    ASSIGN_OR_RETURN(Matrix cov, internal::MatrixFromJson(cj.at("cov")));
    if (mean.rows() != model.projection.rows() || cov.rows() != model.projection.cols()) {
      return absl::InvalidArgumentError("ShapeMismatch: class parameters");
    }
    model.means.push_back(mean.col(0));
    model.covs.push_back(std::move(cov));
    model.mean_sigma.push_back(cj.at("mean_sigma"));
    model.cov_sigma.push_back(cj.at("cov_sigma"));
  }
  return model;
}

}  // namespace dpsyn

#endif  // DPSYN_RONGAUSS_H_
