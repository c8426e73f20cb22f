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

// Machine-learning efficacy: an L2-regularized multinomial logistic
// regression fit on one table and scored on held-out real rows.

#ifndef DPSYN_EVAL_UTILITY_H_
#define DPSYN_EVAL_UTILITY_H_

#include <algorithm>
#include <cmath>
#include <vector>

#include "dpsyn/common.h"
#include "dpsyn/dataset.h"
#include "dpsyn/rng.h"

namespace dpsyn {

struct SoftmaxClassifier {
  Matrix weights;  // C x d
  Vector bias;     // C
  double l2_lambda = 1e-4;
  int max_iters = 2000;
  double grad_tol = 1e-6;
  int iterations = 0;
  std::vector<double> loss_history;

  // Mean cross-entropy + (lambda/2) ||W||^2; fills gradients if given.
  double Loss(const Matrix& x, const std::vector<int>& y, const Matrix& w, const Vector& b,
              Matrix* gw = nullptr, Vector* gb = nullptr) const {
    const Eigen::Index n = x.rows();
    Matrix logits = x * w.transpose();  // n x C
    logits.rowwise() += b.transpose();
    double loss = 0.0;
    Matrix probs(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = logits.row(i).maxCoeff();
      const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
      loss += lse - logits(i, y[i]);
      probs.row(i) = (logits.row(i).array() - lse).exp();
    }
    loss = loss / n + 0.5 * l2_lambda * w.squaredNorm();
    if (gw != nullptr) {
      for (Eigen::Index i = 0; i < n; ++i) probs(i, y[i]) -= 1.0;
      *gw = probs.transpose() * x / static_cast<double>(n) + l2_lambda * w;
      *gb = probs.colwise().sum().transpose() / static_cast<double>(n);
    }
    return loss;
  }

  // Full-batch gradient descent from (w0, b0). Each trial step is the
  // Barzilai-Borwein estimate, halved until the Armijo condition holds, so
  // the loss never increases.
  void Fit(const Matrix& x, const std::vector<int>& y, int num_classes,
           const Matrix* w0 = nullptr, const Vector* b0 = nullptr) {
    const Eigen::Index d = x.cols();
    weights = w0 != nullptr ? *w0 : Matrix::Zero(num_classes, d);
    bias = b0 != nullptr ? *b0 : Vector::Zero(num_classes);
    loss_history.clear();
    Matrix gw;
    Vector gb;
    double loss = Loss(x, y, weights, bias, &gw, &gb);
    loss_history.push_back(loss);
    double step = 1.0;
    for (iterations = 0; iterations < max_iters; ++iterations) {
      const double g2 = gw.squaredNorm() + gb.squaredNorm();
      if (std::sqrt(g2) < grad_tol) break;
      Matrix w_new;
      Vector b_new;
      double loss_new;
      while (true) {
        w_new = weights - step * gw;
        b_new = bias - step * gb;
        loss_new = Loss(x, y, w_new, b_new);
        if (loss_new <= loss - 0.5 * step * g2 || step < 1e-12) break;
        step *= 0.5;
      }
      if (!(loss_new <= loss)) break;  // no descent possible at machine precision
      Matrix gw_new;
      Vector gb_new;
      loss = Loss(x, y, w_new, b_new, &gw_new, &gb_new);
      const double ss = (w_new - weights).squaredNorm() + (b_new - bias).squaredNorm();
      const double sy = ((w_new - weights).cwiseProduct(gw_new - gw)).sum() +
                        (b_new - bias).dot(gb_new - gb);
      step = sy > 0.0 ? std::min(ss / sy, 1e6) : std::min(step * 2.0, 1e6);
      weights = std::move(w_new);
      bias = std::move(b_new);
      gw = std::move(gw_new);
      gb = std::move(gb_new);
      loss_history.push_back(loss);
    }
  }

  std::vector<int> Predict(const Matrix& x) const {
    Matrix logits = x * weights.transpose();
    logits.rowwise() += bias.transpose();
    std::vector<int> out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) logits.row(i).maxCoeff(&out[i]);
    return out;
  }
};

struct UtilityResult {
  double accuracy = 0.0;
  int iterations = 0;
  Warnings warnings;
};

// Standardizes both tables with a transform fit on `train`, fits the
// classifier on train, and returns test accuracy.
inline UtilityResult TrainEval(const LabeledTable& train, const LabeledTable& test) {
  UtilityResult result;
  const int num_classes = std::max(train.num_classes(), test.num_classes());
  std::vector<int> counts(num_classes, 0);
  for (int y : train.labels) ++counts[y];
  const int present = static_cast<int>(std::count_if(counts.begin(), counts.end(),
                                                     [](int c) { return c > 0; }));
  if (present < num_classes) {
    result.warnings.push_back("MissingClass: some classes absent from the training table");
  }
  if (test.num_rows() == 0) return result;
  std::vector<int> predicted;
  if (present <= 1) {
    result.warnings.push_back("SingleClassTrain: constant predictor");
    const int only = train.num_rows() > 0 ? train.labels.front() : 0;
    predicted.assign(test.num_rows(), only);
  } else {
    ContinuousTransform transform = ContinuousTransform::Fit(train.features);
    SoftmaxClassifier clf;
    clf.Fit(transform.Apply(train.features), train.labels, num_classes);
    result.iterations = clf.iterations;
    predicted = clf.Predict(transform.Apply(test.features));
  }
  int correct = 0;
  for (int i = 0; i < test.num_rows(); ++i) correct += predicted[i] == test.labels[i];
  result.accuracy = static_cast<double>(correct) / test.num_rows();
  return result;
}

}  // namespace dpsyn

#endif  // DPSYN_EVAL_UTILITY_H_
