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

// Conditional Wasserstein GAN with weight clipping. Only the critic sees real
// rows, so only critic updates go through DP-SGD; the generator is trained
// from the (already private) critic by plain SGD.

#ifndef DPSYN_GAN_H_
#define DPSYN_GAN_H_

#include <cmath>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "dpsyn/common.h"
#include "dpsyn/dataset.h"
#include "dpsyn/nn.h"
#include "dpsyn/privacy.h"
#include "dpsyn/rng.h"
#include "dpsyn/vae.h"
#include "json.hpp"

namespace dpsyn {

struct CwganConfig {
  std::vector<int> hidden = {256, 256};
  int latent_dim = 32;
  double weight_clip = 0.01;
  int n_critic = 5;
  // steps counts critic updates; the generator takes steps / n_critic.
  DpSgdConfig critic_sgd{.clip_norm = 1.0, .noise_multiplier = 0.0, .batch_size = 64,
                         .learning_rate = 0.05, .steps = 2000};
  // The clipped critic has a tiny Lipschitz constant, so generator gradients
  // are small and plain SGD needs a large step.
  double generator_learning_rate = 30.0;
};

struct CwganModel {
  Mlp generator;      // (z ++ onehot(y)) -> x
  Mlp discriminator;  // (x ++ onehot(y)) -> score
  int latent_dim = 0;
  int num_classes = 0;
  double weight_clip = 0.01;

  int data_dim() const { return generator.out_dim(); }
};

inline CwganModel CreateCwgan(int d, int num_classes, const CwganConfig& config, Rng& rng) {
  CwganModel m;
  m.latent_dim = config.latent_dim;
  m.num_classes = num_classes;
  m.weight_clip = config.weight_clip;
  std::vector<int> gen = {config.latent_dim + num_classes};
  gen.insert(gen.end(), config.hidden.begin(), config.hidden.end());
  gen.push_back(d);
  std::vector<int> disc = {d + num_classes};
  disc.insert(disc.end(), config.hidden.begin(), config.hidden.end());
  disc.push_back(1);
  m.generator = Mlp::Create(gen, Activation::kRelu, Activation::kIdentity, rng);
  m.discriminator = Mlp::Create(disc, Activation::kRelu, Activation::kIdentity, rng);
  m.discriminator.ClipParameters(m.weight_clip);
  return m;
}

inline Matrix Stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

// Critic pass on paired real and generated rows (columns). Example i's loss
// is D(fake_i, y_i) - D(real_i, y_i); the state is folded so each example's
// gradient covers both terms. `gap` receives mean D(real) - mean D(fake).
inline BatchGradients CriticBatch(const CwganModel& model, const Matrix& real, const Matrix& fake,
                                  const Matrix& y_onehot, double* gap = nullptr) {
  const Eigen::Index b = real.cols();
  Matrix input(real.rows() + y_onehot.rows(), 2 * b);
  input << real, fake, y_onehot, y_onehot;
  BatchGradients bg = BackpropBatch(model.discriminator, input, [&](const Matrix& scores) {
    if (gap != nullptr) {
      *gap = b > 0 ? (scores.leftCols(b).sum() - scores.rightCols(b).sum()) / b : 0.0;
    }
    Matrix up(1, 2 * b);
    up << Matrix::Constant(1, b, -1.0), Matrix::Constant(1, b, 1.0);
    return up;
  });
  bg.fold = 2;
  return bg;
}

// Gradient of -mean_i D(G(z_i, y_i), y_i) with respect to generator params.
inline Vector GeneratorGradient(const CwganModel& model, const Matrix& z,
                                const std::vector<int>& labels) {
  const Matrix y = OneHotColumns(labels, model.num_classes);
  const double b = static_cast<double>(z.cols());
  ForwardCache gen_cache;
  Matrix fake = model.generator.Forward(Stack(z, y), &gen_cache);
  Matrix critic_in_grad;
  BackpropBatch(
      model.discriminator, Stack(fake, y),
      [&](const Matrix& scores) { return Matrix(Matrix::Constant(1, scores.cols(), -1.0 / b)); },
      &critic_in_grad);
  BatchGradients gen;
  gen.mlp = &model.generator;
  gen.cache = std::move(gen_cache);
  model.generator.BackwardDeltas(gen.cache, critic_in_grad.topRows(fake.rows()), &gen.deltas);
  return gen.WeightedSum(Vector::Ones(z.cols()));
}

struct CwganTrainResult {
  CwganModel model;
  DpSgdLedger ledger;
  std::vector<double> critic_gap;  // per generator step, mean over its critic steps
};

inline absl::StatusOr<CwganTrainResult> TrainCwgan(const LabeledTable& train,
                                                   const CwganConfig& config,
                                                   const PrivacySpec& privacy, Rng& rng) {
  RETURN_IF_ERROR(privacy.Validate());
  const int n = train.num_rows();
  ASSIGN_OR_RETURN(DpSgdLedger ledger,
                   PlanDpSgd(n, config.critic_sgd, privacy.epsilon, privacy.delta));
  DpSgdConfig sgd = config.critic_sgd;
  sgd.noise_multiplier = ledger.noise_multiplier;

  CwganTrainResult result;
  result.model = CreateCwgan(train.num_features(), train.num_classes(), config, rng);
  CwganModel& model = result.model;
  const std::vector<double> freq = train.ClassFrequencies();
  const Vector class_probs = Eigen::Map<const Vector>(freq.data(), static_cast<Eigen::Index>(freq.size()));
  const Matrix xt = train.features.transpose();
  double gap_sum = 0.0;
  int gap_count = 0;
  for (long step = 0; step < sgd.steps; ++step) {
    std::vector<int> rows = PoissonBatch(n, ledger.sample_rate, rng);
    const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
    Matrix real(train.num_features(), m);
    std::vector<int> labels(rows.size());
    for (Eigen::Index k = 0; k < m; ++k) {
      real.col(k) = xt.col(rows[k]);
      labels[k] = train.labels[rows[k]];
    }
    const Matrix y = OneHotColumns(labels, model.num_classes);
    const Matrix z = StandardNormalMatrix(model.latent_dim, m, rng);
    const Matrix fake = model.generator.Forward(Stack(z, y));
    double gap = 0.0;
    BatchGradients critic = CriticBatch(model, real, fake, y, &gap);
    std::vector<Vector> grad = PrivatizeBatched({&critic}, sgd, rng);
    model.discriminator.AddScaled(grad[0], -sgd.learning_rate);
    model.discriminator.ClipParameters(model.weight_clip);
    if (!std::isfinite(gap) || !model.discriminator.AllFinite()) {
      return absl::InternalError(absl::StrCat("NonFiniteLoss: critic step ", step));
    }
    gap_sum += gap;
    ++gap_count;

    if ((step + 1) % config.n_critic == 0) {
      // Generator labels come from the public class frequencies.
      std::vector<int> gen_labels = SampleLabels(class_probs, sgd.batch_size, rng);
      Matrix gz = StandardNormalMatrix(model.latent_dim, sgd.batch_size, rng);
      model.generator.AddScaled(GeneratorGradient(model, gz, gen_labels),
                                -config.generator_learning_rate);
      if (!model.generator.AllFinite()) {
        return absl::InternalError(absl::StrCat("NonFiniteLoss: generator at step ", step));
      }
      result.critic_gap.push_back(gap_sum / gap_count);
      gap_sum = 0.0;
      gap_count = 0;
    }
  }
  result.ledger = ledger;
  return result;
}

inline LabeledTable SampleCwgan(const CwganModel& model, int n, const Vector& class_probs,
                                const LabeledTable& schema, Rng& rng) {
  LabeledTable out = schema.EmptyLike();
  out.domain_sizes.clear();
  out.labels = SampleLabels(class_probs, n, rng);
  Matrix z = StandardNormalMatrix(model.latent_dim, n, rng);
  out.features =
      model.generator.Forward(Stack(z, OneHotColumns(out.labels, model.num_classes))).transpose();
  return out;
}

inline nlohmann::json ToJson(const CwganModel& model) {
  return {{"format", "dpsyn-cwgan"},
          {"version", 1},
          {"latent_dim", model.latent_dim},
          {"num_classes", model.num_classes},
          {"weight_clip", model.weight_clip},
          {"generator", model.generator.ToJson()},
          {"discriminator", model.discriminator.ToJson()}};
}

inline absl::StatusOr<CwganModel> CwganFromJson(const nlohmann::json& j) {
  if (j.value("format", "") != "dpsyn-cwgan") {
    return absl::InvalidArgumentError("not a dpsyn-cwgan checkpoint");
  }
  CwganModel m;
  m.latent_dim = j.at("latent_dim");
  m.num_classes = j.at("num_classes");
  m.weight_clip = j.at("weight_clip");
  ASSIGN_OR_RETURN(m.generator, Mlp::FromJson(j.at("generator")));
  ASSIGN_OR_RETURN(m.discriminator, Mlp::FromJson(j.at("discriminator")));
  if (m.generator.in_dim() != m.latent_dim + m.num_classes ||
      m.discriminator.in_dim() != m.generator.out_dim() + m.num_classes) {
    return absl::InvalidArgumentError("ShapeMismatch: generator/discriminator");
  }
  return m;
}

}  // namespace dpsyn

#endif  // DPSYN_GAN_H_
