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

// Conditional VAE trained with DP-SGD on encoder and decoder jointly.
//
// Per-example loss: recon_weight * mean_j (xhat_j - x_j)^2
//                   + 0.5 * sum_k (mu_k^2 + exp(logvar_k) - 1 - logvar_k).

#ifndef DPSYN_VAE_H_
#define DPSYN_VAE_H_

#include <cmath>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "dpsyn/common.h"
#include "dpsyn/dataset.h"
#include "dpsyn/nn.h"
#include "dpsyn/privacy.h"
#include "dpsyn/rng.h"
#include "json.hpp"

namespace dpsyn {

struct CvaeConfig {
  std::vector<int> hidden = {256, 256};
  int latent_dim = 32;
  double recon_weight = 10.0;
  DpSgdConfig sgd{.clip_norm = 1.0, .noise_multiplier = 0.0, .batch_size = 64,
                  .learning_rate = 0.1, .steps = 2000};
};

struct CvaeModel {
  Mlp encoder;  // (x ++ onehot(y)) -> (mu, logvar)
  Mlp decoder;  // (z ++ onehot(y)) -> xhat
  int latent_dim = 0;
  int num_classes = 0;
  double recon_weight = 1.0;

  int data_dim() const { return decoder.out_dim(); }
};

inline CvaeModel CreateCvae(int d, int num_classes, const CvaeConfig& config, Rng& rng) {
  CvaeModel m;
  m.latent_dim = config.latent_dim;
  m.num_classes = num_classes;
  m.recon_weight = config.recon_weight;
  std::vector<int> enc = {d + num_classes};
  enc.insert(enc.end(), config.hidden.begin(), config.hidden.end());
  enc.push_back(2 * config.latent_dim);
  std::vector<int> dec = {config.latent_dim + num_classes};
  dec.insert(dec.end(), config.hidden.rbegin(), config.hidden.rend());
  dec.push_back(d);
  m.encoder = Mlp::Create(enc, Activation::kRelu, Activation::kIdentity, rng);
  m.decoder = Mlp::Create(dec, Activation::kRelu, Activation::kIdentity, rng);
  return m;
}

// KL(N(mu, diag exp(logvar)) || N(0, I)), closed form.
inline double GaussianKl(const Vector& mu, const Vector& logvar) {
  return 0.5 * (mu.array().square() + logvar.array().exp() - 1.0 - logvar.array()).sum();
}

// One batched pass. `x` is d x B, `y_onehot` C x B, `eta` L x B (the
// reparameterization noise). Fills per-network gradient state and returns
// per-example (reconstruction MSE, KL).
struct CvaeBatch {
  BatchGradients encoder;
  BatchGradients decoder;
  Vector recon_mse;
  Vector kl;

  Vector Losses(double recon_weight) const { return recon_weight * recon_mse + kl; }
};

inline CvaeBatch CvaeForwardBackward(const CvaeModel& model, const Matrix& x,
                                     const Matrix& y_onehot, const Matrix& eta) {
  const int latent = model.latent_dim;
  const Eigen::Index batch = x.cols();
  const double d = static_cast<double>(x.rows());
  CvaeBatch out;
  out.encoder.mlp = &model.encoder;
  Matrix enc_in(x.rows() + y_onehot.rows(), batch);
  enc_in << x, y_onehot;
  const Matrix enc_out = model.encoder.Forward(enc_in, &out.encoder.cache);
  const auto mu = enc_out.topRows(latent);
  const auto logvar = enc_out.bottomRows(latent);
  const Matrix std_dev = (0.5 * logvar.array()).exp().matrix();
  Matrix z = mu + std_dev.cwiseProduct(eta);

  Matrix dec_in(latent + y_onehot.rows(), batch);
  dec_in << z, y_onehot;
  Matrix dec_in_grad;
  out.decoder = BackpropBatch(
      model.decoder, dec_in,
      [&](const Matrix& xhat) {
        Matrix resid = xhat - x;
        out.recon_mse = resid.colwise().squaredNorm().transpose() / d;
        return Matrix((2.0 * model.recon_weight / d) * resid);
      },
      &dec_in_grad);
  const Matrix dz = dec_in_grad.topRows(latent);

  out.kl = 0.5 * (mu.array().square() + logvar.array().exp() - 1.0 - logvar.array())
                     .colwise()
                     .sum()
                     .transpose()
                     .matrix();
  Matrix upstream(2 * latent, batch);
  upstream.topRows(latent) = dz + mu;
  upstream.bottomRows(latent) =
      (dz.array() * eta.array() * 0.5 * std_dev.array() + 0.5 * (logvar.array().exp() - 1.0))
          .matrix();
  model.encoder.BackwardDeltas(out.encoder.cache, upstream, &out.encoder.deltas);
  return out;
}

inline Matrix OneHotColumns(const std::vector<int>& labels, int num_classes) {
  Matrix m = Matrix::Zero(num_classes, static_cast<Eigen::Index>(labels.size()));
  for (size_t i = 0; i < labels.size(); ++i) m(labels[i], static_cast<Eigen::Index>(i)) = 1.0;
  return m;
}

struct CvaeTrainResult {
  CvaeModel model;
  DpSgdLedger ledger;
  std::vector<double> epoch_recon_mse;  // mean over the examples seen per epoch
};

// Trains on a standardized table. The noise multiplier is calibrated so the
// accountant's epsilon over all steps meets `privacy`.
inline absl::StatusOr<CvaeTrainResult> TrainCvae(const LabeledTable& train,
                                                 const CvaeConfig& config,
                                                 const PrivacySpec& privacy, Rng& rng) {
  RETURN_IF_ERROR(privacy.Validate());
  const int n = train.num_rows();
  ASSIGN_OR_RETURN(DpSgdLedger ledger,
                   PlanDpSgd(n, config.sgd, privacy.epsilon, privacy.delta));
  DpSgdConfig sgd = config.sgd;
  sgd.noise_multiplier = ledger.noise_multiplier;

  CvaeTrainResult result;
  result.model = CreateCvae(train.num_features(), train.num_classes(), config, rng);
  CvaeModel& model = result.model;
  const Matrix xt = train.features.transpose();
  const long steps_per_epoch = std::max<long>(1, n / std::max(1, sgd.batch_size));
  double epoch_sum = 0.0;
  long epoch_count = 0;
  for (long step = 0; step < sgd.steps; ++step) {
    std::vector<int> rows = PoissonBatch(n, ledger.sample_rate, rng);
    Matrix x(train.num_features(), static_cast<Eigen::Index>(rows.size()));
    std::vector<int> labels(rows.size());
    for (size_t k = 0; k < rows.size(); ++k) {
      x.col(static_cast<Eigen::Index>(k)) = xt.col(rows[k]);
      labels[k] = train.labels[rows[k]];
    }
    Matrix eta = StandardNormalMatrix(model.latent_dim, x.cols(), rng);
    CvaeBatch batch = CvaeForwardBackward(model, x, OneHotColumns(labels, model.num_classes), eta);
    const Vector losses = batch.Losses(model.recon_weight);
    if (!losses.allFinite()) {
      return absl::InternalError(absl::StrCat("NonFiniteLoss: VAE step ", step));
    }
    epoch_sum += batch.recon_mse.sum();
    epoch_count += batch.recon_mse.size();

    std::vector<Vector> grads = PrivatizeBatched({&batch.encoder, &batch.decoder}, sgd, rng);
    model.encoder.AddScaled(grads[0], -sgd.learning_rate);
    model.decoder.AddScaled(grads[1], -sgd.learning_rate);
    if (!model.encoder.AllFinite() || !model.decoder.AllFinite()) {
      return absl::InternalError(absl::StrCat("NonFiniteLoss: VAE parameters at step ", step));
    }
    if ((step + 1) % steps_per_epoch == 0) {
      result.epoch_recon_mse.push_back(epoch_count > 0 ? epoch_sum / epoch_count : 0.0);
      epoch_sum = 0.0;
      epoch_count = 0;
    }
  }
  result.ledger = ledger;
  return result;
}

// Decodes the given latents for the given labels; columns are examples.
inline Matrix CvaeDecode(const CvaeModel& model, const Matrix& z, const std::vector<int>& labels) {
  return model.decoder.Forward(ConditionedLatents(z, labels, model.num_classes));
}

inline std::vector<int> SampleLabels(const Vector& class_probs, int n, Rng& rng) {
  std::discrete_distribution<int> dist(class_probs.data(), class_probs.data() + class_probs.size());
  std::vector<int> labels(n);
  for (int& y : labels) y = dist(rng);
  return labels;
}

// y ~ class_probs, z ~ N(0, I), x = decoder(z ++ onehot(y)). Output is in the
// training (standardized) space.
inline LabeledTable SampleCvae(const CvaeModel& model, int n, const Vector& class_probs,
                               const LabeledTable& schema, Rng& rng) {
  LabeledTable out = schema.EmptyLike();
  out.domain_sizes.clear();
  out.labels = SampleLabels(class_probs, n, rng);
  Matrix z = StandardNormalMatrix(model.latent_dim, n, rng);
  out.features = CvaeDecode(model, z, out.labels).transpose();
  return out;
}

inline nlohmann::json ToJson(const CvaeModel& model) {
  return {{"format", "dpsyn-cvae"},
          {"version", 1},
          {"latent_dim", model.latent_dim},
          {"num_classes", model.num_classes},
          {"recon_weight", model.recon_weight},
          {"encoder", model.encoder.ToJson()},
          {"decoder", model.decoder.ToJson()}};
}

inline absl::StatusOr<CvaeModel> CvaeFromJson(const nlohmann::json& j) {
  if (j.value("format", "") != "dpsyn-cvae") {
    return absl::InvalidArgumentError("not a dpsyn-cvae checkpoint");
  }
  CvaeModel m;
  m.latent_dim = j.at("latent_dim");
  m.num_classes = j.at("num_classes");
  m.recon_weight = j.at("recon_weight");
  ASSIGN_OR_RETURN(m.encoder, Mlp::FromJson(j.at("encoder")));
  ASSIGN_OR_RETURN(m.decoder, Mlp::FromJson(j.at("decoder")));
  if (m.encoder.out_dim() != 2 * m.latent_dim ||
      m.decoder.in_dim() != m.latent_dim + m.num_classes) {
    return absl::InvalidArgumentError("ShapeMismatch: encoder/decoder vs latent_dim");
  }
  return m;
}

}  // namespace dpsyn

#endif  // DPSYN_VAE_H_
