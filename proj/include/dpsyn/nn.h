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

// A small fully-connected network with analytic backprop, and DP-SGD
// (per-example clipping + Gaussian noise) on top of it.
//
// Batches are column-major: an input batch is in_dim x B, one example per
// column. Parameters are flattened layer by layer, weights (column-major)
// before biases.

#ifndef DPSYN_NN_H_
#define DPSYN_NN_H_

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "dpsyn/common.h"
#include "dpsyn/privacy.h"
#include "dpsyn/rng.h"
#include "json.hpp"

namespace dpsyn {

enum class Activation { kIdentity, kRelu, kTanh };

inline std::string ActivationName(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
  }
  return "identity";
}

inline absl::StatusOr<Activation> ParseActivation(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  return absl::InvalidArgumentError(absl::StrCat("unknown activation '", name, "'"));
}

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::kIdentity;

  int in_dim() const { return static_cast<int>(weights.cols()); }
  int out_dim() const { return static_cast<int>(weights.rows()); }
  Eigen::Index num_params() const { return weights.size() + bias.size(); }
};

// Intermediate values of a batched forward pass, needed by backward.
struct ForwardCache {
  std::vector<Matrix> inputs;  // inputs[l]: activation fed into layer l
  std::vector<Matrix> pre;     // pre[l]: pre-activation of layer l
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {}

  // Glorot-uniform weights, zero biases. `sizes` = {in, h1, ..., out}.
  static Mlp Create(const std::vector<int>& sizes, Activation hidden,
                    Activation output, Rng& rng) {
    std::vector<DenseLayer> layers;
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
      const int fan_in = sizes[l], fan_out = sizes[l + 1];
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      DenseLayer layer;
      layer.weights.resize(fan_out, fan_in);
      for (Eigen::Index k = 0; k < layer.weights.size(); ++k) {
        layer.weights.data()[k] = dist(rng);
      }
      layer.bias = Vector::Zero(fan_out);
      layer.activation = (l + 2 == sizes.size()) ? output : hidden;
      layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
  }

  int in_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  int out_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

  Eigen::Index num_params() const {
    Eigen::Index n = 0;
    for (const auto& l : layers_) n += l.num_params();
    return n;
  }

  Matrix Forward(const Matrix& x, ForwardCache* cache = nullptr) const {
    if (cache != nullptr) {
      cache->inputs.clear();
      cache->pre.clear();
    }
    Matrix a = x;
    for (const auto& layer : layers_) {
      Matrix z = layer.weights * a;
      z.colwise() += layer.bias;
      if (cache != nullptr) {
        cache->inputs.push_back(std::move(a));
        cache->pre.push_back(z);
      }
      a = Activate(z, layer.activation);
    }
    return a;
  }

  Vector Forward(const Vector& x) const {
    return Forward(Matrix(x)).col(0);
  }

  // Backpropagates dL/dy (out x B). Fills deltas[l] = dL/d pre[l] (out_l x B)
  // and returns dL/dx (in x B).
  Matrix BackwardDeltas(const ForwardCache& cache, const Matrix& upstream,
                        std::vector<Matrix>* deltas) const {
    deltas->assign(layers_.size(), Matrix());
    Matrix grad = upstream;
    for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
      grad = grad.cwiseProduct(ActivationDerivative(cache.pre[l], layers_[l].activation));
      (*deltas)[l] = grad;
      grad = layers_[l].weights.transpose() * (*deltas)[l];
    }
    return grad;
  }

  // Single-example backward: accumulates this example's parameter gradient
  // into `grad` (length num_params) and returns dL/dx.
  Vector Backward(const ForwardCache& cache, const Vector& upstream,
                  std::span<double> grad) const {
    std::vector<Matrix> deltas;
    Matrix dx = BackwardDeltas(cache, Matrix(upstream), &deltas);
    Eigen::Index offset = 0;
    for (size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      Eigen::Map<Matrix> gw(grad.data() + offset, layer.out_dim(), layer.in_dim());
      gw.noalias() += deltas[l].col(0) * cache.inputs[l].col(0).transpose();
      offset += layer.weights.size();
      Eigen::Map<Vector> gb(grad.data() + offset, layer.out_dim());
      gb += deltas[l].col(0);
      offset += layer.bias.size();
    }
    return dx.col(0);
  }

  Vector Backward(const ForwardCache& cache, const Vector& upstream, Vector& grad) const {
    return Backward(cache, upstream, std::span<double>(grad.data(), grad.size()));
  }

  Vector Parameters() const {
    Vector p(num_params());
    Eigen::Index offset = 0;
    for (const auto& layer : layers_) {
      p.segment(offset, layer.weights.size()) =
          Eigen::Map<const Vector>(layer.weights.data(), layer.weights.size());
      offset += layer.weights.size();
      p.segment(offset, layer.bias.size()) = layer.bias;
      offset += layer.bias.size();
    }
    return p;
  }

  void SetParameters(const Vector& p) {
    Eigen::Index offset = 0;
    for (auto& layer : layers_) {
      Eigen::Map<Vector>(layer.weights.data(), layer.weights.size()) =
          p.segment(offset, layer.weights.size());
      offset += layer.weights.size();
      layer.bias = p.segment(offset, layer.bias.size());
      offset += layer.bias.size();
    }
  }

  // params += scale * direction
  void AddScaled(const Vector& direction, double scale) {
    Eigen::Index offset = 0;
    for (auto& layer : layers_) {
      Eigen::Map<Vector>(layer.weights.data(), layer.weights.size()) +=
          scale * direction.segment(offset, layer.weights.size());
      offset += layer.weights.size();
      layer.bias += scale * direction.segment(offset, layer.bias.size());
      offset += layer.bias.size();
    }
  }

  void ClipParameters(double c) {
    for (auto& layer : layers_) {
      layer.weights = layer.weights.cwiseMax(-c).cwiseMin(c);
      layer.bias = layer.bias.cwiseMax(-c).cwiseMin(c);
    }
  }

  double MaxAbsParameter() const {
    double m = 0.0;
    for (const auto& layer : layers_) {
      m = std::max(m, layer.weights.cwiseAbs().maxCoeff());
      if (layer.bias.size() > 0) m = std::max(m, layer.bias.cwiseAbs().maxCoeff());
    }
    return m;
  }

  bool AllFinite() const {
    for (const auto& layer : layers_) {
      if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
    }
    return true;
  }

  nlohmann::json ToJson() const {
    nlohmann::json j;
    j["format"] = "dpsyn-mlp";
    j["version"] = 1;
    j["layers"] = nlohmann::json::array();
    for (const auto& layer : layers_) {
      nlohmann::json lj;
      lj["in"] = layer.in_dim();
      lj["out"] = layer.out_dim();
      lj["activation"] = ActivationName(layer.activation);
      lj["weights"] = std::vector<double>(layer.weights.data(),
                                          layer.weights.data() + layer.weights.size());
      lj["bias"] = std::vector<double>(layer.bias.data(),
                                       layer.bias.data() + layer.bias.size());
      j["layers"].push_back(std::move(lj));
    }
    return j;
  }

  static absl::StatusOr<Mlp> FromJson(const nlohmann::json& j) {
    if (j.value("format", "") != "dpsyn-mlp" || j.value("version", 0) != 1) {
      return absl::InvalidArgumentError("not a dpsyn-mlp v1 checkpoint");
    }
    std::vector<DenseLayer> layers;
    int prev_out = -1;
    for (const auto& lj : j.at("layers")) {
      DenseLayer layer;
      const int in = lj.at("in"), out = lj.at("out");
      if (prev_out >= 0 && in != prev_out) {
        return absl::InvalidArgumentError("ShapeMismatch: layer shapes do not chain");
      }
      prev_out = out;
      auto w = lj.at("weights").get<std::vector<double>>();
      auto b = lj.at("bias").get<std::vector<double>>();
      if (static_cast<int>(w.size()) != in * out || static_cast<int>(b.size()) != out) {
        return absl::InvalidArgumentError("ShapeMismatch: parameter count");
      }
      layer.weights = Eigen::Map<Matrix>(w.data(), out, in);
      layer.bias = Eigen::Map<Vector>(b.data(), out);
      ASSIGN_OR_RETURN(layer.activation, ParseActivation(lj.at("activation")));
      layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
  }

 private:
  static Matrix Activate(const Matrix& z, Activation a) {
    switch (a) {
      case Activation::kIdentity: return z;
      case Activation::kRelu: return z.cwiseMax(0.0);
      case Activation::kTanh: return z.array().tanh().matrix();
    }
    return z;
  }

  static Matrix ActivationDerivative(const Matrix& z, Activation a) {
    switch (a) {
      case Activation::kIdentity: return Matrix::Ones(z.rows(), z.cols());
      case Activation::kRelu: return (z.array() > 0.0).cast<double>().matrix();
      case Activation::kTanh: return (1.0 - z.array().tanh().square()).matrix();
    }
    return Matrix::Ones(z.rows(), z.cols());
  }

  std::vector<DenseLayer> layers_;
};

// ---------------------------------------------------------------------------
// Per-example gradients from one batched backward pass.

// The state of a batched backward pass over one network: layer inputs and
// deltas, from which every example's gradient is an outer product.
//
// With fold > 1 the pass covers fold * B columns and example i owns columns
// i, i + B, ..., i + (fold - 1) B; its gradient is their sum. A critic that
// scores one real and one generated row per example uses fold = 2.
struct BatchGradients {
  const Mlp* mlp = nullptr;
  ForwardCache cache;
  std::vector<Matrix> deltas;
  int fold = 1;

  Eigen::Index batch_size() const {
    return deltas.empty() ? 0 : deltas.front().cols() / fold;
  }

  // ||g_i||^2 = sum_l sum_{f,f'} (delta_f . delta_f') (a_f . a_f' + 1), which
  // for fold 1 is ||delta_i||^2 (||a_i||^2 + 1) per dense layer.
  Vector SquaredNorms() const {
    const Eigen::Index b = batch_size();
    Vector norms = Vector::Zero(b);
    for (size_t l = 0; l < deltas.size(); ++l) {
      const Matrix& d = deltas[l];
      const Matrix& a = cache.inputs[l];
      for (int f = 0; f < fold; ++f) {
        for (int g = 0; g < fold; ++g) {
          const auto df = d.middleCols(f * b, b), dg = d.middleCols(g * b, b);
          const auto af = a.middleCols(f * b, b), ag = a.middleCols(g * b, b);
          Vector dd = df.cwiseProduct(dg).colwise().sum().transpose();
          Vector aa = af.cwiseProduct(ag).colwise().sum().transpose();
          norms.array() += dd.array() * (aa.array() + 1.0);
        }
      }
    }
    return norms;
  }

  // sum_i scales_i * g_i, flattened like Mlp::Parameters.
  Vector WeightedSum(const Vector& scales) const {
    Vector expanded = scales.replicate(fold, 1);
    Vector out(mlp->num_params());
    Eigen::Index offset = 0;
    for (size_t l = 0; l < deltas.size(); ++l) {
      Matrix scaled = deltas[l] * expanded.asDiagonal();
      Matrix gw = scaled * cache.inputs[l].transpose();
      out.segment(offset, gw.size()) = Eigen::Map<const Vector>(gw.data(), gw.size());
      offset += gw.size();
      out.segment(offset, scaled.rows()) = scaled.rowwise().sum();
      offset += scaled.rows();
    }
    return out;
  }

  // Materialized per-example gradients, num_params x B.
  Matrix PerExample() const {
    const Eigen::Index b = batch_size();
    Matrix g = Matrix::Zero(mlp->num_params(), b);
    for (Eigen::Index i = 0; i < b; ++i) {
      for (int f = 0; f < fold; ++f) {
        const Eigen::Index col = f * b + i;
        Eigen::Index offset = 0;
        for (size_t l = 0; l < deltas.size(); ++l) {
          Matrix gw = deltas[l].col(col) * cache.inputs[l].col(col).transpose();
          g.col(i).segment(offset, gw.size()) += Eigen::Map<const Vector>(gw.data(), gw.size());
          offset += gw.size();
          g.col(i).segment(offset, deltas[l].rows()) += deltas[l].col(col);
          offset += deltas[l].rows();
        }
      }
    }
    return g;
  }
};

// Runs forward + backward of `mlp` on x with the loss gradient supplied by
// `upstream_fn(output) -> dL/doutput`; returns dL/dx alongside the state.
template <typename UpstreamFn>
BatchGradients BackpropBatch(const Mlp& mlp, const Matrix& x, UpstreamFn&& upstream_fn,
                             Matrix* input_grad = nullptr) {
  BatchGradients bg;
  bg.mlp = &mlp;
  Matrix y = mlp.Forward(x, &bg.cache);
  Matrix upstream = upstream_fn(y);
  Matrix dx = mlp.BackwardDeltas(bg.cache, upstream, &bg.deltas);
  if (input_grad != nullptr) *input_grad = std::move(dx);
  return bg;
}

// ---------------------------------------------------------------------------
// DP-SGD

struct DpSgdConfig {
  double clip_norm = 1.0;
  double noise_multiplier = 0.0;
  int batch_size = 64;
  double learning_rate = 0.05;
  long steps = 1000;
};

inline double ClipFactor(double norm, double clip_norm) {
  return norm > clip_norm ? clip_norm / norm : 1.0;
}

// (sum_i clip(g_i) + N(0, (noise_multiplier * C)^2 I)) / batch_size, for
// per-example gradients given as columns.
inline Vector PrivatizeGradient(const Matrix& per_example_grads,
                                const DpSgdConfig& config, Rng& rng) {
  Vector sum = Vector::Zero(per_example_grads.rows());
  for (Eigen::Index i = 0; i < per_example_grads.cols(); ++i) {
    const double norm = per_example_grads.col(i).norm();
    sum += ClipFactor(norm, config.clip_norm) * per_example_grads.col(i);
  }
  const double noise_std = config.noise_multiplier * config.clip_norm;
  if (noise_std > 0.0) {
    std::normal_distribution<double> dist(0.0, noise_std);
    for (Eigen::Index k = 0; k < sum.size(); ++k) sum[k] += dist(rng);
  }
  return sum / static_cast<double>(config.batch_size);
}

inline void DpSgdStep(Mlp& mlp, const Matrix& per_example_grads,
                      const DpSgdConfig& config, Rng& rng) {
  mlp.AddScaled(PrivatizeGradient(per_example_grads, config, rng),
                -config.learning_rate);
}

// The same privatization for one or more networks whose parameters are
// clipped jointly (an example's gradient is the concatenation over nets).
// Returns one noisy averaged gradient per network. Noise is drawn in network
// order, matching PrivatizeGradient on the concatenated gradient.
inline std::vector<Vector> PrivatizeBatched(
    const std::vector<const BatchGradients*>& nets, const DpSgdConfig& config,
    Rng& rng, Vector* per_example_norms = nullptr) {
  const Eigen::Index batch = nets.front()->batch_size();
  Vector sq = Vector::Zero(batch);
  for (const auto* bg : nets) sq += bg->SquaredNorms();
  Vector norms = sq.cwiseSqrt();
  Vector scales(batch);
  for (Eigen::Index i = 0; i < batch; ++i) scales[i] = ClipFactor(norms[i], config.clip_norm);
  if (per_example_norms != nullptr) *per_example_norms = norms;

  const double noise_std = config.noise_multiplier * config.clip_norm;
  Eigen::Index total = 0;
  for (const auto* bg : nets) total += bg->mlp->num_params();
  // One distribution object for the whole draw: std::normal_distribution
  // caches a spare variate, so splitting it would change the stream.
  Vector noise = Vector::Zero(total);
  if (noise_std > 0.0) {
    std::normal_distribution<double> dist(0.0, noise_std);
    for (Eigen::Index k = 0; k < total; ++k) noise[k] = dist(rng);
  }
  std::vector<Vector> grads;
  Eigen::Index offset = 0;
  for (const auto* bg : nets) {
    Vector g = bg->WeightedSum(scales) + noise.segment(offset, bg->mlp->num_params());
    offset += bg->mlp->num_params();
    grads.push_back(g / static_cast<double>(config.batch_size));
  }
  return grads;
}

// Fixed-size batch of distinct row indices.
inline std::vector<int> SampleBatch(int n, int batch_size, Rng& rng) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  const int b = std::min(batch_size, n);
  for (int i = 0; i < b; ++i) {
    std::uniform_int_distribution<int> dist(i, n - 1);
    std::swap(idx[i], idx[dist(rng)]);
  }
  idx.resize(b);
  return idx;
}

// Each row independently with probability q (the sampling the RDP
// accountant assumes).
inline std::vector<int> PoissonBatch(int n, double q, Rng& rng) {
  std::vector<int> rows;
  if (q >= 1.0) {
    rows.resize(n);
    for (int i = 0; i < n; ++i) rows[i] = i;
    return rows;
  }
  std::bernoulli_distribution keep(q);
  for (int i = 0; i < n; ++i) {
    if (keep(rng)) rows.push_back(i);
  }
  return rows;
}

// Privacy bookkeeping of one DP-SGD run.
struct DpSgdLedger {
  double sample_rate = 1.0;
  double noise_multiplier = 0.0;
  long steps = 0;
  double delta = 0.0;
  double target_epsilon = kInfinity;
  double epsilon = kInfinity;  // accountant value for the run as executed
};

// Calibrates the noise multiplier for `steps` updates at rate batch/n and
// reports the accountant's epsilon for that multiplier.
inline absl::StatusOr<DpSgdLedger> PlanDpSgd(int n, const DpSgdConfig& config,
                                             double epsilon, double delta) {
  if (n <= 0) return absl::InvalidArgumentError("EmptyDataset: no training rows");
  DpSgdLedger ledger;
  ledger.sample_rate = std::min(1.0, static_cast<double>(config.batch_size) / n);
  ledger.steps = config.steps;
  ledger.delta = delta;
  ledger.target_epsilon = epsilon;
  if (!std::isfinite(epsilon)) return ledger;
  ASSIGN_OR_RETURN(ledger.noise_multiplier,
                   CalibrateNoiseMultiplier(ledger.sample_rate, config.steps, epsilon, delta));
  ASSIGN_OR_RETURN(ledger.epsilon, DpSgdEpsilon(ledger.sample_rate, ledger.noise_multiplier,
                                                config.steps, delta));
  return ledger;
}

// Columns (x_i ++ onehot(y_i)) for the given rows.
inline Matrix ConditionedInputs(const Matrix& features, const std::vector<int>& labels,
                                const std::vector<int>& rows, int num_classes) {
  const Eigen::Index d = features.cols();
  Matrix out = Matrix::Zero(d + num_classes, static_cast<Eigen::Index>(rows.size()));
  for (size_t k = 0; k < rows.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)).head(d) = features.row(rows[k]).transpose();
    out(d + labels[rows[k]], static_cast<Eigen::Index>(k)) = 1.0;
  }
  return out;
}

// Columns (z_i ++ onehot(y_i)).
inline Matrix ConditionedLatents(const Matrix& z, const std::vector<int>& labels,
                                 int num_classes) {
  Matrix out = Matrix::Zero(z.rows() + num_classes, z.cols());
  out.topRows(z.rows()) = z;
  for (Eigen::Index i = 0; i < z.cols(); ++i) out(z.rows() + labels[i], i) = 1.0;
  return out;
}

}  // namespace dpsyn

#endif  // DPSYN_NN_H_
