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

// Experiment orchestration over the (model x epsilon x split seed x
// generation seed) grid. Every cell draws from its own keyed RNG stream, so
// results do not depend on thread count or execution order.

#ifndef DPSYN_HARNESS_H_
#define DPSYN_HARNESS_H_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "absl/strings/str_cat.h"
#include "dpsyn/attack_mia.h"
#include "dpsyn/common.h"
#include "dpsyn/dataset.h"
#include "dpsyn/eval_bio.h"
#include "dpsyn/eval_statistical.h"
#include "dpsyn/eval_utility.h"
#include "dpsyn/gan.h"
#include "dpsyn/pgm.h"
#include "dpsyn/privacy.h"
#include "dpsyn/privsyn.h"
#include "dpsyn/rng.h"
#include "dpsyn/rongauss.h"
#include "dpsyn/vae.h"
#include "json.hpp"

namespace dpsyn {

inline const std::vector<std::string>& KnownModels() {
  static const std::vector<std::string> kModels = {"rongauss", "vae", "gan", "pgm", "privsyn"};
  return kModels;
}

inline std::vector<double> DefaultEpsilons() { return {5, 10, 20, 50, 100, kInfinity}; }

// Class sizes of the leukemia cohort, rescaled to `total` samples.
inline std::vector<int> CohortClassCounts(int total) {
  return ApportionCounts({508, 12, 14, 13, 634}, total);
}

// Benchmark used when no CSV is given: 10 DE genes (one per class and
// direction), three 12-gene modules each doubled in one class, and null genes.
inline PlantedSpec DefaultPlantedSpec(int n = 1200, int d = 50) {
  PlantedSpec spec;
  spec.n_per_class = CohortClassCounts(n);
  spec.d = d;
  for (int k = 0; k < 10; ++k) spec.de_genes.push_back({k, k % 5, 5.0, k < 5});
  const int module_classes[3] = {0, 2, 4};
  for (int m = 0; m < 3; ++m) {
    ModulePlant plant;
    for (int g = 0; g < 12; ++g) plant.genes.push_back(10 + 12 * m + g);
    plant.rho = 0.9;
    spec.modules.push_back(plant);
    spec.activations.push_back({m, module_classes[m], 2.0});
  }
  return spec;
}

struct EvalOptions {
  int knn_k = 10;
  std::vector<int> overlap_bins = DefaultOverlapBins();
  std::vector<double> r_mins = {0.0, 0.7};
  double de_alpha = 0.05;
  int module_min_size = 10;
  bool mia = true;
};

struct ExperimentConfig {
  // Data: a CSV path, or the planted benchmark when empty.
  std::string csv_path;
  std::string label_col = "label";
  PlantedSpec planted = DefaultPlantedSpec();
  uint64_t planted_seed = 0;

  std::vector<std::string> models = KnownModels();
  std::vector<double> epsilons = DefaultEpsilons();
  double delta = kDefaultDelta;
  std::vector<uint64_t> split_seeds = {0, 1};
  std::vector<uint64_t> gen_seeds = {0, 1};
  uint64_t master_seed = 0;
  double test_fraction = 0.2;
  int num_synthetic = 0;  // 0: as many rows as the training split

  CvaeConfig vae;
  CwganConfig gan;
  int rongauss_dim = 0;  // 0: DefaultProjectionDim(d)
  GumOptions privsyn;
  EvalOptions eval;

  std::string output_dir = "out";
};

// ---------------------------------------------------------------------------
// JSON helpers. Infinite values are written as the string "inf".

inline nlohmann::json NumberJson(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

inline absl::StatusOr<double> NumberFromJson(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "Infinity") return kInfinity;
  }
  return absl::InvalidArgumentError(absl::StrCat("expected a number or \"inf\", got ", j.dump()));
}

namespace internal {

inline nlohmann::json SgdJson(const DpSgdConfig& c) {
  return {{"clip_norm", c.clip_norm},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"steps", c.steps}};
}

inline absl::Status SgdFromJson(const nlohmann::json& j, DpSgdConfig* c) {
  if (!j.is_object()) return absl::InvalidArgumentError("sgd block must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "clip_norm") {
      c->clip_norm = value.get<double>();
    } else if (key == "batch_size") {
      c->batch_size = value.get<int>();
    } else if (key == "learning_rate") {
      c->learning_rate = value.get<double>();
    } else if (key == "steps") {
      c->steps = value.get<long>();
    } else {
      return absl::InvalidArgumentError(absl::StrCat("unknown sgd key '", key, "'"));
    }
  }
  if (!(c->clip_norm > 0.0) || c->batch_size < 1 || !(c->learning_rate > 0.0) || c->steps < 1) {
    return absl::InvalidArgumentError("sgd values must be positive");
  }
  return absl::OkStatus();
}

inline nlohmann::json PlantedJson(const PlantedSpec& s) {
  nlohmann::json de = nlohmann::json::array(), mods = nlohmann::json::array(),
                 acts = nlohmann::json::array();
  for (const auto& g : s.de_genes) {
    de.push_back({{"gene", g.gene}, {"class", g.class_index}, {"shift", g.shift}, {"up", g.up}});
  }
  for (const auto& m : s.modules) mods.push_back({{"genes", m.genes}, {"rho", m.rho}});
  for (const auto& a : s.activations) {
    acts.push_back({{"module", a.module}, {"class", a.class_index}, {"fold", a.fold}});
  }
  return {{"n_per_class", s.n_per_class}, {"d", s.d},
          {"de_genes", de},               {"modules", mods},
          {"activations", acts},          {"noise_scale", s.noise_scale},
          {"base_mean", s.base_mean}};
}

inline absl::StatusOr<PlantedSpec> PlantedFromJson(const nlohmann::json& j) {
  PlantedSpec s;
  if (j.contains("n")) {
    s = DefaultPlantedSpec(j.at("n").get<int>(), j.value("d", 50));
  } else if (j.contains("d")) {
    s = DefaultPlantedSpec(1200, j.at("d").get<int>());
  }
  if (j.contains("n_per_class")) s.n_per_class = j.at("n_per_class").get<std::vector<int>>();
  if (j.contains("d")) s.d = j.at("d").get<int>();
  if (j.contains("de_genes")) {
    s.de_genes.clear();
    for (const auto& g : j.at("de_genes")) {
      s.de_genes.push_back({g.at("gene").get<int>(), g.at("class").get<int>(),
                            g.at("shift").get<double>(), g.value("up", true)});
    }
  }
  if (j.contains("modules")) {
    s.modules.clear();
    for (const auto& m : j.at("modules")) {
      s.modules.push_back({m.at("genes").get<std::vector<int>>(), m.value("rho", 0.9)});
    }
  }
  if (j.contains("activations")) {
    s.activations.clear();
    for (const auto& a : j.at("activations")) {
      s.activations.push_back(
          {a.at("module").get<int>(), a.at("class").get<int>(), a.value("fold", 2.0)});
    }
  }
  s.noise_scale = j.value("noise_scale", s.noise_scale);
  s.base_mean = j.value("base_mean", s.base_mean);
  return s;
}

template <typename T>
absl::Status CheckDistinct(const std::vector<T>& v, const std::string& what) {
  if (std::set<T>(v.begin(), v.end()).size() != v.size()) {
    return absl::InvalidArgumentError(absl::StrCat(what, " must be distinct"));
  }
  if (v.empty()) return absl::InvalidArgumentError(absl::StrCat(what, " must be non-empty"));
  return absl::OkStatus();
}

}  // namespace internal

inline nlohmann::json ToJson(const ExperimentConfig& c) {
  nlohmann::json eps = nlohmann::json::array();
  for (double e : c.epsilons) eps.push_back(NumberJson(e));
  nlohmann::json data;
  if (c.csv_path.empty()) {
    data = {{"planted", internal::PlantedJson(c.planted)}, {"planted_seed", c.planted_seed}};
  } else {
    data = {{"csv", c.csv_path}, {"label_col", c.label_col}};
  }
  return {
      {"data", data},
      {"models", c.models},
      {"epsilons", eps},
      {"delta", c.delta},
      {"split_seeds", c.split_seeds},
      {"gen_seeds", c.gen_seeds},
      {"master_seed", c.master_seed},
      {"test_fraction", c.test_fraction},
      {"num_synthetic", c.num_synthetic},
      {"vae",
       {{"hidden", c.vae.hidden},
        {"latent_dim", c.vae.latent_dim},
        {"recon_weight", c.vae.recon_weight},
        {"sgd", internal::SgdJson(c.vae.sgd)}}},
      {"gan",
       {{"hidden", c.gan.hidden},
        {"latent_dim", c.gan.latent_dim},
        {"weight_clip", c.gan.weight_clip},
        {"n_critic", c.gan.n_critic},
        {"generator_learning_rate", c.gan.generator_learning_rate},
        {"critic_sgd", internal::SgdJson(c.gan.critic_sgd)}}},
      {"rongauss", {{"projection_dim", c.rongauss_dim}}},
      {"privsyn", {{"max_sweeps", c.privsyn.max_sweeps}, {"tol", c.privsyn.tol}}},
      {"eval",
       {{"knn_k", c.eval.knn_k},
        {"overlap_bins", c.eval.overlap_bins},
        {"r_mins", c.eval.r_mins},
        {"de_alpha", c.eval.de_alpha},
        {"module_min_size", c.eval.module_min_size},
        {"mia", c.eval.mia}}},
      {"output_dir", c.output_dir},
  };
}

// Parses and validates a config. Absent keys keep their defaults; unknown
// top-level keys are rejected so typos do not silently fall back.
inline absl::StatusOr<ExperimentConfig> ConfigFromJson(const nlohmann::json& j) {
  ExperimentConfig c;
  static const std::set<std::string> kKeys = {
      "data",       "models",        "epsilons",      "delta",    "split_seeds",
      "gen_seeds",  "master_seed",   "test_fraction", "num_synthetic", "vae",
      "gan",        "rongauss",      "privsyn",       "eval",     "output_dir"};
  if (!j.is_object()) return absl::InvalidArgumentError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.count(key)) return absl::InvalidArgumentError(absl::StrCat("unknown key '", key, "'"));
  }
  try {
    if (j.contains("data")) {
      const auto& d = j.at("data");
      if (d.contains("csv")) {
        c.csv_path = d.at("csv").get<std::string>();
        c.label_col = d.value("label_col", c.label_col);
      } else if (d.contains("planted")) {
        ASSIGN_OR_RETURN(c.planted, internal::PlantedFromJson(d.at("planted")));
      }
      c.planted_seed = d.value("planted_seed", c.planted_seed);
    }
    if (j.contains("models")) c.models = j.at("models").get<std::vector<std::string>>();
    if (j.contains("epsilons")) {
      c.epsilons.clear();
      for (const auto& e : j.at("epsilons")) {
        ASSIGN_OR_RETURN(double v, NumberFromJson(e));
        c.epsilons.push_back(v);
      }
    }
    c.delta = j.value("delta", c.delta);
    if (j.contains("split_seeds")) c.split_seeds = j.at("split_seeds").get<std::vector<uint64_t>>();
    if (j.contains("gen_seeds")) c.gen_seeds = j.at("gen_seeds").get<std::vector<uint64_t>>();
    c.master_seed = j.value("master_seed", c.master_seed);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    c.num_synthetic = j.value("num_synthetic", c.num_synthetic);
    if (j.contains("vae")) {
      const auto& v = j.at("vae");
      c.vae.hidden = v.value("hidden", c.vae.hidden);
      c.vae.latent_dim = v.value("latent_dim", c.vae.latent_dim);
      c.vae.recon_weight = v.value("recon_weight", c.vae.recon_weight);
      if (v.contains("sgd")) RETURN_IF_ERROR(internal::SgdFromJson(v.at("sgd"), &c.vae.sgd));
    }
    if (j.contains("gan")) {
      const auto& g = j.at("gan");
      c.gan.hidden = g.value("hidden", c.gan.hidden);
      c.gan.latent_dim = g.value("latent_dim", c.gan.latent_dim);
      c.gan.weight_clip = g.value("weight_clip", c.gan.weight_clip);
      c.gan.n_critic = g.value("n_critic", c.gan.n_critic);
      c.gan.generator_learning_rate =
          g.value("generator_learning_rate", c.gan.generator_learning_rate);
      if (g.contains("critic_sgd")) {
        RETURN_IF_ERROR(internal::SgdFromJson(g.at("critic_sgd"), &c.gan.critic_sgd));
      }
    }
    if (j.contains("rongauss")) {
      c.rongauss_dim = j.at("rongauss").value("projection_dim", c.rongauss_dim);
    }
    if (j.contains("privsyn")) {
      c.privsyn.max_sweeps = j.at("privsyn").value("max_sweeps", c.privsyn.max_sweeps);
      c.privsyn.tol = j.at("privsyn").value("tol", c.privsyn.tol);
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      c.eval.knn_k = e.value("knn_k", c.eval.knn_k);
      c.eval.overlap_bins = e.value("overlap_bins", c.eval.overlap_bins);
      c.eval.r_mins = e.value("r_mins", c.eval.r_mins);
      c.eval.de_alpha = e.value("de_alpha", c.eval.de_alpha);
      c.eval.module_min_size = e.value("module_min_size", c.eval.module_min_size);
      c.eval.mia = e.value("mia", c.eval.mia);
    }
    c.output_dir = j.value("output_dir", c.output_dir);
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("malformed config: ", e.what()));
  }

  for (const auto& m : c.models) {
    if (std::find(KnownModels().begin(), KnownModels().end(), m) == KnownModels().end()) {
      return absl::InvalidArgumentError(absl::StrCat("unknown model '", m, "'"));
    }
  }
  RETURN_IF_ERROR(internal::CheckDistinct(c.models, "models"));
  RETURN_IF_ERROR(internal::CheckDistinct(c.epsilons, "epsilons"));
  RETURN_IF_ERROR(internal::CheckDistinct(c.split_seeds, "split_seeds"));
  RETURN_IF_ERROR(internal::CheckDistinct(c.gen_seeds, "gen_seeds"));
  for (double e : c.epsilons) {
    if (!(e > 0.0)) return absl::InvalidArgumentError("epsilons must be positive");
  }
  if (!(c.delta > 0.0 && c.delta < 1.0)) return absl::InvalidArgumentError("delta must lie in (0, 1)");
  if (!(c.test_fraction > 0.0 && c.test_fraction < 0.5)) {
    return absl::InvalidArgumentError("test_fraction must lie in (0, 0.5)");
  }
  if (c.eval.knn_k < 1) return absl::InvalidArgumentError("knn_k must be >= 1");
  return c;
}

// ---------------------------------------------------------------------------
// Per-split state shared by every cell of that split.

struct SplitContext {
  Split split;
  ContinuousTransform transform;
  Binning binning;
  LabeledTable train_std;
  LabeledTable train_binned;
  DeResult real_de;
  std::map<double, CoexNetwork> real_networks;
  std::map<double, absl::StatusOr<ModuleSet>> real_modules;
};

// Builds the context from an existing train/test pair.
inline absl::StatusOr<std::shared_ptr<const SplitContext>> ContextFromSplit(
    Split split, const EvalOptions& eval) {
  if (split.train.num_rows() == 0 || split.test.num_rows() == 0) {
    return absl::InvalidArgumentError("EmptySet: train and test must be non-empty");
  }
  if (split.train.num_features() != split.test.num_features()) {
    return absl::InvalidArgumentError("ShapeMismatch: train and test feature counts differ");
  }
  auto ctx = std::make_shared<SplitContext>();
  ctx->split = std::move(split);
  ctx->transform = ContinuousTransform::Fit(ctx->split.train);
  ASSIGN_OR_RETURN(ctx->binning, Binning::Fit(ctx->split.train));
  ctx->train_std = ctx->transform.Apply(ctx->split.train);
  ctx->train_binned = ctx->binning.Discretize(ctx->split.train);
  ctx->real_de = DeGenes(ctx->split.train, eval.de_alpha);
  for (double r : eval.r_mins) {
    ctx->real_networks[r] = BuildNetwork(ctx->split.train.features, r, 0.05);
    ctx->real_modules.emplace(r, DetectModules(ctx->real_networks[r], eval.module_min_size));
  }
  return std::shared_ptr<const SplitContext>(std::move(ctx));
}

inline absl::StatusOr<std::shared_ptr<const SplitContext>> PrepareSplit(
    const LabeledTable& data, double test_fraction, uint64_t split_seed,
    const EvalOptions& eval) {
  ASSIGN_OR_RETURN(Split split, SplitTable(data, test_fraction, split_seed));
  return ContextFromSplit(std::move(split), eval);
}

// ---------------------------------------------------------------------------
// One cell: fit, sample, account.

struct Synthesis {
  LabeledTable synthetic;
  double epsilon_consumed = 0.0;
  Warnings warnings;
};

inline std::string EpsilonKey(double eps) { return std::isinf(eps) ? "inf" : FormatDouble(eps); }

// Epsilon spent by independent Gaussian count measurements (sensitivity 1).
inline double MeasurementEpsilon(const MarginalSet& set,
                                 const std::vector<MeasurementBudget>& budgets) {
  double total = 0.0;
  for (size_t i = 0; i < set.tables.size(); ++i) {
    total += GaussianEpsilon(1.0, set.tables[i].noise_sigma, budgets[i].delta);
  }
  return total;
}

inline absl::StatusOr<Synthesis> Synthesize(const std::string& model, const SplitContext& ctx,
                                            const ExperimentConfig& config, double epsilon,
                                            Rng& rng) {
  const PrivacySpec privacy{epsilon, config.delta};
  const LabeledTable& train = ctx.split.train;
  const int n_out = config.num_synthetic > 0 ? config.num_synthetic : train.num_rows();
  const std::vector<double> freq = train.ClassFrequencies();
  const Vector class_probs =
      Eigen::Map<const Vector>(freq.data(), static_cast<Eigen::Index>(freq.size()));
  Synthesis out;

  if (model == "vae") {
    ASSIGN_OR_RETURN(CvaeTrainResult fit, TrainCvae(ctx.train_std, config.vae, privacy, rng));
    out.synthetic = ctx.transform.Invert(SampleCvae(fit.model, n_out, class_probs, train, rng));
    out.epsilon_consumed = fit.ledger.epsilon;
  } else if (model == "gan") {
    ASSIGN_OR_RETURN(CwganTrainResult fit, TrainCwgan(ctx.train_std, config.gan, privacy, rng));
    out.synthetic = ctx.transform.Invert(SampleCwgan(fit.model, n_out, class_probs, train, rng));
    out.epsilon_consumed = fit.ledger.epsilon;
  } else if (model == "rongauss") {
    const int p = config.rongauss_dim > 0 ? config.rongauss_dim
                                          : DefaultProjectionDim(train.num_features());
    ASSIGN_OR_RETURN(RonGaussModel fit, FitRonGauss(ctx.train_std, p, privacy, rng, &out.warnings));
    out.synthetic = ctx.transform.Invert(SampleRonGauss(fit, n_out, train, rng));
    // Classes are disjoint, so the spend is the largest per-class spend.
    const std::vector<int> counts = train.ClassCounts();
    for (int c = 0; c < fit.num_classes(); ++c) {
      const double s = 2.0 / counts[c];
      out.epsilon_consumed = std::max(
          out.epsilon_consumed, GaussianEpsilon(s, fit.mean_sigma[c], config.delta / 2) +
                                    GaussianEpsilon(s, fit.cov_sigma[c], config.delta / 2));
    }
  } else if (model == "pgm") {
    const int d = train.num_features();
    std::vector<MeasurementBudget> budgets(
        2 * d + 1, {epsilon / (2 * d + 1), config.delta / (2 * d + 1)});
    ASSIGN_OR_RETURN(MarginalSet set, MeasureNoisy(ctx.train_binned, DefaultCliques(d), budgets,
                                                   rng, &out.warnings));
    out.epsilon_consumed = MeasurementEpsilon(set, budgets);
    StarModel star = StarFromMarginals(set, &out.warnings);
    out.synthetic = ctx.binning.Undiscretize(SampleStarModel(star, n_out, ctx.train_binned, rng));
  } else if (model == "privsyn") {
    const int d = train.num_features();
    const std::vector<MeasurementBudget> budgets = PrivSynBudgets(d, privacy);
    ASSIGN_OR_RETURN(MarginalSet set, MeasureNoisy(ctx.train_binned, DefaultCliques(d), budgets,
                                                   rng, &out.warnings));
    out.epsilon_consumed = MeasurementEpsilon(set, budgets);
    out.synthetic = ctx.binning.Undiscretize(
        GumSynthesize(set, n_out, config.privsyn, ctx.train_binned, rng));
  } else {
    return absl::InvalidArgumentError(absl::StrCat("unknown model '", model, "'"));
  }
  if (!out.synthetic.features.allFinite()) {
    return absl::InternalError("NonFiniteSample: synthetic table has non-finite entries");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

struct MetricSet {
  std::map<std::string, double> values;
  std::map<std::string, std::string> skipped;  // metric -> reason
  Warnings warnings;
};

// Short form for metric names, e.g. 0.7 rather than its 17-digit expansion.
inline std::string RKey(double r) { return absl::StrCat(r); }

// Scores `synth` against one split. Held-out rows are the reference for
// utility and fidelity; the biology metrics compare with the training rows
// the generator actually saw.
inline MetricSet Evaluate(const LabeledTable& synth, const SplitContext& ctx,
                          const EvalOptions& opts) {
  MetricSet m;
  const LabeledTable& train = ctx.split.train;
  const LabeledTable& test = ctx.split.test;

  UtilityResult util = TrainEval(synth, test);
  m.values["accuracy"] = util.accuracy;
  m.warnings.insert(m.warnings.end(), util.warnings.begin(), util.warnings.end());

  OverlapResult overlap = OverlapScore(test.features, synth.features, opts.overlap_bins);
  for (const auto& [bins, v] : overlap.per_bins) m.values[absl::StrCat("overlap_", bins)] = v;
  m.values["overlap_mean"] = overlap.mean;

  for (const auto& [name, ref] :
       {std::pair<std::string, const LabeledTable*>{"knn_test", &test}, {"knn_train", &train}}) {
    const int k = std::min(opts.knn_k, ref->num_rows());
    auto knn = KnnDistanceScore(synth.features, ref->features, k);
    if (knn.ok()) {
      m.values[name] = *knn;
      if (k < opts.knn_k) m.warnings.push_back(absl::StrCat(name, ": k reduced to ", k));
    } else {
      m.skipped[name] = std::string(knn.status().message());
    }
  }

  DeResult synth_de = DeGenes(synth, opts.de_alpha);
  auto rates = DeTprFpr(ctx.real_de.pairs, synth_de.pairs, train.num_features());
  if (rates.ok()) {
    m.values["de_tpr"] = rates->tpr;
    m.values["de_fpr"] = rates->fpr;
  } else {
    m.skipped["de_tpr"] = m.skipped["de_fpr"] = std::string(rates.status().message());
  }

  for (double r : opts.r_mins) {
    const std::string key = RKey(r);
    CoexNetwork net = BuildNetwork(synth.features, r, 0.05);
    auto cmp = CompareNetworks(ctx.real_networks.at(r), net);
    if (cmp.ok()) {
      m.values["coexpr_correct@" + key] = cmp->correct;
      m.values["coexpr_spurious@" + key] = cmp->spurious;
      m.values["coexpr_real@" + key] = cmp->real_edges;
    } else {
      m.skipped["coexpr_correct@" + key] = std::string(cmp.status().message());
    }
    const auto& modules = ctx.real_modules.at(r);
    const std::string gfc_key = "gfc_adjacency@" + key;
    if (!modules.ok()) {
      m.skipped[gfc_key] = std::string(modules.status().message());
    } else if (modules->modules.empty()) {
      m.skipped[gfc_key] = "no real module reaches the minimum size";
    } else {
      GfcResult gfc = GroupFoldChanges(modules->modules, train, synth);
      m.values[gfc_key] = gfc.same_class_adjacency;
      m.values["modules@" + key] = static_cast<double>(modules->modules.size());
    }
  }

  if (opts.mia) {
    auto mia = BlackboxAttack(synth, train, test);
    if (mia.ok()) {
      m.values["mia_auc"] = mia->auc;
    } else {
      m.skipped["mia_auc"] = std::string(mia.status().message());
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Grid

struct CellResult {
  std::string model;
  double epsilon = kInfinity;
  uint64_t split_seed = 0;
  uint64_t gen_seed = 0;
  bool failed = false;
  std::string error;
  double epsilon_consumed = 0.0;
  MetricSet metrics;
  Warnings warnings;
  double wall_seconds = 0.0;
};

struct Aggregate {
  std::string model;
  double epsilon = kInfinity;
  uint64_t split_seed = 0;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
  int count = 0;
};

struct GridReport {
  ExperimentConfig config;
  std::vector<CellResult> cells;       // model, epsilon, split, gen order
  std::vector<CellResult> references;  // per split: the real train split as "synthetic"
  std::vector<Aggregate> aggregates;
  Warnings warnings;
  double wall_seconds = 0.0;
  int failed_cells() const {
    return static_cast<int>(std::count_if(cells.begin(), cells.end(),
                                          [](const CellResult& c) { return c.failed; }));
  }
};

// Relative slack for recomputing a calibrated epsilon in floating point.
inline constexpr double kBudgetSlack = 1e-9;

inline bool WithinBudget(double consumed, double configured) {
  if (std::isinf(configured)) return true;
  return consumed <= configured * (1.0 + kBudgetSlack);
}

inline Rng CellRng(const ExperimentConfig& config, const std::string& model, double epsilon,
                   uint64_t split_seed, uint64_t gen_seed) {
  return RngStream(config.master_seed, absl::StrCat("cell/", model, "/", EpsilonKey(epsilon),
                                                    "/", split_seed, "/", gen_seed));
}

inline CellResult RunCell(const std::string& model, double epsilon, uint64_t gen_seed,
                          const SplitContext& ctx, const ExperimentConfig& config) {
  CellResult cell;
  cell.model = model;
  cell.epsilon = epsilon;
  cell.split_seed = ctx.split.split_seed;
  cell.gen_seed = gen_seed;
  const auto start = std::chrono::steady_clock::now();
  Rng rng = CellRng(config, model, epsilon, cell.split_seed, gen_seed);
  auto synth = Synthesize(model, ctx, config, epsilon, rng);
  if (!synth.ok()) {
    cell.failed = true;
    cell.error = synth.status().ToString();
  } else {
    cell.epsilon_consumed = synth->epsilon_consumed;
    cell.warnings = synth->warnings;
    if (!WithinBudget(cell.epsilon_consumed, epsilon)) {
      cell.failed = true;
      cell.error = absl::StrCat("BudgetExceeded: consumed ", cell.epsilon_consumed,
                                " > configured ", epsilon);
    } else {
      cell.metrics = Evaluate(synth->synthetic, ctx, config.eval);
    }
  }
  cell.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return cell;
}

inline std::vector<Aggregate> AggregateCells(const std::vector<CellResult>& cells) {
  std::map<std::tuple<std::string, double, uint64_t, std::string>, std::vector<double>> groups;
  std::vector<std::tuple<std::string, double, uint64_t, std::string>> order;
  for (const auto& c : cells) {
    if (c.failed) continue;
    for (const auto& [metric, v] : c.metrics.values) {
      auto key = std::make_tuple(c.model, c.epsilon, c.split_seed, metric);
      if (!groups.count(key)) order.push_back(key);
      groups[key].push_back(v);
    }
  }
  std::vector<Aggregate> out;
  for (const auto& key : order) {
    const auto& v = groups[key];
    Aggregate a;
    std::tie(a.model, a.epsilon, a.split_seed, a.metric) = key;
    a.count = static_cast<int>(v.size());
    for (double x : v) a.mean += x;
    a.mean /= a.count;
    if (a.count > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - a.mean) * (x - a.mean);
      a.std = std::sqrt(ss / (a.count - 1));
    }
    out.push_back(a);
  }
  return out;
}

inline absl::StatusOr<LabeledTable> LoadExperimentData(const ExperimentConfig& config) {
  if (!config.csv_path.empty()) return LoadCsv(config.csv_path, config.label_col);
  ASSIGN_OR_RETURN(auto planted, GeneratePlanted(config.planted, config.planted_seed));
  return std::move(planted.first);
}

// Runs every cell on a pool of `threads` workers. Errors in data loading or
// splitting are returned; model failures are recorded in their cell.
inline absl::StatusOr<GridReport> RunGrid(const ExperimentConfig& config, int threads = 1,
                                          bool log_progress = false) {
  const auto start = std::chrono::steady_clock::now();
  ASSIGN_OR_RETURN(LabeledTable data, LoadExperimentData(config));
  GridReport report;
  report.config = config;
  std::vector<std::shared_ptr<const SplitContext>> splits;
  for (uint64_t s : config.split_seeds) {
    ASSIGN_OR_RETURN(auto ctx, PrepareSplit(data, config.test_fraction, s, config.eval));
    report.warnings.insert(report.warnings.end(), ctx->split.warnings.begin(),
                           ctx->split.warnings.end());
    splits.push_back(std::move(ctx));
  }

  struct Task {
    std::string model;
    double epsilon;
    size_t split_index;
    uint64_t gen_seed;
  };
  std::vector<Task> tasks;
  for (const auto& model : config.models) {
    for (double eps : config.epsilons) {
      for (size_t s = 0; s < splits.size(); ++s) {
        for (uint64_t g : config.gen_seeds) tasks.push_back({model, eps, s, g});
      }
    }
  }
  report.cells.resize(tasks.size());
  report.references.resize(splits.size());
  const size_t total = tasks.size() + splits.size();
  std::atomic<size_t> next{0};
  std::atomic<size_t> done{0};
  auto worker = [&]() {
    for (size_t i = next++; i < total; i = next++) {
      if (i < splits.size()) {
        // Reference row: the real training split scored as if synthetic.
        const auto& ctx = *splits[i];
        CellResult ref;
        ref.model = "reference";
        ref.split_seed = ctx.split.split_seed;
        ref.epsilon_consumed = kInfinity;
        const auto t0 = std::chrono::steady_clock::now();
        ref.metrics = Evaluate(ctx.split.train, ctx, config.eval);
        ref.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.references[i] = std::move(ref);
      } else {
        const Task& t = tasks[i - splits.size()];
        report.cells[i - splits.size()] =
            RunCell(t.model, t.epsilon, t.gen_seed, *splits[t.split_index], config);
      }
      const size_t d = ++done;
      if (log_progress) {
        std::ostringstream line;
        line << "[" << d << "/" << total << "] ";
        if (i >= splits.size()) {
          const CellResult& c = report.cells[i - splits.size()];
          line << c.model << " eps=" << EpsilonKey(c.epsilon) << " split=" << c.split_seed
               << " gen=" << c.gen_seed << (c.failed ? " FAILED: " + c.error : "");
        } else {
          line << "reference split=" << report.references[i].split_seed;
        }
        line << '\n';
        std::cerr << line.str();
      }
    }
  };
  const int n_threads = std::max(1, threads);
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  report.aggregates = AggregateCells(report.cells);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Report files. Wall-clock times go to timings.json only, so report.json
// and report.csv are byte-identical across reruns.

inline nlohmann::json CellJson(const CellResult& c) {
  nlohmann::json metrics = nlohmann::json::object(), skipped = nlohmann::json::object();
  for (const auto& [k, v] : c.metrics.values) metrics[k] = NumberJson(v);
  for (const auto& [k, v] : c.metrics.skipped) skipped[k] = v;
  Warnings warnings = c.warnings;
  warnings.insert(warnings.end(), c.metrics.warnings.begin(), c.metrics.warnings.end());
  nlohmann::json j = {{"model", c.model},
                      {"epsilon", NumberJson(c.epsilon)},
                      {"split_seed", c.split_seed},
                      {"epsilon_consumed", NumberJson(c.epsilon_consumed)},
                      {"metrics", metrics},
                      {"skipped", skipped},
                      {"warnings", warnings}};
  if (c.model != "reference") j["gen_seed"] = c.gen_seed;
  if (c.failed) j["error"] = c.error;
  j["status"] = c.failed ? "failed" : "ok";
  return j;
}

inline nlohmann::json ReportJson(const GridReport& r) {
  nlohmann::json cells = nlohmann::json::array(), refs = nlohmann::json::array(),
                 aggs = nlohmann::json::array();
  for (const auto& c : r.cells) cells.push_back(CellJson(c));
  for (const auto& c : r.references) refs.push_back(CellJson(c));
  for (const auto& a : r.aggregates) {
    aggs.push_back({{"model", a.model},
                    {"epsilon", NumberJson(a.epsilon)},
                    {"split_seed", a.split_seed},
                    {"metric", a.metric},
                    {"mean", NumberJson(a.mean)},
                    {"std", NumberJson(a.std)},
                    {"count", a.count}});
  }
  return {{"format", "dpsyn-report"}, {"version", 1},     {"config", ToJson(r.config)},
          {"warnings", r.warnings},   {"cells", cells},   {"references", refs},
          {"aggregates", aggs},       {"failed_cells", r.failed_cells()}};
}

inline std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

// One row per cell per metric, then the mean and std rows per
// (model, epsilon, split seed).
inline std::string ReportCsv(const GridReport& r) {
  std::ostringstream out;
  out << "model,epsilon,split_seed,gen_seed,metric,value,status\n";
  auto emit_cell = [&](const CellResult& c, const std::string& gen) {
    const std::string prefix = absl::StrCat(c.model, ",", EpsilonKey(c.epsilon), ",",
                                            c.split_seed, ",", gen, ",");
    if (c.failed) {
      out << prefix << "all,," << CsvField("failed: " + c.error) << '\n';
      return;
    }
    out << prefix << "epsilon_consumed," << EpsilonKey(c.epsilon_consumed) << ",ok\n";
    for (const auto& [k, v] : c.metrics.values) out << prefix << k << ',' << FormatDouble(v) << ",ok\n";
    for (const auto& [k, v] : c.metrics.skipped) {
      out << prefix << k << ",," << CsvField("skipped: " + v) << '\n';
    }
  };
  for (const auto& c : r.references) emit_cell(c, "-");
  for (const auto& c : r.cells) emit_cell(c, absl::StrCat(c.gen_seed));
  for (const auto& a : r.aggregates) {
    const std::string prefix =
        absl::StrCat(a.model, ",", EpsilonKey(a.epsilon), ",", a.split_seed, ",");
    out << prefix << "mean," << a.metric << ',' << FormatDouble(a.mean) << ",ok\n";
    out << prefix << "std," << a.metric << ',' << FormatDouble(a.std) << ",ok\n";
  }
  return out.str();
}

inline nlohmann::json TimingsJson(const GridReport& r, int threads) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"model", c.model},
                     {"epsilon", NumberJson(c.epsilon)},
                     {"split_seed", c.split_seed},
                     {"gen_seed", c.gen_seed},
                     {"wall_seconds", c.wall_seconds}});
  }
  return {{"threads", threads}, {"total_wall_seconds", r.wall_seconds}, {"cells", cells}};
}

inline absl::Status WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path.string()));
  out << text;
  return out ? absl::OkStatus() : absl::UnavailableError(absl::StrCat("write failed: ", path.string()));
}

inline absl::Status WriteReports(const GridReport& r, const std::string& dir, int threads) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return absl::UnavailableError(absl::StrCat("cannot create ", dir, ": ", ec.message()));
  const std::filesystem::path base(dir);
  RETURN_IF_ERROR(WriteText(base / "report.json", ReportJson(r).dump(2) + "\n"));
  RETURN_IF_ERROR(WriteText(base / "report.csv", ReportCsv(r)));
  return WriteText(base / "timings.json", TimingsJson(r, threads).dump(2) + "\n");
}

}  // namespace dpsyn

#endif  // DPSYN_HARNESS_H_
