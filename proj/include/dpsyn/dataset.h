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

// Labeled tabular data: ingestion, stratified splitting, the continuous and
// discrete pre/post transforms used by the generators, and a synthetic
// benchmark with planted differential-expression and co-expression structure.

#ifndef DPSYN_DATASET_H_
#define DPSYN_DATASET_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "absl/strings/str_cat.h"
#include "dpsyn/common.h"
#include "dpsyn/rng.h"

namespace dpsyn {

inline constexpr int kNumBins = 4;

struct LabeledTable {
  Matrix features;  // n x d
  std::vector<int> labels;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  // Per-feature domain sizes when the table is integer coded (binned);
  // empty for continuous tables.
  std::vector<int> domain_sizes;

  int num_rows() const { return static_cast<int>(labels.size()); }
  int num_features() const { return static_cast<int>(features.cols()); }
  int num_classes() const { return static_cast<int>(class_names.size()); }
  bool is_discrete() const { return !domain_sizes.empty(); }

  std::vector<int> ClassCounts() const {
    std::vector<int> counts(num_classes(), 0);
    for (int y : labels) ++counts[y];
    return counts;
  }

  std::vector<double> ClassFrequencies() const {
    std::vector<double> freq(num_classes(), 0.0);
    if (labels.empty()) return freq;
    for (int y : labels) freq[y] += 1.0;
    for (double& f : freq) f /= static_cast<double>(labels.size());
    return freq;
  }

  std::vector<int> RowsOfClass(int c) const {
    std::vector<int> rows;
    for (int i = 0; i < num_rows(); ++i) {
      if (labels[i] == c) rows.push_back(i);
    }
    return rows;
  }

  // Same schema, rows in the order given.
  LabeledTable SelectRows(const std::vector<int>& rows) const {
    LabeledTable out;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
      out.features.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
      out.labels.push_back(labels[rows[i]]);
    }
    out.feature_names = feature_names;
    out.class_names = class_names;
    out.domain_sizes = domain_sizes;
    return out;
  }

  // Empty table with this table's schema.
  LabeledTable EmptyLike() const { return SelectRows({}); }

  absl::Status Validate() const {
    if (features.rows() != static_cast<Eigen::Index>(labels.size())) {
      return absl::InvalidArgumentError("feature rows and labels differ in length");
    }
    if (static_cast<int>(feature_names.size()) != num_features()) {
      return absl::InvalidArgumentError("feature_names length mismatch");
    }
    for (int y : labels) {
      if (y < 0 || y >= num_classes()) {
        return absl::InvalidArgumentError(absl::StrCat("label ", y, " out of range"));
      }
    }
    if (!features.allFinite()) {
      return absl::InvalidArgumentError("non-finite feature value");
    }
    return absl::OkStatus();
  }
};

// Builds a table from a dense matrix and labels with generated names.
inline LabeledTable MakeTable(Matrix features, std::vector<int> labels,
                              int num_classes) {
  LabeledTable t;
  t.features = std::move(features);
  t.labels = std::move(labels);
  for (int j = 0; j < t.features.cols(); ++j) {
    t.feature_names.push_back(absl::StrCat("g", j));
  }
  for (int c = 0; c < num_classes; ++c) {
    t.class_names.push_back(absl::StrCat("c", c));
  }
  return t;
}

// Row-wise concatenation of tables sharing a schema.
inline LabeledTable ConcatRows(const LabeledTable& a, const LabeledTable& b) {
  LabeledTable out = a;
  out.features.resize(a.features.rows() + b.features.rows(), a.features.cols());
  out.features << a.features, b.features;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace internal {

inline std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (ch != '\r') {
      cell.push_back(ch);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

// Strict finite-number parse; rejects "NaN", "inf" and trailing garbage.
inline bool ParseFiniteDouble(const std::string& s, double* out) {
  if (s.empty()) return false;
  size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (...) {
    return false;
  }
  while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  if (pos != s.size() || !std::isfinite(v)) return false;
  *out = v;
  return true;
}

}  // namespace internal

inline absl::StatusOr<LabeledTable> ParseCsv(std::istream& in,
                                             const std::string& label_column) {
  std::string line;
  if (!std::getline(in, line)) {
    return absl::InvalidArgumentError("EmptyDataset: missing header row");
  }
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB &&
      static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);  // UTF-8 BOM
  }
  std::vector<std::string> header = internal::SplitCsvLine(line);
  auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    return absl::NotFoundError(
        absl::StrCat("MissingColumn: label column '", label_column, "' not in header"));
  }
  const int label_idx = static_cast<int>(label_it - header.begin());

  LabeledTable table;
  for (int j = 0; j < static_cast<int>(header.size()); ++j) {
    if (j != label_idx) table.feature_names.push_back(header[j]);
  }
  std::map<std::string, int> class_index;
  std::vector<std::vector<double>> rows;
  int row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells = internal::SplitCsvLine(line);
    if (cells.size() != header.size()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "ParseError(row ", row_number, "): expected ", header.size(),
          " cells, got ", cells.size()));
    }
    std::vector<double> values;
    values.reserve(header.size() - 1);
    for (int j = 0; j < static_cast<int>(cells.size()); ++j) {
      if (j == label_idx) continue;
      double v;
      if (!internal::ParseFiniteDouble(cells[j], &v)) {
        return absl::InvalidArgumentError(absl::StrCat(
            "ParseError(row ", row_number, ", col ", j + 1, "): '", cells[j],
            "' is not a finite number"));
      }
      values.push_back(v);
    }
    const std::string& cls = cells[label_idx];
    auto [it, inserted] =
        class_index.emplace(cls, static_cast<int>(table.class_names.size()));
    if (inserted) table.class_names.push_back(cls);
    table.labels.push_back(it->second);
    rows.push_back(std::move(values));
  }
  if (rows.empty()) {
    return absl::InvalidArgumentError("EmptyDataset: no data rows");
  }
  table.features.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(table.feature_names.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) {
      table.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
    }
  }
  return table;
}

inline absl::StatusOr<LabeledTable> LoadCsv(const std::string& path,
                                            const std::string& label_column) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  return ParseCsv(in, label_column);
}

inline std::string FormatDouble(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline void WriteCsv(const LabeledTable& table, std::ostream& out,
                     const std::string& label_column = "label") {
  for (const auto& name : table.feature_names) out << name << ',';
  out << label_column << '\n';
  for (int i = 0; i < table.num_rows(); ++i) {
    for (int j = 0; j < table.num_features(); ++j) {
      out << FormatDouble(table.features(i, j)) << ',';
    }
    out << table.class_names[table.labels[i]] << '\n';
  }
}

inline absl::Status SaveCsv(const LabeledTable& table, const std::string& path,
                            const std::string& label_column = "label") {
  std::ofstream out(path);
  if (!out) return absl::PermissionDeniedError(absl::StrCat("cannot write ", path));
  WriteCsv(table, out, label_column);
  return absl::OkStatus();
}

// ---------------------------------------------------------------------------
// Splitting

struct Split {
  LabeledTable train;
  LabeledTable test;
  uint64_t split_seed = 0;
  // Row indices of the source table, ascending.
  std::vector<int> train_rows;
  std::vector<int> test_rows;
  Warnings warnings;
};

// Stratified split: each class contributes round(fraction * n_c) rows to the
// test set, keeping at least one row in train. Classes with a single row go
// entirely to train with a warning.
inline absl::StatusOr<Split> SplitTable(const LabeledTable& table,
                                        double test_fraction, uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 0.5)) {
    return absl::InvalidArgumentError("test_fraction must lie in (0, 0.5)");
  }
  Split split;
  split.split_seed = seed;
  Rng rng = RngStream(seed, "split");
  for (int c = 0; c < table.num_classes(); ++c) {
    std::vector<int> rows = table.RowsOfClass(c);
    if (rows.empty()) continue;
    if (rows.size() < 2) {
      split.warnings.push_back(absl::StrCat(
          "ClassTooSmall: class '", table.class_names[c], "' has ",
          rows.size(), " sample(s); placed entirely in train"));
      split.train_rows.insert(split.train_rows.end(), rows.begin(), rows.end());
      continue;
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    int n_test = static_cast<int>(std::lround(test_fraction * rows.size()));
    n_test = std::clamp(n_test, 0, static_cast<int>(rows.size()) - 1);
    split.test_rows.insert(split.test_rows.end(), rows.begin(), rows.begin() + n_test);
    split.train_rows.insert(split.train_rows.end(), rows.begin() + n_test, rows.end());
  }
  std::sort(split.train_rows.begin(), split.train_rows.end());
  std::sort(split.test_rows.begin(), split.test_rows.end());
  split.train = table.SelectRows(split.train_rows);
  split.test = table.SelectRows(split.test_rows);
  return split;
}

// ---------------------------------------------------------------------------
// Standardization

// Per-feature z-scoring with the population standard deviation. Constant
// columns get std 1.
struct ContinuousTransform {
  Vector means;
  Vector stds;

  static ContinuousTransform Fit(const Matrix& x) {
    ContinuousTransform t;
    const double n = static_cast<double>(x.rows());
    t.means = x.colwise().mean().transpose();
    t.stds.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      double ss = (x.col(j).array() - t.means[j]).square().sum();
      double sd = std::sqrt(ss / n);
      t.stds[j] = (sd > 0.0 && std::isfinite(sd)) ? sd : 1.0;
    }
    return t;
  }
  static ContinuousTransform Fit(const LabeledTable& train) {
    return Fit(train.features);
  }

  Matrix Apply(const Matrix& x) const {
    return (x.rowwise() - means.transpose()).array().rowwise() /
           stds.transpose().array();
  }
  Matrix Invert(const Matrix& z) const {
    return (z.array().rowwise() * stds.transpose().array()).matrix().rowwise() +
           means.transpose();
  }
  LabeledTable Apply(const LabeledTable& t) const {
    LabeledTable out = t;
    out.features = Apply(t.features);
    return out;
  }
  LabeledTable Invert(const LabeledTable& t) const {
    LabeledTable out = t;
    out.features = Invert(t.features);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Quantile binning

// Type-7 (linear interpolation) empirical quantile of sorted data.
inline double QuantileType7(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Four quartile bins per feature: (-inf, c1), [c1, c2), [c2, c3), [c3, inf).
// Duplicate cut points are kept (the intervals between them are empty).
struct Binning {
  Matrix cut_points;       // d x 3, non-decreasing per row
  Matrix representatives;  // d x 4

  static absl::StatusOr<Binning> Fit(const LabeledTable& train) {
    if (train.num_rows() == 0) {
      return absl::InvalidArgumentError("EmptyDataset: cannot fit binning");
    }
    const int d = train.num_features();
    Binning b;
    b.cut_points.resize(d, kNumBins - 1);
    b.representatives.resize(d, kNumBins);
    std::vector<double> col(train.num_rows());
    for (int j = 0; j < d; ++j) {
      for (int i = 0; i < train.num_rows(); ++i) col[i] = train.features(i, j);
      std::sort(col.begin(), col.end());
      for (int k = 0; k < kNumBins - 1; ++k) {
        b.cut_points(j, k) = QuantileType7(col, 0.25 * (k + 1));
      }
      double sums[kNumBins] = {0, 0, 0, 0};
      int counts[kNumBins] = {0, 0, 0, 0};
      for (double v : col) {
        int bin = b.BinOf(j, v);
        sums[bin] += v;
        ++counts[bin];
      }
      for (int k = 0; k < kNumBins; ++k) {
        if (counts[k] > 0) {
          b.representatives(j, k) = sums[k] / counts[k];
        } else {
          // Empty bin: representative is its left cut (c1 for the first bin).
          b.representatives(j, k) = b.cut_points(j, std::max(0, k - 1));
        }
      }
    }
    return b;
  }

  int BinOf(int feature, double v) const {
    int bin = 0;
    for (int k = 0; k < kNumBins - 1; ++k) {
      if (v >= cut_points(feature, k)) bin = k + 1;
    }
    return bin;
  }

  LabeledTable Discretize(const LabeledTable& t) const {
    LabeledTable out = t;
    for (int i = 0; i < t.num_rows(); ++i) {
      for (int j = 0; j < t.num_features(); ++j) {
        out.features(i, j) = BinOf(j, t.features(i, j));
      }
    }
    out.domain_sizes.assign(t.num_features(), kNumBins);
    return out;
  }

  LabeledTable Undiscretize(const LabeledTable& t) const {
    LabeledTable out = t;
    for (int i = 0; i < t.num_rows(); ++i) {
      for (int j = 0; j < t.num_features(); ++j) {
        int bin = static_cast<int>(t.features(i, j));
        out.features(i, j) = representatives(j, bin);
      }
    }
    out.domain_sizes.clear();
    return out;
  }
};

// ---------------------------------------------------------------------------
// Planted-structure benchmark

struct DePlant {
  int gene = 0;
  int class_index = 0;
  double shift = 0.0;  // > 0
  bool up = true;
};

struct ModulePlant {
  std::vector<int> genes;
  double rho = 0.9;
};

// Multiplies the baseline mean of every gene of `module` in class
// `class_index` by `fold`.
struct ModuleActivation {
  int module = 0;
  int class_index = 0;
  double fold = 2.0;
};

struct PlantedSpec {
  std::vector<int> n_per_class;
  int d = 0;
  std::vector<DePlant> de_genes;
  std::vector<ModulePlant> modules;
  std::vector<ModuleActivation> activations;
  double noise_scale = 1.0;
  double base_mean = 10.0;
};

// Ground truth DE sets for one unordered class pair (class_a < class_b):
// `up` holds genes whose class-a mean exceeds the class-b mean.
struct DePair {
  int class_a = 0;
  int class_b = 0;
  std::vector<int> up;
  std::vector<int> down;
};

struct OracleAnnotations {
  std::vector<DePair> de_pairs;
  std::vector<std::vector<int>> modules;
  Matrix class_means;  // C x d
};

inline absl::Status ValidatePlantedSpec(const PlantedSpec& spec) {
  const int num_classes = static_cast<int>(spec.n_per_class.size());
  if (num_classes == 0 || spec.d <= 0) {
    return absl::InvalidArgumentError("InconsistentSpec: empty class list or d <= 0");
  }
  for (int n : spec.n_per_class) {
    if (n < 0) return absl::InvalidArgumentError("InconsistentSpec: negative class size");
  }
  if (!(spec.noise_scale > 0.0)) {
    return absl::InvalidArgumentError("InconsistentSpec: noise_scale must be > 0");
  }
  for (const auto& de : spec.de_genes) {
    if (de.gene < 0 || de.gene >= spec.d || de.class_index < 0 ||
        de.class_index >= num_classes) {
      return absl::OutOfRangeError("InconsistentSpec: DE gene or class index out of range");
    }
    if (!(de.shift > 0.0)) {
      return absl::InvalidArgumentError("InconsistentSpec: shift magnitudes must be > 0");
    }
  }
  std::set<int> used;
  for (const auto& m : spec.modules) {
    if (!(m.rho > 0.0 && m.rho < 1.0)) {
      return absl::InvalidArgumentError("InconsistentSpec: module rho must lie in (0,1)");
    }
    for (int g : m.genes) {
      if (g < 0 || g >= spec.d) {
        return absl::OutOfRangeError("InconsistentSpec: module gene out of range");
      }
      if (!used.insert(g).second) {
        return absl::InvalidArgumentError("InconsistentSpec: modules overlap");
      }
    }
  }
  for (const auto& a : spec.activations) {
    if (a.module < 0 || a.module >= static_cast<int>(spec.modules.size()) ||
        a.class_index < 0 || a.class_index >= num_classes || !(a.fold > 0.0)) {
      return absl::OutOfRangeError("InconsistentSpec: bad module activation");
    }
  }
  return absl::OkStatus();
}

// Class-conditional Gaussian data. Gene j of class c has mean
// base_mean * fold(module(j), c) +/- DE shifts; module genes share one latent
// factor per sample so that their pairwise correlation is rho.
inline absl::StatusOr<std::pair<LabeledTable, OracleAnnotations>> GeneratePlanted(
    const PlantedSpec& spec, uint64_t seed) {
  RETURN_IF_ERROR(ValidatePlantedSpec(spec));
  const int num_classes = static_cast<int>(spec.n_per_class.size());
  const int d = spec.d;

  Matrix means = Matrix::Constant(num_classes, d, spec.base_mean);
  std::vector<int> module_of(d, -1);
  for (size_t m = 0; m < spec.modules.size(); ++m) {
    for (int g : spec.modules[m].genes) module_of[g] = static_cast<int>(m);
  }
  for (const auto& a : spec.activations) {
    for (int g : spec.modules[a.module].genes) means(a.class_index, g) *= a.fold;
  }
  for (const auto& de : spec.de_genes) {
    means(de.class_index, de.gene) += de.up ? de.shift : -de.shift;
  }

  const int n = std::accumulate(spec.n_per_class.begin(), spec.n_per_class.end(), 0);
  LabeledTable table = MakeTable(Matrix(n, d), {}, num_classes);
  table.labels.reserve(n);
  Rng rng = RngStream(seed, "planted");
  std::normal_distribution<double> normal(0.0, 1.0);
  int row = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int i = 0; i < spec.n_per_class[c]; ++i, ++row) {
      std::vector<double> factors(spec.modules.size());
      for (double& f : factors) f = normal(rng);
      for (int j = 0; j < d; ++j) {
        double e = normal(rng);
        double z = e;
        if (module_of[j] >= 0) {
          const double rho = spec.modules[module_of[j]].rho;
          z = std::sqrt(rho) * factors[module_of[j]] + std::sqrt(1.0 - rho) * e;
        }
        table.features(row, j) = means(c, j) + spec.noise_scale * z;
      }
      table.labels.push_back(c);
    }
  }

  OracleAnnotations oracle;
  oracle.class_means = means;
  for (const auto& m : spec.modules) {
    std::vector<int> genes = m.genes;
    std::sort(genes.begin(), genes.end());
    oracle.modules.push_back(std::move(genes));
  }
  for (int a = 0; a < num_classes; ++a) {
    for (int b = a + 1; b < num_classes; ++b) {
      DePair pair{a, b, {}, {}};
      for (int j = 0; j < d; ++j) {
        if (means(a, j) > means(b, j)) pair.up.push_back(j);
        if (means(a, j) < means(b, j)) pair.down.push_back(j);
      }
      oracle.de_pairs.push_back(std::move(pair));
    }
  }
  return std::make_pair(std::move(table), std::move(oracle));
}

// Largest-remainder apportionment of `total` according to `weights`.
inline std::vector<int> ApportionCounts(const std::vector<double>& weights, int total) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> counts(weights.size());
  std::vector<std::pair<double, size_t>> remainders;
  int assigned = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    double exact = total * weights[i] / sum;
    counts[i] = static_cast<int>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - counts[i], i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  for (int k = 0; assigned < total; ++k, ++assigned) {
    ++counts[remainders[k % remainders.size()].second];
  }
  return counts;
}

}  // namespace dpsyn

#endif  // DPSYN_DATASET_H_
