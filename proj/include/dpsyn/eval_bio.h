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

// Biological plausibility checks on an expression table:
//   * differential expression per class pair via a one-sided rank-sum test,
//     summarized as mean TPR / FPR against a reference;
//   * Pearson co-expression networks and their edge agreement;
//   * modules by greedy modularity maximization, and group fold-changes.

#ifndef DPSYN_EVAL_BIO_H_
#define DPSYN_EVAL_BIO_H_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "absl/strings/str_cat.h"
#include "dpsyn/common.h"
#include "dpsyn/dataset.h"

namespace dpsyn {

// ---------------------------------------------------------------------------
// Rank-sum test

enum class Alternative { kGreater, kLess };

inline constexpr int kExactRankMax = 12;

struct RankSum {
  double u = 0.0;  // U statistic of sample a
  int n_a = 0;
  int n_b = 0;
  bool ties = false;
  double tie_term = 0.0;  // sum over tie groups of t^3 - t
};

// Midranks of the pooled sample; U_a = sum of a's ranks - n_a (n_a + 1) / 2.
inline RankSum ComputeRankSum(const std::vector<double>& a, const std::vector<double>& b) {
  RankSum rs;
  rs.n_a = static_cast<int>(a.size());
  rs.n_b = static_cast<int>(b.size());
  const int n = rs.n_a + rs.n_b;
  std::vector<std::pair<double, int>> pooled;  // value, 1 if from a
  pooled.reserve(n);
  for (double v : a) pooled.emplace_back(v, 1);
  for (double v : b) pooled.emplace_back(v, 0);
  std::sort(pooled.begin(), pooled.end());
  double rank_sum_a = 0.0;
  for (int i = 0; i < n;) {
    int j = i;
    while (j + 1 < n && pooled[j + 1].first == pooled[i].first) ++j;
    const double midrank = 0.5 * (i + j) + 1.0;
    const double t = j - i + 1;
    if (t > 1) {
      rs.ties = true;
      rs.tie_term += t * t * t - t;
    }
    for (int k = i; k <= j; ++k) {
      if (pooled[k].second) rank_sum_a += midrank;
    }
    i = j + 1;
  }
  rs.u = rank_sum_a - 0.5 * rs.n_a * (rs.n_a + 1.0);
  return rs;
}

// Number of arrangements with U = u, for u = 0..n_a * n_b, via
// f(m, n, u) = f(m - 1, n, u - n) + f(m, n - 1, u).
inline std::vector<double> ExactUDistribution(int n_a, int n_b) {
  // table[m][k] holds f(m, k, .) as a vector; built up over m and k.
  std::vector<std::vector<std::vector<double>>> f(
      n_a + 1, std::vector<std::vector<double>>(n_b + 1));
  for (int m = 0; m <= n_a; ++m) {
    for (int k = 0; k <= n_b; ++k) {
      std::vector<double>& cur = f[m][k];
      cur.assign(m * k + 1, 0.0);
      if (m == 0 || k == 0) {
        cur[0] = 1.0;
        continue;
      }
      const auto& drop_a = f[m - 1][k];  // a's largest is last: contributes k
      const auto& drop_b = f[m][k - 1];
      for (size_t u = 0; u < drop_b.size(); ++u) cur[u] += drop_b[u];
      for (size_t u = 0; u < drop_a.size(); ++u) cur[u + k] += drop_a[u];
    }
  }
  return f[n_a][n_b];
}

inline double NormalUpperTail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// One-sided p-value; kGreater tests whether a tends to exceed b. Exact when
// n_a + n_b <= 12 without ties, else a normal approximation with tie
// correction and a 0.5 continuity correction. All-identical input gives 1.
inline double RankTestPValue(const RankSum& rs, Alternative alt) {
  const int n = rs.n_a + rs.n_b;
  if (rs.n_a == 0 || rs.n_b == 0) return 1.0;
  if (n <= kExactRankMax && !rs.ties) {
    const std::vector<double> dist = ExactUDistribution(rs.n_a, rs.n_b);
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    const int u = static_cast<int>(std::lround(rs.u));
    double tail = 0.0;
    if (alt == Alternative::kGreater) {
      for (size_t k = u; k < dist.size(); ++k) tail += dist[k];
    } else {
      for (int k = 0; k <= u; ++k) tail += dist[k];
    }
    return std::min(1.0, tail / total);
  }
  const double mean = 0.5 * rs.n_a * rs.n_b;
  const double var = rs.n_a * rs.n_b / 12.0 *
                     ((n + 1.0) - rs.tie_term / (static_cast<double>(n) * (n - 1.0)));
  if (!(var > 0.0)) return 1.0;
  const double sd = std::sqrt(var);
  if (alt == Alternative::kGreater) return NormalUpperTail((rs.u - mean - 0.5) / sd);
  return NormalUpperTail(-(rs.u - mean + 0.5) / sd);
}

inline double RankTest(const std::vector<double>& a, const std::vector<double>& b,
                       Alternative alt) {
  return RankTestPValue(ComputeRankSum(a, b), alt);
}

// ---------------------------------------------------------------------------
// Differential expression

struct DeResult {
  int num_genes = 0;
  std::vector<DePair> pairs;  // class_a < class_b; up: a above b
  // Per pair, per gene one-sided p-values (a greater than b / a less than b).
  std::vector<std::vector<double>> p_greater;
  std::vector<std::vector<double>> p_less;
  std::vector<std::pair<int, int>> skipped_pairs;
  Warnings warnings;
};

inline DeResult DeGenes(const LabeledTable& table, double alpha = 0.05) {
  DeResult result;
  const int d = table.num_features();
  result.num_genes = d;
  std::vector<std::vector<int>> rows(table.num_classes());
  for (int c = 0; c < table.num_classes(); ++c) rows[c] = table.RowsOfClass(c);
  std::vector<double> va, vb;
  for (int a = 0; a < table.num_classes(); ++a) {
    for (int b = a + 1; b < table.num_classes(); ++b) {
      if (rows[a].size() < 2 || rows[b].size() < 2) {
        result.skipped_pairs.emplace_back(a, b);
        result.warnings.push_back(
            absl::StrCat("DE pair (", a, ", ", b, ") skipped: fewer than 2 samples"));
        continue;
      }
      DePair pair{a, b, {}, {}};
      std::vector<double> pg(d), pl(d);
      for (int j = 0; j < d; ++j) {
        va.clear();
        vb.clear();
        for (int r : rows[a]) va.push_back(table.features(r, j));
        for (int r : rows[b]) vb.push_back(table.features(r, j));
        const RankSum rs = ComputeRankSum(va, vb);
        pg[j] = RankTestPValue(rs, Alternative::kGreater);
        pl[j] = RankTestPValue(rs, Alternative::kLess);
        if (pg[j] <= alpha) pair.up.push_back(j);
        if (pl[j] <= alpha) pair.down.push_back(j);
      }
      result.pairs.push_back(std::move(pair));
      result.p_greater.push_back(std::move(pg));
      result.p_less.push_back(std::move(pl));
    }
  }
  return result;
}

struct TprFpr {
  double tpr = 0.0;
  double fpr = 0.0;
  int tpr_terms = 0;
  int fpr_terms = 0;
  int skipped_terms = 0;  // pair-directions with no real positives
};

// Mean over class pairs and both directions of |synth & real| / |real| and
// |synth \ real| / (d - |real|). Directions where a rate is undefined are
// skipped from that mean; a pair absent from `synth` counts as empty.
inline absl::StatusOr<TprFpr> DeTprFpr(const std::vector<DePair>& real,
                                       const std::vector<DePair>& synth, int num_genes) {
  TprFpr out;
  double tpr_sum = 0.0, fpr_sum = 0.0;
  for (const DePair& r : real) {
    const DePair* s = nullptr;
    for (const DePair& cand : synth) {
      if (cand.class_a == r.class_a && cand.class_b == r.class_b) s = &cand;
    }
    for (int dir = 0; dir < 2; ++dir) {
      const std::vector<int>& real_set = dir == 0 ? r.up : r.down;
      std::set<int> truth(real_set.begin(), real_set.end());
      int hits = 0, false_hits = 0;
      if (s != nullptr) {
        for (int g : dir == 0 ? s->up : s->down) {
          (truth.count(g) ? hits : false_hits) += 1;
        }
      }
      const int positives = static_cast<int>(truth.size());
      if (positives > 0) {
        tpr_sum += static_cast<double>(hits) / positives;
        ++out.tpr_terms;
      } else {
        ++out.skipped_terms;
      }
      if (num_genes - positives > 0) {
        fpr_sum += static_cast<double>(false_hits) / (num_genes - positives);
        ++out.fpr_terms;
      }
    }
  }
  if (out.tpr_terms == 0) {
    return absl::InvalidArgumentError("NoValidPairs: no class pair has reference DE genes");
  }
  out.tpr = tpr_sum / out.tpr_terms;
  out.fpr = out.fpr_terms > 0 ? fpr_sum / out.fpr_terms : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Correlation and co-expression networks

struct Correlation {
  double r = 0.0;
  double p = 1.0;
};

// Two-sided p for Pearson r with n samples, from Student t with n - 2 df.
inline double PearsonPValue(double r, int n) {
  const double r2 = std::min(1.0, r * r);
  if (r2 >= 1.0) return 0.0;
  const double t = std::abs(r) * std::sqrt((n - 2.0) / (1.0 - r2));
  boost::math::students_t dist(n - 2.0);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
}

inline absl::StatusOr<Correlation> Pearson(const Vector& x, const Vector& y) {
  const Eigen::Index n = x.size();
  if (n < 3 || y.size() != n) {
    return absl::InvalidArgumentError("Pearson needs two vectors of equal length >= 3");
  }
  const Vector xc = x.array() - x.mean();
  const Vector yc = y.array() - y.mean();
  const double sxx = xc.squaredNorm(), syy = yc.squaredNorm();
  if (!(sxx > 0.0) || !(syy > 0.0)) return absl::InvalidArgumentError("ZeroVariance");
  Correlation c;
  c.r = std::clamp(xc.dot(yc) / std::sqrt(sxx * syy), -1.0, 1.0);
  c.p = PearsonPValue(c.r, static_cast<int>(n));
  return c;
}

struct CoexEdge {
  int j = 0;  // j < k
  int k = 0;
  double r = 0.0;
  double p = 0.0;
};

struct CoexNetwork {
  int num_nodes = 0;
  double r_min = 0.0;
  std::vector<CoexEdge> edges;         // sorted by (j, k)
  std::vector<int> zero_variance;      // genes excluded from correlation
};

// Edge (j, k) iff r_jk > r_min and p < alpha. Features are columns.
inline CoexNetwork BuildNetwork(const Matrix& x, double r_min, double alpha = 0.05) {
  CoexNetwork net;
  net.num_nodes = static_cast<int>(x.cols());
  net.r_min = r_min;
  const int n = static_cast<int>(x.rows());
  if (n < 3) return net;
  Matrix centered = x.rowwise() - x.colwise().mean();
  Vector ss = centered.colwise().squaredNorm().transpose();
  Matrix cross = centered.transpose() * centered;
  for (int j = 0; j < net.num_nodes; ++j) {
    if (!(ss[j] > 0.0)) net.zero_variance.push_back(j);
  }
  for (int j = 0; j < net.num_nodes; ++j) {
    if (!(ss[j] > 0.0)) continue;
    for (int k = j + 1; k < net.num_nodes; ++k) {
      if (!(ss[k] > 0.0)) continue;
      const double r = std::clamp(cross(j, k) / std::sqrt(ss[j] * ss[k]), -1.0, 1.0);
      if (!(r > r_min)) continue;
      const double p = PearsonPValue(r, n);
      if (p < alpha) net.edges.push_back({j, k, r, p});
    }
  }
  return net;
}

struct NetworkComparison {
  int correct = 0;
  int spurious = 0;
  int real_edges = 0;
};

inline absl::StatusOr<NetworkComparison> CompareNetworks(const CoexNetwork& real,
                                                         const CoexNetwork& synth) {
  if (real.num_nodes != synth.num_nodes) {
    return absl::InvalidArgumentError(absl::StrCat("NodeSetMismatch: ", real.num_nodes, " vs ",
                                                   synth.num_nodes, " genes"));
  }
  std::set<std::pair<int, int>> truth;
  for (const auto& e : real.edges) truth.emplace(e.j, e.k);
  NetworkComparison c;
  c.real_edges = static_cast<int>(truth.size());
  for (const auto& e : synth.edges) (truth.count({e.j, e.k}) ? c.correct : c.spurious) += 1;
  return c;
}

// ---------------------------------------------------------------------------
// Modules

struct ModuleSet {
  std::vector<std::vector<int>> modules;  // sorted members, ordered by first member
  double modularity = 0.0;
};

// Greedy agglomerative modularity maximization on the r-weighted graph:
// starting from singletons, repeatedly merge the pair of connected
// communities with the largest gain dQ = 2 (e_ij - a_i a_j) while it is
// positive; ties go to the lexicographically smallest pair. Modules with
// fewer than min_size genes are dropped.
inline absl::StatusOr<ModuleSet> DetectModules(const CoexNetwork& net, int min_size = 10) {
  if (net.edges.empty()) return absl::InvalidArgumentError("EmptyNetwork: no edges");
  const int n = net.num_nodes;
  double total = 0.0;
  for (const auto& e : net.edges) total += e.r;
  const double two_m = 2.0 * total;
  Matrix e_between = Matrix::Zero(n, n);  // e_ij summed over both directions
  Vector a = Vector::Zero(n);
  for (const auto& e : net.edges) {
    e_between(e.j, e.k) += e.r / two_m;
    e_between(e.k, e.j) += e.r / two_m;
    a[e.j] += e.r / two_m;
    a[e.k] += e.r / two_m;
  }
  std::vector<std::vector<int>> members(n);
  std::vector<bool> alive(n, false);
  for (int i = 0; i < n; ++i) {
    members[i] = {i};
    alive[i] = a[i] > 0.0;
  }
  double q = 0.0;
  for (int i = 0; i < n; ++i) q -= a[i] * a[i];
  while (true) {
    int best_i = -1, best_j = -1;
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!alive[j] || e_between(i, j) <= 0.0) continue;
        const double gain = 2.0 * (e_between(i, j) - a[i] * a[j]);
        if (gain > best) {
          best = gain;
          best_i = i;
          best_j = j;
        }
      }
    }
    if (best_i < 0) break;
    // Merge j into i.
    q += best;
    e_between.row(best_i) += e_between.row(best_j);
    e_between.col(best_i) += e_between.col(best_j);
    e_between(best_i, best_i) = 0.0;
    e_between.row(best_j).setZero();
    e_between.col(best_j).setZero();
    a[best_i] += a[best_j];
    a[best_j] = 0.0;
    alive[best_j] = false;
    members[best_i].insert(members[best_i].end(), members[best_j].begin(), members[best_j].end());
    members[best_j].clear();
  }
  ModuleSet out;
  out.modularity = q;
  for (int i = 0; i < n; ++i) {
    if (!alive[i] || static_cast<int>(members[i].size()) < min_size) continue;
    std::sort(members[i].begin(), members[i].end());
    out.modules.push_back(members[i]);
  }
  std::sort(out.modules.begin(), out.modules.end());
  return out;
}

// Mean over truth modules of the best Jaccard overlap with any detected one.
inline double ModuleAgreement(const std::vector<std::vector<int>>& detected,
                              const std::vector<std::vector<int>>& truth) {
  if (truth.empty()) return 1.0;
  double total = 0.0;
  for (const auto& t : truth) {
    std::set<int> ts(t.begin(), t.end());
    double best = 0.0;
    for (const auto& m : detected) {
      int inter = 0;
      for (int g : m) inter += ts.count(g);
      const double uni = static_cast<double>(ts.size() + m.size() - inter);
      best = std::max(best, uni > 0 ? inter / uni : 0.0);
    }
    total += best;
  }
  return total / static_cast<double>(truth.size());
}

// Fraction of within-module gene pairs present as network edges.
inline double WithinModuleEdgeRecall(const CoexNetwork& net,
                                     const std::vector<std::vector<int>>& modules) {
  std::set<std::pair<int, int>> edges;
  for (const auto& e : net.edges) edges.emplace(e.j, e.k);
  long pairs = 0, found = 0;
  for (const auto& m : modules) {
    for (size_t x = 0; x < m.size(); ++x) {
      for (size_t y = x + 1; y < m.size(); ++y) {
        ++pairs;
        found += edges.count({std::min(m[x], m[y]), std::max(m[x], m[y])});
      }
    }
  }
  return pairs > 0 ? static_cast<double>(found) / pairs : 1.0;
}

// ---------------------------------------------------------------------------
// Group fold-changes

struct GfcGroup {
  bool synthetic = false;
  int class_index = 0;
  std::string name;
};

struct GfcResult {
  std::vector<GfcGroup> groups;
  Matrix gfc;                     // modules x groups
  std::vector<int> column_order;  // average-linkage dendrogram leaf order
  double same_class_adjacency = 0.0;
  int synthetic_groups = 0;
  Warnings warnings;
};

// Leaf order of an average-linkage (UPGMA) clustering of the columns of m
// under Euclidean distance. The cluster with the smaller first leaf is
// placed left at every merge.
inline std::vector<int> AverageLinkageOrder(const Matrix& m) {
  const int g = static_cast<int>(m.cols());
  std::vector<std::vector<int>> clusters(g);
  for (int i = 0; i < g; ++i) clusters[i] = {i};
  Matrix dist(g, g);
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) dist(i, j) = (m.col(i) - m.col(j)).norm();
  }
  std::vector<bool> alive(g, true);
  for (int step = 0; step + 1 < g; ++step) {
    int bi = -1, bj = -1;
    double best = kInfinity;
    for (int i = 0; i < g; ++i) {
      if (!alive[i]) continue;
      for (int j = i + 1; j < g; ++j) {
        if (!alive[j]) continue;
        double s = 0.0;
        for (int x : clusters[i]) {
          for (int y : clusters[j]) s += dist(x, y);
        }
        s /= static_cast<double>(clusters[i].size() * clusters[j].size());
        if (s < best) best = s, bi = i, bj = j;
      }
    }
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    clusters[bj].clear();
    alive[bj] = false;
  }
  for (int i = 0; i < g; ++i) {
    if (alive[i]) return clusters[i];
  }
  return {};
}

// GFC(M, group) = mean_{j in M} log2((mean_group(x_j) + pc) / (grand_j + pc)),
// where grand_j pools every sample of both tables. Groups are the classes of
// the real table, then those of the synthetic table; empty groups are skipped.
inline GfcResult GroupFoldChanges(const std::vector<std::vector<int>>& modules,
                                  const LabeledTable& real, const LabeledTable& synth,
                                  double pseudocount = 1.0) {
  GfcResult out;
  const Eigen::Index d = real.features.cols();
  const double pooled_n = real.num_rows() + synth.num_rows();
  Vector grand = Vector::Zero(d);
  if (real.num_rows() > 0) grand += real.features.colwise().sum().transpose();
  if (synth.num_rows() > 0) grand += synth.features.colwise().sum().transpose();
  grand /= pooled_n;

  std::vector<Vector> group_means;
  for (int s = 0; s < 2; ++s) {
    const LabeledTable& t = s == 0 ? real : synth;
    for (int c = 0; c < t.num_classes(); ++c) {
      const std::vector<int> rows = t.RowsOfClass(c);
      if (rows.empty()) {
        out.warnings.push_back(absl::StrCat("EmptyGroup: ", s ? "synthetic" : "real",
                                            " class ", c, " has no samples"));
        continue;
      }
      Vector mean = Vector::Zero(d);
      for (int r : rows) mean += t.features.row(r).transpose();
      group_means.push_back(mean / static_cast<double>(rows.size()));
      out.groups.push_back({s == 1, c,
                            absl::StrCat(s ? "synth:" : "real:", t.class_names.size() > size_t(c)
                                                                     ? t.class_names[c]
                                                                     : absl::StrCat(c))});
    }
  }
  bool clamped = false;
  auto safe_log2 = [&](double v) {
    if (!(v > 0.0)) {
      clamped = true;
      v = 1e-9;
    }
    return std::log2(v);
  };
  out.gfc = Matrix::Zero(static_cast<Eigen::Index>(modules.size()),
                         static_cast<Eigen::Index>(out.groups.size()));
  for (size_t m = 0; m < modules.size(); ++m) {
    for (size_t g = 0; g < out.groups.size(); ++g) {
      double sum = 0.0;
      for (int j : modules[m]) {
        sum += safe_log2(group_means[g][j] + pseudocount) - safe_log2(grand[j] + pseudocount);
      }
      out.gfc(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(g)) =
          modules[m].empty() ? 0.0 : sum / static_cast<double>(modules[m].size());
    }
  }
  if (clamped) out.warnings.push_back("NonPositiveMean: log argument clamped to 1e-9");
  out.column_order = AverageLinkageOrder(out.gfc);

  // Same-class adjacency: the nearest column (ties to the lower index) of a
  // synthetic group is the real group of the same class.
  int hits = 0;
  for (size_t g = 0; g < out.groups.size(); ++g) {
    if (!out.groups[g].synthetic) continue;
    ++out.synthetic_groups;
    int nearest = -1;
    double best = kInfinity;
    for (size_t h = 0; h < out.groups.size(); ++h) {
      if (h == g) continue;
      const double dist = (out.gfc.col(g) - out.gfc.col(h)).norm();
      if (dist < best) best = dist, nearest = static_cast<int>(h);
    }
    if (nearest >= 0 && !out.groups[nearest].synthetic &&
        out.groups[nearest].class_index == out.groups[g].class_index) {
      ++hits;
    }
  }
  out.same_class_adjacency =
      out.synthetic_groups > 0 ? static_cast<double>(hits) / out.synthetic_groups : 0.0;
  return out;
}

}  // namespace dpsyn

#endif  // DPSYN_EVAL_BIO_H_
