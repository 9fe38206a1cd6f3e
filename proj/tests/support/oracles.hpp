// Copyright 2026 The revmine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Independent reference computations shared by the unit tests and the
// acceptance runner. None of these call into the code they check beyond the
// data containers.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "revmine/classic.hpp"

namespace revmine::oracle {

using boost::multiprecision::cpp_rational;

/// Two-token documents over a three-word vocabulary: aa ab ac bb bc cc.
inline const std::array<std::array<std::uint32_t, 2>, 6>& two_token_docs() {
  static const std::array<std::array<std::uint32_t, 2>, 6> docs{{{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}}};
  return docs;
}

inline SparseMatrix::Row count_row(std::span<const std::uint32_t> tokens) {
  std::map<std::uint32_t, double> c;
  for (auto t : tokens) c[t] += 1.0;
  SparseMatrix::Row row;
  for (auto [col, v] : c) row.push_back({col, v});
  return row;
}

/// Bayes-optimal class under the smoothed multinomial model, in exact
/// rational arithmetic; ties go to the earlier class.
inline ClassId exact_bayes(const std::vector<std::vector<std::uint32_t>>& docs, const std::vector<ClassId>& y,
                           std::span<const std::uint32_t> query, const cpp_rational& alpha, std::size_t vocab) {
  std::vector<ClassId> classes(y.begin(), y.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  cpp_rational best = -1;
  ClassId best_class = classes[0];
  for (ClassId c : classes) {
    std::size_t n_docs = 0, n_tokens = 0;
    std::vector<std::size_t> counts(vocab, 0);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (y[i] != c) continue;
      ++n_docs;
      for (auto t : docs[i]) {
        ++counts[t];
        ++n_tokens;
      }
    }
    cpp_rational score(n_docs, docs.size());
    for (auto t : query) score *= (cpp_rational(counts[t]) + alpha) / (cpp_rational(n_tokens) + alpha * vocab);
    if (score > best) {
      best = score;
      best_class = c;
    }
  }
  return best_class;
}

struct NbSweep {
  std::size_t corpora = 0;
  std::size_t predictions = 0;
  std::size_t mismatches = 0;
};

/// Every multiset of at most `max_docs` labeled two-token documents (binary
/// labels) that contains both classes; each fitted model is queried on all
/// six document shapes plus the empty document.
inline NbSweep nb_exhaustive(std::size_t max_docs, double alpha_num = 1.0, std::int64_t alpha_den = 1) {
  NbSweep out;
  const auto& shapes = two_token_docs();
  const std::size_t n_types = shapes.size() * 2;
  const cpp_rational alpha(static_cast<std::int64_t>(alpha_num), alpha_den);
  const double alpha_d = alpha_num / static_cast<double>(alpha_den);

  SparseMatrix queries(0, 3);
  std::vector<std::vector<std::uint32_t>> query_tokens;
  for (const auto& s : shapes) {
    queries.push_row(count_row(s));
    query_tokens.emplace_back(s.begin(), s.end());
  }
  queries.push_row({});
  query_tokens.emplace_back();

  std::vector<std::size_t> pick;
  std::function<void(std::size_t)> rec = [&](std::size_t from) {
    std::vector<std::vector<std::uint32_t>> docs;
    std::vector<ClassId> y;
    for (auto t : pick) {
      docs.emplace_back(shapes[t % 6].begin(), shapes[t % 6].end());
      y.push_back(static_cast<ClassId>(t / 6));
    }
    const bool both = std::find(y.begin(), y.end(), 0) != y.end() && std::find(y.begin(), y.end(), 1) != y.end();
    if (both) {
      ++out.corpora;
      SparseMatrix X(0, 3);
      for (const auto& d : docs) X.push_row(count_row(d));
      const auto model = nb_fit(X, y, alpha_d);
      const auto pred = nb_predict(model, queries);
      for (std::size_t q = 0; q < query_tokens.size(); ++q) {
        ++out.predictions;
        if (pred[q] != exact_bayes(docs, y, query_tokens[q], alpha, 3)) ++out.mismatches;
      }
    }
    if (pick.size() == max_docs) return;
    for (std::size_t t = from; t < n_types; ++t) {
      pick.push_back(t);
      rec(t);
      pick.pop_back();
    }
  };
  rec(0);
  return out;
}

/// Full sort of every training row by (similarity desc, row asc), then a
/// majority vote with ties to the smaller class id.
inline ClassId knn_brute_force(const SparseMatrix& train, const std::vector<ClassId>& labels, std::size_t k,
                               const SparseMatrix::Row& query) {
  std::vector<std::pair<double, std::size_t>> sims;
  for (std::size_t r = 0; r < train.n_rows(); ++r) sims.emplace_back(sparse_dot(query, train.row(r)), r);
  std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::map<ClassId, std::size_t> votes;
  for (std::size_t i = 0; i < k; ++i) ++votes[labels[sims[i].second]];
  ClassId best = votes.begin()->first;
  for (const auto& [c, v] : votes) {
    if (v > votes[best]) best = c;
  }
  return best;
}

inline SparseMatrix::Row normalized_dense(std::span<const double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  SparseMatrix::Row row;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) row.push_back({static_cast<std::uint32_t>(i), v[i] / n});
  }
  return row;
}

/// Brute-force kNN agreement on random dense points in a few dimensions.
inline std::size_t knn_mismatches(std::uint64_t seed, std::size_t n_points, std::size_t dim, std::size_t k,
                                  std::size_t n_queries) {
  Rng rng(seed);
  SparseMatrix train(0, dim);
  std::vector<ClassId> labels;
  std::vector<double> v(dim);
  for (std::size_t i = 0; i < n_points; ++i) {
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    train.push_row(normalized_dense(v));
    labels.push_back(static_cast<ClassId>(rng.below(3)));
  }
  SparseMatrix queries(0, dim);
  for (std::size_t q = 0; q < n_queries; ++q) {
    if (q % 4 == 0) {
      queries.push_row(train.row(rng.below(n_points)));
    } else {
      for (auto& x : v) x = rng.uniform(-1.0, 1.0);
      queries.push_row(normalized_dense(v));
    }
  }
  const auto pred = knn_predict(knn_fit(train, labels, k), queries);
  std::size_t bad = 0;
  for (std::size_t q = 0; q < n_queries; ++q) {
    if (pred[q] != knn_brute_force(train, labels, k, queries.row(q))) ++bad;
  }
  return bad;
}

/// Toy sets for the SVM checks: a separable four-point set with margin 1 and
/// XOR in the plane.
inline std::pair<SparseMatrix, std::vector<ClassId>> separable_toy() {
  SparseMatrix X(0, 2);
  X.push_row({{0, 2.0}, {1, 2.0}});
  X.push_row({{0, 3.0}, {1, 1.0}});
  X.push_row({{0, -2.0}, {1, -2.0}});
  X.push_row({{0, -1.0}, {1, -3.0}});
  return {X, {0, 0, 1, 1}};
}

inline std::pair<SparseMatrix, std::vector<ClassId>> xor_toy() {
  SparseMatrix X(0, 2);
  X.push_row({});
  X.push_row({{0, 1.0}, {1, 1.0}});
  X.push_row({{0, 1.0}});
  X.push_row({{1, 1.0}});
  return {X, {0, 0, 1, 1}};
}

inline double accuracy(const std::vector<ClassId>& a, const std::vector<ClassId>& b) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i];
  return static_cast<double>(hit) / static_cast<double>(a.size());
}

/// Best training accuracy of any affine separator sign(w.x + b) on a 2-D
/// point set, by enumerating all 2^n sign patterns and testing each for
/// strict linear separability with a tiny perceptron run.
inline double best_linear_accuracy_2d(const std::vector<std::array<double, 2>>& pts, const std::vector<int>& y) {
  const std::size_t n = pts.size();
  double best = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    // perceptron on the pattern; converges iff separable
    double w0 = 0, w1 = 0, b = 0;
    bool separable = false;
    for (int it = 0; it < 2000 && !separable; ++it) {
      separable = true;
      for (std::size_t i = 0; i < n; ++i) {
        const double s = (mask >> i & 1u) ? 1.0 : -1.0;
        if (s * (w0 * pts[i][0] + w1 * pts[i][1] + b) <= 0.0) {
          w0 += s * pts[i][0];
          w1 += s * pts[i][1];
          b += s;
          separable = false;
        }
      }
    }
    if (!separable) continue;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < n; ++i) hit += ((mask >> i & 1u) ? 1 : -1) == y[i];
    best = std::max(best, static_cast<double>(hit) / static_cast<double>(n));
  }
  return best;
}

}  // namespace revmine::oracle
