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

// Reference checks for the evaluation harness, written without reusing the
// harness's own counting code.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "revmine/eval.hpp"

namespace revmine::oracle {

/// Per-class TP/FP/FN by direct counting, one pass per class.
struct Tally {
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<double> precision, recall, f1;
  double accuracy = 0.0;
  double f1_macro = 0.0;
};

inline Tally tally(const std::vector<ClassId>& t, const std::vector<ClassId>& p, std::size_t C) {
  Tally out;
  out.confusion.assign(C, std::vector<std::size_t>(C, 0));
  for (std::size_t a = 0; a < C; ++a) {
    for (std::size_t b = 0; b < C; ++b) {
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] == static_cast<ClassId>(a) && p[i] == static_cast<ClassId>(b)) ++out.confusion[a][b];
      }
    }
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < t.size(); ++i) correct += t[i] == p[i];
  out.accuracy = static_cast<double>(correct) / static_cast<double>(t.size());
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const bool is_t = t[i] == static_cast<ClassId>(c), is_p = p[i] == static_cast<ClassId>(c);
      tp += is_t && is_p;
      fp += !is_t && is_p;
      fn += is_t && !is_p;
    }
    const double pr = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double rc = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    const double f = pr + rc > 0.0 ? 2.0 * pr * rc / (pr + rc) : 0.0;
    out.precision.push_back(pr);
    out.recall.push_back(rc);
    out.f1.push_back(f);
    out.f1_macro += f;
  }
  out.f1_macro /= static_cast<double>(C);
  return out;
}

/// Exact equality on every field.
inline bool metrics_agree(const MetricsReport& m, const Tally& t) {
  if (m.confusion != t.confusion || m.accuracy != t.accuracy || m.f1_macro != t.f1_macro) return false;
  for (std::size_t c = 0; c < t.f1.size(); ++c) {
    if (m.per_class[c].precision != t.precision[c] || m.per_class[c].recall != t.recall[c] ||
        m.per_class[c].f1 != t.f1[c]) {
      return false;
    }
  }
  return true;
}

/// Every record in exactly one fold in [0, k), and every fold's count of
/// each class within (share - 1, share + 1) of n_c / k.
inline bool fold_plan_ok(const std::vector<ClassId>& y, const std::vector<std::size_t>& fold_of, std::size_t k) {
  if (fold_of.size() != y.size()) return false;
  std::map<ClassId, std::size_t> totals;
  std::map<std::pair<std::size_t, ClassId>, std::size_t> per_fold;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (fold_of[i] >= k) return false;
    ++totals[y[i]];
    ++per_fold[{fold_of[i], y[i]}];
  }
  for (std::size_t f = 0; f < k; ++f) {
    for (auto [c, n] : totals) {
      const double share = static_cast<double>(n) / static_cast<double>(k);
      const auto it = per_fold.find({f, c});
      const double got = it == per_fold.end() ? 0.0 : static_cast<double>(it->second);
      if (std::abs(got - share) >= 1.0) return false;
    }
  }
  return true;
}

inline bool same_features(const FoldFeatures& a, const FoldFeatures& b) {
  if (a.vocab.size() != b.vocab.size()) return false;
  for (std::size_t i = 0; i < a.vocab.size(); ++i) {
    const auto id = static_cast<std::int32_t>(i);
    if (a.vocab.token(id) != b.vocab.token(id) || a.vocab.doc_freq(id) != b.vocab.doc_freq(id)) return false;
  }
  if (a.train.n_rows() != b.train.n_rows() || a.train.n_cols() != b.train.n_cols()) return false;
  for (std::size_t r = 0; r < a.train.n_rows(); ++r) {
    const auto& x = a.train.row(r);
    const auto& y = b.train.row(r);
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].col != y[i].col || x[i].value != y[i].value) return false;
    }
  }
  return true;
}

/// Deletes, or rewrites with unseen words, random test-fold records and
/// checks that the training vocabulary and matrix of that fold stay
/// bit-identical.
inline bool leakage_free(const Dataset& ds, const FoldPlan& plan, const ModelSpec& spec, std::size_t trials,
                         std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::size_t fold = rng.below(plan.k);
    const auto test = plan.test_rows(fold);
    const auto train = plan.train_rows(fold);
    const std::size_t victim = test[rng.below(test.size())];
    const auto base = fit_features(ds, train, spec);

    // rewrite
    auto reviews = ds.reviews();
    reviews[victim].tokens = {"leak" + std::to_string(trial), "unseen" + std::to_string(rng.below(1000))};
    const Dataset edited(ds.task(), reviews, ds.labels());
    if (!same_features(base, fit_features(edited, train, spec))) return false;

    // delete
    reviews = ds.reviews();
    auto labels = ds.labels();
    reviews.erase(reviews.begin() + static_cast<std::ptrdiff_t>(victim));
    labels.erase(labels.begin() + static_cast<std::ptrdiff_t>(victim));
    const Dataset shrunk(ds.task(), std::move(reviews), std::move(labels));
    std::vector<std::size_t> remapped;
    for (auto r : train) remapped.push_back(r > victim ? r - 1 : r);
    if (!same_features(base, fit_features(shrunk, remapped, spec))) return false;
  }
  return true;
}

}  // namespace revmine::oracle
