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

// Sparse-feature classifiers: multinomial naive Bayes, cosine kNN and
// one-vs-rest Pegasos SVMs (linear, rbf, poly).
//
// Class order is ascending ClassId over the labels seen in training; every
// argmax resolves ties toward the earlier class.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "revmine/corpus.hpp"
#include "revmine/error.hpp"
#include "revmine/format.hpp"
#include "revmine/random.hpp"
#include "revmine/vectorizer.hpp"

namespace revmine {

namespace detail {

inline std::vector<ClassId> training_classes(std::span<const ClassId> y, std::size_t n_rows, const char* who) {
  if (y.size() != n_rows) {
    throw DomainError(std::string(who) + ": " + std::to_string(y.size()) + " labels for " + std::to_string(n_rows) +
                      " rows");
  }
  std::vector<ClassId> classes(y.begin(), y.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) throw DomainError(std::string(who) + ": training data must contain at least two classes");
  return classes;
}

inline std::size_t class_index(const std::vector<ClassId>& classes, ClassId c) {
  return static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), c) - classes.begin());
}

// First index whose score is within rounding noise of the maximum.
inline std::size_t argmax_first(std::span<const double> scores) {
  const double best = *std::max_element(scores.begin(), scores.end());
  const double tol = 1e-9 * std::max(1.0, std::abs(best));
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] >= best - tol) return i;
  }
  return 0;
}

inline nlohmann::json strings(std::span<const double> v) {
  auto j = nlohmann::json::array();
  for (double x : v) j.push_back(g17(x));
  return j;
}

inline std::vector<double> doubles(const nlohmann::json& j) {
  std::vector<double> out;
  for (const auto& s : j) out.push_back(parse_double(s.get<std::string>()));
  return out;
}

inline nlohmann::json sparse_to_json(const SparseMatrix& m) {
  auto rows = nlohmann::json::array();
  for (const auto& r : m.rows()) {
    auto row = nlohmann::json::array();
    for (const auto& e : r) row.push_back({e.col, g17(e.value)});
    rows.push_back(std::move(row));
  }
  return {{"n_cols", m.n_cols()}, {"rows", rows}};
}

inline SparseMatrix sparse_from_json(const nlohmann::json& j) {
  SparseMatrix m(0, j.at("n_cols").get<std::size_t>());
  for (const auto& row : j.at("rows")) {
    SparseMatrix::Row r;
    for (const auto& e : row) r.push_back({e.at(0).get<std::uint32_t>(), parse_double(e.at(1).get<std::string>())});
    m.push_row(std::move(r));
  }
  return m;
}

inline void expect_format(const nlohmann::json& j, const char* name) {
  if (j.value("format", "") != name) throw FormatError(std::string("expected a ") + name + " model");
  if (j.value("version", 0) != 1) throw FormatError(std::string("unsupported ") + name + " version");
}

}  // namespace detail

// ---------------------------------------------------------------- naive Bayes

struct NaiveBayesModel {
  std::vector<ClassId> classes;
  std::vector<double> class_log_prior;
  /// [class][column] log P(token | class).
  std::vector<std::vector<double>> token_log_likelihood;
  double alpha = 1.0;

  std::size_t n_cols() const { return token_log_likelihood.empty() ? 0 : token_log_likelihood[0].size(); }

  nlohmann::json to_json() const {
    nlohmann::json j{{"format", "naive_bayes"}, {"version", 1},        {"alpha", g17(alpha)},
                     {"classes", classes},      {"n_cols", n_cols()}, {"class_log_prior", detail::strings(class_log_prior)}};
    j["token_log_likelihood"] = nlohmann::json::array();
    for (const auto& row : token_log_likelihood) j["token_log_likelihood"].push_back(detail::strings(row));
    return j;
  }

  static NaiveBayesModel from_json(const nlohmann::json& j) {
    detail::expect_format(j, "naive_bayes");
    NaiveBayesModel m;
    m.alpha = parse_double(j.at("alpha").get<std::string>());
    m.classes = j.at("classes").get<std::vector<ClassId>>();
    m.class_log_prior = detail::doubles(j.at("class_log_prior"));
    for (const auto& row : j.at("token_log_likelihood")) m.token_log_likelihood.push_back(detail::doubles(row));
    return m;
  }
};

/// Multinomial NB with additive smoothing over all n_cols columns. X holds raw
/// term counts.
inline NaiveBayesModel nb_fit(const SparseMatrix& X, std::span<const ClassId> y, double alpha = 1.0) {
  if (!(alpha > 0.0)) throw DomainError("nb_fit: alpha must be positive");
  NaiveBayesModel m;
  m.alpha = alpha;
  m.classes = detail::training_classes(y, X.n_rows(), "nb_fit");
  const std::size_t C = m.classes.size(), V = X.n_cols();
  std::vector<std::size_t> docs(C, 0);
  std::vector<std::vector<double>> counts(C, std::vector<double>(V, 0.0));
  for (std::size_t i = 0; i < X.n_rows(); ++i) {
    const auto c = detail::class_index(m.classes, y[i]);
    ++docs[c];
    for (const auto& e : X.row(i)) counts[c][e.col] += e.value;
  }
  for (std::size_t c = 0; c < C; ++c) {
    m.class_log_prior.push_back(std::log(static_cast<double>(docs[c]) / static_cast<double>(X.n_rows())));
    const double total = std::accumulate(counts[c].begin(), counts[c].end(), 0.0);
    const double denom = std::log(total + alpha * static_cast<double>(V));
    std::vector<double> ll(V);
    for (std::size_t t = 0; t < V; ++t) ll[t] = std::log(counts[c][t] + alpha) - denom;
    m.token_log_likelihood.push_back(std::move(ll));
  }
  return m;
}

/// Joint log scores, one row per document and one column per model class.
inline std::vector<std::vector<double>> nb_log_scores(const NaiveBayesModel& m, const SparseMatrix& X) {
  if (X.n_cols() != m.n_cols()) throw DomainError("nb_predict: feature width differs from the fitted model");
  std::vector<std::vector<double>> out(X.n_rows(), m.class_log_prior);
  for (std::size_t i = 0; i < X.n_rows(); ++i) {
    for (std::size_t c = 0; c < m.classes.size(); ++c) {
      for (const auto& e : X.row(i)) out[i][c] += e.value * m.token_log_likelihood[c][e.col];
    }
  }
  return out;
}

inline std::vector<ClassId> nb_predict(const NaiveBayesModel& m, const SparseMatrix& X) {
  std::vector<ClassId> out;
  for (const auto& s : nb_log_scores(m, X)) out.push_back(m.classes[detail::argmax_first(s)]);
  return out;
}

// ------------------------------------------------------------------------ kNN

struct KnnModel {
  SparseMatrix train;
  std::vector<ClassId> labels;
  std::vector<ClassId> classes;
  std::size_t k = 5;

  nlohmann::json to_json() const {
    return {{"format", "knn"}, {"version", 1}, {"k", k}, {"labels", labels}, {"train", detail::sparse_to_json(train)}};
  }

  static KnnModel from_json(const nlohmann::json& j) {
    detail::expect_format(j, "knn");
    KnnModel m;
    m.k = j.at("k").get<std::size_t>();
    m.labels = j.at("labels").get<std::vector<ClassId>>();
    m.train = detail::sparse_from_json(j.at("train"));
    m.classes = detail::training_classes(m.labels, m.train.n_rows(), "knn");
    return m;
  }
};

/// Stores L2-normalized training rows.
inline KnnModel knn_fit(SparseMatrix X, std::span<const ClassId> y, std::size_t k = 5) {
  KnnModel m;
  m.classes = detail::training_classes(y, X.n_rows(), "knn_fit");
  if (k == 0) throw DomainError("knn_fit: k must be positive");
  m.train = std::move(X);
  m.labels.assign(y.begin(), y.end());
  m.k = k;
  return m;
}

/// Cosine kNN by dot product. Neighbors are ranked by similarity, then by
/// lower training row; the vote is a plain majority with ties going to the
/// earlier class.
inline std::vector<ClassId> knn_predict(const KnnModel& m, const SparseMatrix& X) {
  const std::size_t n = m.train.n_rows();
  if (m.k > n) {
    throw DomainError("knn_predict: k=" + std::to_string(m.k) + " exceeds " + std::to_string(n) + " training rows");
  }
  // inverted index, rows ascending within each column
  std::vector<std::vector<std::pair<std::uint32_t, double>>> postings(std::max(m.train.n_cols(), X.n_cols()));
  for (std::size_t r = 0; r < n; ++r) {
    for (const auto& e : m.train.row(r)) postings[e.col].emplace_back(static_cast<std::uint32_t>(r), e.value);
  }
  std::vector<double> sim(n);
  std::vector<std::uint32_t> order(n);
  std::vector<ClassId> out;
  out.reserve(X.n_rows());
  for (std::size_t q = 0; q < X.n_rows(); ++q) {
    std::fill(sim.begin(), sim.end(), 0.0);
    for (const auto& e : X.row(q)) {
      if (e.col >= postings.size()) continue;
      for (const auto& [r, v] : postings[e.col]) sim[r] += e.value * v;
    }
    std::iota(order.begin(), order.end(), 0u);
    auto before = [&](std::uint32_t a, std::uint32_t b) { return sim[a] > sim[b] || (sim[a] == sim[b] && a < b); };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m.k - 1), order.end(), before);
    std::vector<double> votes(m.classes.size(), 0.0);
    for (std::size_t i = 0; i < m.k; ++i) votes[detail::class_index(m.classes, m.labels[order[i]])] += 1.0;
    out.push_back(m.classes[detail::argmax_first(votes)]);
  }
  return out;
}

// ------------------------------------------------------------------------ SVM

enum class KernelType { linear, rbf, poly };

inline std::string_view kernel_name(KernelType k) {
  switch (k) {
    case KernelType::linear:
      return "linear";
    case KernelType::rbf:
      return "rbf";
    case KernelType::poly:
      return "poly";
  }
  return "linear";
}

inline KernelType parse_kernel(std::string_view s) {
  if (s == "linear") return KernelType::linear;
  if (s == "rbf") return KernelType::rbf;
  if (s == "poly") return KernelType::poly;
  throw DomainError("unknown kernel '" + std::string(s) + "'");
}

struct Kernel {
  KernelType type = KernelType::linear;
  /// 0 selects 1 / n_cols at fit time.
  double gamma = 0.0;
  int degree = 3;
  double coef0 = 1.0;

  double operator()(const SparseMatrix::Row& a, double a_norm2, const SparseMatrix::Row& b, double b_norm2) const {
    const double d = sparse_dot(a, b);
    switch (type) {
      case KernelType::linear:
        return d;
      case KernelType::rbf:
        return std::exp(-gamma * std::max(0.0, a_norm2 + b_norm2 - 2.0 * d));
      case KernelType::poly:
        return std::pow(gamma * d + coef0, degree);
    }
    return d;
  }
};

struct SvmOptions {
  Kernel kernel;
  double lambda = 1e-4;
  int epochs = 10;
  std::uint64_t seed = 0;
};

/// Per-epoch regularized hinge objective of one binary scorer, and its
/// running minimum.
struct SvmTrace {
  std::vector<double> objective;
  std::vector<double> best_so_far;
};

struct SvmModel {
  Kernel kernel;
  double lambda = 1e-4;
  std::vector<ClassId> classes;
  std::size_t n_cols = 0;
  /// Linear: [class][column] weights.
  std::vector<std::vector<double>> weights;
  std::vector<double> bias;
  /// Kernelized: support rows and [class][support row] coefficients.
  SparseMatrix support;
  std::vector<std::vector<double>> coefs;
  std::vector<SvmTrace> traces;

  nlohmann::json to_json() const {
    nlohmann::json j{{"format", "svm"},
                     {"version", 1},
                     {"kernel",
                      {{"type", kernel_name(kernel.type)},
                       {"gamma", g17(kernel.gamma)},
                       {"degree", kernel.degree},
                       {"coef0", g17(kernel.coef0)}}},
                     {"lambda", g17(lambda)},
                     {"classes", classes},
                     {"n_cols", n_cols},
                     {"bias", detail::strings(bias)}};
    auto mat = [](const std::vector<std::vector<double>>& rows) {
      auto a = nlohmann::json::array();
      for (const auto& r : rows) a.push_back(detail::strings(r));
      return a;
    };
    if (kernel.type == KernelType::linear) {
      j["weights"] = mat(weights);
    } else {
      j["support"] = detail::sparse_to_json(support);
      j["coefs"] = mat(coefs);
    }
    return j;
  }

  static SvmModel from_json(const nlohmann::json& j) {
    detail::expect_format(j, "svm");
    SvmModel m;
    const auto& k = j.at("kernel");
    m.kernel.type = parse_kernel(k.at("type").get<std::string>());
    m.kernel.gamma = parse_double(k.at("gamma").get<std::string>());
    m.kernel.degree = k.at("degree").get<int>();
    m.kernel.coef0 = parse_double(k.at("coef0").get<std::string>());
    m.lambda = parse_double(j.at("lambda").get<std::string>());
    m.classes = j.at("classes").get<std::vector<ClassId>>();
    m.n_cols = j.at("n_cols").get<std::size_t>();
    m.bias = detail::doubles(j.at("bias"));
    if (m.kernel.type == KernelType::linear) {
      for (const auto& r : j.at("weights")) m.weights.push_back(detail::doubles(r));
    } else {
      m.support = detail::sparse_from_json(j.at("support"));
      for (const auto& r : j.at("coefs")) m.coefs.push_back(detail::doubles(r));
    }
    return m;
  }
};

namespace detail {

struct BinaryScorer {
  std::vector<double> weights;  // linear
  std::vector<double> coefs;    // kernelized, one per training row
  double bias = 0.0;
  SvmTrace trace;
};

// Objective lambda/2 |w|^2 + mean hinge, where the bias is the weight of a
// constant feature and so is regularized with the rest.
inline double linear_objective(const SparseMatrix& X, std::span<const double> sign, std::span<const double> w,
                               double b, double lambda) {
  double reg = b * b;
  for (double v : w) reg += v * v;
  double hinge = 0.0;
  for (std::size_t i = 0; i < X.n_rows(); ++i) {
    double f = b;
    for (const auto& e : X.row(i)) f += w[e.col] * e.value;
    hinge += std::max(0.0, 1.0 - sign[i] * f);
  }
  return 0.5 * lambda * reg + hinge / static_cast<double>(X.n_rows());
}

inline BinaryScorer pegasos_linear(const SparseMatrix& X, std::span<const double> sign, double lambda, int epochs,
                                   std::uint64_t seed) {
  const std::size_t n = X.n_rows(), V = X.n_cols();
  // w = scale * v, with the bias carried as v_bias
  std::vector<double> v(V, 0.0);
  double v_bias = 0.0, scale = 1.0;
  std::vector<double> avg(V, 0.0);
  double avg_bias = 0.0;
  BinaryScorer best;
  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  std::uint64_t t = 0;
  std::vector<double> w(V);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(perm);
    for (auto i : perm) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      double f = v_bias;
      for (const auto& e : X.row(i)) f += v[e.col] * e.value;
      f *= scale;
      const double shrink = 1.0 - eta * lambda;
      if (shrink <= 0.0) {
        // first step: the previous iterate is wiped out entirely
        std::fill(v.begin(), v.end(), 0.0);
        v_bias = 0.0;
        scale = 1.0;
      } else {
        scale *= shrink;
      }
      if (sign[i] * f < 1.0) {
        const double step = eta * sign[i] / scale;
        for (const auto& e : X.row(i)) v[e.col] += step * e.value;
        v_bias += step;
      }
      if (scale < 1e-9) {
        for (auto& x : v) x *= scale;
        v_bias *= scale;
        scale = 1.0;
      }
    }
    for (std::size_t c = 0; c < V; ++c) w[c] = scale * v[c];
    const double b = scale * v_bias;
    // running mean of epoch-end iterates
    const double k = static_cast<double>(epoch + 1);
    for (std::size_t c = 0; c < V; ++c) avg[c] += (w[c] - avg[c]) / k;
    avg_bias += (b - avg_bias) / k;
    const double obj_last = linear_objective(X, sign, w, b, lambda);
    const double obj_avg = linear_objective(X, sign, avg, avg_bias, lambda);
    const double obj = std::min(obj_last, obj_avg);
    if (obj < best_obj) {
      best_obj = obj;
      best.weights = obj_last <= obj_avg ? w : avg;
      best.bias = obj_last <= obj_avg ? b : avg_bias;
    }
    best.trace.objective.push_back(obj);
    best.trace.best_so_far.push_back(best_obj);
  }
  return best;
}

inline BinaryScorer pegasos_kernel(const std::vector<std::vector<double>>& gram, std::span<const double> sign,
                                   double lambda, int epochs, std::uint64_t seed) {
  const std::size_t n = gram.size();
  std::vector<double> alpha(n, 0.0);
  // sum_j alpha_j y_j (K_ij + 1), kept current as alpha changes
  std::vector<double> field(n, 0.0);
  std::vector<double> avg(n, 0.0);
  BinaryScorer best;
  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  std::uint64_t t = 0;
  auto objective = [&](std::span<const double> coef) {
    double reg = 0.0, hinge = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (coef[i] == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (coef[j] != 0.0) reg += coef[i] * coef[j] * (gram[i][j] + 1.0);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      double f = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (coef[j] != 0.0) f += coef[j] * (gram[i][j] + 1.0);
      }
      hinge += std::max(0.0, 1.0 - sign[i] * f);
    }
    return 0.5 * lambda * reg + hinge / static_cast<double>(n);
  };
  std::vector<double> coef(n);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(perm);
    for (auto i : perm) {
      ++t;
      const double f = field[i] / (lambda * static_cast<double>(t));
      if (sign[i] * f < 1.0) {
        alpha[i] += 1.0;
        for (std::size_t j = 0; j < n; ++j) field[j] += sign[i] * (gram[i][j] + 1.0);
      }
    }
    const double inv = 1.0 / (lambda * static_cast<double>(t));
    for (std::size_t j = 0; j < n; ++j) coef[j] = alpha[j] * sign[j] * inv;
    const double k = static_cast<double>(epoch + 1);
    for (std::size_t j = 0; j < n; ++j) avg[j] += (coef[j] - avg[j]) / k;
    const double obj_last = objective(coef);
    const double obj_avg = objective(avg);
    const double obj = std::min(obj_last, obj_avg);
    if (obj < best_obj) {
      best_obj = obj;
      best.coefs = obj_last <= obj_avg ? coef : avg;
    }
    best.trace.objective.push_back(obj);
    best.trace.best_so_far.push_back(best_obj);
  }
  best.bias = std::accumulate(best.coefs.begin(), best.coefs.end(), 0.0);
  return best;
}

}  // namespace detail

/// One-vs-rest Pegasos. Each class scorer is trained on +1 for the class and
/// -1 otherwise with step 1/(lambda t) and a seeded permutation per epoch. The
/// returned scorer is the lowest-objective epoch-end iterate, taken over both
/// the last iterate and the running average of epoch-end iterates.
inline SvmModel svm_fit(const SparseMatrix& X, std::span<const ClassId> y, SvmOptions opt = {}) {
  if (!(opt.lambda > 0.0)) throw DomainError("svm_fit: lambda must be positive");
  if (opt.epochs < 1) throw DomainError("svm_fit: epochs must be at least 1");
  if (opt.kernel.type == KernelType::poly && opt.kernel.degree < 1) throw DomainError("svm_fit: degree must be >= 1");
  SvmModel m;
  m.classes = detail::training_classes(y, X.n_rows(), "svm_fit");
  m.lambda = opt.lambda;
  m.kernel = opt.kernel;
  m.n_cols = X.n_cols();
  if (m.kernel.gamma <= 0.0) m.kernel.gamma = 1.0 / static_cast<double>(std::max<std::size_t>(1, X.n_cols()));
  const std::size_t n = X.n_rows();

  std::vector<std::vector<double>> gram;
  if (m.kernel.type != KernelType::linear) {
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) norms[i] = sparse_norm2(X.row(i));
    gram.assign(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) gram[i][j] = gram[j][i] = m.kernel(X.row(i), norms[i], X.row(j), norms[j]);
    }
  }

  std::vector<detail::BinaryScorer> scorers;
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    std::vector<double> sign(n);
    for (std::size_t i = 0; i < n; ++i) sign[i] = y[i] == m.classes[c] ? 1.0 : -1.0;
    const auto seed = mix_seed(opt.seed, static_cast<std::uint64_t>(m.classes[c]));
    scorers.push_back(m.kernel.type == KernelType::linear
                          ? detail::pegasos_linear(X, sign, opt.lambda, opt.epochs, seed)
                          : detail::pegasos_kernel(gram, sign, opt.lambda, opt.epochs, seed));
  }

  if (m.kernel.type == KernelType::linear) {
    for (auto& s : scorers) {
      m.weights.push_back(std::move(s.weights));
      m.bias.push_back(s.bias);
      m.traces.push_back(std::move(s.trace));
    }
    return m;
  }
  // keep only rows some scorer relies on
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::any_of(scorers.begin(), scorers.end(), [&](const auto& s) { return s.coefs[i] != 0.0; })) {
      keep.push_back(i);
    }
  }
  m.support = X.take(keep);
  for (auto& s : scorers) {
    std::vector<double> c;
    for (auto i : keep) c.push_back(s.coefs[i]);
    m.coefs.push_back(std::move(c));
    m.bias.push_back(s.bias);
    m.traces.push_back(std::move(s.trace));
  }
  return m;
}

/// Raw scorer outputs, one row per document and one column per class.
inline std::vector<std::vector<double>> svm_decision(const SvmModel& m, const SparseMatrix& X) {
  if (X.n_cols() != m.n_cols) throw DomainError("svm_predict: feature width differs from the fitted model");
  const std::size_t C = m.classes.size();
  std::vector<std::vector<double>> out(X.n_rows(), m.bias);
  if (m.kernel.type == KernelType::linear) {
    for (std::size_t i = 0; i < X.n_rows(); ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        for (const auto& e : X.row(i)) out[i][c] += m.weights[c][e.col] * e.value;
      }
    }
    return out;
  }
  std::vector<double> sv_norms(m.support.n_rows());
  for (std::size_t j = 0; j < sv_norms.size(); ++j) sv_norms[j] = sparse_norm2(m.support.row(j));
  for (std::size_t i = 0; i < X.n_rows(); ++i) {
    const double qn = sparse_norm2(X.row(i));
    for (std::size_t j = 0; j < m.support.n_rows(); ++j) {
      const double k = m.kernel(X.row(i), qn, m.support.row(j), sv_norms[j]);
      for (std::size_t c = 0; c < C; ++c) out[i][c] += m.coefs[c][j] * k;
    }
  }
  return out;
}

inline std::vector<ClassId> svm_predict(const SvmModel& m, const SparseMatrix& X) {
  std::vector<ClassId> out;
  for (const auto& s : svm_decision(m, X)) out.push_back(m.classes[detail::argmax_first(s)]);
  return out;
}

}  // namespace revmine
