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

// Cross-validation harness: stratified folds, per-class metrics, model
// specs covering every classifier, experiment runs with optional fold
// parallelism, sweeps, disagreement reports and tabular output.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "revmine/classic.hpp"
#include "revmine/corpus.hpp"
#include "revmine/error.hpp"
#include "revmine/format.hpp"
#include "revmine/neural.hpp"
#include "revmine/random.hpp"
#include "revmine/transformer.hpp"
#include "revmine/utf8.hpp"
#include "revmine/vectorizer.hpp"

namespace revmine {

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  /// Test fold of every record.
  std::vector<std::size_t> fold_of;

  std::vector<std::size_t> test_rows(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      if (fold_of[i] == fold) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> train_rows(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      if (fold_of[i] != fold) out.push_back(i);
    }
    return out;
  }

  bool operator==(const FoldPlan&) const = default;
};

/// Each class is shuffled with its own seeded stream and dealt round-robin.
/// The deal continues where the previous class stopped, which keeps fold
/// sizes within one record of each other as well.
inline FoldPlan stratified_kfold(std::span<const ClassId> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw DomainError("stratified_kfold: k must be at least 2");
  std::map<ClassId, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  for (const auto& [c, rows] : members) {
    if (rows.size() < k) {
      throw DomainError("stratified_kfold: class " + std::to_string(c) + " has " + std::to_string(rows.size()) +
                        " records, fewer than k=" + std::to_string(k));
    }
  }
  FoldPlan plan{k, seed, std::vector<std::size_t>(labels.size())};
  std::size_t next = 0;
  for (auto& [c, rows] : members) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(c) + 1));
    rng.shuffle(rows);
    for (auto r : rows) {
      plan.fold_of[r] = next;
      next = (next + 1) % k;
    }
  }
  return plan;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MetricsReport {
  std::vector<ClassId> classes;
  double accuracy = 0.0;
  double f1_macro = 0.0;
  std::vector<ClassMetrics> per_class;
  /// Rows are true classes, columns predicted, both in `classes` order.
  std::vector<std::vector<std::size_t>> confusion;

  nlohmann::ordered_json to_json(Task task) const {
    nlohmann::ordered_json j;
    j["accuracy"] = accuracy;
    j["f1_macro"] = f1_macro;
    auto& pc = j["per_class"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < classes.size(); ++i) {
      nlohmann::ordered_json c;
      c["label"] = class_names(task)[static_cast<std::size_t>(classes[i])];
      c["precision"] = per_class[i].precision;
      c["recall"] = per_class[i].recall;
      c["f1"] = per_class[i].f1;
      c["support"] = per_class[i].support;
      pc.push_back(c);
    }
    j["confusion"] = confusion;
    return j;
  }

  static MetricsReport from_json(const nlohmann::ordered_json& j, Task task) {
    MetricsReport m;
    m.accuracy = j.at("accuracy").get<double>();
    m.f1_macro = j.at("f1_macro").get<double>();
    for (const auto& c : j.at("per_class")) {
      m.classes.push_back(class_id(task, c.at("label").get<std::string>()));
      m.per_class.push_back({c.at("precision").get<double>(), c.at("recall").get<double>(), c.at("f1").get<double>(),
                             c.at("support").get<std::size_t>()});
    }
    m.confusion = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
    return m;
  }
};

/// One-vs-rest precision, recall and F1 per class; a zero denominator
/// yields 0, and F1 is 0 when precision + recall is 0.
inline MetricsReport compute_metrics(std::span<const ClassId> y_true, std::span<const ClassId> y_pred,
                                     std::span<const ClassId> class_order) {
  if (y_true.size() != y_pred.size()) {
    throw DomainError("compute_metrics: " + std::to_string(y_true.size()) + " true labels vs " +
                      std::to_string(y_pred.size()) + " predictions");
  }
  if (y_true.empty()) throw DomainError("compute_metrics: no records");
  if (class_order.empty()) throw DomainError("compute_metrics: empty class order");
  MetricsReport m;
  m.classes.assign(class_order.begin(), class_order.end());
  const std::size_t C = m.classes.size();
  auto index = [&](ClassId c) {
    const auto it = std::find(m.classes.begin(), m.classes.end(), c);
    if (it == m.classes.end()) throw DomainError("compute_metrics: label " + std::to_string(c) + " not in class order");
    return static_cast<std::size_t>(it - m.classes.begin());
  };
  m.confusion.assign(C, std::vector<std::size_t>(C, 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) ++m.confusion[index(y_true[i])][index(y_pred[i])];
  std::size_t diag = 0;
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t row = 0, col = 0;
    for (std::size_t o = 0; o < C; ++o) {
      row += m.confusion[c][o];
      col += m.confusion[o][c];
    }
    const auto tp = static_cast<double>(m.confusion[c][c]);
    diag += m.confusion[c][c];
    ClassMetrics cm;
    cm.support = row;
    cm.precision = col ? tp / static_cast<double>(col) : 0.0;
    cm.recall = row ? tp / static_cast<double>(row) : 0.0;
    cm.f1 = cm.precision + cm.recall > 0.0 ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall) : 0.0;
    m.per_class.push_back(cm);
    m.f1_macro += cm.f1;
  }
  m.f1_macro /= static_cast<double>(C);
  m.accuracy = static_cast<double>(diag) / static_cast<double>(y_true.size());
  return m;
}

/// Mean and sample standard deviation; the values are sorted first so the
/// result does not depend on their order.
inline std::pair<double, double> mean_std(std::vector<double> v) {
  if (v.empty()) return {0.0, 0.0};
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  const double mean = s / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

enum class ModelKind { majority, naive_bayes, knn, svm, neural, transformer };

inline std::string_view model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::majority:
      return "majority";
    case ModelKind::naive_bayes:
      return "naive_bayes";
    case ModelKind::knn:
      return "knn";
    case ModelKind::svm:
      return "svm";
    case ModelKind::neural:
      return "neural";
    case ModelKind::transformer:
      return "transformer";
  }
  return "majority";
}

/// A classifier with its full configuration. Feature settings apply to the
/// word vocabulary used by the classic models and the word-level networks.
struct ModelSpec {
  ModelKind kind = ModelKind::majority;
  /// Display name; empty means derived from the kind.
  std::string id;
  std::size_t min_df = 1;
  std::optional<std::size_t> max_features;
  double nb_alpha = 1.0;
  bool nb_on_tfidf = false;
  std::size_t knn_k = 5;
  SvmOptions svm;
  NeuralConfig neural;
  EncoderConfig encoder;

  std::string name() const {
    if (!id.empty()) return id;
    if (kind == ModelKind::neural) return std::string(arch_name(neural.arch));
    if (kind == ModelKind::svm) return "svm_" + std::string(kernel_name(svm.kernel.type));
    return std::string(model_kind_name(kind));
  }

  bool has_epochs() const { return kind == ModelKind::neural || kind == ModelKind::transformer; }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = model_kind_name(kind);
    if (!id.empty()) j["id"] = id;
    switch (kind) {
      case ModelKind::majority:
        break;
      case ModelKind::naive_bayes:
        j["alpha"] = nb_alpha;
        j["nb_on_tfidf"] = nb_on_tfidf;
        break;
      case ModelKind::knn:
        j["k"] = knn_k;
        break;
      case ModelKind::svm:
        j["kernel"] = kernel_name(svm.kernel.type);
        j["lambda"] = svm.lambda;
        j["epochs"] = svm.epochs;
        j["seed"] = svm.seed;
        j["gamma"] = svm.kernel.gamma;
        j["degree"] = svm.kernel.degree;
        j["coef0"] = svm.kernel.coef0;
        break;
      case ModelKind::neural: {
        const auto fields = neural.to_json();
        for (auto it = fields.begin(); it != fields.end(); ++it) j[it.key()] = it.value();
        break;
      }
      case ModelKind::transformer: {
        const auto fields = encoder.to_json();
        for (auto it = fields.begin(); it != fields.end(); ++it) j[it.key()] = it.value();
        break;
      }
    }
    const bool word_features = kind == ModelKind::naive_bayes || kind == ModelKind::knn || kind == ModelKind::svm ||
                               (kind == ModelKind::neural && neural.arch != Arch::char_cnn);
    if (word_features) {
      j["min_df"] = min_df;
      if (max_features) j["max_features"] = *max_features;
    }
    return j;
  }

  /// Reads a spec object; `path` prefixes field names in errors.
  static ModelSpec from_json(const nlohmann::json& j, const std::string& path = "model") {
    if (!j.is_object()) throw ConfigError(path, "must be an object");
    const auto field = [&](const std::string& k) { return path + "." + k; };
    ModelSpec s;
    if (!j.contains("kind")) throw ConfigError(field("kind"), "missing");
    const auto kind = j["kind"].is_string() ? j["kind"].get<std::string>() : std::string();
    bool known = false;
    for (auto k : {ModelKind::majority, ModelKind::naive_bayes, ModelKind::knn, ModelKind::svm, ModelKind::neural,
                   ModelKind::transformer}) {
      if (model_kind_name(k) == kind) {
        s.kind = k;
        known = true;
      }
    }
    if (!known) throw ConfigError(field("kind"), "unknown model kind '" + kind + "'");
    nlohmann::json rest = nlohmann::json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const auto& v = it.value();
      try {
        if (k == "kind") continue;
        if (k == "id") {
          s.id = v.get<std::string>();
        } else if (k == "min_df") {
          s.min_df = v.get<std::size_t>();
          if (s.min_df < 1) throw DomainError("must be at least 1");
        } else if (k == "max_features") {
          if (!v.is_null()) s.max_features = v.get<std::size_t>();
        } else {
          rest[k] = v;
        }
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(field(k), std::string("wrong type: ") + e.what());
      } catch (const DomainError& e) {
        throw ConfigError(field(k), e.what());
      }
    }
    if (s.kind == ModelKind::neural) {
      s.neural = NeuralConfig::from_json(rest, path);
      return s;
    }
    if (s.kind == ModelKind::transformer) {
      s.encoder = EncoderConfig::from_json(rest, path);
      return s;
    }
    for (auto it = rest.begin(); it != rest.end(); ++it) {
      const std::string& k = it.key();
      const auto& v = it.value();
      try {
        if (s.kind == ModelKind::naive_bayes && k == "alpha") {
          s.nb_alpha = v.get<double>();
          if (!(s.nb_alpha > 0.0)) throw DomainError("must be positive");
        } else if (s.kind == ModelKind::naive_bayes && k == "nb_on_tfidf") {
          s.nb_on_tfidf = v.get<bool>();
        } else if (s.kind == ModelKind::knn && k == "k") {
          s.knn_k = v.get<std::size_t>();
          if (s.knn_k < 1) throw DomainError("must be at least 1");
        } else if (s.kind == ModelKind::svm && k == "kernel") {
          s.svm.kernel.type = parse_kernel(v.get<std::string>());
        } else if (s.kind == ModelKind::svm && k == "lambda") {
          s.svm.lambda = v.get<double>();
          if (!(s.svm.lambda > 0.0)) throw DomainError("must be positive");
        } else if (s.kind == ModelKind::svm && k == "epochs") {
          s.svm.epochs = v.get<int>();
          if (s.svm.epochs < 1) throw DomainError("must be at least 1");
        } else if (s.kind == ModelKind::svm && k == "seed") {
          s.svm.seed = v.get<std::uint64_t>();
        } else if (s.kind == ModelKind::svm && k == "gamma") {
          s.svm.kernel.gamma = v.get<double>();
          if (s.svm.kernel.gamma < 0.0) throw DomainError("must be non-negative");
        } else if (s.kind == ModelKind::svm && k == "degree") {
          s.svm.kernel.degree = v.get<int>();
          if (s.svm.kernel.degree < 1) throw DomainError("must be at least 1");
        } else if (s.kind == ModelKind::svm && k == "coef0") {
          s.svm.kernel.coef0 = v.get<double>();
        } else {
          throw DomainError("unknown field for " + kind);
        }
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(field(k), std::string("wrong type: ") + e.what());
      } catch (const DomainError& e) {
        throw ConfigError(field(k), e.what());
      }
    }
    return s;
  }
};

/// Vocabulary and training matrix of one fold, built from the training
/// rows alone. The matrix holds TF-IDF rows, or raw counts for Naive Bayes
/// unless nb_on_tfidf is set.
struct FoldFeatures {
  Vocabulary vocab;
  SparseMatrix train;
};

inline TokenDocs select_docs(const Dataset& ds, std::span<const std::size_t> rows) {
  TokenDocs out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(ds.reviews().at(r).tokens);
  return out;
}

inline SparseMatrix features_for(const ModelSpec& spec, const Vocabulary& vocab, const TokenDocs& docs) {
  if (spec.kind == ModelKind::naive_bayes && !spec.nb_on_tfidf) return count_transform(vocab, docs);
  return tfidf_transform(vocab, docs);
}

inline FoldFeatures fit_features(const Dataset& ds, std::span<const std::size_t> train_rows, const ModelSpec& spec) {
  const auto docs = select_docs(ds, train_rows);
  FoldFeatures f{build_vocabulary(docs, spec.min_df, spec.max_features), SparseMatrix(0, 0)};
  f.train = features_for(spec, f.vocab, docs);
  return f;
}

struct FoldOutcome {
  std::vector<ClassId> predictions;
  std::optional<double> seconds_per_epoch;
};

namespace detail {

inline std::vector<std::string> joined_texts(const TokenDocs& docs) {
  std::vector<std::string> out;
  for (const auto& d : docs) {
    std::string s;
    for (const auto& t : d) {
      if (!s.empty()) s += ' ';
      s += t;
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline ClassId majority_class(std::span<const ClassId> y) {
  std::map<ClassId, std::size_t> counts;
  for (auto c : y) ++counts[c];
  ClassId best = counts.begin()->first;
  for (auto& [c, n] : counts) {
    if (n > counts[best]) best = c;
  }
  return best;
}

}  // namespace detail

/// Trains on `train_rows` and predicts `test_rows`. Seeds of stochastic
/// models are mixed with the fold index so folds draw different streams.
inline FoldOutcome run_fold(const Dataset& ds, const ModelSpec& spec, std::span<const std::size_t> train_rows,
                            std::span<const std::size_t> test_rows, std::size_t fold) {
  if (train_rows.empty() || test_rows.empty()) throw DomainError("run_fold: empty split");
  std::vector<ClassId> y_train;
  for (auto r : train_rows) y_train.push_back(ds.labels().at(r));
  FoldOutcome out;
  const auto train_docs = select_docs(ds, train_rows);
  const auto test_docs = select_docs(ds, test_rows);
  switch (spec.kind) {
    case ModelKind::majority:
      out.predictions.assign(test_rows.size(), detail::majority_class(y_train));
      return out;
    case ModelKind::naive_bayes:
    case ModelKind::knn:
    case ModelKind::svm: {
      const auto f = fit_features(ds, train_rows, spec);
      const auto X_test = features_for(spec, f.vocab, test_docs);
      if (spec.kind == ModelKind::naive_bayes) {
        out.predictions = nb_predict(nb_fit(f.train, y_train, spec.nb_alpha), X_test);
      } else if (spec.kind == ModelKind::knn) {
        out.predictions = knn_predict(knn_fit(f.train, y_train, spec.knn_k), X_test);
      } else {
        auto opt = spec.svm;
        opt.seed = mix_seed(opt.seed, fold);
        out.predictions = svm_predict(svm_fit(f.train, y_train, opt), X_test);
      }
      return out;
    }
    case ModelKind::neural: {
      auto cfg = spec.neural;
      cfg.seed = mix_seed(cfg.seed, fold);
      const std::size_t k = n_classes(ds.task());
      std::vector<ClassId> all_y(y_train);
      if (cfg.arch == Arch::char_cnn) {
        const auto alphabet = CharAlphabet::default_alphabet();
        const auto tr = detail::joined_texts(train_docs), te = detail::joined_texts(test_docs);
        const auto X = encode_chars(tr, alphabet, cfg.maxlen);
        NeuralModel m(cfg, k, alphabet.size());
        out.seconds_per_epoch = fit(m, X, std::span<const ClassId>(all_y)).mean_seconds_per_epoch();
        out.predictions = m.predict(encode_chars(te, alphabet, cfg.maxlen)).labels;
        return out;
      }
      const auto vocab = build_vocabulary(train_docs, spec.min_df, spec.max_features);
      const auto X = encode_sequences(vocab, train_docs, cfg.maxlen);
      auto m = build_model(cfg, k, vocab);
      out.seconds_per_epoch = fit(m, X, std::span<const ClassId>(all_y)).mean_seconds_per_epoch();
      out.predictions = m.predict(encode_sequences(vocab, test_docs, cfg.maxlen)).labels;
      return out;
    }
    case ModelKind::transformer: {
      auto cfg = spec.encoder;
      cfg.seed = mix_seed(cfg.seed, fold);
      SubwordVocab vocab;
      try {
        vocab = train_subword_vocab(train_docs, cfg.vocab_size);
      } catch (const DomainError& e) {
        throw ConfigError("model.vocab_size", e.what());
      }
      const auto X = encode(vocab, train_docs, cfg.maxlen);
      TransformerModel m(cfg, vocab, n_classes(ds.task()));
      out.seconds_per_epoch = fit(m, X, std::span<const ClassId>(y_train)).mean_seconds_per_epoch();
      out.predictions = m.predict(encode(m.vocab(), test_docs, cfg.maxlen)).labels;
      return out;
    }
  }
  return out;
}

struct ExperimentResult {
  std::string model_id;
  Task task = Task::sentiment;
  nlohmann::ordered_json config;
  FoldPlan plan;
  std::vector<MetricsReport> folds;
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double f1_macro_mean = 0.0, f1_macro_std = 0.0;
  /// Out-of-fold prediction for every record.
  std::vector<ClassId> predictions;
  std::vector<std::string> record_ids;
  /// Mean over folds of the mean training seconds per epoch.
  std::optional<double> seconds_per_epoch;
  std::vector<double> fold_seconds_per_epoch;
  /// Where the dataset came from, when known.
  std::string dataset_path;

  /// With timing=false the output depends only on data, config and seeds.
  nlohmann::ordered_json to_json(bool timing = true) const {
    nlohmann::ordered_json j;
    j["model"] = model_id;
    j["task"] = task_name(task);
    if (!dataset_path.empty()) j["dataset"] = dataset_path;
    j["config"] = config;
    j["cv"] = {{"k", plan.k}, {"seed", plan.seed}, {"fold_of", plan.fold_of}};
    j["accuracy"] = {{"mean", accuracy_mean}, {"std", accuracy_std}};
    j["f1_macro"] = {{"mean", f1_macro_mean}, {"std", f1_macro_std}};
    auto& fj = j["folds"] = nlohmann::ordered_json::array();
    for (const auto& f : folds) fj.push_back(f.to_json(task));
    j["record_ids"] = record_ids;
    j["predictions"] = predictions;
    if (timing && seconds_per_epoch) {
      j["timing"] = {{"seconds_per_epoch", *seconds_per_epoch}, {"per_fold", fold_seconds_per_epoch}};
    }
    return j;
  }

  static ExperimentResult from_json(const nlohmann::ordered_json& j) {
    try {
      ExperimentResult r;
      r.model_id = j.at("model").get<std::string>();
      r.task = parse_task(j.at("task").get<std::string>());
      if (j.contains("dataset")) r.dataset_path = j["dataset"].get<std::string>();
      r.config = j.at("config");
      r.plan.k = j.at("cv").at("k").get<std::size_t>();
      r.plan.seed = j.at("cv").at("seed").get<std::uint64_t>();
      r.plan.fold_of = j.at("cv").at("fold_of").get<std::vector<std::size_t>>();
      r.accuracy_mean = j.at("accuracy").at("mean").get<double>();
      r.accuracy_std = j.at("accuracy").at("std").get<double>();
      r.f1_macro_mean = j.at("f1_macro").at("mean").get<double>();
      r.f1_macro_std = j.at("f1_macro").at("std").get<double>();
      for (const auto& f : j.at("folds")) r.folds.push_back(MetricsReport::from_json(f, r.task));
      r.record_ids = j.at("record_ids").get<std::vector<std::string>>();
      r.predictions = j.at("predictions").get<std::vector<ClassId>>();
      if (j.contains("timing")) {
        r.seconds_per_epoch = j["timing"].at("seconds_per_epoch").get<double>();
        r.fold_seconds_per_epoch = j["timing"].at("per_fold").get<std::vector<double>>();
      }
      if (r.predictions.size() != r.plan.fold_of.size() || r.record_ids.size() != r.predictions.size()) {
        throw FormatError("result: predictions, record ids and fold plan differ in length");
      }
      return r;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("result: ") + e.what());
    } catch (const DomainError& e) {
      throw FormatError(std::string("result: ") + e.what());
    }
  }
};

struct RunOptions {
  /// Folds trained at once; 1 runs them in order on the calling thread.
  std::size_t parallel_folds = 1;
};

namespace detail {

[[noreturn]] inline void rethrow_for_fold(std::size_t fold, std::exception_ptr e) {
  const std::string where = "fold " + std::to_string(fold) + ": ";
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError& x) {
    throw ConfigError(x.field(), where + std::string(x.what()).substr(x.field().size() + 2));
  } catch (const FormatError& x) {
    throw FormatError(where + x.what());
  } catch (const DomainError& x) {
    throw DomainError(where + x.what());
  } catch (const std::exception& x) {
    throw std::runtime_error(where + x.what());
  }
}

}  // namespace detail

/// Runs every fold of the plan and aggregates. Metric fields do not depend
/// on parallel_folds.
inline ExperimentResult run_experiment(const Dataset& ds, const ModelSpec& spec, const FoldPlan& plan,
                                       RunOptions opt = {}) {
  if (plan.fold_of.size() != ds.size()) throw DomainError("run_experiment: fold plan does not match the dataset");
  std::vector<FoldOutcome> outcomes(plan.k);
  std::vector<std::exception_ptr> errors(plan.k);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t f = next++; f < plan.k; f = next++) {
      try {
        const auto tr = plan.train_rows(f), te = plan.test_rows(f);
        outcomes[f] = run_fold(ds, spec, tr, te, f);
      } catch (...) {
        errors[f] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(opt.parallel_folds, 1, plan.k);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t f = 0; f < plan.k; ++f) {
    if (errors[f]) detail::rethrow_for_fold(f, errors[f]);
  }

  ExperimentResult r;
  r.model_id = spec.name();
  r.task = ds.task();
  r.config = spec.to_json();
  r.plan = plan;
  r.predictions.assign(ds.size(), 0);
  for (const auto& rev : ds.reviews()) r.record_ids.push_back(rev.id);
  std::vector<ClassId> order(n_classes(ds.task()));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> acc, f1;
  for (std::size_t f = 0; f < plan.k; ++f) {
    const auto te = plan.test_rows(f);
    std::vector<ClassId> truth;
    for (std::size_t i = 0; i < te.size(); ++i) {
      r.predictions[te[i]] = outcomes[f].predictions.at(i);
      truth.push_back(ds.labels()[te[i]]);
    }
    r.folds.push_back(compute_metrics(truth, outcomes[f].predictions, order));
    acc.push_back(r.folds.back().accuracy);
    f1.push_back(r.folds.back().f1_macro);
    if (outcomes[f].seconds_per_epoch) r.fold_seconds_per_epoch.push_back(*outcomes[f].seconds_per_epoch);
  }
  std::tie(r.accuracy_mean, r.accuracy_std) = mean_std(acc);
  std::tie(r.f1_macro_mean, r.f1_macro_std) = mean_std(f1);
  if (!r.fold_seconds_per_epoch.empty()) r.seconds_per_epoch = mean_std(r.fold_seconds_per_epoch).first;
  return r;
}

enum class SweepParam { maxlen, epochs };

inline std::string_view sweep_param_name(SweepParam p) { return p == SweepParam::maxlen ? "maxlen" : "epochs"; }

inline SweepParam parse_sweep_param(std::string_view s) {
  if (s == "maxlen") return SweepParam::maxlen;
  if (s == "epochs") return SweepParam::epochs;
  throw DomainError("unknown sweep parameter '" + std::string(s) + "' (expected maxlen or epochs)");
}

/// One experiment per value over a shared fold plan, in value order.
inline std::vector<ExperimentResult> sweep(const Dataset& ds, const ModelSpec& spec, SweepParam param,
                                           const std::vector<std::size_t>& values, const FoldPlan& plan,
                                           RunOptions opt = {}) {
  if (values.empty()) throw DomainError("sweep: no values");
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] <= values[i - 1]) throw DomainError("sweep: values must be strictly increasing");
  }
  if (!spec.has_epochs()) {
    throw DomainError("sweep: " + std::string(sweep_param_name(param)) + " applies to neural and transformer models");
  }
  std::vector<ExperimentResult> out;
  for (auto v : values) {
    auto s = spec;
    if (v < 1) throw DomainError("sweep: values must be positive");
    if (param == SweepParam::maxlen) {
      s.neural.maxlen = v;
      s.encoder.maxlen = v;
    } else {
      s.neural.epochs = static_cast<int>(v);
      s.encoder.epochs = static_cast<int>(v);
    }
    try {
      s.neural.validate();
      s.encoder.validate();
    } catch (const ConfigError& e) {
      throw DomainError("sweep value " + std::to_string(v) + ": " + e.what());
    }
    out.push_back(run_experiment(ds, s, plan, opt));
  }
  return out;
}

struct Disagreement {
  std::size_t fold = 0;
  std::size_t record = 0;
  std::string review_id;
  std::string excerpt;
  ClassId truth = 0;
  ClassId pred_a = 0;
  ClassId pred_b = 0;
};

/// First `budget` characters of a text, UTF-8 safe.
inline std::string excerpt(std::string_view text, std::size_t budget) {
  const auto cps = utf8::decode(text);
  if (cps.size() <= budget) return std::string(text);
  return utf8::encode(std::u32string_view(cps).substr(0, budget));
}

/// Records whose out-of-fold predictions differ, by fold then record index.
inline std::vector<Disagreement> disagreement_report(const ExperimentResult& a, const ExperimentResult& b,
                                                     const Dataset& ds, std::size_t excerpt_chars = 160) {
  if (!(a.plan == b.plan)) throw DomainError("disagreement_report: results use different fold plans");
  if (a.predictions.size() != ds.size() || b.predictions.size() != ds.size()) {
    throw DomainError("disagreement_report: results do not match the dataset");
  }
  std::vector<Disagreement> out;
  for (std::size_t f = 0; f < a.plan.k; ++f) {
    for (auto r : a.plan.test_rows(f)) {
      if (a.predictions[r] == b.predictions[r]) continue;
      const auto& rev = ds.reviews()[r];
      out.push_back({f, r, rev.id, excerpt(rev.raw_text, excerpt_chars), ds.labels()[r], a.predictions[r],
                     b.predictions[r]});
    }
  }
  return out;
}

inline void write_disagreements(const std::vector<Disagreement>& rows, const ExperimentResult& a,
                                const ExperimentResult& b, std::ostream& os) {
  os << "# disagreements: " << a.model_id << " vs " << b.model_id << " (" << rows.size() << " records)\n";
  const auto names = class_names(a.task);
  for (const auto& d : rows) {
    os << "\nfold " << d.fold << ", record " << d.record << ", id " << d.review_id << "\n";
    os << "  true: " << names[static_cast<std::size_t>(d.truth)] << "  " << a.model_id << ": "
       << names[static_cast<std::size_t>(d.pred_a)] << "  " << b.model_id << ": "
       << names[static_cast<std::size_t>(d.pred_b)] << "\n";
    os << "  text: " << d.excerpt << "\n";
  }
}

inline void write_results_csv(const std::vector<ExperimentResult>& results, std::ostream& os) {
  os << "model,accuracy,accuracy_std,f1_macro,f1_macro_std\n";
  for (const auto& r : results) {
    os << r.model_id << ',' << fixed(r.accuracy_mean, 6) << ',' << fixed(r.accuracy_std, 6) << ','
       << fixed(r.f1_macro_mean, 6) << ',' << fixed(r.f1_macro_std, 6) << '\n';
  }
}

inline void write_results_markdown(const std::vector<ExperimentResult>& results, std::ostream& os) {
  os << "| model | accuracy | f1_macro |\n|---|---|---|\n";
  for (const auto& r : results) {
    os << "| " << r.model_id << " | " << fixed(r.accuracy_mean, 3) << " ± " << fixed(r.accuracy_std, 3) << " | "
       << fixed(r.f1_macro_mean, 3) << " ± " << fixed(r.f1_macro_std, 3) << " |\n";
  }
}

/// Empty seconds_per_epoch cells for models that have no epochs.
inline void write_sweep_csv(const std::vector<std::size_t>& values, const std::vector<ExperimentResult>& results,
                            std::ostream& os) {
  if (values.size() != results.size()) throw DomainError("write_sweep_csv: one result per value expected");
  os << "value,accuracy,accuracy_std,f1_macro,f1_macro_std,seconds_per_epoch\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& r = results[i];
    os << values[i] << ',' << fixed(r.accuracy_mean, 6) << ',' << fixed(r.accuracy_std, 6) << ','
       << fixed(r.f1_macro_mean, 6) << ',' << fixed(r.f1_macro_std, 6) << ','
       << (r.seconds_per_epoch ? fixed(*r.seconds_per_epoch, 6) : std::string()) << '\n';
  }
}

}  // namespace revmine
