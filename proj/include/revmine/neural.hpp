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

// Sequence classifiers over index matrices: word and character CNNs, LSTM
// and bidirectional LSTM, each ending in a dense head. Two classes use a
// single sigmoid unit whose probability is that of the second class; more
// classes use softmax.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "revmine/checkpoint.hpp"
#include "revmine/corpus.hpp"
#include "revmine/embeddings.hpp"
#include "revmine/error.hpp"
#include "revmine/random.hpp"
#include "revmine/tensor.hpp"
#include "revmine/vectorizer.hpp"

namespace revmine {

enum class Arch { word_cnn, char_cnn, lstm, bilstm };

inline std::string_view arch_name(Arch a) {
  switch (a) {
    case Arch::word_cnn:
      return "word_cnn";
    case Arch::char_cnn:
      return "char_cnn";
    case Arch::lstm:
      return "lstm";
    case Arch::bilstm:
      return "bilstm";
  }
  return "word_cnn";
}

inline Arch parse_arch(std::string_view s) {
  for (Arch a : {Arch::word_cnn, Arch::char_cnn, Arch::lstm, Arch::bilstm}) {
    if (arch_name(a) == s) return a;
  }
  throw DomainError("unknown arch '" + std::string(s) + "'");
}

/// How the embedding layer is initialized.
enum class EmbeddingInit { random, pretrained };

struct NeuralConfig {
  Arch arch = Arch::word_cnn;
  /// Sequence length in tokens, or in characters for char_cnn.
  std::size_t maxlen = 50;
  EmbeddingInit embedding = EmbeddingInit::random;
  std::size_t embedding_dim = 50;
  /// Vector file for EmbeddingInit::pretrained.
  std::string pretrained_path;
  bool trainable_embeddings = true;
  std::vector<std::size_t> filter_sizes{3, 4, 5};
  std::size_t n_filters = 100;
  std::size_t lstm_units = 64;
  double dropout = 0.5;
  /// Also drop units of the pooled CNN feature vector.
  bool dropout_on_pooled = false;
  int epochs = 5;
  std::size_t batch_size = 32;
  double lr = 0.01;
  std::uint64_t seed = 1;
  /// Share of the training rows held out for per-epoch validation.
  double validation_fraction = 0.1;

  /// Defaults for an architecture; char_cnn reads 512 characters through
  /// 16-dimensional embeddings.
  static NeuralConfig defaults(Arch arch) {
    NeuralConfig c;
    c.arch = arch;
    if (arch == Arch::char_cnn) {
      c.maxlen = 512;
      c.embedding_dim = 16;
    }
    return c;
  }

  bool is_cnn() const { return arch == Arch::word_cnn || arch == Arch::char_cnn; }

  void validate() const {
    if (maxlen < 1) throw ConfigError("maxlen", "must be at least 1");
    if (embedding_dim < 1 && embedding == EmbeddingInit::random) throw ConfigError("embedding_dim", "must be positive");
    if (embedding == EmbeddingInit::pretrained && pretrained_path.empty()) {
      throw ConfigError("pretrained_path", "required for pretrained embeddings");
    }
    if (embedding == EmbeddingInit::pretrained && arch == Arch::char_cnn) {
      throw ConfigError("embedding", "char_cnn learns its own character embeddings");
    }
    if (is_cnn()) {
      if (filter_sizes.empty()) throw ConfigError("filter_sizes", "must not be empty");
      for (auto w : filter_sizes) {
        if (w < 1) throw ConfigError("filter_sizes", "sizes must be positive");
        if (w > maxlen) {
          throw ConfigError("maxlen", "must be at least the largest filter size (" + std::to_string(w) + ")");
        }
      }
      if (n_filters < 1) throw ConfigError("n_filters", "must be positive");
    } else if (lstm_units < 1) {
      throw ConfigError("lstm_units", "must be positive");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout", "must be in [0, 1)");
    if (epochs < 1) throw ConfigError("epochs", "must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size", "must be at least 1");
    if (!(lr > 0.0)) throw ConfigError("lr", "must be positive");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
      throw ConfigError("validation_fraction", "must be in [0, 1)");
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["arch"] = arch_name(arch);
    j["maxlen"] = maxlen;
    j["embedding"] = embedding == EmbeddingInit::random ? "random" : "pretrained";
    j["embedding_dim"] = embedding_dim;
    if (!pretrained_path.empty()) j["pretrained_path"] = pretrained_path;
    j["trainable_embeddings"] = trainable_embeddings;
    j["filter_sizes"] = filter_sizes;
    j["n_filters"] = n_filters;
    j["lstm_units"] = lstm_units;
    j["dropout"] = dropout;
    j["dropout_on_pooled"] = dropout_on_pooled;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["lr"] = lr;
    j["seed"] = seed;
    j["validation_fraction"] = validation_fraction;
    return j;
  }

  /// Unknown keys are rejected; `path` prefixes field names in errors.
  static NeuralConfig from_json(const nlohmann::json& j, const std::string& path = "") {
    if (!j.is_object()) throw ConfigError(path.empty() ? "model" : path, "must be an object");
    const auto field = [&](const std::string& k) { return path.empty() ? k : path + "." + k; };
    NeuralConfig c;
    if (j.contains("arch")) {
      try {
        c = defaults(parse_arch(j["arch"].get<std::string>()));
      } catch (const std::exception& e) {
        throw ConfigError(field("arch"), e.what());
      }
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const auto& v = it.value();
      try {
        if (k == "arch" || k == "kind") {
          continue;
        } else if (k == "maxlen") {
          c.maxlen = v.get<std::size_t>();
        } else if (k == "embedding") {
          const auto s = v.get<std::string>();
          if (s != "random" && s != "pretrained") throw DomainError("expected 'random' or 'pretrained'");
          c.embedding = s == "random" ? EmbeddingInit::random : EmbeddingInit::pretrained;
        } else if (k == "embedding_dim") {
          c.embedding_dim = v.get<std::size_t>();
        } else if (k == "pretrained_path") {
          c.pretrained_path = v.get<std::string>();
        } else if (k == "trainable_embeddings") {
          c.trainable_embeddings = v.get<bool>();
        } else if (k == "filter_sizes") {
          c.filter_sizes = v.get<std::vector<std::size_t>>();
        } else if (k == "n_filters") {
          c.n_filters = v.get<std::size_t>();
        } else if (k == "lstm_units") {
          c.lstm_units = v.get<std::size_t>();
        } else if (k == "dropout") {
          c.dropout = v.get<double>();
        } else if (k == "dropout_on_pooled") {
          c.dropout_on_pooled = v.get<bool>();
        } else if (k == "epochs") {
          c.epochs = v.get<int>();
        } else if (k == "batch_size") {
          c.batch_size = v.get<std::size_t>();
        } else if (k == "lr") {
          c.lr = v.get<double>();
        } else if (k == "seed") {
          c.seed = v.get<std::uint64_t>();
        } else if (k == "validation_fraction") {
          c.validation_fraction = v.get<double>();
        } else {
          throw DomainError("unknown field");
        }
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(field(k), std::string("wrong type: ") + e.what());
      } catch (const DomainError& e) {
        throw ConfigError(field(k), e.what());
      }
    }
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(field(e.field()), std::string(e.what()).substr(e.field().size() + 2));
    }
    return c;
  }
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> train_accuracy;
  std::vector<double> val_loss;
  std::vector<double> val_accuracy;
  std::vector<double> seconds;

  double mean_seconds_per_epoch() const {
    double s = 0.0;
    for (double x : seconds) s += x;
    return seconds.empty() ? 0.0 : s / static_cast<double>(seconds.size());
  }
};

struct Prediction {
  std::vector<ClassId> labels;
  /// Row-major [n, n_classes].
  std::vector<double> probs;
  std::size_t n_classes = 0;
};

namespace detail {

inline tensor::Tensor glorot(tensor::Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(tensor::numel(shape));
  for (auto& x : v) x = rng.uniform(-limit, limit);
  return tensor::Tensor::from(std::move(shape), std::move(v), true);
}

inline tensor::Tensor zeros_param(tensor::Shape shape) { return tensor::Tensor::zeros(std::move(shape), true); }

// Collects the ids of the selected rows into one flat batch.
inline std::vector<std::int32_t> gather_ids(const IndexMatrix& X, std::span<const std::size_t> rows) {
  std::vector<std::int32_t> ids;
  ids.reserve(rows.size() * X.maxlen);
  for (auto r : rows) {
    auto row = X.row(r);
    ids.insert(ids.end(), row.begin(), row.end());
  }
  return ids;
}

/// Class probabilities and labels from head outputs.
inline void decode_head(std::span<const double> out, std::size_t n_classes, Prediction& p) {
  if (n_classes == 2) {
    for (double z : out) {
      const double q = tensor::sigmoid(z);
      p.probs.push_back(1.0 - q);
      p.probs.push_back(q);
      p.labels.push_back(q > 0.5 ? 1 : 0);
    }
    return;
  }
  for (std::size_t r = 0; r < out.size(); r += n_classes) {
    const double mx = *std::max_element(out.begin() + static_cast<std::ptrdiff_t>(r),
                                        out.begin() + static_cast<std::ptrdiff_t>(r + n_classes));
    double s = 0.0;
    std::vector<double> e(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) s += e[c] = std::exp(out[r + c] - mx);
    std::size_t best = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      e[c] /= s;
      if (e[c] > e[best]) best = c;
    }
    p.probs.insert(p.probs.end(), e.begin(), e.end());
    p.labels.push_back(static_cast<ClassId>(best));
  }
}

}  // namespace detail

class NeuralModel {
 public:
  /// Fresh weights for `n_classes` outputs over ids below `vocab_size`. A
  /// pretrained table, when given, supplies the embedding rows and width.
  NeuralModel(NeuralConfig config, std::size_t n_classes, std::size_t vocab_size,
              const EmbeddingTable* pretrained = nullptr)
      : cfg_(std::move(config)), n_classes_(n_classes) {
    cfg_.validate();
    if (n_classes < 2) throw DomainError("build_model: need at least two classes");
    if (vocab_size < 2) throw DomainError("build_model: vocabulary too small");
    Rng rng(mix_seed(cfg_.seed, 1));
    if (pretrained) {
      if (pretrained->size() != vocab_size) throw DomainError("build_model: embedding table does not match vocabulary");
      cfg_.embedding_dim = pretrained->dim;
      embed_ = pretrained->to_tensor(cfg_.trainable_embeddings);
    } else {
      std::vector<double> v(vocab_size * cfg_.embedding_dim);
      for (auto& x : v) x = rng.uniform(-0.05, 0.05);
      embed_ = tensor::Tensor::from({vocab_size, cfg_.embedding_dim}, std::move(v), cfg_.trainable_embeddings);
    }
    const std::size_t D = cfg_.embedding_dim;
    if (cfg_.is_cnn()) {
      for (auto w : cfg_.filter_sizes) {
        conv_w_.push_back(detail::glorot({w * D, cfg_.n_filters}, w * D, cfg_.n_filters, rng));
        conv_b_.push_back(detail::zeros_param({cfg_.n_filters}));
      }
    } else {
      const std::size_t H = cfg_.lstm_units;
      for (int dir = 0; dir < (cfg_.arch == Arch::bilstm ? 2 : 1); ++dir) {
        Direction d;
        d.input = detail::glorot({D, 4 * H}, D, 4 * H, rng);
        d.recurrent = detail::glorot({H, 4 * H}, H, 4 * H, rng);
        d.bias = detail::zeros_param({4 * H});
        // forget gate starts open
        for (std::size_t j = H; j < 2 * H; ++j) d.bias.values()[j] = 1.0;
        lstm_.push_back(std::move(d));
      }
    }
    head_w_ = detail::glorot({feature_width(), head_width()}, feature_width(), head_width(), rng);
    head_b_ = detail::zeros_param({head_width()});
  }

  const NeuralConfig& config() const { return cfg_; }
  std::size_t n_classes() const { return n_classes_; }
  std::size_t vocab_size() const { return embed_.dim(0); }

  /// Width of the vector entering the dense head.
  std::size_t feature_width() const {
    if (cfg_.is_cnn()) return cfg_.filter_sizes.size() * cfg_.n_filters;
    return cfg_.lstm_units * (cfg_.arch == Arch::bilstm ? 2 : 1);
  }

  std::size_t head_width() const { return n_classes_ == 2 ? 1 : n_classes_; }

  /// Every weight tensor with a stable name, trainable or not.
  std::vector<tensor::NamedTensor> named_parameters() const {
    std::vector<tensor::NamedTensor> out{{"embedding", embed_}};
    for (std::size_t i = 0; i < conv_w_.size(); ++i) {
      const auto w = std::to_string(cfg_.filter_sizes[i]);
      out.push_back({"conv" + w + ".weight", conv_w_[i]});
      out.push_back({"conv" + w + ".bias", conv_b_[i]});
    }
    for (std::size_t d = 0; d < lstm_.size(); ++d) {
      const std::string p = d == 0 ? "lstm_fwd" : "lstm_bwd";
      out.push_back({p + ".input", lstm_[d].input});
      out.push_back({p + ".recurrent", lstm_[d].recurrent});
      out.push_back({p + ".bias", lstm_[d].bias});
    }
    out.push_back({"head.weight", head_w_});
    out.push_back({"head.bias", head_b_});
    return out;
  }

  std::vector<tensor::Tensor> trainable() const {
    std::vector<tensor::Tensor> out;
    for (auto& [name, t] : named_parameters()) {
      if (t.requires_grad()) out.push_back(t);
    }
    return out;
  }

  /// Head outputs [rows, head_width] for the selected rows.
  tensor::Tensor forward(const IndexMatrix& X, std::span<const std::size_t> rows, bool train, Rng& dropout_rng) const {
    if (X.maxlen != cfg_.maxlen) {
      throw DomainError("model expects maxlen " + std::to_string(cfg_.maxlen) + ", got " + std::to_string(X.maxlen));
    }
    const std::size_t B = rows.size(), T = X.maxlen;
    const auto ids = detail::gather_ids(X, rows);
    for (auto id : ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size()) throw DomainError("token id outside the vocabulary");
    }
    const auto emb = tensor::embedding_lookup(embed_, ids, {B, T});
    tensor::Tensor features;
    if (cfg_.is_cnn()) {
      std::vector<tensor::Tensor> pooled;
      for (std::size_t i = 0; i < conv_w_.size(); ++i) {
        auto act = tensor::relu(tensor::conv1d(emb, conv_w_[i], conv_b_[i], cfg_.filter_sizes[i]));
        act = tensor::dropout(act, cfg_.dropout, train, dropout_rng);
        pooled.push_back(tensor::max_pool_over_time(act));
      }
      features = pooled.size() == 1 ? pooled[0] : tensor::concat(pooled);
      if (cfg_.dropout_on_pooled) features = tensor::dropout(features, cfg_.dropout, train, dropout_rng);
    } else {
      std::vector<double> mask(B * T);
      for (std::size_t i = 0; i < B * T; ++i) mask[i] = ids[i] == Vocabulary::pad_id ? 0.0 : 1.0;
      std::vector<tensor::Tensor> finals;
      for (std::size_t d = 0; d < lstm_.size(); ++d) finals.push_back(run_lstm(lstm_[d], emb, mask, B, T, d == 1));
      features = finals.size() == 1 ? finals[0] : tensor::concat(finals);
      features = tensor::dropout(features, cfg_.dropout, train, dropout_rng);
    }
    return tensor::add_bias(tensor::matmul(features, head_w_), head_b_);
  }

  /// Mean loss over the selected rows: binary cross-entropy on the sigmoid
  /// unit, or softmax cross-entropy.
  tensor::Tensor loss(const IndexMatrix& X, std::span<const ClassId> y, std::span<const std::size_t> rows, bool train,
                      Rng& dropout_rng) const {
    std::vector<int> targets;
    for (auto r : rows) {
      if (y[r] < 0 || static_cast<std::size_t>(y[r]) >= n_classes_) throw DomainError("label outside the model's classes");
      targets.push_back(y[r]);
    }
    const auto out = forward(X, rows, train, dropout_rng);
    return n_classes_ == 2 ? tensor::binary_cross_entropy_with_logits(out, targets)
                           : tensor::softmax_cross_entropy(out, targets);
  }

  Prediction predict(const IndexMatrix& X, std::size_t batch = 256) const {
    if (X.maxlen != cfg_.maxlen) {
      throw DomainError("model expects maxlen " + std::to_string(cfg_.maxlen) + ", got " + std::to_string(X.maxlen));
    }
    Prediction p;
    p.n_classes = n_classes_;
    Rng unused(0);
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < X.n_rows; start += batch) {
      rows.clear();
      for (std::size_t r = start; r < std::min(X.n_rows, start + batch); ++r) rows.push_back(r);
      const auto out = forward(X, rows, false, unused);
      detail::decode_head(out.values(), n_classes_, p);
    }
    return p;
  }

  void save(const std::string& checkpoint_path) const {
    tensor::save_checkpoint(checkpoint_path, named_parameters());
    std::ofstream side(checkpoint_path + ".json");
    nlohmann::ordered_json j;
    j["n_classes"] = n_classes_;
    j["vocab_size"] = vocab_size();
    j["config"] = cfg_.to_json();
    side << j.dump(2) << '\n';
  }

  static NeuralModel load(const std::string& checkpoint_path) {
    std::ifstream side(checkpoint_path + ".json");
    if (!side) throw FormatError("missing config sidecar for '" + checkpoint_path + "'");
    const auto j = nlohmann::json::parse(side);
    auto cfg = NeuralConfig::from_json(j.at("config"));
    // weights come from the checkpoint, not the vector file
    cfg.embedding = EmbeddingInit::random;
    cfg.pretrained_path.clear();
    NeuralModel m(cfg, j.at("n_classes").get<std::size_t>(), j.at("vocab_size").get<std::size_t>());
    auto params = m.named_parameters();
    tensor::restore_into(tensor::load_checkpoint(checkpoint_path), params);
    return m;
  }

 private:
  struct Direction {
    tensor::Tensor input, recurrent, bias;
  };

  // Gates are packed [input | forget | cell | output]. A position whose
  // token is padding carries the previous state through unchanged, so the
  // returned state is the one after the last real token in reading order.
  tensor::Tensor run_lstm(const Direction& d, const tensor::Tensor& emb, const std::vector<double>& mask,
                          std::size_t B, std::size_t T, bool reverse) const {
    using namespace tensor;
    const std::size_t H = cfg_.lstm_units, D = cfg_.embedding_dim;
    const auto projected = reshape(add_bias(matmul(reshape(emb, {B * T, D}), d.input), d.bias), {B, T * 4 * H});
    auto h = Tensor::zeros({B, H});
    auto c = Tensor::zeros({B, H});
    std::vector<double> m(B);
    for (std::size_t step = 0; step < T; ++step) {
      const std::size_t t = reverse ? T - 1 - step : step;
      for (std::size_t b = 0; b < B; ++b) m[b] = mask[b * T + t];
      if (std::all_of(m.begin(), m.end(), [](double v) { return v == 0.0; })) continue;
      const auto gates = add(slice_last(projected, t * 4 * H, 4 * H), matmul(h, d.recurrent));
      const auto i = sigmoid(slice_last(gates, 0, H));
      const auto f = sigmoid(slice_last(gates, H, H));
      const auto g = tanh(slice_last(gates, 2 * H, H));
      const auto o = sigmoid(slice_last(gates, 3 * H, H));
      const auto c_new = add(mul(f, c), mul(i, g));
      const auto h_new = mul(o, tanh(c_new));
      c = blend_rows(m, c_new, c);
      h = blend_rows(m, h_new, h);
    }
    return h;
  }

  NeuralConfig cfg_;
  std::size_t n_classes_;
  tensor::Tensor embed_;
  std::vector<tensor::Tensor> conv_w_, conv_b_;
  std::vector<Direction> lstm_;
  tensor::Tensor head_w_, head_b_;
};

/// Builds the model for a config, loading pretrained vectors when asked.
inline NeuralModel build_model(const NeuralConfig& config, std::size_t n_classes, const Vocabulary& vocab) {
  if (config.embedding == EmbeddingInit::pretrained) {
    const auto table = load_pretrained(config.pretrained_path, vocab, config.seed);
    return NeuralModel(config, n_classes, vocab.size(), &table);
  }
  return NeuralModel(config, n_classes, vocab.size());
}

/// Seeded split of row indices into (train, validation); the validation
/// share is rounded down and left empty for tiny inputs.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> validation_split(std::size_t n, double fraction,
                                                                                      std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed(seed, 4));
  rng.shuffle(idx);
  auto n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  if (n_val >= n) n_val = 0;
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {train, val};
}

/// Mini-batch Adam over `train_rows` of X for config.epochs epochs. Train
/// loss and accuracy are averaged over the epoch's batches with dropout
/// active; validation metrics use the weights at the end of the epoch.
/// Seconds cover the batch loop only. Any model exposing config() with
/// epochs, batch_size, lr and seed, plus forward(), n_classes() and
/// trainable(), can be trained this way.
template <class Model, class Input>
TrainHistory train(Model& model, const Input& X, std::span<const ClassId> y,
                   std::span<const std::size_t> train_rows, std::span<const std::size_t> val_rows = {}) {
  if (train_rows.empty()) throw DomainError("train: empty training split");
  if (y.size() != X.n_rows) throw DomainError("train: label count differs from row count");
  for (auto c : y) {
    if (c < 0 || static_cast<std::size_t>(c) >= model.n_classes()) throw DomainError("train: label outside the model's classes");
  }
  const auto& cfg = model.config();
  tensor::Adam opt(model.trainable());
  Rng order_rng(mix_seed(cfg.seed, 2));
  Rng dropout_rng(mix_seed(cfg.seed, 3));
  std::vector<std::size_t> order(train_rows.begin(), train_rows.end());
  TrainHistory hist;
  auto score = [&](std::span<const std::size_t> rows, const tensor::Tensor& out) {
    std::size_t hit = 0;
    Prediction p;
    detail::decode_head(out.values(), model.n_classes(), p);
    for (std::size_t i = 0; i < rows.size(); ++i) hit += p.labels[i] == y[rows[i]];
    return hit;
  };
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t hits = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::span<const std::size_t> rows(order.data() + start, std::min(cfg.batch_size, order.size() - start));
      opt.zero_grad();
      std::vector<int> targets;
      for (auto r : rows) targets.push_back(y[r]);
      const auto out = model.forward(X, rows, true, dropout_rng);
      const auto loss = model.n_classes() == 2 ? tensor::binary_cross_entropy_with_logits(out, targets)
                                               : tensor::softmax_cross_entropy(out, targets);
      tensor::backward(loss);
      opt.step(cfg.lr);
      loss_sum += loss.item() * static_cast<double>(rows.size());
      hits += score(rows, out);
    }
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    hist.seconds.push_back(std::max(dt.count(), 1e-9));
    hist.train_loss.push_back(loss_sum / static_cast<double>(order.size()));
    hist.train_accuracy.push_back(static_cast<double>(hits) / static_cast<double>(order.size()));
    if (!val_rows.empty()) {
      Rng unused(0);
      double vloss = 0.0;
      std::size_t vhits = 0;
      for (std::size_t start = 0; start < val_rows.size(); start += 256) {
        const auto rows = val_rows.subspan(start, std::min<std::size_t>(256, val_rows.size() - start));
        const auto out = model.forward(X, rows, false, unused);
        std::vector<int> targets;
        for (auto r : rows) targets.push_back(y[r]);
        const auto loss = model.n_classes() == 2 ? tensor::binary_cross_entropy_with_logits(out, targets)
                                                 : tensor::softmax_cross_entropy(out, targets);
        vloss += loss.item() * static_cast<double>(rows.size());
        vhits += score(rows, out);
      }
      hist.val_loss.push_back(vloss / static_cast<double>(val_rows.size()));
      hist.val_accuracy.push_back(static_cast<double>(vhits) / static_cast<double>(val_rows.size()));
    }
  }
  return hist;
}

/// Trains on all rows of X after holding out config.validation_fraction.
template <class Model, class Input>
TrainHistory fit(Model& model, const Input& X, std::span<const ClassId> y) {
  const auto [tr, val] = validation_split(X.n_rows, model.config().validation_fraction, model.config().seed);
  return train(model, X, y, tr, val);
}

}  // namespace revmine
