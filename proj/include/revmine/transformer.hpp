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

// A small encoder-only transformer trained from scratch: subword pieces with
// [CLS]/[SEP] framing, post-norm self-attention blocks with learned
// positions, and a dense head on the [CLS] position.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "revmine/checkpoint.hpp"
#include "revmine/error.hpp"
#include "revmine/neural.hpp"
#include "revmine/tensor.hpp"
#include "revmine/utf8.hpp"
#include "revmine/vectorizer.hpp"

namespace revmine {

/// Piece inventory. Ids 0..3 are [PAD], [UNK], [CLS], [SEP]; a piece that
/// continues a word is stored with a leading "##".
class SubwordVocab {
 public:
  static constexpr std::int32_t pad_id = 0;
  static constexpr std::int32_t unk_id = 1;
  static constexpr std::int32_t cls_id = 2;
  static constexpr std::int32_t sep_id = 3;
  static constexpr std::string_view marker = "##";

  SubwordVocab() {
    for (const char* s : {"[PAD]", "[UNK]", "[CLS]", "[SEP]"}) add(s);
  }

  std::size_t size() const { return pieces_.size(); }
  const std::string& piece(std::int32_t id) const { return pieces_.at(static_cast<std::size_t>(id)); }
  bool contains(const std::string& p) const { return ids_.count(p) > 0; }
  std::int32_t id(const std::string& p) const {
    auto it = ids_.find(p);
    return it == ids_.end() ? -1 : it->second;
  }
  const std::vector<std::string>& pieces() const { return pieces_; }

  /// Appends a piece unless present; returns its id.
  std::int32_t add(const std::string& p) {
    if (p.empty() || p == marker) throw DomainError("subword piece must be non-empty");
    auto it = ids_.find(p);
    if (it != ids_.end()) return it->second;
    const auto id = static_cast<std::int32_t>(pieces_.size());
    pieces_.push_back(p);
    ids_.emplace(p, id);
    return id;
  }

  /// Greedy longest match from the left. A character with no matching
  /// piece becomes one [UNK] and matching resumes after it.
  void encode_word(std::string_view word, std::vector<std::int32_t>& out) const {
    const auto cps = utf8::decode(word);
    std::size_t i = 0;
    while (i < cps.size()) {
      std::int32_t found = -1;
      std::size_t end = cps.size();
      for (; end > i; --end) {
        std::string p = i == 0 ? std::string() : std::string(marker);
        p += utf8::encode(std::u32string_view(cps).substr(i, end - i));
        found = id(p);
        if (found >= 0) break;
      }
      if (found < 0) {
        out.push_back(unk_id);
        ++i;
      } else {
        out.push_back(found);
        i = end;
      }
    }
  }

  /// One piece per line in id order.
  void write(std::ostream& os) const {
    for (const auto& p : pieces_) os << p << '\n';
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write '" + path + "'");
    write(os);
  }

  static SubwordVocab read(std::istream& in) {
    SubwordVocab v;
    v.pieces_.clear();
    v.ids_.clear();
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) throw FormatError("empty subword piece", n);
      if (v.contains(line)) throw FormatError("duplicate subword piece '" + line + "'", n);
      v.add(line);
    }
    const char* specials[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
    for (std::int32_t i = 0; i < 4; ++i) {
      if (v.id(specials[i]) != i) throw FormatError(std::string("expected ") + specials[i] + " on line " + std::to_string(i + 1));
    }
    return v;
  }

  static SubwordVocab load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot read '" + path + "'");
    return read(in);
  }

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

namespace detail {

inline std::string render(const std::string& symbol, bool initial) {
  return initial ? symbol : std::string(SubwordVocab::marker) + symbol;
}

}  // namespace detail

/// Pair-merge vocabulary. Starts from every character of the corpus (in
/// word-initial and continuation form as they occur), then repeatedly
/// merges the most frequent adjacent symbol pair, counted over all word
/// positions, ties to the lexicographically smaller pair. Merged symbols
/// enter the vocabulary in the forms they occur in until target_size
/// pieces exist or nothing is left to merge.
inline SubwordVocab train_subword_vocab(const TokenDocs& corpus, std::size_t target_size) {
  if (corpus.empty()) throw DomainError("train_subword_vocab: empty corpus");
  std::map<std::string, std::size_t> freq;
  for (const auto& doc : corpus) {
    for (const auto& w : doc) {
      if (!w.empty()) ++freq[w];
    }
  }
  struct Word {
    std::vector<std::string> symbols;
    std::size_t count;
  };
  std::vector<Word> words;
  std::map<std::string, int> initial_pieces;
  for (const auto& [w, c] : freq) {
    Word word{{}, c};
    const auto cps = utf8::decode(w);
    for (std::size_t i = 0; i < cps.size(); ++i) {
      word.symbols.push_back(utf8::encode(std::u32string_view(cps).substr(i, 1)));
      initial_pieces[detail::render(word.symbols.back(), i == 0)] = 1;
    }
    words.push_back(std::move(word));
  }
  SubwordVocab vocab;
  if (target_size < vocab.size() + initial_pieces.size()) {
    throw DomainError("train_subword_vocab: target_size " + std::to_string(target_size) + " below the " +
                      std::to_string(vocab.size() + initial_pieces.size()) + " character and special pieces");
  }
  for (const auto& [p, unused] : initial_pieces) vocab.add(p);

  while (vocab.size() < target_size) {
    std::map<std::pair<std::string, std::string>, std::size_t> pairs;
    for (const auto& w : words) {
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) pairs[{w.symbols[i], w.symbols[i + 1]}] += w.count;
    }
    if (pairs.empty()) break;
    auto best = pairs.begin();
    for (auto it = pairs.begin(); it != pairs.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto [left, right] = best->first;
    const std::string merged = left + right;
    bool initial = false, continuation = false;
    for (auto& w : words) {
      std::vector<std::string> next;
      for (std::size_t i = 0; i < w.symbols.size(); ++i) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == left && w.symbols[i + 1] == right) {
          (next.empty() ? initial : continuation) = true;
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(w.symbols[i]);
        }
      }
      w.symbols = std::move(next);
    }
    if (initial && vocab.size() < target_size) vocab.add(detail::render(merged, true));
    if (continuation && vocab.size() < target_size) vocab.add(detail::render(merged, false));
  }
  return vocab;
}

/// Row-major [n_rows, maxlen] grids.
struct EncodedBatch {
  std::size_t n_rows = 0;
  std::size_t maxlen = 0;
  std::vector<std::int32_t> ids;
  std::vector<std::int32_t> attention_mask;
  std::vector<std::int32_t> segment_ids;

  std::span<const std::int32_t> row(std::size_t r) const { return {ids.data() + r * maxlen, maxlen}; }
  std::span<const std::int32_t> mask_row(std::size_t r) const { return {attention_mask.data() + r * maxlen, maxlen}; }
};

/// [CLS] pieces... [SEP], keeping the head of long inputs with [SEP] in the
/// last kept slot, then padding.
inline void encode_into(const SubwordVocab& vocab, const TokenDoc& words, std::size_t maxlen, EncodedBatch& out) {
  if (maxlen < 2) throw DomainError("encode: maxlen must be at least 2");
  std::vector<std::int32_t> pieces;
  for (const auto& w : words) {
    vocab.encode_word(w, pieces);
    if (pieces.size() >= maxlen) break;
  }
  if (pieces.size() > maxlen - 2) pieces.resize(maxlen - 2);
  const std::size_t used = pieces.size() + 2;
  out.ids.push_back(SubwordVocab::cls_id);
  out.ids.insert(out.ids.end(), pieces.begin(), pieces.end());
  out.ids.push_back(SubwordVocab::sep_id);
  out.ids.insert(out.ids.end(), maxlen - used, SubwordVocab::pad_id);
  out.attention_mask.insert(out.attention_mask.end(), used, 1);
  out.attention_mask.insert(out.attention_mask.end(), maxlen - used, 0);
  out.segment_ids.insert(out.segment_ids.end(), maxlen, 0);
  ++out.n_rows;
}

inline EncodedBatch encode(const SubwordVocab& vocab, const TokenDocs& docs, std::size_t maxlen) {
  EncodedBatch b;
  b.maxlen = maxlen;
  if (maxlen < 2) throw DomainError("encode: maxlen must be at least 2");
  for (const auto& d : docs) encode_into(vocab, d, maxlen, b);
  return b;
}

struct AttentionResult {
  tensor::Tensor output;
  tensor::Tensor weights;
};

/// Scaled dot-product attention over groups: Q [g, q, d], K [g, k, d],
/// V [g, k, dv]. key_mask holds g*k entries, 1 for visible keys; hidden
/// keys get a -1e9 score bias.
inline AttentionResult attention(const tensor::Tensor& Q, const tensor::Tensor& K, const tensor::Tensor& V,
                                 std::span<const double> key_mask) {
  if (Q.rank() != 3 || K.rank() != 3 || V.rank() != 3 || Q.dim(0) != K.dim(0) || K.dim(0) != V.dim(0) ||
      Q.dim(2) != K.dim(2) || K.dim(1) != V.dim(1)) {
    throw DomainError("attention: incompatible shapes " + tensor::shape_str(Q.shape()) + ", " +
                      tensor::shape_str(K.shape()) + ", " + tensor::shape_str(V.shape()));
  }
  const std::size_t g = Q.dim(0), q = Q.dim(1), k = K.dim(1);
  if (key_mask.size() != g * k) throw DomainError("attention: mask must cover every key");
  std::vector<double> bias(g * q * k);
  for (std::size_t i = 0; i < g; ++i) {
    const auto m = key_mask.subspan(i * k, k);
    if (std::none_of(m.begin(), m.end(), [](double v) { return v != 0.0; })) {
      throw DomainError("attention: every key of group " + std::to_string(i) + " is masked");
    }
    for (std::size_t a = 0; a < q; ++a) {
      for (std::size_t b = 0; b < k; ++b) bias[(i * q + a) * k + b] = m[b] != 0.0 ? 0.0 : -1e9;
    }
  }
  const double inv = 1.0 / std::sqrt(static_cast<double>(Q.dim(2)));
  auto w = tensor::softmax(tensor::add_constant(tensor::scale(tensor::bmm(Q, K, true), inv), std::move(bias)));
  return {tensor::bmm(w, V), w};
}

struct EncoderConfig {
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_model = 64;
  std::size_t d_ff = 128;
  std::size_t maxlen = 50;
  double lr = 1e-3;
  int epochs = 3;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  /// Piece budget when the vocabulary is built from training text.
  std::size_t vocab_size = 1000;
  double validation_fraction = 0.1;

  void validate() const {
    if (n_layers < 1) throw ConfigError("n_layers", "must be at least 1");
    if (n_heads < 1 || d_model < 1 || d_model % n_heads != 0) {
      throw ConfigError("n_heads", "d_model must be a positive multiple of n_heads");
    }
    if (d_ff < 1) throw ConfigError("d_ff", "must be positive");
    if (maxlen < 2) throw ConfigError("maxlen", "must be at least 2");
    if (!(lr > 0.0)) throw ConfigError("lr", "must be positive");
    if (epochs < 1) throw ConfigError("epochs", "must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size", "must be at least 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
      throw ConfigError("validation_fraction", "must be in [0, 1)");
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["n_layers"] = n_layers;
    j["n_heads"] = n_heads;
    j["d_model"] = d_model;
    j["d_ff"] = d_ff;
    j["maxlen"] = maxlen;
    j["lr"] = lr;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["seed"] = seed;
    j["vocab_size"] = vocab_size;
    j["validation_fraction"] = validation_fraction;
    return j;
  }

  static EncoderConfig from_json(const nlohmann::json& j, const std::string& path = "") {
    if (!j.is_object()) throw ConfigError(path.empty() ? "model" : path, "must be an object");
    const auto field = [&](const std::string& k) { return path.empty() ? k : path + "." + k; };
    EncoderConfig c;
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const auto& v = it.value();
      try {
        if (k == "kind") continue;
        if (k == "n_layers") {
          c.n_layers = v.get<std::size_t>();
        } else if (k == "n_heads") {
          c.n_heads = v.get<std::size_t>();
        } else if (k == "d_model") {
          c.d_model = v.get<std::size_t>();
        } else if (k == "d_ff") {
          c.d_ff = v.get<std::size_t>();
        } else if (k == "maxlen") {
          c.maxlen = v.get<std::size_t>();
        } else if (k == "lr") {
          c.lr = v.get<double>();
        } else if (k == "epochs") {
          c.epochs = v.get<int>();
        } else if (k == "batch_size") {
          c.batch_size = v.get<std::size_t>();
        } else if (k == "seed") {
          c.seed = v.get<std::uint64_t>();
        } else if (k == "vocab_size") {
          c.vocab_size = v.get<std::size_t>();
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

class TransformerModel {
 public:
  TransformerModel(EncoderConfig config, SubwordVocab vocab, std::size_t n_classes)
      : cfg_(std::move(config)), vocab_(std::move(vocab)), n_classes_(n_classes) {
    cfg_.validate();
    if (n_classes < 2) throw DomainError("transformer: need at least two classes");
    Rng rng(mix_seed(cfg_.seed, 1));
    const std::size_t d = cfg_.d_model, f = cfg_.d_ff;
    auto small = [&](tensor::Shape s) {
      std::vector<double> v(tensor::numel(s));
      for (auto& x : v) x = rng.uniform(-0.05, 0.05);
      return tensor::Tensor::from(std::move(s), std::move(v), true);
    };
    auto ones = [](std::size_t n) { return tensor::Tensor::from({n}, std::vector<double>(n, 1.0), true); };
    tokens_ = small({vocab_.size(), d});
    positions_ = small({cfg_.maxlen, d});
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      Layer L;
      L.wq = detail::glorot({d, d}, d, d, rng);
      L.wk = detail::glorot({d, d}, d, d, rng);
      L.wv = detail::glorot({d, d}, d, d, rng);
      L.wo = detail::glorot({d, d}, d, d, rng);
      L.bq = detail::zeros_param({d});
      L.bk = detail::zeros_param({d});
      L.bv = detail::zeros_param({d});
      L.bo = detail::zeros_param({d});
      L.ln1_g = ones(d);
      L.ln1_b = detail::zeros_param({d});
      L.w1 = detail::glorot({d, f}, d, f, rng);
      L.b1 = detail::zeros_param({f});
      L.w2 = detail::glorot({f, d}, f, d, rng);
      L.b2 = detail::zeros_param({d});
      L.ln2_g = ones(d);
      L.ln2_b = detail::zeros_param({d});
      layers_.push_back(std::move(L));
    }
    const std::size_t out = n_classes_ == 2 ? 1 : n_classes_;
    head_w_ = detail::glorot({d, out}, d, out, rng);
    head_b_ = detail::zeros_param({out});
  }

  const EncoderConfig& config() const { return cfg_; }
  const SubwordVocab& vocab() const { return vocab_; }
  std::size_t n_classes() const { return n_classes_; }

  std::vector<tensor::NamedTensor> named_parameters() const {
    std::vector<tensor::NamedTensor> out{{"tokens", tokens_}, {"positions", positions_}};
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& L = layers_[l];
      const std::string p = "layer" + std::to_string(l) + ".";
      for (auto& [n, t] : std::initializer_list<std::pair<const char*, const tensor::Tensor&>>{
               {"wq", L.wq}, {"bq", L.bq}, {"wk", L.wk}, {"bk", L.bk}, {"wv", L.wv}, {"bv", L.bv},
               {"wo", L.wo}, {"bo", L.bo}, {"ln1_g", L.ln1_g}, {"ln1_b", L.ln1_b}, {"w1", L.w1}, {"b1", L.b1},
               {"w2", L.w2}, {"b2", L.b2}, {"ln2_g", L.ln2_g}, {"ln2_b", L.ln2_b}}) {
        out.push_back({p + n, t});
      }
    }
    out.push_back({"head.weight", head_w_});
    out.push_back({"head.bias", head_b_});
    return out;
  }

  std::vector<tensor::Tensor> trainable() const {
    std::vector<tensor::Tensor> out;
    for (auto& [n, t] : named_parameters()) out.push_back(t);
    return out;
  }

  /// Hidden states [rows, maxlen, d_model].
  tensor::Tensor encode_hidden(const EncodedBatch& X, std::span<const std::size_t> rows) const {
    using namespace tensor;
    if (X.maxlen != cfg_.maxlen) {
      throw DomainError("encoder expects maxlen " + std::to_string(cfg_.maxlen) + ", got " + std::to_string(X.maxlen));
    }
    const std::size_t B = rows.size(), T = X.maxlen, d = cfg_.d_model, H = cfg_.n_heads, dk = d / H;
    std::vector<std::int32_t> ids, pos;
    std::vector<double> mask;
    for (auto r : rows) {
      if (r >= X.n_rows) throw DomainError("encoder: row index out of range");
      auto row = X.row(r);
      auto m = X.mask_row(r);
      ids.insert(ids.end(), row.begin(), row.end());
      for (std::size_t t = 0; t < T; ++t) {
        pos.push_back(static_cast<std::int32_t>(t));
        mask.push_back(m[t] != 0 ? 1.0 : 0.0);
      }
    }
    // one mask row per (example, head) group
    std::vector<double> group_mask;
    group_mask.reserve(B * H * T);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t h = 0; h < H; ++h) group_mask.insert(group_mask.end(), mask.begin() + b * T, mask.begin() + (b + 1) * T);
    }
    auto x = add(embedding_lookup(tokens_, ids, {B * T}), embedding_lookup(positions_, pos, {B * T}));
    auto heads = [&](const Tensor& t) { return reshape(swap_middle(reshape(t, {B, T, H, dk})), {B * H, T, dk}); };
    for (const auto& L : layers_) {
      const auto q = heads(add_bias(matmul(x, L.wq), L.bq));
      const auto k = heads(add_bias(matmul(x, L.wk), L.bk));
      const auto v = heads(add_bias(matmul(x, L.wv), L.bv));
      const auto att = attention(q, k, v, group_mask).output;
      const auto merged = reshape(swap_middle(reshape(att, {B, H, T, dk})), {B * T, d});
      x = layer_norm(add(x, add_bias(matmul(merged, L.wo), L.bo)), L.ln1_g, L.ln1_b);
      const auto ff = add_bias(matmul(gelu(add_bias(matmul(x, L.w1), L.b1)), L.w2), L.b2);
      x = layer_norm(add(x, ff), L.ln2_g, L.ln2_b);
    }
    return reshape(x, {B, T, d});
  }

  /// Head outputs from the [CLS] position. No dropout, so the last two
  /// arguments exist only to match the shared training loop.
  tensor::Tensor forward(const EncodedBatch& X, std::span<const std::size_t> rows, bool = false,
                         Rng* = nullptr) const {
    const auto h = encode_hidden(X, rows);
    const auto cls = tensor::slice_last(tensor::reshape(h, {rows.size(), cfg_.maxlen * cfg_.d_model}), 0, cfg_.d_model);
    return tensor::add_bias(tensor::matmul(cls, head_w_), head_b_);
  }

  tensor::Tensor forward(const EncodedBatch& X, std::span<const std::size_t> rows, bool train, Rng& rng) const {
    return forward(X, rows, train, &rng);
  }

  tensor::Tensor loss(const EncodedBatch& X, std::span<const ClassId> y, std::span<const std::size_t> rows) const {
    std::vector<int> targets;
    for (auto r : rows) {
      if (y[r] < 0 || static_cast<std::size_t>(y[r]) >= n_classes_) throw DomainError("label outside the model's classes");
      targets.push_back(y[r]);
    }
    const auto out = forward(X, rows);
    return n_classes_ == 2 ? tensor::binary_cross_entropy_with_logits(out, targets)
                           : tensor::softmax_cross_entropy(out, targets);
  }

  Prediction predict(const EncodedBatch& X, std::size_t batch = 64) const {
    Prediction p;
    p.n_classes = n_classes_;
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < X.n_rows; start += batch) {
      rows.clear();
      for (std::size_t r = start; r < std::min(X.n_rows, start + batch); ++r) rows.push_back(r);
      detail::decode_head(forward(X, rows).values(), n_classes_, p);
    }
    return p;
  }

  /// Writes the checkpoint, a JSON sidecar and the piece list next to it.
  void save(const std::string& checkpoint_path) const {
    tensor::save_checkpoint(checkpoint_path, named_parameters());
    vocab_.save(checkpoint_path + ".vocab");
    std::ofstream side(checkpoint_path + ".json");
    nlohmann::ordered_json j;
    j["n_classes"] = n_classes_;
    j["config"] = cfg_.to_json();
    side << j.dump(2) << '\n';
  }

  static TransformerModel load(const std::string& checkpoint_path) {
    std::ifstream side(checkpoint_path + ".json");
    if (!side) throw FormatError("missing config sidecar for '" + checkpoint_path + "'");
    const auto j = nlohmann::json::parse(side);
    TransformerModel m(EncoderConfig::from_json(j.at("config")), SubwordVocab::load(checkpoint_path + ".vocab"),
                       j.at("n_classes").get<std::size_t>());
    auto params = m.named_parameters();
    tensor::restore_into(tensor::load_checkpoint(checkpoint_path), params);
    return m;
  }

 private:
  struct Layer {
    tensor::Tensor wq, bq, wk, bk, wv, bv, wo, bo, ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
  };

  EncoderConfig cfg_;
  SubwordVocab vocab_;
  std::size_t n_classes_;
  tensor::Tensor tokens_, positions_;
  std::vector<Layer> layers_;
  tensor::Tensor head_w_, head_b_;
};

}  // namespace revmine
