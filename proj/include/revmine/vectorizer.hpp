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

// Training-split vocabularies, TF-IDF document-term matrices and fixed-length
// id sequences for the neural models.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "revmine/error.hpp"
#include "revmine/utf8.hpp"

namespace revmine {

using TokenDoc = std::vector<std::string>;
using TokenDocs = std::vector<TokenDoc>;

class Vocabulary {
 public:
  static constexpr std::int32_t pad_id = 0;
  static constexpr std::int32_t unk_id = 1;
  static constexpr const char* pad_token = "<pad>";
  static constexpr const char* unk_token = "<unk>";

  Vocabulary() : id_to_token_{pad_token, unk_token}, doc_freq_{0, 0} {
    token_to_id_.emplace(pad_token, pad_id);
    token_to_id_.emplace(unk_token, unk_id);
  }

  /// Appends a regular token; ids are assigned densely in insertion order.
  std::int32_t add(const std::string& token, std::size_t doc_freq) {
    if (token_to_id_.contains(token)) throw DomainError("duplicate vocabulary token '" + token + "'");
    const auto id = static_cast<std::int32_t>(id_to_token_.size());
    token_to_id_.emplace(token, id);
    id_to_token_.push_back(token);
    doc_freq_.push_back(doc_freq);
    return id;
  }

  std::int32_t id(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? unk_id : it->second;
  }
  bool contains(std::string_view token) const { return token_to_id_.contains(std::string(token)); }
  const std::string& token(std::int32_t id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return id_to_token_.size(); }
  /// Zero for the special tokens.
  std::size_t doc_freq(std::int32_t id) const { return doc_freq_.at(static_cast<std::size_t>(id)); }
  std::size_t n_docs() const { return n_docs_; }
  void set_n_docs(std::size_t n) { n_docs_ = n; }
  static bool is_special(std::int32_t id) { return id == pad_id || id == unk_id; }

  /// Smoothed inverse document frequency ln((1 + N) / (1 + df)) + 1.
  double idf(std::int32_t id) const {
    return std::log((1.0 + static_cast<double>(n_docs_)) / (1.0 + static_cast<double>(doc_freq(id)))) + 1.0;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["n_docs"] = n_docs_;
    auto& entries = j["tokens"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
      entries.push_back({id_to_token_[i], i, doc_freq_[i]});
    }
    return j;
  }

  static Vocabulary from_json(const nlohmann::json& j) {
    Vocabulary v;
    const auto& entries = j.at("tokens");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      const auto token = e.at(0).get<std::string>();
      const auto id = e.at(1).get<std::size_t>();
      if (id != i) throw FormatError("vocabulary ids must be dense and ordered", i + 1);
      if (i < 2) {
        if (token != v.id_to_token_[i]) throw FormatError("special token mismatch at id " + std::to_string(i));
        continue;
      }
      v.add(token, e.at(2).get<std::size_t>());
    }
    v.n_docs_ = j.at("n_docs").get<std::size_t>();
    return v;
  }

 private:
  std::unordered_map<std::string, std::int32_t> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::vector<std::size_t> doc_freq_;
  std::size_t n_docs_ = 0;
};

/// Keeps tokens with document frequency >= min_df; with max_size, the
/// max_size most frequent survive. Ids follow descending document frequency,
/// ties lexicographic.
inline Vocabulary build_vocabulary(const TokenDocs& train_docs, std::size_t min_df = 1,
                                   std::optional<std::size_t> max_size = std::nullopt) {
  if (train_docs.empty()) throw DomainError("build_vocabulary: empty training documents");
  if (min_df < 1) throw DomainError("build_vocabulary: min_df must be >= 1");
  std::unordered_map<std::string, std::size_t> df;
  std::vector<std::string> seen;
  for (const auto& doc : train_docs) {
    seen.assign(doc.begin(), doc.end());
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (auto& t : seen) {
      if (t.empty() || t == Vocabulary::pad_token || t == Vocabulary::unk_token) continue;
      ++df[t];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [t, f] : df) {
    if (f >= min_df) kept.emplace_back(t, f);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (max_size && kept.size() > *max_size) kept.resize(*max_size);
  Vocabulary vocab;
  for (auto& [t, f] : kept) vocab.add(t, f);
  vocab.set_n_docs(train_docs.size());
  return vocab;
}

class SparseMatrix {
 public:
  struct Entry {
    std::uint32_t col;
    double value;
    bool operator==(const Entry&) const = default;
  };
  using Row = std::vector<Entry>;

  SparseMatrix() = default;
  SparseMatrix(std::size_t n_rows, std::size_t n_cols) : n_cols_(n_cols), rows_(n_rows) {}

  std::size_t n_rows() const { return rows_.size(); }
  std::size_t n_cols() const { return n_cols_; }
  const Row& row(std::size_t i) const { return rows_.at(i); }
  const std::vector<Row>& rows() const { return rows_; }

  /// Replaces row i; entries must have strictly increasing columns below n_cols.
  void set_row(std::size_t i, Row row) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (row[k].col >= n_cols_) throw DomainError("sparse column out of range");
      if (k > 0 && row[k].col <= row[k - 1].col) throw DomainError("sparse columns must be strictly increasing");
      if (!std::isfinite(row[k].value)) throw DomainError("sparse value not finite");
    }
    rows_.at(i) = std::move(row);
  }

  void push_row(Row row) {
    rows_.emplace_back();
    set_row(rows_.size() - 1, std::move(row));
  }

  std::size_t nnz() const {
    std::size_t n = 0;
    for (const auto& r : rows_) n += r.size();
    return n;
  }

  /// Selects rows by index, in the given order.
  SparseMatrix take(std::span<const std::size_t> idx) const {
    SparseMatrix out(0, n_cols_);
    out.rows_.reserve(idx.size());
    for (auto i : idx) out.rows_.push_back(rows_.at(i));
    return out;
  }

  /// row,col,value triples, one per stored entry.
  void write_csv(std::ostream& os) const {
    os << "row,col,value\n";
    char buf[64];
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      for (const auto& e : rows_[i]) {
        std::snprintf(buf, sizeof buf, "%.17g", e.value);
        os << i << ',' << e.col << ',' << buf << '\n';
      }
    }
  }

 private:
  std::size_t n_cols_ = 0;
  std::vector<Row> rows_;
};

inline double sparse_dot(const SparseMatrix::Row& a, const SparseMatrix::Row& b) {
  double s = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->col < ib->col) {
      ++ia;
    } else if (ib->col < ia->col) {
      ++ib;
    } else {
      s += ia->value * ib->value;
      ++ia;
      ++ib;
    }
  }
  return s;
}

inline double sparse_norm2(const SparseMatrix::Row& a) {
  double s = 0.0;
  for (const auto& e : a) s += e.value * e.value;
  return s;
}

namespace detail {

inline std::map<std::uint32_t, double> count_in_vocab(const Vocabulary& vocab, const TokenDoc& doc) {
  std::map<std::uint32_t, double> counts;
  for (const auto& t : doc) {
    const auto id = vocab.id(t);
    if (Vocabulary::is_special(id)) continue;
    counts[static_cast<std::uint32_t>(id)] += 1.0;
  }
  return counts;
}

}  // namespace detail

/// Raw term counts over the vocabulary; out-of-vocabulary tokens are ignored.
inline SparseMatrix count_transform(const Vocabulary& vocab, const TokenDocs& docs) {
  SparseMatrix m(docs.size(), vocab.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    SparseMatrix::Row row;
    for (auto [col, c] : detail::count_in_vocab(vocab, docs[i])) row.push_back({col, c});
    m.set_row(i, std::move(row));
  }
  return m;
}

/// tf * idf with raw counts and smoothed idf, rows L2-normalized.
inline SparseMatrix tfidf_transform(const Vocabulary& vocab, const TokenDocs& docs) {
  SparseMatrix m(docs.size(), vocab.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    SparseMatrix::Row row;
    double norm2 = 0.0;
    for (auto [col, c] : detail::count_in_vocab(vocab, docs[i])) {
      const double v = c * vocab.idf(static_cast<std::int32_t>(col));
      norm2 += v * v;
      row.push_back({col, v});
    }
    if (norm2 > 0.0) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (auto& e : row) e.value *= inv;
    }
    m.set_row(i, std::move(row));
  }
  return m;
}

/// Row-major n_rows x maxlen grid of token ids.
struct IndexMatrix {
  std::size_t n_rows = 0;
  std::size_t maxlen = 0;
  std::vector<std::int32_t> ids;

  std::span<const std::int32_t> row(std::size_t i) const { return {ids.data() + i * maxlen, maxlen}; }

  IndexMatrix take(std::span<const std::size_t> idx) const {
    IndexMatrix out{idx.size(), maxlen, {}};
    out.ids.reserve(idx.size() * maxlen);
    for (auto i : idx) {
      auto r = row(i);
      out.ids.insert(out.ids.end(), r.begin(), r.end());
    }
    return out;
  }
};

/// Head-keeping truncation and right padding with the pad id.
inline IndexMatrix encode_sequences(const Vocabulary& vocab, const TokenDocs& docs, std::size_t maxlen) {
  if (maxlen < 1) throw DomainError("encode_sequences: maxlen must be >= 1");
  IndexMatrix m{docs.size(), maxlen, std::vector<std::int32_t>(docs.size() * maxlen, Vocabulary::pad_id)};
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const std::size_t n = std::min(maxlen, docs[i].size());
    for (std::size_t t = 0; t < n; ++t) m.ids[i * maxlen + t] = vocab.id(docs[i][t]);
  }
  return m;
}

/// Ordered character set; character ids start after pad (0) and unk (1).
class CharAlphabet {
 public:
  explicit CharAlphabet(std::u32string chars) : chars_(std::move(chars)) {
    if (chars_.empty()) throw DomainError("alphabet must be non-empty");
    for (std::size_t i = 0; i < chars_.size(); ++i) {
      if (!index_.emplace(chars_[i], static_cast<std::int32_t>(i + 2)).second) {
        throw DomainError("alphabet contains duplicate characters");
      }
    }
  }

  /// 26 letters, 10 digits, space and 10 punctuation marks.
  static CharAlphabet default_alphabet() {
    return CharAlphabet(U"abcdefghijklmnopqrstuvwxyz0123456789 .,!?'\"-:;/");
  }

  std::int32_t id(char32_t c) const {
    auto it = index_.find(c);
    return it == index_.end() ? Vocabulary::unk_id : it->second;
  }
  /// Number of ids including pad and unk.
  std::size_t size() const { return chars_.size() + 2; }
  const std::u32string& chars() const { return chars_; }

 private:
  std::u32string chars_;
  std::unordered_map<char32_t, std::int32_t> index_;
};

inline IndexMatrix encode_chars(std::span<const std::string> docs, const CharAlphabet& alphabet,
                                std::size_t maxlen_chars) {
  if (maxlen_chars < 1) throw DomainError("encode_chars: maxlen_chars must be >= 1");
  IndexMatrix m{docs.size(), maxlen_chars,
                std::vector<std::int32_t>(docs.size() * maxlen_chars, Vocabulary::pad_id)};
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto cps = utf8::decode(docs[i]);
    const std::size_t n = std::min(maxlen_chars, cps.size());
    for (std::size_t t = 0; t < n; ++t) m.ids[i * maxlen_chars + t] = alphabet.id(cps[t]);
  }
  return m;
}

}  // namespace revmine
