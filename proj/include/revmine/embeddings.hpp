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

// Word vectors: CBOW training with negative sampling, and a loader for
// "word v1 ... vd" text files.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "revmine/error.hpp"
#include "revmine/format.hpp"
#include "revmine/random.hpp"
#include "revmine/tensor.hpp"
#include "revmine/vectorizer.hpp"

namespace revmine {

enum class EmbeddingSource { trained, pretrained, random };

/// Per-row origin. The pad and unk rows are `special`: pad is all zeros and
/// unk is random unless the file supplies it.
enum class Provenance { loaded, random_init, special };

struct EmbeddingTable {
  std::size_t dim = 0;
  /// Row i is the vector of vocabulary id i.
  std::vector<std::string> words;
  std::vector<double> vectors;
  EmbeddingSource source = EmbeddingSource::random;
  std::vector<Provenance> provenance;

  std::size_t size() const { return words.size(); }
  std::span<const double> row(std::size_t i) const { return {vectors.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) { return {vectors.data() + i * dim, dim}; }

  std::size_t count(Provenance p) const { return static_cast<std::size_t>(std::count(provenance.begin(), provenance.end(), p)); }

  /// [vocab, dim] tensor initialized from this table.
  tensor::Tensor to_tensor(bool requires_grad) const {
    return tensor::Tensor::from({size(), dim}, vectors, requires_grad);
  }
};

namespace detail {

inline EmbeddingTable empty_table(const Vocabulary& vocab, std::size_t dim, EmbeddingSource source) {
  EmbeddingTable t;
  t.dim = dim;
  t.source = source;
  for (std::size_t i = 0; i < vocab.size(); ++i) t.words.push_back(vocab.token(static_cast<std::int32_t>(i)));
  t.vectors.assign(vocab.size() * dim, 0.0);
  t.provenance.assign(vocab.size(), Provenance::random_init);
  t.provenance[Vocabulary::pad_id] = Provenance::special;
  t.provenance[Vocabulary::unk_id] = Provenance::special;
  return t;
}

// Each row draws from its own stream so a row's value does not depend on
// which other rows were filled.
inline void fill_uniform(std::span<double> row, std::uint64_t seed, std::size_t id, double range) {
  Rng rng(mix_seed(seed, id));
  for (auto& x : row) x = rng.uniform(-range, range);
}

}  // namespace detail

/// Uniform(-range, range) rows for every id except pad.
inline EmbeddingTable random_table(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed, double range = 0.25) {
  if (dim == 0) throw DomainError("random_table: dim must be positive");
  auto t = detail::empty_table(vocab, dim, EmbeddingSource::random);
  for (std::size_t i = 1; i < t.size(); ++i) detail::fill_uniform(t.row(i), seed, i, range);
  return t;
}

struct CbowOptions {
  std::size_t dim = 300;
  std::size_t window = 5;
  std::size_t negatives = 5;
  int epochs = 5;
  double lr = 0.025;
  std::uint64_t seed = 1;
};

/// CBOW: the mean of the in-vocabulary words within `window` positions
/// predicts the center word against `negatives` noise words drawn from the
/// unigram distribution raised to 0.75. Step size decays linearly to 1e-4 of
/// the initial rate. Out-of-vocabulary tokens are skipped as both centers and
/// context. Input vectors start uniform in +-0.5/dim, output vectors at zero.
inline EmbeddingTable cbow_train(const TokenDocs& corpus, const Vocabulary& vocab, const CbowOptions& opt) {
  if (opt.dim < 2) throw DomainError("cbow_train: dim must be at least 2");
  if (opt.window < 1) throw DomainError("cbow_train: window must be at least 1");
  if (opt.negatives < 1) throw DomainError("cbow_train: negatives must be at least 1");
  if (opt.epochs < 0) throw DomainError("cbow_train: epochs must be non-negative");
  if (!(opt.lr > 0.0)) throw DomainError("cbow_train: lr must be positive");

  const std::size_t V = vocab.size(), D = opt.dim;
  std::vector<std::vector<std::int32_t>> docs;
  std::vector<double> freq(V, 0.0);
  std::size_t total = 0;
  for (const auto& d : corpus) {
    std::vector<std::int32_t> ids;
    for (const auto& t : d) {
      const auto id = vocab.id(t);
      if (Vocabulary::is_special(id)) continue;
      ids.push_back(id);
      freq[static_cast<std::size_t>(id)] += 1.0;
    }
    total += ids.size();
    docs.push_back(std::move(ids));
  }
  if (std::count_if(freq.begin(), freq.end(), [](double f) { return f > 0.0; }) < 2) {
    throw DomainError("cbow_train: corpus needs at least two distinct in-vocabulary tokens");
  }

  auto table = detail::empty_table(vocab, D, EmbeddingSource::trained);
  Rng rng(opt.seed);
  for (std::size_t i = 1; i < V; ++i) {
    for (auto& x : table.row(i)) x = rng.uniform(-0.5 / static_cast<double>(D), 0.5 / static_cast<double>(D));
  }

  std::vector<double> noise_cdf(V, 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < V; ++i) noise_cdf[i] = acc += std::pow(freq[i], 0.75);
  auto draw_noise = [&] {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(noise_cdf.begin(), noise_cdf.end(), u);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - noise_cdf.begin(), static_cast<std::ptrdiff_t>(V - 1)));
  };

  std::vector<double> out(V * D, 0.0);
  std::vector<double> h(D), grad_h(D);
  const double budget = static_cast<double>(opt.epochs) * static_cast<double>(total);
  double seen = 0.0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    for (const auto& ids : docs) {
      for (std::size_t p = 0; p < ids.size(); ++p, seen += 1.0) {
        const double lr = opt.lr * std::max(1e-4, 1.0 - seen / budget);
        const std::size_t lo = p >= opt.window ? p - opt.window : 0;
        const std::size_t hi = std::min(ids.size(), p + opt.window + 1);
        const std::size_t n_ctx = hi - lo - 1;
        if (n_ctx == 0) continue;
        std::fill(h.begin(), h.end(), 0.0);
        for (std::size_t q = lo; q < hi; ++q) {
          if (q != p) tensor::detail::axpy(1.0, table.row(static_cast<std::size_t>(ids[q])).data(), h.data(), D);
        }
        for (auto& x : h) x /= static_cast<double>(n_ctx);
        std::fill(grad_h.begin(), grad_h.end(), 0.0);
        const auto center = static_cast<std::size_t>(ids[p]);
        for (std::size_t s = 0; s <= opt.negatives; ++s) {
          std::size_t target = center;
          double label = 1.0;
          if (s > 0) {
            target = draw_noise();
            if (target == center) continue;
            label = 0.0;
          }
          double* o = out.data() + target * D;
          const double f = tensor::sigmoid(tensor::detail::dot(h.data(), o, D));
          const double g = lr * (label - f);
          tensor::detail::axpy(g, o, grad_h.data(), D);
          tensor::detail::axpy(g, h.data(), o, D);
        }
        const double share = 1.0 / static_cast<double>(n_ctx);
        for (std::size_t q = lo; q < hi; ++q) {
          if (q != p) tensor::detail::axpy(share, grad_h.data(), table.row(static_cast<std::size_t>(ids[q])).data(), D);
        }
      }
    }
  }
  return table;
}

/// Reads "word v1 ... vd" lines, with an optional leading "count dim" header.
/// Vocabulary words found in the file take the file vector; every other
/// non-pad row gets a seeded uniform(-0.25, 0.25) vector. `fallback_dim`
/// sizes the table when the file holds no vectors.
inline EmbeddingTable load_pretrained(std::istream& in, const Vocabulary& vocab, std::uint64_t seed,
                                      std::size_t fallback_dim = 300) {
  std::unordered_map<std::string, std::vector<double>> file;
  std::size_t dim = 0;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::vector<std::string> parts;
    for (std::string f; fields >> f;) parts.push_back(f);
    if (parts.empty()) continue;
    if (n == 1 && parts.size() == 2 &&
        std::all_of(parts[0].begin(), parts[0].end(), ::isdigit) &&
        std::all_of(parts[1].begin(), parts[1].end(), ::isdigit)) {
      dim = std::stoul(parts[1]);
      continue;
    }
    if (parts.size() < 2) throw FormatError("vector line has no values", n);
    const std::size_t d = parts.size() - 1;
    if (dim == 0) dim = d;
    if (d != dim) {
      throw FormatError("expected " + std::to_string(dim) + " values, found " + std::to_string(d), n);
    }
    std::vector<double> v(d);
    for (std::size_t i = 0; i < d; ++i) {
      try {
        v[i] = parse_double(parts[i + 1]);
      } catch (const FormatError& e) {
        throw FormatError(e.what(), n);
      }
    }
    file.try_emplace(parts[0], std::move(v));
  }
  if (dim == 0) dim = fallback_dim;
  if (dim == 0) throw DomainError("load_pretrained: dimension must be positive");
  auto t = detail::empty_table(vocab, dim, EmbeddingSource::pretrained);
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto it = file.find(t.words[i]);
    if (it != file.end()) {
      std::copy(it->second.begin(), it->second.end(), t.row(i).begin());
      if (t.provenance[i] != Provenance::special) t.provenance[i] = Provenance::loaded;
    } else if (i != Vocabulary::pad_id) {
      detail::fill_uniform(t.row(i), seed, i, 0.25);
    }
  }
  return t;
}

inline EmbeddingTable load_pretrained(const std::string& path, const Vocabulary& vocab, std::uint64_t seed,
                                      std::size_t fallback_dim = 300) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open vector file '" + path + "'");
  return load_pretrained(in, vocab, seed, fallback_dim);
}

/// Same text format, header line first, 17 significant digits.
inline void write_text(const EmbeddingTable& t, std::ostream& os) {
  os << t.size() << ' ' << t.dim << '\n';
  for (std::size_t i = 0; i < t.size(); ++i) {
    os << t.words[i];
    for (double v : t.row(i)) os << ' ' << g17(v);
    os << '\n';
  }
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(tensor::detail::dot(a.data(), a.data(), a.size()));
  const double nb = std::sqrt(tensor::detail::dot(b.data(), b.data(), b.size()));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return tensor::detail::dot(a.data(), b.data(), a.size()) / (na * nb);
}

/// Top-k words by cosine to `word`, never including the word itself or the
/// special rows; ties are broken lexicographically.
inline std::vector<std::pair<std::string, double>> nearest_neighbors(const EmbeddingTable& t, const std::string& word,
                                                                     std::size_t k) {
  auto it = std::find(t.words.begin(), t.words.end(), word);
  if (it == t.words.end()) throw DomainError("nearest_neighbors: unknown word '" + word + "'");
  if (k >= t.size()) throw DomainError("nearest_neighbors: k must be below the vocabulary size");
  const auto q = static_cast<std::size_t>(it - t.words.begin());
  std::vector<std::pair<std::string, double>> all;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i == q || t.provenance[i] == Provenance::special) continue;
    all.emplace_back(t.words[i], cosine(t.row(q), t.row(i)));
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

}  // namespace revmine
