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

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "revmine/corpus.hpp"
#include "revmine/transformer.hpp"

namespace revmine {
namespace {

using tensor::Tensor;

TEST(SubwordVocab, MostFrequentPairMergesFirst) {
  const TokenDocs corpus{{"abab", "abab"}};
  // characters: a, ##a, ##b
  const auto v = train_subword_vocab(corpus, 8);
  ASSERT_EQ(v.size(), 8u);
  EXPECT_EQ(v.piece(7), "ab");
  const auto bigger = train_subword_vocab(corpus, 9);
  EXPECT_EQ(bigger.piece(8), "##ab");
}

TEST(SubwordVocab, ZeroMergesAndTooSmall) {
  const TokenDocs corpus{{"abc", "ca"}};
  // a b c initial: a, c; continuation: ##b, ##c, ##a
  const auto v = train_subword_vocab(corpus, 9);
  EXPECT_EQ(v.size(), 9u);
  for (std::size_t i = 4; i < v.size(); ++i) EXPECT_LE(utf8::decode(v.piece(static_cast<std::int32_t>(i))).size(), 3u);
  EXPECT_THROW(train_subword_vocab(corpus, 8), DomainError);
  EXPECT_THROW(train_subword_vocab({}, 100), DomainError);
}

TEST(SubwordVocab, DeterministicAndStopsWhenNothingToMerge) {
  const TokenDocs corpus{{"hello", "help", "yellow", "hel"}, {"low", "lower"}};
  const auto a = train_subword_vocab(corpus, 40), b = train_subword_vocab(corpus, 40);
  EXPECT_EQ(a.pieces(), b.pieces());
  const auto all = train_subword_vocab(corpus, 10000);
  EXPECT_LT(all.size(), 10000u);
  std::vector<std::int32_t> ids;
  all.encode_word("yellow", ids);
  EXPECT_EQ(ids.size(), 1u);
}

TEST(SubwordVocab, TextRoundTripAndBadFiles) {
  const auto v = train_subword_vocab({{"hello", "world"}}, 20);
  std::stringstream ss;
  v.write(ss);
  const auto back = SubwordVocab::read(ss);
  EXPECT_EQ(back.pieces(), v.pieces());
  std::istringstream missing("[PAD]\n[UNK]\n[SEP]\n");
  EXPECT_THROW(SubwordVocab::read(missing), FormatError);
  std::istringstream dup("[PAD]\n[UNK]\n[CLS]\n[SEP]\nab\nab\n");
  EXPECT_THROW(SubwordVocab::read(dup), FormatError);
}

TEST(Encode, LayoutExamples) {
  const auto v = train_subword_vocab({{"cat", "cat", "dog"}}, 30);
  const auto empty = encode(v, {{}}, 4);
  EXPECT_EQ(empty.ids, (std::vector<std::int32_t>{2, 3, 0, 0}));
  EXPECT_EQ(empty.attention_mask, (std::vector<std::int32_t>{1, 1, 0, 0}));
  EXPECT_EQ(empty.segment_ids, (std::vector<std::int32_t>{0, 0, 0, 0}));

  const auto one = encode(v, {{"cat"}}, 8);
  EXPECT_EQ(one.ids, (std::vector<std::int32_t>{2, v.id("cat"), 3, 0, 0, 0, 0, 0}));

  TokenDoc long_doc(100, "dog");
  const auto cut = encode(v, {long_doc}, 50);
  ASSERT_EQ(cut.ids.size(), 50u);
  EXPECT_EQ(cut.ids.front(), SubwordVocab::cls_id);
  EXPECT_EQ(cut.ids.back(), SubwordVocab::sep_id);
  EXPECT_EQ(std::count(cut.attention_mask.begin(), cut.attention_mask.end(), 1), 50);
  EXPECT_THROW(encode(v, {{}}, 1), DomainError);
}

TEST(Encode, UnknownCharactersAndContinuations) {
  const auto v = train_subword_vocab({{"ab", "ab"}}, 7);  // a, ##b, then the merge "ab"
  std::vector<std::int32_t> ids;
  v.encode_word("abz", ids);
  EXPECT_EQ(ids, (std::vector<std::int32_t>{v.id("ab"), SubwordVocab::unk_id}));
  ids.clear();
  v.encode_word("zab", ids);  // "ab" is word-initial only
  EXPECT_EQ(ids, (std::vector<std::int32_t>{SubwordVocab::unk_id, SubwordVocab::unk_id, v.id("##b")}));
}

TEST(Encode, IsTotalOnArbitraryUtf8) {
  const auto v = train_subword_vocab({{"naïve", "café", "日本"}}, 40);
  Rng rng(3);
  const char32_t alphabet[] = {U'a', U'é', U'日', U'本', U'\U0001F600', U'z', U'#', U'ï'};
  for (int trial = 0; trial < 200; ++trial) {
    TokenDoc doc;
    for (std::size_t w = rng.below(6); w > 0; --w) {
      std::u32string s;
      for (std::size_t c = 1 + rng.below(6); c > 0; --c) s.push_back(alphabet[rng.below(8)]);
      doc.push_back(utf8::encode(s));
    }
    const std::size_t maxlen = 2 + rng.below(10);
    const auto b = encode(v, {doc}, maxlen);
    ASSERT_EQ(b.ids.size(), maxlen);
    EXPECT_EQ(b.ids[0], SubwordVocab::cls_id);
    const auto used = static_cast<std::size_t>(std::count(b.attention_mask.begin(), b.attention_mask.end(), 1));
    EXPECT_EQ(b.ids[used - 1], SubwordVocab::sep_id);
    for (std::size_t i = 0; i < maxlen; ++i) {
      EXPECT_EQ(b.attention_mask[i] == 0, b.ids[i] == SubwordVocab::pad_id);
      EXPECT_LT(static_cast<std::size_t>(b.ids[i]), v.size());
    }
  }
}

Tensor random_tensor(tensor::Shape s, Rng& rng) {
  std::vector<double> v(tensor::numel(s));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from(std::move(s), std::move(v), true);
}

TEST(Attention, SingleVisibleKeyCopiesItsValue) {
  Rng rng(1);
  const auto Q = random_tensor({1, 2, 4}, rng), K = random_tensor({1, 3, 4}, rng), V = random_tensor({1, 3, 5}, rng);
  const auto out = attention(Q, K, V, std::vector<double>{0, 1, 0}).output;
  for (std::size_t q = 0; q < 2; ++q) {
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(out.values()[q * 5 + j], V.values()[5 + j], 1e-12);
  }
}

TEST(Attention, IdenticalValuesGiveThatValue) {
  Rng rng(2);
  const auto Q = random_tensor({1, 1, 3}, rng);
  auto K = Tensor::from({1, 2, 3}, {0.2, 0.4, -0.1, 0.2, 0.4, -0.1});
  auto V = Tensor::from({1, 2, 2}, {1.5, -2.0, 1.5, -2.0});
  const auto out = attention(Q, K, V, std::vector<double>{1, 1}).output;
  EXPECT_NEAR(out.values()[0], 1.5, 1e-12);
  EXPECT_NEAR(out.values()[1], -2.0, 1e-12);
}

TEST(Attention, WeightRowsNormalizeOverVisibleKeys) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t g = 1 + rng.below(3), q = 1 + rng.below(5), k = 1 + rng.below(6);
    const auto Q = random_tensor({g, q, 4}, rng), K = random_tensor({g, k, 4}, rng), V = random_tensor({g, k, 2}, rng);
    std::vector<double> mask(g * k);
    for (std::size_t i = 0; i < g; ++i) {
      for (std::size_t j = 0; j < k; ++j) mask[i * k + j] = rng.uniform() < 0.6 ? 1.0 : 0.0;
      mask[i * k + rng.below(k)] = 1.0;
    }
    const auto w = attention(Q, K, V, mask).weights;
    for (std::size_t i = 0; i < g; ++i) {
      for (std::size_t a = 0; a < q; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < k; ++b) {
          const double x = w.values()[(i * q + a) * k + b];
          if (mask[i * k + b] == 0.0) {
            EXPECT_LT(x, 1e-7);
          }
          s += x;
        }
        EXPECT_NEAR(s, 1.0, 1e-6);
      }
    }
  }
}

TEST(Attention, AllMaskedIsAnError) {
  Rng rng(4);
  const auto Q = random_tensor({2, 1, 2}, rng), K = random_tensor({2, 2, 2}, rng), V = random_tensor({2, 2, 2}, rng);
  EXPECT_THROW(attention(Q, K, V, std::vector<double>{1, 0, 0, 0}), DomainError);
  EXPECT_THROW(attention(Q, K, V, std::vector<double>{1, 1}), DomainError);
  EXPECT_THROW(attention(Q, random_tensor({2, 2, 3}, rng), V, std::vector<double>{1, 1, 1, 1}), DomainError);
}

EncoderConfig tiny_config() {
  EncoderConfig c;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_model = 8;
  c.d_ff = 12;
  c.maxlen = 7;
  c.seed = 5;
  return c;
}

SubwordVocab tiny_vocab() { return train_subword_vocab({{"red", "green", "blue", "bed", "reed"}}, 24); }

TEST(Encoder, ShapeAndPaddingInvariance) {
  const TransformerModel m(tiny_config(), tiny_vocab(), 3);
  auto b = encode(m.vocab(), {{"red", "bed"}, {"blue"}, {}}, 7);
  const std::vector<std::size_t> rows{0, 1, 2};
  const auto h = m.encode_hidden(b, rows);
  EXPECT_EQ(h.shape(), (tensor::Shape{3, 7, 8}));
  auto changed = b;
  for (std::size_t i = 0; i < changed.ids.size(); ++i) {
    if (changed.attention_mask[i] == 0) changed.ids[i] = static_cast<std::int32_t>(4 + i % 10);
  }
  const auto h2 = m.encode_hidden(changed, rows);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t t = 0; t < 7; ++t) {
      if (b.attention_mask[r * 7 + t] == 0) continue;
      for (std::size_t j = 0; j < 8; ++j) {
        EXPECT_DOUBLE_EQ(h.values()[(r * 7 + t) * 8 + j], h2.values()[(r * 7 + t) * 8 + j]);
      }
    }
  }
  EXPECT_EQ(m.predict(b).probs, m.predict(changed).probs);
}

TEST(Encoder, LayerNormRowsAreStandardized) {
  Rng rng(8);
  const auto x = random_tensor({20, 16}, rng);
  const auto y = tensor::layer_norm(x, Tensor::from({16}, std::vector<double>(16, 1.0)), Tensor::zeros({16}));
  for (std::size_t r = 0; r < 20; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < 16; ++j) mean += y.values()[r * 16 + j] / 16.0;
    for (std::size_t j = 0; j < 16; ++j) var += std::pow(y.values()[r * 16 + j] - mean, 2) / 16.0;
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(Encoder, PositionsMatter) {
  const TransformerModel m(tiny_config(), tiny_vocab(), 2);
  const auto fwd = encode(m.vocab(), {{"red", "green", "blue"}}, 7);
  auto rev = fwd;
  // reverse the pieces between [CLS] and [SEP]
  const auto used = static_cast<std::size_t>(std::count(fwd.attention_mask.begin(), fwd.attention_mask.end(), 1));
  std::reverse(rev.ids.begin() + 1, rev.ids.begin() + static_cast<std::ptrdiff_t>(used - 1));
  ASSERT_NE(fwd.ids, rev.ids);
  EXPECT_NE(m.predict(fwd).probs, m.predict(rev).probs);
}

TEST(Encoder, GradientCheck) {
  for (std::size_t k : {2u, 3u}) {
    const TransformerModel m(tiny_config(), tiny_vocab(), k);
    const auto b = encode(m.vocab(), {{"red", "bed"}, {"blue", "green", "reed"}, {"bed"}}, 7);
    const std::vector<ClassId> y{0, 1, static_cast<ClassId>(k - 1)};
    const std::vector<std::size_t> rows{0, 1, 2};
    EXPECT_LT(tensor::grad_check([&] { return m.loss(b, y, rows); }, m.trainable(), 1e-5), 1e-4);
  }
}

TEST(Encoder, ConfigErrors) {
  auto c = tiny_config();
  c.n_heads = 3;
  try {
    TransformerModel m(c, tiny_vocab(), 2);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "n_heads");
  }
  EXPECT_THROW(EncoderConfig::from_json(nlohmann::json::parse(R"({"maxlen":1})"), "model"), ConfigError);
  EXPECT_THROW(TransformerModel(tiny_config(), tiny_vocab(), 1), DomainError);
  const TransformerModel m(tiny_config(), tiny_vocab(), 2);
  EXPECT_THROW(m.predict(encode(m.vocab(), {{"red"}}, 9)), DomainError);
}

TEST(FineTune, LearnsSeparableDataDeterministically) {
  const auto ds = synth_corpus(2, 240, SynthSpec::generated(Task::sentiment, {0.5, 0.5}, 60, 4));
  const auto docs = ds.token_docs();
  EncoderConfig c;
  c.d_model = 32;
  c.d_ff = 64;
  c.maxlen = 24;
  const auto v = train_subword_vocab(docs, 300);
  const auto X = encode(v, docs, c.maxlen);
  TransformerModel a(c, v, 2), b(c, v, 2);
  const auto ha = fit(a, X, std::span<const ClassId>(ds.labels()));
  const auto hb = fit(b, X, std::span<const ClassId>(ds.labels()));
  EXPECT_GE(ha.train_accuracy.back(), 0.9);
  EXPECT_EQ(ha.train_loss, hb.train_loss);
  EXPECT_EQ(a.predict(X).probs, b.predict(X).probs);
  const auto p = a.predict(X);
  for (std::size_t r = 0; r < X.n_rows; ++r) EXPECT_NEAR(p.probs[2 * r] + p.probs[2 * r + 1], 1.0, 1e-12);
}

TEST(FineTune, CheckpointRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "revmine_tf_ckpt";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "enc.bin").string();
  const TransformerModel m(tiny_config(), tiny_vocab(), 3);
  m.save(path);
  const auto back = TransformerModel::load(path);
  const auto b = encode(m.vocab(), {{"red", "bed"}, {"blue"}}, 7);
  EXPECT_EQ(back.predict(b).probs, m.predict(b).probs);
  EXPECT_EQ(back.vocab().pieces(), m.vocab().pieces());
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace revmine
