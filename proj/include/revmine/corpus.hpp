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

// Review records, text cleaning, sentiment/topic labeling, descriptive
// n-gram statistics and seeded synthetic corpora.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "revmine/error.hpp"
#include "revmine/random.hpp"
#include "revmine/utf8.hpp"
#include "revmine/vectorizer.hpp"

namespace revmine {

enum class Task { sentiment, topic };

enum class SentimentLabel { positive = 0, negative = 1 };

/// Integer codes are the published topic codes.
enum class TopicLabel { programming = 1, web_development = 2, non_programming = 3, data_science = 4 };

/// Index of a label within its task's declaration order.
using ClassId = int;

inline constexpr std::array<std::string_view, 2> kSentimentNames{"positive", "negative"};
inline constexpr std::array<std::string_view, 4> kTopicNames{"programming", "web_development",
                                                             "non_programming", "data_science"};

inline std::span<const std::string_view> class_names(Task task) {
  if (task == Task::sentiment) return kSentimentNames;
  return kTopicNames;
}

inline std::size_t n_classes(Task task) { return class_names(task).size(); }

inline std::string_view task_name(Task task) { return task == Task::sentiment ? "sentiment" : "topic"; }

inline Task parse_task(std::string_view s) {
  if (s == "sentiment") return Task::sentiment;
  if (s == "topic") return Task::topic;
  throw DomainError("unknown task '" + std::string(s) + "'");
}

inline ClassId class_id(Task task, std::string_view name) {
  auto names = class_names(task);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<ClassId>(i);
  }
  throw DomainError("unknown " + std::string(task_name(task)) + " label '" + std::string(name) + "'");
}

inline ClassId to_class(SentimentLabel l) { return static_cast<ClassId>(l); }
inline ClassId to_class(TopicLabel l) { return static_cast<ClassId>(l) - 1; }

struct Review {
  std::string id;
  std::string raw_text;
  std::optional<int> rating;
  std::optional<std::string> course_title;
  std::vector<std::string> tokens;

  bool operator==(const Review&) const = default;
};

/// Strips `<[^>]*>` tags, lowercases, splits on Unicode whitespace and trims
/// leading/trailing punctuation from every token. Tags are replaced by a
/// space so adjacent words never fuse.
inline std::vector<std::string> clean_text(std::string_view raw) {
  const std::u32string in = utf8::decode(raw);
  std::u32string text;
  text.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == U'<') {
      const auto close = in.find(U'>', i + 1);
      if (close != std::u32string::npos) {
        text.push_back(U' ');
        i = close;
        continue;
      }
    }
    text.push_back(utf8::to_lower(in[i]));
  }

  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && utf8::is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !utf8::is_space(text[j])) ++j;
    std::size_t b = i;
    std::size_t e = j;
    while (b < e && utf8::is_punct(text[b])) ++b;
    while (e > b && utf8::is_punct(text[e - 1])) --e;
    if (e > b) tokens.push_back(utf8::encode(std::u32string_view(text).substr(b, e - b)));
    i = j;
  }
  return tokens;
}

inline SentimentLabel derive_sentiment_label(int rating) {
  if (rating < 1 || rating > 5) {
    throw DomainError("rating " + std::to_string(rating) + " outside 1..5");
  }
  return rating >= 4 ? SentimentLabel::positive : SentimentLabel::negative;
}

/// Ordered case-insensitive substring rules; the first matching rule wins.
class TopicMap {
 public:
  struct Rule {
    std::string pattern;  // lowercased
    TopicLabel topic;
  };

  static constexpr int kVersion = 1;

  TopicMap() = default;
  explicit TopicMap(std::vector<Rule> rules) : rules_(std::move(rules)) {
    for (auto& r : rules_) r.pattern = utf8::lower(r.pattern);
  }

  /// Built from the example courses of each topic; web development rules come
  /// first so "javascript" never falls through to the "java" rule.
  static TopicMap default_map() {
    using T = TopicLabel;
    return TopicMap({{"web development", T::web_development}, {"web developer", T::web_development},
                     {"javascript", T::web_development},      {"full stack", T::web_development},
                     {"full-stack", T::web_development},      {"front end", T::web_development},
                     {"front-end", T::web_development},       {"back end", T::web_development},
                     {"back-end", T::web_development},        {"web design", T::web_development},
                     {"data science", T::data_science},       {"data analytics", T::data_science},
                     {"business analytics", T::data_science}, {"bus. analytics", T::data_science},
                     {"data analysis", T::data_science},      {"machine learning", T::data_science},
                     {"analytics", T::data_science},          {".net", T::programming},
                     {"ios", T::programming},                 {"java", T::programming},
                     {"python", T::programming},              {"android", T::programming},
                     {"software engineering", T::programming}, {"programming", T::programming},
                     {"coding", T::programming},              {"ux design", T::non_programming},
                     {"ui design", T::non_programming},       {"ux/ui", T::non_programming},
                     {"marketing", T::non_programming},       {"product management", T::non_programming},
                     {"design", T::non_programming}});
  }

  const std::vector<Rule>& rules() const { return rules_; }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["version"] = kVersion;
    auto& arr = j["rules"] = nlohmann::ordered_json::array();
    for (const auto& r : rules_) {
      arr.push_back({{"pattern", r.pattern}, {"topic", kTopicNames[static_cast<std::size_t>(to_class(r.topic))]}});
    }
    return j;
  }

  static TopicMap from_json(const nlohmann::json& j) {
    if (j.value("version", 0) != kVersion) throw FormatError("unsupported topic map version");
    std::vector<Rule> rules;
    for (const auto& r : j.at("rules")) {
      const auto id = class_id(Task::topic, r.at("topic").get<std::string>());
      rules.push_back({r.at("pattern").get<std::string>(), static_cast<TopicLabel>(id + 1)});
    }
    return TopicMap(std::move(rules));
  }

  static TopicMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open topic map '" + path + "'");
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("topic map '" + path + "': " + e.what());
    }
  }

 private:
  std::vector<Rule> rules_;
};

inline std::optional<TopicLabel> assign_topic(std::string_view course_title, const TopicMap& topic_map) {
  const std::string title = utf8::lower(course_title);
  for (const auto& rule : topic_map.rules()) {
    if (!rule.pattern.empty() && title.find(rule.pattern) != std::string::npos) return rule.topic;
  }
  return std::nullopt;
}

/// Immutable labeled collection for one task.
class Dataset {
 public:
  Dataset(Task task, std::vector<Review> reviews, std::vector<ClassId> labels)
      : task_(task), reviews_(std::move(reviews)), labels_(std::move(labels)) {
    if (reviews_.size() != labels_.size()) throw DomainError("dataset: reviews and labels differ in length");
    const auto n = static_cast<ClassId>(revmine::n_classes(task_));
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] < 0 || labels_[i] >= n) throw DomainError("dataset: label out of range");
      if (reviews_[i].tokens.size() < 2) {
        throw DomainError("dataset: review '" + reviews_[i].id + "' has fewer than 2 tokens");
      }
      ++class_counts_[labels_[i]];
    }
  }

  Task task() const { return task_; }
  std::size_t size() const { return reviews_.size(); }
  const std::vector<Review>& reviews() const { return reviews_; }
  const std::vector<ClassId>& labels() const { return labels_; }
  /// Only labels that occur; every count >= 1.
  const std::map<ClassId, std::size_t>& class_counts() const { return class_counts_; }

  /// Occurring labels in declaration order.
  std::vector<ClassId> present_classes() const {
    std::vector<ClassId> out;
    for (auto& [c, n] : class_counts_) out.push_back(c);
    return out;
  }

  std::string_view class_name(ClassId c) const { return class_names(task_)[static_cast<std::size_t>(c)]; }

  TokenDocs token_docs() const {
    TokenDocs docs;
    docs.reserve(reviews_.size());
    for (const auto& r : reviews_) docs.push_back(r.tokens);
    return docs;
  }

 private:
  Task task_;
  std::vector<Review> reviews_;
  std::vector<ClassId> labels_;
  std::map<ClassId, std::size_t> class_counts_;
};

/// Why reviews were left out of a built dataset.
struct DropCounts {
  std::size_t too_short = 0;
  std::size_t unlabeled = 0;
};

/// Keeps reviews with at least two tokens and a derivable label, in input
/// order. Reviews must already carry tokens (see clean_text).
inline Dataset build_dataset(std::vector<Review> reviews, Task task, const TopicMap* topic_map = nullptr,
                             DropCounts* dropped = nullptr) {
  if (task == Task::topic && topic_map == nullptr) throw DomainError("build_dataset: topic task needs a topic map");
  DropCounts local;
  std::vector<Review> kept;
  std::vector<ClassId> labels;
  for (auto& r : reviews) {
    if (r.tokens.size() < 2) {
      ++local.too_short;
      continue;
    }
    std::optional<ClassId> label;
    if (task == Task::sentiment) {
      if (r.rating) label = to_class(derive_sentiment_label(*r.rating));
    } else if (r.course_title) {
      if (auto t = assign_topic(*r.course_title, *topic_map)) label = to_class(*t);
    }
    if (!label) {
      ++local.unlabeled;
      continue;
    }
    kept.push_back(std::move(r));
    labels.push_back(*label);
  }
  if (dropped) *dropped = local;
  if (kept.empty()) throw DomainError("build_dataset: no reviews survive cleaning and labeling");
  return Dataset(task, std::move(kept), std::move(labels));
}

/// Fixed 50-word English stop list, applied only to n-gram statistics.
inline const std::unordered_set<std::string>& stop_words() {
  static const std::unordered_set<std::string> words{
      "a",    "an",   "the",   "and",  "or",   "but",  "of",    "to",   "in",    "on",
      "at",   "for",  "with",  "by",   "from", "as",   "is",    "are",  "was",   "were",
      "be",   "been", "being", "it",   "its",  "this", "that",  "these", "those", "i",
      "me",   "my",   "we",    "our",  "you",  "your", "he",    "she",  "they",  "them",
      "their", "so",  "if",    "then", "than", "there", "which", "who", "am",    "has"};
  return words;
}

struct NgramStat {
  std::vector<std::string> ngram;
  ClassId label = 0;
  double score = 0.0;
};

namespace detail {

inline TokenDoc ngram_doc(const TokenDoc& tokens, std::size_t n) {
  TokenDoc filtered;
  for (const auto& t : tokens) {
    if (!stop_words().contains(t)) filtered.push_back(t);
  }
  TokenDoc grams;
  for (std::size_t i = 0; i + n <= filtered.size(); ++i) {
    std::string g = filtered[i];
    for (std::size_t k = 1; k < n; ++k) g += ' ' + filtered[i + k];
    grams.push_back(std::move(g));
  }
  return grams;
}

}  // namespace detail

/// Per class, the k n-grams with the highest mean TF-IDF over that class's
/// documents (stop words removed first). Ties are lexicographic. Every label
/// of the task has an entry, empty when the class has no documents.
inline std::map<ClassId, std::vector<NgramStat>> top_ngrams(const Dataset& dataset, std::size_t n, std::size_t k) {
  if (n < 1 || n > 3) throw DomainError("top_ngrams: n must be in 1..3, got " + std::to_string(n));
  if (dataset.size() == 0) throw DomainError("top_ngrams: empty dataset");
  std::map<ClassId, std::vector<NgramStat>> out;
  for (std::size_t c = 0; c < n_classes(dataset.task()); ++c) {
    const auto label = static_cast<ClassId>(c);
    auto& ranked = out[label];
    TokenDocs docs;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset.labels()[i] == label) docs.push_back(detail::ngram_doc(dataset.reviews()[i].tokens, n));
    }
    if (docs.empty()) continue;
    bool any = std::any_of(docs.begin(), docs.end(), [](const auto& d) { return !d.empty(); });
    if (!any) continue;
    const Vocabulary vocab = build_vocabulary(docs);
    const SparseMatrix m = tfidf_transform(vocab, docs);
    std::vector<double> sums(vocab.size(), 0.0);
    for (const auto& row : m.rows()) {
      for (const auto& e : row) sums[e.col] += e.value;
    }
    std::vector<std::int32_t> ids;
    for (std::size_t id = 2; id < vocab.size(); ++id) ids.push_back(static_cast<std::int32_t>(id));
    const double nd = static_cast<double>(docs.size());
    std::sort(ids.begin(), ids.end(), [&](auto a, auto b) {
      if (sums[a] != sums[b]) return sums[a] > sums[b];
      return vocab.token(a) < vocab.token(b);
    });
    if (ids.size() > k) ids.resize(k);
    for (auto id : ids) {
      NgramStat s;
      std::string_view g = vocab.token(id);
      std::size_t start = 0;
      while (true) {
        auto sp = g.find(' ', start);
        s.ngram.emplace_back(g.substr(start, sp - start));
        if (sp == std::string_view::npos) break;
        start = sp + 1;
      }
      s.label = label;
      s.score = sums[id] / nd;
      ranked.push_back(std::move(s));
    }
  }
  return out;
}

/// Recipe for a synthetic labeled corpus: background vocabulary shared by
/// all classes plus class-specific signal tokens.
struct SynthSpec {
  Task task = Task::sentiment;
  /// One prior per label of the task, in declaration order.
  std::vector<double> priors;
  std::vector<std::string> background;
  /// One non-empty signal vocabulary per label.
  std::vector<std::vector<std::string>> signal;
  std::size_t min_len = 8;
  std::size_t max_len = 20;
  /// Signal tokens placed in each document.
  std::size_t signal_count = 2;
  /// Late-signal mode: signal tokens only at positions >= signal_start.
  std::size_t signal_start = 0;
  /// Fraction of documents whose signal tokens come from a random other class.
  double label_noise = 0.0;

  /// Generated vocabulary: `background_size` shared words and
  /// `signal_size` distinct words per class.
  static SynthSpec generated(Task task, std::vector<double> priors, std::size_t background_size = 200,
                             std::size_t signal_size = 5) {
    SynthSpec s;
    s.task = task;
    s.priors = std::move(priors);
    char buf[32];
    for (std::size_t i = 0; i < background_size; ++i) {
      std::snprintf(buf, sizeof buf, "w%03zu", i);
      s.background.emplace_back(buf);
    }
    for (std::size_t c = 0; c < n_classes(task); ++c) {
      std::vector<std::string> words;
      for (std::size_t i = 0; i < signal_size; ++i) {
        std::snprintf(buf, sizeof buf, "%.3s%zu", std::string(class_names(task)[c]).c_str(), i);
        words.emplace_back(buf);
      }
      s.signal.push_back(std::move(words));
    }
    return s;
  }
};

/// Exact per-class quotas by largest-remainder rounding; remainder ties go to
/// the lower class index.
inline std::vector<std::size_t> quota_counts(std::span<const double> priors, std::size_t size) {
  std::vector<std::size_t> counts(priors.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < priors.size(); ++c) {
    const double exact = priors[c] * static_cast<double>(size);
    counts[c] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += counts[c];
    rema.emplace_back(exact - static_cast<double>(counts[c]), c);
  }
  std::stable_sort(rema.begin(), rema.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < size; ++i, ++assigned) ++counts[rema[i % rema.size()].second];
  return counts;
}

inline Dataset synth_corpus(std::uint64_t seed, std::size_t size, const SynthSpec& spec) {
  const std::size_t nc = n_classes(spec.task);
  if (size == 0) throw DomainError("synth_corpus: size must be positive");
  if (spec.priors.size() != nc) throw DomainError("synth_corpus: need one prior per class");
  if (spec.signal.size() != nc) throw DomainError("synth_corpus: need one signal vocabulary per class");
  double total = 0.0;
  for (std::size_t c = 0; c < nc; ++c) {
    if (!(spec.priors[c] > 0.0)) {
      throw DomainError("synth_corpus: class '" + std::string(class_names(spec.task)[c]) + "' has zero probability");
    }
    if (spec.signal[c].empty()) throw DomainError("synth_corpus: empty signal vocabulary");
    total += spec.priors[c];
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("synth_corpus: priors must sum to 1");
  if (spec.background.empty()) throw DomainError("synth_corpus: empty background vocabulary");
  if (spec.min_len < 2 || spec.max_len < spec.min_len) throw DomainError("synth_corpus: bad length range");
  if (spec.signal_start + spec.signal_count > spec.min_len) {
    throw DomainError("synth_corpus: min_len too short for signal placement");
  }
  if (spec.label_noise < 0.0 || spec.label_noise > 1.0) throw DomainError("synth_corpus: label_noise outside [0,1]");

  Rng rng(seed);
  const auto counts = quota_counts(spec.priors, size);
  std::vector<ClassId> labels;
  for (std::size_t c = 0; c < nc; ++c) labels.insert(labels.end(), counts[c], static_cast<ClassId>(c));
  rng.shuffle(labels);

  static const std::array<std::string_view, 4> titles{"Java Programming Bootcamp", "Full Stack Web Development",
                                                      "UX Design Immersive", "Data Science Intensive"};
  std::vector<Review> reviews;
  reviews.reserve(size);
  char idbuf[32];
  for (std::size_t i = 0; i < size; ++i) {
    const ClassId label = labels[i];
    const std::size_t len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
    std::vector<std::string> tokens(len);
    for (auto& t : tokens) t = spec.background[rng.below(spec.background.size())];
    std::size_t source = static_cast<std::size_t>(label);
    if (nc > 1 && spec.label_noise > 0.0 && rng.uniform() < spec.label_noise) {
      source = (source + 1 + rng.below(nc - 1)) % nc;
    }
    std::vector<std::size_t> positions(len - spec.signal_start);
    std::iota(positions.begin(), positions.end(), spec.signal_start);
    rng.shuffle(positions);
    for (std::size_t s = 0; s < spec.signal_count; ++s) {
      const auto& words = spec.signal[source];
      tokens[positions[s]] = words[rng.below(words.size())];
    }
    Review r;
    std::snprintf(idbuf, sizeof idbuf, "syn-%06zu", i);
    r.id = idbuf;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (t) r.raw_text += ' ';
      r.raw_text += tokens[t];
    }
    if (spec.task == Task::sentiment) {
      r.rating = label == to_class(SentimentLabel::positive) ? 4 + static_cast<int>(rng.below(2))
                                                             : 1 + static_cast<int>(rng.below(3));
    } else {
      r.rating = 1 + static_cast<int>(rng.below(5));
      r.course_title = std::string(titles[static_cast<std::size_t>(label)]);
    }
    r.tokens = clean_text(r.raw_text);
    reviews.push_back(std::move(r));
  }
  return Dataset(spec.task, std::move(reviews), std::move(labels));
}

}  // namespace revmine
