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

#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "revmine/corpus.hpp"
#include "revmine/error.hpp"

namespace revmine {

/// RFC-4180 reader: quoted fields may contain commas, doubled quotes and line
/// breaks. Returns records with their starting line numbers.
inline std::vector<std::pair<std::size_t, std::vector<std::string>>> read_csv_records(std::istream& in) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> out;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t record_line = 1;
  char ch;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) out.emplace_back(record_line, std::move(record));
    record.clear();
  };
  while (in.get(ch)) {
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (field_started || !field.empty()) throw FormatError("stray quote inside unquoted field", line);
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        record_line = line;
        break;
      default:
        field.push_back(ch);
    }
  }
  if (in_quotes) throw FormatError("unterminated quoted field", record_line);
  if (!field.empty() || !record.empty()) end_record();
  return out;
}

namespace detail {

inline std::optional<int> parse_rating(const std::string& s, std::size_t line) {
  if (s.empty()) return std::nullopt;
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(s, &pos);
  } catch (const std::exception&) {
    throw FormatError("rating '" + s + "' is not an integer", line);
  }
  if (pos != s.size()) throw FormatError("rating '" + s + "' is not an integer", line);
  if (v < 1 || v > 5) throw FormatError("rating " + s + " outside 1..5", line);
  return v;
}

}  // namespace detail

/// Reads `id,rating,course_title,text` rows (header required, any column
/// order) and cleans each review's text.
inline std::vector<Review> read_reviews_csv(std::istream& in) {
  auto records = read_csv_records(in);
  if (records.empty()) throw FormatError("empty CSV input", 1);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < records[0].second.size(); ++i) col[records[0].second[i]] = i;
  for (const char* name : {"id", "rating", "course_title", "text"}) {
    if (!col.contains(name)) throw FormatError(std::string("missing CSV column '") + name + "'", 1);
  }
  std::vector<Review> reviews;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& [line, f] = records[r];
    if (f.size() != records[0].second.size()) throw FormatError("wrong number of CSV fields", line);
    Review rev;
    rev.id = f[col["id"]];
    rev.rating = detail::parse_rating(f[col["rating"]], line);
    if (!f[col["course_title"]].empty()) rev.course_title = f[col["course_title"]];
    rev.raw_text = f[col["text"]];
    rev.tokens = clean_text(rev.raw_text);
    reviews.push_back(std::move(rev));
  }
  return reviews;
}

/// One JSON object per line with keys id, rating, course_title, text.
inline std::vector<Review> read_reviews_jsonl(std::istream& in) {
  std::vector<Review> reviews;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), n);
    }
    if (!j.is_object() || !j.contains("text")) throw FormatError("record needs a 'text' field", n);
    Review rev;
    try {
      rev.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                                : std::to_string(n);
      if (j.contains("rating") && !j["rating"].is_null()) {
        const auto& rj = j["rating"];
        rev.rating = detail::parse_rating(rj.is_string() ? rj.get<std::string>() : rj.dump(), n);
      }
      if (j.contains("course_title") && !j["course_title"].is_null()) {
        rev.course_title = j["course_title"].get<std::string>();
      }
      rev.raw_text = j["text"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad field type: ") + e.what(), n);
    }
    rev.tokens = clean_text(rev.raw_text);
    reviews.push_back(std::move(rev));
  }
  return reviews;
}

inline void write_dataset_jsonl(const Dataset& ds, std::ostream& os) {
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.reviews()[i];
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["task"] = task_name(ds.task());
    j["label"] = ds.class_name(ds.labels()[i]);
    j["rating"] = r.rating ? nlohmann::ordered_json(*r.rating) : nlohmann::ordered_json(nullptr);
    j["course_title"] = r.course_title ? nlohmann::ordered_json(*r.course_title) : nlohmann::ordered_json(nullptr);
    j["text"] = r.raw_text;
    j["tokens"] = r.tokens;
    os << j.dump() << '\n';
  }
}

inline std::string dataset_to_jsonl(const Dataset& ds) {
  std::ostringstream os;
  write_dataset_jsonl(ds, os);
  return os.str();
}

inline Dataset read_dataset_jsonl(std::istream& in) {
  std::vector<Review> reviews;
  std::vector<ClassId> labels;
  std::optional<Task> task;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const Task t = parse_task(j.at("task").get<std::string>());
      if (task && *task != t) throw FormatError("mixed tasks in one dataset", n);
      task = t;
      Review r;
      r.id = j.at("id").get<std::string>();
      if (!j.at("rating").is_null()) r.rating = detail::parse_rating(std::to_string(j["rating"].get<int>()), n);
      if (!j.at("course_title").is_null()) r.course_title = j["course_title"].get<std::string>();
      r.raw_text = j.at("text").get<std::string>();
      r.tokens = j.at("tokens").get<std::vector<std::string>>();
      labels.push_back(class_id(t, j.at("label").get<std::string>()));
      reviews.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("dataset record: ") + e.what(), n);
    } catch (const DomainError& e) {
      throw FormatError(e.what(), n);
    }
  }
  if (!task) throw FormatError("empty dataset file");
  return Dataset(*task, std::move(reviews), std::move(labels));
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset '" + path + "'");
  return read_dataset_jsonl(in);
}

/// statistic,value rows: record counts, drops, class balance and token-length
/// summary (sample std).
inline void write_stats_csv(const Dataset& ds, const DropCounts& dropped, std::ostream& os) {
  os << "statistic,value\n";
  os << "reviews," << ds.size() << '\n';
  os << "dropped_short," << dropped.too_short << '\n';
  os << "dropped_unlabeled," << dropped.unlabeled << '\n';
  for (std::size_t c = 0; c < n_classes(ds.task()); ++c) {
    auto it = ds.class_counts().find(static_cast<ClassId>(c));
    const std::size_t count = it == ds.class_counts().end() ? 0 : it->second;
    char pct[32];
    std::snprintf(pct, sizeof pct, "%.2f", 100.0 * static_cast<double>(count) / static_cast<double>(ds.size()));
    os << "count_" << class_names(ds.task())[c] << ',' << count << '\n';
    os << "percent_" << class_names(ds.task())[c] << ',' << pct << '\n';
  }
  std::size_t mn = SIZE_MAX, mx = 0;
  double sum = 0.0;
  for (const auto& r : ds.reviews()) {
    mn = std::min(mn, r.tokens.size());
    mx = std::max(mx, r.tokens.size());
    sum += static_cast<double>(r.tokens.size());
  }
  const double mean = sum / static_cast<double>(ds.size());
  double ss = 0.0;
  for (const auto& r : ds.reviews()) ss += std::pow(static_cast<double>(r.tokens.size()) - mean, 2);
  const double sd = ds.size() > 1 ? std::sqrt(ss / static_cast<double>(ds.size() - 1)) : 0.0;
  char buf[64];
  os << "tokens_min," << mn << '\n';
  std::snprintf(buf, sizeof buf, "%.4f", mean);
  os << "tokens_mean," << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.4f", sd);
  os << "tokens_std," << buf << '\n';
  os << "tokens_max," << mx << '\n';
}

inline void write_ngrams_csv(const Dataset& ds, const std::map<ClassId, std::vector<NgramStat>>& stats,
                             std::ostream& os) {
  os << "label,rank,ngram,score\n";
  char buf[64];
  for (const auto& [label, list] : stats) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      std::string g;
      for (std::size_t k = 0; k < list[i].ngram.size(); ++k) g += (k ? " " : "") + list[i].ngram[k];
      for (std::size_t q = g.find('"'); q != std::string::npos; q = g.find('"', q + 2)) g.insert(q, 1, '"');
      std::snprintf(buf, sizeof buf, "%.6f", list[i].score);
      os << ds.class_name(label) << ',' << i + 1 << ",\"" << g << "\"," << buf << '\n';
    }
  }
}

}  // namespace revmine
