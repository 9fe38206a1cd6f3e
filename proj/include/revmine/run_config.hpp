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

// One JSON document per run. Command-line flags override its fields, and
// its fields override built-in defaults.

#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "revmine/corpus.hpp"
#include "revmine/error.hpp"
#include "revmine/eval.hpp"

namespace revmine {

/// Environment variable naming the output root when neither a flag nor the
/// config sets one.
inline constexpr const char* kOutputRootEnv = "REVMINE_OUTPUT_ROOT";
inline constexpr const char* kDefaultOutputRoot = "revmine-out";

inline std::size_t default_folds(Task task) { return task == Task::sentiment ? 10 : 5; }

struct RunConfig {
  std::optional<Task> task;
  std::string dataset;
  ModelSpec model;
  std::optional<std::size_t> k;
  std::uint64_t seed = 1;
  std::optional<std::string> output_dir;
  std::vector<std::string> report_formats{"json", "csv", "markdown"};

  /// Relative paths resolve against `base_dir`.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    if (!j.is_object()) throw ConfigError("config", "must be a JSON object");
    RunConfig c;
    bool have_model = false;
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      const auto& v = it.value();
      try {
        if (key == "task") {
          c.task = parse_task(v.get<std::string>());
        } else if (key == "dataset") {
          c.dataset = resolve(v.get<std::string>(), base_dir);
        } else if (key == "model") {
          c.model = ModelSpec::from_json(v, "model");
          have_model = true;
        } else if (key == "cv") {
          if (!v.is_object()) throw ConfigError("cv", "must be an object");
          for (auto cv = v.begin(); cv != v.end(); ++cv) {
            try {
              if (cv.key() == "k") {
                c.k = cv.value().get<std::size_t>();
              } else if (cv.key() == "seed") {
                c.seed = cv.value().get<std::uint64_t>();
              } else {
                throw DomainError("unknown field");
              }
            } catch (const nlohmann::json::exception& e) {
              throw ConfigError("cv." + cv.key(), std::string("wrong type: ") + e.what());
            } catch (const DomainError& e) {
              throw ConfigError("cv." + cv.key(), e.what());
            }
          }
        } else if (key == "output_dir") {
          c.output_dir = resolve(v.get<std::string>(), base_dir);
        } else if (key == "report_formats") {
          c.report_formats = v.get<std::vector<std::string>>();
        } else {
          throw DomainError("unknown field");
        }
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(key, std::string("wrong type: ") + e.what());
      } catch (const DomainError& e) {
        throw ConfigError(key, e.what());
      }
    }
    if (!have_model) throw ConfigError("model", "missing");
    return c;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config", std::string("'") + path + "' is not valid JSON: " + e.what());
    }
    return from_json(j, std::filesystem::path(path).parent_path());
  }

  /// Checks what only holds once overrides are applied.
  void validate() const {
    if (dataset.empty()) throw ConfigError("dataset", "missing");
    if (!std::filesystem::is_regular_file(dataset)) throw ConfigError("dataset", "no such file '" + dataset + "'");
    if (k && *k < 2) throw ConfigError("cv.k", "must be at least 2");
    if (report_formats.empty()) throw ConfigError("report_formats", "must name at least one format");
    for (const auto& f : report_formats) {
      if (f != "json" && f != "csv" && f != "markdown") {
        throw ConfigError("report_formats", "unknown format '" + f + "'");
      }
    }
  }

  bool wants(const std::string& format) const {
    return std::find(report_formats.begin(), report_formats.end(), format) != report_formats.end();
  }

  std::size_t folds_for(Task t) const { return k.value_or(default_folds(t)); }

 private:
  static std::string resolve(const std::string& p, const std::filesystem::path& base_dir) {
    const std::filesystem::path path(p);
    if (path.is_absolute() || base_dir.empty()) return path.lexically_normal().string();
    return (base_dir / path).lexically_normal().string();
  }
};

/// Flag, then config, then the environment, then ./revmine-out.
inline std::filesystem::path output_root(const std::optional<std::string>& flag,
                                         const std::optional<std::string>& config = std::nullopt) {
  if (flag && !flag->empty()) return *flag;
  if (config && !config->empty()) return *config;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return kDefaultOutputRoot;
}

}  // namespace revmine
