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

// revmine: batch entry point. Outputs land under <root>/dataset,
// <root>/results and <root>/reports.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "revmine/corpus.hpp"
#include "revmine/corpus_io.hpp"
#include "revmine/eval.hpp"
#include "revmine/format.hpp"
#include "revmine/run_config.hpp"

namespace fs = std::filesystem;
using namespace revmine;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

/// Writes the whole file or throws; nothing is left half-written on success.
void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
  }
  fs::rename(tmp, path);
  std::cout << path.string() << '\n';
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Model ids become file names; anything outside [A-Za-z0-9._-] turns into '_'.
std::string file_stem(std::string s) {
  for (auto& c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '_' || c == '-';
    if (!ok) c = '_';
  }
  return s.empty() ? "run" : s;
}

ExperimentResult load_result(const std::string& path) {
  const auto text = read_file(path);
  try {
    return ExperimentResult::from_json(nlohmann::ordered_json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path + "' is not valid JSON: " + e.what());
  } catch (const FormatError& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
}

std::vector<std::size_t> parse_values(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &pos);
    } catch (const std::exception&) {
      throw ConfigError("values", "'" + item + "' is not a non-negative integer");
    }
    if (pos != item.size()) throw ConfigError("values", "'" + item + "' is not a non-negative integer");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("values", "no values given");
  return out;
}

std::vector<double> parse_priors(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(parse_double(item));
    } catch (const std::exception&) {
      throw ConfigError("priors", "'" + item + "' is not a number");
    }
  }
  return out;
}

// --- ingest -----------------------------------------------------------------

struct IngestArgs {
  std::string input;
  std::string format = "auto";
  std::string task;
  std::optional<std::string> topic_map;
  std::optional<std::string> name;
  std::optional<std::string> out;
};

void cmd_ingest(const IngestArgs& a) {
  const Task task = [&] {
    try {
      return parse_task(a.task);
    } catch (const DomainError& e) {
      throw ConfigError("task", e.what());
    }
  }();
  std::optional<TopicMap> topics;
  if (task == Task::topic) {
    if (!a.topic_map) throw ConfigError("topic-map", "required when task is topic");
    topics = TopicMap::load(*a.topic_map);
  }
  std::string format = a.format;
  if (format == "auto") {
    const auto ext = fs::path(a.input).extension().string();
    format = ext == ".jsonl" || ext == ".json" ? "jsonl" : "csv";
  }
  std::ifstream in(a.input, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + a.input + "'");
  std::vector<Review> reviews;
  if (format == "csv") {
    reviews = read_reviews_csv(in);
  } else if (format == "jsonl") {
    reviews = read_reviews_jsonl(in);
  } else {
    throw ConfigError("format", "expected csv, jsonl or auto");
  }
  DropCounts dropped;
  const auto ds = build_dataset(std::move(reviews), task, topics ? &*topics : nullptr, &dropped);

  const auto root = output_root(a.out);
  const auto stem = file_stem(a.name.value_or(fs::path(a.input).stem().string()));
  std::ostringstream stats;
  write_stats_csv(ds, dropped, stats);
  write_file(root / "dataset" / (stem + ".jsonl"), dataset_to_jsonl(ds));
  write_file(root / "dataset" / (stem + ".stats.csv"), stats.str());
}

// --- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string task = "sentiment";
  std::size_t size = 1000;
  std::uint64_t seed = 1;
  std::string priors;
  std::size_t background = 200;
  std::size_t signal_words = 5;
  std::size_t min_len = 8;
  std::size_t max_len = 20;
  std::size_t signal_count = 2;
  std::size_t signal_start = 0;
  double label_noise = 0.0;
  std::optional<std::string> name;
  std::optional<std::string> out;
};

void cmd_synth(const SynthArgs& a) {
  const Task task = [&] {
    try {
      return parse_task(a.task);
    } catch (const DomainError& e) {
      throw ConfigError("task", e.what());
    }
  }();
  auto priors = a.priors.empty() ? std::vector<double>(n_classes(task), 1.0 / static_cast<double>(n_classes(task)))
                                 : parse_priors(a.priors);
  auto spec = SynthSpec::generated(task, std::move(priors), a.background, a.signal_words);
  spec.min_len = a.min_len;
  spec.max_len = a.max_len;
  spec.signal_count = a.signal_count;
  spec.signal_start = a.signal_start;
  spec.label_noise = a.label_noise;
  const auto ds = synth_corpus(a.seed, a.size, spec);
  const auto root = output_root(a.out);
  const auto stem = file_stem(a.name.value_or("synth-" + std::string(task_name(task)) + "-" + std::to_string(a.seed)));
  std::ostringstream stats;
  write_stats_csv(ds, {}, stats);
  write_file(root / "dataset" / (stem + ".jsonl"), dataset_to_jsonl(ds));
  write_file(root / "dataset" / (stem + ".stats.csv"), stats.str());
}

// --- stats ------------------------------------------------------------------

struct StatsArgs {
  std::string dataset;
  std::string ngrams = "1,2,3";
  std::size_t top = 20;
  std::optional<std::string> out;
};

void cmd_stats(const StatsArgs& a) {
  const auto ds = load_dataset(a.dataset);
  const auto root = output_root(a.out);
  const auto stem = file_stem(fs::path(a.dataset).stem().string());
  const auto orders = parse_values(a.ngrams);
  for (auto n : orders) {
    if (n < 1) throw ConfigError("ngrams", "orders start at 1");
  }
  std::ostringstream stats;
  write_stats_csv(ds, {}, stats);
  write_file(root / "reports" / (stem + ".stats.csv"), stats.str());
  for (auto n : orders) {
    std::ostringstream os;
    write_ngrams_csv(ds, top_ngrams(ds, n, a.top), os);
    write_file(root / "reports" / (stem + ".ngrams-" + std::to_string(n) + ".csv"), os.str());
  }
}

// --- eval / sweep -----------------------------------------------------------

struct RunArgs {
  std::string config;
  std::optional<std::string> dataset;
  std::optional<std::size_t> k;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> id;
  std::size_t parallel_folds = 1;
  bool nb_on_tfidf = false;
};

struct PreparedRun {
  RunConfig config;
  Dataset dataset;
  FoldPlan plan;
  fs::path root;
};

PreparedRun prepare(const RunArgs& a) {
  auto c = RunConfig::load(a.config);
  if (a.dataset) c.dataset = *a.dataset;
  if (a.k) c.k = *a.k;
  if (a.seed) c.seed = *a.seed;
  if (a.id) c.model.id = *a.id;
  if (a.nb_on_tfidf) {
    if (c.model.kind != ModelKind::naive_bayes) throw ConfigError("nb-on-tfidf", "only applies to naive_bayes");
    c.model.nb_on_tfidf = true;
  }
  if (a.parallel_folds < 1) throw ConfigError("parallel-folds", "must be at least 1");
  c.validate();
  auto ds = load_dataset(c.dataset);
  if (c.task && *c.task != ds.task()) {
    throw ConfigError("task", "config says " + std::string(task_name(*c.task)) + " but the dataset is " +
                                  std::string(task_name(ds.task())));
  }
  auto plan = stratified_kfold(ds.labels(), c.folds_for(ds.task()), c.seed);
  auto root = output_root(a.out, c.output_dir);
  return {std::move(c), std::move(ds), std::move(plan), std::move(root)};
}

void cmd_eval(const RunArgs& a) {
  auto run = prepare(a);
  auto r = run_experiment(run.dataset, run.config.model, run.plan, {a.parallel_folds});
  r.dataset_path = run.config.dataset;
  const auto stem = file_stem(r.model_id);
  if (run.config.wants("json")) write_file(run.root / "results" / (stem + ".json"), r.to_json().dump(2) + "\n");
  if (run.config.wants("csv")) {
    std::ostringstream os;
    write_results_csv({r}, os);
    write_file(run.root / "reports" / (stem + ".csv"), os.str());
  }
  if (run.config.wants("markdown")) {
    std::ostringstream os;
    write_results_markdown({r}, os);
    write_file(run.root / "reports" / (stem + ".md"), os.str());
  }
}

void cmd_sweep(const RunArgs& a, const std::string& param_text, const std::string& values_text) {
  SweepParam param;
  try {
    param = parse_sweep_param(param_text);
  } catch (const DomainError& e) {
    throw ConfigError("param", e.what());
  }
  auto values = parse_values(values_text);
  std::sort(values.begin(), values.end());
  if (std::adjacent_find(values.begin(), values.end()) != values.end()) {
    throw ConfigError("values", "values must be distinct");
  }
  auto run = prepare(a);
  auto results = sweep(run.dataset, run.config.model, param, values, run.plan, {a.parallel_folds});
  const auto stem = file_stem(run.config.model.name());
  const std::string pname(sweep_param_name(param));
  if (run.config.wants("json")) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      results[i].dataset_path = run.config.dataset;
      write_file(run.root / "results" / (stem + "." + pname + "-" + std::to_string(values[i]) + ".json"),
                 results[i].to_json().dump(2) + "\n");
    }
  }
  std::ostringstream os;
  write_sweep_csv(values, results, os);
  write_file(run.root / "reports" / (stem + ".sweep-" + pname + ".csv"), os.str());
}

// --- compare / report -------------------------------------------------------

struct CompareArgs {
  std::string a, b;
  std::optional<std::string> dataset;
  std::size_t excerpt_chars = 160;
  std::optional<std::string> out;
};

void cmd_compare(const CompareArgs& args) {
  const auto a = load_result(args.a), b = load_result(args.b);
  if (a.task != b.task) throw DomainError("compare: results are for different tasks");
  const std::string dpath = args.dataset.value_or(a.dataset_path);
  if (dpath.empty()) throw ConfigError("dataset", "result has no dataset path; pass --dataset");
  const auto ds = load_dataset(dpath);
  const auto rows = disagreement_report(a, b, ds, args.excerpt_chars);
  std::ostringstream os;
  write_disagreements(rows, a, b, os);
  const auto stem = file_stem(fs::path(args.a).stem().string()) + "_vs_" + file_stem(fs::path(args.b).stem().string());
  write_file(output_root(args.out) / "reports" / (stem + ".disagreements.txt"), os.str());
}

struct ReportArgs {
  std::vector<std::string> results;
  std::string name = "summary";
  std::optional<std::string> out;
};

void cmd_report(const ReportArgs& args) {
  std::vector<ExperimentResult> rs;
  for (const auto& p : args.results) rs.push_back(load_result(p));
  for (const auto& r : rs) {
    if (r.task != rs.front().task) throw DomainError("report: results mix tasks");
  }
  const auto dir = output_root(args.out) / "reports";
  const auto stem = file_stem(args.name);
  std::ostringstream csv, md;
  write_results_csv(rs, csv);
  write_results_markdown(rs, md);
  write_file(dir / (stem + ".csv"), csv.str());
  write_file(dir / (stem + ".md"), md.str());
  std::ostringstream timing;
  timing << "model,seconds_per_epoch\n";
  bool any = false;
  for (const auto& r : rs) {
    if (!r.seconds_per_epoch) continue;
    timing << r.model_id << ',' << fixed(*r.seconds_per_epoch, 6) << '\n';
    any = true;
  }
  if (any) write_file(dir / (stem + ".timing.csv"), timing.str());
}

void add_run_flags(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("-c,--config", a.config, "run config (JSON)")->required();
  cmd->add_option("--dataset", a.dataset, "dataset JSONL; overrides the config");
  cmd->add_option("-k,--folds", a.k, "number of CV folds; overrides cv.k");
  cmd->add_option("--seed", a.seed, "CV seed; overrides cv.seed");
  cmd->add_option("--id", a.id, "model id used in outputs; overrides model.id");
  cmd->add_option("-o,--out", a.out, "output root; overrides output_dir");
  cmd->add_option("--parallel-folds", a.parallel_folds, "folds trained concurrently");
  cmd->add_flag("--nb-on-tfidf", a.nb_on_tfidf, "Naive Bayes on TF-IDF instead of counts");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"revmine: review mining experiments"};
  app.require_subcommand(1);
  app.footer(std::string("Outputs go under --out, else the config's output_dir, else $") + kOutputRootEnv +
             ", else ./" + kDefaultOutputRoot + ".");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "clean and label raw reviews into a dataset");
  c_ingest->add_option("-i,--input", ingest.input, "CSV or JSONL reviews")->required();
  c_ingest->add_option("--format", ingest.format, "csv, jsonl or auto (by extension)");
  c_ingest->add_option("-t,--task", ingest.task, "sentiment or topic")->required();
  c_ingest->add_option("--topic-map", ingest.topic_map, "title-to-topic rules (JSON)");
  c_ingest->add_option("--name", ingest.name, "output file stem");
  c_ingest->add_option("-o,--out", ingest.out, "output root");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "write a synthetic labeled dataset");
  c_synth->add_option("-t,--task", synth.task, "sentiment or topic");
  c_synth->add_option("-n,--size", synth.size, "records");
  c_synth->add_option("--seed", synth.seed, "generator seed");
  c_synth->add_option("--priors", synth.priors, "comma-separated class priors");
  c_synth->add_option("--background", synth.background, "shared vocabulary size");
  c_synth->add_option("--signal-words", synth.signal_words, "class-specific words per class");
  c_synth->add_option("--min-len", synth.min_len, "shortest document");
  c_synth->add_option("--max-len", synth.max_len, "longest document");
  c_synth->add_option("--signal-count", synth.signal_count, "signal tokens per document");
  c_synth->add_option("--signal-start", synth.signal_start, "first position signal may occupy");
  c_synth->add_option("--label-noise", synth.label_noise, "fraction of documents with another class's signal");
  c_synth->add_option("--name", synth.name, "output file stem");
  c_synth->add_option("-o,--out", synth.out, "output root");

  StatsArgs stats;
  auto* c_stats = app.add_subcommand("stats", "class balance, lengths and top n-grams of a dataset");
  c_stats->add_option("-d,--dataset", stats.dataset, "dataset JSONL")->required();
  c_stats->add_option("--ngrams", stats.ngrams, "comma-separated n-gram orders");
  c_stats->add_option("--top", stats.top, "n-grams kept per class");
  c_stats->add_option("-o,--out", stats.out, "output root");

  RunArgs eval;
  auto* c_eval = app.add_subcommand("eval", "cross-validate one model");
  add_run_flags(c_eval, eval);

  RunArgs sweep_args;
  std::string sweep_param, sweep_values;
  auto* c_sweep = app.add_subcommand("sweep", "cross-validate one model over several maxlen or epoch values");
  add_run_flags(c_sweep, sweep_args);
  c_sweep->add_option("--param", sweep_param, "maxlen or epochs")->required();
  c_sweep->add_option("--values", sweep_values, "comma-separated values")->required();

  CompareArgs compare;
  auto* c_compare = app.add_subcommand("compare", "list records two results classify differently");
  c_compare->add_option("result_a", compare.a, "first result JSON")->required();
  c_compare->add_option("result_b", compare.b, "second result JSON")->required();
  c_compare->add_option("--dataset", compare.dataset, "dataset JSONL; defaults to the one recorded in result_a");
  c_compare->add_option("--excerpt-chars", compare.excerpt_chars, "characters of review text shown");
  c_compare->add_option("-o,--out", compare.out, "output root");

  ReportArgs report;
  auto* c_report = app.add_subcommand("report", "collect results into one table");
  c_report->add_option("results", report.results, "result JSON files")->required();
  c_report->add_option("--name", report.name, "output file stem");
  c_report->add_option("-o,--out", report.out, "output root");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_ingest) cmd_ingest(ingest);
    if (*c_synth) cmd_synth(synth);
    if (*c_stats) cmd_stats(stats);
    if (*c_eval) cmd_eval(eval);
    if (*c_sweep) cmd_sweep(sweep_args, sweep_param, sweep_values);
    if (*c_compare) cmd_compare(compare);
    if (*c_report) cmd_report(report);
  } catch (const ConfigError& e) {
    std::cerr << "revmine: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "revmine: error: " << e.what() << '\n';
    return kExitFailure;
  }
  return 0;
}
