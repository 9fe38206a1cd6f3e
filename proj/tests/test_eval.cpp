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

#include <sstream>

#include "revmine/eval.hpp"
#include "support/eval_oracles.hpp"

namespace revmine {
namespace {

std::vector<ClassId> labels_of(std::initializer_list<std::pair<ClassId, std::size_t>> parts) {
  std::vector<ClassId> y;
  for (auto [c, n] : parts) y.insert(y.end(), n, c);
  return y;
}

TEST(StratifiedKfold, ExactDivision) {
  const auto y = labels_of({{0, 5}, {1, 5}});
  const auto plan = stratified_kfold(y, 5, 1);
  for (std::size_t f = 0; f < 5; ++f) {
    const auto rows = plan.test_rows(f);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_NE(y[rows[0]], y[rows[1]]);
  }
}

TEST(StratifiedKfold, UnevenSplitStaysWithinOne) {
  const auto y = labels_of({{0, 7}, {1, 3}});
  const auto plan = stratified_kfold(y, 3, 4);
  EXPECT_TRUE(oracle::fold_plan_ok(y, plan.fold_of, 3));
  for (std::size_t f = 0; f < 3; ++f) {
    std::size_t a = 0, b = 0;
    for (auto r : plan.test_rows(f)) (y[r] == 0 ? a : b) += 1;
    EXPECT_TRUE(a == 2 || a == 3);
    EXPECT_EQ(b, 1u);
  }
}

TEST(StratifiedKfold, Errors) {
  const auto y = labels_of({{0, 5}, {1, 2}});
  try {
    stratified_kfold(y, 3, 0);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos);
  }
  EXPECT_THROW(stratified_kfold(y, 1, 0), DomainError);
}

TEST(StratifiedKfold, RandomInstancesPartitionAndBalance) {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.below(9);
    const std::size_t n_classes = 2 + rng.below(3);
    std::vector<ClassId> y;
    for (std::size_t c = 0; c < n_classes; ++c) y.insert(y.end(), k + rng.below(60), static_cast<ClassId>(c));
    rng.shuffle(y);
    const auto plan = stratified_kfold(y, k, rng.next());
    EXPECT_TRUE(oracle::fold_plan_ok(y, plan.fold_of, k));
    EXPECT_EQ(stratified_kfold(y, k, plan.seed).fold_of, plan.fold_of);
  }
}

TEST(Metrics, Examples) {
  const std::vector<ClassId> order{0, 1};
  const std::vector<ClassId> t{0, 0, 1, 1}, p{0, 1, 0, 1};
  const auto m = compute_metrics(t, p, order);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(m.f1_macro, 0.5);
  for (const auto& c : m.per_class) {
    EXPECT_DOUBLE_EQ(c.precision, 0.5);
    EXPECT_DOUBLE_EQ(c.recall, 0.5);
    EXPECT_DOUBLE_EQ(c.f1, 0.5);
  }
  const auto perfect = compute_metrics(t, t, order);
  EXPECT_DOUBLE_EQ(perfect.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(perfect.f1_macro, 1.0);
  EXPECT_EQ(perfect.confusion, (std::vector<std::vector<std::size_t>>{{2, 0}, {0, 2}}));

  const std::vector<ClassId> order3{0, 1, 2};
  const std::vector<ClassId> t3{0, 1, 2, 2}, p3{0, 1, 1, 0};
  const auto never = compute_metrics(t3, p3, order3);
  EXPECT_EQ(never.per_class[2].precision, 0.0);
  EXPECT_EQ(never.per_class[2].recall, 0.0);
  EXPECT_EQ(never.per_class[2].f1, 0.0);
  EXPECT_THROW(compute_metrics(t, std::vector<ClassId>{0}, order), DomainError);
  EXPECT_THROW(compute_metrics(t3, p3, order), DomainError);
}

TEST(Metrics, MatchesBruteForceTally) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t C = 2 + rng.below(3), n = 1 + rng.below(300);
    std::vector<ClassId> t(n), p(n), order(C);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = static_cast<ClassId>(rng.below(C));
      p[i] = static_cast<ClassId>(rng.below(C));
    }
    EXPECT_TRUE(oracle::metrics_agree(compute_metrics(t, p, order), oracle::tally(t, p, C))) << trial;
  }
}

TEST(Aggregate, SampleStdAndOrderIndependence) {
  const auto [m, s] = mean_std({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m, 2.5);
  EXPECT_NEAR(s, std::sqrt(5.0 / 3.0), 1e-15);
  std::vector<double> v{0.1, 0.7, 0.3, 0.9, 0.55, 0.123456789};
  const auto base = mean_std(v);
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    rng.shuffle(v);
    EXPECT_EQ(mean_std(v), base);
  }
}

TEST(ModelSpec, ParsesAndRoundTrips) {
  const char* texts[] = {
      R"({"kind":"majority"})",
      R"({"kind":"naive_bayes","alpha":0.5,"nb_on_tfidf":true,"min_df":2})",
      R"({"kind":"knn","k":3,"max_features":500})",
      R"({"kind":"svm","kernel":"rbf","gamma":0.5,"lambda":0.001,"epochs":20,"seed":4})",
      R"({"kind":"neural","arch":"bilstm","lstm_units":8,"epochs":2,"id":"bi"})",
      R"({"kind":"transformer","d_model":16,"n_heads":2,"maxlen":30})",
  };
  for (const char* t : texts) {
    const auto s = ModelSpec::from_json(nlohmann::json::parse(t));
    const auto again = ModelSpec::from_json(nlohmann::json::parse(s.to_json().dump()));
    EXPECT_EQ(again.to_json().dump(), s.to_json().dump()) << t;
  }
  EXPECT_EQ(ModelSpec::from_json(nlohmann::json::parse(texts[4])).name(), "bi");
  EXPECT_EQ(ModelSpec::from_json(nlohmann::json::parse(texts[3])).name(), "svm_rbf");
}

TEST(ModelSpec, ErrorsNameTheField) {
  const std::pair<const char*, const char*> cases[] = {
      {R"({"kind":"forest"})", "model.kind"},
      {R"({"arch":"lstm"})", "model.kind"},
      {R"({"kind":"neural","arch":"gru"})", "model.arch"},
      {R"({"kind":"neural","arch":"word_cnn","maxlen":2})", "model.maxlen"},
      {R"({"kind":"svm","lambda":-1})", "model.lambda"},
      {R"({"kind":"svm","kernel":"sigmoid"})", "model.kernel"},
      {R"({"kind":"knn","k":"five"})", "model.k"},
      {R"({"kind":"knn","alpha":1})", "model.alpha"},
      {R"({"kind":"transformer","n_heads":3})", "model.n_heads"},
  };
  for (auto [text, field] : cases) {
    try {
      ModelSpec::from_json(nlohmann::json::parse(text));
      ADD_FAILURE() << text;
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.field(), field) << text;
    }
  }
}

Dataset imbalanced(std::size_t n, double major, std::uint64_t seed) {
  return synth_corpus(seed, n, SynthSpec::generated(Task::sentiment, {major, 1.0 - major}, 80, 5));
}

ModelSpec spec_of(const char* json) { return ModelSpec::from_json(nlohmann::json::parse(json)); }

TEST(RunExperiment, MajorityDummyOnNinetyTen) {
  const auto ds = imbalanced(200, 0.9, 1);
  for (std::size_t k : {2u, 5u, 10u}) {
    const auto r = run_experiment(ds, spec_of(R"({"kind":"majority"})"), stratified_kfold(ds.labels(), k, 3));
    EXPECT_NEAR(r.accuracy_mean, 0.9, 1e-12);
    EXPECT_NEAR(r.f1_macro_mean, 0.9 / 1.9, 1e-12);
    EXPECT_EQ(r.folds.size(), k);
    EXPECT_FALSE(r.seconds_per_epoch.has_value());
  }
}

TEST(RunExperiment, LinearSvmOnSeparableData) {
  const auto ds = imbalanced(200, 0.5, 2);
  const auto r = run_experiment(ds, spec_of(R"({"kind":"svm"})"), stratified_kfold(ds.labels(), 5, 1));
  EXPECT_GE(r.accuracy_mean, 0.95);
  for (const auto& f : r.folds) {
    std::size_t trace = 0, total = 0;
    for (std::size_t i = 0; i < f.confusion.size(); ++i) {
      for (std::size_t j = 0; j < f.confusion.size(); ++j) total += f.confusion[i][j];
      trace += f.confusion[i][i];
    }
    EXPECT_DOUBLE_EQ(f.accuracy, static_cast<double>(trace) / static_cast<double>(total));
  }
}

TEST(RunExperiment, DeterministicAcrossRunsAndThreads) {
  const auto ds = imbalanced(120, 0.6, 3);
  const auto plan = stratified_kfold(ds.labels(), 4, 9);
  for (const char* text : {R"({"kind":"svm","kernel":"rbf","epochs":3})",
                           R"({"kind":"neural","arch":"word_cnn","maxlen":10,"embedding_dim":8,"n_filters":4,"epochs":1})"}) {
    const auto spec = spec_of(text);
    const auto a = run_experiment(ds, spec, plan);
    const auto b = run_experiment(ds, spec, plan, {3});
    EXPECT_EQ(a.to_json(false).dump(), b.to_json(false).dump()) << text;
  }
}

TEST(RunExperiment, EveryFamilyRunsAndReportsTiming) {
  const auto ds = synth_corpus(4, 80, SynthSpec::generated(Task::topic, {0.25, 0.25, 0.25, 0.25}, 40, 3));
  const auto plan = stratified_kfold(ds.labels(), 2, 1);
  const char* texts[] = {
      R"({"kind":"naive_bayes"})",
      R"({"kind":"knn","k":3})",
      R"({"kind":"neural","arch":"char_cnn","maxlen":40,"n_filters":4,"epochs":1})",
      R"({"kind":"neural","arch":"lstm","maxlen":12,"embedding_dim":6,"lstm_units":4,"epochs":1})",
      R"({"kind":"transformer","d_model":8,"n_heads":2,"d_ff":8,"maxlen":16,"epochs":1,"vocab_size":80})",
  };
  for (const char* t : texts) {
    const auto spec = spec_of(t);
    const auto r = run_experiment(ds, spec, plan);
    EXPECT_EQ(r.predictions.size(), ds.size()) << t;
    EXPECT_EQ(r.seconds_per_epoch.has_value(), spec.has_epochs()) << t;
    if (r.seconds_per_epoch) {
      EXPECT_GT(*r.seconds_per_epoch, 0.0);
    }
  }
}

TEST(RunExperiment, ErrorsCarryTheFold) {
  const auto ds = imbalanced(40, 0.5, 5);
  try {
    run_experiment(ds, spec_of(R"({"kind":"knn","k":500})"), stratified_kfold(ds.labels(), 2, 1));
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("fold 0: ", 0), 0u) << e.what();
  }
  EXPECT_THROW(run_experiment(ds, spec_of(R"({"kind":"majority"})"), stratified_kfold(imbalanced(30, 0.5, 5).labels(), 2, 1)),
               DomainError);
}

TEST(Leakage, TestFoldEditsNeverReachTrainingFeatures) {
  const auto ds = imbalanced(60, 0.5, 6);
  const auto plan = stratified_kfold(ds.labels(), 3, 2);
  for (const char* t : {R"({"kind":"svm"})", R"({"kind":"naive_bayes"})"}) {
    const auto spec = spec_of(t);
    EXPECT_TRUE(oracle::leakage_free(ds, plan, spec, 10, 8)) << t;
  }
}

TEST(Sweep, OrderAndErrors) {
  const auto ds = imbalanced(60, 0.5, 7);
  const auto plan = stratified_kfold(ds.labels(), 2, 1);
  const auto spec = spec_of(R"({"kind":"neural","arch":"word_cnn","embedding_dim":6,"n_filters":3,"epochs":1})");
  const std::vector<std::size_t> values{6, 12};
  const auto res = sweep(ds, spec, SweepParam::maxlen, values, plan);
  ASSERT_EQ(res.size(), 2u);
  EXPECT_EQ(res[0].config["maxlen"], 6);
  EXPECT_EQ(res[1].config["maxlen"], 12);
  const auto ep = sweep(ds, spec, SweepParam::epochs, {1, 2}, plan);
  EXPECT_EQ(ep[1].config["epochs"], 2);
  std::ostringstream os;
  write_sweep_csv(values, res, os);
  const auto csv = os.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "value,accuracy,accuracy_std,f1_macro,f1_macro_std,seconds_per_epoch");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(csv.find("\n6,"), csv.find('\n'));

  EXPECT_THROW(sweep(ds, spec, SweepParam::maxlen, {}, plan), DomainError);
  EXPECT_THROW(sweep(ds, spec, SweepParam::maxlen, {10, 10}, plan), DomainError);
  EXPECT_THROW(sweep(ds, spec, SweepParam::maxlen, {2, 10}, plan), DomainError);
  EXPECT_THROW(sweep(ds, spec_of(R"({"kind":"svm"})"), SweepParam::maxlen, {10}, plan), DomainError);
  EXPECT_THROW(parse_sweep_param("lr"), DomainError);
}

TEST(Disagreement, Contracts) {
  const auto ds = imbalanced(30, 0.5, 8);
  const auto plan = stratified_kfold(ds.labels(), 3, 1);
  auto a = run_experiment(ds, spec_of(R"({"kind":"majority"})"), plan);
  EXPECT_TRUE(disagreement_report(a, a, ds).empty());
  auto b = a;
  for (auto& p : b.predictions) p = 1 - p;
  const auto all = disagreement_report(a, b, ds, 5);
  ASSERT_EQ(all.size(), ds.size());
  for (std::size_t i = 1; i < all.size(); ++i) {
    EXPECT_TRUE(all[i - 1].fold < all[i].fold || (all[i - 1].fold == all[i].fold && all[i - 1].record < all[i].record));
  }
  for (const auto& d : all) EXPECT_LE(utf8::decode(d.excerpt).size(), 5u);
  auto other = run_experiment(ds, spec_of(R"({"kind":"majority"})"), stratified_kfold(ds.labels(), 3, 2));
  EXPECT_THROW(disagreement_report(a, other, ds), DomainError);
  std::ostringstream os;
  write_disagreements(all, a, b, os);
  EXPECT_NE(os.str().find("(30 records)"), std::string::npos);
}

TEST(Results, JsonRoundTripAndTables) {
  const auto ds = imbalanced(40, 0.75, 9);
  // 30/10 over four folds: two folds hold 8/2 and two hold 7/3
  auto r = run_experiment(ds, spec_of(R"({"kind":"majority","id":"dummy"})"), stratified_kfold(ds.labels(), 4, 1));
  r.seconds_per_epoch = 1.5;
  r.fold_seconds_per_epoch = {1.5};
  const auto back = ExperimentResult::from_json(nlohmann::ordered_json::parse(r.to_json().dump()));
  EXPECT_EQ(back.to_json().dump(), r.to_json().dump());
  EXPECT_FALSE(r.to_json(false).contains("timing"));
  EXPECT_THROW(ExperimentResult::from_json(nlohmann::ordered_json::parse(R"({"model":"x"})")), FormatError);

  std::ostringstream csv, md;
  write_results_csv({r}, csv);
  write_results_markdown({r}, md);
  EXPECT_EQ(csv.str(), "model,accuracy,accuracy_std,f1_macro,f1_macro_std\ndummy,0.750000,0.057735,0.428105,0.018868\n");
  EXPECT_EQ(md.str(), "| model | accuracy | f1_macro |\n|---|---|---|\n| dummy | 0.750 ± 0.058 | 0.428 ± 0.019 |\n");
}

}  // namespace
}  // namespace revmine
