#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "qaexpert/evalkit.hpp"
#include "qaexpert/fixture.hpp"
#include "qaexpert/learners.hpp"
#include "qaexpert/stats.hpp"
#include "qaexpert/textpipe.hpp"
#include "qaexpert/vectorize.hpp"
#include "oracles.hpp"

namespace {

namespace lr = qaexpert::learners;
using qaexpert::Label;

const qaexpert::fixture::Fixture& corpus_fixture() {
  static const auto fx = qaexpert::fixture::generate_fixture({.n_posts = 50, .n_comments = 1000});
  return fx;
}

void BM_MeasureComment(benchmark::State& state) {
  const auto& comments = corpus_fixture().store.comments();
  std::size_t i = 0, bytes = 0;
  for (auto _ : state) {
    const auto& body = comments[i++ % comments.size()].body;
    benchmark::DoNotOptimize(qaexpert::textpipe::measure(body));
    bytes += body.size();
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(bytes));
}
BENCHMARK(BM_MeasureComment);

void BM_Preprocess(benchmark::State& state) {
  const auto& comments = corpus_fixture().store.comments();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(qaexpert::textpipe::preprocess(comments[i++ % comments.size()].body));
}
BENCHMARK(BM_Preprocess);

void BM_TfidfFitTransform(benchmark::State& state) {
  std::vector<std::vector<std::string>> docs;
  for (const auto& c : corpus_fixture().store.comments()) docs.push_back(qaexpert::textpipe::preprocess(c.body).tokens);
  docs.resize(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    const auto model = qaexpert::vectorize::TfidfModel::fit(docs);
    for (const auto& d : docs) benchmark::DoNotOptimize(model.transform(d));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TfidfFitTransform)->Arg(250)->Arg(1000);

void BM_TrainTree(benchmark::State& state) {
  const auto d = qaexpert::testing::planted_dataset(1);
  for (auto _ : state) benchmark::DoNotOptimize(lr::train_tree(d, {.max_depth = static_cast<std::size_t>(state.range(0))}));
}
BENCHMARK(BM_TrainTree)->Arg(4)->Arg(12);

void BM_TrainForest(benchmark::State& state) {
  const auto d = qaexpert::testing::planted_dataset(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        lr::train_forest(d, {.n_trees = static_cast<std::size_t>(state.range(0)), .seed = 1, .threads = 1}));
  }
}
BENCHMARK(BM_TrainForest)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_TrainLogistic(benchmark::State& state) {
  const auto d = qaexpert::testing::planted_dataset(3);
  for (auto _ : state) benchmark::DoNotOptimize(lr::train_logistic(d));
}
BENCHMARK(BM_TrainLogistic)->Unit(benchmark::kMillisecond);

void BM_CrossValidateTree(benchmark::State& state) {
  const auto d = qaexpert::testing::planted_dataset(4);
  const auto trainer = qaexpert::evalkit::make_trainer({lr::LearnerKind::Tree, {{"max_depth", 8}}});
  for (auto _ : state) benchmark::DoNotOptimize(qaexpert::evalkit::kfold_cv(d, trainer, 10, 1));
}
BENCHMARK(BM_CrossValidateTree)->Unit(benchmark::kMillisecond);

void BM_Kappa(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> cls(0, 2);
  std::vector<Label> a, b;
  for (int i = 0; i < state.range(0); ++i) {
    a.push_back(qaexpert::label_from_code(cls(rng)));
    b.push_back(qaexpert::label_from_code(cls(rng)));
  }
  for (auto _ : state) benchmark::DoNotOptimize(qaexpert::stats::cohens_kappa(a, b));
}
BENCHMARK(BM_Kappa)->Arg(1113);

void BM_Manova(benchmark::State& state) {
  const auto d = qaexpert::testing::planted_dataset(6);
  std::vector<std::vector<std::vector<double>>> groups(3);
  for (std::size_t i = 0; i < d.n_rows(); ++i) groups[qaexpert::index(d.y[i])].push_back(d.X[i]);
  for (auto _ : state) benchmark::DoNotOptimize(qaexpert::stats::manova_wilks(groups));
}
BENCHMARK(BM_Manova);

}  // namespace
BENCHMARK_MAIN();
