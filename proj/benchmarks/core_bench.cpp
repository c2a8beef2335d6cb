#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "rusgroup/grouping.hpp"
#include "rusgroup/mi_score.hpp"
#include "rusgroup/similarity.hpp"

using namespace rusgroup;

namespace {

std::vector<double> sorted_scores(std::size_t n) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  std::sort(v.begin(), v.end());
  return v;
}

std::string sentence(std::mt19937_64& rng, std::size_t words) {
  static const char* pool[] = {"a", "red", "bike", "leaning", "on", "the", "wall", "near", "Ärger", "école", "猫", "dog"};
  std::uniform_int_distribution<std::size_t> pick(0, std::size(pool) - 1);
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) s += ' ';
    s += pool[pick(rng)];
  }
  return s;
}

std::vector<PredictionTriplet> triplets(std::size_t n) {
  std::mt19937_64 rng(5);
  std::vector<PredictionTriplet> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].instance_id = "i" + std::to_string(i);
    out[i].y1 = sentence(rng, 6);
    out[i].y2 = sentence(rng, 6);
    out[i].ym = sentence(rng, 6);
  }
  return out;
}

}  // namespace

static void BM_Partition1D(benchmark::State& state) {
  const auto v = sorted_scores(static_cast<std::size_t>(state.range(0)));
  const auto k = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(optimal_partition_1d(v, k));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Partition1D)->ArgsProduct({{18, 64, 256, 1024}, {3}})->Args({256, 8})->Complexity();

static void BM_Similarity(benchmark::State& state) {
  const auto fn = SimilarityFunction::builtin(static_cast<SimilarityKind>(state.range(0)));
  std::mt19937_64 rng(2);
  const std::string a = sentence(rng, static_cast<std::size_t>(state.range(1)));
  const std::string b = sentence(rng, static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(fn(a, b));
  state.SetLabel(std::string(to_string(fn.kind())));
}
BENCHMARK(BM_Similarity)
    ->ArgsProduct({{static_cast<int>(SimilarityKind::exact_match), static_cast<int>(SimilarityKind::token_f1),
                    static_cast<int>(SimilarityKind::normalized_edit)},
                   {4, 32}});

static void BM_MiScore(benchmark::State& state) {
  const auto t = triplets(static_cast<std::size_t>(state.range(0)));
  const auto fn = SimilarityFunction::builtin(SimilarityKind::token_f1);
  SamplingPlan plan;
  plan.num_draws = 5;
  plan.draw_size = 100;
  plan.seed = 7;
  for (auto _ : state) benchmark::DoNotOptimize(mi_score("bench", t, fn, plan));
  state.SetItemsProcessed(state.iterations() * plan.num_draws * std::min<std::int64_t>(100, state.range(0)));
}
BENCHMARK(BM_MiScore)->Arg(100)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
