// Serial reference vs OpenMP kernels on synthetic data.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "vocada/kernels.hpp"
#include "vocada/metrics.hpp"

namespace {

std::vector<float> random_rows(std::size_t rows, std::size_t dim, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> dist;
  std::vector<float> v(rows * dim);
  for (auto& x : v) {
    x = dist(rng);
  }
  return v;
}

// Proposals x classes similarity, as in rescoring. Args: proposals, classes; dim fixed at 768.
void BM_SimilaritySerial(benchmark::State& state) {
  const auto nq = static_cast<std::size_t>(state.range(0));
  const auto nc = static_cast<std::size_t>(state.range(1));
  constexpr std::size_t dim = 768;
  const auto q = random_rows(nq, dim, 1);
  const auto c = random_rows(nc, dim, 2);
  std::vector<double> out(nq * nc);
  for (auto _ : state) {
    vocada::kernels::similarity_serial(q, c, dim, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * nq * nc));
}

void BM_SimilarityOmp(benchmark::State& state) {
  const auto nq = static_cast<std::size_t>(state.range(0));
  const auto nc = static_cast<std::size_t>(state.range(1));
  constexpr std::size_t dim = 768;
  const auto q = random_rows(nq, dim, 1);
  const auto c = random_rows(nc, dim, 2);
  std::vector<double> out(nq * nc);
  for (auto _ : state) {
    vocada::kernels::similarity(q, c, dim, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * nq * nc));
}

BENCHMARK(BM_SimilaritySerial)->Args({300, 80})->Args({1000, 365});
BENCHMARK(BM_SimilarityOmp)->Args({300, 80})->Args({1000, 365});

struct EvalData {
  vocada::Vocabulary vocab;
  std::vector<vocada::Detection> dets;
  std::vector<vocada::GroundTruthBox> gts;
};

EvalData make_eval_data(std::size_t images, std::size_t classes) {
  EvalData d;
  for (std::size_t c = 0; c < classes; ++c) {
    d.vocab.classes.push_back({static_cast<vocada::ClassId>(c + 1), "class" + std::to_string(c), {}});
  }
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> pos(0.0, 500.0);
  std::uniform_real_distribution<double> size(10.0, 100.0);
  std::uniform_real_distribution<double> jitter(-8.0, 8.0);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> cls(1, classes);
  for (std::size_t i = 0; i < images; ++i) {
    const std::string id = "im" + std::to_string(i);
    for (int g = 0; g < 8; ++g) {
      const double x = pos(rng), y = pos(rng), w = size(rng), h = size(rng);
      const auto c = static_cast<vocada::ClassId>(cls(rng));
      d.gts.push_back({id, {x, y, x + w, y + h}, c});
      d.dets.push_back({id, {x + jitter(rng), y + jitter(rng), x + w + jitter(rng), y + h + jitter(rng)},
                        score(rng) < 0.8 ? c : static_cast<vocada::ClassId>(cls(rng)), score(rng)});
    }
  }
  return d;
}

void BM_EvaluateSerial(benchmark::State& state) {
  const auto data = make_eval_data(static_cast<std::size_t>(state.range(0)), 20);
  for (auto _ : state) {
    auto r = vocada::evaluate_serial(data.dets, data.gts, data.vocab, {});
    benchmark::DoNotOptimize(r.map_all);
  }
}

void BM_EvaluateOmp(benchmark::State& state) {
  const auto data = make_eval_data(static_cast<std::size_t>(state.range(0)), 20);
  for (auto _ : state) {
    auto r = vocada::evaluate(data.dets, data.gts, data.vocab, {});
    benchmark::DoNotOptimize(r.map_all);
  }
}

BENCHMARK(BM_EvaluateSerial)->Arg(200)->Arg(1000);
BENCHMARK(BM_EvaluateOmp)->Arg(200)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
