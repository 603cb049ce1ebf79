// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include "imaginet/numcore.hpp"
#include "imaginet/rng.hpp"
#include "imaginet/train.hpp"

using namespace imaginet;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& x : m.span()) x = rng.uniform(-1.0, 1.0);
  return m;
}

template <Matrix (*Fn)(const Matrix&, const Matrix&)>
void BM_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Matrix a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <Matrix (*Fn)(const Matrix&)>
void BM_gram(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Matrix a = random_matrix(4 * n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(a));
}

struct BatchFixture {
  ImaginetParams params;
  std::vector<CaptionRecord> records;
  std::vector<const CaptionRecord*> batch;

  explicit BatchFixture(std::size_t n) {
    Rng rng(3);
    const ModelDims dims{60, 32, 32, 16};
    params = ImaginetParams::random(dims, rng);
    for (std::size_t i = 0; i < n; ++i) {
      CaptionRecord r{"img", {}, Vector(dims.image_dim)};
      for (int t = 0; t < 9; ++t) r.tokens.push_back(2 + rng.below(dims.vocab_size - 2));
      r.tokens.push_back(1);
      for (double& x : r.target) x = rng.uniform(0, 2);
      records.push_back(std::move(r));
    }
    for (const auto& r : records) batch.push_back(&r);
  }
};

template <BatchResult (*Fn)(const ImaginetParams&, std::span<const CaptionRecord* const>,
                            const LossConfig&)>
void BM_batch_gradient(benchmark::State& state) {
  const BatchFixture f(static_cast<std::size_t>(state.range(0)));
  const LossConfig cfg{0.1, 16};
  for (auto _ : state) benchmark::DoNotOptimize(Fn(f.params, f.batch, cfg));
}

}  // namespace

BENCHMARK(BM_matmul<matmul_reference>)->Arg(64)->Arg(256);
BENCHMARK(BM_matmul<matmul>)->Arg(64)->Arg(256);
BENCHMARK(BM_gram<gram_reference>)->Arg(64)->Arg(256);
BENCHMARK(BM_gram<gram>)->Arg(64)->Arg(256);
BENCHMARK(BM_batch_gradient<batch_gradient_reference>)->Arg(32)->Arg(128);
BENCHMARK(BM_batch_gradient<batch_gradient>)->Arg(32)->Arg(128);

BENCHMARK_MAIN();
