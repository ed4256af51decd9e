#include <benchmark/benchmark.h>

#include "deltak/denoiser.hpp"
#include "deltak/engine.hpp"
#include "deltak/matrix.hpp"
#include "deltak/rng.hpp"
#include "deltak/text.hpp"
#include "deltak/theorems.hpp"

namespace {

using namespace deltak;

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    DenseMatrix m(rows, cols);
    SplitMix64 stream(seed);
    for (double& v : m.data()) v = stream.next_gaussian();
    return m;
}

void BM_ScaledDotAttention(benchmark::State& state) {
    const auto q = random_matrix(64, 16, 1);
    const auto k = random_matrix(7, 16, 2);
    const auto v = random_matrix(7, 16, 3);
    for (auto _ : state) benchmark::DoNotOptimize(scaled_dot_attention(q, k, v));
}
BENCHMARK(BM_ScaledDotAttention);

void BM_DenoiseStep(benchmark::State& state) {
    const ToyDenoiser model{DenoiserConfig{}};
    const auto tokens = tokenize("a black dog and a white dog");
    const auto emb = embed(tokens, 7, model.config().d_model);
    const auto z = init_latent(model.config(), 7);
    const auto hook = identity_hook();
    for (auto _ : state) benchmark::DoNotOptimize(denoise_step(model, z, emb, 1, hook));
}
BENCHMARK(BM_DenoiseStep);

void BM_BaselineRun(benchmark::State& state) {
    const ToyDenoiser model{DenoiserConfig{}};
    const auto tokens = tokenize("a black dog and a white dog");
    const auto emb = embed(tokens, 7, model.config().d_model);
    const auto hook = identity_hook();
    for (auto _ : state) benchmark::DoNotOptimize(run_sampler(model, emb, hook, 7));
}
BENCHMARK(BM_BaselineRun);

void BM_OptimizeAlpha(benchmark::State& state) {
    const ToyDenoiser model{DenoiserConfig{}};
    const auto tokens = tokenize("a black dog and a white dog");
    const auto emb = embed(tokens, 7, model.config().d_model);
    ConceptPartition partition;
    partition.present.push_back({"black dog", {1, 2}});
    partition.missing.push_back({"white dog", {5, 6}});
    SchedulerConfig sched;
    sched.apply_default_window(model.config().steps);
    // one full pipeline per iteration keeps the context realistic
    for (auto _ : state)
        benchmark::DoNotOptimize(
            run_delta_k_forced("a black dog and a white dog", model, partition, sched, 7));
}
BENCHMARK(BM_OptimizeAlpha)->Unit(benchmark::kMillisecond);

void BM_OrthogonalityTrials(benchmark::State& state) {
    OrthogonalityExperiment exp;
    exp.trials = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(mc_orthogonality(exp));
}
BENCHMARK(BM_OrthogonalityTrials)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
