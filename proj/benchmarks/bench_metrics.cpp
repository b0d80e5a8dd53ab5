#include <benchmark/benchmark.h>

#include <random>

#include "flowmine/metrics.hpp"

using namespace flowmine;

namespace {

TokenSequence random_tokens(std::mt19937_64& rng, size_t n) {
    TokenSequence out(n);
    for (auto& t : out) t = "w" + std::to_string(rng() % 40);
    return out;
}

void BM_Bleu(benchmark::State& state) {
    std::mt19937_64 rng(1);
    auto h = random_tokens(rng, static_cast<size_t>(state.range(0)));
    auto r = random_tokens(rng, static_cast<size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(bleu(h, r));
}
BENCHMARK(BM_Bleu)->Arg(64)->Arg(256);

void BM_RougeL(benchmark::State& state) {
    std::mt19937_64 rng(2);
    auto h = random_tokens(rng, static_cast<size_t>(state.range(0)));
    auto r = random_tokens(rng, static_cast<size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(rouge_l(h, r));
}
BENCHMARK(BM_RougeL)->Arg(64)->Arg(256);

void BM_MeteorLite(benchmark::State& state) {
    std::mt19937_64 rng(3);
    auto h = random_tokens(rng, static_cast<size_t>(state.range(0)));
    auto r = random_tokens(rng, static_cast<size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(meteor_lite(h, r));
}
BENCHMARK(BM_MeteorLite)->Arg(64)->Arg(256);

void BM_LcsSimilarity(benchmark::State& state) {
    std::mt19937_64 rng(4);
    size_t n = static_cast<size_t>(state.range(0));
    EmbeddingCache cache("bench", 16);
    std::normal_distribution<double> g;
    for (int v = 0; v < 40; ++v) {
        std::vector<double> x(16);
        for (auto& e : x) e = g(rng);
        cache.insert("w" + std::to_string(v), EmbeddingVector::normalized(x));
    }
    auto a = random_tokens(rng, n), b = random_tokens(rng, n);
    for (auto _ : state) benchmark::DoNotOptimize(lcs_similarity(a, b, 0.8, cache, nullptr));
}
BENCHMARK(BM_LcsSimilarity)->Arg(32)->Arg(128);

} // namespace
