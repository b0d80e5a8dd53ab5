#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "flowmine/normalizer.hpp"

using namespace flowmine;

namespace {

std::vector<std::vector<double>> random_distances(size_t n) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    std::vector<std::vector<double>> pts(n, std::vector<double>(8));
    for (auto& p : pts)
        for (auto& x : p) x = g(rng);
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (size_t k = 0; k < 8; ++k) s += (pts[i][k] - pts[j][k]) * (pts[i][k] - pts[j][k]);
            d[i][j] = std::sqrt(s);
        }
    return d;
}

void BM_Agglomerate(benchmark::State& state) {
    auto d = random_distances(static_cast<size_t>(state.range(0)));
    auto linkage = static_cast<Linkage>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(agglomerate(d, 3.0, linkage));
}
BENCHMARK(BM_Agglomerate)
    ->Args({64, static_cast<int>(Linkage::Single)})
    ->Args({64, static_cast<int>(Linkage::Average)})
    ->Args({64, static_cast<int>(Linkage::Complete)})
    ->Args({256, static_cast<int>(Linkage::Average)});

} // namespace
