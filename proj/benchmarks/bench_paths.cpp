#include <benchmark/benchmark.h>

#include "flowmine/extractor.hpp"
#include "flowmine/graph.hpp"
#include "flowmine/synthetic.hpp"

using namespace flowmine;

namespace {

InteractionGraph synthetic_graph(size_t conversations) {
    SyntheticSpec spec;
    spec.conversations = conversations;
    return build_graph(generate_synthetic_corpus(spec));
}

void BM_BuildGraph(benchmark::State& state) {
    SyntheticSpec spec;
    spec.conversations = static_cast<size_t>(state.range(0));
    auto corpus = generate_synthetic_corpus(spec);
    for (auto _ : state) benchmark::DoNotOptimize(build_graph(corpus));
}
BENCHMARK(BM_BuildGraph)->Arg(100)->Arg(300);

void BM_WidestPath(benchmark::State& state) {
    auto g = synthetic_graph(static_cast<size_t>(state.range(0)));
    const auto& hp = synthetic_policy().happy_path;
    for (auto _ : state) benchmark::DoNotOptimize(widest_path(g, hp.front(), hp.back()));
}
BENCHMARK(BM_WidestPath)->Arg(100)->Arg(300);

void BM_MaxWeightPath(benchmark::State& state) {
    auto g = synthetic_graph(static_cast<size_t>(state.range(0)));
    const auto& hp = synthetic_policy().happy_path;
    for (auto _ : state) benchmark::DoNotOptimize(max_weight_simple_path(g, hp.front(), hp.back()));
}
BENCHMARK(BM_MaxWeightPath)->Arg(100);

// Layered DAG: every node links to every node of the next layer.
void BM_WidestPathLayered(benchmark::State& state) {
    size_t layers = static_cast<size_t>(state.range(0)), width = 4;
    std::vector<InteractionGraph::EdgeRecord> edges;
    auto name = [](size_t l, size_t i) { return "n" + std::to_string(l) + "_" + std::to_string(i); };
    for (size_t i = 0; i < width; ++i) edges.push_back({"s", name(0, i), 5});
    for (size_t l = 0; l + 1 < layers; ++l)
        for (size_t i = 0; i < width; ++i)
            for (size_t j = 0; j < width; ++j)
                edges.push_back({name(l, i), name(l + 1, j), static_cast<std::int64_t>(1 + (i * 7 + j * 3 + l) % 5)});
    for (size_t i = 0; i < width; ++i) edges.push_back({name(layers - 1, i), "t", 5});
    auto g = InteractionGraph::from_parts(edges, {{"s", 1}}, {{"t", 1}});
    for (auto _ : state) benchmark::DoNotOptimize(widest_path(g, "s", "t"));
}
BENCHMARK(BM_WidestPathLayered)->Arg(8)->Arg(16);

} // namespace
