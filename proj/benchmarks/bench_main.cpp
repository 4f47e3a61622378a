#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "simgraph/conditioning.hpp"
#include "simgraph/diffedit.hpp"
#include "simgraph/graph.hpp"
#include "simgraph/rng.hpp"
#include "simgraph/transduce.hpp"
#include "simgraph/vargen.hpp"

using namespace simgraph;

namespace {

graph::SceneGraph make_graph(std::size_t entities, std::size_t relations, std::uint64_t seed) {
    static const char* labels[] = {"on", "near", "be in", "behind"};
    SplitMix64 rng(seed);
    graph::SceneGraph g;
    for (std::size_t i = 0; i < entities; ++i) {
        g.add_entity({"e" + std::to_string(i),
                      graph::EntityBox{0, 0, rng.uniform(0, 50), rng.uniform(0, 50)}});
    }
    for (std::size_t i = 0; i < relations; ++i) {
        g.add_relation({"e" + std::to_string(rng.next() % entities), labels[rng.next() % 4],
                        "e" + std::to_string(rng.next() % entities)});
    }
    return g;
}

void BM_GraphDiff(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto g = make_graph(16, n, 1);
    const auto h = make_graph(16, n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(graph::graph_diff(g, h));
}
BENCHMARK(BM_GraphDiff)->Arg(20)->Arg(200)->Arg(2000);

void BM_Sg2Prompts(benchmark::State& state) {
    const auto g = make_graph(16, 20, 3);
    const auto h = make_graph(16, 20, 4);
    for (auto _ : state) benchmark::DoNotOptimize(transduce::sg2prompts(g, h));
}
BENCHMARK(BM_Sg2Prompts);

void BM_EncodeText(benchmark::State& state) {
    const std::string text = "wolf be in forest, tiger be in field, trees be behind train";
    for (auto _ : state) benchmark::DoNotOptimize(conditioning::encode_text(text));
}
BENCHMARK(BM_EncodeText);

void BM_SampleTokens(benchmark::State& state) {
    const auto params = vargen::ARModelParams::init(32, 16, 32, 5);
    const auto e = conditioning::encode_text("bear be in forest");
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(vargen::sample_tokens(e, params, {4, 4}, 1.0, seed++));
}
BENCHMARK(BM_SampleTokens);

void BM_TrainStep(benchmark::State& state) {
    SplitMix64 rng(6);
    std::vector<vargen::TrainExample> batch;
    for (int i = 0; i < state.range(0); ++i) {
        vargen::TokenSequence z{{}, {4, 4}};
        for (int k = 0; k < 16; ++k) z.tokens.push_back(static_cast<vargen::Token>(rng.next() % 32));
        batch.push_back({"caption " + std::to_string(i), z});
    }
    const auto params = vargen::ARModelParams::init(32, 16, 32, 7);
    for (auto _ : state) benchmark::DoNotOptimize(vargen::train_step(batch, params, 0.05));
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(16);

void BM_Edit(benchmark::State& state) {
    const auto dim = static_cast<Eigen::Index>(state.range(0));
    SplitMix64 rng(8);
    diffedit::LatentTensor x0{Eigen::VectorXd(dim)};
    for (Eigen::Index i = 0; i < dim; ++i) x0.values[i] = rng.uniform(-1, 1);
    const auto sched = diffedit::build_schedule();
    const diffedit::GaussianAnalyticDenoiser den(1.0);
    const auto src = conditioning::encode_text("trees be behind train");
    const auto tgt = conditioning::encode_text("wolf be in forest, trees be behind train");
    const auto null = conditioning::TextEmbedding::null(16);
    const diffedit::EditConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(diffedit::edit(x0, src, tgt, null, cfg, sched, den));
}
BENCHMARK(BM_Edit)->Arg(256)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
