#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "poisonmark/detect.hpp"
#include "poisonmark/embed.hpp"
#include "poisonmark/keying.hpp"
#include "poisonmark/partition.hpp"
#include "poisonmark/poisonlab.hpp"
#include "poisonmark/rng.hpp"

namespace {

using namespace poisonmark;

void BM_ThreefryU64(benchmark::State& state) {
    Rng rng(Seed128{1, 2});
    for (auto _ : state) {
        benchmark::DoNotOptimize(rng.next_u64());
    }
    state.SetBytesProcessed(state.iterations() * 8);
}
BENCHMARK(BM_ThreefryU64);

void BM_Score(benchmark::State& state) {
    const std::size_t d = state.range(0);
    const Key key = sample_identical_key(d, Seed128{3, 4});
    Rng rng(Seed128{5, 6});
    std::vector<double> row(d);
    for (auto& v : row) v = rng.next_unit();
    for (auto _ : state) {
        benchmark::DoNotOptimize(score(key, row));
    }
    state.SetItemsProcessed(state.iterations() * d);
}
BENCHMARK(BM_Score)->Arg(256)->Arg(3072)->Arg(16384);

void BM_EmbedPost(benchmark::State& state) {
    const std::size_t d = 3072, n = 256, q = 2000;
    const auto part = make_partition(d, q, Seed128{7, 8}, PartitionMode::post);
    Key key = sample_identical_key(d, Seed128{7, 9});
    key.partition = part;
    WatermarkPlan plan;
    plan.scheme = Scheme::universal_post;
    plan.budget = BudgetConfig{16.0 / 255.0, 0.0, 0.05};
    plan.partition = part;
    plan.key_source = key;

    Rng rng(Seed128{7, 10});
    std::vector<double> values(n * d);
    for (auto& v : values) v = rng.next_unit();
    const auto data = DataMatrix::unchecked(n, d, values);
    for (auto _ : state) {
        benchmark::DoNotOptimize(embed_post_poisoning(data, plan,
                                                      ClipMode::clip));
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_EmbedPost);

void BM_Auroc(benchmark::State& state) {
    const std::size_t n = state.range(0);
    Rng rng(Seed128{9, 9});
    std::vector<double> pos(n), neg(n);
    for (auto& v : pos) v = rng.normal() + 0.5;
    for (auto& v : neg) v = rng.normal();
    for (auto _ : state) {
        benchmark::DoNotOptimize(auroc(pos, neg));
    }
}
BENCHMARK(BM_Auroc)->Arg(1000)->Arg(10000);

void BM_TrainEpoch(benchmark::State& state) {
    ToyTaskParams params;
    params.n_train = 500;
    params.n_test = 10;
    params.seed = Seed128{11, 1};
    const ToyTask task = gen_toy_task(params);
    TrainConfig config;
    config.epochs = 1;
    config.seed = Seed128{11, 2};
    for (auto _ : state) {
        benchmark::DoNotOptimize(train(task.train, config));
    }
    state.SetItemsProcessed(state.iterations() * params.n_train);
}
BENCHMARK(BM_TrainEpoch);

}  // namespace

BENCHMARK_MAIN();
