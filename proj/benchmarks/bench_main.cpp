#include <benchmark/benchmark.h>

#include <random>

#include "unirec/eval/evaluate.hpp"
#include "unirec/model/qformer.hpp"
#include "unirec/tensor/ops.hpp"

using namespace unirec;

namespace {

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    const Tensor a = Tensor::randn({n, n}, rng, 1), b = Tensor::randn({n, n}, rng, 1);
    NoGradGuard ng;
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

// 64 items x 4 queries attending to 12 attributes each, d = 64, 4 heads.
void BM_SegmentAttention(benchmark::State& state) {
    const std::size_t groups = 64, kq = 4, kv = 12, d = 64;
    std::mt19937_64 rng(2);
    const Tensor q = Tensor::randn({groups * kq, d}, rng, 1);
    const Tensor k = Tensor::randn({groups * kv, d}, rng, 1), v = Tensor::randn({groups * kv, d}, rng, 1);
    std::vector<AttentionSpan> spans;
    for (std::size_t g = 0; g < groups; ++g) spans.push_back({g * kq, kq, g * kv, kv});
    NoGradGuard ng;
    for (auto _ : state) benchmark::DoNotOptimize(segment_attention(q, k, v, spans, 4));
}
BENCHMARK(BM_SegmentAttention);

void qformer_step(benchmark::State& state, bool backward) {
    const auto groups = static_cast<std::size_t>(state.range(0));
    const std::size_t per_group = 10, d = 64;
    std::mt19937_64 rng(3);
    QFormer qf({4, 2, 4, d, 4}, rng);
    const Tensor inputs = Tensor::randn({groups * per_group, d}, rng, 1);
    std::vector<Segment> segs;
    for (std::size_t g = 0; g < groups; ++g) segs.push_back({g * per_group, per_group});
    for (auto _ : state) {
        if (backward) {
            Tensor loss = mean(qf.forward(inputs, segs));
            loss.backward();
        } else {
            NoGradGuard ng;
            benchmark::DoNotOptimize(qf.forward(inputs, segs));
        }
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(groups));
}
void BM_QFormerForward(benchmark::State& state) { qformer_step(state, false); }
void BM_QFormerForwardBackward(benchmark::State& state) { qformer_step(state, true); }
BENCHMARK(BM_QFormerForward)->Arg(16)->Arg(64);
BENCHMARK(BM_QFormerForwardBackward)->Arg(16)->Arg(64);

// Negative sampling, ranking and aggregation for 1000 users, 99 negatives.
void BM_EvaluateQueries(benchmark::State& state) {
    const std::size_t users = 1000, n_items = 500;
    std::mt19937_64 rng(4);
    std::vector<EvalQuery> queries(users);
    std::uniform_int_distribution<std::size_t> pick(0, n_items - 1);
    for (std::size_t u = 0; u < users; ++u) {
        queries[u].user_id = "u" + std::to_string(u);
        queries[u].truth = pick(rng);
        for (int i = 0; i < 20; ++i) {
            const std::size_t s = pick(rng);
            if (s != queries[u].truth) queries[u].seen.push_back(s);
        }
    }
    const Scorer scorer = random_scorer(5);
    const EvalConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_queries(queries, n_items, scorer, cfg));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(users));
}
BENCHMARK(BM_EvaluateQueries);

}  // namespace
BENCHMARK_MAIN();
