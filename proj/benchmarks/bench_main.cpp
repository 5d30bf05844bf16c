#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "lime/metrics.hpp"
#include "lime/model.hpp"
#include "lime/synth.hpp"
#include "lime/tempcode.hpp"
#include "lime/timeline.hpp"
#include "lime/trainer.hpp"

using namespace lime;

namespace {

void bm_bucketize(benchmark::State& state) {
    const BucketConfig cfg;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> age(0.0, 30.0 * 86400.0);
    std::vector<double> ages(4096);
    for (auto& a : ages) a = age(rng);
    for (auto _ : state) {
        std::size_t sum = 0;
        for (const double a : ages) sum += bucketize(a, cfg);
        benchmark::DoNotOptimize(sum);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ages.size()));
}
BENCHMARK(bm_bucketize);

void bm_freshness_weight(benchmark::State& state) {
    const FreshnessParams params;
    std::vector<double> fs(4096);
    for (std::size_t i = 0; i < fs.size(); ++i) fs[i] = static_cast<double>(i % 200) - 100.0;
    for (auto _ : state) {
        double sum = 0.0;
        for (const double f : fs) sum += freshness_weight(f, params);
        benchmark::DoNotOptimize(sum);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(fs.size()));
}
BENCHMARK(bm_freshness_weight);

void bm_metrics(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    std::vector<double> scores(n);
    std::vector<int> labels(n, 0);
    for (auto& s : scores) s = z(rng);
    for (std::size_t i = 0; i < n; i += 5) labels[i] = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(auc(scores, labels));
        benchmark::DoNotOptimize(mrr(scores, labels));
        benchmark::DoNotOptimize(ndcg(scores, labels, 10));
    }
}
BENCHMARK(bm_metrics)->Arg(5)->Arg(50)->Arg(500);

void bm_click_loss(benchmark::State& state) {
    const std::vector<double> scores{0.3, -1.2, 0.8, 2.5, -0.4};
    for (auto _ : state) benchmark::DoNotOptimize(click_loss(scores));
}
BENCHMARK(bm_click_loss);

// Scoring one impression with a frozen model at the default dimensions:
// 50 history articles, 5 candidates. Arg 0 = base model, 1 = S1, 2 = S1+S2.
void bm_model_forward(benchmark::State& state) {
    ModelConfig cfg;
    cfg.vocab_size = 2000;
    cfg.topic_count = 16;
    cfg.subtopic_count = 64;
    cfg.flags = StrategyFlags{state.range(0) >= 1, state.range(0) >= 2, false};
    const LimeModel model(cfg, 1);

    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> tok(1, 1999), topic(1, 15), sub(1, 63);
    std::vector<std::vector<int>> titles(55, std::vector<int>(30));
    for (auto& t : titles) {
        for (auto& w : t) w = tok(rng);
    }
    std::vector<NewsInput> history, candidates;
    for (std::size_t i = 0; i < titles.size(); ++i) {
        NewsInput n{titles[i], topic(rng), sub(rng), 3600.0 * static_cast<double>(i), 36.0 * 3600.0};
        (i < 50 ? history : candidates).push_back(n);
    }
    for (auto _ : state) benchmark::DoNotOptimize(model.base_scores(history, candidates));
}
BENCHMARK(bm_model_forward)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void bm_lifetime_table(benchmark::State& state) {
    GeneratorSpec spec;
    spec.num_users = 100;
    spec.clicks_per_user = 100;
    const auto log = generate(spec);
    const auto ds = to_dataset(log);
    auto clicks = ds.train_clicks();
    assign_click_ages(clicks, ds.news);
    const ClickLog view{clicks, ds.news, ds.vocab};
    for (auto _ : state) benchmark::DoNotOptimize(build_lifetime_table(view, LifetimeParams{}));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(clicks.size()));
}
BENCHMARK(bm_lifetime_table)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
