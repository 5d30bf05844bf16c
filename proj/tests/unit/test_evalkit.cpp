#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "lime/evalkit.hpp"

using namespace lime;

namespace {

EvalReport untrained_report(const testing::TinyWorld& w, StrategyFlags flags, std::size_t threads = 1) {
    const LimeModel model(w.model_config(flags), 5);
    const auto inputs = build_inputs(*w.features, w.dataset.split.test);
    return evaluate(model, inputs, flags, FreshnessParams{}, threads);
}

std::vector<std::vector<std::size_t>> rankings(const EvalReport& r) {
    std::vector<std::vector<std::size_t>> out;
    for (const auto& i : r.rankings) out.push_back(i.ranking);
    return out;
}

}  // namespace

TEST_CASE("evaluation is identical for any thread count") {
    testing::TinyWorld w;
    const auto one = untrained_report(w, StrategyFlags{});
    const auto four = untrained_report(w, StrategyFlags{}, 4);
    std::ostringstream a, b;
    one.write_json(a);
    four.write_json(b);
    CHECK(a.str() == b.str());
    CHECK(one.impressions == w.dataset.split.test.size());
}

TEST_CASE("beta 1 with alpha near zero keeps the base ranking") {
    testing::TinyWorld w;
    const auto report = untrained_report(w, StrategyFlags{true, true, false});
    FreshnessParams p;
    p.alpha = 1e-12;
    p.beta = 1.0;
    const auto fresh = rescore(report, StrategyFlags{}, p);
    CHECK(rankings(fresh) == rankings(report));
    for (const auto& r : fresh.rankings) {
        for (const auto& c : r.candidates) CHECK(c.weight == doctest::Approx(0.5));
    }
}

TEST_CASE("alpha zero gives constant weights per branch") {
    testing::TinyWorld w;
    const auto report = untrained_report(w, StrategyFlags{});
    FreshnessParams p;
    p.alpha = 0.0;
    p.beta = 0.4;
    const auto r = rescore(report, StrategyFlags{}, p);
    for (const auto& imp : r.rankings) {
        for (const auto& c : imp.candidates) CHECK(c.weight == (c.fresh_units < 0 ? 0.2 : 0.5));
    }
}

TEST_CASE("s3-off evaluation ignores the lifetime table") {
    testing::TinyWorld w;
    const StrategyFlags base{false, false, false};
    const LimeModel model(w.model_config(base), 5);
    const auto a = evaluate(model, build_inputs(*w.features, w.dataset.split.test), base, FreshnessParams{});

    LifetimeTable scrambled(LifetimeParams{90.0, 3, 7.0 * 3600.0});
    for (const auto& [topic, e] : w.ctx->lifetimes().topics()) scrambled.set_topic(topic, {e.seconds * 5.0, e.support});
    const FeatureBuilder other(w.dataset.news, w.dataset.vocab, scrambled, LifetimeDefinition::UserTopic,
                               w.ctx->click_times(), kSecondsPerHour);
    const auto b = evaluate(model, build_inputs(other, w.dataset.split.test), base, FreshnessParams{});
    CHECK(a.metrics.auc == b.metrics.auc);
    CHECK(rankings(a) == rankings(b));
}

TEST_CASE("sweep grid") {
    testing::TinyWorld w;
    const auto report = untrained_report(w, StrategyFlags{});
    const auto grid = unit_grid();
    REQUIRE(grid.size() == 11);
    CHECK(grid.front() == 0.0);
    CHECK(grid.back() == 1.0);
    const auto points = sweep_freshness(report, grid, grid, StrategyFlags{});
    CHECK(points.size() == 121);
    std::ostringstream csv;
    write_sweep_csv(csv, points);
    const auto text = csv.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 122);
}

TEST_CASE("beta zero zeroes expired candidates") {
    testing::TinyWorld w;
    const auto report = untrained_report(w, StrategyFlags{});
    FreshnessParams p;
    p.beta = 0.0;
    const auto r = rescore(report, StrategyFlags{}, p);
    for (const auto& imp : r.rankings) {
        for (const auto& c : imp.candidates) {
            if (c.fresh_units < 0) CHECK(c.score == 0.0);
        }
    }
}

TEST_CASE("ablation combinations") {
    const auto combos = ablation_combinations();
    std::vector<std::string> labels;
    for (const auto& c : combos) labels.push_back(c.label());
    CHECK(labels == std::vector<std::string>{"base", "S1", "S3", "S1+S2", "S1+S3", "S1+S2+S3"});

    testing::TinyWorld w;
    const std::vector<StrategyFlags> illegal{{false, true, false}};
    CHECK_THROWS_AS(ablate(*w.ctx, w.experiment(1), illegal), std::invalid_argument);
}

TEST_CASE("ablation base row matches a plain run") {
    testing::TinyWorld w;
    auto cfg = w.experiment(1);
    const std::vector<StrategyFlags> combos{{false, false, false}};
    const auto table = ablate(*w.ctx, cfg, combos);
    cfg.model.flags = combos[0];
    const auto run = run_experiment(*w.ctx, cfg, 1);
    CHECK(table.row("base").mean.auc == run.test.metrics.auc);
    CHECK(table.rows[0].auc_gain_pct == 0.0);
    CHECK_THROWS_AS(table.row("S9"), std::out_of_range);
}

TEST_CASE("identical runs give identical reports") {
    testing::TinyWorld w;
    const auto cfg = w.experiment(1);
    const auto a = run_experiment(*w.ctx, cfg, 2);
    const auto b = run_experiment(*w.ctx, cfg, 2);
    std::ostringstream ja, jb;
    a.test.write_json(ja);
    b.test.write_json(jb);
    CHECK(ja.str() == jb.str());
    CHECK_FALSE(a.test.config_hash.empty());
}

TEST_CASE("error coverage of a perfect ranking is empty") {
    testing::TinyWorld w;
    auto report = untrained_report(w, StrategyFlags{});
    for (auto& imp : report.rankings) {
        std::stable_sort(imp.ranking.begin(), imp.ranking.end(), [&](std::size_t a, std::size_t b) {
            return imp.candidates[a].label > imp.candidates[b].label;
        });
    }
    const auto cov = error_coverage(report, *w.features);
    CHECK(cov.false_negatives == 0);
    CHECK(cov.false_positives == 0);
    CHECK_FALSE(cov.fn_in_lifetime.has_value());
    CHECK_FALSE(cov.fp_in_lifetime.has_value());
}

TEST_CASE("false positives on expired candidates count as out of lifetime") {
    testing::TinyWorld w;
    auto report = untrained_report(w, StrategyFlags{});
    std::size_t kept = 0;
    std::vector<ImpressionResult> picked;
    for (auto imp : report.rankings) {
        // rank an expired negative first whenever one exists
        for (std::size_t i = 0; i < imp.candidates.size(); ++i) {
            const auto& c = imp.candidates[i];
            if (c.label == 0 && c.age_seconds > c.lifetime_seconds) {
                std::vector<std::size_t> order{i};
                for (std::size_t j = 0; j < imp.candidates.size(); ++j) {
                    if (j != i) order.push_back(j);
                }
                imp.ranking = order;
                picked.push_back(imp);
                ++kept;
                break;
            }
        }
    }
    REQUIRE(kept > 0);
    report.rankings = picked;
    const auto cov = error_coverage(report, *w.features);
    CHECK(cov.false_positives >= kept);
    REQUIRE(cov.fp_in_lifetime.has_value());
    CHECK(*cov.fp_in_lifetime < 1.0);
}

TEST_CASE("explanations list candidates in score order") {
    testing::TinyWorld w;
    const StrategyFlags flags{};
    const LimeModel model(w.model_config(flags), 5);
    const auto inputs = build_inputs(*w.features, w.dataset.split.test);
    const auto report = evaluate(model, inputs, flags, FreshnessParams{});
    for (std::size_t i = 0; i < 10 && i < inputs.size(); ++i) {
        const auto text = explain(inputs[i], model, flags, FreshnessParams{}, w.dataset.news);
        const auto& r = report.rankings[i];
        std::size_t pos = 0;
        for (const auto idx : r.ranking) {
            const auto found = text.find(w.dataset.news[r.candidates[idx].news].news_id + " ", pos);
            REQUIRE(found != std::string::npos);
            pos = found;
        }
        const bool has_expired = std::any_of(r.candidates.begin(), r.candidates.end(),
                                             [](const CandidateResult& c) { return c.fresh_units < 0; });
        CHECK((text.find("verdict=expired") != std::string::npos) == has_expired);
    }
}

TEST_CASE("untrained model is near chance on matched negatives") {
    auto spec = testing::tiny_spec(4);
    spec.negatives = NegativePolicy::Matched;
    spec.num_users = 20;
    spec.clicks_per_user = 60;
    const testing::TinyWorld w(spec);
    const auto report = untrained_report(w, StrategyFlags{});
    CHECK(report.metrics.auc == doctest::Approx(0.5).epsilon(0.1));
}
