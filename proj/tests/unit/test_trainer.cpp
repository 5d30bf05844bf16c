#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "lime/trainer.hpp"

using namespace lime;

namespace {

Impression impression(int positives, int negatives) {
    Impression imp;
    imp.impression_id = "I1";
    imp.user_id = "U1";
    int news = 1;
    for (int i = 0; i < positives; ++i) imp.candidates.push_back({news++, 1});
    for (int i = 0; i < negatives; ++i) imp.candidates.push_back({news++, 0});
    return imp;
}

}  // namespace

TEST_CASE("one example per positive with distinct negatives") {
    const std::vector<Impression> one{impression(1, 6)};
    SamplingStats stats;
    const auto ex = sample_examples(one, 4, 1, false, &stats);
    REQUIRE(ex.size() == 1);
    CHECK(ex[0].negatives.size() == 4);
    CHECK(std::set<std::size_t>(ex[0].negatives.begin(), ex[0].negatives.end()).size() == 4);
    for (const auto n : ex[0].negatives) CHECK(one[0].candidates[n].label == 0);
    CHECK(stats.examples == 1);

    const std::vector<Impression> two{impression(2, 5)};
    CHECK(sample_examples(two, 4, 1).size() == 2);
}

TEST_CASE("short impressions resample or skip") {
    const std::vector<Impression> imps{impression(1, 2), impression(1, 0)};
    SamplingStats stats;
    const auto ex = sample_examples(imps, 4, 3, false, &stats);
    REQUIRE(ex.size() == 1);
    CHECK(ex[0].negatives.size() == 4);
    CHECK(stats.resampled == 1);
    CHECK(stats.skipped == 1);

    SamplingStats strict;
    CHECK(sample_examples(imps, 4, 3, true, &strict).empty());
    CHECK(strict.skipped == 2);
    CHECK_THROWS(sample_examples(imps, 0, 3));
}

TEST_CASE("sampling is a function of the seed") {
    const std::vector<Impression> imps{impression(2, 9), impression(1, 7), impression(3, 5)};
    const auto a = sample_examples(imps, 4, 77);
    const auto b = sample_examples(imps, 4, 77);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].negatives == b[i].negatives);
}

TEST_CASE("click loss values") {
    CHECK(click_loss(std::vector<double>{0, 0, 0, 0, 0}) == doctest::Approx(1.6094379124341003).epsilon(1e-14));
    CHECK(click_loss(std::vector<double>{1.0, 0, 0, 0, 0}) == doctest::Approx(0.9048324415544480).epsilon(1e-14));
    CHECK(click_loss(std::vector<double>{60.0, 0, 0, 0, 0}) < 1e-24);
    // stable where the naive form overflows
    CHECK(std::isfinite(click_loss(std::vector<double>{800.0, 799.0})));
    CHECK_FALSE(std::isfinite(click_loss_naive(std::vector<double>{800.0, 799.0})));
}

TEST_CASE("click loss agrees with the naive form on moderate scores") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 3.0);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> s(5);
        for (auto& x : s) x = n(rng);
        CHECK(click_loss(s) == doctest::Approx(click_loss_naive(s)).epsilon(1e-12));
    }
}

TEST_CASE("zero learning rate keeps the loss curve flat") {
    testing::TinyWorld w;
    LimeModel model(w.model_config(), 3);
    const auto before = model.params();
    TrainConfig cfg;
    cfg.lr = 0.0;
    cfg.max_epochs = 3;
    cfg.patience = 10;
    const auto result = train(model, TrainingData{w.dataset.split.train, w.dataset.split.dev, *w.features}, cfg);
    REQUIRE(result.curve.size() == 3);
    for (const auto& r : result.curve) {
        CHECK(r.train_loss == result.curve[0].train_loss);
        CHECK(r.dev_auc == result.curve[0].dev_auc);
    }
    CHECK(model.params().same_values(before));
}

TEST_CASE("training is deterministic and reduces the loss") {
    testing::TinyWorld w;
    TrainConfig cfg;
    cfg.max_epochs = 3;
    cfg.lr = 5e-3;
    const TrainingData data{w.dataset.split.train, w.dataset.split.dev, *w.features};
    LimeModel a(w.model_config(), 3), b(w.model_config(), 3);
    std::size_t callbacks = 0;
    const auto ra = train(a, data, cfg, [&](const EpochRecord&) { ++callbacks; });
    const auto rb = train(b, data, cfg);
    CHECK(callbacks == ra.curve.size());
    REQUIRE(ra.curve.size() == rb.curve.size());
    for (std::size_t i = 0; i < ra.curve.size(); ++i) {
        CHECK(ra.curve[i].train_loss == rb.curve[i].train_loss);
        CHECK(ra.curve[i].dev_auc == rb.curve[i].dev_auc);
    }
    CHECK(a.params().same_values(b.params()));
    CHECK(ra.curve.back().train_loss < ra.initial_loss);
    CHECK(ra.initial_loss == doctest::Approx(std::log(5.0)).epsilon(0.05));
}

TEST_CASE("curve csv") {
    std::ostringstream out;
    const std::vector<EpochRecord> curve{{1, 1.5, 0.625, 0.25}};
    write_curve_csv(out, curve);
    CHECK(out.str() == "epoch,train_loss,dev_auc,dev_mrr\n1,1.5,0.625,0.25\n");
}
