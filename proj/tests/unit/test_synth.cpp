#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "lime/synth.hpp"

using namespace lime;

TEST_CASE("truncated exponential hits the requested quantile") {
    for (const double l : {3600.0, 36 * 3600.0, 10 * 86400.0}) {
        for (const double ratio : {1.5, 3.0, 10.0}) {
            const double cap = ratio * l;
            const double rate = truncated_exp_rate(l, cap);
            CHECK(rate > 0.0);
            CHECK(truncated_exp_quantile(0.9, rate, cap) == doctest::Approx(l).epsilon(1e-9));
            CHECK(truncated_exp_quantile(0.0, rate, cap) == 0.0);
            CHECK(truncated_exp_quantile(1.0, rate, cap) == doctest::Approx(cap));
        }
    }
    CHECK_THROWS(truncated_exp_rate(10.0, 5.0));
}

TEST_CASE("generation is a pure function of the generator settings") {
    const auto a = generate(testing::tiny_spec(3));
    const auto b = generate(testing::tiny_spec(3));
    const auto c = generate(testing::tiny_spec(4));
    CHECK(a.impressions == b.impressions);
    CHECK(a.news == b.news);
    CHECK(a.truth == b.truth);
    CHECK_FALSE(a.impressions == c.impressions);
}

TEST_CASE("single topic without multipliers plants one lifetime") {
    auto spec = testing::tiny_spec();
    spec.num_topics = 1;
    spec.topics_per_user = 1;
    spec.multiplier_sigma = 0.0;
    spec.topic_lifetimes = {20 * 3600.0};
    const auto log = generate(spec);
    for (std::size_t u = 0; u < log.users.size(); ++u) CHECK(log.planted(u, 1) == 20 * 3600.0);
    for (const auto& [key, e] : log.truth.user_topics()) CHECK(e.seconds == 20 * 3600.0);
}

TEST_CASE("multiplier groups scale planted lifetimes") {
    auto spec = testing::tiny_spec();
    spec.multiplier_groups = {0.25, 4.0};
    const auto log = generate(spec);
    CHECK(log.planted(1, 1) / log.planted(0, 1) == doctest::Approx(16.0));
    CHECK(log.user_multipliers[2] == 0.25);
}

TEST_CASE("impressions are consistent with the planted world") {
    const auto log = generate(testing::tiny_spec(2));
    CHECK(std::is_sorted(log.impressions.begin(), log.impressions.end(), [](const auto& a, const auto& b) {
        return a.time != b.time ? a.time < b.time : a.impression_id < b.impression_id;
    }));
    std::size_t clicks = 0;
    for (const auto& imp : log.impressions) {
        for (const auto& c : imp.candidates) {
            const auto pub = log.news[c.news].publish_time;
            REQUIRE(pub.has_value());
            CHECK(*pub <= imp.time);
            clicks += c.label;
        }
        for (const auto h : imp.history) CHECK(*log.news[h].publish_time <= imp.time);
        std::set<int> ids;
        for (const auto& c : imp.candidates) ids.insert(c.news);
        CHECK(ids.size() == imp.candidates.size());
    }
    CHECK(clicks == 8 * 30);
}

TEST_CASE("derived publish times equal the true ones") {
    const auto log = generate(testing::tiny_spec(5));
    const auto ds = to_dataset(log);
    for (std::size_t i = 0; i < log.news.size(); ++i) {
        CHECK(ds.news[static_cast<int>(i)].publish_time == log.news[static_cast<int>(i)].publish_time);
    }
}

TEST_CASE("separable negatives come from topics the user never clicks") {
    auto spec = testing::tiny_spec(6);
    spec.negatives = NegativePolicy::Separable;
    spec.topics_per_user = 1;
    const auto log = generate(spec);
    std::map<std::string, std::set<int>> clicked;
    for (const auto& imp : log.impressions) {
        for (const auto& c : imp.candidates) {
            if (c.label) clicked[imp.user_id].insert(log.news[c.news].topic);
        }
    }
    for (const auto& imp : log.impressions) {
        if (imp.positives() == 0) continue;
        for (const auto& c : imp.candidates) {
            if (!c.label) CHECK(clicked[imp.user_id].count(log.news[c.news].topic) == 0);
        }
    }
}

TEST_CASE("lifetime negatives include expired same-topic news") {
    auto spec = testing::tiny_spec(7);
    spec.expired_fraction = 1.0;
    const auto log = generate(spec);
    std::size_t expired = 0, total = 0;
    for (std::size_t u = 0; u < log.users.size(); ++u) {
        for (const auto& imp : log.impressions) {
            if (imp.user_id != log.users[u] || imp.positives() == 0) continue;
            for (const auto& c : imp.candidates) {
                if (c.label) continue;
                const auto& a = log.news[c.news];
                const double age = static_cast<double>(imp.time - *a.publish_time);
                ++total;
                expired += age > log.planted(u, a.topic) ? 1 : 0;
            }
        }
    }
    REQUIRE(total > 0);
    CHECK(static_cast<double>(expired) / static_cast<double>(total) > 0.8);
}

TEST_CASE("user-topic lifetimes cover more clicks than the mean lifetime") {
    // Topic-wise coverage moves above or below both with article density, so
    // only this end of the ordering is asserted.
    for (const std::uint64_t seed : {1, 2, 3}) {
        GeneratorSpec spec;
        spec.seed = seed;
        spec.num_users = 50;
        spec.clicks_per_user = 100;
        spec.multiplier_sigma = 0.8;
        const auto log = generate(spec);
        const auto ds = to_dataset(log, SplitFractions{1.0, 0.0, 0.0});
        auto clicks = ds.train_clicks();
        assign_click_ages(clicks, ds.news);
        LifetimeParams params;
        params.fixed_seconds = log.mean_lifetime;
        const ClickLog cl{clicks, ds.news, ds.vocab};
        const auto table = build_lifetime_table(cl, params);
        const double ut = click_coverage(cl, table, LifetimeDefinition::UserTopic);
        const double fx = click_coverage(cl, table, LifetimeDefinition::Fixed);
        CHECK(ut > fx);
        CHECK(ut == doctest::Approx(0.9).epsilon(0.03));
    }
}

TEST_CASE("generator settings validation") {
    auto spec = testing::tiny_spec();
    spec.topics_per_user = 9;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
    spec = testing::tiny_spec();
    spec.impression_size = 0;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
    spec = testing::tiny_spec();
    spec.horizon = 3600.0;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
    CHECK(parse_negative_policy(to_string(NegativePolicy::Matched)) == NegativePolicy::Matched);
    CHECK_THROWS(parse_negative_policy("random"));
}

TEST_CASE("written synthetic data loads back") {
    const auto dir = std::filesystem::temp_directory_path() / "lime_unit_synth";
    std::filesystem::remove_all(dir);
    const auto log = generate(testing::tiny_spec(8));
    write_synthetic(log, dir);
    CHECK(std::filesystem::exists(dir / "truth_lifetimes.tsv"));
    const auto loaded = load_dataset(dir);
    const auto direct = to_dataset(log);
    CHECK(loaded.split.train == direct.split.train);
    CHECK(loaded.split.test == direct.split.test);
    std::filesystem::remove_all(dir);
}
