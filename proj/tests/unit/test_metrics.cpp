#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "lime/metrics.hpp"

using namespace lime;

namespace {

using Scores = std::vector<double>;
using Labels = std::vector<int>;

}  // namespace

TEST_CASE("auc examples") {
    CHECK(*auc(Scores{0.9, 0.1}, Labels{1, 0}) == 1.0);
    CHECK(*auc(Scores{0.5, 0.5}, Labels{1, 0}) == 0.5);
    CHECK(*auc(Scores{0.8, 0.9, 0.1}, Labels{1, 0, 0}) == 0.5);
    CHECK_FALSE(auc(Scores{0.8, 0.9}, Labels{1, 1}).has_value());
    CHECK_FALSE(auc(Scores{0.8, 0.9}, Labels{0, 0}).has_value());
}

TEST_CASE("mrr takes the first relevant") {
    CHECK(*mrr(Scores{0.9, 0.1}, Labels{1, 0}) == 1.0);
    CHECK(*mrr(Scores{0.1, 0.9}, Labels{1, 0}) == 0.5);
    // positives at ranks 2 and 5
    CHECK(*mrr(Scores{0.9, 0.8, 0.7, 0.6, 0.5}, Labels{0, 1, 0, 0, 1}) == 0.5);
    CHECK_FALSE(mrr(Scores{0.9}, Labels{0}).has_value());
}

TEST_CASE("ndcg examples") {
    CHECK(*ndcg(Scores{0.9, 0.1}, Labels{1, 0}, 5) == 1.0);
    CHECK(*ndcg(Scores{0.9, 0.8, 0.7, 0.6}, Labels{0, 0, 1, 0}, 5) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(*ndcg(Scores{0.9, 0.8, 0.7, 0.6, 0.5, 0.4}, Labels{0, 0, 0, 0, 0, 1}, 5) == 0.0);
}

TEST_CASE("ties keep input order") {
    CHECK(rank_order(Scores{0.5, 0.7, 0.5, 0.7}) == std::vector<std::size_t>{1, 3, 0, 2});
    CHECK(*mrr(Scores{0.5, 0.5}, Labels{0, 1}) == 0.5);
}

TEST_CASE("auc is invariant under monotone transforms") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t size = 2 + rng() % 9;
        Scores s(size);
        Labels l(size);
        for (std::size_t i = 0; i < size; ++i) {
            s[i] = std::round(n(rng) * 4.0) / 4.0;   // coarse values produce ties
            l[i] = static_cast<int>(rng() % 2);
        }
        l[0] = 1;
        l[1] = 0;
        Scores t(size);
        std::transform(s.begin(), s.end(), t.begin(), [](double x) { return std::exp(3.0 * x) - 7.0; });
        CHECK(*auc(s, l) == *auc(t, l));
        CHECK(*mrr(s, l) == *mrr(t, l));
        CHECK(*ndcg(s, l, 5) == *ndcg(t, l, 5));
    }
}

TEST_CASE("accumulator excludes single-class impressions from auc") {
    MetricAccumulator acc;
    acc.add(Scores{0.9, 0.1}, Labels{1, 0});
    acc.add(Scores{0.1, 0.9}, Labels{1, 0});
    acc.add(Scores{0.1, 0.9}, Labels{1, 1});
    acc.add(Scores{0.1, 0.9}, Labels{0, 0});
    const auto m = acc.means();
    CHECK(m.auc_count == 2);
    CHECK(m.single_class == 2);
    CHECK(m.ranked_count == 3);
    CHECK(m.no_positive == 1);
    CHECK(m.auc == 0.5);
    CHECK(m.mrr == doctest::Approx((1.0 + 0.5 + 1.0) / 3.0));
}

TEST_CASE("metric input validation") {
    CHECK_THROWS(auc(Scores{0.1, 0.2}, Labels{1}));
}
