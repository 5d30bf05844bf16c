#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "lime/tempcode.hpp"

using namespace lime;

TEST_CASE("bucketize floors and clamps") {
    const BucketConfig cfg;
    CHECK(bucketize(0.0, cfg) == 0);
    CHECK(bucketize(1.0, cfg) == 0);
    CHECK(bucketize(0.5, cfg) == 0);
    CHECK(bucketize(864000.0, cfg) == 99);
    CHECK(bucketize(1e12, cfg) == 99);
    CHECK(bucketize(300.0, cfg) == 41);
}

TEST_CASE("bucket 41 brackets 300 seconds") {
    // edges of bucket 41 are tau^(41/100) and tau^(42/100)
    const long double tau = 864000.0L;
    CHECK(std::pow(tau, 0.41L) <= 300.0L);
    CHECK(std::pow(tau, 0.42L) > 300.0L);
}

TEST_CASE("bucketize rejects bad input") {
    const BucketConfig cfg;
    CHECK_THROWS_AS(bucketize(-1.0, cfg), std::invalid_argument);
    CHECK_THROWS_AS(bucketize(std::numeric_limits<double>::quiet_NaN(), cfg), std::invalid_argument);
    CHECK_THROWS_AS(bucketize(std::numeric_limits<double>::infinity(), cfg), std::invalid_argument);
    BucketConfig bad;
    bad.buckets = 0;
    CHECK_THROWS(bad.validate());
    bad = BucketConfig{};
    bad.tau = 1.0;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("bucketize is monotone and in range") {
    const BucketConfig cfg;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> exponent(-2.0, 8.0);
    for (int i = 0; i < 2000; ++i) {
        const double a = std::pow(10.0, exponent(rng));
        const double b = a * (1.0 + std::abs(exponent(rng)));
        const auto ba = bucketize(a, cfg);
        CHECK(ba < cfg.buckets);
        CHECK(ba <= bucketize(b, cfg));
    }
}

TEST_CASE("freshness is remaining lifetime in units") {
    CHECK(freshness(36 * 3600.0, 36 * 3600.0) == 0.0);
    CHECK(freshness(26 * 3600.0, 36 * 3600.0) == doctest::Approx(10.0));
    CHECK(freshness(20 * 3600.0, 10 * 3600.0) == doctest::Approx(-10.0));
    CHECK(freshness(60.0, 120.0, 60.0) == doctest::Approx(1.0));
}

TEST_CASE("freshness weight values") {
    const FreshnessParams p;
    CHECK(freshness_weight(0.0, p) == 0.5);
    CHECK(freshness_weight(10.0, p) == doctest::Approx(0.9525741268224332).epsilon(1e-14));
    CHECK(freshness_weight(-10.0, p) == doctest::Approx(0.01422776195327003).epsilon(1e-14));
}

TEST_CASE("freshness weight is positive and bounded") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> f(-500.0, 500.0), ab(0.01, 1.0);
    for (int i = 0; i < 2000; ++i) {
        FreshnessParams p;
        p.alpha = ab(rng);
        p.beta = ab(rng);
        const double x = f(rng);
        const double w = freshness_weight(x, p);
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
        if (x < 0) CHECK(w <= 0.5 * p.beta);
        // monotone in F within each branch
        const double y = x + 1.0;
        if ((x < 0) == (y < 0)) CHECK(freshness_weight(y, p) >= w);
    }
}

TEST_CASE("freshness params validation") {
    FreshnessParams p;
    p.alpha = 0.0;
    CHECK_THROWS(p.validate());
    CHECK_NOTHROW(p.validate(true));
    p.alpha = 1.5;
    CHECK_THROWS(p.validate(true));
    p = FreshnessParams{};
    p.unit = 0.0;
    CHECK_THROWS(p.validate());
}
