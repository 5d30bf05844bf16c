#include "lime/tempcode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lime {

void BucketConfig::validate() const {
    if (buckets < 2) {
        throw std::invalid_argument("bucket count must be >= 2, got " + std::to_string(buckets));
    }
    if (!(tau > 1.0) || !std::isfinite(tau)) {
        throw std::invalid_argument("bucket tau must be finite and > 1, got " + std::to_string(tau));
    }
}

void FreshnessParams::validate(bool allow_zero) const {
    auto in_range = [allow_zero](double v) {
        return allow_zero ? (v >= 0.0 && v <= 1.0) : (v > 0.0 && v <= 1.0);
    };
    if (!in_range(alpha)) {
        throw std::invalid_argument("freshness alpha out of range: " + std::to_string(alpha));
    }
    if (!in_range(beta)) {
        throw std::invalid_argument("freshness beta out of range: " + std::to_string(beta));
    }
    if (!(unit > 0.0)) {
        throw std::invalid_argument("freshness unit must be positive");
    }
}

std::size_t bucketize(double seconds, const BucketConfig& cfg) {
    if (!(seconds >= 0.0) || std::isinf(seconds)) {
        throw std::invalid_argument("bucketize: age must be finite and non-negative, got " +
                                    std::to_string(seconds));
    }
    const double scaled =
        std::log(std::max(seconds, 1.0)) * static_cast<double>(cfg.buckets) / std::log(cfg.tau);
    const double last = static_cast<double>(cfg.buckets - 1);
    return static_cast<std::size_t>(std::min(std::floor(scaled), last));
}

double freshness(double candidate_age, double lifetime, double unit) {
    return (lifetime - candidate_age) / unit;
}

double freshness_weight(double fresh, const FreshnessParams& params) {
    // 1/(1+exp(-x)) written to avoid overflow for large |x|.
    const double x = params.alpha * fresh;
    const double sig = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    return fresh >= 0.0 ? sig : params.beta * sig;
}

}  // namespace lime
