#pragma once
// Temporal encodings: logarithmic age bucketization and the freshness
// weighting applied to candidate scores at ranking time.

#include <cstddef>

namespace lime {

inline constexpr double kSecondsPerHour = 3600.0;

struct BucketConfig {
    std::size_t buckets = 100;   // B
    double tau = 864000.0;       // seconds covered before clamping (10 days)

    void validate() const;
};

struct FreshnessParams {
    double alpha = 0.3;          // sigmoid slope per freshness unit
    double beta = 0.3;           // multiplier applied to expired candidates
    double unit = kSecondsPerHour;

    // alpha/beta in (0,1]; the sweep harness relaxes this to [0,1].
    void validate(bool allow_zero = false) const;
};

// b = min(floor(log(max(a,1)) * B / log(tau)), B - 1). Serves both ages and
// lifetimes. Throws std::invalid_argument for negative or non-finite input.
std::size_t bucketize(double seconds, const BucketConfig& cfg);

// Remaining lifetime (lifetime - age) expressed in `unit`; negative once the
// candidate has expired.
double freshness(double candidate_age, double lifetime, double unit = kSecondsPerHour);

// sigmoid(alpha * F) when F >= 0, beta * sigmoid(alpha * F) otherwise.
double freshness_weight(double fresh, const FreshnessParams& params);

}  // namespace lime
