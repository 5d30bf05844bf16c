#pragma once
// Synthetic click logs with planted lifetimes.
//
// Every (user, topic) pair has a planted lifetime L(u,t) = base(t) * mult(u).
// Click ages for the pair follow an exponential truncated at cap_ratio * L,
// with its rate chosen so the 90th percentile is exactly L. Ages are drawn by
// stratified inverse-CDF sampling (one draw per 1/n slice of probability), so
// the empirical quantile of n clicks sits within one slice of the planted one.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lime/corpus.hpp"
#include "lime/timeline.hpp"

namespace lime {

// How the non-clicked candidates of an impression are chosen.
enum class NegativePolicy {
    Lifetime,    // expired same-topic news plus still-valid news from other topics
    Matched,     // drawn exactly like positives (chance-level data)
    Separable,   // fresh news from topics the user never clicks
};

std::string_view to_string(NegativePolicy p);
NegativePolicy parse_negative_policy(std::string_view name);

struct GeneratorSpec {
    std::uint64_t seed = 1;
    std::size_t num_users = 50;
    std::size_t num_topics = 5;
    std::size_t subtopics_per_topic = 3;
    std::size_t news_per_topic = 300;
    std::size_t vocab_size = 500;          // tokens, split into per-topic pools and a shared pool
    std::size_t title_length = 10;
    double topic_token_share = 0.7;        // chance a title token comes from its topic's pool

    // Topic base lifetimes in seconds. Empty: log-spaced over [min, max].
    std::vector<double> topic_lifetimes;
    double min_topic_lifetime = 6.0 * 3600.0;
    double max_topic_lifetime = 72.0 * 3600.0;

    // User multipliers: explicit groups (user u gets groups[u % size]) or,
    // when empty, log-normal(0, sigma) clamped to [1/clamp, clamp].
    std::vector<double> multiplier_groups;
    double multiplier_sigma = 0.7;
    double multiplier_clamp = 8.0;

    // Rows sum to 1. Empty: each user draws `topics_per_user` topics with
    // random weights.
    std::vector<std::vector<double>> affinity;
    std::size_t topics_per_user = 3;

    std::size_t clicks_per_user = 200;
    std::size_t impression_size = 5;       // candidates per click impression, positive included
    NegativePolicy negatives = NegativePolicy::Lifetime;
    double expired_fraction = 0.5;         // share of Lifetime-policy negatives that are expired same-topic news
    std::size_t max_history = 20;

    double horizon = 30.0 * 86400.0;       // publish times are uniform over [start, start + horizon)
    Timestamp start_time = 1570000000;
    double cap_ratio = 3.0;                // click ages truncated at cap_ratio * L(u,t)
    bool publication_impressions = true;   // one impression per article at its publish time

    // Throws std::invalid_argument on inconsistent or infeasible values.
    void validate() const;
};

struct SyntheticLog {
    Vocabulary vocab;
    NewsTable news;                          // true publish times set
    std::vector<Impression> impressions;     // sorted by (time, impression_id)
    std::vector<std::string> users;
    std::vector<double> topic_lifetimes;     // by topic index (0 is padding)
    std::vector<double> user_multipliers;    // by position in `users`
    LifetimeTable truth;                     // planted values; fixed = click-weighted mean lifetime
    double mean_lifetime = 0.0;

    double planted(std::size_t user, int topic) const;
};

// Rate lambda of the truncated exponential on [0, cap] whose q-quantile is L.
double truncated_exp_rate(double lifetime, double cap, double q = 0.9);
// Inverse CDF of that distribution.
double truncated_exp_quantile(double u, double rate, double cap);

SyntheticLog generate(const GeneratorSpec& spec);

// Time-split dataset with publish times re-derived from the impressions, as
// the loader would produce.
Dataset to_dataset(const SyntheticLog& log, const SplitFractions& fractions = {});

// news.tsv, behaviors.tsv and truth_lifetimes.tsv under `dir`.
void write_synthetic(const SyntheticLog& log, const std::filesystem::path& dir);

}  // namespace lime
