#pragma once
// Turns impressions into model inputs: resolves ages at click / prediction
// time and the lifetime each (user, topic) pair resolves to.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lime/corpus.hpp"
#include "lime/model.hpp"
#include "lime/timeline.hpp"

namespace lime {

// When did user u click news n? Positive labels give exact times. Articles that
// only ever appear in a history fall back to the first impression whose history
// contains them, the earliest time the click is known to have happened by.
class ClickTimeIndex {
public:
    ClickTimeIndex() = default;
    explicit ClickTimeIndex(std::span<const std::vector<Impression>* const> parts);
    static ClickTimeIndex from(const Split& split);

    // Earliest known click time at or before `at`; `at` when nothing is known.
    Timestamp click_time(const std::string& user, int news, Timestamp at) const;

private:
    std::map<std::pair<std::string, int>, Timestamp> clicked_;
    std::map<std::pair<std::string, int>, Timestamp> in_history_;
};

struct ResolvedNews {
    int news = 0;
    NewsInput input;
    Provenance provenance = Provenance::Fixed;
    double fresh_units = 0.0;   // (lifetime - age) / unit; meaningful for candidates
};

struct ImpressionInputs {
    const Impression* impression = nullptr;
    std::vector<ResolvedNews> history;
    std::vector<ResolvedNews> candidates;
    std::vector<int> labels;

    std::vector<NewsInput> history_inputs() const;
    std::vector<NewsInput> candidate_inputs() const;
};

class FeatureBuilder {
public:
    FeatureBuilder(const NewsTable& news, const Vocabulary& vocab, const LifetimeTable& lifetimes,
                   LifetimeDefinition definition, const ClickTimeIndex& clicks, double fresh_unit);

    ImpressionInputs build(const Impression& imp) const;
    ResolvedNews resolve(const std::string& user, int news, Timestamp at) const;

    LifetimeDefinition definition() const { return definition_; }
    const LifetimeTable& lifetimes() const { return lifetimes_; }

private:
    const NewsTable& news_;
    const Vocabulary& vocab_;
    const LifetimeTable& lifetimes_;
    LifetimeDefinition definition_;
    const ClickTimeIndex& clicks_;
    double fresh_unit_;
};

}  // namespace lime
