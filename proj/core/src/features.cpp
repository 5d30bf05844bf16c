#include "lime/features.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace lime {

ClickTimeIndex::ClickTimeIndex(std::span<const std::vector<Impression>* const> parts) {
    auto keep_min = [](auto& map, const std::string& user, int news, Timestamp t) {
        auto [it, inserted] = map.try_emplace({user, news}, t);
        if (!inserted && t < it->second) it->second = t;
    };
    for (const auto* part : parts) {
        for (const auto& imp : *part) {
            for (const auto& c : imp.candidates) {
                if (c.label == 1) keep_min(clicked_, imp.user_id, c.news, imp.time);
            }
            for (const int h : imp.history) keep_min(in_history_, imp.user_id, h, imp.time);
        }
    }
}

ClickTimeIndex ClickTimeIndex::from(const Split& split) {
    const std::array<const std::vector<Impression>*, 3> parts{&split.train, &split.dev, &split.test};
    return ClickTimeIndex(parts);
}

Timestamp ClickTimeIndex::click_time(const std::string& user, int news, Timestamp at) const {
    const std::pair<std::string, int> key{user, news};
    if (const auto it = clicked_.find(key); it != clicked_.end() && it->second <= at) return it->second;
    if (const auto it = in_history_.find(key); it != in_history_.end() && it->second <= at) return it->second;
    return at;
}

std::vector<NewsInput> ImpressionInputs::history_inputs() const {
    std::vector<NewsInput> out;
    out.reserve(history.size());
    for (const auto& h : history) out.push_back(h.input);
    return out;
}

std::vector<NewsInput> ImpressionInputs::candidate_inputs() const {
    std::vector<NewsInput> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) out.push_back(c.input);
    return out;
}

FeatureBuilder::FeatureBuilder(const NewsTable& news, const Vocabulary& vocab, const LifetimeTable& lifetimes,
                               LifetimeDefinition definition, const ClickTimeIndex& clicks, double fresh_unit)
    : news_(news),
      vocab_(vocab),
      lifetimes_(lifetimes),
      definition_(definition),
      clicks_(clicks),
      fresh_unit_(fresh_unit) {}

ResolvedNews FeatureBuilder::resolve(const std::string& user, int news, Timestamp at) const {
    const auto& art = news_[news];
    ResolvedNews r;
    r.news = news;
    r.input.title = art.title;
    r.input.topic = art.topic;
    r.input.subtopic = art.subtopic;
    // Articles without a derived publish time are treated as brand new.
    const Timestamp published = art.publish_time.value_or(at);
    r.input.age_seconds = static_cast<double>(std::max<Timestamp>(0, at - published));
    const auto life = lifetimes_.resolve(user, vocab_.topics.name(art.topic), definition_);
    r.input.lifetime_seconds = life.seconds;
    r.provenance = life.provenance;
    r.fresh_units = freshness(r.input.age_seconds, life.seconds, fresh_unit_);
    return r;
}

ImpressionInputs FeatureBuilder::build(const Impression& imp) const {
    ImpressionInputs out;
    out.impression = &imp;
    out.history.reserve(imp.history.size());
    for (const int h : imp.history) {
        out.history.push_back(resolve(imp.user_id, h, clicks_.click_time(imp.user_id, h, imp.time)));
    }
    out.candidates.reserve(imp.candidates.size());
    out.labels.reserve(imp.candidates.size());
    for (const auto& c : imp.candidates) {
        out.candidates.push_back(resolve(imp.user_id, c.news, imp.time));
        out.labels.push_back(c.label);
    }
    return out;
}

}  // namespace lime
