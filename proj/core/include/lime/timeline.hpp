#pragma once
// News lifetimes estimated from click logs.
//
//   topic-wise   L(t, m):    mean over articles of topic t of the age at which
//                            the article reached m% of its clicks
//   user-topic   L(u, t, m): age at which m% of user u's clicks on topic t
//                            (pooled over articles) had occurred
//   fixed:                   a single global value (36 h by default)
//
// Lookups fall back user-topic -> topic -> fixed, so every (user, topic)
// pair resolves.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "lime/corpus.hpp"

namespace lime {

enum class LifetimeDefinition { Fixed, Topic, UserTopic };
enum class Provenance { UserTopic, Topic, Fixed };

std::string_view to_string(LifetimeDefinition def);
std::string_view to_string(Provenance p);
// Accepts "fixed", "topic", "topic-wise", "user-topic", "usertopic".
LifetimeDefinition parse_lifetime_definition(std::string_view name);

struct LifetimeParams {
    double m = 90.0;                 // percent in (0, 100]
    std::size_t min_clicks = 3;      // k: support needed for a user-topic entry
    double fixed_seconds = 36.0 * 3600.0;

    void validate() const;
};

struct LifetimeEntry {
    double seconds = 0.0;
    std::size_t support = 0;         // clicks behind the estimate

    bool operator==(const LifetimeEntry&) const = default;
};

struct ResolvedLifetime {
    double seconds = 0.0;
    Provenance provenance = Provenance::Fixed;
};

// Read-only view over a click log plus the tables needed to interpret it.
struct ClickLog {
    std::span<const ClickEvent> clicks;
    const NewsTable& news;
    const Vocabulary& vocab;
};

class LifetimeTable {
public:
    explicit LifetimeTable(LifetimeParams params = {});

    const LifetimeParams& params() const { return params_; }
    double fixed_seconds() const { return params_.fixed_seconds; }

    void set_topic(const std::string& topic, LifetimeEntry entry);
    // Entries with support below min_clicks are rejected (std::invalid_argument).
    void set_user_topic(const std::string& user, const std::string& topic, LifetimeEntry entry);

    std::optional<LifetimeEntry> topic(std::string_view topic) const;
    std::optional<LifetimeEntry> user_topic(std::string_view user, std::string_view topic) const;

    ResolvedLifetime resolve(std::string_view user, std::string_view topic, LifetimeDefinition def) const;

    const std::map<std::string, LifetimeEntry, std::less<>>& topics() const { return topics_; }
    const std::map<std::pair<std::string, std::string>, LifetimeEntry>& user_topics() const {
        return user_topics_;
    }

    // Line format: kind \t key \t seconds \t support, kind in {fixed, topic, usertopic};
    // key is the topic name or "user|topic". Lines starting with '#' carry m and k.
    void write(std::ostream& out) const;
    static LifetimeTable read(std::istream& in, const std::string& source = "<stream>");

    bool operator==(const LifetimeTable& other) const;

private:
    LifetimeParams params_;
    std::map<std::string, LifetimeEntry, std::less<>> topics_;
    std::map<std::pair<std::string, std::string>, LifetimeEntry> user_topics_;
};

// Age at 1-based index ceil(m/100 * n) of an ascending list. Throws on empty
// or unsorted input and on m outside (0, 100].
double article_quantile_age(std::span<const double> sorted_ages, double m);

// Mean over the topic's clicked articles of their m% quantile age; nullopt
// when no article of the topic has a click.
std::optional<double> topic_lifetime(const ClickLog& log, int topic, double m);

// The same estimate over the whole log regardless of topic: the mean over
// clicked articles of their m% quantile age. nullopt for an empty log.
std::optional<double> global_lifetime(const ClickLog& log, double m);

// m% quantile of the user's pooled click ages on the topic when there are at
// least k of them; otherwise the topic-wise and then the fixed lifetime.
ResolvedLifetime user_topic_lifetime(const ClickLog& log, std::string_view user, int topic,
                                     const LifetimeParams& params);

// Materializes all topic and user-topic entries from `log` (pass training clicks).
LifetimeTable build_lifetime_table(const ClickLog& log, const LifetimeParams& params);

// Fraction of clicks whose age is within the resolved lifetime. Throws on an empty log.
double click_coverage(const ClickLog& log, const LifetimeTable& table, LifetimeDefinition def);

}  // namespace lime
