#include "lime/timeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace lime {

namespace {

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, ptr) : std::to_string(v);
}

double parse_double(std::string_view s, const std::string& source, std::size_t line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError(source, line, "invalid number '" + std::string(s) + "'");
    }
    return v;
}

const std::string& topic_name(const ClickLog& log, int news) {
    return log.vocab.topics.name(log.news[news].topic);
}

}  // namespace

std::string_view to_string(LifetimeDefinition def) {
    switch (def) {
        case LifetimeDefinition::Fixed: return "fixed";
        case LifetimeDefinition::Topic: return "topic";
        case LifetimeDefinition::UserTopic: return "user-topic";
    }
    return "?";
}

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::UserTopic: return "user-topic";
        case Provenance::Topic: return "topic";
        case Provenance::Fixed: return "fixed";
    }
    return "?";
}

LifetimeDefinition parse_lifetime_definition(std::string_view name) {
    if (name == "fixed") return LifetimeDefinition::Fixed;
    if (name == "topic" || name == "topic-wise") return LifetimeDefinition::Topic;
    if (name == "user-topic" || name == "usertopic") return LifetimeDefinition::UserTopic;
    throw std::invalid_argument("unknown lifetime definition '" + std::string(name) +
                                "' (expected fixed, topic, user-topic)");
}

void LifetimeParams::validate() const {
    if (!(m > 0.0 && m <= 100.0)) throw std::invalid_argument("lifetime m must be in (0, 100]");
    if (min_clicks < 1) throw std::invalid_argument("lifetime min_clicks must be >= 1");
    if (!(fixed_seconds >= 0.0) || !std::isfinite(fixed_seconds)) {
        throw std::invalid_argument("fixed lifetime must be finite and non-negative");
    }
}

LifetimeTable::LifetimeTable(LifetimeParams params) : params_(params) { params_.validate(); }

void LifetimeTable::set_topic(const std::string& topic, LifetimeEntry entry) {
    if (!(entry.seconds >= 0.0)) throw std::invalid_argument("negative lifetime for topic " + topic);
    topics_[topic] = entry;
}

void LifetimeTable::set_user_topic(const std::string& user, const std::string& topic, LifetimeEntry entry) {
    if (!(entry.seconds >= 0.0)) throw std::invalid_argument("negative lifetime for " + user + "|" + topic);
    if (entry.support < params_.min_clicks) {
        throw std::invalid_argument("user-topic entry " + user + "|" + topic + " has support " +
                                    std::to_string(entry.support) + " < min_clicks");
    }
    user_topics_[{user, topic}] = entry;
}

std::optional<LifetimeEntry> LifetimeTable::topic(std::string_view topic) const {
    const auto it = topics_.find(topic);
    if (it == topics_.end()) return std::nullopt;
    return it->second;
}

std::optional<LifetimeEntry> LifetimeTable::user_topic(std::string_view user, std::string_view topic) const {
    const auto it = user_topics_.find({std::string(user), std::string(topic)});
    if (it == user_topics_.end()) return std::nullopt;
    return it->second;
}

ResolvedLifetime LifetimeTable::resolve(std::string_view user, std::string_view topic,
                                        LifetimeDefinition def) const {
    if (def == LifetimeDefinition::UserTopic) {
        if (const auto e = user_topic(user, topic)) return {e->seconds, Provenance::UserTopic};
    }
    if (def != LifetimeDefinition::Fixed) {
        if (const auto e = this->topic(topic)) return {e->seconds, Provenance::Topic};
    }
    return {params_.fixed_seconds, Provenance::Fixed};
}

void LifetimeTable::write(std::ostream& out) const {
    out << "# m\t" << format_double(params_.m) << '\n';
    out << "# min_clicks\t" << params_.min_clicks << '\n';
    out << "fixed\t*\t" << format_double(params_.fixed_seconds) << "\t0\n";
    for (const auto& [topic, e] : topics_) {
        out << "topic\t" << topic << '\t' << format_double(e.seconds) << '\t' << e.support << '\n';
    }
    for (const auto& [key, e] : user_topics_) {
        out << "usertopic\t" << key.first << '|' << key.second << '\t' << format_double(e.seconds) << '\t'
            << e.support << '\n';
    }
}

LifetimeTable LifetimeTable::read(std::istream& in, const std::string& source) {
    struct Row {
        std::string kind, key;
        double seconds;
        std::size_t support;
        std::size_t line;
    };
    LifetimeParams params;
    std::vector<Row> rows;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line(raw);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        std::vector<std::string_view> f;
        std::size_t start = 0;
        while (true) {
            const auto pos = line.find('\t', start);
            f.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
            if (pos == std::string_view::npos) break;
            start = pos + 1;
        }
        if (line.front() == '#') {
            if (f.size() == 2 && f[0] == "# m") params.m = parse_double(f[1], source, line_no);
            if (f.size() == 2 && f[0] == "# min_clicks") {
                params.min_clicks = static_cast<std::size_t>(parse_double(f[1], source, line_no));
            }
            continue;
        }
        if (f.size() != 4) throw ParseError(source, line_no, "expected 4 columns");
        const double support = parse_double(f[3], source, line_no);
        if (support < 0) throw ParseError(source, line_no, "negative support");
        rows.push_back({std::string(f[0]), std::string(f[1]), parse_double(f[2], source, line_no),
                        static_cast<std::size_t>(support), line_no});
    }
    for (const auto& r : rows) {
        if (r.kind == "fixed") params.fixed_seconds = r.seconds;
    }
    LifetimeTable table(params);
    for (const auto& r : rows) {
        try {
            if (r.kind == "fixed") continue;
            if (r.kind == "topic") {
                table.set_topic(r.key, {r.seconds, r.support});
            } else if (r.kind == "usertopic") {
                const auto bar = r.key.find('|');
                if (bar == std::string::npos) throw std::invalid_argument("usertopic key lacks '|'");
                table.set_user_topic(r.key.substr(0, bar), r.key.substr(bar + 1), {r.seconds, r.support});
            } else {
                throw std::invalid_argument("unknown kind '" + r.kind + "'");
            }
        } catch (const std::invalid_argument& e) {
            throw ParseError(source, r.line, e.what());
        }
    }
    return table;
}

bool LifetimeTable::operator==(const LifetimeTable& other) const {
    return params_.m == other.params_.m && params_.min_clicks == other.params_.min_clicks &&
           params_.fixed_seconds == other.params_.fixed_seconds && topics_ == other.topics_ &&
           user_topics_ == other.user_topics_;
}

double article_quantile_age(std::span<const double> sorted_ages, double m) {
    if (sorted_ages.empty()) throw std::invalid_argument("article_quantile_age: no clicks");
    if (!(m > 0.0 && m <= 100.0)) throw std::invalid_argument("article_quantile_age: m must be in (0, 100]");
    if (!std::is_sorted(sorted_ages.begin(), sorted_ages.end())) {
        throw std::invalid_argument("article_quantile_age: ages must be ascending");
    }
    const auto n = sorted_ages.size();
    // m * n / 100 keeps integer percentages exact before the ceiling.
    const double rank = std::ceil(m * static_cast<double>(n) / 100.0);
    const auto index = std::clamp<std::size_t>(static_cast<std::size_t>(rank), 1, n);
    return sorted_ages[index - 1];
}

std::optional<double> topic_lifetime(const ClickLog& log, int topic, double m) {
    std::map<int, std::vector<double>> per_article;
    for (const auto& c : log.clicks) {
        const auto& art = log.news[c.news];
        if (art.topic != topic || !art.publish_time) continue;
        per_article[c.news].push_back(c.age_at_click);
    }
    if (per_article.empty()) return std::nullopt;
    double sum = 0.0;
    for (auto& [news, ages] : per_article) {
        std::sort(ages.begin(), ages.end());
        sum += article_quantile_age(ages, m);
    }
    return sum / static_cast<double>(per_article.size());
}

std::optional<double> global_lifetime(const ClickLog& log, double m) {
    std::map<int, std::vector<double>> per_article;
    for (const auto& c : log.clicks) {
        if (log.news[c.news].publish_time) per_article[c.news].push_back(c.age_at_click);
    }
    if (per_article.empty()) return std::nullopt;
    double sum = 0.0;
    for (auto& [news, ages] : per_article) {
        std::sort(ages.begin(), ages.end());
        sum += article_quantile_age(ages, m);
    }
    return sum / static_cast<double>(per_article.size());
}

ResolvedLifetime user_topic_lifetime(const ClickLog& log, std::string_view user, int topic,
                                     const LifetimeParams& params) {
    std::vector<double> ages;
    for (const auto& c : log.clicks) {
        const auto& art = log.news[c.news];
        if (c.user_id == user && art.topic == topic && art.publish_time) ages.push_back(c.age_at_click);
    }
    if (!ages.empty() && ages.size() >= params.min_clicks) {
        std::sort(ages.begin(), ages.end());
        return {article_quantile_age(ages, params.m), Provenance::UserTopic};
    }
    if (const auto t = topic_lifetime(log, topic, params.m)) return {*t, Provenance::Topic};
    return {params.fixed_seconds, Provenance::Fixed};
}

LifetimeTable build_lifetime_table(const ClickLog& log, const LifetimeParams& params) {
    LifetimeTable table(params);

    // topic -> article -> ages, and (user, topic) -> ages
    std::map<int, std::map<int, std::vector<double>>> by_topic;
    std::map<std::pair<std::string, int>, std::vector<double>> by_user_topic;
    for (const auto& c : log.clicks) {
        const auto& art = log.news[c.news];
        if (!art.publish_time) continue;
        by_topic[art.topic][c.news].push_back(c.age_at_click);
        by_user_topic[{c.user_id, art.topic}].push_back(c.age_at_click);
    }

    for (auto& [topic, articles] : by_topic) {
        double sum = 0.0;
        std::size_t support = 0;
        for (auto& [news, ages] : articles) {
            std::sort(ages.begin(), ages.end());
            sum += article_quantile_age(ages, params.m);
            support += ages.size();
        }
        table.set_topic(log.vocab.topics.name(topic), {sum / static_cast<double>(articles.size()), support});
    }
    for (auto& [key, ages] : by_user_topic) {
        if (ages.size() < params.min_clicks) continue;
        std::sort(ages.begin(), ages.end());
        table.set_user_topic(key.first, log.vocab.topics.name(key.second),
                             {article_quantile_age(ages, params.m), ages.size()});
    }
    return table;
}

double click_coverage(const ClickLog& log, const LifetimeTable& table, LifetimeDefinition def) {
    if (log.clicks.empty()) throw std::invalid_argument("click_coverage: empty click log");
    std::size_t inside = 0;
    for (const auto& c : log.clicks) {
        const auto life = table.resolve(c.user_id, topic_name(log, c.news), def);
        if (c.age_at_click <= life.seconds) ++inside;
    }
    return static_cast<double>(inside) / static_cast<double>(log.clicks.size());
}

}  // namespace lime
