#include "lime/corpus.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace lime {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::vector<std::string_view> split_spaces(std::string_view field) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < field.size()) {
        while (i < field.size() && field[i] == ' ') ++i;
        std::size_t j = i;
        while (j < field.size() && field[j] != ' ') ++j;
        if (j > i) out.push_back(field.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string_view strip_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

bool is_token_char(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

// Accepts unix seconds or MIND's "M/D/YYYY h:mm:ss AM|PM" (read as UTC).
std::optional<Timestamp> parse_time(std::string_view s) {
    Timestamp t = 0;
    if (parse_number(s, t)) return t;

    const auto space = s.find(' ');
    if (space == std::string_view::npos) return std::nullopt;
    const auto date = s.substr(0, space);
    auto rest = s.substr(space + 1);
    const auto s1 = date.find('/');
    const auto s2 = date.find('/', s1 == std::string_view::npos ? 0 : s1 + 1);
    if (s1 == std::string_view::npos || s2 == std::string_view::npos) return std::nullopt;
    unsigned month = 0, day = 0;
    std::int64_t year = 0;
    if (!parse_number(date.substr(0, s1), month) ||
        !parse_number(date.substr(s1 + 1, s2 - s1 - 1), day) ||
        !parse_number(date.substr(s2 + 1), year)) {
        return std::nullopt;
    }
    const auto ampm_pos = rest.find(' ');
    std::string_view ampm;
    if (ampm_pos != std::string_view::npos) {
        ampm = rest.substr(ampm_pos + 1);
        rest = rest.substr(0, ampm_pos);
    }
    const auto c1 = rest.find(':');
    const auto c2 = rest.find(':', c1 == std::string_view::npos ? 0 : c1 + 1);
    if (c1 == std::string_view::npos || c2 == std::string_view::npos) return std::nullopt;
    unsigned hh = 0, mm = 0, ss = 0;
    if (!parse_number(rest.substr(0, c1), hh) || !parse_number(rest.substr(c1 + 1, c2 - c1 - 1), mm) ||
        !parse_number(rest.substr(c2 + 1), ss)) {
        return std::nullopt;
    }
    if (ampm == "PM" && hh < 12) hh += 12;
    if (ampm == "AM" && hh == 12) hh = 0;
    if (month < 1 || month > 12 || day < 1 || day > 31 || hh > 23 || mm > 59 || ss > 60) {
        return std::nullopt;
    }
    return days_from_civil(year, month, day) * 86400 + hh * 3600 + mm * 60 + ss;
}

bool valid_user_id(std::string_view id) {
    if (id.empty()) return false;
    return std::none_of(id.begin(), id.end(), [](unsigned char c) { return c <= ' ' || c == 0x7f; });
}

}  // namespace

ParseError::ParseError(const std::string& file, std::size_t line, const std::string& what)
    : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

Lexicon::Lexicon() : names_{"<pad>"}, counts_{0} {}

int Lexicon::add(std::string_view name) {
    const auto it = index_.find(std::string(name));
    if (it != index_.end()) {
        ++counts_[static_cast<std::size_t>(it->second)];
        return it->second;
    }
    const int id = static_cast<int>(names_.size());
    names_.emplace_back(name);
    counts_.push_back(1);
    index_.emplace(std::string(name), id);
    return id;
}

int Lexicon::find(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    return it == index_.end() ? 0 : it->second;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_token_char(c)) {
            current.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch);
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

int NewsTable::add(NewsArticle article) {
    if (index_.contains(article.news_id)) {
        throw std::invalid_argument("duplicate news id: " + article.news_id);
    }
    const int id = static_cast<int>(articles_.size());
    index_.emplace(article.news_id, id);
    articles_.push_back(std::move(article));
    return id;
}

std::optional<int> NewsTable::find(std::string_view news_id) const {
    const auto it = index_.find(std::string(news_id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t Impression::positives() const {
    return static_cast<std::size_t>(
        std::count_if(candidates.begin(), candidates.end(), [](const Candidate& c) { return c.label == 1; }));
}

NewsTable read_news(std::istream& in, Vocabulary& vocab, VocabMode mode, const std::string& source) {
    NewsTable table;
    std::string raw;
    std::size_t line_no = 0;
    auto intern = [mode](Lexicon& lex, std::string_view name) {
        return mode == VocabMode::Extend ? lex.add(name) : lex.find(name);
    };
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = strip_cr(raw);
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        if (fields.size() < 4) {
            throw ParseError(source, line_no,
                             "expected 4 tab-separated columns, found " + std::to_string(fields.size()));
        }
        if (fields[0].empty()) throw ParseError(source, line_no, "empty news id");

        NewsArticle article;
        article.news_id = std::string(fields[0]);
        article.topic = intern(vocab.topics, fields[1]);
        article.subtopic = intern(vocab.subtopics, fields[2]);
        for (const auto& tok : tokenize(fields[3])) {
            if (article.title.size() == kMaxTitleTokens) break;
            article.title.push_back(intern(vocab.tokens, tok));
        }
        try {
            table.add(std::move(article));
        } catch (const std::invalid_argument& e) {
            throw ParseError(source, line_no, e.what());
        }
    }
    return table;
}

NewsTable load_news(const std::filesystem::path& path, Vocabulary& vocab, VocabMode mode) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open news file: " + path.string());
    return read_news(in, vocab, mode, path.string());
}

BehaviorLog read_behaviors(std::istream& in, const NewsTable& news, std::size_t max_history,
                           const std::string& source) {
    BehaviorLog log;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto line = strip_cr(raw);
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        if (fields.size() < 5) {
            throw ParseError(source, line_no,
                             "expected 5 tab-separated columns, found " + std::to_string(fields.size()));
        }
        ++log.stats.rows;
        if (!valid_user_id(fields[1])) {
            throw ParseError(source, line_no, "invalid user id '" + std::string(fields[1]) + "'");
        }
        const auto time = parse_time(fields[2]);
        if (!time) throw ParseError(source, line_no, "invalid timestamp '" + std::string(fields[2]) + "'");

        Impression imp;
        imp.impression_id = std::string(fields[0]);
        imp.user_id = std::string(fields[1]);
        imp.time = *time;
        for (const auto id : split_spaces(fields[3])) {
            if (const auto idx = news.find(id)) {
                imp.history.push_back(*idx);
            } else {
                ++log.stats.dropped_history;
            }
        }
        if (imp.history.size() > max_history) {
            imp.history.erase(imp.history.begin(),
                              imp.history.end() - static_cast<std::ptrdiff_t>(max_history));
        }
        for (const auto cand : split_spaces(fields[4])) {
            const auto dash = cand.rfind('-');
            if (dash == std::string_view::npos || dash + 2 != cand.size() ||
                (cand[dash + 1] != '0' && cand[dash + 1] != '1')) {
                throw ParseError(source, line_no, "malformed candidate '" + std::string(cand) + "'");
            }
            const auto idx = news.find(cand.substr(0, dash));
            if (!idx) {
                ++log.stats.dropped_candidates;
                continue;
            }
            imp.candidates.push_back({*idx, cand[dash + 1] - '0'});
        }
        if (imp.candidates.empty()) {
            ++log.stats.skipped_empty;
            continue;
        }
        log.impressions.push_back(std::move(imp));
    }

    std::stable_sort(log.impressions.begin(), log.impressions.end(),
                     [](const Impression& a, const Impression& b) {
                         return a.time != b.time ? a.time < b.time : a.impression_id < b.impression_id;
                     });
    log.clicks = clicks_of(log.impressions, news);
    return log;
}

BehaviorLog load_behaviors(const std::filesystem::path& path, const NewsTable& news,
                           std::size_t max_history) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open behaviors file: " + path.string());
    return read_behaviors(in, news, max_history, path.string());
}

std::vector<ClickEvent> clicks_of(std::span<const Impression> impressions, const NewsTable& news) {
    std::vector<ClickEvent> clicks;
    for (const auto& imp : impressions) {
        for (const auto& c : imp.candidates) {
            if (c.label != 1) continue;
            ClickEvent ev{imp.user_id, c.news, imp.time, 0.0};
            if (const auto& pub = news[c.news].publish_time) {
                ev.age_at_click = static_cast<double>(imp.time - *pub);
            }
            clicks.push_back(std::move(ev));
        }
    }
    return clicks;
}

void derive_publish_times(std::span<const Impression> impressions, NewsTable& news) {
    std::vector<std::optional<Timestamp>> first(news.size());
    auto seen = [&first](int n, Timestamp t) {
        auto& slot = first[static_cast<std::size_t>(n)];
        if (!slot || t < *slot) slot = t;
    };
    for (const auto& imp : impressions) {
        for (const auto& c : imp.candidates) seen(c.news, imp.time);
        for (const int h : imp.history) seen(h, imp.time);
    }
    for (std::size_t i = 0; i < news.size(); ++i) {
        news[static_cast<int>(i)].publish_time = first[i];
    }
}

void assign_click_ages(std::span<ClickEvent> clicks, const NewsTable& news) {
    for (auto& c : clicks) {
        const auto& pub = news[c.news].publish_time;
        if (!pub) throw std::logic_error("clicked article " + news[c.news].news_id + " has no publish time");
        if (c.click_time < *pub) {
            throw std::logic_error("click on " + news[c.news].news_id + " precedes its publish time");
        }
        c.age_at_click = static_cast<double>(c.click_time - *pub);
    }
}

void write_news(std::ostream& out, const NewsTable& news, const Vocabulary& vocab) {
    for (const auto& a : news.articles()) {
        out << a.news_id << '\t' << vocab.topics.name(a.topic) << '\t' << vocab.subtopics.name(a.subtopic)
            << '\t';
        for (std::size_t i = 0; i < a.title.size(); ++i) {
            if (i) out << ' ';
            out << vocab.tokens.name(a.title[i]);
        }
        out << '\n';
    }
}

void write_behaviors(std::ostream& out, std::span<const Impression> impressions, const NewsTable& news) {
    for (const auto& imp : impressions) {
        out << imp.impression_id << '\t' << imp.user_id << '\t' << imp.time << '\t';
        for (std::size_t i = 0; i < imp.history.size(); ++i) {
            if (i) out << ' ';
            out << news[imp.history[i]].news_id;
        }
        out << '\t';
        for (std::size_t i = 0; i < imp.candidates.size(); ++i) {
            if (i) out << ' ';
            out << news[imp.candidates[i].news].news_id << '-' << imp.candidates[i].label;
        }
        out << '\n';
    }
}

Split split_by_time(std::span<const Impression> impressions, const SplitFractions& f) {
    if (f.train < 0 || f.dev < 0 || f.test < 0 || std::abs(f.train + f.dev + f.test - 1.0) > 1e-9) {
        throw std::invalid_argument("split fractions must be non-negative and sum to 1");
    }
    const auto n = impressions.size();
    const auto n_train = static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n)));
    const auto n_dev = std::min(n - std::min(n, n_train),
                                static_cast<std::size_t>(std::llround(f.dev * static_cast<double>(n))));
    Split s;
    const auto b = impressions.begin();
    const auto e1 = b + static_cast<std::ptrdiff_t>(std::min(n, n_train));
    const auto e2 = e1 + static_cast<std::ptrdiff_t>(n_dev);
    s.train.assign(b, e1);
    s.dev.assign(e1, e2);
    s.test.assign(e2, impressions.end());
    return s;
}

Dataset load_dataset(const std::filesystem::path& dir, const SplitFractions& fractions) {
    Dataset ds;
    const auto news_path = dir / "news.tsv";
    if (!std::filesystem::exists(news_path)) {
        throw std::runtime_error("missing input: " + news_path.string());
    }
    ds.news = load_news(news_path, ds.vocab);

    auto accumulate = [&ds](const BehaviorStats& s) {
        ds.stats.rows += s.rows;
        ds.stats.skipped_empty += s.skipped_empty;
        ds.stats.dropped_candidates += s.dropped_candidates;
        ds.stats.dropped_history += s.dropped_history;
    };

    const auto single = dir / "behaviors.tsv";
    if (std::filesystem::exists(single)) {
        auto log = load_behaviors(single, ds.news);
        accumulate(log.stats);
        ds.split = split_by_time(log.impressions, fractions);
    } else {
        const std::array<std::pair<const char*, std::vector<Impression>*>, 3> parts{{
            {"behaviors_train.tsv", &ds.split.train},
            {"behaviors_dev.tsv", &ds.split.dev},
            {"behaviors_test.tsv", &ds.split.test},
        }};
        bool any = false;
        for (const auto& [name, target] : parts) {
            const auto p = dir / name;
            if (!std::filesystem::exists(p)) continue;
            any = true;
            auto log = load_behaviors(p, ds.news);
            accumulate(log.stats);
            *target = std::move(log.impressions);
        }
        if (!any) throw std::runtime_error("missing input: " + single.string());
    }

    std::vector<Impression> all;
    for (const auto* part : {&ds.split.train, &ds.split.dev, &ds.split.test}) {
        all.insert(all.end(), part->begin(), part->end());
    }
    derive_publish_times(all, ds.news);
    return ds;
}

}  // namespace lime
