#pragma once
// Click-log corpus: MIND-style news/behaviors TSV parsing, vocabulary,
// publish-time derivation and train/dev/test splitting.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lime {

using Timestamp = std::int64_t;  // unix seconds

inline constexpr std::size_t kMaxTitleTokens = 30;
inline constexpr std::size_t kMaxHistory = 50;

// Thrown for malformed input files; carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// A string <-> index map with index 0 reserved for padding / unknown.
class Lexicon {
public:
    Lexicon();

    int add(std::string_view name);                  // returns existing or new index
    int find(std::string_view name) const;           // 0 when absent
    const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }
    std::size_t size() const { return names_.size(); }
    std::uint64_t count(int index) const { return counts_.at(static_cast<std::size_t>(index)); }

    bool operator==(const Lexicon& other) const { return names_ == other.names_; }

private:
    std::unordered_map<std::string, int> index_;
    std::vector<std::string> names_;
    std::vector<std::uint64_t> counts_;
};

struct Vocabulary {
    Lexicon tokens;
    Lexicon topics;
    Lexicon subtopics;

    bool operator==(const Vocabulary&) const = default;
};

enum class VocabMode { Extend, Frozen };

// Lowercases ASCII and splits on runs of ASCII non-alphanumerics. Bytes >= 0x80
// are kept as token characters so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

struct NewsArticle {
    std::string news_id;
    int topic = 0;
    int subtopic = 0;
    std::vector<int> title;                  // at most kMaxTitleTokens; padding implicit
    std::optional<Timestamp> publish_time;   // derived from impressions

    bool operator==(const NewsArticle&) const = default;
};

class NewsTable {
public:
    // Throws std::invalid_argument on duplicate id.
    int add(NewsArticle article);
    std::optional<int> find(std::string_view news_id) const;

    const NewsArticle& operator[](int i) const { return articles_[static_cast<std::size_t>(i)]; }
    NewsArticle& operator[](int i) { return articles_[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return articles_.size(); }
    const std::vector<NewsArticle>& articles() const { return articles_; }

    bool operator==(const NewsTable& other) const { return articles_ == other.articles_; }

private:
    std::vector<NewsArticle> articles_;
    std::unordered_map<std::string, int> index_;
};

struct Candidate {
    int news = 0;
    int label = 0;

    bool operator==(const Candidate&) const = default;
};

struct Impression {
    std::string impression_id;
    std::string user_id;
    Timestamp time = 0;
    std::vector<int> history;          // article indices, most recent last
    std::vector<Candidate> candidates;

    std::size_t positives() const;
    bool operator==(const Impression&) const = default;
};

struct ClickEvent {
    std::string user_id;
    int news = 0;
    Timestamp click_time = 0;
    double age_at_click = 0.0;         // seconds, filled by assign_click_ages

    bool operator==(const ClickEvent&) const = default;
};

struct BehaviorStats {
    std::size_t rows = 0;
    std::size_t skipped_empty = 0;         // rows whose candidate list resolved to nothing
    std::size_t dropped_candidates = 0;    // unresolvable candidate ids
    std::size_t dropped_history = 0;       // unresolvable or future history ids
};

struct BehaviorLog {
    std::vector<Impression> impressions;   // sorted by (time, impression_id)
    std::vector<ClickEvent> clicks;        // one per label-1 candidate
    BehaviorStats stats;
};

// news TSV: news_id \t topic \t subtopic \t title [\t ignored...]
NewsTable load_news(const std::filesystem::path& path, Vocabulary& vocab,
                    VocabMode mode = VocabMode::Extend);
NewsTable read_news(std::istream& in, Vocabulary& vocab, VocabMode mode = VocabMode::Extend,
                    const std::string& source = "<stream>");

// behaviors TSV: impression_id \t user_id \t unix_seconds \t history \t candidates
BehaviorLog load_behaviors(const std::filesystem::path& path, const NewsTable& news,
                           std::size_t max_history = kMaxHistory);
BehaviorLog read_behaviors(std::istream& in, const NewsTable& news,
                           std::size_t max_history = kMaxHistory,
                           const std::string& source = "<stream>");

// publish_time(n) = earliest impression time at which n appears as a candidate
// or in a history. Articles never seen keep an unset publish time.
void derive_publish_times(std::span<const Impression> impressions, NewsTable& news);

// Fills age_at_click from derived publish times. Throws std::logic_error if a
// clicked article has no publish time or a click precedes publication.
void assign_click_ages(std::span<ClickEvent> clicks, const NewsTable& news);

void write_news(std::ostream& out, const NewsTable& news, const Vocabulary& vocab);
void write_behaviors(std::ostream& out, std::span<const Impression> impressions,
                     const NewsTable& news);

struct SplitFractions {
    double train = 0.8;
    double dev = 0.1;
    double test = 0.1;
};

struct Split {
    std::vector<Impression> train;
    std::vector<Impression> dev;
    std::vector<Impression> test;
};

// Time-ordered split at the given quantiles of the (sorted) impression list.
// Throws std::invalid_argument unless the fractions are non-negative and sum to 1.
Split split_by_time(std::span<const Impression> impressions, const SplitFractions& fractions);

// Clicks whose impression belongs to `impressions` (label-1 candidates).
std::vector<ClickEvent> clicks_of(std::span<const Impression> impressions, const NewsTable& news);

// A fully loaded dataset directory: news.tsv plus behaviors files.
struct Dataset {
    Vocabulary vocab;
    NewsTable news;
    Split split;
    BehaviorStats stats;

    std::vector<ClickEvent> train_clicks() const { return clicks_of(split.train, news); }
};

// Reads <dir>/news.tsv and either <dir>/behaviors_{train,dev,test}.tsv
// (provided-files policy) or <dir>/behaviors.tsv split by time.
Dataset load_dataset(const std::filesystem::path& dir, const SplitFractions& fractions = {});

}  // namespace lime
