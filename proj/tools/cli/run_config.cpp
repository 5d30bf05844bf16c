#include "run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lime/netcore.hpp"

namespace lime::cli {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string num(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, ptr) : std::to_string(v);
}

double to_double(std::string_view s) {
    s = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw std::invalid_argument("expected a number, got '" + std::string(s) + "'");
    }
    return v;
}

std::uint64_t to_u64(std::string_view s) {
    s = trim(s);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw std::invalid_argument("expected a non-negative integer, got '" + std::string(s) + "'");
    }
    return v;
}

std::int64_t to_i64(std::string_view s) {
    s = trim(s);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw std::invalid_argument("expected an integer, got '" + std::string(s) + "'");
    }
    return v;
}

bool to_bool(std::string_view s) {
    s = trim(s);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw std::invalid_argument("expected true or false, got '" + std::string(s) + "'");
}

template <typename T, typename F>
std::vector<T> to_list(std::string_view s, F parse) {
    std::vector<T> out;
    s = trim(s);
    if (s.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(parse(s.substr(start, comma == std::string_view::npos ? comma : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <typename T, typename F>
std::string from_list(const std::vector<T>& v, F fmt) {
    std::string out;
    for (const auto& x : v) out += (out.empty() ? "" : ",") + fmt(x);
    return out;
}

std::vector<ConfigKey> make_keys() {
    std::vector<ConfigKey> k;
    auto real = [&k](std::string name, std::string help, auto field) {
        k.push_back({std::move(name), std::move(help),
                     [field](RunConfig& c, std::string_view v) { field(c) = to_double(v); },
                     [field](const RunConfig& c) { return num(field(const_cast<RunConfig&>(c))); }});
    };
    auto count = [&k](std::string name, std::string help, auto field) {
        k.push_back({std::move(name), std::move(help),
                     [field](RunConfig& c, std::string_view v) {
                         field(c) = static_cast<std::remove_reference_t<decltype(field(c))>>(to_u64(v));
                     },
                     [field](const RunConfig& c) { return std::to_string(field(const_cast<RunConfig&>(c))); }});
    };
    auto flag = [&k](std::string name, std::string help, auto field) {
        k.push_back({std::move(name), std::move(help),
                     [field](RunConfig& c, std::string_view v) { field(c) = to_bool(v); },
                     [field](const RunConfig& c) {
                         return std::string(field(const_cast<RunConfig&>(c)) ? "true" : "false");
                     }});
    };
    auto reals = [&k](std::string name, std::string help, auto field) {
        k.push_back({std::move(name), std::move(help),
                     [field](RunConfig& c, std::string_view v) { field(c) = to_list<double>(v, to_double); },
                     [field](const RunConfig& c) { return from_list(field(const_cast<RunConfig&>(c)), num); }});
    };

    // [data]
    k.push_back({"data.dir", "dataset directory (news.tsv + behaviors); empty generates from [synth]",
                 [](RunConfig& c, std::string_view v) { c.data_dir = std::string(trim(v)); },
                 [](const RunConfig& c) { return c.data_dir.string(); }});
    real("data.train_fraction", "time-split share of training impressions", [](RunConfig& c) -> double& { return c.split.train; });
    real("data.dev_fraction", "time-split share of validation impressions", [](RunConfig& c) -> double& { return c.split.dev; });
    real("data.test_fraction", "time-split share of test impressions", [](RunConfig& c) -> double& { return c.split.test; });

    // [synth]
    count("synth.seed", "generator seed", [](RunConfig& c) -> std::uint64_t& { return c.synth.seed; });
    count("synth.users", "number of users", [](RunConfig& c) -> std::size_t& { return c.synth.num_users; });
    count("synth.topics", "number of topics", [](RunConfig& c) -> std::size_t& { return c.synth.num_topics; });
    count("synth.subtopics_per_topic", "subtopics per topic", [](RunConfig& c) -> std::size_t& { return c.synth.subtopics_per_topic; });
    count("synth.news_per_topic", "articles per topic", [](RunConfig& c) -> std::size_t& { return c.synth.news_per_topic; });
    count("synth.vocab_size", "title vocabulary size", [](RunConfig& c) -> std::size_t& { return c.synth.vocab_size; });
    count("synth.title_length", "tokens per title", [](RunConfig& c) -> std::size_t& { return c.synth.title_length; });
    real("synth.topic_token_share", "chance a title token comes from the topic pool", [](RunConfig& c) -> double& { return c.synth.topic_token_share; });
    reals("synth.topic_lifetimes", "comma-separated base lifetimes in seconds, one per topic; empty for log-spaced", [](RunConfig& c) -> std::vector<double>& { return c.synth.topic_lifetimes; });
    real("synth.min_topic_lifetime", "smallest log-spaced base lifetime (seconds)", [](RunConfig& c) -> double& { return c.synth.min_topic_lifetime; });
    real("synth.max_topic_lifetime", "largest log-spaced base lifetime (seconds)", [](RunConfig& c) -> double& { return c.synth.max_topic_lifetime; });
    reals("synth.multiplier_groups", "comma-separated user multipliers assigned round-robin; empty for log-normal", [](RunConfig& c) -> std::vector<double>& { return c.synth.multiplier_groups; });
    real("synth.multiplier_sigma", "log-normal sigma of user multipliers", [](RunConfig& c) -> double& { return c.synth.multiplier_sigma; });
    real("synth.multiplier_clamp", "multipliers clamped to [1/clamp, clamp]", [](RunConfig& c) -> double& { return c.synth.multiplier_clamp; });
    count("synth.topics_per_user", "topics each user clicks", [](RunConfig& c) -> std::size_t& { return c.synth.topics_per_user; });
    count("synth.clicks_per_user", "clicks per user", [](RunConfig& c) -> std::size_t& { return c.synth.clicks_per_user; });
    count("synth.impression_size", "candidates per click impression", [](RunConfig& c) -> std::size_t& { return c.synth.impression_size; });
    k.push_back({"synth.negatives", "negative policy: lifetime, matched or separable",
                 [](RunConfig& c, std::string_view v) { c.synth.negatives = parse_negative_policy(trim(v)); },
                 [](const RunConfig& c) { return std::string(to_string(c.synth.negatives)); }});
    real("synth.expired_fraction", "share of lifetime-policy negatives that are expired", [](RunConfig& c) -> double& { return c.synth.expired_fraction; });
    count("synth.max_history", "history length cap", [](RunConfig& c) -> std::size_t& { return c.synth.max_history; });
    real("synth.horizon", "click window length (seconds)", [](RunConfig& c) -> double& { return c.synth.horizon; });
    k.push_back({"synth.start_time", "unix time the click window opens",
                 [](RunConfig& c, std::string_view v) { c.synth.start_time = to_i64(v); },
                 [](const RunConfig& c) { return std::to_string(c.synth.start_time); }});
    real("synth.cap_ratio", "click ages truncated at cap_ratio times the lifetime", [](RunConfig& c) -> double& { return c.synth.cap_ratio; });
    flag("synth.publication_impressions", "emit one impression per article at its publish time", [](RunConfig& c) -> bool& { return c.synth.publication_impressions; });

    // [buckets] and [freshness]
    count("buckets.count", "number of age buckets B", [](RunConfig& c) -> std::size_t& { return c.experiment.model.buckets.buckets; });
    real("buckets.tau", "seconds covered before clamping", [](RunConfig& c) -> double& { return c.experiment.model.buckets.tau; });
    real("freshness.alpha", "sigmoid slope", [](RunConfig& c) -> double& { return c.experiment.model.freshness.alpha; });
    real("freshness.beta", "expired-candidate multiplier", [](RunConfig& c) -> double& { return c.experiment.model.freshness.beta; });
    real("freshness.unit", "seconds per freshness unit", [](RunConfig& c) -> double& { return c.experiment.model.freshness.unit; });

    // [model]
    k.push_back({"model.flags", "strategies: base or a '+' list of S1, S2, S3",
                 [](RunConfig& c, std::string_view v) { c.experiment.model.flags = StrategyFlags::parse(trim(v)); },
                 [](const RunConfig& c) { return c.experiment.model.flags.label(); }});
    flag("model.train_with_freshness", "apply the freshness weight to training scores", [](RunConfig& c) -> bool& { return c.experiment.model.train_with_freshness; });
    count("model.word_dim", "word embedding size", [](RunConfig& c) -> std::size_t& { return c.experiment.model.dims.word; });
    count("model.content_dim", "content vector size", [](RunConfig& c) -> std::size_t& { return c.experiment.model.dims.content; });
    count("model.bucket_dim", "age and lifetime bucket embedding size", [](RunConfig& c) -> std::size_t& { return c.experiment.model.dims.bucket; });
    count("model.age_dim", "age vector size", [](RunConfig& c) -> std::size_t& { return c.experiment.model.dims.age; });
    count("model.category_dim", "topic and subtopic embedding size", [](RunConfig& c) -> std::size_t& { return c.experiment.model.dims.category; });
    count("model.topic_dim", "topic vector size", [](RunConfig& c) -> std::size_t& { return c.experiment.model.dims.topic; });
    count("model.query_dim", "user attention hidden size", [](RunConfig& c) -> std::size_t& { return c.experiment.model.dims.query; });

    // [lifetime]
    k.push_back({"lifetime.definition", "fixed, topic or user-topic",
                 [](RunConfig& c, std::string_view v) { c.experiment.definition = parse_lifetime_definition(trim(v)); },
                 [](const RunConfig& c) { return std::string(to_string(c.experiment.definition)); }});
    real("lifetime.m", "click percentile defining a lifetime", [](RunConfig& c) -> double& { return c.experiment.lifetime.m; });
    count("lifetime.k", "clicks needed for a user-topic estimate", [](RunConfig& c) -> std::size_t& { return c.experiment.lifetime.min_clicks; });
    real("lifetime.fixed", "fixed lifetime (seconds)", [](RunConfig& c) -> double& { return c.experiment.lifetime.fixed_seconds; });

    // [train]
    real("train.lr", "Adam learning rate", [](RunConfig& c) -> double& { return c.experiment.train.lr; });
    count("train.batch_size", "examples per update", [](RunConfig& c) -> std::size_t& { return c.experiment.train.batch_size; });
    count("train.max_epochs", "epoch limit", [](RunConfig& c) -> std::size_t& { return c.experiment.train.max_epochs; });
    count("train.patience", "epochs without dev improvement before stopping", [](RunConfig& c) -> std::size_t& { return c.experiment.train.patience; });
    count("train.negatives", "negatives per positive (M)", [](RunConfig& c) -> std::size_t& { return c.experiment.train.negatives; });
    flag("train.strict_sampling", "skip positives with fewer than M negatives", [](RunConfig& c) -> bool& { return c.experiment.train.strict_sampling; });

    // [run]
    k.push_back({"run.seeds", "comma-separated training seeds",
                 [](RunConfig& c, std::string_view v) { c.experiment.seeds = to_list<std::uint64_t>(v, to_u64); },
                 [](const RunConfig& c) {
                     return from_list(c.experiment.seeds, [](std::uint64_t s) { return std::to_string(s); });
                 }});
    count("run.threads", "evaluation threads", [](RunConfig& c) -> std::size_t& { return c.experiment.threads; });
    k.push_back({"run.out", "output directory",
                 [](RunConfig& c, std::string_view v) { c.out = std::string(trim(v)); },
                 [](const RunConfig& c) { return c.out.string(); }});
    return k;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = make_keys();
    return keys;
}

void set_key(RunConfig& cfg, std::string_view name, std::string_view value) {
    for (const auto& k : config_keys()) {
        if (k.name != name) continue;
        try {
            k.set(cfg, value);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string(name) + ": " + e.what());
        }
        return;
    }
    std::string valid;
    for (const auto& k : config_keys()) valid += "\n  " + k.name;
    throw std::invalid_argument("unknown config key '" + std::string(name) + "'; valid keys:" + valid);
}

void apply_text(RunConfig& cfg, std::string_view text, const std::string& source) {
    std::string section;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto nl = text.find('\n', start);
        auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto where = source + ":" + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw std::invalid_argument(where + "unterminated section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw std::invalid_argument(where + "expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        const auto full = section.empty() ? std::string(key) : section + "." + std::string(key);
        try {
            set_key(cfg, full, line.substr(eq + 1));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(where + e.what());
        }
    }
}

void apply_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing input: cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    apply_text(cfg, ss.str(), path.string());
}

void RunConfig::validate() const {
    auto fail = [](const std::string& key, const std::string& why) {
        throw std::invalid_argument("invalid config: " + key + ": " + why);
    };
    const double total = split.train + split.dev + split.test;
    if (split.train < 0 || split.dev < 0 || split.test < 0 || std::abs(total - 1.0) > 1e-9) {
        fail("data.*_fraction", "fractions must be non-negative and sum to 1");
    }
    if (data_dir.empty()) {
        try {
            synth.validate();
        } catch (const std::invalid_argument& e) {
            fail("synth", e.what());
        }
    }
    try {
        experiment.model.validate();
        experiment.model.freshness.validate(true);
        experiment.lifetime.validate();
    } catch (const std::invalid_argument& e) {
        fail("model", e.what());
    }
    const auto& t = experiment.train;
    if (!(t.lr >= 0.0)) fail("train.lr", "must be >= 0");
    if (t.batch_size == 0) fail("train.batch_size", "must be >= 1");
    if (t.max_epochs == 0) fail("train.max_epochs", "must be >= 1");
    if (t.negatives == 0) fail("train.negatives", "must be >= 1");
    if (experiment.seeds.empty()) fail("run.seeds", "at least one seed is required");
    if (experiment.threads == 0) fail("run.threads", "must be >= 1");
    if (out.empty()) fail("run.out", "an output directory is required");
}

std::string RunConfig::to_text(bool results_only) const {
    std::string out;
    std::string section;
    for (const auto& k : config_keys()) {
        if (results_only && (k.name == "run.out" || k.name == "run.threads")) continue;
        const auto dot = k.name.find('.');
        const auto sec = k.name.substr(0, dot);
        if (sec != section) {
            out += (out.empty() ? "[" : "\n[") + sec + "]\n";
            section = sec;
        }
        out += k.name.substr(dot + 1) + " = " + k.get(*this) + "\n";
    }
    return out;
}

std::string RunConfig::hash() const { return net::hex64(net::fnv1a(to_text(true))); }

}  // namespace lime::cli
