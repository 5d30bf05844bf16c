#include "lime/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "lime/netcore.hpp"

namespace lime {

std::string_view to_string(NegativePolicy p) {
    switch (p) {
        case NegativePolicy::Lifetime: return "lifetime";
        case NegativePolicy::Matched: return "matched";
        case NegativePolicy::Separable: return "separable";
    }
    return "?";
}

NegativePolicy parse_negative_policy(std::string_view name) {
    if (name == "lifetime") return NegativePolicy::Lifetime;
    if (name == "matched") return NegativePolicy::Matched;
    if (name == "separable") return NegativePolicy::Separable;
    throw std::invalid_argument("unknown negatives policy '" + std::string(name) +
                                "' (expected lifetime, matched or separable)");
}

void GeneratorSpec::validate() const {
    auto positive = [](std::size_t v, const char* what) {
        if (v < 1) throw std::invalid_argument(std::string("generator: ") + what + " must be >= 1");
    };
    positive(num_users, "num_users");
    positive(num_topics, "num_topics");
    positive(subtopics_per_topic, "subtopics_per_topic");
    positive(news_per_topic, "news_per_topic");
    positive(title_length, "title_length");
    positive(clicks_per_user, "clicks_per_user");
    positive(impression_size, "impression_size");
    if (vocab_size < num_topics + 1) throw std::invalid_argument("generator: vocab_size must exceed num_topics");
    if (!(topic_token_share >= 0.0 && topic_token_share <= 1.0)) {
        throw std::invalid_argument("generator: topic_token_share must be in [0, 1]");
    }
    if (!topic_lifetimes.empty() && topic_lifetimes.size() != num_topics) {
        throw std::invalid_argument("generator: topic_lifetimes has " + std::to_string(topic_lifetimes.size()) +
                                    " entries for " + std::to_string(num_topics) + " topics");
    }
    for (const double l : topic_lifetimes) {
        if (!(l > 0.0)) throw std::invalid_argument("generator: base lifetimes must be > 0");
    }
    if (topic_lifetimes.empty() && !(min_topic_lifetime > 0.0 && max_topic_lifetime >= min_topic_lifetime)) {
        throw std::invalid_argument("generator: need 0 < min_topic_lifetime <= max_topic_lifetime");
    }
    for (const double g : multiplier_groups) {
        if (!(g > 0.0)) throw std::invalid_argument("generator: multipliers must be > 0");
    }
    if (!(multiplier_sigma >= 0.0) || !(multiplier_clamp >= 1.0)) {
        throw std::invalid_argument("generator: need multiplier_sigma >= 0 and multiplier_clamp >= 1");
    }
    if (!affinity.empty()) {
        if (affinity.size() != num_users) throw std::invalid_argument("generator: affinity needs one row per user");
        for (std::size_t u = 0; u < affinity.size(); ++u) {
            const auto& row = affinity[u];
            if (row.size() != num_topics) throw std::invalid_argument("generator: affinity row width != num_topics");
            double sum = 0.0;
            for (const double a : row) {
                if (a < 0.0) throw std::invalid_argument("generator: negative affinity");
                sum += a;
            }
            if (std::abs(sum - 1.0) > 1e-9) {
                throw std::invalid_argument("generator: affinity row " + std::to_string(u) + " sums to " +
                                            std::to_string(sum));
            }
        }
    } else if (topics_per_user < 1 || topics_per_user > num_topics) {
        throw std::invalid_argument("generator: topics_per_user must be in [1, num_topics]");
    }
    if (negatives == NegativePolicy::Separable) {
        const bool one_hot = affinity.empty() ? topics_per_user < num_topics : true;
        if (!one_hot || num_topics < 2) {
            throw std::invalid_argument("generator: separable negatives need topics the user never clicks");
        }
    }
    if (!(expired_fraction >= 0.0 && expired_fraction <= 1.0)) {
        throw std::invalid_argument("generator: expired_fraction must be in [0, 1]");
    }
    if (!(cap_ratio > 1.0 / 0.9)) throw std::invalid_argument("generator: cap_ratio must exceed 1/0.9");

    if (!(horizon > 0.0)) throw std::invalid_argument("generator: horizon must be > 0");
}

double SyntheticLog::planted(std::size_t user, int topic) const {
    return topic_lifetimes.at(static_cast<std::size_t>(topic)) * user_multipliers.at(user);
}

double truncated_exp_rate(double lifetime, double cap, double q) {
    if (!(lifetime > 0.0) || !(cap * q > lifetime)) {
        throw std::invalid_argument("truncated_exp_rate: need 0 < lifetime < q * cap");
    }
    // F(L) = (1 - e^{-kL}) / (1 - e^{-kc}) increases from L/c to 1 in k.
    auto cdf_at_l = [&](double k) { return -std::expm1(-k * lifetime) / -std::expm1(-k * cap); };
    double lo = 1e-12 / lifetime, hi = 1.0 / lifetime;
    while (cdf_at_l(hi) < q) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = std::sqrt(lo * hi);
        (cdf_at_l(mid) < q ? lo : hi) = mid;
    }
    return std::sqrt(lo * hi);
}

double truncated_exp_quantile(double u, double rate, double cap) {
    return -std::log1p(u * std::expm1(-rate * cap)) / rate;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(net::uniform01(rng) * static_cast<double>(n)));
}

std::string padded(char prefix, std::size_t i, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
    return buf;
}

// Largest-remainder allocation of `total` over `weights`.
std::vector<std::size_t> allocate(std::size_t total, const std::vector<double>& weights) {
    std::vector<std::size_t> out(weights.size());
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t used = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = weights[i] * static_cast<double>(total);
        out[i] = static_cast<std::size_t>(std::floor(exact));
        used += out[i];
        rem.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; used < total && i < rem.size(); ++i, ++used) ++out[rem[i].second];
    return out;
}

struct TopicArticles {
    std::vector<int> ids;               // sorted by publish time
    std::vector<Timestamp> published;
};

// Article of `t` published closest to `target`, restricted to [lo, hi]. -1 when none.
int nearest(const TopicArticles& t, Timestamp target, Timestamp lo, Timestamp hi) {
    const auto first = std::lower_bound(t.published.begin(), t.published.end(), lo);
    const auto last = std::upper_bound(t.published.begin(), t.published.end(), hi);
    if (first >= last) return -1;
    auto it = std::lower_bound(first, last, target);
    if (it == last || (it != first && target - *(it - 1) <= *it - target)) --it;
    return t.ids[static_cast<std::size_t>(it - t.published.begin())];
}

constexpr Timestamp kEarliest = std::numeric_limits<Timestamp>::min();

struct ClickDraw {
    Timestamp time;
    int news;
    int topic;
};

}  // namespace

SyntheticLog generate(const GeneratorSpec& spec) {
    spec.validate();
    SyntheticLog log;
    std::mt19937_64 rng(splitmix(spec.seed));
    const std::size_t T = spec.num_topics;

    // Topics, subtopics and their lifetimes.
    log.topic_lifetimes.assign(T + 1, 0.0);
    std::vector<int> topic_ids(T), sub_base(T);
    for (std::size_t t = 0; t < T; ++t) {
        const auto name = "topic" + std::to_string(t);
        topic_ids[t] = log.vocab.topics.add(name);
        for (std::size_t s = 0; s < spec.subtopics_per_topic; ++s) {
            const int id = log.vocab.subtopics.add(name + "-sub" + std::to_string(s));
            if (s == 0) sub_base[t] = id;
        }
        double base = 0.0;
        if (!spec.topic_lifetimes.empty()) {
            base = spec.topic_lifetimes[t];
        } else if (T == 1) {
            base = spec.min_topic_lifetime;
        } else {
            const double f = static_cast<double>(t) / static_cast<double>(T - 1);
            base = spec.min_topic_lifetime * std::pow(spec.max_topic_lifetime / spec.min_topic_lifetime, f);
        }
        log.topic_lifetimes[static_cast<std::size_t>(topic_ids[t])] = base;
    }

    // Token pools: one per topic, remainder shared.
    std::vector<int> token_ids(spec.vocab_size);
    for (std::size_t i = 0; i < spec.vocab_size; ++i) token_ids[i] = log.vocab.tokens.add(padded('w', i, 4));
    const std::size_t per_topic = std::max<std::size_t>(1, spec.vocab_size * 6 / 10 / T);
    const std::size_t shared_begin = per_topic * T;

    // Users: multipliers and affinities.
    std::vector<std::vector<double>> affinity = spec.affinity;
    for (std::size_t u = 0; u < spec.num_users; ++u) {
        log.users.push_back(padded('U', u, 4));
        double mult = 1.0;
        if (!spec.multiplier_groups.empty()) {
            mult = spec.multiplier_groups[u % spec.multiplier_groups.size()];
        } else if (spec.multiplier_sigma > 0.0) {
            std::normal_distribution<double> normal(0.0, spec.multiplier_sigma);
            mult = std::clamp(std::exp(normal(rng)), 1.0 / spec.multiplier_clamp, spec.multiplier_clamp);
        }
        log.user_multipliers.push_back(mult);
        if (spec.affinity.empty()) {
            std::vector<std::size_t> order(T);
            std::iota(order.begin(), order.end(), std::size_t{0});
            for (std::size_t k = 0; k < spec.topics_per_user; ++k) std::swap(order[k], order[k + pick(rng, T - k)]);
            std::vector<double> row(T, 0.0);
            double sum = 0.0;
            for (std::size_t k = 0; k < spec.topics_per_user; ++k) {
                const double w = 0.5 + net::uniform01(rng);
                row[order[k]] = w;
                sum += w;
            }
            for (auto& w : row) w /= sum;
            affinity.push_back(std::move(row));
        }
    }

    auto planted = [&](std::size_t u, std::size_t t) {
        return log.topic_lifetimes[static_cast<std::size_t>(topic_ids[t])] * log.user_multipliers[u];
    };
    for (std::size_t u = 0; u < spec.num_users; ++u) {
        for (std::size_t t = 0; t < T; ++t) {
            if (planted(u, t) > spec.horizon) {
                throw std::invalid_argument("generator: infeasible spec, planted lifetime " +
                                            std::to_string(planted(u, t)) + " s exceeds the horizon " +
                                            std::to_string(spec.horizon) + " s");
            }
        }
    }

    // Articles. Publishing starts `lead` before the click window so that click
    // ages are not truncated at the window's start: every click time in
    // [start, start + horizon) can pair with any age up to the cap.
    double max_planted = 0.0;
    for (std::size_t u = 0; u < spec.num_users; ++u) {
        for (std::size_t t = 0; t < T; ++t) max_planted = std::max(max_planted, planted(u, t));
    }
    const double lead = spec.cap_ratio * max_planted;
    const double span = lead + spec.horizon;
    std::vector<TopicArticles> by_topic(T);
    std::vector<std::pair<Timestamp, NewsArticle>> articles;
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < spec.news_per_topic; ++j) {
            NewsArticle a;
            a.topic = topic_ids[t];
            a.subtopic = sub_base[t] + static_cast<int>(pick(rng, spec.subtopics_per_topic));
            for (std::size_t k = 0; k < spec.title_length; ++k) {
                const bool own = net::uniform01(rng) < spec.topic_token_share || shared_begin >= spec.vocab_size;
                const std::size_t tok = own ? t * per_topic + pick(rng, per_topic)
                                            : shared_begin + pick(rng, spec.vocab_size - shared_begin);
                a.title.push_back(token_ids[tok]);
            }
            const auto pub = spec.start_time + static_cast<Timestamp>(net::uniform01(rng) * span - lead);
            a.publish_time = pub;
            articles.emplace_back(pub, std::move(a));
        }
    }
    std::stable_sort(articles.begin(), articles.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < articles.size(); ++i) {
        auto& a = articles[i].second;
        a.news_id = padded('N', i, 6);
        const auto t = static_cast<std::size_t>(a.topic - topic_ids[0]);
        const int id = log.news.add(a);
        by_topic[t].ids.push_back(id);
        by_topic[t].published.push_back(articles[i].first);
    }


    LifetimeParams truth_params;
    truth_params.min_clicks = 1;
    log.truth = LifetimeTable(truth_params);
    std::vector<std::size_t> topic_support(T, 0);
    double lifetime_sum = 0.0;
    std::size_t click_total = 0;

    std::vector<Impression> impressions;
    std::size_t next_id = 0;
    const std::size_t negatives = spec.impression_size - 1;

    for (std::size_t u = 0; u < spec.num_users; ++u) {
        std::mt19937_64 urng(splitmix(spec.seed ^ splitmix(u + 1)));
        const auto counts = allocate(spec.clicks_per_user, affinity[u]);

        // Per-pair distribution of ages.
        std::vector<double> rate(T, 0.0), cap(T, 0.0);
        for (std::size_t t = 0; t < T; ++t) {
            cap[t] = spec.cap_ratio * planted(u, t);
            rate[t] = truncated_exp_rate(planted(u, t), cap[t]);
        }
        auto draw_age = [&](std::size_t t, double uq) { return truncated_exp_quantile(uq, rate[t], cap[t]); };

        std::vector<ClickDraw> clicks;
        for (std::size_t t = 0; t < T; ++t) {
            const std::size_t n = counts[t];
            if (n == 0) continue;
            // Stratified quantiles, one per 1/n slice, in shuffled order.
            std::vector<double> ages(n);
            for (std::size_t i = 0; i < n; ++i) {
                ages[i] = draw_age(t, (static_cast<double>(i) + net::uniform01(urng)) / static_cast<double>(n));
            }
            for (std::size_t i = n; i > 1; --i) std::swap(ages[i - 1], ages[pick(urng, i)]);
            for (const double age : ages) {
                // Uniform over articles whose click at this age falls in the window.
                const auto& pool = by_topic[t];
                const auto offset = static_cast<Timestamp>(std::llround(age));
                const auto lo = std::lower_bound(pool.published.begin(), pool.published.end(),
                                                 spec.start_time - offset);
                const auto hi = std::lower_bound(pool.published.begin(), pool.published.end(),
                                                 spec.start_time + static_cast<Timestamp>(spec.horizon) - offset);
                std::size_t j = 0;
                if (lo < hi) {
                    j = static_cast<std::size_t>(lo - pool.published.begin()) +
                        pick(urng, static_cast<std::size_t>(hi - lo));
                } else {
                    j = std::min<std::size_t>(static_cast<std::size_t>(lo - pool.published.begin()),
                                              pool.ids.size() - 1);
                }
                clicks.push_back(ClickDraw{pool.published[j] + offset, pool.ids[j], topic_ids[t]});
            }
            log.truth.set_user_topic(log.users[u], log.vocab.topics.name(topic_ids[t]),
                                     LifetimeEntry{planted(u, t), n});
            topic_support[t] += n;
            lifetime_sum += planted(u, t) * static_cast<double>(n);
            click_total += n;
        }
        std::stable_sort(clicks.begin(), clicks.end(),
                         [](const ClickDraw& a, const ClickDraw& b) { return a.time < b.time; });

        // Topics the user never clicks; fall back to all others.
        std::vector<std::size_t> cold;
        for (std::size_t t = 0; t < T; ++t) {
            if (affinity[u][t] == 0.0) cold.push_back(t);
        }

        std::vector<int> history;
        for (const auto& click : clicks) {
            Impression imp;
            imp.impression_id = padded('I', next_id++, 8);
            imp.user_id = log.users[u];
            imp.time = click.time;
            const std::size_t from = history.size() > spec.max_history ? history.size() - spec.max_history : 0;
            imp.history.assign(history.begin() + static_cast<std::ptrdiff_t>(from), history.end());
            imp.candidates.push_back(Candidate{click.news, 1});
            const auto ct = static_cast<std::size_t>(click.topic - topic_ids[0]);

            auto fresh_from = [&](std::size_t t) {
                // Age drawn like a click on t by this user, nearest published article.
                const double age = draw_age(t, net::uniform01(urng));
                const auto target = click.time - static_cast<Timestamp>(std::llround(age));
                int n = nearest(by_topic[t], target, click.time - static_cast<Timestamp>(cap[t]), click.time);
                if (n < 0) n = nearest(by_topic[t], target, kEarliest, click.time);
                return n;
            };
            auto available_from = [&](std::size_t t) {
                // Any still-valid article: age uniform over [0, L(u,t)].
                const double l = planted(u, t);
                const auto target = click.time - static_cast<Timestamp>(std::llround(net::uniform01(urng) * l));
                int n = nearest(by_topic[t], target, click.time - static_cast<Timestamp>(std::floor(l)), click.time);
                if (n < 0) n = nearest(by_topic[t], target, kEarliest, click.time);
                return n;
            };
            auto expired_from = [&](std::size_t t) {
                // Past the user's lifetime by a log-uniform factor in [1.2, 6].
                const double l = planted(u, t);
                const double ratio = 1.2 * std::pow(5.0, net::uniform01(urng));
                const auto target = click.time - static_cast<Timestamp>(std::llround(ratio * l));
                return nearest(by_topic[t], target, kEarliest,
                               click.time - static_cast<Timestamp>(std::ceil(l)) - 1);
            };
            auto other_topic = [&](bool cold_only) {
                if (cold_only && !cold.empty()) return cold[pick(urng, cold.size())];
                if (T == 1) return ct;
                std::size_t t = pick(urng, T - 1);
                return t >= ct ? t + 1 : t;
            };

            auto taken = [&](int n) {
                return std::any_of(imp.candidates.begin(), imp.candidates.end(),
                                   [n](const Candidate& c) { return c.news == n; });
            };
            // sparse topics can hand back the same article; redraw a few times
            for (std::size_t k = 0, tries = 0; k < negatives && tries < 8 * negatives; ++tries) {
                int n = -1;
                switch (spec.negatives) {
                    case NegativePolicy::Lifetime:
                        if (net::uniform01(urng) < spec.expired_fraction) n = expired_from(ct);
                        if (n < 0) n = available_from(other_topic(false));
                        break;
                    case NegativePolicy::Matched: {
                        // Same topic distribution and age law as the user's clicks.
                        const auto t = static_cast<std::size_t>(std::discrete_distribution<std::size_t>(
                            affinity[u].begin(), affinity[u].end())(urng));
                        n = fresh_from(t);
                        break;
                    }
                    case NegativePolicy::Separable:
                        n = fresh_from(other_topic(true));
                        break;
                }
                if (n < 0 || taken(n)) continue;
                imp.candidates.push_back(Candidate{n, 0});
                ++k;
            }
            impressions.push_back(std::move(imp));
            history.push_back(click.news);
        }
    }

    for (std::size_t t = 0; t < T; ++t) {
        const auto& name = log.vocab.topics.name(topic_ids[t]);
        log.truth.set_topic(name, LifetimeEntry{log.topic_lifetimes[static_cast<std::size_t>(topic_ids[t])],
                                                topic_support[t]});
    }
    log.mean_lifetime = click_total ? lifetime_sum / static_cast<double>(click_total) : 0.0;
    truth_params.fixed_seconds = log.mean_lifetime;
    {
        LifetimeTable with_fixed(truth_params);
        for (const auto& [topic, e] : log.truth.topics()) with_fixed.set_topic(topic, e);
        for (const auto& [key, e] : log.truth.user_topics()) with_fixed.set_user_topic(key.first, key.second, e);
        log.truth = std::move(with_fixed);
    }

    if (spec.publication_impressions) {
        for (std::size_t i = 0; i < log.news.size(); ++i) {
            Impression imp;
            imp.impression_id = padded('P', i, 8);
            imp.user_id = log.users[pick(rng, log.users.size())];
            imp.time = *log.news[static_cast<int>(i)].publish_time;
            imp.candidates.push_back(Candidate{static_cast<int>(i), 0});
            impressions.push_back(std::move(imp));
        }
    }
    std::stable_sort(impressions.begin(), impressions.end(), [](const Impression& a, const Impression& b) {
        return a.time != b.time ? a.time < b.time : a.impression_id < b.impression_id;
    });
    log.impressions = std::move(impressions);
    return log;
}

Dataset to_dataset(const SyntheticLog& log, const SplitFractions& fractions) {
    Dataset ds;
    ds.vocab = log.vocab;
    ds.news = log.news;
    for (std::size_t i = 0; i < ds.news.size(); ++i) ds.news[static_cast<int>(i)].publish_time.reset();
    ds.split = split_by_time(log.impressions, fractions);
    ds.stats.rows = log.impressions.size();
    derive_publish_times(log.impressions, ds.news);
    return ds;
}

void write_synthetic(const SyntheticLog& log, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&dir](const char* name) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
        return out;
    };
    {
        auto out = open("news.tsv");
        write_news(out, log.news, log.vocab);
    }
    {
        auto out = open("behaviors.tsv");
        write_behaviors(out, log.impressions, log.news);
    }
    {
        auto out = open("truth_lifetimes.tsv");
        log.truth.write(out);
    }
}

}  // namespace lime
