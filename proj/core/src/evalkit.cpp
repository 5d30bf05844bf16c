#include "lime/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "json.hpp"

namespace lime {

namespace {

using nlohmann::ordered_json;

ordered_json metrics_json(const MetricMeans& m) {
    return ordered_json{{"auc", m.auc},
                        {"mrr", m.mrr},
                        {"ndcg5", m.ndcg5},
                        {"ndcg10", m.ndcg10},
                        {"auc_count", m.auc_count},
                        {"ranked_count", m.ranked_count},
                        {"single_class", m.single_class},
                        {"no_positive", m.no_positive}};
}

// Metrics over per-impression results, accumulated in impression order.
MetricMeans aggregate(const std::vector<ImpressionResult>& results) {
    MetricAccumulator acc;
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& r : results) {
        scores.clear();
        labels.clear();
        for (const auto& c : r.candidates) {
            scores.push_back(c.score);
            labels.push_back(c.label);
        }
        acc.add(scores, labels);
    }
    return acc.means();
}

void apply_weights(ImpressionResult& r, const StrategyFlags& flags, const FreshnessParams& freshness) {
    std::vector<double> scores;
    scores.reserve(r.candidates.size());
    for (auto& c : r.candidates) {
        c.weight = flags.s3_freshness ? freshness_weight(c.fresh_units, freshness) : 1.0;
        c.score = final_score(c.base, c.fresh_units, flags, freshness);
        scores.push_back(c.score);
    }
    r.ranking = rank_order(scores);
}

ImpressionResult score_impression(const LimeModel& model, const ImpressionInputs& in, const StrategyFlags& flags,
                                  const FreshnessParams& freshness) {
    ImpressionResult r;
    r.impression_id = in.impression->impression_id;
    r.user_id = in.impression->user_id;
    r.time = in.impression->time;
    const auto base = model.base_scores(in.history_inputs(), in.candidate_inputs());
    r.candidates.reserve(in.candidates.size());
    for (std::size_t i = 0; i < in.candidates.size(); ++i) {
        const auto& c = in.candidates[i];
        CandidateResult cr;
        cr.news = c.news;
        cr.label = in.labels[i];
        cr.age_seconds = c.input.age_seconds;
        cr.lifetime_seconds = c.input.lifetime_seconds;
        cr.provenance = c.provenance;
        cr.fresh_units = c.fresh_units;
        cr.base = base[i];
        r.candidates.push_back(cr);
    }
    apply_weights(r, flags, freshness);
    return r;
}

std::string experiment_hash(const ModelConfig& model, const ExperimentConfig& cfg, const StrategyFlags& flags) {
    std::ostringstream os;
    os.precision(17);
    os << model.architecture_hash() << ";s3=" << flags.s3_freshness << ";alpha=" << model.freshness.alpha
       << ";beta=" << model.freshness.beta << ";unit=" << model.freshness.unit << ";lr=" << cfg.train.lr
       << ";batch=" << cfg.train.batch_size << ";epochs=" << cfg.train.max_epochs
       << ";patience=" << cfg.train.patience << ";M=" << cfg.train.negatives
       << ";strict=" << cfg.train.strict_sampling << ";m=" << cfg.lifetime.m << ";k=" << cfg.lifetime.min_clicks
       << ";fixed=" << cfg.lifetime.fixed_seconds << ";def=" << to_string(cfg.definition);
    return net::hex64(net::fnv1a(os.str()));
}

double gain_pct(double value, double base) {
    return base == 0.0 ? 0.0 : (value - base) / base * 100.0;
}

MetricMeans average(const std::vector<MetricMeans>& runs) {
    MetricMeans out;
    if (runs.empty()) return out;
    for (const auto& r : runs) {
        out.auc += r.auc;
        out.mrr += r.mrr;
        out.ndcg5 += r.ndcg5;
        out.ndcg10 += r.ndcg10;
        out.auc_count += r.auc_count;
        out.ranked_count += r.ranked_count;
        out.single_class += r.single_class;
        out.no_positive += r.no_positive;
    }
    const auto n = static_cast<double>(runs.size());
    out.auc /= n;
    out.mrr /= n;
    out.ndcg5 /= n;
    out.ndcg10 /= n;
    return out;
}

void fill_gains(ComparisonTable& table) {
    if (table.rows.empty()) return;
    const MetricMeans base = table.rows.front().mean;
    for (auto& row : table.rows) {
        row.auc_gain_pct = gain_pct(row.mean.auc, base.auc);
        row.mrr_gain_pct = gain_pct(row.mean.mrr, base.mrr);
        row.ndcg5_gain_pct = gain_pct(row.mean.ndcg5, base.ndcg5);
        row.ndcg10_gain_pct = gain_pct(row.mean.ndcg10, base.ndcg10);
    }
}

}  // namespace

void EvalReport::write_json(std::ostream& out, bool include_rankings) const {
    ordered_json j;
    j["flags"] = flags;
    j["lifetime_definition"] = lifetime_definition;
    j["seed"] = seed;
    j["config_hash"] = config_hash;
    j["impressions"] = impressions;
    j["metrics"] = metrics_json(metrics);
    if (include_rankings) {
        auto& arr = j["rankings"] = ordered_json::array();
        for (const auto& r : rankings) {
            ordered_json ji{{"impression_id", r.impression_id}, {"user_id", r.user_id}, {"time", r.time}};
            auto& cands = ji["candidates"] = ordered_json::array();
            for (const auto& c : r.candidates) {
                cands.push_back(ordered_json{{"news", c.news},
                                             {"label", c.label},
                                             {"age_seconds", c.age_seconds},
                                             {"lifetime_seconds", c.lifetime_seconds},
                                             {"provenance", to_string(c.provenance)},
                                             {"fresh_units", c.fresh_units},
                                             {"base", c.base},
                                             {"weight", c.weight},
                                             {"score", c.score}});
            }
            ji["ranking"] = r.ranking;
            arr.push_back(std::move(ji));
        }
    }
    out << j.dump(2) << '\n';
}

std::vector<ImpressionInputs> build_inputs(const FeatureBuilder& features, std::span<const Impression> impressions) {
    std::vector<ImpressionInputs> out;
    out.reserve(impressions.size());
    for (const auto& imp : impressions) out.push_back(features.build(imp));
    return out;
}

EvalReport evaluate(const LimeModel& model, std::span<const ImpressionInputs> inputs, const StrategyFlags& flags,
                    const FreshnessParams& freshness, std::size_t threads) {
    flags.validate();
    EvalReport report;
    report.flags = flags.label();
    report.impressions = inputs.size();
    report.rankings.resize(inputs.size());
    threads = std::max<std::size_t>(1, std::min(threads, inputs.size()));
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            report.rankings[i] = score_impression(model, inputs[i], flags, freshness);
        }
    };
    if (threads == 1) {
        work(0, inputs.size());
    } else {
        // Each worker owns a contiguous slice; aggregation happens afterwards in order.
        std::vector<std::thread> pool;
        const std::size_t chunk = (inputs.size() + threads - 1) / threads;
        for (std::size_t t = 0; t < threads; ++t) {
            const std::size_t begin = t * chunk;
            const std::size_t end = std::min(inputs.size(), begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(work, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    report.metrics = aggregate(report.rankings);
    return report;
}

EvalReport rescore(const EvalReport& report, const StrategyFlags& flags, const FreshnessParams& freshness) {
    EvalReport out = report;
    out.flags = flags.label();
    for (auto& r : out.rankings) apply_weights(r, flags, freshness);
    out.metrics = aggregate(out.rankings);
    return out;
}

ExperimentContext::ExperimentContext(const Dataset& dataset, const LifetimeParams& params)
    : dataset_(dataset), lifetimes_(params), click_times_(ClickTimeIndex::from(dataset.split)) {
    auto clicks = dataset.train_clicks();
    assign_click_ages(clicks, dataset.news);
    lifetimes_ = build_lifetime_table(ClickLog{clicks, dataset.news, dataset.vocab}, params);
}

ModelConfig ExperimentContext::model_config(ModelConfig base) const {
    base.vocab_size = dataset_.vocab.tokens.size();
    base.topic_count = dataset_.vocab.topics.size();
    base.subtopic_count = dataset_.vocab.subtopics.size();
    return base;
}

namespace {

struct TrainedRun {
    LimeModel model;
    TrainResult training;
};

TrainedRun train_one(const ExperimentContext& ctx, const ExperimentConfig& cfg, const ModelConfig& mcfg,
                     const FeatureBuilder& features, std::uint64_t seed) {
    const auto& ds = ctx.dataset();
    TrainedRun run{LimeModel(mcfg, seed), {}};
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    run.training = train(run.model, TrainingData{ds.split.train, ds.split.dev, features}, tc);
    return run;
}

EvalReport test_report(const ExperimentContext& ctx, const ExperimentConfig& cfg, const LimeModel& model,
                       const FeatureBuilder& features, const StrategyFlags& flags, std::uint64_t seed) {
    const auto inputs = build_inputs(features, ctx.dataset().split.test);
    auto report = evaluate(model, inputs, flags, model.config().freshness, cfg.threads);
    report.lifetime_definition = std::string(to_string(cfg.definition));
    report.seed = seed;
    report.config_hash = experiment_hash(model.config(), cfg, flags);
    return report;
}

}  // namespace

RunOutcome run_experiment(const ExperimentContext& ctx, const ExperimentConfig& cfg, std::uint64_t seed,
                          std::optional<LimeModel>* model_out) {
    const auto mcfg = ctx.model_config(cfg.model);
    mcfg.validate();
    const FeatureBuilder features(ctx.dataset().news, ctx.dataset().vocab, ctx.lifetimes(), cfg.definition,
                                  ctx.click_times(), mcfg.freshness.unit);
    auto run = train_one(ctx, cfg, mcfg, features, seed);
    RunOutcome out;
    out.test = test_report(ctx, cfg, run.model, features, mcfg.flags, seed);
    out.training = std::move(run.training);
    if (model_out) model_out->emplace(std::move(run.model));
    return out;
}

void ComparisonTable::write_text(std::ostream& out) const {
    std::size_t width = 5;
    for (const auto& r : rows) width = std::max(width, r.label.size());
    const auto flags = out.flags();
    const auto prec = out.precision();
    out << title << '\n';
    out << std::left << std::setw(static_cast<int>(width)) << "model" << std::right;
    for (const char* h : {"AUC", "MRR", "nDCG@5", "nDCG@10", "dAUC%", "dMRR%"}) out << "  " << std::setw(9) << h;
    out << '\n';
    out << std::fixed << std::setprecision(4);
    for (const auto& r : rows) {
        out << std::left << std::setw(static_cast<int>(width)) << r.label << std::right;
        for (const double v : {r.mean.auc, r.mean.mrr, r.mean.ndcg5, r.mean.ndcg10}) out << "  " << std::setw(9) << v;
        out << std::setprecision(2);
        out << "  " << std::setw(9) << r.auc_gain_pct << "  " << std::setw(9) << r.mrr_gain_pct << '\n';
        out << std::setprecision(4);
    }
    out.flags(flags);
    out.precision(prec);
}

void ComparisonTable::write_json(std::ostream& out) const {
    ordered_json j;
    j["title"] = title;
    auto& arr = j["rows"] = ordered_json::array();
    for (const auto& r : rows) {
        ordered_json jr{{"label", r.label}, {"mean", metrics_json(r.mean)}};
        auto& seeds = jr["per_seed"] = ordered_json::array();
        for (const auto& m : r.per_seed) seeds.push_back(metrics_json(m));
        jr["gain_pct"] = ordered_json{{"auc", r.auc_gain_pct},
                                      {"mrr", r.mrr_gain_pct},
                                      {"ndcg5", r.ndcg5_gain_pct},
                                      {"ndcg10", r.ndcg10_gain_pct}};
        arr.push_back(std::move(jr));
    }
    out << j.dump(2) << '\n';
}

const TableRow& ComparisonTable::row(std::string_view label) const {
    for (const auto& r : rows) {
        if (r.label == label) return r;
    }
    throw std::out_of_range("no row '" + std::string(label) + "' in table '" + title + "'");
}

std::vector<StrategyFlags> ablation_combinations() {
    return {
        {false, false, false}, {true, false, false}, {false, false, true},
        {true, true, false},   {true, false, true},  {true, true, true},
    };
}

ComparisonTable ablate(const ExperimentContext& ctx, const ExperimentConfig& cfg,
                       std::span<const StrategyFlags> combos) {
    for (const auto& c : combos) c.validate();
    if (cfg.seeds.empty()) throw std::invalid_argument("ablate: at least one seed is required");
    const FeatureBuilder features(ctx.dataset().news, ctx.dataset().vocab, ctx.lifetimes(), cfg.definition,
                                  ctx.click_times(), cfg.model.freshness.unit);

    ComparisonTable table;
    table.title = "ablation (" + std::string(to_string(cfg.definition)) + " lifetimes)";
    for (const auto& c : combos) table.rows.push_back(TableRow{c.label(), {}, {}, 0, 0, 0, 0});

    for (const auto seed : cfg.seeds) {
        // S3 only changes ranking unless freshness is also used in training, so
        // models are keyed by what actually shapes training.
        std::map<std::tuple<bool, bool, bool>, TrainedRun> trained;
        for (std::size_t i = 0; i < combos.size(); ++i) {
            const auto& c = combos[i];
            const bool fresh_in_training = cfg.model.train_with_freshness && c.s3_freshness;
            const auto key = std::make_tuple(c.s1_age_repr, c.s2_candidate_attention, fresh_in_training);
            auto it = trained.find(key);
            if (it == trained.end()) {
                auto mcfg = ctx.model_config(cfg.model);
                mcfg.flags = c;
                it = trained.emplace(key, train_one(ctx, cfg, mcfg, features, seed)).first;
            }
            const auto report = test_report(ctx, cfg, it->second.model, features, c, seed);
            table.rows[i].per_seed.push_back(report.metrics);
        }
    }
    for (auto& r : table.rows) r.mean = average(r.per_seed);
    fill_gains(table);
    return table;
}

ComparisonTable compare_lifetimes(const ExperimentContext& ctx, const ExperimentConfig& cfg) {
    if (cfg.seeds.empty()) throw std::invalid_argument("compare_lifetimes: at least one seed is required");
    ComparisonTable table;
    table.title = "lifetime definitions (" + cfg.model.flags.label() + ")";
    for (const auto def : {LifetimeDefinition::Fixed, LifetimeDefinition::Topic, LifetimeDefinition::UserTopic}) {
        ExperimentConfig variant = cfg;
        variant.definition = def;
        TableRow row;
        row.label = std::string(to_string(def));
        for (const auto seed : cfg.seeds) row.per_seed.push_back(run_experiment(ctx, variant, seed).test.metrics);
        row.mean = average(row.per_seed);
        table.rows.push_back(std::move(row));
    }
    fill_gains(table);
    return table;
}

std::vector<double> unit_grid() {
    std::vector<double> out;
    for (int i = 0; i <= 10; ++i) out.push_back(static_cast<double>(i) / 10.0);
    return out;
}

std::vector<SweepPoint> sweep_freshness(const EvalReport& report, const std::vector<double>& alphas,
                                        const std::vector<double>& betas, const StrategyFlags& flags) {
    StrategyFlags on = flags;
    on.s3_freshness = true;
    std::vector<SweepPoint> out;
    out.reserve(alphas.size() * betas.size());
    for (const double a : alphas) {
        for (const double b : betas) {
            FreshnessParams p;
            p.alpha = a;
            p.beta = b;
            p.validate(true);
            out.push_back(SweepPoint{a, b, rescore(report, on, p).metrics});
        }
    }
    return out;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points) {
    const auto prec = out.precision(17);
    out << "alpha,beta,auc,mrr,ndcg5,ndcg10\n";
    for (const auto& p : points) {
        out << p.alpha << ',' << p.beta << ',' << p.metrics.auc << ',' << p.metrics.mrr << ',' << p.metrics.ndcg5
            << ',' << p.metrics.ndcg10 << '\n';
    }
    out.precision(prec);
}

ErrorCoverage error_coverage(const EvalReport& report, const FeatureBuilder& features) {
    ErrorCoverage out;
    std::size_t fn_in = 0, fp_in = 0;
    for (const auto& r : report.rankings) {
        std::size_t k = 0;
        for (const auto& c : r.candidates) k += c.label == 1 ? 1 : 0;
        std::vector<bool> predicted(r.candidates.size(), false);
        for (std::size_t i = 0; i < k && i < r.ranking.size(); ++i) predicted[r.ranking[i]] = true;
        for (std::size_t i = 0; i < r.candidates.size(); ++i) {
            const auto& c = r.candidates[i];
            const bool fn = c.label == 1 && !predicted[i];
            const bool fp = c.label == 0 && predicted[i];
            if (!fn && !fp) continue;
            const auto resolved = features.resolve(r.user_id, c.news, r.time);
            const bool in_lifetime = resolved.input.age_seconds <= resolved.input.lifetime_seconds;
            if (fn) {
                ++out.false_negatives;
                fn_in += in_lifetime ? 1 : 0;
            } else {
                ++out.false_positives;
                fp_in += in_lifetime ? 1 : 0;
            }
        }
    }
    if (out.false_negatives) out.fn_in_lifetime = static_cast<double>(fn_in) / static_cast<double>(out.false_negatives);
    if (out.false_positives) out.fp_in_lifetime = static_cast<double>(fp_in) / static_cast<double>(out.false_positives);
    return out;
}

std::string explain(const ImpressionInputs& inputs, const LimeModel& model, const StrategyFlags& flags,
                    const FreshnessParams& freshness, const NewsTable& news) {
    const auto r = score_impression(model, inputs, flags, freshness);
    std::ostringstream os;
    os << "impression " << r.impression_id << " user " << r.user_id << " time " << r.time << " flags "
       << flags.label() << " history " << inputs.history.size() << '\n';
    os << std::fixed;
    std::size_t rank = 1;
    for (const auto idx : r.ranking) {
        const auto& c = r.candidates[idx];
        const bool expired = c.fresh_units < 0.0;
        os << std::setw(3) << rank++ << ". " << news[c.news].news_id << " label=" << c.label
           << std::setprecision(6) << " S_base=" << c.base << std::setprecision(3) << " F=" << c.fresh_units
           << std::setprecision(6) << " f=" << freshness_weight(c.fresh_units, freshness)
           << " S=" << c.score << std::setprecision(2) << " age=" << c.age_seconds / kSecondsPerHour
           << "h lifetime=" << c.lifetime_seconds / kSecondsPerHour << "h (" << to_string(c.provenance) << ")"
           << " verdict=" << (expired ? "expired" : "in-lifetime");
        if (expired) os << std::setprecision(4) << " [f < 0.5*beta = " << 0.5 * freshness.beta << "]";
        os << '\n';
    }
    return os.str();
}

}  // namespace lime
