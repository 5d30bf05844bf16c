#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lime/evalkit.hpp"
#include "lime/netcore.hpp"
#include "lime/synth.hpp"

namespace lime::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void log(const std::string& msg) { std::cerr << "lime: " << msg << '\n'; }

std::string file_hash(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("missing input: " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return net::hex64(net::fnv1a(ss.str()));
}

// Collects inputs and outputs of one command and writes manifest.json last.
class Session {
public:
    Session(std::string command, const RunConfig& cfg) : command_(std::move(command)), cfg_(cfg) {
        fs::create_directories(cfg.out);
        write("config.cfg", cfg.to_text());
    }

    const RunConfig& cfg() const { return cfg_; }

    void input(const fs::path& p) { inputs_.push_back({p.string(), file_hash(p)}); }

    void write(const std::string& name, const std::string& content) {
        const auto path = cfg_.out / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << content;
        out.close();
        record(name);
    }

    // For files written by library code.
    void record(const std::string& name) { outputs_.push_back(name); }

    void finish() const {
        json j;
        j["tool"] = "lime";
        j["command"] = command_;
        j["config_hash"] = cfg_.hash();
        j["reproduce"] = "lime " + command_ + " --config config.cfg";
        j["config"] = cfg_.to_text();
        auto& ins = j["inputs"] = json::array();
        for (const auto& [path, hash] : inputs_) ins.push_back({{"path", path}, {"fnv1a", hash}});
        auto& outs = j["outputs"] = json::array();
        for (const auto& name : outputs_) {
            const auto path = cfg_.out / name;
            outs.push_back({{"path", name}, {"bytes", fs::file_size(path)}, {"fnv1a", file_hash(path)}});
        }
        std::ofstream out(cfg_.out / "manifest.json", std::ios::binary);
        out << j.dump(2) << '\n';
        log(command_ + " done; " + std::to_string(outputs_.size()) + " files in " + cfg_.out.string());
    }

private:
    std::string command_;
    const RunConfig& cfg_;
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<std::string> outputs_;
};

Dataset load_data(Session& s) {
    const auto& cfg = s.cfg();
    if (cfg.data_dir.empty()) {
        log("generating synthetic data (seed " + std::to_string(cfg.synth.seed) + ")");
        return to_dataset(generate(cfg.synth), cfg.split);
    }
    const auto news = cfg.data_dir / "news.tsv";
    if (!fs::exists(news)) throw std::runtime_error("missing input: " + news.string());
    s.input(news);
    for (const char* name : {"behaviors.tsv", "behaviors_train.tsv", "behaviors_dev.tsv", "behaviors_test.tsv"}) {
        if (fs::exists(cfg.data_dir / name)) s.input(cfg.data_dir / name);
    }
    log("loading " + cfg.data_dir.string());
    return load_dataset(cfg.data_dir, cfg.split);
}

std::string text_of(const auto& writer) {
    std::ostringstream os;
    writer(os);
    return os.str();
}

json metrics_json(const MetricMeans& m) {
    return {{"auc", m.auc},          {"mrr", m.mrr},
            {"ndcg5", m.ndcg5},      {"ndcg10", m.ndcg10},
            {"auc_count", m.auc_count}, {"ranked_count", m.ranked_count},
            {"single_class", m.single_class}, {"no_positive", m.no_positive}};
}

FeatureBuilder features_for(const ExperimentContext& ctx, const RunConfig& cfg) {
    return FeatureBuilder(ctx.dataset().news, ctx.dataset().vocab, ctx.lifetimes(), cfg.experiment.definition,
                          ctx.click_times(), cfg.experiment.model.freshness.unit);
}

// A model from --model, or one trained on the first seed.
LimeModel obtain_model(Session& s, const ExperimentContext& ctx, const CommandOptions& opts) {
    const auto& cfg = s.cfg();
    const auto mcfg = ctx.model_config(cfg.experiment.model);
    const auto seed = cfg.experiment.seeds.front();
    if (!opts.model.empty()) {
        if (!fs::exists(opts.model)) throw std::runtime_error("missing input: " + opts.model.string());
        s.input(opts.model);
        LimeModel model(mcfg, seed);
        net::load_checkpoint(opts.model.string(), model.params(), mcfg.architecture_hash());
        return model;
    }
    log("no --model given; training seed " + std::to_string(seed));
    std::optional<LimeModel> model;
    run_experiment(ctx, cfg.experiment, seed, &model);
    return std::move(*model);
}

EvalReport test_report(const RunConfig& cfg, const ExperimentContext& ctx, const LimeModel& model,
                       const StrategyFlags& flags) {
    const auto features = features_for(ctx, cfg);
    const auto inputs = build_inputs(features, ctx.dataset().split.test);
    auto report = evaluate(model, inputs, flags, cfg.experiment.model.freshness, cfg.experiment.threads);
    report.lifetime_definition = std::string(to_string(cfg.experiment.definition));
    report.seed = cfg.experiment.seeds.front();
    report.config_hash = cfg.hash();
    return report;
}

}  // namespace

const std::vector<CommandInfo>& commands() {
    static const std::vector<CommandInfo> list{
        {"simulate", "generate a synthetic click log with planted lifetimes", &simulate},
        {"ingest", "load a dataset and report what was parsed", &ingest},
        {"estimate-lifetimes", "estimate lifetime tables from training clicks", &estimate_lifetimes},
        {"train", "train one model per seed and evaluate it on the test split", &train},
        {"evaluate", "score the test split and report metrics and error coverage", &evaluate},
        {"ablate", "train and compare the six strategy combinations", &ablate},
        {"compare-lifetimes", "compare fixed, topic-wise and user-topic lifetimes", &compare_lifetimes},
        {"sweep", "re-rank the test split over the alpha/beta grid", &sweep},
        {"explain", "print per-candidate score breakdowns", &explain},
    };
    return list;
}

void simulate(const RunConfig& cfg, const CommandOptions&) {
    if (!cfg.data_dir.empty()) throw std::invalid_argument("simulate: data.dir must be empty (output goes to run.out)");
    Session s("simulate", cfg);
    const auto log_data = generate(cfg.synth);
    write_synthetic(log_data, cfg.out);
    for (const char* name : {"news.tsv", "behaviors.tsv", "truth_lifetimes.tsv"}) s.record(name);
    json j{{"users", log_data.users.size()},
           {"news", log_data.news.size()},
           {"impressions", log_data.impressions.size()},
           {"mean_lifetime_seconds", log_data.mean_lifetime}};
    s.write("simulate_summary.json", j.dump(2) + "\n");
    s.finish();
}

void ingest(const RunConfig& cfg, const CommandOptions&) {
    Session s("ingest", cfg);
    const auto ds = load_data(s);
    std::size_t with_time = 0;
    std::string times = "news_id\tpublish_time\n";
    for (const auto& a : ds.news.articles()) {
        times += a.news_id + '\t' + (a.publish_time ? std::to_string(*a.publish_time) : "") + '\n';
        with_time += a.publish_time ? 1 : 0;
    }
    auto clicks = [&](const std::vector<Impression>& imps) { return clicks_of(imps, ds.news).size(); };
    json j{{"news", ds.news.size()},
           {"news_with_publish_time", with_time},
           {"tokens", ds.vocab.tokens.size() - 1},
           {"topics", ds.vocab.topics.size() - 1},
           {"subtopics", ds.vocab.subtopics.size() - 1},
           {"impressions", {{"train", ds.split.train.size()}, {"dev", ds.split.dev.size()}, {"test", ds.split.test.size()}}},
           {"clicks", {{"train", clicks(ds.split.train)}, {"dev", clicks(ds.split.dev)}, {"test", clicks(ds.split.test)}}},
           {"rows", ds.stats.rows},
           {"skipped_empty", ds.stats.skipped_empty},
           {"dropped_candidates", ds.stats.dropped_candidates},
           {"dropped_history", ds.stats.dropped_history}};
    s.write("ingest_summary.json", j.dump(2) + "\n");
    s.write("publish_times.tsv", times);
    s.finish();
}

void estimate_lifetimes(const RunConfig& cfg, const CommandOptions&) {
    Session s("estimate-lifetimes", cfg);
    const auto ds = load_data(s);
    const ExperimentContext ctx(ds, cfg.experiment.lifetime);
    const auto& table = ctx.lifetimes();
    s.write("lifetimes.tsv", text_of([&](std::ostream& os) { table.write(os); }));

    auto clicks = ds.train_clicks();
    assign_click_ages(clicks, ds.news);
    const ClickLog log_view{clicks, ds.news, ds.vocab};

    // every (user, topic) pair seen in training, resolved under the chosen definition
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& c : clicks) pairs.insert({c.user_id, ds.vocab.topics.name(ds.news[c.news].topic)});
    std::ostringstream resolved;
    resolved.precision(17);
    resolved << "user\ttopic\tseconds\tprovenance\n";
    for (const auto& [user, topic] : pairs) {
        const auto r = table.resolve(user, topic, cfg.experiment.definition);
        resolved << user << '\t' << topic << '\t' << r.seconds << '\t' << to_string(r.provenance) << '\n';
    }
    s.write("resolved_lifetimes.tsv", resolved.str());

    json cov;
    if (!clicks.empty()) {
        for (const auto def : {LifetimeDefinition::UserTopic, LifetimeDefinition::Topic, LifetimeDefinition::Fixed}) {
            cov[std::string(to_string(def))] = click_coverage(log_view, table, def);
        }
    }
    json j{{"definition", to_string(cfg.experiment.definition)},
           {"train_clicks", clicks.size()},
           {"topics", table.topics().size()},
           {"user_topics", table.user_topics().size()},
           {"coverage", cov}};
    s.write("lifetime_summary.json", j.dump(2) + "\n");
    s.finish();
}

void train(const RunConfig& cfg, const CommandOptions&) {
    Session s("train", cfg);
    const auto ds = load_data(s);
    const ExperimentContext ctx(ds, cfg.experiment.lifetime);
    json summary;
    summary["flags"] = cfg.experiment.model.flags.label();
    auto& runs = summary["runs"] = json::array();
    std::vector<MetricMeans> all;
    for (const auto seed : cfg.experiment.seeds) {
        log("training seed " + std::to_string(seed));
        std::optional<LimeModel> model;
        auto outcome = run_experiment(ctx, cfg.experiment, seed, &model);
        outcome.test.config_hash = cfg.hash();
        const auto tag = "seed" + std::to_string(seed);
        const auto ckpt = "model_" + tag + ".ckpt";
        net::save_checkpoint((cfg.out / ckpt).string(), model->params(),
                             net::CheckpointHeader{1, seed, model->config().architecture_hash()});
        s.record(ckpt);
        s.write("curve_" + tag + ".csv", text_of([&](std::ostream& os) { write_curve_csv(os, outcome.training.curve); }));
        s.write("report_" + tag + ".json", text_of([&](std::ostream& os) { outcome.test.write_json(os, false); }));
        runs.push_back({{"seed", seed},
                        {"best_epoch", outcome.training.best_epoch},
                        {"best_dev_auc", outcome.training.best_dev_auc},
                        {"initial_loss", outcome.training.initial_loss},
                        {"test", metrics_json(outcome.test.metrics)}});
        all.push_back(outcome.test.metrics);
    }
    MetricMeans mean;
    for (const auto& m : all) {
        mean.auc += m.auc / static_cast<double>(all.size());
        mean.mrr += m.mrr / static_cast<double>(all.size());
        mean.ndcg5 += m.ndcg5 / static_cast<double>(all.size());
        mean.ndcg10 += m.ndcg10 / static_cast<double>(all.size());
    }
    summary["mean"] = {{"auc", mean.auc}, {"mrr", mean.mrr}, {"ndcg5", mean.ndcg5}, {"ndcg10", mean.ndcg10}};
    s.write("train_summary.json", summary.dump(2) + "\n");
    s.finish();
}

void evaluate(const RunConfig& cfg, const CommandOptions& opts) {
    Session s("evaluate", cfg);
    const auto ds = load_data(s);
    const ExperimentContext ctx(ds, cfg.experiment.lifetime);
    const auto model = obtain_model(s, ctx, opts);
    const auto report = test_report(cfg, ctx, model, cfg.experiment.model.flags);
    s.write("report.json", text_of([&](std::ostream& os) { report.write_json(os, true); }));

    const auto features = features_for(ctx, cfg);
    const auto cov = error_coverage(report, features);
    auto frac = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j{{"false_negatives", cov.false_negatives},
           {"false_positives", cov.false_positives},
           {"fn_in_lifetime", frac(cov.fn_in_lifetime)},
           {"fp_in_lifetime", frac(cov.fp_in_lifetime)}};
    s.write("error_coverage.json", j.dump(2) + "\n");
    std::cout << "AUC " << report.metrics.auc << "  MRR " << report.metrics.mrr << "  nDCG@5 " << report.metrics.ndcg5
              << "  nDCG@10 " << report.metrics.ndcg10 << '\n';
    s.finish();
}

void ablate(const RunConfig& cfg, const CommandOptions&) {
    Session s("ablate", cfg);
    const auto ds = load_data(s);
    const ExperimentContext ctx(ds, cfg.experiment.lifetime);
    const auto combos = ablation_combinations();
    const auto table = lime::ablate(ctx, cfg.experiment, combos);
    s.write("ablation.txt", text_of([&](std::ostream& os) { table.write_text(os); }));
    s.write("ablation.json", text_of([&](std::ostream& os) { table.write_json(os); }));

    // one column per combination, as in the usual ablation layout
    std::ostringstream tsv;
    tsv.precision(17);
    tsv << "metric";
    for (const auto& r : table.rows) tsv << '\t' << r.label;
    tsv << '\n';
    const std::pair<const char*, double MetricMeans::*> metrics[] = {
        {"auc", &MetricMeans::auc}, {"mrr", &MetricMeans::mrr},
        {"ndcg5", &MetricMeans::ndcg5}, {"ndcg10", &MetricMeans::ndcg10}};
    for (const auto& [name, field] : metrics) {
        tsv << name;
        for (const auto& r : table.rows) tsv << '\t' << r.mean.*field;
        tsv << '\n';
    }
    s.write("ablation.tsv", tsv.str());
    table.write_text(std::cout);
    s.finish();
}

void compare_lifetimes(const RunConfig& cfg, const CommandOptions&) {
    Session s("compare-lifetimes", cfg);
    const auto ds = load_data(s);
    const ExperimentContext ctx(ds, cfg.experiment.lifetime);
    const auto table = lime::compare_lifetimes(ctx, cfg.experiment);
    s.write("lifetime_definitions.txt", text_of([&](std::ostream& os) { table.write_text(os); }));
    s.write("lifetime_definitions.json", text_of([&](std::ostream& os) { table.write_json(os); }));
    table.write_text(std::cout);
    s.finish();
}

void sweep(const RunConfig& cfg, const CommandOptions& opts) {
    Session s("sweep", cfg);
    const auto ds = load_data(s);
    const ExperimentContext ctx(ds, cfg.experiment.lifetime);
    const auto model = obtain_model(s, ctx, opts);
    const auto report = test_report(cfg, ctx, model, cfg.experiment.model.flags);
    const auto grid = unit_grid();
    const auto points = sweep_freshness(report, grid, grid, cfg.experiment.model.flags);
    s.write("sweep.csv", text_of([&](std::ostream& os) { write_sweep_csv(os, points); }));

    const SweepPoint* best = &points.front();
    for (const auto& p : points) {
        if (p.metrics.mrr > best->metrics.mrr) best = &p;
    }
    json j{{"points", points.size()},
           {"best_mrr", {{"alpha", best->alpha}, {"beta", best->beta}, {"metrics", metrics_json(best->metrics)}}}};
    s.write("sweep_best.json", j.dump(2) + "\n");
    std::cout << "peak MRR " << best->metrics.mrr << " at alpha " << best->alpha << " beta " << best->beta << '\n';
    s.finish();
}

void explain(const RunConfig& cfg, const CommandOptions& opts) {
    Session s("explain", cfg);
    const auto ds = load_data(s);
    const ExperimentContext ctx(ds, cfg.experiment.lifetime);
    const auto model = obtain_model(s, ctx, opts);
    const auto features = features_for(ctx, cfg);
    std::string text;
    std::size_t shown = 0;
    for (const auto& imp : ds.split.test) {
        if (!opts.impression.empty()) {
            if (imp.impression_id != opts.impression) continue;
        } else if (shown >= opts.explain_count || imp.positives() == 0) {
            continue;   // publication-only impressions have nothing to explain
        }
        const auto inputs = features.build(imp);
        text += lime::explain(inputs, model, cfg.experiment.model.flags, cfg.experiment.model.freshness, ds.news);
        text += '\n';
        ++shown;
    }
    if (!opts.impression.empty() && shown == 0) {
        throw std::invalid_argument("explain: impression '" + opts.impression + "' is not in the test split");
    }
    s.write("explain.txt", text);
    std::cout << text;
    s.finish();
}

}  // namespace lime::cli
