#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "commands.hpp"
#include "doctest.h"
#include "json.hpp"
#include "run_config.hpp"

using namespace lime::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("lime_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

RunConfig small_config(const fs::path& out) {
    RunConfig cfg;
    apply_text(cfg, R"(
[synth]
users = 10
topics = 3
news_per_topic = 60
vocab_size = 120
clicks_per_user = 30
horizon = 1728000
[model]
word_dim = 8
content_dim = 8
bucket_dim = 4
age_dim = 4
category_dim = 4
topic_dim = 4
query_dim = 6
[train]
max_epochs = 2
)", "small");
    cfg.out = out;
    cfg.validate();
    return cfg;
}

}  // namespace

TEST_CASE("unknown key names the valid keys") {
    RunConfig cfg;
    try {
        set_key(cfg, "train.learning_rate", "0.1");
        FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("train.learning_rate") != std::string::npos);
        CHECK(msg.find("train.lr") != std::string::npos);
        CHECK(msg.find("freshness.alpha") != std::string::npos);
    }
}

TEST_CASE("config file errors carry source and line") {
    RunConfig cfg;
    try {
        apply_text(cfg, "[train]\nlr = 0.01\nepochs = 3\n", "run.cfg");
        FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).rfind("run.cfg:3: ", 0) == 0);
    }
    CHECK_THROWS_AS(apply_text(cfg, "[train\n", "x"), std::invalid_argument);
    CHECK_THROWS_AS(apply_text(cfg, "[train]\nlr\n", "x"), std::invalid_argument);
    CHECK_THROWS_AS(apply_text(cfg, "[train]\nlr = fast\n", "x"), std::invalid_argument);
}

TEST_CASE("missing config file names the path") {
    RunConfig cfg;
    try {
        apply_file(cfg, "/nonexistent/run.cfg");
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("missing input") != std::string::npos);
        CHECK(std::string(e.what()).find("/nonexistent/run.cfg") != std::string::npos);
    }
}

TEST_CASE("canonical text round-trips and hashes") {
    RunConfig cfg;
    apply_text(cfg, "[freshness]\nalpha = 0.25\n[run]\nseeds = 3,4\n", "t");
    CHECK(cfg.experiment.model.freshness.alpha == 0.25);
    CHECK(cfg.experiment.seeds == std::vector<std::uint64_t>{3, 4});

    RunConfig again;
    apply_text(again, cfg.to_text(), "round");
    CHECK(again.to_text() == cfg.to_text());
    CHECK(again.hash() == cfg.hash());
    CHECK(cfg.hash().size() == 16);

    // out and threads cannot change results
    again.out = "elsewhere";
    again.experiment.threads = 8;
    CHECK(again.hash() == cfg.hash());
    set_key(again, "freshness.beta", "0.5");
    CHECK(again.hash() != cfg.hash());
}

TEST_CASE("every registered key reads back what it was set to") {
    RunConfig cfg;
    for (const auto& key : config_keys()) {
        const auto value = key.get(cfg);
        set_key(cfg, key.name, value);
        CHECK_MESSAGE(key.get(cfg) == value, key.name);
    }
}

TEST_CASE("validation rejects inconsistent settings") {
    auto bad = [](const char* key, const char* value) {
        RunConfig cfg;
        set_key(cfg, key, value);
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    };
    bad("data.train_fraction", "0.9");
    bad("lifetime.m", "0");
    bad("run.threads", "0");
    bad("train.batch_size", "0");
    bad("synth.users", "0");
    bad("run.seeds", "");
}

TEST_CASE("missing dataset names the path") {
    auto cfg = small_config(scratch("missing"));
    cfg.data_dir = "/nonexistent/data";
    try {
        ingest(cfg, {});
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("/nonexistent/data/news.tsv") != std::string::npos);
    }
}

TEST_CASE("simulate then estimate-lifetimes on the written files") {
    const auto root = scratch("pipeline");
    auto sim = small_config(root / "sim");
    simulate(sim, {});
    for (const char* f : {"news.tsv", "behaviors.tsv", "truth_lifetimes.tsv", "manifest.json", "config.cfg"}) {
        CHECK_MESSAGE(fs::exists(root / "sim" / f), f);
    }

    auto est = small_config(root / "est");
    est.data_dir = root / "sim";
    estimate_lifetimes(est, {});
    const auto summary = nlohmann::json::parse(slurp(root / "est" / "lifetime_summary.json"));
    CHECK(summary["topics"].get<int>() == 3);
    CHECK(summary["train_clicks"].get<int>() > 0);
    for (const char* def : {"user-topic", "topic", "fixed"}) {
        const double c = summary["coverage"][def].get<double>();
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
    }

    const auto manifest = nlohmann::json::parse(slurp(root / "est" / "manifest.json"));
    CHECK(manifest["command"] == "estimate-lifetimes");
    CHECK(manifest["config_hash"] == est.hash());
    CHECK(manifest["inputs"].size() >= 2);
    CHECK(manifest["outputs"].size() == 4);

    // the config copy reproduces the run
    RunConfig copy;
    apply_file(copy, root / "est" / "config.cfg");
    CHECK(copy.hash() == est.hash());
}

TEST_CASE("train writes a checkpoint that evaluate reproduces") {
    const auto root = scratch("train");
    auto cfg = small_config(root / "train");
    train(cfg, {});
    const auto summary = nlohmann::json::parse(slurp(root / "train" / "train_summary.json"));
    const double auc = summary["runs"][0]["test"]["auc"].get<double>();

    auto eval = small_config(root / "eval");
    CommandOptions opts;
    opts.model = root / "train" / "model_seed1.ckpt";
    evaluate(eval, opts);
    const auto report = nlohmann::json::parse(slurp(root / "eval" / "report.json"));
    CHECK(report["metrics"]["auc"].get<double>() == auc);
    CHECK(report["config_hash"] == eval.hash());

    // a different architecture refuses the checkpoint
    auto other = small_config(root / "other");
    set_key(other, "model.word_dim", "16");
    CHECK_THROWS(evaluate(other, opts));
}

TEST_CASE("ablate writes one column per combination and reruns identically") {
    const auto root = scratch("ablate");
    auto cfg = small_config(root / "a");
    ablate(cfg, {});
    std::istringstream tsv(slurp(root / "a" / "ablation.tsv"));
    std::string header;
    std::getline(tsv, header);
    CHECK(header == "metric\tbase\tS1\tS3\tS1+S2\tS1+S3\tS1+S2+S3");
    std::size_t rows = 0;
    for (std::string line; std::getline(tsv, line); ++rows) {
        CHECK(std::count(line.begin(), line.end(), '\t') == 6);
    }
    CHECK(rows == 4);

    auto again = small_config(root / "b");
    again.experiment.threads = 3;
    ablate(again, {});
    for (const char* f : {"ablation.txt", "ablation.json", "ablation.tsv"}) {
        CHECK_MESSAGE(slurp(root / "a" / f) == slurp(root / "b" / f), f);
    }
}

TEST_CASE("sweep covers the grid and explain finds an impression") {
    const auto root = scratch("sweep");
    auto cfg = small_config(root / "s");
    sweep(cfg, {});
    std::istringstream csv(slurp(root / "s" / "sweep.csv"));
    std::size_t lines = 0;
    for (std::string line; std::getline(csv, line);) ++lines;
    CHECK(lines == 122);

    auto ex = small_config(root / "e");
    CommandOptions opts;
    opts.explain_count = 2;
    explain(ex, opts);
    CHECK(slurp(root / "e" / "explain.txt").find("verdict=") != std::string::npos);
    opts.impression = "no-such-impression";
    CHECK_THROWS_AS(explain(ex, opts), std::invalid_argument);
}
