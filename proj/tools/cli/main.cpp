#include <iostream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "run_config.hpp"

using namespace lime::cli;

int main(int argc, char** argv) {
    CLI::App app{"lime: lifetime-aware news recommendation experiments"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_file;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::string out;
    app.add_option("--config,--spec", config_file, "config file ([section] key = value)");
    app.add_option("--set", sets, "override one key, e.g. --set train.lr=0.01")->take_all();
    app.add_option("--seed", seed, "single seed for the run and the generator");
    app.add_option("--threads", threads, "scoring threads");
    app.add_option("--out", out, "output directory");

    // every config key is also a flag: --section.key VALUE
    std::map<std::string, std::string> key_values;
    auto* keys = app.add_option_group("config keys");
    for (const auto& key : config_keys()) {
        keys->add_option("--" + key.name, key_values[key.name], key.help);
    }

    std::string data_dir, definition;
    CommandOptions opts;
    const CommandInfo* chosen = nullptr;
    for (const auto& info : commands()) {
        auto* sub = app.add_subcommand(info.name, info.help);
        sub->add_option("--data", data_dir, "dataset directory (news.tsv, behaviors*.tsv)");
        sub->add_option("--def", definition, "lifetime definition: fixed, topic or user-topic");
        if (info.name == "evaluate" || info.name == "sweep" || info.name == "explain") {
            sub->add_option("--model", opts.model, "checkpoint written by train");
        }
        if (info.name == "explain") {
            sub->add_option("--impression", opts.impression, "impression id in the test split");
            sub->add_option("--count", opts.explain_count, "number of test impressions otherwise");
        }
        sub->callback([&chosen, &info] { chosen = &info; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        RunConfig cfg;
        if (!config_file.empty()) apply_file(cfg, config_file);
        for (const auto& key : config_keys()) {
            if (app.count("--" + key.name) > 0) set_key(cfg, key.name, key_values[key.name]);
        }
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
            set_key(cfg, s.substr(0, eq), s.substr(eq + 1));
        }
        if (seed) {
            set_key(cfg, "run.seeds", std::to_string(*seed));
            set_key(cfg, "synth.seed", std::to_string(*seed));
        }
        if (threads) set_key(cfg, "run.threads", std::to_string(*threads));
        if (!out.empty()) set_key(cfg, "run.out", out);
        if (!data_dir.empty()) set_key(cfg, "data.dir", data_dir);
        if (!definition.empty()) set_key(cfg, "lifetime.definition", definition);
        cfg.validate();
        chosen->run(cfg, opts);
    } catch (const std::exception& e) {
        std::cerr << "lime: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
