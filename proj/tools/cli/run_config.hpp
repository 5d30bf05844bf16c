#pragma once
// Run configuration for the command-line tool.
//
// File format: `key = value` lines grouped under `[section]` headers, '#'
// comments, blank lines ignored. The same keys can be given on the command
// line as `--section.key value`. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "lime/corpus.hpp"
#include "lime/evalkit.hpp"
#include "lime/synth.hpp"

namespace lime::cli {

struct RunConfig {
    std::filesystem::path data_dir;            // empty: generate from [synth]
    SplitFractions split;
    GeneratorSpec synth;
    ExperimentConfig experiment;
    std::filesystem::path out = "lime_out";

    // Throws std::invalid_argument naming the offending key.
    void validate() const;

    // Canonical text: every key in registry order, numbers round-trippable.
    // `results_only` drops keys that cannot change any output (out, threads).
    std::string to_text(bool results_only = false) const;
    // fnv1a of to_text(true), as 16 hex digits.
    std::string hash() const;
};

struct ConfigKey {
    std::string name;    // "section.key"
    std::string help;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<ConfigKey>& config_keys();

// Sets one key; unknown keys throw std::invalid_argument listing the valid ones.
void set_key(RunConfig& cfg, std::string_view name, std::string_view value);

// Applies a config file on top of `cfg`. Errors carry "path:line".
void apply_file(RunConfig& cfg, const std::filesystem::path& path);
void apply_text(RunConfig& cfg, std::string_view text, const std::string& source);

}  // namespace lime::cli
