#pragma once
// The tool's subcommands. Each writes its artifacts, a copy of the resolved
// config and manifest.json under cfg.out.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace lime::cli {

struct CommandOptions {
    std::filesystem::path model;     // checkpoint for evaluate / sweep / explain; empty trains one
    std::string impression;          // explain: one impression id
    std::size_t explain_count = 5;   // explain: otherwise the first N test impressions
};

using Command = void (*)(const RunConfig&, const CommandOptions&);

struct CommandInfo {
    std::string name;
    std::string help;
    Command run;
};

const std::vector<CommandInfo>& commands();

void simulate(const RunConfig& cfg, const CommandOptions& opts);
void ingest(const RunConfig& cfg, const CommandOptions& opts);
void estimate_lifetimes(const RunConfig& cfg, const CommandOptions& opts);
void train(const RunConfig& cfg, const CommandOptions& opts);
void evaluate(const RunConfig& cfg, const CommandOptions& opts);
void ablate(const RunConfig& cfg, const CommandOptions& opts);
void compare_lifetimes(const RunConfig& cfg, const CommandOptions& opts);
void sweep(const RunConfig& cfg, const CommandOptions& opts);
void explain(const RunConfig& cfg, const CommandOptions& opts);

}  // namespace lime::cli
