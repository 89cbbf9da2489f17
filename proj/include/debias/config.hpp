#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "debias/eval.hpp"

namespace debias {

// Everything a command can be configured with. The config file is line
// oriented: `section.key = value`, `#` starts a comment.
struct RunConfig {
    ExperimentConfig experiment;
    std::uint64_t seed = 1;

    // shallow --grid
    std::vector<int> grid_sizes{500, 1000, 1500, 2000};
    std::vector<int> grid_epochs{1, 2, 3, 4, 5};
    double band_half_width = 0.10;
    double high_conf_fraction = 0.90;

    // report kinds that run their own studies
    std::vector<double> a_values{1.0, 0.8, 0.6, 0.4, 0.2, 0.0};
    std::vector<double> m_values{0.6, 0.7, 0.8, 0.9};
    int report_seeds = 3;
    int stability_runs = 10;

    void validate() const;
};

// Throws ConfigError naming the line and key.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

// Single `key = value` assignment (flag overrides go through here too).
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

const std::vector<std::string>& config_keys();

// Closest known key within a small edit distance, or empty.
std::string suggest_key(std::string_view unknown);

// Sorted `key = value` lines of the resolved config; stable under any
// reordering of the input file.
std::string canonical_config(const RunConfig& cfg);

// 16 hex digits of FNV-1a over arbitrary text.
std::string digest_hex(std::string_view text);
std::string config_digest(const RunConfig& cfg);

// Experiment config with data/shallow/train seeds derived from cfg.seed.
ExperimentConfig resolved_experiment(const RunConfig& cfg);

}  // namespace debias
