#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace debias {

using TokenId = std::int32_t;
using ExampleId = std::int64_t;

enum class BiasTag { clean, biased, anti_biased };

std::string_view to_string(BiasTag tag);
BiasTag parse_bias_tag(std::string_view text);

struct SynthConfig {
    int num_labels = 3;
    int train_size = 20000;
    int test_size = 3000;
    int vocab_size = 400;
    int tokens_per_segment = 4;
    // Interchangeable tokens per (segment, signal value). With 1 the signal
    // vocabulary is exactly 2K tokens.
    int signal_synonyms = 3;
    // Per-example probability that the segment_b signal token is swapped for
    // one encoding a wrong value, so the conjunction no longer decodes the label.
    double noise_token_rate = 0.05;
    double manipulated_fraction = 0.3;
    double bias_proportion = 0.9;
    std::uint64_t seed = 1;

    // Throws ConfigError.
    void validate() const;
};

// Disjoint token ranges: [0, K) bias codes, then segment_a signal tokens,
// segment_b signal tokens, and noise tokens up to vocab_size.
struct TokenLayout {
    int num_labels;
    int synonyms;
    int vocab_size;

    explicit TokenLayout(const SynthConfig& cfg)
        : num_labels(cfg.num_labels), synonyms(cfg.signal_synonyms), vocab_size(cfg.vocab_size) {}

    TokenId bias_token(int label) const { return label; }
    TokenId signal_a(int value, int synonym) const { return num_labels + value * synonyms + synonym; }
    TokenId signal_b(int value, int synonym) const {
        return num_labels + num_labels * synonyms + value * synonyms + synonym;
    }
    TokenId noise_begin() const { return num_labels + 2 * num_labels * synonyms; }
    int noise_count() const { return vocab_size - noise_begin(); }
};

struct Example {
    ExampleId id = 0;
    std::vector<TokenId> segment_a;
    std::vector<TokenId> segment_b;
    int label = 0;
    BiasTag bias_tag = BiasTag::clean;
    std::optional<TokenId> bias_token;

    bool operator==(const Example&) const = default;
};

struct Dataset {
    std::vector<Example> examples;
    int num_labels = 0;
    int vocab_size = 0;
    SynthConfig provenance;
    std::uint64_t generation_seed = 0;
    // "train" or "eval:<name>"; training commands refuse eval splits.
    std::string split = "train";

    std::size_t size() const { return examples.size(); }
    bool operator==(const Dataset& other) const {
        return examples == other.examples && num_labels == other.num_labels &&
               vocab_size == other.vocab_size && generation_seed == other.generation_seed &&
               split == other.split;
    }
};

struct EvalSuite {
    Dataset original;
    Dataset biased;
    Dataset anti_biased;
};

// train_size clean examples. Deterministic in cfg (including cfg.seed).
Dataset gen_dataset(const SynthConfig& cfg);

// Prepends a bias token to segment_b of exactly round(rho * N) examples;
// round(m * manipulated) of them carry the gold label code, the rest a
// uniformly drawn wrong code. Throws DataError when the input is not all-clean.
Dataset inject_bias(const Dataset& dataset, double m, double rho, std::uint64_t seed);

EvalSuite make_eval_suite(const SynthConfig& cfg);

// test_size held-out examples injected with the training m and rho; the
// analog of an in-distribution dev set that still carries the shortcut.
Dataset make_heldout_split(const SynthConfig& cfg);

// Label decoded from the bias token; nullopt (abstain) on clean examples.
std::optional<int> bias_oracle_predict(const Example& example);

// Half-up rounding used for all manipulated-count boundaries.
std::int64_t round_half_up(double x);

struct TagCounts {
    std::int64_t clean = 0;
    std::int64_t biased = 0;
    std::int64_t anti_biased = 0;
};
TagCounts count_tags(const Dataset& dataset);

// Keeps the examples whose ids are listed (or not listed, when exclude is set).
Dataset filter_by_ids(const Dataset& dataset, const std::vector<ExampleId>& ids, bool exclude);

}  // namespace debias
