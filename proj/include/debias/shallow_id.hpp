#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "debias/eval_types.hpp"
#include "debias/model.hpp"
#include "debias/synthgen.hpp"

namespace debias {

struct ShallowConfig {
    int sample_size = 500;  // n_s
    int epochs = 6;         // e_s
    double learning_rate = 0.2;
    int batch_size = 16;
    std::uint64_t seed = 1;
    int hidden = 64;
    int feature_dim = 2048;
    OptimizerKind optimizer = OptimizerKind::sgd;

    void validate(std::size_t dataset_size) const;
};

struct BiasEntry {
    ExampleId id = 0;
    ProbVector p_b;
    double p_b_correct = 0.0;
    int predicted = 0;

    bool operator==(const BiasEntry&) const = default;
};

class BiasWeights {
public:
    // Entries must have unique ids; they are kept sorted by id.
    explicit BiasWeights(std::vector<BiasEntry> entries = {});

    const BiasEntry* find(ExampleId id) const;
    const std::vector<BiasEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    int num_labels() const { return entries_.empty() ? 0 : static_cast<int>(entries_.front().p_b.size()); }

    bool operator==(const BiasWeights&) const = default;

private:
    std::vector<BiasEntry> entries_;
};

struct ShallowModel {
    Classifier model;
    std::vector<ExampleId> subset_ids;  // sorted
};

struct ShallowThresholds {
    double accuracy_low = 0.60;
    double accuracy_high = 0.70;
    double high_conf_prob = 0.9;
    double high_conf_min_fraction = 0.90;
    // Degenerate when unseen accuracy is within this margin of 1/K.
    double degenerate_margin = 0.02;
};

struct ShallowDiagnosis {
    double unseen_accuracy = 0.0;
    double high_conf_fraction = 0.0;
    double mean_confidence = 0.0;
    bool degenerate = false;
    bool pass = false;
    std::size_t unseen_count = 0;
    ConfidenceHistogram histogram;
};

ShallowModel train_shallow(const Dataset& train, const ShallowConfig& cfg);

// p_b for every example not in subset_ids (or for all examples when
// include_subset is set).
BiasWeights compute_bias_weights(const Classifier& shallow, const Dataset& train,
                                 const std::vector<ExampleId>& subset_ids, bool include_subset = false);

ShallowDiagnosis validate_shallow(const Classifier& shallow, const Dataset& unseen,
                                  const ShallowThresholds& thresholds = {});

// Band centred on what a bias-only predictor (guessing uniformly on clean
// examples) is expected to score on the given data.
ShallowThresholds bias_only_band(const Dataset& data, double half_width = 0.10, ShallowThresholds base = {});

struct GridCell {
    int sample_size = 0;
    int epochs = 0;
    ShallowDiagnosis diagnosis;
};

struct GridReport {
    std::vector<GridCell> cells;  // ordered by (sample_size, epochs)
    std::optional<std::size_t> best;
    bool passed() const { return best.has_value(); }
};

// Passing cell with the smallest subset, then fewest epochs.
std::optional<std::size_t> select_grid_cell(const std::vector<GridCell>& cells);

GridReport grid_search_shallow(const Dataset& train, std::vector<int> sizes, std::vector<int> epoch_counts,
                               const ShallowConfig& base, const ShallowThresholds& thresholds = {}, int jobs = 1);

struct StabilityRun {
    std::uint64_t seed = 0;
    double overall = 0.0;
    double easy = 0.0;
    double hard = 0.0;
    std::size_t easy_count = 0;
    std::size_t hard_count = 0;
    bool degenerate = false;
};

std::vector<StabilityRun> stability_study(const Dataset& train, const ShallowConfig& cfg, int n_runs,
                                          const Dataset& eval, int jobs = 1);

}  // namespace debias
