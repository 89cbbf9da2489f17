#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "debias/model.hpp"
#include "debias/objectives.hpp"
#include "debias/shallow_id.hpp"
#include "debias/synthgen.hpp"

namespace debias {

struct TrainConfig {
    DebiasMethod method = DebiasMethod::baseline_ce;
    int epochs = 5;
    int batch_size = 32;
    double learning_rate = 0.2;
    OptimizerKind optimizer = OptimizerKind::sgd;
    // total_steps is filled in by the trainer from epochs and batch size.
    AnnealSchedule anneal;
    int eval_every = 250;
    // 0 evaluates full splits; otherwise the first eval_limit examples.
    int eval_limit = 0;
    std::uint64_t seed = 1;
    int hidden = 64;
    int feature_dim = 2048;
    // Constant per-example weight for baseline_ce.
    double example_weight = 1.0;
    // conf_reg teacher trains longer than the student; 0 means `epochs`.
    int teacher_epochs = 8;

    void validate() const;
};

struct SplitAccuracy {
    double original = 0.0;
    double biased = 0.0;
    double anti_biased = 0.0;

    bool operator==(const SplitAccuracy&) const = default;
};

struct MetricsRecord {
    std::int64_t step = 0;
    double mean_loss = 0.0;
    // p0, p25, p50, p75, p100 of per-example gold-label cross entropy.
    std::array<double, 5> loss_percentiles{};
    double alpha = 1.0;
    std::int64_t clamped = 0;
    std::optional<SplitAccuracy> accuracy;

    bool operator==(const MetricsRecord&) const = default;
};

struct MetricsLog {
    std::vector<MetricsRecord> records;
    // "full" or "subsample:<n>"
    std::string eval_mode = "full";
};

// Per-example teacher outputs, keyed by example id.
using TeacherOutputs = std::unordered_map<ExampleId, ProbVector>;

struct TrainResult {
    Classifier model;
    MetricsLog log;
};

// Total optimizer steps for a dataset of n examples (last partial batch kept).
std::int64_t planned_steps(std::size_t n, const TrainConfig& cfg);

// Nearest-rank percentiles (0, 25, 50, 75, 100). Throws DataError when empty.
std::array<double, 5> loss_percentiles(std::vector<double> losses);

// Standard cross entropy training; the model is frozen afterwards.
Classifier train_teacher(const Dataset& train, const TrainConfig& cfg);

TeacherOutputs teacher_outputs(const Classifier& teacher, const Dataset& data);

// Main training loop. weights may be null for baseline_ce; teacher must be
// present iff method is conf_reg; eval may be null (no trajectory).
TrainResult train_main(const Dataset& train, const BiasWeights* weights, const TrainConfig& cfg,
                       const EvalSuite* eval = nullptr, const TeacherOutputs* teacher = nullptr);

}  // namespace debias
