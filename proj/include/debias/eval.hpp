#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "debias/eval_types.hpp"
#include "debias/model.hpp"
#include "debias/shallow_id.hpp"
#include "debias/synthgen.hpp"
#include "debias/trainer.hpp"

namespace debias {

using Predictor = std::function<ProbVector(const Example&)>;

Predictor classifier_predictor(const Classifier& model);
// One-hot on the decoded bias code, uniform when the oracle abstains.
Predictor bias_oracle_predictor(int num_labels);

// Lowest index wins ties.
int argmax(const ProbVector& p);

// Throws DataError on an empty split.
double accuracy(const Predictor& model, const Dataset& split);

// limit > 0 evaluates only the first `limit` examples of each split.
SplitAccuracy evaluate_suite(const Predictor& model, const EvalSuite& suite, std::size_t limit = 0);

ConfidenceHistogram confidence_histogram(const Predictor& model, const Dataset& split, double bin_width = 0.05);

struct Partition {
    std::vector<ExampleId> easy;
    std::vector<ExampleId> hard;
};

using OraclePredict = std::function<std::optional<int>(const Example&)>;

// Easy: oracle predicts the gold label. Hard: wrong or abstained.
Partition easy_hard_partition(const Dataset& split, const OraclePredict& oracle = bias_oracle_predict);

// Everything one end-to-end run needs.
struct ExperimentConfig {
    SynthConfig data;
    ShallowConfig shallow;
    TrainConfig train;
    // Main training excludes the shallow model's own subset.
    bool exclude_shallow_subset = true;
};

// Data for one seed: biased training set plus the three eval splits.
struct ExperimentData {
    Dataset train;
    EvalSuite eval;
};

// One run seed fans out to the data, shallow and training seeds.
ExperimentConfig with_run_seed(const ExperimentConfig& base, std::uint64_t seed);

ExperimentData make_experiment_data(const SynthConfig& cfg);

// Shallow model, bias weights and (for conf_reg) teacher outputs for one seed.
struct DebiasInputs {
    ShallowModel shallow;
    BiasWeights weights;
    Dataset main_train;  // train minus the shallow subset (unless disabled)
    std::optional<TeacherOutputs> teacher;
};

DebiasInputs prepare_debias_inputs(const ExperimentData& data, const ExperimentConfig& cfg, bool need_teacher);

// Final split accuracies of one training run.
struct RunOutcome {
    std::uint64_t seed = 0;
    SplitAccuracy final_accuracy;
    TrainResult result;
};

RunOutcome run_baseline(const ExperimentData& data, const ExperimentConfig& cfg);
RunOutcome run_debiased(const ExperimentData& data, const DebiasInputs& inputs, const ExperimentConfig& cfg);

struct MeanSpread {
    double mean = 0.0;
    double spread = 0.0;  // sample standard deviation
};
MeanSpread mean_spread(const std::vector<double>& xs);

struct ProportionRow {
    double m = 0.0;
    std::vector<std::uint64_t> seeds;
    MeanSpread original;
    MeanSpread biased;
    MeanSpread anti_biased;
};

// Baseline training per (m, seed); mean final accuracies per m.
std::vector<ProportionRow> bias_proportion_study(const std::vector<double>& m_values, const ExperimentConfig& base,
                                                 const std::vector<std::uint64_t>& seeds, int jobs = 1);

struct SweepPoint {
    double a = 1.0;
    std::vector<std::uint64_t> seeds;
    MeanSpread original;
    MeanSpread anti_biased;
    std::vector<SplitAccuracy> per_seed;
};

struct SweepReport {
    DebiasMethod method = DebiasMethod::reweight;
    std::vector<SweepPoint> points;
    // Baseline reference on the same seeds.
    MeanSpread baseline_original;
    MeanSpread baseline_anti_biased;
};

// One debiased run per (a, seed); annealing enabled at every point.
// Requires at least 3 seeds.
SweepReport anneal_sweep(const std::vector<double>& a_values, DebiasMethod method, const ExperimentConfig& base,
                         const std::vector<std::uint64_t>& seeds, int jobs = 1);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace debias
