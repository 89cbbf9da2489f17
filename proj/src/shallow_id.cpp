#include "debias/shallow_id.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "debias/errors.hpp"
#include "debias/eval.hpp"
#include "debias/parallel.hpp"
#include "debias/rng.hpp"
#include "debias/trainer.hpp"

namespace debias {

void ShallowConfig::validate(std::size_t dataset_size) const {
    if (sample_size <= 0) throw ConfigError("shallow.sample_size must be > 0");
    if (static_cast<std::size_t>(sample_size) >= dataset_size)
        throw ConfigError("shallow.sample_size " + std::to_string(sample_size) + " must be smaller than the dataset (" +
                          std::to_string(dataset_size) + " examples)");
    if (epochs < 1) throw ConfigError("shallow.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("shallow.batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("shallow.learning_rate must be >= 0");
}

BiasWeights::BiasWeights(std::vector<BiasEntry> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(), [](const BiasEntry& a, const BiasEntry& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < entries_.size(); ++i) {
        if (entries_[i].id == entries_[i - 1].id)
            throw DataError("duplicate bias weight entry for id " + std::to_string(entries_[i].id));
    }
}

const BiasEntry* BiasWeights::find(ExampleId id) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                               [](const BiasEntry& e, ExampleId v) { return e.id < v; });
    return it != entries_.end() && it->id == id ? &*it : nullptr;
}

ShallowModel train_shallow(const Dataset& train, const ShallowConfig& cfg) {
    cfg.validate(train.size());
    std::vector<ExampleId> ids;
    ids.reserve(train.size());
    for (const auto& ex : train.examples) ids.push_back(ex.id);
    Rng rng = Rng::stream(cfg.seed, "subsample");
    rng.shuffle(std::span<ExampleId>(ids));
    ids.resize(static_cast<std::size_t>(cfg.sample_size));
    std::sort(ids.begin(), ids.end());

    const Dataset subset = filter_by_ids(train, ids, false);
    TrainConfig tc;
    tc.method = DebiasMethod::baseline_ce;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.learning_rate = cfg.learning_rate;
    tc.optimizer = cfg.optimizer;
    tc.seed = derive_seed(cfg.seed, "shallow");
    tc.hidden = cfg.hidden;
    tc.feature_dim = cfg.feature_dim;
    return ShallowModel{train_main(subset, nullptr, tc).model, std::move(ids)};
}

BiasWeights compute_bias_weights(const Classifier& shallow, const Dataset& train,
                                 const std::vector<ExampleId>& subset_ids, bool include_subset) {
    if (shallow.num_labels() != train.num_labels)
        throw SchemaError("shallow model has " + std::to_string(shallow.num_labels()) + " labels, dataset has " +
                          std::to_string(train.num_labels));
    const Dataset target = include_subset ? train : filter_by_ids(train, subset_ids, true);
    std::vector<BiasEntry> entries;
    entries.reserve(target.size());
    for (const auto& ex : target.examples) {
        if (ex.label < 0 || ex.label >= train.num_labels)
            throw DataError("example " + std::to_string(ex.id) + " has no valid gold label");
        BiasEntry e;
        e.id = ex.id;
        e.p_b = shallow.predict(ex);
        e.p_b_correct = e.p_b[static_cast<std::size_t>(ex.label)];
        e.predicted = argmax(e.p_b);
        entries.push_back(std::move(e));
    }
    return BiasWeights(std::move(entries));
}

ShallowDiagnosis validate_shallow(const Classifier& shallow, const Dataset& unseen, const ShallowThresholds& th) {
    if (unseen.examples.empty()) throw DataError("validate_shallow: unseen set is empty");
    const Predictor predict = classifier_predictor(shallow);
    ShallowDiagnosis d;
    d.unseen_count = unseen.size();
    std::size_t correct = 0;
    std::size_t confident = 0;
    for (const auto& ex : unseen.examples) {
        const ProbVector p = predict(ex);
        const int pred = argmax(p);
        if (pred == ex.label) ++correct;
        if (p[static_cast<std::size_t>(pred)] > th.high_conf_prob) ++confident;
    }
    const double n = static_cast<double>(unseen.size());
    d.unseen_accuracy = static_cast<double>(correct) / n;
    d.high_conf_fraction = static_cast<double>(confident) / n;
    d.histogram = confidence_histogram(predict, unseen);
    d.mean_confidence = d.histogram.mean_confidence;
    d.degenerate = std::abs(d.unseen_accuracy - 1.0 / unseen.num_labels) <= th.degenerate_margin;
    d.pass = !d.degenerate && d.unseen_accuracy >= th.accuracy_low && d.unseen_accuracy <= th.accuracy_high &&
             d.high_conf_fraction >= th.high_conf_min_fraction;
    return d;
}

ShallowThresholds bias_only_band(const Dataset& data, double half_width, ShallowThresholds base) {
    if (data.examples.empty()) throw DataError("bias_only_band: empty dataset");
    const TagCounts c = count_tags(data);
    const double expected = (static_cast<double>(c.biased) + static_cast<double>(c.clean) / data.num_labels) /
                            static_cast<double>(data.size());
    base.accuracy_low = expected - half_width;
    base.accuracy_high = expected + half_width;
    return base;
}

std::optional<std::size_t> select_grid_cell(const std::vector<GridCell>& cells) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!cells[i].diagnosis.pass) continue;
        const auto key = [&](std::size_t j) { return std::pair(cells[j].sample_size, cells[j].epochs); };
        if (!best || key(i) < key(*best)) best = i;
    }
    return best;
}

GridReport grid_search_shallow(const Dataset& train, std::vector<int> sizes, std::vector<int> epoch_counts,
                               const ShallowConfig& base, const ShallowThresholds& thresholds, int jobs) {
    if (sizes.empty() || epoch_counts.empty()) throw ConfigError("grid search needs non-empty size and epoch grids");
    std::sort(sizes.begin(), sizes.end());
    std::sort(epoch_counts.begin(), epoch_counts.end());
    GridReport report;
    for (int s : sizes) {
        for (int e : epoch_counts) report.cells.push_back(GridCell{s, e, {}});
    }
    for (const auto& cell : report.cells) {
        ShallowConfig cfg = base;
        cfg.sample_size = cell.sample_size;
        cfg.epochs = cell.epochs;
        cfg.validate(train.size());
    }
    parallel_for(report.cells.size(), jobs, [&](std::size_t i) {
        GridCell& cell = report.cells[i];
        ShallowConfig cfg = base;
        cfg.sample_size = cell.sample_size;
        cfg.epochs = cell.epochs;
        const ShallowModel shallow = train_shallow(train, cfg);
        cell.diagnosis = validate_shallow(shallow.model, filter_by_ids(train, shallow.subset_ids, true), thresholds);
    });
    report.best = select_grid_cell(report.cells);
    return report;
}

std::vector<StabilityRun> stability_study(const Dataset& train, const ShallowConfig& cfg, int n_runs,
                                          const Dataset& eval, int jobs) {
    if (n_runs < 2) throw ConfigError("stability study needs n_runs >= 2");
    if (eval.examples.empty()) throw DataError("stability study: empty evaluation set");
    const Partition part = easy_hard_partition(eval);
    const Dataset easy = filter_by_ids(eval, part.easy, false);
    const Dataset hard = filter_by_ids(eval, part.hard, false);
    std::vector<StabilityRun> runs(static_cast<std::size_t>(n_runs));
    parallel_for(runs.size(), jobs, [&](std::size_t r) {
        ShallowConfig run_cfg = cfg;
        run_cfg.seed = cfg.seed + r;
        const ShallowModel shallow = train_shallow(train, run_cfg);
        const Predictor predict = classifier_predictor(shallow.model);
        StabilityRun& out = runs[r];
        out.seed = run_cfg.seed;
        out.overall = accuracy(predict, eval);
        out.easy = easy.examples.empty() ? 0.0 : accuracy(predict, easy);
        out.hard = hard.examples.empty() ? 0.0 : accuracy(predict, hard);
        out.easy_count = easy.size();
        out.hard_count = hard.size();
        out.degenerate = std::abs(out.overall - 1.0 / eval.num_labels) <= ShallowThresholds{}.degenerate_margin;
    });
    return runs;
}

}  // namespace debias
