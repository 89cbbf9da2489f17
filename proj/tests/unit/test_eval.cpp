#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "debias/errors.hpp"
#include "debias/eval.hpp"
#include "helpers.hpp"

using namespace debias;

namespace {

Dataset labelled(std::vector<int> labels) {
    Dataset d;
    d.num_labels = 3;
    d.vocab_size = 400;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        Example ex;
        ex.id = static_cast<ExampleId>(i);
        ex.label = labels[i];
        ex.segment_a = {static_cast<TokenId>(i % 3)};
        d.examples.push_back(ex);
    }
    return d;
}

// Predicts segment_a[0] with confidence 0.8.
ProbVector fixed_predict(const Example& ex) {
    ProbVector p(3, 0.1);
    p[static_cast<std::size_t>(ex.segment_a[0])] = 0.8;
    return p;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("accuracy and argmax") {
    CHECK(argmax({0.2, 0.5, 0.3}) == 1);
    CHECK(argmax({0.4, 0.4, 0.2}) == 0);
    const Dataset d = labelled({0, 1, 0, 0, 1, 2});  // predictions 0,1,2,0,1,2
    CHECK(accuracy(fixed_predict, d) == doctest::Approx(5.0 / 6));
    Dataset shuffled = d;
    std::reverse(shuffled.examples.begin(), shuffled.examples.end());
    CHECK(accuracy(fixed_predict, shuffled) == accuracy(fixed_predict, d));
    CHECK_THROWS_AS(accuracy(fixed_predict, labelled({})), DataError);
}

TEST_CASE("histogram conserves counts and starts at chance") {
    const ExperimentData data = make_experiment_data(testutil::small_data());
    TrainConfig t;
    t.epochs = 1;
    const Predictor p = classifier_predictor(train_main(data.train, nullptr, t).model);
    const ConfidenceHistogram h = confidence_histogram(p, data.eval.original);
    REQUIRE(h.bins.size() == 14);
    CHECK(h.bins.front().lo == doctest::Approx(1.0 / 3));
    CHECK(h.bins.back().hi == 1.0);
    std::int64_t count = 0, correct = 0;
    for (const auto& b : h.bins) {
        count += b.count;
        correct += b.correct;
        CHECK(b.correct <= b.count);
    }
    CHECK(count == static_cast<std::int64_t>(data.eval.original.size()));
    CHECK(correct == h.total_correct);
    CHECK(static_cast<double>(h.total_correct) / h.total == doctest::Approx(accuracy(p, data.eval.original)));
    CHECK(h.mean_confidence >= 1.0 / 3);
    CHECK_THROWS_AS(confidence_histogram(p, data.eval.original, 0.0), ConfigError);
}

TEST_CASE("easy/hard partition follows the bias oracle") {
    SynthConfig c = testutil::small_data();
    c.test_size = 2000;
    const Dataset held = make_heldout_split(c);
    const Partition part = easy_hard_partition(held);
    CHECK(part.easy.size() + part.hard.size() == held.size());
    const TagCounts tags = count_tags(held);
    CHECK(static_cast<std::int64_t>(part.easy.size()) == tags.biased);
    const double manipulated = static_cast<double>(tags.biased + tags.anti_biased);
    CHECK(static_cast<double>(part.easy.size()) / manipulated == doctest::Approx(0.9).epsilon(0.02));

    c.bias_proportion = 0.0;
    CHECK(easy_hard_partition(make_heldout_split(c)).easy.empty());

    const EvalSuite suite = make_eval_suite(testutil::small_data());
    CHECK(easy_hard_partition(suite.biased).hard.empty());
    CHECK(easy_hard_partition(suite.anti_biased).easy.empty());
}

TEST_CASE("spearman and mean/spread") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(spearman({1, 2, 3}, {1, 1, 2}) == doctest::Approx(std::sqrt(3.0) / 2));
    CHECK(spearman({1, 2}, {3, 3}) == 0.0);
    CHECK_THROWS_AS(spearman({1}, {1}), DataError);
    const MeanSpread ms = mean_spread({1, 2, 3, 4});
    CHECK(ms.mean == 2.5);
    CHECK(ms.spread == doctest::Approx(std::sqrt(5.0 / 3)));
    CHECK(mean_spread({7}).spread == 0.0);
}

TEST_CASE("run seed fans out to distinct streams") {
    const ExperimentConfig c = with_run_seed(ExperimentConfig{}, 42);
    CHECK(c.data.seed == 42);
    CHECK(c.shallow.seed != c.train.seed);
    CHECK(with_run_seed(ExperimentConfig{}, 43).train.seed != c.train.seed);
}

TEST_CASE("sweep at a = 1 reproduces the plain debiased run") {
    const ExperimentConfig base = testutil::small_experiment(1);
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    const SweepReport sweep = anneal_sweep({1.0}, DebiasMethod::reweight, base, seeds, 2);
    REQUIRE(sweep.points.size() == 1);
    ExperimentConfig cfg = with_run_seed(base, 2);
    cfg.train.method = DebiasMethod::reweight;
    const ExperimentData data = make_experiment_data(cfg.data);
    const DebiasInputs in = prepare_debias_inputs(data, cfg, false);
    CHECK(run_debiased(data, in, cfg).final_accuracy == sweep.points[0].per_seed[1]);

    CHECK_THROWS_AS(anneal_sweep({1.0}, DebiasMethod::reweight, base, {1, 2}), ConfigError);
    CHECK_THROWS_AS(anneal_sweep({1.0}, DebiasMethod::baseline_ce, base, seeds), ConfigError);
    CHECK_THROWS_AS(anneal_sweep({1.5}, DebiasMethod::poe, base, seeds), ConfigError);
}

TEST_CASE("proportion study returns one row per m") {
    const ExperimentConfig base = testutil::small_experiment(1);
    const auto rows = bias_proportion_study({0.6, 0.9}, base, {1, 2}, 2);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].m == 0.6);
    CHECK(rows[1].seeds.size() == 2);
    CHECK(rows[1].biased.mean > rows[1].anti_biased.mean);
    CHECK_THROWS_AS(bias_proportion_study({1.2}, base, {1}), ConfigError);
    CHECK_THROWS_AS(bias_proportion_study({0.9}, base, {}), ConfigError);
}

TEST_CASE("excluding the shallow subset is switchable") {
    ExperimentConfig cfg = testutil::small_experiment(4);
    const ExperimentData data = make_experiment_data(cfg.data);
    const DebiasInputs ex = prepare_debias_inputs(data, cfg, false);
    CHECK(ex.main_train.size() == data.train.size() - static_cast<std::size_t>(cfg.shallow.sample_size));
    CHECK(ex.weights.size() == ex.main_train.size());
    cfg.exclude_shallow_subset = false;
    const DebiasInputs all = prepare_debias_inputs(data, cfg, true);
    CHECK(all.main_train.size() == data.train.size());
    CHECK(all.weights.size() == data.train.size());
    REQUIRE(all.teacher.has_value());
    CHECK(all.teacher->size() == data.train.size());
}

}
