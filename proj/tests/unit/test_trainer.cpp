#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "debias/errors.hpp"
#include "debias/eval.hpp"
#include "helpers.hpp"

using namespace debias;

namespace {

BiasWeights uniform_weights(const Dataset& d) {
    std::vector<BiasEntry> entries;
    for (const auto& ex : d.examples) entries.push_back({ex.id, uniform_probs(d.num_labels), 1.0 / d.num_labels, 0});
    return BiasWeights(std::move(entries));
}

TrainConfig quick_train() {
    TrainConfig t;
    t.epochs = 1;
    t.seed = 9;
    t.eval_every = 20;
    return t;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("nearest-rank percentiles") {
    CHECK(loss_percentiles({5.0}) == std::array<double, 5>{5, 5, 5, 5, 5});
    CHECK(loss_percentiles({4, 1, 3, 2}) == std::array<double, 5>{1, 1, 2, 3, 4});
    CHECK(loss_percentiles({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}) == std::array<double, 5>{1, 3, 5, 8, 10});
    CHECK_THROWS_AS(loss_percentiles({}), DataError);

    // Against a plain sort-and-index oracle on random batches.
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> xs(1 + rng.below(64));
        for (double& x : xs) x = rng.uniform(0, 5);
        std::vector<double> sorted = xs;
        std::sort(sorted.begin(), sorted.end());
        const auto p = loss_percentiles(xs);
        const double n = static_cast<double>(xs.size());
        const int ranks[5] = {0, 25, 50, 75, 100};
        for (int i = 0; i < 5; ++i) {
            std::size_t r = static_cast<std::size_t>(std::ceil(ranks[i] * n / 100.0));
            if (r == 0) r = 1;
            CHECK(p[i] == sorted[r - 1]);
        }
        CHECK(std::is_sorted(p.begin(), p.end()));
    }
}

TEST_CASE("planned steps keep the last partial batch") {
    TrainConfig t;
    t.epochs = 2;
    t.batch_size = 32;
    CHECK(planned_steps(64, t) == 4);
    CHECK(planned_steps(65, t) == 6);
}

TEST_CASE("uniform p_b reweighting equals baseline with weight 1 - 1/K") {
    const ExperimentData data = make_experiment_data(testutil::small_data());
    TrainConfig rw = quick_train();
    rw.method = DebiasMethod::reweight;
    const BiasWeights w = uniform_weights(data.train);
    const TrainResult a = train_main(data.train, &w, rw);
    TrainConfig base = quick_train();
    base.example_weight = 1.0 - 1.0 / 3;
    const TrainResult b = train_main(data.train, nullptr, base);
    const auto pa = a.model.params.all(), pb = b.model.params.all();
    double worst = 0;
    for (std::size_t i = 0; i < pa.size(); ++i) worst = std::max(worst, std::abs(pa[i] - pb[i]));
    CHECK(worst < 1e-12);
}

TEST_CASE("alpha is logged per step and moves affinely from 1 to a") {
    const ExperimentData data = make_experiment_data(testutil::small_data());
    TrainConfig c = quick_train();
    c.method = DebiasMethod::poe;
    c.anneal = AnnealSchedule{0.2, 1, true};
    const BiasWeights w = uniform_weights(data.train);
    const TrainResult r = train_main(data.train, &w, c);
    const auto& recs = r.log.records;
    REQUIRE(recs.size() == static_cast<std::size_t>(planned_steps(data.train.size(), c)));
    CHECK(recs.front().alpha == 1.0);
    CHECK(recs.back().alpha == doctest::Approx(0.2).epsilon(1e-12));
    const double slope = recs[1].alpha - recs[0].alpha;
    for (std::size_t i = 1; i < recs.size(); ++i) {
        CHECK(recs[i].alpha <= recs[i - 1].alpha);
        CHECK(recs[i].alpha - recs[i - 1].alpha == doctest::Approx(slope).epsilon(1e-6));
        CHECK(recs[i].step == recs[i - 1].step + 1);
    }

    c.anneal.enabled = false;
    for (const auto& rec : train_main(data.train, &w, c).log.records) CHECK(rec.alpha == 1.0);
}

TEST_CASE("trajectory records evaluation every eval_every steps and at the end") {
    const ExperimentData data = make_experiment_data(testutil::small_data());
    TrainConfig c = quick_train();
    c.eval_limit = 100;
    const TrainResult r = train_main(data.train, nullptr, c, &data.eval);
    CHECK(r.log.eval_mode == "subsample:100");
    for (const auto& rec : r.log.records) {
        const bool expect = rec.step % 20 == 0 || rec.step == static_cast<std::int64_t>(r.log.records.size());
        CHECK(rec.accuracy.has_value() == expect);
    }
}

TEST_CASE("training is deterministic in the seed") {
    const ExperimentData data = make_experiment_data(testutil::small_data());
    const TrainResult a = train_main(data.train, nullptr, quick_train());
    const TrainResult b = train_main(data.train, nullptr, quick_train());
    CHECK(a.model.params == b.model.params);
    CHECK(a.log.records == b.log.records);
    TrainConfig other = quick_train();
    other.seed = 10;
    CHECK_FALSE(train_main(data.train, nullptr, other).model.params == a.model.params);
}

TEST_CASE("teacher learns the clean task") {
    SynthConfig c = testutil::small_data();
    c.train_size = 20000;
    const Dataset clean = gen_dataset(c);
    TrainConfig t = quick_train();  // teacher_epochs keeps its default
    const Classifier teacher = train_teacher(clean, t);
    SynthConfig test_cfg = c;
    test_cfg.seed = 99;
    test_cfg.train_size = 1000;
    CHECK(accuracy(classifier_predictor(teacher), gen_dataset(test_cfg)) > 0.9);
    const TeacherOutputs out = teacher_outputs(teacher, clean);
    CHECK(out.size() == clean.size());
}

TEST_CASE("argument errors") {
    const ExperimentData data = make_experiment_data(testutil::small_data());
    TrainConfig c = quick_train();
    c.method = DebiasMethod::reweight;
    CHECK_THROWS_AS(train_main(data.train, nullptr, c), ConfigError);

    Dataset partial_ds = data.train;
    partial_ds.examples.resize(10);
    BiasWeights partial = uniform_weights(partial_ds);
    Dataset sub = data.train;
    sub.examples.resize(20);
    const std::string missing_id = "id " + std::to_string(sub.examples[10].id);
    CHECK_THROWS_WITH_AS(train_main(sub, &partial, c), doctest::Contains(missing_id.c_str()), DataError);

    c.method = DebiasMethod::conf_reg;
    const BiasWeights w = uniform_weights(data.train);
    CHECK_THROWS_AS(train_main(data.train, &w, c), ConfigError);

    TrainConfig zero = quick_train();
    zero.epochs = 0;
    CHECK_THROWS_AS(train_main(data.train, nullptr, zero), ConfigError);

    Dataset empty = data.train;
    empty.examples.clear();
    CHECK_THROWS_AS(train_main(empty, nullptr, quick_train()), DataError);
}

}
