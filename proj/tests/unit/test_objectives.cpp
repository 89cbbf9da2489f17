#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "debias/errors.hpp"
#include "debias/objectives.hpp"

using namespace debias;

namespace {

double entropy(const ProbVector& p) {
    double h = 0;
    for (double x : p)
        if (x > 0) h -= x * std::log(x);
    return h;
}

ProbVector random_simplex(Rng& rng, int k) {
    ProbVector p(static_cast<std::size_t>(k));
    double s = 0;
    for (double& x : p) s += (x = rng.uniform(0.01, 1.0));
    for (double& x : p) x /= s;
    return p;
}

// Frozen from tests/oracles/hand_arithmetic.py (mpmath, 50 digits).
constexpr double kPoeLoss = 0.11778303565638346;
constexpr double kScaled[3] = {0.5228793830078697, 0.27949078654617093, 0.19762983044595936};
constexpr double kConfregLoss = 1.0586589945564333;
constexpr double kAnnealed[3] = {0.585786437626905, 0.20710678118654752, 0.20710678118654752};
constexpr double kReweightLoss = 0.13862943611198905;

}  // namespace

TEST_SUITE("objectives") {

TEST_CASE("worked examples match the independent oracle") {
    const ProbVector p_d{0.5, 0.3, 0.2}, p_b{0.8, 0.1, 0.1};
    CHECK(loss_poe(p_d, p_b, 0) == doctest::Approx(kPoeLoss).epsilon(1e-12));
    const ProbVector s = scale_teacher({0.7, 0.2, 0.1}, 0.5);
    for (int j = 0; j < 3; ++j) CHECK(s[j] == doctest::Approx(kScaled[j]).epsilon(1e-12));
    CHECK(loss_confreg({0.6, 0.3, 0.1}, {0.7, 0.2, 0.1}, 0.5) == doctest::Approx(kConfregLoss).epsilon(1e-12));
    const ProbVector a = anneal_probs(p_b, 0.5);
    for (int j = 0; j < 3; ++j) CHECK(a[j] == doctest::Approx(kAnnealed[j]).epsilon(1e-12));
    CHECK(loss_reweight({0.5, 0.25, 0.25}, 0, 0.8) == doctest::Approx(kReweightLoss).epsilon(1e-12));
    AnnealSchedule sched{0.8, 1000, true};
    CHECK(anneal_alpha(500, sched) == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("neutral points") {
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        const int k = 2 + i % 4;
        const ProbVector p_d = random_simplex(rng, k);
        const int y = i % k;
        const double ce = -std::log(p_d[static_cast<std::size_t>(y)]);
        CHECK(std::abs(loss_poe(p_d, uniform_probs(k), y) - ce) < 1e-9);
        CHECK(loss_reweight(p_d, y, 0.0) == ce);
        CHECK(loss_reweight(p_d, y, 1.0) == 0.0);
        const ProbVector p_t = random_simplex(rng, k);
        CHECK(std::abs(loss_confreg(p_d, p_t, 0.0) - cross_entropy(p_d, p_t)) < 1e-12);
    }
}

TEST_CASE("confident shallow model flattens the distillation target") {
    const ProbVector p_t{0.7, 0.2, 0.1};
    const ProbVector s = scale_teacher(p_t, 1.0);
    for (double x : s) CHECK(x == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(entropy(scale_teacher(p_t, 0.3)) > entropy(p_t));
    CHECK_THROWS_AS(scale_teacher(p_t, 1.5), ConfigError);
}

TEST_CASE("schedule is affine from 1 down to a") {
    AnnealSchedule sched{0.4, 200, true};
    CHECK(anneal_alpha(0, sched) == 1.0);
    CHECK(anneal_alpha(200, sched) == doctest::Approx(0.4).epsilon(1e-15));
    for (std::int64_t t = 1; t < 200; ++t) {
        const double d1 = anneal_alpha(t, sched) - anneal_alpha(t - 1, sched);
        CHECK(d1 == doctest::Approx(-0.6 / 200).epsilon(1e-9));
    }
    CHECK(anneal_alpha(500, sched) == 0.4);
    sched.enabled = false;
    CHECK(anneal_alpha(100, sched) == 1.0);
    CHECK_THROWS_AS((AnnealSchedule{1.2, 10, true}.validate()), ConfigError);
    CHECK_THROWS_AS((AnnealSchedule{0.5, 0, true}.validate()), ConfigError);
}

TEST_CASE("annealed probabilities: endpoints, ranking and entropy") {
    Rng rng(12);
    for (int k : {2, 3, 5}) {
        for (int i = 0; i < 100; ++i) {
            const ProbVector p = random_simplex(rng, k);
            CHECK(anneal_probs(p, 1.0) == p);
            for (double x : anneal_probs(p, 0.0)) CHECK(std::abs(x - 1.0 / k) < 1e-9);
            const double alpha = rng.uniform(0.01, 1.0);
            const ProbVector q = anneal_probs(p, alpha);
            CHECK(std::accumulate(q.begin(), q.end(), 0.0) == doctest::Approx(1.0));
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b)
                    if (p[a] > p[b]) CHECK(q[a] > q[b]);
            double prev = entropy(anneal_probs(p, 0.0));
            for (double al = 0.1; al <= 1.0001; al += 0.1) {
                const double h = entropy(anneal_probs(p, std::min(al, 1.0)));
                CHECK(h <= prev + 1e-12);
                prev = h;
            }
        }
    }
}

TEST_CASE("loss specs") {
    const LossSpec rw = reweight_spec(1, 3, 0.25);
    CHECK(rw.weight == 0.75);
    CHECK(rw.target == ProbVector{0, 1, 0});
    const LossSpec poe = poe_spec(0, {0.5, 0.25, 0.25});
    CHECK(poe.logit_offset[0] == doctest::Approx(std::log(0.5)));
    CHECK_THROWS_AS(reweight_spec(0, 3, 1.5), DataError);
    CHECK_THROWS_AS(one_hot(3, 3), DataError);
    CHECK_THROWS_AS(confreg_spec({}, 0.5), ConfigError);
}

TEST_CASE("teacher scaling is swappable") {
    int calls = 0;
    TeacherScaler flat = [&](const ProbVector& p, double) {
        ++calls;
        return uniform_probs(static_cast<int>(p.size()));
    };
    const double l = loss_confreg({0.5, 0.5}, {0.9, 0.1}, 0.2, flat);
    CHECK(calls == 1);
    CHECK(l == doctest::Approx(std::log(2.0)));
}

TEST_CASE("method names") {
    for (DebiasMethod m : {DebiasMethod::baseline_ce, DebiasMethod::reweight, DebiasMethod::poe, DebiasMethod::conf_reg})
        CHECK(parse_method(to_string(m)) == m);
    CHECK_THROWS_AS(parse_method("focal"), ConfigError);
}

}
