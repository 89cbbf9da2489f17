#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "debias/rng.hpp"

using namespace debias;

TEST_SUITE("rng") {

TEST_CASE("named streams are distinct and reproducible") {
    CHECK(derive_seed(1, "init") == derive_seed(1, "init"));
    CHECK(derive_seed(1, "init") != derive_seed(1, "shuffle"));
    CHECK(derive_seed(1, "init") != derive_seed(2, "init"));
    Rng a = Rng::stream(5, "noise"), b = Rng::stream(5, "noise");
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("below stays in range and covers it") {
    Rng r(3);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = r.below(7);
        REQUIRE(v < 7);
        ++hits[v];
    }
    for (int h : hits) CHECK(h > 850);
    CHECK(r.below(1) == 0);
}

TEST_CASE("uniform is in [0,1)") {
    Rng r(11);
    double lo = 1, hi = 0;
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo >= 0.0);
    CHECK(hi < 1.0);
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("shuffle is a permutation") {
    Rng r(9);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;
    r.shuffle(std::span<int>(w));
    CHECK(w != v);
    std::sort(w.begin(), w.end());
    CHECK(w == v);
}

}
