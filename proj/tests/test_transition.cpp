#include <catch2/catch_amalgamated.hpp>

#include "lifecal/transition.hpp"
#include "support/oracles.hpp"

using namespace lifecal;
using Catch::Approx;

TEST_CASE("empty product is the identity", "[actuarial]") {
    Rng rng(1);
    const TransitionSequence seq = oracle::random_sequence(rng, 5);
    const TransitionMatrix m = multi_step(seq, 2, 0);
    CHECK(m.p[0][0] == 1.0);
    CHECK(m.p[0][1] == 0.0);
    CHECK(m.p[1][0] == 0.0);
    CHECK(m.p[1][1] == 1.0);
}

TEST_CASE("two-step product of a constant chain", "[actuarial]") {
    const TransitionMatrix pi = TransitionMatrix::from_death_prob(0.1);
    const TransitionSequence seq{pi, pi};
    const TransitionMatrix m = multi_step(seq, 0, 2);
    CHECK(m.p[0][0] == Approx(0.81).epsilon(1e-15));
    CHECK(m.p[0][1] == Approx(0.19).epsilon(1e-15));
    CHECK(m.p[1][0] == 0.0);
    CHECK(m.p[1][1] == 1.0);
}

TEST_CASE("products of valid matrices stay row-stochastic", "[actuarial]") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const int len = static_cast<int>(rng.uniform_int(1, 40));
        const TransitionSequence seq = oracle::random_sequence(rng, len, 0.4);
        const TransitionMatrix m = multi_step(seq, 0, static_cast<std::size_t>(len));
        CHECK(std::abs(m.p[0][0] + m.p[0][1] - 1.0) <= 1e-10);
        CHECK(m.p[0][0] >= 0.0);
        CHECK(m.p[0][1] >= 0.0);
        CHECK(m.p[1][0] == 0.0); // absorbing row stays exact
        CHECK(m.p[1][1] == 1.0);
        CHECK(m.valid(1e-10));
    }
}

TEST_CASE("Chapman-Kolmogorov composition", "[actuarial]") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = static_cast<int>(rng.uniform_int(1, 30));
        const int j = static_cast<int>(rng.uniform_int(0, k));
        const TransitionSequence seq = oracle::random_sequence(rng, k, 0.4);
        const TransitionMatrix whole = multi_step(seq, 0, static_cast<std::size_t>(k));
        const TransitionMatrix split = multi_step(seq, 0, static_cast<std::size_t>(j)) *
                                       multi_step(seq, static_cast<std::size_t>(j),
                                                  static_cast<std::size_t>(k - j));
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                CHECK(whole.p[a][b] == Approx(split.p[a][b]).margin(1e-12));
    }
}

TEST_CASE("multi_step rejects out-of-range windows", "[actuarial]") {
    Rng rng(9);
    const TransitionSequence seq = oracle::random_sequence(rng, 4);
    CHECK_THROWS_AS(multi_step(seq, 3, 2), std::out_of_range);
    CHECK_THROWS_AS(multi_step(seq, 5, 0), std::out_of_range);
}

TEST_CASE("matrix validity checks", "[actuarial]") {
    CHECK(TransitionMatrix::from_death_prob(0.3).valid());
    TransitionMatrix bad = TransitionMatrix::from_death_prob(0.3);
    bad.p[0][0] = 0.75;
    CHECK_FALSE(bad.valid());
    bad = TransitionMatrix::from_death_prob(0.3);
    bad.p[1][0] = 1e-9;
    CHECK_FALSE(bad.valid());
}
