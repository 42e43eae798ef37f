#include <catch2/catch_amalgamated.hpp>

#include "lifecal/cashflow.hpp"
#include "support/oracles.hpp"

using namespace lifecal;
using Catch::Approx;

namespace {

Contract reference_contract() {
    Contract c;
    c.a0 = 35;
    c.n = 20;
    c.t = 10;
    c.S = 100000.0;
    c.P = 1200.0;
    c.m = 12;
    return c;
}

} // namespace

TEST_CASE("cash flow cells at contract start", "[actuarial]") {
    const Contract c = reference_contract();
    const ExpenseStructure e;

    // P/m - t*alpha*P - beta*P/m - gamma1*S/m = 100 - 300 - 3 - 8.333...
    const auto cf = cash_flow(c, e, 0);
    CHECK(cf[0][0] == Approx(-211.33333333333334).epsilon(1e-14));
    CHECK(cf[0][1] == 0.0); // death cell carries the k>0 indicator
    CHECK(cf[1][0] == 0.0);
    CHECK(cf[1][1] == 0.0);
}

TEST_CASE("cash flow cells after premium duration", "[actuarial]") {
    const Contract c = reference_contract();
    const ExpenseStructure e;

    // k=150 is 12.5 years in: past t=10, before n=20
    const auto cf = cash_flow(c, e, 150);
    CHECK(cf[0][0] == Approx(-8.333333333333334).epsilon(1e-14));
    CHECK(cf[0][1] == Approx(-100008.33333333333).epsilon(1e-14));
}

TEST_CASE("cash flow rows from the dead state are zero", "[actuarial]") {
    Rng rng(101);
    const ExpenseStructure e;
    for (int trial = 0; trial < 50; ++trial) {
        Contract c = oracle::random_contract(rng, true);
        const int k = static_cast<int>(rng.uniform_int(0, c.iterations()));
        const auto cf = cash_flow(c, e, k);
        CHECK(cf[1][0] == 0.0);
        CHECK(cf[1][1] == 0.0);
    }
}

TEST_CASE("cash flow matches the indicator oracle on random contracts", "[actuarial]") {
    Rng rng(102);
    const ExpenseStructure e;
    for (int trial = 0; trial < 200; ++trial) {
        Contract c = oracle::random_contract(rng, true);
        const int k = static_cast<int>(rng.uniform_int(0, c.iterations()));
        const auto got = cash_flow(c, e, k);
        const auto want = oracle::cash_flow(c, e, k);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                CHECK(got[i][j] == Approx(want[i][j]).margin(1e-9));
    }
}

TEST_CASE("cash flow rejects out-of-range iterations", "[actuarial]") {
    const Contract c = reference_contract();
    const ExpenseStructure e;
    CHECK_THROWS_AS(cash_flow(c, e, -1), std::out_of_range);
    CHECK_THROWS_AS(cash_flow(c, e, c.iterations() + 1), std::out_of_range);
}

TEST_CASE("discounting leaves k=0 untouched", "[actuarial]") {
    const Contract c = reference_contract();
    const ExpenseStructure e;
    const auto y = discounted_cash_flows(c, e, DiscountFactor(1.0 / 1.0125));
    const auto cf = cash_flow(c, e, 0);
    CHECK(y(0, 0, 0) == cf[0][0]); // v^0 = 1
    CHECK(y(0, 1, 0) == 0.0);
}

TEST_CASE("unit discount factor reproduces raw cash flows", "[actuarial]") {
    const Contract c = reference_contract();
    const ExpenseStructure e;
    const auto y = discounted_cash_flows(c, e, DiscountFactor(1.0));
    for (int k = 0; k <= c.iterations(); ++k) {
        const auto cf = cash_flow(c, e, k);
        CHECK(y(0, 0, k) == Approx(cf[0][0]).margin(1e-12));
        CHECK(y(0, 1, k) == Approx(cf[0][1]).margin(1e-12));
    }
}

TEST_CASE("one year of monthly discounting applies v once", "[actuarial]") {
    const Contract c = reference_contract();
    const ExpenseStructure e;
    const DiscountFactor v(1.0 / 1.0125);
    const auto y = discounted_cash_flows(c, e, v);
    const auto cf = cash_flow(c, e, 12);
    CHECK(y(0, 0, 12) == Approx(cf[0][0] * v.v).epsilon(1e-14));
}

TEST_CASE("discounted tensor is structurally zero off the alive row", "[actuarial]") {
    const Contract c = reference_contract();
    const ExpenseStructure e;
    const auto y = discounted_cash_flows(c, e, DiscountFactor(1.0 / 1.0125));
    Rng rng(103);
    for (int trial = 0; trial < 20; ++trial) {
        const int k = static_cast<int>(rng.uniform_int(0, c.iterations()));
        CHECK(y(1, 0, k) == 0.0);
        CHECK(y(1, 1, k) == 0.0);
    }
    CHECK(y(0, 0, c.iterations() + 5) == 0.0); // beyond contract end
    CHECK(y.max_k() == c.iterations());
}
