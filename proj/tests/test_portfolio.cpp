#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "lifecal/portfolio.hpp"
#include "support/oracles.hpp"

using namespace lifecal;
using Catch::Approx;

namespace {

PortfolioConfig small_config(std::size_t n = 300, std::uint64_t seed = 42) {
    PortfolioConfig cfg;
    cfg.N = n;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("ground truth is neutral when all multipliers are off", "[portfolio]") {
    GroundTruthModel gt;
    gt.loading = 1.0;
    gt.smoker_mult = 1.0;
    gt.unisex = false;
    Contract c;
    c.a0 = 40;
    c.m = 1;
    c.n = c.t = 5;
    c.smoker = false;
    for (int k = 0; k < 5; ++k)
        CHECK(ground_truth_pi(gt, c, k).p01() == gt.table.q(40 + k, Gender::male));
}

TEST_CASE("smoker surcharge scales the death probability exactly", "[portfolio]") {
    GroundTruthModel gt; // defaults: loading 1.34, smoker 1.5, unisex
    Contract c;
    c.a0 = 35;
    c.m = 4;
    c.n = c.t = 10;
    Contract cs = c;
    cs.smoker = true;
    for (int k = 0; k < c.iterations(); k += 7) {
        const double ratio = ground_truth_pi(gt, cs, k).p01() / ground_truth_pi(gt, c, k).p01();
        CHECK(ratio == Approx(gt.smoker_mult).epsilon(1e-12));
    }
}

TEST_CASE("unisex blending removes the gender effect", "[portfolio]") {
    GroundTruthModel gt;
    gt.unisex = true;
    Contract cm, cf;
    cm.a0 = cf.a0 = 45;
    cm.m = cf.m = 2;
    cm.n = cm.t = cf.n = cf.t = 8;
    cm.gender = Gender::male;
    cf.gender = Gender::female;
    for (int k = 0; k < cm.iterations(); ++k)
        CHECK(ground_truth_pi(gt, cm, k).p01() == ground_truth_pi(gt, cf, k).p01());
}

TEST_CASE("ground truth depends on k only through the attained age", "[portfolio]") {
    GroundTruthModel gt;
    Contract c;
    c.a0 = 30;
    c.m = 12;
    c.n = c.t = 10;
    // within one year of age, all sub-annual steps share the matrix
    for (int k = 0; k < 12; ++k)
        CHECK(ground_truth_pi(gt, c, k).p01() == ground_truth_pi(gt, c, 0).p01());
    // same attained age from different (a0, k) combinations
    Contract c2 = c;
    c2.a0 = 28;
    CHECK(ground_truth_pi(gt, c2, 25).p01() == ground_truth_pi(gt, c, 1).p01());
}

TEST_CASE("sampled contracts satisfy the contract invariants", "[portfolio]") {
    const PortfolioConfig cfg = small_config();
    for (std::size_t i = 0; i < 10000; ++i) {
        Rng rng = substream(cfg.seed, i);
        const Contract c = sample_contract(rng, cfg);
        CHECK_NOTHROW(validate(c));
        CHECK(c.a0 >= 18);
        CHECK(c.a0 <= 60);
        CHECK(c.n <= cfg.n_max);
        CHECK(c.t <= c.n);
        CHECK(!c.P.has_value());
    }
}

TEST_CASE("sampled marginals match the reference moments", "[portfolio]") {
    const PortfolioConfig cfg = small_config();
    double age_sum = 0.0, n_sum = 0.0, t_sum = 0.0;
    const std::size_t draws = 10000;
    for (std::size_t i = 0; i < draws; ++i) {
        Rng rng = substream(cfg.seed, i);
        const Contract c = sample_contract(rng, cfg);
        age_sum += c.a0;
        n_sum += c.n;
        t_sum += c.t;
    }
    CHECK(age_sum / draws == Approx(39.0).margin(1.0));
    CHECK(n_sum / draws == Approx(13.9).margin(1.5));
    CHECK(t_sum / draws == Approx(7.6).margin(1.5));
}

TEST_CASE("every generated contract is APV-consistent under the truth", "[portfolio]") {
    const PortfolioConfig cfg = small_config();
    const GroundTruthModel gt;
    const Portfolio pf = generate_portfolio(cfg, gt);
    REQUIRE(pf.contracts.size() == cfg.N);
    for (const PricedContract& pc : pf.contracts) {
        const TransitionSequence seq = ground_truth_sequence(gt, pc.c);
        CHECK(std::abs(psi(seq, pc.c, pc.y)) <= 1e-9 * pc.c.S);
    }
}

TEST_CASE("backtesting the truth inverts pricing exactly", "[portfolio]") {
    const PortfolioConfig cfg = small_config(200, 7);
    const GroundTruthModel gt;
    const Portfolio pf = generate_portfolio(cfg, gt);
    for (const PricedContract& pc : pf.contracts) {
        const double p_hat =
            backtest_premium(pc.c, ground_truth_sequence(gt, pc.c), cfg.expenses, cfg.v);
        CHECK(std::abs(p_hat - *pc.c.P) / *pc.c.P <= 1e-10);
    }
}

TEST_CASE("same seed reproduces the portfolio byte for byte", "[portfolio]") {
    const PortfolioConfig cfg = small_config(250, 99);
    const GroundTruthModel gt;
    const std::string csv1 = portfolio_to_csv(generate_portfolio(cfg, gt));
    const std::string csv2 = portfolio_to_csv(generate_portfolio(cfg, gt));
    CHECK(csv1 == csv2);
}

TEST_CASE("premiums are monotone in risk drivers", "[portfolio]") {
    const GroundTruthModel gt;
    const ExpenseStructure e;
    const DiscountFactor v(1.0 / 1.0125);
    Contract c;
    c.a0 = 40;
    c.n = c.t = 15;
    c.m = 4;
    c.S = 200000.0;
    c.smoker = false;

    auto price = [&](const Contract& cc) {
        return equivalence_premium(cc, ground_truth_sequence(gt, cc), e, v);
    };

    SECTION("sum insured") {
        Contract big = c;
        big.S = 2.0 * c.S;
        CHECK(price(big) > price(c));
        CHECK(price(big) == Approx(2.0 * price(c)).epsilon(1e-12)); // linear in S
    }
    SECTION("smoker status") {
        Contract smoker = c;
        smoker.smoker = true;
        CHECK(price(smoker) > price(c));
    }
    SECTION("initial age") {
        double prev = price(c);
        for (int a0 = 42; a0 <= 58; a0 += 4) {
            Contract older = c;
            older.a0 = a0;
            const double cur = price(older);
            CHECK(cur >= prev);
            prev = cur;
        }
    }
}

TEST_CASE("dropping the smoker multiplier only reprices smokers", "[portfolio]") {
    const PortfolioConfig cfg = small_config(150, 3);
    GroundTruthModel gt;
    const Portfolio with = generate_portfolio(cfg, gt);
    gt.smoker_mult = 1.0;
    const Portfolio without = generate_portfolio(cfg, gt);
    REQUIRE(with.contracts.size() == without.contracts.size());
    for (std::size_t i = 0; i < with.contracts.size(); ++i) {
        const Contract& a = with.contracts[i].c;
        const Contract& b = without.contracts[i].c;
        REQUIRE(a.smoker == b.smoker);
        if (a.smoker) CHECK(*a.P > *b.P);
        else CHECK(*a.P == *b.P);
    }
}

TEST_CASE("portfolio files round-trip", "[portfolio]") {
    const PortfolioConfig cfg = small_config(80, 5);
    const GroundTruthModel gt;
    const Portfolio pf = generate_portfolio(cfg, gt);
    const auto dir = std::filesystem::temp_directory_path() / "lifecal_pf_rt";
    write_portfolio(pf, dir);
    const Portfolio loaded = load_portfolio(dir);

    REQUIRE(loaded.contracts.size() == pf.contracts.size());
    for (std::size_t i = 0; i < pf.contracts.size(); ++i) {
        const Contract& a = pf.contracts[i].c;
        const Contract& b = loaded.contracts[i].c;
        CHECK(a.a0 == b.a0);
        CHECK(a.n == b.n);
        CHECK(a.t == b.t);
        CHECK(a.m == b.m);
        CHECK(a.S == b.S);       // %.17g round-trips exactly
        CHECK(*a.P == *b.P);
        CHECK(a.gender == b.gender);
        CHECK(a.smoker == b.smoker);
        // rebuilt discounted cash flows are bit-identical
        for (int k = 0; k <= a.iterations(); ++k) {
            CHECK(pf.contracts[i].y(0, 0, k) == loaded.contracts[i].y(0, 0, k));
            CHECK(pf.contracts[i].y(0, 1, k) == loaded.contracts[i].y(0, 1, k));
        }
    }
    CHECK(loaded.config.seed == cfg.seed);
    CHECK(loaded.gt.loading == gt.loading);
    CHECK(loaded.gt.table.q(50, Gender::male) == gt.table.q(50, Gender::male));
}

TEST_CASE("premium levels are in the reference order of magnitude", "[portfolio]") {
    const PortfolioConfig cfg = small_config(2000, 11);
    const GroundTruthModel gt;
    const Portfolio pf = generate_portfolio(cfg, gt);
    double lo = 1e300, hi = 0.0;
    for (const PricedContract& pc : pf.contracts) {
        lo = std::min(lo, *pc.c.P);
        hi = std::max(hi, *pc.c.P);
    }
    CHECK(lo < 100.0);  // cheapest contracts cost a few EUR per year
    CHECK(hi > 1e4);    // most expensive reach the 1e4..1e6 range
    CHECK(hi < 5e6);
}
