#pragma once

// Independent oracles for the valuation math. These deliberately re-derive
// everything with the most literal transliteration possible (explicit
// indicator branches, naive matrix chains, root finding) so that they share
// no code path with the library implementation they check.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lifecal/cashflow.hpp"
#include "lifecal/contract.hpp"
#include "lifecal/rng.hpp"
#include "lifecal/transition.hpp"
#include "lifecal/valuation.hpp"

namespace oracle {

// Spreadsheet-style evaluation of the cash-flow cells with every indicator
// spelled out.
inline std::array<std::array<double, 2>, 2> cash_flow(const lifecal::Contract& c,
                                                      const lifecal::ExpenseStructure& e, int k) {
    const double P = c.P.value_or(0.0);
    const double S = c.S;
    const double m = c.m;
    const double time_years = static_cast<double>(k) / m;

    double cf00 = 0.0;
    if (time_years < c.t) cf00 += P / m;
    if (k == 0) cf00 -= c.t * e.alpha * P;
    if (time_years < c.t) cf00 -= e.beta * P / m;
    if (time_years < c.t) cf00 -= e.gamma1 * S / m;
    if (c.t <= time_years && time_years < c.n) cf00 -= e.gamma2 * S / m;

    double cf01 = 0.0;
    if (k > 0) {
        if (time_years < c.t) cf01 += P / m;
        cf01 -= S;
        if (time_years < c.t) cf01 -= e.beta * P / m;
        if (time_years < c.t) cf01 -= e.gamma1 * S / m;
        if (c.t <= time_years && time_years < c.n) cf01 -= e.gamma2 * S / m;
    }
    return {{{cf00, cf01}, {0.0, 0.0}}};
}

// psi by the literal double sum with naive multi-step matrix products.
inline double psi(const lifecal::TransitionSequence& seq, const lifecal::Contract& c,
                  const lifecal::DiscountedCashFlowTensor& y) {
    const int K = c.iterations();
    double acc = 0.0;
    for (int k = 0; k <= K; ++k) {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                double m_0i; // M^(0,k-1)_{0,i}
                if (k <= 1) {
                    m_0i = i == 0 ? 1.0 : 0.0;
                } else {
                    const lifecal::TransitionMatrix mm =
                        lifecal::multi_step(seq, 0, static_cast<std::size_t>(k - 1));
                    m_0i = mm.p[0][static_cast<std::size_t>(i)];
                }
                double pij; // pi^(k-1)_{ij} with the k=0 convention
                if (k == 0) {
                    pij = (i == 0 && j == 0) ? 1.0 : 0.0;
                } else {
                    pij = seq.at(static_cast<std::size_t>(k - 1)).p[static_cast<std::size_t>(i)]
                                                                  [static_cast<std::size_t>(j)];
                }
                acc += m_0i * pij * y(i, j, k);
            }
    }
    return acc;
}

// Root of psi(P) = 0 by bisection; independent of the closed-form split.
inline double premium_by_root_find(const lifecal::Contract& c,
                                   const lifecal::TransitionSequence& seq,
                                   const lifecal::ExpenseStructure& e,
                                   const lifecal::DiscountFactor& v) {
    auto psi_at = [&](double premium) {
        lifecal::Contract cp = c;
        cp.P = premium;
        return oracle::psi(seq, cp, lifecal::discounted_cash_flows(cp, e, v));
    };
    double lo = 0.0, hi = 1.0;
    while (psi_at(hi) < 0.0) {
        hi *= 2.0;
        if (hi > 1e12) throw std::runtime_error("premium root finder: no bracket");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (psi_at(mid) < 0.0) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

inline lifecal::Contract random_contract(lifecal::Rng& rng, bool with_premium = false) {
    lifecal::Contract c;
    c.year = 2015 + static_cast<int>(rng.uniform_int(0, 1));
    c.month = static_cast<int>(rng.uniform_int(1, 12));
    c.a0 = static_cast<int>(rng.uniform_int(18, 60));
    c.n = static_cast<int>(rng.uniform_int(1, 20));
    c.t = static_cast<int>(rng.uniform_int(1, c.n));
    c.S = rng.uniform(1000.0, 1e6);
    c.m = lifecal::kPaymentStyles[static_cast<std::size_t>(rng.uniform_int(0, 3))];
    c.gender = rng.bernoulli(0.5) ? lifecal::Gender::female : lifecal::Gender::male;
    c.smoker = rng.bernoulli(0.5);
    if (with_premium) c.P = rng.uniform(10.0, 20000.0);
    return c;
}

// Valid one-step matrices with death probabilities in a realistic band.
inline lifecal::TransitionSequence random_sequence(lifecal::Rng& rng, int length,
                                                   double p01_max = 0.05) {
    lifecal::TransitionSequence seq;
    for (int k = 0; k < length; ++k)
        seq.push_back(lifecal::TransitionMatrix::from_death_prob(rng.uniform(0.0, p01_max)));
    return seq;
}

} // namespace oracle
