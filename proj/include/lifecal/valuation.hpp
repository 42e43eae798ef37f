#pragma once

#include <cmath>
#include <stdexcept>

#include "lifecal/cashflow.hpp"
#include "lifecal/contract.hpp"
#include "lifecal/errors.hpp"
#include "lifecal/transition.hpp"

namespace lifecal {

// Expected discounted value of all cash flows, starting from state 0:
//
//   psi = sum_k sum_ij M^(0,k-1)_{0,i} pi^(k-1)_{ij} y_ij^(k)
//
// with the k=0 term contributing y_00^(0) at weight 1. Evaluated by a single
// forward sweep over the alive probability; state 1 is absorbing with zero
// cash flows, so the full matrix chain never has to be materialized.
inline double psi(const TransitionSequence& pi_seq, const Contract& c, const DiscountedCashFlowTensor& y) {
    const int K = c.iterations();
    if (static_cast<int>(pi_seq.size()) < K)
        throw std::length_error("psi: transition sequence shorter than n*m");

    const std::vector<double>& y00 = y.y00();
    const std::vector<double>& y01 = y.y01();

    double alive = 1.0; // M^(0,k-1)_00 for the current k
    double acc = y00[0];
    for (int k = 1; k <= K; ++k) {
        const TransitionMatrix& pi = pi_seq[static_cast<std::size_t>(k - 1)];
        acc += alive * (pi.p00() * y00[static_cast<std::size_t>(k)] + pi.p01() * y01[static_cast<std::size_t>(k)]);
        alive *= pi.p00();
    }
    return acc;
}

// Discounted premium-payment annuity: sum_{k=0}^{t*m-1} v^(k/m) M^(0,k-1)_00.
// Per the cash-flow structure the premium at iteration k is received whenever
// the period was entered alive, which is why the survival factor lags one
// step (both the k=0 and k=1 terms carry weight 1).
inline double premium_annuity(const TransitionSequence& pi_seq, const Contract& c, const DiscountFactor& v) {
    const int paying = c.t * c.m;
    if (static_cast<int>(pi_seq.size()) < paying - 1)
        throw std::length_error("premium_annuity: transition sequence too short");

    double alive_prev = 1.0; // M^(0,k-1)_00
    double acc = 0.0;
    for (int k = 0; k < paying; ++k) {
        acc += std::pow(v.v, static_cast<double>(k) / c.m) * alive_prev;
        if (k >= 1) alive_prev *= pi_seq[static_cast<std::size_t>(k - 1)].p00();
    }
    return acc;
}

// Coefficient of P in psi(pi, c(P), y(c(P))), derived from the implemented
// cash-flow algebra: the alpha charge enters once at k=0, undivided by m.
inline double premium_coefficient(const TransitionSequence& pi_seq, const Contract& c,
                                  const ExpenseStructure& e, const DiscountFactor& v) {
    return (1.0 - e.beta) / c.m * premium_annuity(pi_seq, c, v) - c.t * e.alpha;
}

// The unique P making the contract APV-consistent: psi is linear in P, so
// split it into the S-part (evaluated at P=0) and the P-coefficient.
inline double equivalence_premium(const Contract& c, const TransitionSequence& pi_seq,
                                  const ExpenseStructure& e, const DiscountFactor& v) {
    Contract c0 = c;
    c0.P = 0.0;
    validate(c0);

    const double coeff = premium_coefficient(pi_seq, c, e, v);
    if (!(coeff > 0.0))
        throw UnpriceableError("equivalence_premium: non-positive premium coefficient (" +
                               std::to_string(coeff) + "): expenses exceed expected premium income");

    const double psi_s = psi(pi_seq, c0, discounted_cash_flows(c0, e, v));
    return -psi_s / coeff;
}

// APV of a priced contract; zero iff the contract is APV-consistent.
inline double apv(const Contract& c, const TransitionSequence& pi_seq, const ExpenseStructure& e,
                  const DiscountFactor& v) {
    if (!c.P) throw std::invalid_argument("apv: contract has no premium");
    return psi(pi_seq, c, discounted_cash_flows(c, e, v));
}

// Premium backtest against an arbitrary transition-probability source: the
// recorded premium is dropped and re-derived from the supplied probabilities.
inline double backtest_premium(const Contract& c, const TransitionSequence& pi_seq,
                               const ExpenseStructure& e, const DiscountFactor& v) {
    return equivalence_premium(c, pi_seq, e, v);
}

} // namespace lifecal
