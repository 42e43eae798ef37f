#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lifecal/contract.hpp"

namespace lifecal {

// Estimated cash flow matrix CF_ij^(k)(c) at iteration k, from the insurer's
// perspective: premiums are income, sum insured and expenses are outgo.
// Rows from the dead state are zero; the death cell carries the k>0 indicator.
inline std::array<std::array<double, 2>, 2> cash_flow(const Contract& c, const ExpenseStructure& e, int k) {
    if (k < 0 || k > c.iterations())
        throw std::out_of_range("cash_flow: iteration index out of 0..n*m");

    const double P = c.P.value_or(0.0);
    const double premium_period = c.pays_premium_at(k) ? 1.0 : 0.0;  // k/m < t
    const double admin_period = (!c.pays_premium_at(k) && k < c.n * c.m) ? 1.0 : 0.0; // t <= k/m < n

    const double common = (1.0 - e.beta) * P / c.m * premium_period
                        - e.gamma1 * c.S / c.m * premium_period
                        - e.gamma2 * c.S / c.m * admin_period;

    std::array<std::array<double, 2>, 2> cf{};
    cf[0][0] = common - (k == 0 ? c.t * e.alpha * P : 0.0);
    cf[0][1] = k > 0 ? common - c.S : 0.0;
    cf[1][0] = 0.0;
    cf[1][1] = 0.0;
    return cf;
}

// Discounted cash flows y_ij^(k)(c) = CF_ij^(k)(c) * v^(k/m), k = 0..n*m.
// Rows from state 1 are structurally zero, so only (0,0) and (0,1) are stored.
class DiscountedCashFlowTensor {
public:
    DiscountedCashFlowTensor() = default;
    DiscountedCashFlowTensor(std::vector<double> y00, std::vector<double> y01)
        : y00_(std::move(y00)), y01_(std::move(y01)) {}

    int max_k() const { return static_cast<int>(y00_.size()) - 1; }

    double operator()(int i, int j, int k) const {
        if (i == 1) return 0.0;
        if (k < 0 || k > max_k()) return 0.0; // no cash flows beyond contract end
        return j == 0 ? y00_[static_cast<std::size_t>(k)] : y01_[static_cast<std::size_t>(k)];
    }

    const std::vector<double>& y00() const { return y00_; }
    const std::vector<double>& y01() const { return y01_; }

private:
    std::vector<double> y00_, y01_;
};

inline DiscountedCashFlowTensor discounted_cash_flows(const Contract& c, const ExpenseStructure& e,
                                                      const DiscountFactor& v) {
    validate(c);
    const int K = c.iterations();
    std::vector<double> y00(static_cast<std::size_t>(K) + 1), y01(static_cast<std::size_t>(K) + 1);
    for (int k = 0; k <= K; ++k) {
        const auto cf = cash_flow(c, e, k);
        const double disc = std::pow(v.v, static_cast<double>(k) / c.m);
        y00[static_cast<std::size_t>(k)] = cf[0][0] * disc;
        y01[static_cast<std::size_t>(k)] = cf[0][1] * disc;
    }
    return DiscountedCashFlowTensor(std::move(y00), std::move(y01));
}

} // namespace lifecal
