#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace lifecal {

// 2x2 row-stochastic one-step matrix over states {0 = alive, 1 = dead}.
// Row 1 is the absorbing row [0,1], fixed exactly.
struct TransitionMatrix {
    std::array<std::array<double, 2>, 2> p{{{1.0, 0.0}, {0.0, 1.0}}};

    static TransitionMatrix identity() { return TransitionMatrix{}; }

    // Build from the death probability of the alive row.
    static TransitionMatrix from_death_prob(double p01) {
        TransitionMatrix t;
        t.p[0] = {1.0 - p01, p01};
        t.p[1] = {0.0, 1.0};
        return t;
    }

    double p00() const { return p[0][0]; }
    double p01() const { return p[0][1]; }

    bool valid(double tol = 1e-12) const {
        for (const auto& row : p)
            for (double x : row)
                if (!(x >= 0.0 && x <= 1.0)) return false;
        if (std::abs(p[0][0] + p[0][1] - 1.0) > tol) return false;
        return p[1][0] == 0.0 && p[1][1] == 1.0;
    }
};

inline TransitionMatrix operator*(const TransitionMatrix& a, const TransitionMatrix& b) {
    TransitionMatrix c;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            c.p[i][j] = a.p[i][0] * b.p[0][j] + a.p[i][1] * b.p[1][j];
    // keep the absorbing row exact under composition
    c.p[1] = {0.0, 1.0};
    return c;
}

// One-step matrices pi^(k)(c) for k = 0,...,n*m-1.
using TransitionSequence = std::vector<TransitionMatrix>;

// Multi-step transition matrix M^(start,steps) = prod_{l=0}^{steps-1} pi^(start+l),
// with the empty product defined as the identity.
inline TransitionMatrix multi_step(const TransitionSequence& seq, std::size_t start, std::size_t steps) {
    if (start + steps > seq.size())
        throw std::out_of_range("multi_step: start+steps exceeds sequence length");
    TransitionMatrix m = TransitionMatrix::identity();
    for (std::size_t l = 0; l < steps; ++l) m = m * seq[start + l];
    return m;
}

} // namespace lifecal
