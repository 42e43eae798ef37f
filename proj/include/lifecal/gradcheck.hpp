#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace lifecal {

// Verifies a reverse-mode gradient against central finite differences,
// component by component. Returns the maximum relative error
// |g_tape - g_fd| / max(1e-8, |g_tape|, |g_fd|). Callers are responsible for
// nudging parameters off non-differentiable kinks (relu at 0, |.| at 0).
inline double grad_check(const std::function<double(const std::vector<double>&)>& f,
                         const std::function<std::vector<double>(const std::vector<double>&)>& tape_grad,
                         std::vector<double> theta, double h = 1e-5) {
    const std::vector<double> analytic = tape_grad(theta);
    double worst = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double orig = theta[i];
        theta[i] = orig + h;
        const double fp = f(theta);
        theta[i] = orig - h;
        const double fm = f(theta);
        theta[i] = orig;
        const double fd = (fp - fm) / (2.0 * h);
        const double denom = std::max({1e-8, std::abs(analytic[i]), std::abs(fd)});
        worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
    }
    return worst;
}

} // namespace lifecal
