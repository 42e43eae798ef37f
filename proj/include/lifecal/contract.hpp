#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>

namespace lifecal {

inline constexpr std::array<int, 4> kPaymentStyles{1, 2, 4, 12};

enum class Gender { male, female };

inline const char* to_string(Gender g) { return g == Gender::male ? "male" : "female"; }

inline Gender gender_from_string(const std::string& s) {
    if (s == "male") return Gender::male;
    if (s == "female") return Gender::female;
    throw std::invalid_argument("unknown gender: " + s);
}

// One term-life policy. The premium P is optional: contracts leave the
// generator unpriced and receive P from the equivalence principle.
struct Contract {
    int year = 2015;        // calendar year the contract was initiated
    int month = 1;          // calendar month 1-12
    int a0 = 30;            // initial age in whole years
    int n = 10;             // contract duration in years
    int t = 10;             // premium-payment duration in years, t <= n
    double S = 100000.0;    // sum insured, EUR
    std::optional<double> P; // annual premium, EUR
    int m = 1;              // premium payments per year, in {1,2,4,12}
    Gender gender = Gender::male;
    bool smoker = false;

    // Total iteration count: transitions k=0..K-1, cash-flow times k=0..K.
    int iterations() const { return n * m; }

    bool pays_premium_at(int k) const { return k < t * m; }
};

inline void validate(const Contract& c) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("contract: " + msg); };
    if (c.month < 1 || c.month > 12) fail("month must be in 1..12");
    if (c.a0 < 0) fail("a0 must be >= 0");
    if (c.t < 1 || c.t > c.n) fail("need 1 <= t <= n");
    if (!(c.S > 0.0)) fail("S must be > 0");
    if (c.P && *c.P < 0.0) fail("P must be >= 0");
    if (c.m != 1 && c.m != 2 && c.m != 4 && c.m != 12) fail("m must be in {1,2,4,12}");
}

// Acquisition (alpha), collection (beta) and administration (gamma1 during
// premium payment, gamma2 thereafter) loadings.
struct ExpenseStructure {
    double alpha = 0.025;
    double beta = 0.03;
    double gamma1 = 0.001;
    double gamma2 = 0.001;
};

inline void validate(const ExpenseStructure& e) {
    auto in01 = [](double x) { return x >= 0.0 && x < 1.0; };
    if (!in01(e.alpha) || !in01(e.beta) || !in01(e.gamma1) || !in01(e.gamma2))
        throw std::invalid_argument("expense loadings must lie in [0,1)");
}

struct DiscountFactor {
    double v = 1.0 / 1.0125; // annual discount factor in (0,1]

    DiscountFactor() = default;
    explicit DiscountFactor(double value) : v(value) {
        if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument("discount factor must be in (0,1]");
    }
};

} // namespace lifecal
