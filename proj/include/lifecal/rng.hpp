#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lifecal {

// All randomness goes through this wrapper. std::mt19937_64 has a raw output
// sequence fixed by the standard; the value mappings below are hand-rolled
// because std::*_distribution is not reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in {lo,...,hi} via rejection-free modulo (bias < 2^-50
    // for the small ranges used here; documented and fixed).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo + 1);
        return lo + static_cast<std::int64_t>(gen_() % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Geometric on {1,2,...} with success probability p, by inversion.
    std::int64_t geometric1(double p) {
        const double u = uniform();
        // smallest j with 1-(1-p)^j >= u
        const double j = std::ceil(std::log1p(-u) / std::log1p(-p));
        return j < 1.0 ? 1 : static_cast<std::int64_t>(j);
    }

    // Geometric truncated to {1,...,max_value} by rejection (the renormalized
    // law, not a censored one).
    std::int64_t truncated_geometric1(double p, std::int64_t max_value) {
        while (true) {
            const std::int64_t g = geometric1(p);
            if (g <= max_value) return g;
        }
    }

private:
    std::mt19937_64 gen_;
};

// SplitMix64 step; used to derive independent per-contract substreams from
// (seed, index) so generation order never affects sampled values.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline Rng substream(std::uint64_t seed, std::uint64_t index) {
    return Rng(splitmix64(splitmix64(seed) ^ (index + 1)));
}

} // namespace lifecal
