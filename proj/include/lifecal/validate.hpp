#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "lifecal/csv.hpp"
#include "lifecal/model.hpp"
#include "lifecal/portfolio.hpp"
#include "lifecal/valuation.hpp"

namespace lifecal {

// Source of one-step transition matrices for a given contract; either a
// calibrated model or the stored ground truth.
using PiProvider = std::function<TransitionSequence(const Contract&)>;

inline PiProvider model_provider(const Model& model) {
    return [&model](const Contract& c) { return predict_sequence(model, c); };
}

inline PiProvider ground_truth_provider(const GroundTruthModel& gt) {
    return [&gt](const Contract& c) { return ground_truth_sequence(gt, c); };
}

// Premium backtest for a calibrated model (Model overload of the sequence
// based backtest in valuation.hpp).
inline double backtest_premium(const Model& model, const Contract& c, const ExpenseStructure& e,
                               const DiscountFactor& v) {
    return backtest_premium(c, predict_sequence(model, c), e, v);
}

// ---- portfolio backtest ------------------------------------------------

inline constexpr std::array<double, 9> kReportAlphas{0.0,  0.005, 0.10, 0.25, 0.50,
                                                     0.75, 0.90,  0.995, 1.0};

// Quantile by linear interpolation between closest ranks on the sorted
// sample: q_a = x[(n-1)a] with fractional indices interpolated.
inline double quantile_sorted(const std::vector<double>& sorted, double alpha) {
    if (sorted.empty()) return 0.0;
    const double h = alpha * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

struct BacktestReport {
    std::vector<std::size_t> ids; // portfolio row of each included contract
    std::vector<double> premium;  // recorded P
    std::vector<double> estimate; // backtested P-hat
    std::vector<double> e_rel;    // (P - P_hat)/P
    std::size_t excluded_zero_premium = 0;
    std::array<double, kReportAlphas.size()> quantiles{};

    double share_abs_within(double bound) const {
        if (e_rel.empty()) return 0.0;
        std::size_t k = 0;
        for (double e : e_rel)
            if (std::abs(e) <= bound) ++k;
        return static_cast<double>(k) / static_cast<double>(e_rel.size());
    }

    double median_abs_error() const {
        std::vector<double> a;
        a.reserve(e_rel.size());
        for (double e : e_rel) a.push_back(std::abs(e));
        std::sort(a.begin(), a.end());
        return quantile_sorted(a, 0.5);
    }
};

inline BacktestReport backtest_portfolio(const PiProvider& provider, const Portfolio& pf,
                                         const ExpenseStructure& e, const DiscountFactor& v) {
    BacktestReport rep;
    for (std::size_t i = 0; i < pf.contracts.size(); ++i) {
        const Contract& c = pf.contracts[i].c;
        const double p = c.P.value_or(0.0);
        if (!(p > 0.0)) {
            ++rep.excluded_zero_premium;
            continue;
        }
        const double p_hat = backtest_premium(c, provider(c), e, v);
        rep.ids.push_back(i);
        rep.premium.push_back(p);
        rep.estimate.push_back(p_hat);
        rep.e_rel.push_back((p - p_hat) / p);
    }
    std::vector<double> sorted = rep.e_rel;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t a = 0; a < kReportAlphas.size(); ++a)
        rep.quantiles[a] = quantile_sorted(sorted, kReportAlphas[a]);
    return rep;
}

// ---- implied mortality curves --------------------------------------------

// One-year death probabilities pi_hat^(0)_01 at m=1 per (gender, smoker)
// profile, next to the reference table curve.
struct MortalityCurve {
    std::vector<int> ages;
    // indexed [gender][smoker]
    std::array<std::array<std::vector<double>, 2>, 2> pi01;
    std::array<std::vector<double>, 2> reference; // annual table q per gender

    double value(int age_index, Gender g, bool smoker) const {
        return pi01[g == Gender::male ? 0 : 1][smoker ? 1 : 0][static_cast<std::size_t>(age_index)];
    }
};

inline MortalityCurve implied_mortality(const PiProvider& provider, const MortalityTable& reference,
                                        int age_lo, int age_hi) {
    MortalityCurve curve;
    for (int a = age_lo; a <= age_hi; ++a) curve.ages.push_back(a);
    for (int gi = 0; gi < 2; ++gi) {
        const Gender g = gi == 0 ? Gender::male : Gender::female;
        for (int si = 0; si < 2; ++si) {
            auto& vals = curve.pi01[static_cast<std::size_t>(gi)][static_cast<std::size_t>(si)];
            for (int a : curve.ages) {
                Contract c;
                c.a0 = a;
                c.n = 1;
                c.t = 1;
                c.m = 1;
                c.S = 100000.0;
                c.gender = g;
                c.smoker = si == 1;
                vals.push_back(provider(c).at(0).p01());
            }
        }
        for (int a : curve.ages)
            curve.reference[static_cast<std::size_t>(gi)].push_back(reference.q(a, g));
    }
    return curve;
}

// ---- homogeneity grids -----------------------------------------------------

enum class FeatureFlip { none, gender, smoker };

// Differences pi^(k)_01(c) - pi^(k)_01(c') over initial age (rows) and
// iteration (columns), where c' flips one qualitative feature. For providers
// whose output depends on (a0,k) only through the attained age the grid is
// constant along anti-diagonals; the score reports the worst violation.
struct HomogeneityGrid {
    std::vector<int> a0s;
    std::vector<int> ks;
    Tensor values;
    double max_antidiagonal_variation = 0.0;
};

inline HomogeneityGrid homogeneity_grid(const PiProvider& provider, int a0_lo, int a0_hi, int k_max,
                                        FeatureFlip flip, int m = 1) {
    HomogeneityGrid grid;
    for (int a = a0_lo; a <= a0_hi; ++a) grid.a0s.push_back(a);
    for (int k = 0; k <= k_max; ++k) grid.ks.push_back(k);
    grid.values = Tensor(grid.a0s.size(), grid.ks.size());

    const int years = (k_max + m) / m; // cover k_max transitions
    for (std::size_t i = 0; i < grid.a0s.size(); ++i) {
        Contract c;
        c.a0 = grid.a0s[i];
        c.n = years;
        c.t = years;
        c.m = m;
        c.S = 100000.0;
        c.gender = Gender::male;
        c.smoker = false;
        Contract c2 = c;
        if (flip == FeatureFlip::gender) c2.gender = Gender::female;
        if (flip == FeatureFlip::smoker) c2.smoker = true;

        const TransitionSequence s1 = provider(c);
        const TransitionSequence s2 = flip == FeatureFlip::none ? s1 : provider(c2);
        for (std::size_t j = 0; j < grid.ks.size(); ++j) {
            const std::size_t k = static_cast<std::size_t>(grid.ks[j]);
            grid.values(i, j) = s1.at(k).p01() - s2.at(k).p01();
        }
    }

    // anti-diagonal index: attained integer age a0 + k/m
    std::vector<std::vector<double>> diag;
    for (std::size_t i = 0; i < grid.a0s.size(); ++i)
        for (std::size_t j = 0; j < grid.ks.size(); ++j) {
            const std::size_t d = static_cast<std::size_t>(grid.a0s[i] - a0_lo) +
                                  static_cast<std::size_t>(grid.ks[j] / m);
            if (d >= diag.size()) diag.resize(d + 1);
            diag[d].push_back(grid.values(i, j));
        }
    for (const auto& cells : diag) {
        if (cells.size() < 2) continue;
        const auto [lo, hi] = std::minmax_element(cells.begin(), cells.end());
        grid.max_antidiagonal_variation = std::max(grid.max_antidiagonal_variation, *hi - *lo);
    }
    return grid;
}

// ---- error decomposition ----------------------------------------------

struct FeatureBins {
    struct Bin {
        double lo = 0.0, hi = 0.0;
        std::size_t count = 0;
        double mean = 0.0;
        double stddev = 0.0;
    };
    std::string feature;
    std::vector<Bin> bins;
};

namespace detail {

inline FeatureBins bin_feature(const std::string& name, const std::vector<double>& xs,
                               const std::vector<double>& es, std::size_t n_bins) {
    FeatureBins fb;
    fb.feature = name;
    if (xs.empty()) return fb;
    const auto [mn_it, mx_it] = std::minmax_element(xs.begin(), xs.end());
    const double lo = *mn_it, hi = *mx_it;
    const double width = hi > lo ? (hi - lo) / static_cast<double>(n_bins) : 1.0;
    fb.bins.resize(n_bins);
    std::vector<std::vector<double>> members(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
        fb.bins[b].lo = lo + width * static_cast<double>(b);
        fb.bins[b].hi = b + 1 == n_bins ? hi : lo + width * static_cast<double>(b + 1);
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::size_t b = hi > lo ? static_cast<std::size_t>((xs[i] - lo) / width) : 0;
        if (b >= n_bins) b = n_bins - 1; // x == hi lands in the last bin
        members[b].push_back(es[i]);
    }
    for (std::size_t b = 0; b < n_bins; ++b) {
        auto& bin = fb.bins[b];
        bin.count = members[b].size();
        if (bin.count == 0) continue;
        double sum = 0.0;
        for (double e : members[b]) sum += e;
        bin.mean = sum / static_cast<double>(bin.count);
        double sq = 0.0;
        for (double e : members[b]) sq += (e - bin.mean) * (e - bin.mean);
        bin.stddev = std::sqrt(sq / static_cast<double>(bin.count));
    }
    return fb;
}

inline FeatureBins bin_levels(const std::string& name, const std::vector<double>& xs,
                              const std::vector<double>& es, const std::vector<double>& levels) {
    FeatureBins fb;
    fb.feature = name;
    for (double lv : levels) {
        FeatureBins::Bin bin;
        bin.lo = bin.hi = lv;
        std::vector<double> members;
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (xs[i] == lv) members.push_back(es[i]);
        bin.count = members.size();
        if (bin.count) {
            double sum = 0.0;
            for (double e : members) sum += e;
            bin.mean = sum / static_cast<double>(bin.count);
            double sq = 0.0;
            for (double e : members) sq += (e - bin.mean) * (e - bin.mean);
            bin.stddev = std::sqrt(sq / static_cast<double>(bin.count));
        }
        fb.bins.push_back(bin);
    }
    return fb;
}

} // namespace detail

// Binned mean/std of the relative error by contract feature. Numeric
// features use 20 equal-width bins; the payment style uses its levels.
inline std::vector<FeatureBins> error_decomposition(const BacktestReport& rep, const Portfolio& pf,
                                                    std::size_t n_bins = 20) {
    std::vector<double> a0, prem, sum_ins, dur_t, style;
    for (std::size_t idx : rep.ids) {
        const Contract& c = pf.contracts[idx].c;
        a0.push_back(c.a0);
        prem.push_back(c.P.value_or(0.0));
        sum_ins.push_back(c.S);
        dur_t.push_back(c.t);
        style.push_back(c.m);
    }
    std::vector<FeatureBins> out;
    out.push_back(detail::bin_feature("a0", a0, rep.e_rel, n_bins));
    out.push_back(detail::bin_feature("P", prem, rep.e_rel, n_bins));
    out.push_back(detail::bin_feature("S", sum_ins, rep.e_rel, n_bins));
    out.push_back(detail::bin_feature("t", dur_t, rep.e_rel, n_bins));
    out.push_back(detail::bin_levels("m", style, rep.e_rel, {1.0, 2.0, 4.0, 12.0}));
    return out;
}

// ---- report files -----------------------------------------------------

inline std::string backtest_csv(const BacktestReport& rep) {
    std::string out = "id,P,P_hat,e_rel\n";
    for (std::size_t i = 0; i < rep.ids.size(); ++i)
        out += std::to_string(rep.ids[i]) + ',' + format_double(rep.premium[i]) + ',' +
               format_double(rep.estimate[i]) + ',' + format_double(rep.e_rel[i]) + '\n';
    return out;
}

inline std::string quantiles_csv(const BacktestReport& rep) {
    std::string out = "alpha,q\n";
    for (std::size_t a = 0; a < kReportAlphas.size(); ++a)
        out += format_double(kReportAlphas[a]) + ',' + format_double(rep.quantiles[a]) + '\n';
    return out;
}

inline std::string curves_csv(const MortalityCurve& curve) {
    std::string out = "age,gender,smoker,pi01,table_q\n";
    for (int gi = 0; gi < 2; ++gi)
        for (int si = 0; si < 2; ++si)
            for (std::size_t i = 0; i < curve.ages.size(); ++i)
                out += std::to_string(curve.ages[i]) + ',' + (gi == 0 ? "male" : "female") + ',' +
                       (si == 1 ? "yes" : "no") + ',' +
                       format_double(curve.pi01[static_cast<std::size_t>(gi)][static_cast<std::size_t>(si)][i]) +
                       ',' + format_double(curve.reference[static_cast<std::size_t>(gi)][i]) + '\n';
    return out;
}

inline std::string homogeneity_csv(const HomogeneityGrid& grid, const std::string& label) {
    std::string out = "flip,a0,k,diff\n";
    for (std::size_t i = 0; i < grid.a0s.size(); ++i)
        for (std::size_t j = 0; j < grid.ks.size(); ++j)
            out += label + ',' + std::to_string(grid.a0s[i]) + ',' + std::to_string(grid.ks[j]) +
                   ',' + format_double(grid.values(i, j)) + '\n';
    return out;
}

inline std::string decomposition_csv(const std::vector<FeatureBins>& features) {
    std::string out = "feature,bin,lo,hi,count,mean_e_rel,std_e_rel\n";
    for (const FeatureBins& fb : features)
        for (std::size_t b = 0; b < fb.bins.size(); ++b) {
            const auto& bin = fb.bins[b];
            out += fb.feature + ',' + std::to_string(b) + ',' + format_double(bin.lo) + ',' +
                   format_double(bin.hi) + ',' + std::to_string(bin.count) + ',' +
                   format_double(bin.mean) + ',' + format_double(bin.stddev) + '\n';
        }
    return out;
}

inline std::string backtest_summary(const BacktestReport& rep) {
    std::string out;
    out += "premium backtest summary\n";
    out += "contracts included: " + std::to_string(rep.ids.size()) + "\n";
    out += "excluded (P = 0):   " + std::to_string(rep.excluded_zero_premium) + "\n\n";
    out += "quantiles of e_rel = (P - P_hat)/P, in %\n";
    std::string head = "alpha ", row = "q_a   ";
    char buf[32];
    for (std::size_t a = 0; a < kReportAlphas.size(); ++a) {
        std::snprintf(buf, sizeof(buf), "%8.3f", kReportAlphas[a]);
        head += buf;
        std::snprintf(buf, sizeof(buf), "%8.2f", 100.0 * rep.quantiles[a]);
        row += buf;
    }
    out += head + "\n" + row + "\n\n";
    std::snprintf(buf, sizeof(buf), "%.4f", 100.0 * rep.share_abs_within(0.05));
    out += "share |e_rel| <= 5%: " + std::string(buf) + "%\n";
    std::snprintf(buf, sizeof(buf), "%.4f", 100.0 * rep.median_abs_error());
    out += "median |e_rel|:      " + std::string(buf) + "%\n";
    return out;
}

} // namespace lifecal
