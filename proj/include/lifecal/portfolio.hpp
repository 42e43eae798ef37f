#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lifecal/cashflow.hpp"
#include "lifecal/contract.hpp"
#include "lifecal/csv.hpp"
#include "lifecal/errors.hpp"
#include "lifecal/mortality.hpp"
#include "lifecal/rng.hpp"
#include "lifecal/valuation.hpp"

namespace lifecal {

// The hidden first-order mortality model used to price synthetic contracts:
// table rates with a multiplicative prudence loading, a smoker surcharge and
// an optional 50/50 unisex blend.
struct GroundTruthModel {
    MortalityTable table = synthetic_table();
    double loading = 1.34;
    double smoker_mult = 1.5;
    bool unisex = true;

    double annual_q(int age, Gender g, bool smoker, bool* clamped = nullptr) const {
        const double base = unisex
            ? 0.5 * (table.q(age, Gender::male, clamped) + table.q(age, Gender::female, clamped))
            : table.q(age, g, clamped);
        return std::min(1.0, loading * (smoker ? smoker_mult : 1.0) * base);
    }
};

// One-step matrix at iteration k: depends on k only through the attained
// integer age a0 + floor(k/m), so the chain is homogeneous in current age.
inline TransitionMatrix ground_truth_pi(const GroundTruthModel& gt, const Contract& c, int k,
                                        bool* clamped = nullptr) {
    const int age = c.a0 + k / c.m;
    return TransitionMatrix::from_death_prob(gt.annual_q(age, c.gender, c.smoker, clamped) / c.m);
}

inline TransitionSequence ground_truth_sequence(const GroundTruthModel& gt, const Contract& c,
                                                bool* clamped = nullptr) {
    TransitionSequence seq;
    seq.reserve(static_cast<std::size_t>(c.iterations()));
    for (int k = 0; k < c.iterations(); ++k) seq.push_back(ground_truth_pi(gt, c, k, clamped));
    return seq;
}

// Marginal sampling ranges; defaults follow the shape of the reference
// portfolio (uniform year/month/age/S, right-skewed n and t, uniform levels).
struct PortfolioConfig {
    std::size_t N = 10000;
    std::uint64_t seed = 42;
    int a0_min = 18, a0_max = 60;
    int year_min = 2015, year_max = 2016;
    double S_min = 1000.0, S_max = 1e6;
    int n_max = 48;
    // Truncated geometric success parameters; chosen so the untruncated-range
    // means are ~13.9 (n) and ~7.6 (t).
    double n_geom_p = 0.0611;
    double t_geom_p = 0.07;
    ExpenseStructure expenses;
    DiscountFactor v;
};

inline Contract sample_contract(Rng& rng, const PortfolioConfig& cfg) {
    Contract c;
    c.year = static_cast<int>(rng.uniform_int(cfg.year_min, cfg.year_max));
    c.month = static_cast<int>(rng.uniform_int(1, 12));
    c.a0 = static_cast<int>(rng.uniform_int(cfg.a0_min, cfg.a0_max));
    c.S = rng.uniform(cfg.S_min, cfg.S_max);
    // n is truly truncated (renormalized); t is censored at n so that short
    // contracts keep t = n mass, both right-skewed
    c.n = static_cast<int>(rng.truncated_geometric1(cfg.n_geom_p, cfg.n_max));
    c.t = static_cast<int>(std::min<std::int64_t>(rng.geometric1(cfg.t_geom_p), c.n));
    c.m = kPaymentStyles[static_cast<std::size_t>(rng.uniform_int(0, 3))];
    c.gender = rng.bernoulli(0.5) ? Gender::female : Gender::male;
    c.smoker = rng.bernoulli(0.5);
    c.P.reset();
    return c;
}

struct PricedContract {
    Contract c;
    DiscountedCashFlowTensor y;
};

struct Portfolio {
    std::vector<PricedContract> contracts;
    PortfolioConfig config;
    GroundTruthModel gt;
    std::size_t clamped_lookups = 0; // table ages clamped to a_max during pricing
};

// The semi-observable data set D = {c, y(c)}: every contract is priced
// APV-consistently under the ground truth, so the premium column is an
// output of pricing, never sampled.
inline Portfolio generate_portfolio(const PortfolioConfig& cfg, const GroundTruthModel& gt) {
    constexpr int kMaxRetries = 100;
    Portfolio pf;
    pf.config = cfg;
    pf.gt = gt;
    pf.contracts.reserve(cfg.N);
    for (std::size_t i = 0; i < cfg.N; ++i) {
        Rng rng = substream(cfg.seed, i);
        PricedContract pc;
        bool priced = false;
        for (int attempt = 0; attempt < kMaxRetries && !priced; ++attempt) {
            pc.c = sample_contract(rng, cfg);
            bool clamped = false;
            const TransitionSequence seq = ground_truth_sequence(gt, pc.c, &clamped);
            try {
                pc.c.P = equivalence_premium(pc.c, seq, cfg.expenses, cfg.v);
                priced = true;
                if (clamped) ++pf.clamped_lookups;
            } catch (const UnpriceableError&) {
                // resample this slot from its own substream
            }
        }
        if (!priced)
            throw UnpriceableError("generate_portfolio: contract slot " + std::to_string(i) +
                                   " unpriceable after " + std::to_string(kMaxRetries) + " retries");
        pc.y = discounted_cash_flows(pc.c, cfg.expenses, cfg.v);
        pf.contracts.push_back(std::move(pc));
    }
    return pf;
}

// ---- file formats ----------------------------------------------------------

inline std::string portfolio_to_csv(const Portfolio& pf) {
    std::string out = "year,month,a0,n,t,S,P,m,gender,smoker\n";
    for (const auto& pc : pf.contracts) {
        const Contract& c = pc.c;
        out += std::to_string(c.year) + ',' + std::to_string(c.month) + ',' + std::to_string(c.a0) +
               ',' + std::to_string(c.n) + ',' + std::to_string(c.t) + ',' + format_double(c.S) +
               ',' + format_double(c.P.value_or(0.0)) + ',' + std::to_string(c.m) + ',' +
               to_string(c.gender) + ',' + (c.smoker ? "yes" : "no") + '\n';
    }
    return out;
}

inline nlohmann::json portfolio_meta_json(const Portfolio& pf) {
    const PortfolioConfig& cfg = pf.config;
    nlohmann::json meta;
    meta["format"] = "lifecal-portfolio-meta-v1";
    meta["N"] = pf.contracts.size();
    meta["seed"] = cfg.seed;
    meta["sampling"] = {{"a0_min", cfg.a0_min},   {"a0_max", cfg.a0_max},
                        {"year_min", cfg.year_min}, {"year_max", cfg.year_max},
                        {"S_min", cfg.S_min},     {"S_max", cfg.S_max},
                        {"n_max", cfg.n_max},     {"n_geom_p", cfg.n_geom_p},
                        {"t_geom_p", cfg.t_geom_p}};
    meta["expenses"] = {{"alpha", cfg.expenses.alpha},
                        {"beta", cfg.expenses.beta},
                        {"gamma1", cfg.expenses.gamma1},
                        {"gamma2", cfg.expenses.gamma2}};
    meta["discount_factor"] = cfg.v.v;
    meta["ground_truth"] = {{"loading", pf.gt.loading},
                            {"smoker_mult", pf.gt.smoker_mult},
                            {"unisex", pf.gt.unisex}};
    nlohmann::json qm = nlohmann::json::array(), qf = nlohmann::json::array();
    for (int a = 0; a <= MortalityTable::a_max; ++a) {
        qm.push_back(pf.gt.table.q(a, Gender::male));
        qf.push_back(pf.gt.table.q(a, Gender::female));
    }
    meta["ground_truth"]["q_male"] = qm;
    meta["ground_truth"]["q_female"] = qf;
    meta["clamped_lookups"] = pf.clamped_lookups;
    return meta;
}

inline void write_portfolio(const Portfolio& pf, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "portfolio.csv", portfolio_to_csv(pf));
    write_file_atomic(dir / "meta.json", portfolio_meta_json(pf).dump(2) + "\n");
}

inline Portfolio load_portfolio(const std::filesystem::path& dir) {
    const auto csv_path = dir / "portfolio.csv";
    const auto meta_path = dir / "meta.json";
    const nlohmann::json meta = nlohmann::json::parse(read_file(meta_path));
    if (meta.value("format", "") != "lifecal-portfolio-meta-v1")
        throw SchemaError(meta_path.string() + ": unknown metadata format");

    Portfolio pf;
    PortfolioConfig& cfg = pf.config;
    cfg.seed = meta.at("seed").get<std::uint64_t>();
    const auto& s = meta.at("sampling");
    cfg.a0_min = s.at("a0_min");
    cfg.a0_max = s.at("a0_max");
    cfg.year_min = s.at("year_min");
    cfg.year_max = s.at("year_max");
    cfg.S_min = s.at("S_min");
    cfg.S_max = s.at("S_max");
    cfg.n_max = s.at("n_max");
    cfg.n_geom_p = s.at("n_geom_p");
    cfg.t_geom_p = s.at("t_geom_p");
    const auto& e = meta.at("expenses");
    cfg.expenses = ExpenseStructure{e.at("alpha"), e.at("beta"), e.at("gamma1"), e.at("gamma2")};
    cfg.v = DiscountFactor(meta.at("discount_factor").get<double>());
    const auto& g = meta.at("ground_truth");
    pf.gt.loading = g.at("loading");
    pf.gt.smoker_mult = g.at("smoker_mult");
    pf.gt.unisex = g.at("unisex");
    pf.gt.table = MortalityTable(g.at("q_male").get<std::vector<double>>(),
                                 g.at("q_female").get<std::vector<double>>());
    pf.clamped_lookups = meta.value("clamped_lookups", 0u);

    std::istringstream in(read_file(csv_path));
    std::string line;
    if (!std::getline(in, line)) throw SchemaError(csv_path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "year,month,a0,n,t,S,P,m,gender,smoker")
        throw SchemaError(csv_path.string() + ": row 1: unexpected header");
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string ctx = csv_path.string() + ": row " + std::to_string(row);
        const auto cells = split_csv_line(line);
        if (cells.size() != 10) throw SchemaError(ctx + ": expected 10 columns");
        PricedContract pc;
        Contract& c = pc.c;
        c.year = static_cast<int>(parse_long(cells[0], ctx));
        c.month = static_cast<int>(parse_long(cells[1], ctx));
        c.a0 = static_cast<int>(parse_long(cells[2], ctx));
        c.n = static_cast<int>(parse_long(cells[3], ctx));
        c.t = static_cast<int>(parse_long(cells[4], ctx));
        c.S = parse_double(cells[5], ctx);
        c.P = parse_double(cells[6], ctx);
        c.m = static_cast<int>(parse_long(cells[7], ctx));
        try {
            c.gender = gender_from_string(std::string(cells[8]));
        } catch (const std::invalid_argument& ex) {
            throw SchemaError(ctx + ": " + ex.what());
        }
        if (cells[9] == "yes") c.smoker = true;
        else if (cells[9] == "no") c.smoker = false;
        else throw SchemaError(ctx + ": smoker must be yes|no");
        validate(c);
        pc.y = discounted_cash_flows(c, cfg.expenses, cfg.v);
        pf.contracts.push_back(std::move(pc));
    }
    return pf;
}

} // namespace lifecal
