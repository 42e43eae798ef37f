#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "lifecal/contract.hpp"
#include "lifecal/csv.hpp"
#include "lifecal/errors.hpp"
#include "lifecal/transition.hpp"

namespace lifecal {

// Annual death probabilities per integer age and gender, DAV-2008T style.
// Immutable after construction; ages 0..a_max must all be present.
class MortalityTable {
public:
    static constexpr int a_max = 121;

    MortalityTable(std::vector<double> q_male, std::vector<double> q_female)
        : q_{std::move(q_male), std::move(q_female)} {
        for (const auto& q : q_) {
            if (static_cast<int>(q.size()) != a_max + 1)
                throw SchemaError("mortality table must cover ages 0.." + std::to_string(a_max));
            for (double x : q)
                if (!(x >= 0.0 && x <= 1.0)) throw SchemaError("probability out of range");
        }
    }

    // Annual q at integer age; ages beyond a_max clamp to a_max. The caller
    // can observe clamping through the optional flag (logged once per run by
    // the generator).
    double q(int age, Gender g, bool* clamped = nullptr) const {
        if (age > a_max) {
            age = a_max;
            if (clamped) *clamped = true;
        }
        if (age < 0) throw std::out_of_range("mortality table: negative age");
        return q_[g == Gender::male ? 0 : 1][static_cast<std::size_t>(age)];
    }

private:
    std::array<std::vector<double>, 2> q_;
};

// CSV schema (exact): header `age,q_male,q_female`, one row per integer age
// 0..121, decimal point, no thousands separators.
inline MortalityTable load_table(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw SchemaError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "age,q_male,q_female")
        throw SchemaError(path + ": row 1: expected header 'age,q_male,q_female'");

    std::vector<double> qm(MortalityTable::a_max + 1, -1.0), qf(MortalityTable::a_max + 1, -1.0);
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string ctx = path + ": row " + std::to_string(row);
        const auto cells = split_csv_line(line);
        if (cells.size() != 3) throw SchemaError(ctx + ": expected 3 columns");
        const long age = parse_long(cells[0], ctx);
        if (age < 0 || age > MortalityTable::a_max)
            throw SchemaError(ctx + ": age " + std::to_string(age) + " outside 0..121");
        if (qm[static_cast<std::size_t>(age)] >= 0.0)
            throw SchemaError(ctx + ": duplicate age " + std::to_string(age));
        const double m = parse_double(cells[1], ctx);
        const double f = parse_double(cells[2], ctx);
        if (!(m >= 0.0 && m <= 1.0) || !(f >= 0.0 && f <= 1.0))
            throw SchemaError(ctx + ": probability out of range");
        qm[static_cast<std::size_t>(age)] = m;
        qf[static_cast<std::size_t>(age)] = f;
    }
    for (int a = 0; a <= MortalityTable::a_max; ++a)
        if (qm[static_cast<std::size_t>(a)] < 0.0)
            throw SchemaError(path + ": missing age " + std::to_string(a));
    return MortalityTable(std::move(qm), std::move(qf));
}

// One-step matrix for payment style m under uniformly distributed deaths
// within the year: pi_01 = q/m.
inline TransitionMatrix subannual_matrix(const MortalityTable& tbl, int age, int m, Gender g,
                                         bool* clamped = nullptr) {
    if (m != 1 && m != 2 && m != 4 && m != 12)
        throw std::invalid_argument("subannual_matrix: m must be in {1,2,4,12}");
    return TransitionMatrix::from_death_prob(tbl.q(age, g, clamped) / m);
}

// Table-to-network training set D_DAV(g): one record per (age, m) with the
// sub-annual target matrix. Inputs are min-max scaled to [0,1] over the grid.
struct TableRecord {
    int age = 0;
    int m = 1;
    double age_scaled = 0.0;
    double m_scaled = 0.0;
    TransitionMatrix target;
};

struct TableDataset {
    Gender gender = Gender::male;
    std::vector<TableRecord> records;
};

inline double scale_age_for_table(double age) { return age / MortalityTable::a_max; }
inline double scale_m_for_table(double m) { return (m - 1.0) / 11.0; }

inline TableDataset build_dav_dataset(const MortalityTable& tbl, Gender g) {
    TableDataset ds;
    ds.gender = g;
    ds.records.reserve(static_cast<std::size_t>(MortalityTable::a_max + 1) * kPaymentStyles.size());
    for (int a = 0; a <= MortalityTable::a_max; ++a)
        for (int m : kPaymentStyles)
            ds.records.push_back({a, m, scale_age_for_table(a), scale_m_for_table(m),
                                  subannual_matrix(tbl, a, m, g)});
    return ds;
}

// Synthetic DAV-like table used by tests and the bundled data file. The
// shape is Gompertz-Makeham, q(a) = min(1, A + B*c^a); the constants are
// chosen to resemble a German term-life guideline table but are NOT official
// values.
inline MortalityTable synthetic_table() {
    constexpr double Am = 2.2e-4, Bm = 2.7e-5, cm = 1.099;
    constexpr double Af = 1.5e-4, Bf = 1.35e-5, cf = 1.103;
    std::vector<double> qm, qf;
    for (int a = 0; a <= MortalityTable::a_max; ++a) {
        qm.push_back(std::min(1.0, Am + Bm * std::pow(cm, a)));
        qf.push_back(std::min(1.0, Af + Bf * std::pow(cf, a)));
    }
    return MortalityTable(std::move(qm), std::move(qf));
}

inline std::string table_to_csv(const MortalityTable& tbl) {
    std::string out = "age,q_male,q_female\n";
    for (int a = 0; a <= MortalityTable::a_max; ++a) {
        out += std::to_string(a);
        out += ',';
        out += format_double(tbl.q(a, Gender::male));
        out += ',';
        out += format_double(tbl.q(a, Gender::female));
        out += '\n';
    }
    return out;
}

} // namespace lifecal
