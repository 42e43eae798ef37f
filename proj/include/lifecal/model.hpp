#pragma once

#include <array>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "lifecal/contract.hpp"
#include "lifecal/csv.hpp"
#include "lifecal/errors.hpp"
#include "lifecal/layers.hpp"
#include "lifecal/mortality.hpp"
#include "lifecal/scaler.hpp"
#include "lifecal/transition.hpp"

namespace lifecal {

// Feed-forward baseline: dense ReLU stack with a linear logit output, fed by
// (current age, payment style) scaled over the table grid.
struct BaselineModel {
    std::vector<DenseParams> layers;

    static BaselineModel make(const std::vector<std::size_t>& widths, Rng& rng) {
        if (widths.size() < 2 || widths.back() != 2)
            throw std::invalid_argument("baseline: need widths ending in 2 output logits");
        BaselineModel b;
        for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
            const Activation act =
                i + 2 == widths.size() ? Activation::linear : Activation::relu;
            b.layers.push_back(make_dense(widths[i], widths[i + 1], act, rng));
        }
        return b;
    }

    Tensor forward(const Tensor& x) const {
        Tensor h = x;
        for (const DenseParams& l : layers) h = dense_forward(l, h);
        return h;
    }

    std::vector<std::size_t> widths() const {
        std::vector<std::size_t> w;
        if (layers.empty()) return w;
        w.push_back(layers.front().n_in());
        for (const DenseParams& l : layers) w.push_back(l.n_out());
        return w;
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const DenseParams& l : layers) n += l.param_count();
        return n;
    }
};

// Recurrent residual: dense ReLU front, one GRU layer, linear logit output.
// Input features: (current age, payment style, gender, smoker).
struct ResidualModel {
    std::vector<DenseParams> front;
    GruParams gru;
    DenseParams out;

    static ResidualModel make(const std::vector<std::size_t>& widths, Rng& rng) {
        if (widths.size() < 4 || widths.back() != 2)
            throw std::invalid_argument("residual: need >= 4 widths ending in 2 output logits");
        ResidualModel r;
        for (std::size_t i = 0; i + 3 < widths.size(); ++i)
            r.front.push_back(make_dense(widths[i], widths[i + 1], Activation::relu, rng));
        const std::size_t d = widths.size();
        r.gru = make_gru(widths[d - 3], widths[d - 2], rng);
        r.out = make_dense(widths[d - 2], widths[d - 1], Activation::linear, rng);
        return r;
    }

    // All parameters zero: the GRU fixes the hidden state at zero and the
    // output layer emits zero logits, so the joint model reduces to the
    // baseline.
    static ResidualModel zeros(const std::vector<std::size_t>& widths) {
        Rng rng(0);
        ResidualModel r = make(widths, rng);
        for (Tensor* t : r.param_tensors())
            t->fill(0.0);
        return r;
    }

    Tensor forward(const Tensor& x) const {
        Tensor h = x;
        for (const DenseParams& l : front) h = dense_forward(l, h);
        GruCache cache;
        h = gru_sequence_forward(gru, h, h.rows(), cache);
        return dense_forward(out, h);
    }

    std::vector<Tensor*> param_tensors() {
        std::vector<Tensor*> ps;
        for (DenseParams& l : front) {
            ps.push_back(&l.W);
            ps.push_back(&l.b);
        }
        for (Tensor* t : {&gru.Wz, &gru.Wr, &gru.Wh, &gru.Uz, &gru.Ur, &gru.Uh, &gru.bz, &gru.br,
                          &gru.bh})
            ps.push_back(t);
        ps.push_back(&out.W);
        ps.push_back(&out.b);
        return ps;
    }

    std::vector<std::size_t> widths() const {
        std::vector<std::size_t> w;
        if (front.empty()) return w;
        w.push_back(front.front().n_in());
        for (const DenseParams& l : front) w.push_back(l.n_out());
        w.push_back(gru.n_h());
        w.push_back(out.n_out());
        return w;
    }

    std::size_t param_count() const {
        std::size_t n = gru.param_count() + out.param_count();
        for (const DenseParams& l : front) n += l.param_count();
        return n;
    }
};

// Stage-1 artifact: table-fitted baseline plus the grid scaler it was
// trained with.
struct BaselineCheckpoint {
    BaselineModel net;
    MinMaxScaler scaler; // over (age, m) on the table grid
    Gender gender = Gender::male;
};

inline MinMaxScaler table_grid_scaler() {
    return MinMaxScaler({0.0, 1.0}, {static_cast<double>(MortalityTable::a_max), 12.0});
}

// Joint model: frozen baseline boosted by the residual in logit space,
// composed under softmax. Row 1 of every emitted matrix is the absorbing row.
struct Model {
    BaselineModel base;
    MinMaxScaler base_scaler;
    Gender base_gender = Gender::male;
    ResidualModel res;
    MinMaxScaler res_scaler; // over (age, m, gender, smoker) on the portfolio
};

// ---- step encoding ---------------------------------------------------------

// Current age after k iterations of width 1/m years.
inline double current_age(const Contract& c, int k) {
    return c.a0 + static_cast<double>(k) / c.m;
}

inline std::array<double, 2> encode_base_step(const Contract& c, int k, const MinMaxScaler& s) {
    return {s.apply_one(current_age(c, k), 0), s.apply_one(static_cast<double>(c.m), 1)};
}

// Residual features; premium and sum insured are deliberately not inputs.
inline std::array<double, 4> encode_step(const Contract& c, int k, const MinMaxScaler& s) {
    return {s.apply_one(current_age(c, k), 0), s.apply_one(static_cast<double>(c.m), 1),
            s.apply_one(c.gender == Gender::female ? 1.0 : 0.0, 2),
            s.apply_one(c.smoker ? 1.0 : 0.0, 3)};
}

inline Tensor base_feature_matrix(const Contract& c, const MinMaxScaler& s, int steps) {
    Tensor x(static_cast<std::size_t>(steps), 2);
    for (int k = 0; k < steps; ++k) {
        const auto f = encode_base_step(c, k, s);
        x(static_cast<std::size_t>(k), 0) = f[0];
        x(static_cast<std::size_t>(k), 1) = f[1];
    }
    return x;
}

inline Tensor res_feature_matrix(const Contract& c, const MinMaxScaler& s, int steps) {
    Tensor x(static_cast<std::size_t>(steps), 4);
    for (int k = 0; k < steps; ++k) {
        const auto f = encode_step(c, k, s);
        for (std::size_t j = 0; j < 4; ++j) x(static_cast<std::size_t>(k), j) = f[j];
    }
    return x;
}

// ---- prediction ------------------------------------------------------------

// One-step matrices pi_hat^(k)(c), k = 0..n*m-1, from the composed model.
inline TransitionSequence predict_sequence(const Model& model, const Contract& c) {
    const int K = c.iterations();
    TransitionSequence seq;
    seq.reserve(static_cast<std::size_t>(K));
    if (K == 0) return seq;

    Tensor logits = model.base.forward(base_feature_matrix(c, model.base_scaler, K));
    const Tensor res_logits = model.res.forward(res_feature_matrix(c, model.res_scaler, K));
    for (std::size_t i = 0; i < logits.numel(); ++i) logits.data[i] += res_logits.data[i];
    const Tensor probs = softmax_rows(logits);
    for (int k = 0; k < K; ++k)
        seq.push_back(TransitionMatrix::from_death_prob(probs(static_cast<std::size_t>(k), 1)));
    return seq;
}

// Baseline-only probabilities on the table grid (used by the stage-1 fit
// tolerance and by diagnostics).
inline double baseline_death_prob(const BaselineModel& net, const MinMaxScaler& scaler, double age,
                                  int m) {
    Tensor x(1, 2);
    x(0, 0) = scaler.apply_one(age, 0);
    x(0, 1) = scaler.apply_one(static_cast<double>(m), 1);
    return softmax_rows(net.forward(x))(0, 1);
}

// ---- checkpoint I/O --------------------------------------------------------
//
// Structured text, one tensor per `param` entry: name, shape, then row-major
// decimal values on one line. Scaler bounds and layer widths make the file
// self-describing.

namespace detail {

inline void emit_tensor(std::ostringstream& out, const std::string& name, const Tensor& t) {
    out << "param " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (std::size_t i = 0; i < t.numel(); ++i) {
        if (i) out << ' ';
        out << format_double(t.data[i]);
    }
    out << '\n';
}

inline void emit_scaler(std::ostringstream& out, const std::string& prefix,
                        const MinMaxScaler& s) {
    out << prefix << ".scaler.min";
    for (double v : s.mins()) out << ' ' << format_double(v);
    out << '\n' << prefix << ".scaler.max";
    for (double v : s.maxs()) out << ' ' << format_double(v);
    out << '\n';
}

inline void emit_baseline(std::ostringstream& out, const BaselineCheckpoint& b) {
    out << "base.gender " << to_string(b.gender) << '\n';
    out << "base.widths";
    for (std::size_t w : b.net.widths()) out << ' ' << w;
    out << '\n';
    emit_scaler(out, "base", b.scaler);
    for (std::size_t i = 0; i < b.net.layers.size(); ++i) {
        const std::string prefix = "base.layer" + std::to_string(i + 1);
        emit_tensor(out, prefix + ".W", b.net.layers[i].W);
        emit_tensor(out, prefix + ".b", b.net.layers[i].b);
    }
}

class CheckpointReader {
public:
    explicit CheckpointReader(const std::string& text, std::string origin)
        : in_(text), origin_(std::move(origin)) {}

    std::string next_line() {
        std::string line;
        while (std::getline(in_, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) return line;
        }
        throw SchemaError(origin_ + ": unexpected end of checkpoint");
    }

    std::vector<double> read_values(const std::string& keyword, std::string& name_out) {
        const std::string line = next_line();
        std::istringstream ls(line);
        std::string kw;
        ls >> kw >> name_out;
        if (kw != keyword) throw SchemaError(origin_ + ": expected '" + keyword + "', got '" + kw + "'");
        std::size_t r = 0, c = 0;
        if (!(ls >> r >> c)) throw SchemaError(origin_ + ": bad shape for " + name_out);
        shape_ = {r, c};
        std::istringstream vs(next_line());
        std::vector<double> vals(r * c);
        for (double& v : vals)
            if (!(vs >> v)) throw SchemaError(origin_ + ": short value row for " + name_out);
        return vals;
    }

    Tensor read_tensor(const std::string& expected_name) {
        std::string name;
        std::vector<double> vals = read_values("param", name);
        if (name != expected_name)
            throw SchemaError(origin_ + ": expected param " + expected_name + ", got " + name);
        Tensor t(shape_[0], shape_[1]);
        t.data = std::move(vals);
        return t;
    }

    // Parses "<key> v1 v2 ..." after validating the key.
    std::vector<double> read_keyed_list(const std::string& key) {
        std::istringstream ls(next_line());
        std::string k;
        ls >> k;
        if (k != key) throw SchemaError(origin_ + ": expected '" + key + "', got '" + k + "'");
        std::vector<double> vals;
        double v;
        while (ls >> v) vals.push_back(v);
        return vals;
    }

    std::string read_keyed_word(const std::string& key) {
        std::istringstream ls(next_line());
        std::string k, w;
        ls >> k >> w;
        if (k != key) throw SchemaError(origin_ + ": expected '" + key + "', got '" + k + "'");
        return w;
    }

    const std::string& origin() const { return origin_; }

private:
    std::istringstream in_;
    std::string origin_;
    std::array<std::size_t, 2> shape_{0, 0};
};

inline BaselineCheckpoint read_baseline(CheckpointReader& r) {
    BaselineCheckpoint b;
    b.gender = gender_from_string(r.read_keyed_word("base.gender"));
    const std::vector<double> wd = r.read_keyed_list("base.widths");
    const std::vector<double> mins = r.read_keyed_list("base.scaler.min");
    const std::vector<double> maxs = r.read_keyed_list("base.scaler.max");
    b.scaler = MinMaxScaler(mins, maxs);
    for (std::size_t i = 0; i + 1 < wd.size(); ++i) {
        DenseParams l;
        const std::string prefix = "base.layer" + std::to_string(i + 1);
        l.W = r.read_tensor(prefix + ".W");
        l.b = r.read_tensor(prefix + ".b");
        l.act = i + 2 == wd.size() ? Activation::linear : Activation::relu;
        b.net.layers.push_back(std::move(l));
    }
    return b;
}

} // namespace detail

inline void save_baseline_checkpoint(const std::filesystem::path& path,
                                     const BaselineCheckpoint& b) {
    std::ostringstream out;
    out << "lifecal-checkpoint v1\n";
    detail::emit_baseline(out, b);
    out << "end\n";
    write_file_atomic(path, out.str());
}

inline void save_model_checkpoint(const std::filesystem::path& path, const Model& model) {
    std::ostringstream out;
    out << "lifecal-checkpoint v1\n";
    detail::emit_baseline(out, {model.base, model.base_scaler, model.base_gender});
    out << "res.widths";
    for (std::size_t w : model.res.widths()) out << ' ' << w;
    out << '\n';
    detail::emit_scaler(out, "res", model.res_scaler);
    for (std::size_t i = 0; i < model.res.front.size(); ++i) {
        const std::string prefix = "res.layer" + std::to_string(i + 1);
        detail::emit_tensor(out, prefix + ".W", model.res.front[i].W);
        detail::emit_tensor(out, prefix + ".b", model.res.front[i].b);
    }
    for (const auto& [name, t] :
         std::initializer_list<std::pair<const char*, const Tensor*>>{
             {"res.gru.Wz", &model.res.gru.Wz}, {"res.gru.Wr", &model.res.gru.Wr},
             {"res.gru.Wh", &model.res.gru.Wh}, {"res.gru.Uz", &model.res.gru.Uz},
             {"res.gru.Ur", &model.res.gru.Ur}, {"res.gru.Uh", &model.res.gru.Uh},
             {"res.gru.bz", &model.res.gru.bz}, {"res.gru.br", &model.res.gru.br},
             {"res.gru.bh", &model.res.gru.bh}})
        detail::emit_tensor(out, name, *t);
    detail::emit_tensor(out, "res.out.W", model.res.out.W);
    detail::emit_tensor(out, "res.out.b", model.res.out.b);
    out << "end\n";
    write_file_atomic(path, out.str());
}

inline BaselineCheckpoint load_baseline_checkpoint(const std::filesystem::path& path) {
    detail::CheckpointReader r(read_file(path), path.string());
    if (r.next_line() != "lifecal-checkpoint v1")
        throw SchemaError(path.string() + ": not a lifecal checkpoint");
    return detail::read_baseline(r);
}

inline Model load_model_checkpoint(const std::filesystem::path& path) {
    detail::CheckpointReader r(read_file(path), path.string());
    if (r.next_line() != "lifecal-checkpoint v1")
        throw SchemaError(path.string() + ": not a lifecal checkpoint");
    BaselineCheckpoint b = detail::read_baseline(r);
    Model model;
    model.base = std::move(b.net);
    model.base_scaler = std::move(b.scaler);
    model.base_gender = b.gender;

    const std::vector<double> wd = r.read_keyed_list("res.widths");
    if (wd.size() < 4) throw SchemaError(path.string() + ": checkpoint has no residual section");
    const std::vector<double> mins = r.read_keyed_list("res.scaler.min");
    const std::vector<double> maxs = r.read_keyed_list("res.scaler.max");
    model.res_scaler = MinMaxScaler(mins, maxs);
    for (std::size_t i = 0; i + 3 < wd.size(); ++i) {
        DenseParams l;
        const std::string prefix = "res.layer" + std::to_string(i + 1);
        l.W = r.read_tensor(prefix + ".W");
        l.b = r.read_tensor(prefix + ".b");
        l.act = Activation::relu;
        model.res.front.push_back(std::move(l));
    }
    GruParams& g = model.res.gru;
    g.Wz = r.read_tensor("res.gru.Wz");
    g.Wr = r.read_tensor("res.gru.Wr");
    g.Wh = r.read_tensor("res.gru.Wh");
    g.Uz = r.read_tensor("res.gru.Uz");
    g.Ur = r.read_tensor("res.gru.Ur");
    g.Uh = r.read_tensor("res.gru.Uh");
    g.bz = r.read_tensor("res.gru.bz");
    g.br = r.read_tensor("res.gru.br");
    g.bh = r.read_tensor("res.gru.bh");
    model.res.out.W = r.read_tensor("res.out.W");
    model.res.out.b = r.read_tensor("res.out.b");
    model.res.out.act = Activation::linear;
    return model;
}

} // namespace lifecal
