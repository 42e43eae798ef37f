#pragma once

#include <cmath>
#include <stdexcept>

#include "lifecal/rng.hpp"
#include "lifecal/tensor.hpp"

namespace lifecal {

enum class Activation { linear, relu };

struct DenseParams {
    Tensor W; // n_in x n_out
    Tensor b; // 1 x n_out
    Activation act = Activation::linear;

    std::size_t n_in() const { return W.rows(); }
    std::size_t n_out() const { return W.cols(); }
    std::size_t param_count() const { return W.numel() + b.numel(); }
};

inline void init_uniform(Tensor& t, Rng& rng, double limit) {
    for (double& x : t.data) x = rng.uniform(-limit, limit);
}

// He-style fan-in uniform init for input weights, zero biases.
inline DenseParams make_dense(std::size_t n_in, std::size_t n_out, Activation act, Rng& rng) {
    DenseParams d;
    d.W = Tensor(n_in, n_out);
    d.b = Tensor(1, n_out);
    d.act = act;
    init_uniform(d.W, rng, std::sqrt(6.0 / static_cast<double>(n_in)));
    return d;
}

// y = act(x W + b), rows processed independently.
inline Tensor dense_forward(const DenseParams& p, const Tensor& x) {
    if (x.cols() != p.n_in()) throw std::invalid_argument("dense_forward: input width mismatch");
    Tensor y(x.rows(), p.n_out());
    for (std::size_t i = 0; i < y.rows(); ++i)
        for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) = p.b(0, j);
    matmul_acc(x, p.W, y);
    if (p.act == Activation::relu)
        for (double& v : y.data)
            if (v < 0.0) v = 0.0;
    return y;
}

// Single GRU layer. Gate convention: z and r are sigmoid gates, the reset
// gate multiplies the previous hidden state before the recurrent matmul, and
// h_t = (1-z) . h_prev + z . htilde. One bias per gate.
struct GruParams {
    Tensor Wz, Wr, Wh; // n_in x n_h
    Tensor Uz, Ur, Uh; // n_h x n_h
    Tensor bz, br, bh; // 1 x n_h

    std::size_t n_in() const { return Wz.rows(); }
    std::size_t n_h() const { return Wz.cols(); }
    std::size_t param_count() const {
        return Wz.numel() + Wr.numel() + Wh.numel() + Uz.numel() + Ur.numel() + Uh.numel() +
               bz.numel() + br.numel() + bh.numel();
    }
};

inline GruParams make_gru(std::size_t n_in, std::size_t n_h, Rng& rng) {
    GruParams g;
    const double w_lim = std::sqrt(6.0 / static_cast<double>(n_in));
    const double u_lim = 1.0 / std::sqrt(static_cast<double>(n_h));
    for (Tensor* w : {&g.Wz, &g.Wr, &g.Wh}) {
        *w = Tensor(n_in, n_h);
        init_uniform(*w, rng, w_lim);
    }
    for (Tensor* u : {&g.Uz, &g.Ur, &g.Uh}) {
        *u = Tensor(n_h, n_h);
        init_uniform(*u, rng, u_lim);
    }
    g.bz = Tensor(1, n_h);
    g.br = Tensor(1, n_h);
    g.bh = Tensor(1, n_h);
    return g;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace detail {

// One GRU step on raw rows. az/ar/ah must hold x.Wg + bg on entry and are
// overwritten with the gate values z, r and htilde.
inline void gru_step_core(const GruParams& p, const double* h_prev, double* az, double* ar,
                          double* ah, double* h_out) {
    const std::size_t n = p.n_h();
    // az += h_prev Uz ; ar += h_prev Ur
    for (std::size_t k = 0; k < n; ++k) {
        const double hv = h_prev[k];
        if (hv == 0.0) continue;
        const double* uz = p.Uz.row(k);
        const double* ur = p.Ur.row(k);
        for (std::size_t j = 0; j < n; ++j) {
            az[j] += hv * uz[j];
            ar[j] += hv * ur[j];
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        az[j] = sigmoid(az[j]);
        ar[j] = sigmoid(ar[j]);
    }
    // ah += (r . h_prev) Uh
    for (std::size_t k = 0; k < n; ++k) {
        const double rv = ar[k] * h_prev[k];
        if (rv == 0.0) continue;
        const double* uh = p.Uh.row(k);
        for (std::size_t j = 0; j < n; ++j) ah[j] += rv * uh[j];
    }
    for (std::size_t j = 0; j < n; ++j) {
        ah[j] = std::tanh(ah[j]);
        h_out[j] = (1.0 - az[j]) * h_prev[j] + az[j] * ah[j];
    }
}

} // namespace detail

// Single step h_t = GRU(x_t, h_prev); x_t and h_prev are row vectors.
inline Tensor gru_step(const GruParams& p, const Tensor& x_t, const Tensor& h_prev) {
    if (x_t.cols() != p.n_in() || h_prev.cols() != p.n_h())
        throw std::invalid_argument("gru_step: shape mismatch");
    Tensor az = p.bz, ar = p.br, ah = p.bh;
    matmul_acc(x_t, p.Wz, az);
    matmul_acc(x_t, p.Wr, ar);
    matmul_acc(x_t, p.Wh, ah);
    Tensor h(1, p.n_h());
    detail::gru_step_core(p, h_prev.row(0), az.row(0), ar.row(0), ah.row(0), h.row(0));
    return h;
}

// Forward over the first valid_len rows of x; hidden state starts at zero.
// The gate caches are what the backward pass needs.
struct GruCache {
    Tensor Z, R, Htil, H; // valid_len x n_h each
};

inline Tensor gru_sequence_forward(const GruParams& p, const Tensor& x, std::size_t valid_len,
                                   GruCache& cache) {
    if (x.cols() != p.n_in()) throw std::invalid_argument("gru_sequence: input width mismatch");
    if (valid_len > x.rows()) throw std::invalid_argument("gru_sequence: valid_len exceeds rows");
    const std::size_t n = p.n_h();

    cache.Z = Tensor(valid_len, n);
    cache.R = Tensor(valid_len, n);
    cache.Htil = Tensor(valid_len, n);
    cache.H = Tensor(valid_len, n);

    // pre-activations for all steps in one pass
    for (std::size_t i = 0; i < valid_len; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            cache.Z(i, j) = p.bz(0, j);
            cache.R(i, j) = p.br(0, j);
            cache.Htil(i, j) = p.bh(0, j);
        }
    {
        Tensor xv(valid_len, p.n_in());
        std::copy(x.data.begin(), x.data.begin() + static_cast<long>(valid_len * p.n_in()),
                  xv.data.begin());
        matmul_acc(xv, p.Wz, cache.Z);
        matmul_acc(xv, p.Wr, cache.R);
        matmul_acc(xv, p.Wh, cache.Htil);
    }

    std::vector<double> h0(n, 0.0);
    for (std::size_t t = 0; t < valid_len; ++t) {
        const double* h_prev = t == 0 ? h0.data() : cache.H.row(t - 1);
        detail::gru_step_core(p, h_prev, cache.Z.row(t), cache.R.row(t), cache.Htil.row(t),
                              cache.H.row(t));
    }

    // rows beyond valid_len stay zero (masked steps)
    Tensor out(x.rows(), n);
    std::copy(cache.H.data.begin(), cache.H.data.end(), out.data.begin());
    return out;
}

struct GruGrads {
    Tensor dWz, dWr, dWh, dUz, dUr, dUh, dbz, dbr, dbh;
};

// Backward through time. d_out rows beyond valid_len are ignored (those
// outputs are constant zero). Accumulates into dx and grads.
inline void gru_sequence_backward(const GruParams& p, const Tensor& x, const GruCache& cache,
                                  const Tensor& d_out, std::size_t valid_len, Tensor* dx,
                                  GruGrads& grads) {
    const std::size_t n = p.n_h();
    if (valid_len == 0) return;

    Tensor dAZ(valid_len, n), dAR(valid_len, n), dAH(valid_len, n);
    std::vector<double> carry(n, 0.0), dh(n), drh(n);
    std::vector<double> h0(n, 0.0);

    for (std::size_t t = valid_len; t-- > 0;) {
        const double* h_prev = t == 0 ? h0.data() : cache.H.row(t - 1);
        const double* z = cache.Z.row(t);
        const double* r = cache.R.row(t);
        const double* ht = cache.Htil.row(t);
        const double* dout_t = d_out.row(t);

        for (std::size_t j = 0; j < n; ++j) dh[j] = dout_t[j] + carry[j];

        double* daz = dAZ.row(t);
        double* dar = dAR.row(t);
        double* dah = dAH.row(t);
        for (std::size_t j = 0; j < n; ++j) {
            const double dz = dh[j] * (ht[j] - h_prev[j]);
            daz[j] = dz * z[j] * (1.0 - z[j]);
            dah[j] = dh[j] * z[j] * (1.0 - ht[j] * ht[j]);
        }
        // drh = dah Uh^T
        std::fill(drh.begin(), drh.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double* uh = p.Uh.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += dah[k] * uh[k];
            drh[j] = s;
        }
        for (std::size_t j = 0; j < n; ++j) {
            const double dr = drh[j] * h_prev[j];
            dar[j] = dr * r[j] * (1.0 - r[j]);
        }
        // carry = dh.(1-z) + daz Uz^T + dar Ur^T + drh.r
        for (std::size_t j = 0; j < n; ++j) {
            const double* uz = p.Uz.row(j);
            const double* ur = p.Ur.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += daz[k] * uz[k] + dar[k] * ur[k];
            carry[j] = dh[j] * (1.0 - z[j]) + s + drh[j] * r[j];
        }
    }

    Tensor xv(valid_len, p.n_in());
    std::copy(x.data.begin(), x.data.begin() + static_cast<long>(valid_len * p.n_in()),
              xv.data.begin());
    Tensor hprev(valid_len, n); // rows h_{-1}..h_{valid_len-2}, first row zero
    for (std::size_t t = 1; t < valid_len; ++t)
        std::copy(cache.H.row(t - 1), cache.H.row(t - 1) + n, hprev.row(t));
    Tensor rh(valid_len, n);
    for (std::size_t t = 0; t < valid_len; ++t)
        for (std::size_t j = 0; j < n; ++j) rh(t, j) = cache.R(t, j) * hprev(t, j);

    matmul_at_acc(xv, dAZ, grads.dWz);
    matmul_at_acc(xv, dAR, grads.dWr);
    matmul_at_acc(xv, dAH, grads.dWh);
    matmul_at_acc(hprev, dAZ, grads.dUz);
    matmul_at_acc(hprev, dAR, grads.dUr);
    matmul_at_acc(rh, dAH, grads.dUh);
    for (std::size_t t = 0; t < valid_len; ++t)
        for (std::size_t j = 0; j < n; ++j) {
            grads.dbz(0, j) += dAZ(t, j);
            grads.dbr(0, j) += dAR(t, j);
            grads.dbh(0, j) += dAH(t, j);
        }
    if (dx) {
        Tensor dxv(valid_len, p.n_in());
        matmul_bt_acc(dAZ, p.Wz, dxv);
        matmul_bt_acc(dAR, p.Wr, dxv);
        matmul_bt_acc(dAH, p.Wh, dxv);
        for (std::size_t t = 0; t < valid_len; ++t)
            for (std::size_t j = 0; j < p.n_in(); ++j) (*dx)(t, j) += dxv(t, j);
    }
}

// Numerically stable row softmax with max subtraction.
inline Tensor softmax_rows(const Tensor& x) {
    Tensor y(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* xi = x.row(i);
        double* yi = y.row(i);
        double mx = xi[0];
        for (std::size_t j = 1; j < x.cols(); ++j) mx = std::max(mx, xi[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            yi[j] = std::exp(xi[j] - mx);
            sum += yi[j];
        }
        for (std::size_t j = 0; j < x.cols(); ++j) yi[j] /= sum;
    }
    return y;
}

// Mean over rows of KL(p || q) with an epsilon floor on q and 0 ln 0 = 0.
inline double kl_loss(const Tensor& p, const Tensor& q) {
    if (!p.same_shape(q)) throw std::invalid_argument("kl_loss: shape mismatch");
    constexpr double eps = 1e-12;
    double acc = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i)
        for (std::size_t j = 0; j < p.cols(); ++j) {
            const double pv = p(i, j);
            if (pv > 0.0) acc += pv * std::log(pv / std::max(q(i, j), eps));
        }
    return acc / static_cast<double>(p.rows());
}

} // namespace lifecal
