#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "lifecal/layers.hpp"
#include "lifecal/tensor.hpp"

namespace lifecal {

struct Var {
    std::uint32_t id = 0;
};

// Reverse-mode tape over tensor-level primitives. Every op records its output
// and a pull closure that pushes adjoints into its parents; backward replays
// the closures in reverse creation order, which is a topological order by
// construction.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool needs_grad = false) {
        return push(std::move(value), needs_grad, nullptr);
    }
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    const Tensor& value(Var v) const { return nodes_[v.id].value; }

    // Zero-sized tensor if the node never received an adjoint.
    const Tensor& grad(Var v) const { return nodes_[v.id].grad; }

    // y = act(x W + b)
    Var dense(Var x, Var W, Var b, Activation act) {
        const Tensor& xv = value(x);
        const Tensor& wv = value(W);
        const Tensor& bv = value(b);
        Tensor y(xv.rows(), wv.cols());
        for (std::size_t i = 0; i < y.rows(); ++i)
            for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) = bv(0, j);
        matmul_acc(xv, wv, y);
        if (act == Activation::relu)
            for (double& v : y.data)
                if (v < 0.0) v = 0.0;

        const bool ng = needs(x) || needs(W) || needs(b);
        return push(std::move(y), ng, [this, x, W, b, act](Var out) {
            const Tensor& dy = nodes_[out.id].grad;
            const Tensor& yv = nodes_[out.id].value;
            Tensor dz = dy;
            if (act == Activation::relu)
                for (std::size_t i = 0; i < dz.numel(); ++i)
                    if (yv.data[i] <= 0.0) dz.data[i] = 0.0;
            if (needs(x)) matmul_bt_acc(dz, nodes_[W.id].value, grad_buf(x));
            if (needs(W)) matmul_at_acc(nodes_[x.id].value, dz, grad_buf(W));
            if (needs(b)) {
                Tensor& db = grad_buf(b);
                for (std::size_t i = 0; i < dz.rows(); ++i)
                    for (std::size_t j = 0; j < dz.cols(); ++j) db(0, j) += dz(i, j);
            }
        });
    }

    struct GruVars {
        Var Wz, Wr, Wh, Uz, Ur, Uh, bz, br, bh;
    };

    // Unrolled GRU over the first valid_len rows of x; output rows beyond
    // valid_len are constant zero (masked steps).
    Var gru_sequence(Var x, const GruVars& g, std::size_t valid_len) {
        GruParams p = pack(g);
        auto cache = std::make_shared<GruCache>();
        Tensor out = gru_sequence_forward(p, value(x), valid_len, *cache);

        bool ng = needs(x);
        for (Var v : {g.Wz, g.Wr, g.Wh, g.Uz, g.Ur, g.Uh, g.bz, g.br, g.bh}) ng = ng || needs(v);
        return push(std::move(out), ng, [this, x, g, valid_len, cache](Var out_var) {
            const GruParams p2 = pack(g);
            GruGrads gr{Tensor(p2.n_in(), p2.n_h()), Tensor(p2.n_in(), p2.n_h()),
                        Tensor(p2.n_in(), p2.n_h()), Tensor(p2.n_h(), p2.n_h()),
                        Tensor(p2.n_h(), p2.n_h()), Tensor(p2.n_h(), p2.n_h()),
                        Tensor(1, p2.n_h()),        Tensor(1, p2.n_h()),
                        Tensor(1, p2.n_h())};
            Tensor* dx = needs(x) ? &grad_buf(x) : nullptr;
            gru_sequence_backward(p2, nodes_[x.id].value, *cache, nodes_[out_var.id].grad,
                                  valid_len, dx, gr);
            auto add_into = [this](Var v, const Tensor& d) {
                if (!needs(v)) return;
                Tensor& dst = grad_buf(v);
                for (std::size_t i = 0; i < d.numel(); ++i) dst.data[i] += d.data[i];
            };
            add_into(g.Wz, gr.dWz);
            add_into(g.Wr, gr.dWr);
            add_into(g.Wh, gr.dWh);
            add_into(g.Uz, gr.dUz);
            add_into(g.Ur, gr.dUr);
            add_into(g.Uh, gr.dUh);
            add_into(g.bz, gr.dbz);
            add_into(g.br, gr.dbr);
            add_into(g.bh, gr.dbh);
        });
    }

    // y = a + b, elementwise over two differentiable tensors.
    Var add(Var a, Var b) {
        Tensor y = value(a);
        const Tensor& bv = value(b);
        if (!y.same_shape(bv)) throw std::invalid_argument("add: shape mismatch");
        for (std::size_t i = 0; i < y.numel(); ++i) y.data[i] += bv.data[i];
        return push(std::move(y), needs(a) || needs(b), [this, a, b](Var out) {
            const Tensor& dy = nodes_[out.id].grad;
            for (Var v : {a, b}) {
                if (!needs(v)) continue;
                Tensor& dst = grad_buf(v);
                for (std::size_t i = 0; i < dy.numel(); ++i) dst.data[i] += dy.data[i];
            }
        });
    }

    // y = x + c with c constant (used to add frozen baseline logits).
    Var add_constant(Var x, const Tensor& c) {
        Tensor y = value(x);
        if (!y.same_shape(c)) throw std::invalid_argument("add_constant: shape mismatch");
        for (std::size_t i = 0; i < y.numel(); ++i) y.data[i] += c.data[i];
        return push(std::move(y), needs(x), [this, x](Var out) {
            if (!needs(x)) return;
            const Tensor& dy = nodes_[out.id].grad;
            Tensor& dx = grad_buf(x);
            for (std::size_t i = 0; i < dy.numel(); ++i) dx.data[i] += dy.data[i];
        });
    }

    Var softmax(Var x) {
        Tensor y = softmax_rows(value(x));
        return push(std::move(y), needs(x), [this, x](Var out) {
            if (!needs(x)) return;
            const Tensor& yv = nodes_[out.id].value;
            const Tensor& dy = nodes_[out.id].grad;
            Tensor& dx = grad_buf(x);
            for (std::size_t i = 0; i < yv.rows(); ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < yv.cols(); ++j) dot += dy(i, j) * yv(i, j);
                for (std::size_t j = 0; j < yv.cols(); ++j)
                    dx(i, j) += yv(i, j) * (dy(i, j) - dot);
            }
        });
    }

    // Expected discounted cash-flow sweep over the alive row. probs holds one
    // probability row (p00, p01) per transition k = 0..valid_len-1; y00/y01
    // are the discounted cash flows for k = 0..valid_len. Returns a scalar.
    Var psi_sweep(Var probs, std::shared_ptr<const std::vector<double>> y00,
                  std::shared_ptr<const std::vector<double>> y01, std::size_t valid_len) {
        const Tensor& pv = value(probs);
        if (pv.cols() != 2 || valid_len > pv.rows() || y00->size() < valid_len + 1 ||
            y01->size() < valid_len + 1)
            throw std::invalid_argument("psi_sweep: shape mismatch");

        auto alive = std::make_shared<std::vector<double>>(valid_len + 1);
        (*alive)[0] = 1.0;
        double acc = (*y00)[0];
        for (std::size_t k = 1; k <= valid_len; ++k) {
            const double p00 = pv(k - 1, 0), p01 = pv(k - 1, 1);
            acc += (*alive)[k - 1] * (p00 * (*y00)[k] + p01 * (*y01)[k]);
            (*alive)[k] = (*alive)[k - 1] * p00;
        }
        return push(Tensor::scalar(acc), needs(probs),
                    [this, probs, y00, y01, valid_len, alive](Var out) {
                        if (!needs(probs)) return;
                        const double seed = nodes_[out.id].grad.data[0];
                        const Tensor& pv = nodes_[probs.id].value;
                        Tensor& dp = grad_buf(probs);
                        double carry = 0.0; // adjoint of alive[k]
                        for (std::size_t k = valid_len; k >= 1; --k) {
                            const double a_prev = (*alive)[k - 1];
                            const double w = pv(k - 1, 0) * (*y00)[k] + pv(k - 1, 1) * (*y01)[k];
                            dp(k - 1, 0) += seed * a_prev * (*y00)[k] + carry * a_prev;
                            dp(k - 1, 1) += seed * a_prev * (*y01)[k];
                            carry = seed * w + carry * pv(k - 1, 0);
                        }
                    });
    }

    Var abs_value(Var x) {
        const double v = value(x).data[0];
        const double sign = v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0; // subgradient 0 at 0
        return push(Tensor::scalar(std::abs(v)), needs(x), [this, x, sign](Var out) {
            if (!needs(x)) return;
            grad_buf(x).data[0] += sign * nodes_[out.id].grad.data[0];
        });
    }

    // Mean over rows of KL(targets || q) with epsilon floor on q.
    Var kl_mean(Var q, Tensor targets) {
        constexpr double eps = 1e-12;
        const Tensor& qv = value(q);
        const double loss = kl_loss(targets, qv);
        auto tptr = std::make_shared<Tensor>(std::move(targets));
        return push(Tensor::scalar(loss), needs(q), [this, q, tptr, eps](Var out) {
            if (!needs(q)) return;
            const double seed = nodes_[out.id].grad.data[0];
            const Tensor& qv = nodes_[q.id].value;
            Tensor& dq = grad_buf(q);
            const double inv_rows = 1.0 / static_cast<double>(tptr->rows());
            for (std::size_t i = 0; i < qv.rows(); ++i)
                for (std::size_t j = 0; j < qv.cols(); ++j) {
                    const double pv = (*tptr)(i, j);
                    if (pv > 0.0)
                        dq(i, j) -= seed * inv_rows * pv / std::max(qv(i, j), eps);
                }
        });
    }

    Var sum(Var x) {
        double s = 0.0;
        for (double v : value(x).data) s += v;
        return push(Tensor::scalar(s), needs(x), [this, x](Var out) {
            if (!needs(x)) return;
            const double seed = nodes_[out.id].grad.data[0];
            Tensor& dx = grad_buf(x);
            for (double& v : dx.data) v += seed;
        });
    }

    // Mean of scalar vars, in the given (fixed) order.
    Var mean_of(std::vector<Var> xs) {
        double s = 0.0;
        for (Var v : xs) s += value(v).data[0];
        const double n = static_cast<double>(xs.size());
        bool ng = false;
        for (Var v : xs) ng = ng || needs(v);
        auto ids = std::make_shared<std::vector<Var>>(std::move(xs));
        return push(Tensor::scalar(s / n), ng, [this, ids, n](Var out) {
            const double seed = nodes_[out.id].grad.data[0] / n;
            for (Var v : *ids)
                if (needs(v)) grad_buf(v).data[0] += seed;
        });
    }

    // Seeds d(root)=1 and pulls adjoints back through every recorded op.
    void backward(Var root) {
        if (nodes_[root.id].value.numel() != 1)
            throw std::invalid_argument("backward: root must be scalar");
        grad_buf(root).data[0] += 1.0;
        for (std::uint32_t id = root.id + 1; id-- > 0;) {
            Node& node = nodes_[id];
            if (node.pull && node.grad.numel() != 0) node.pull(Var{id});
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Var)> pull;
        bool needs_grad = false;
    };

    bool needs(Var v) const { return nodes_[v.id].needs_grad; }

    Tensor& grad_buf(Var v) {
        Node& node = nodes_[v.id];
        if (node.grad.numel() == 0)
            node.grad = Tensor(node.value.rows(), node.value.cols());
        return node.grad;
    }

    GruParams pack(const GruVars& g) const {
        return GruParams{value(g.Wz), value(g.Wr), value(g.Wh), value(g.Uz), value(g.Ur),
                         value(g.Uh), value(g.bz), value(g.br), value(g.bh)};
    }

    template <typename F>
    Var push(Tensor value, bool needs_grad, F&& pull) {
        Node node;
        node.value = std::move(value);
        node.needs_grad = needs_grad;
        if constexpr (!std::is_same_v<std::decay_t<F>, std::nullptr_t>) {
            if (needs_grad) node.pull = std::forward<F>(pull);
        }
        nodes_.push_back(std::move(node));
        return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    std::vector<Node> nodes_;
};

} // namespace lifecal
