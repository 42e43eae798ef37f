#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lifecal/tensor.hpp"

namespace lifecal {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard adam with bias correction. Copyable: a cloned state stepped with
// the same inputs produces identical parameters.
class AdamState {
public:
    AdamState() = default;
    explicit AdamState(const std::vector<Tensor*>& params, AdamConfig cfg = {}) : cfg_(cfg) {
        for (const Tensor* p : params) {
            m_.emplace_back(p->rows(), p->cols());
            v_.emplace_back(p->rows(), p->cols());
        }
    }

    void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
              double lr) {
        if (params.size() != m_.size() || grads.size() != m_.size())
            throw std::invalid_argument("adam_step: parameter count mismatch");
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& p = *params[i];
            const Tensor& g = *grads[i];
            Tensor& m = m_[i];
            Tensor& v = v_[i];
            for (std::size_t j = 0; j < p.numel(); ++j) {
                const double gj = g.data[j];
                m.data[j] = cfg_.beta1 * m.data[j] + (1.0 - cfg_.beta1) * gj;
                v.data[j] = cfg_.beta2 * v.data[j] + (1.0 - cfg_.beta2) * gj * gj;
                const double mhat = m.data[j] / c1;
                const double vhat = v.data[j] / c2;
                p.data[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

    long steps_taken() const { return t_; }

private:
    AdamConfig cfg_;
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

inline void adam_step(AdamState& state, const std::vector<Tensor*>& params,
                      const std::vector<const Tensor*>& grads, double lr) {
    state.step(params, grads, lr);
}

// Global-norm clipping: if ||g||_2 > eta, scale every gradient by eta/||g||.
// Returns the pre-clip norm.
inline double clip_gradients(const std::vector<Tensor*>& grads, double eta = 100.0) {
    double sq = 0.0;
    for (const Tensor* g : grads)
        for (double v : g->data) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > eta) {
        const double scale = eta / norm;
        for (Tensor* g : grads)
            for (double& v : g->data) v *= scale;
    }
    return norm;
}

// Constant during warm-up, then decayed by `factor` every `every` epochs.
inline double lr_schedule(long epoch, double base_lr, long warmup = 50, long every = 15,
                          double factor = 0.9) {
    if (epoch < 0) throw std::invalid_argument("lr_schedule: negative epoch");
    if (epoch < warmup) return base_lr;
    return base_lr * std::pow(factor, static_cast<double>((epoch - warmup) / every));
}

// Stops after `patience` consecutive epochs without strict improvement of the
// best observed loss. The caller snapshots parameters whenever improved()
// reports true and restores the snapshot when stopping.
class EarlyStopping {
public:
    explicit EarlyStopping(int patience = 50) : patience_(patience) {}

    // Returns true when training should stop now.
    bool observe(double loss) {
        if (loss < best_) {
            best_ = loss;
            stalled_ = 0;
            improved_ = true;
            return false;
        }
        improved_ = false;
        return ++stalled_ >= patience_;
    }

    bool improved() const { return improved_; }
    double best() const { return best_; }
    int stalled() const { return stalled_; }

private:
    int patience_;
    int stalled_ = 0;
    bool improved_ = false;
    double best_ = std::numeric_limits<double>::infinity();
};

} // namespace lifecal
