#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "lifecal/errors.hpp"
#include "lifecal/model.hpp"
#include "lifecal/mortality.hpp"
#include "lifecal/optimizer.hpp"
#include "lifecal/portfolio.hpp"
#include "lifecal/rng.hpp"
#include "lifecal/tape.hpp"

namespace lifecal {

struct TrainLogRow {
    long epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
    double grad_norm = 0.0; // max pre-clip global norm over the epoch's batches
    double wall_s = 0.0;
};

using TrainLog = std::vector<TrainLogRow>;

inline std::string train_log_csv(const TrainLog& log) {
    std::string out = "epoch,lr,r_emp,grad_norm_preclip,wall_time_s\n";
    for (const TrainLogRow& r : log)
        out += std::to_string(r.epoch) + ',' + format_double(r.lr) + ',' + format_double(r.loss) +
               ',' + format_double(r.grad_norm) + ',' + format_double(r.wall_s) + '\n';
    return out;
}

namespace detail {

inline void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
}

inline double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

// ---- stage 1: table transfer fit -------------------------------------------

struct BaselineHyper {
    std::vector<std::size_t> widths{2, 40, 40, 20, 2};
    std::size_t batch_size = 32;
    double lr = 0.001;
    long epochs_max = 5000;
    // Stage-1 stopping target on attained ages 18..66: relative fit of the
    // death probability and reproduction of the 1/m sub-annual ratio.
    double fit_tol = 0.10;
    double ratio_tol = 0.15;
    int eval_age_lo = 18;
    int eval_age_hi = 66;
    long eval_every = 25;
    std::uint64_t seed = 1;
};

struct BaselineFitReport {
    double max_rel_err = 0.0;   // max |q_hat - q~|/q~ over the evaluation grid
    double max_ratio_err = 0.0; // max |m * q_hat(a,m)/q_hat(a,1) - 1|
};

inline BaselineFitReport baseline_fit_report(const BaselineModel& net, const MinMaxScaler& scaler,
                                             const TableDataset& ds, int age_lo, int age_hi) {
    BaselineFitReport rep;
    std::vector<double> annual(static_cast<std::size_t>(age_hi) + 1, 0.0);
    for (const TableRecord& rec : ds.records) {
        if (rec.age < age_lo || rec.age > age_hi) continue;
        const double q_hat = baseline_death_prob(net, scaler, rec.age, rec.m);
        const double q_tab = rec.target.p01();
        if (q_tab > 0.0)
            rep.max_rel_err = std::max(rep.max_rel_err, std::abs(q_hat - q_tab) / q_tab);
        if (rec.m == 1) annual[static_cast<std::size_t>(rec.age)] = q_hat;
    }
    for (const TableRecord& rec : ds.records) {
        if (rec.age < age_lo || rec.age > age_hi || rec.m == 1) continue;
        const double q1 = annual[static_cast<std::size_t>(rec.age)];
        if (q1 <= 0.0) continue;
        const double q_hat = baseline_death_prob(net, scaler, rec.age, rec.m);
        rep.max_ratio_err = std::max(rep.max_ratio_err, std::abs(rec.m * q_hat / q1 - 1.0));
    }
    return rep;
}

struct BaselineFitResult {
    BaselineCheckpoint checkpoint;
    TrainLog log;
    BaselineFitReport fit;
    long epochs_run = 0;
    bool tolerance_reached = false;
};

using BaselineProgress = std::function<void(const TrainLogRow&)>;

// Fits softmax(baseline) to the table targets with a KL loss. Trains until
// the stage-1 tolerance is reached or epochs_max, whichever comes first.
inline BaselineFitResult fit_baseline(const TableDataset& ds, const BaselineHyper& hp,
                                      const BaselineProgress& progress = {}) {
    if (ds.records.empty()) throw std::invalid_argument("fit_baseline: empty dataset");
    const auto t0 = std::chrono::steady_clock::now();

    Rng rng(hp.seed);
    BaselineFitResult res;
    res.checkpoint.gender = ds.gender;
    res.checkpoint.scaler = table_grid_scaler();
    BaselineModel& net = res.checkpoint.net;
    net = BaselineModel::make(hp.widths, rng);

    std::vector<Tensor*> params;
    for (DenseParams& l : net.layers) {
        params.push_back(&l.W);
        params.push_back(&l.b);
    }
    AdamState adam(params);

    const std::size_t n = ds.records.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (long epoch = 0; epoch < hp.epochs_max; ++epoch) {
        detail::shuffle_indices(order, rng);
        double risk = 0.0;
        double max_norm = 0.0;
        for (std::size_t start = 0; start < n; start += hp.batch_size) {
            const std::size_t bsz = std::min(hp.batch_size, n - start);
            Tensor bx(bsz, 2), bt(bsz, 2);
            for (std::size_t i = 0; i < bsz; ++i) {
                const TableRecord& rec = ds.records[order[start + i]];
                bx(i, 0) = rec.age_scaled;
                bx(i, 1) = rec.m_scaled;
                bt(i, 0) = rec.target.p00();
                bt(i, 1) = rec.target.p01();
            }

            Tape tape;
            std::vector<Var> leaves;
            for (Tensor* p : params) leaves.push_back(tape.leaf(*p, true));
            Var h = tape.constant(std::move(bx));
            for (std::size_t l = 0; l < net.layers.size(); ++l)
                h = tape.dense(h, leaves[2 * l], leaves[2 * l + 1], net.layers[l].act);
            const Var loss = tape.kl_mean(tape.softmax(h), std::move(bt));
            tape.backward(loss);

            std::vector<Tensor> grads;
            grads.reserve(params.size());
            std::vector<const Tensor*> grad_ptrs;
            std::vector<Tensor*> grad_mut;
            for (std::size_t i = 0; i < params.size(); ++i) {
                const Tensor& g = tape.grad(leaves[i]);
                grads.push_back(g.numel() ? g : Tensor(params[i]->rows(), params[i]->cols()));
            }
            for (Tensor& g : grads) {
                grad_ptrs.push_back(&g);
                grad_mut.push_back(&g);
            }
            max_norm = std::max(max_norm, clip_gradients(grad_mut, 1e300)); // norm only, no clip
            adam.step(params, grad_ptrs, hp.lr);
            risk += tape.value(loss).data[0] * static_cast<double>(bsz);
        }
        risk /= static_cast<double>(n);
        if (!std::isfinite(risk))
            throw DivergenceError("fit_baseline: non-finite loss at epoch " + std::to_string(epoch));
        res.log.push_back({epoch, hp.lr, risk, max_norm, detail::seconds_since(t0)});
        res.epochs_run = epoch + 1;
        if (progress) progress(res.log.back());

        if ((epoch + 1) % hp.eval_every == 0 || epoch + 1 == hp.epochs_max) {
            res.fit = baseline_fit_report(net, res.checkpoint.scaler, ds, hp.eval_age_lo,
                                          hp.eval_age_hi);
            if (res.fit.max_rel_err <= hp.fit_tol && res.fit.max_ratio_err <= hp.ratio_tol) {
                res.tolerance_reached = true;
                break;
            }
        }
    }
    if (!res.tolerance_reached)
        res.fit = baseline_fit_report(net, res.checkpoint.scaler, ds, hp.eval_age_lo, hp.eval_age_hi);
    return res;
}

// ---- stage 2: residual boosting under the economic loss ---------------------

// Per-contract training sample. `features`/`base_logits` rows k >= valid are
// zero padding; the mask enters as `valid`, the number of real steps.
struct SequenceSample {
    Tensor features;    // T x 4, scaled residual inputs
    Tensor base_logits; // T x 2, frozen baseline logits
    std::shared_ptr<std::vector<double>> y00, y01; // discounted cash flows, length >= valid+1
    std::size_t valid = 0;
    std::size_t index = 0; // position in the portfolio
};

inline SequenceSample make_sequence_sample(const PricedContract& pc, const BaselineCheckpoint& base,
                                           const MinMaxScaler& res_scaler, std::size_t index) {
    const int K = pc.c.iterations();
    SequenceSample s;
    s.valid = static_cast<std::size_t>(K);
    s.index = index;
    s.features = res_feature_matrix(pc.c, res_scaler, K);
    s.base_logits = base.net.forward(base_feature_matrix(pc.c, base.scaler, K));
    s.y00 = std::make_shared<std::vector<double>>(pc.y.y00());
    s.y01 = std::make_shared<std::vector<double>>(pc.y.y01());
    return s;
}

// Zero-pads a sample to `target_len` steps. With mask=true the valid length
// is preserved (padded steps are ignored); with mask=false the padded steps
// run through the network and the zero cash flows beyond the contract end.
inline SequenceSample pad_sequence_sample(const SequenceSample& s, std::size_t target_len,
                                          bool mask = true) {
    SequenceSample p;
    p.valid = mask ? s.valid : target_len;
    p.index = s.index;
    p.features = Tensor(target_len, s.features.cols());
    std::copy(s.features.data.begin(), s.features.data.end(), p.features.data.begin());
    p.base_logits = Tensor(target_len, 2);
    std::copy(s.base_logits.data.begin(), s.base_logits.data.end(), p.base_logits.data.begin());
    p.y00 = std::make_shared<std::vector<double>>(*s.y00);
    p.y01 = std::make_shared<std::vector<double>>(*s.y01);
    p.y00->resize(target_len + 1, 0.0);
    p.y01->resize(target_len + 1, 0.0);
    return p;
}

// Min-max bounds of the per-step residual features over the whole portfolio.
// The attained age within one contract is monotone in k, so only the first
// and last step need to be visited.
inline MinMaxScaler fit_res_scaler(const Portfolio& pf) {
    if (pf.contracts.empty()) throw std::invalid_argument("fit_res_scaler: empty portfolio");
    std::vector<double> mins(4, 1e300), maxs(4, -1e300);
    auto see = [&](std::size_t j, double v) {
        mins[j] = std::min(mins[j], v);
        maxs[j] = std::max(maxs[j], v);
    };
    for (const PricedContract& pc : pf.contracts) {
        const Contract& c = pc.c;
        see(0, current_age(c, 0));
        see(0, current_age(c, c.iterations() - 1));
        see(1, static_cast<double>(c.m));
        see(2, c.gender == Gender::female ? 1.0 : 0.0);
        see(3, c.smoker ? 1.0 : 0.0);
    }
    return MinMaxScaler(std::move(mins), std::move(maxs));
}

namespace detail {

struct ResVars {
    std::vector<Var> ordered; // same order as ResidualModel::param_tensors()
    std::vector<std::pair<Var, Var>> front;
    Tape::GruVars gru;
    Var out_w, out_b;
};

inline ResVars register_res_params(Tape& tape, ResidualModel& res) {
    ResVars v;
    for (DenseParams& l : res.front) {
        const Var w = tape.leaf(l.W, true);
        const Var b = tape.leaf(l.b, true);
        v.front.emplace_back(w, b);
        v.ordered.push_back(w);
        v.ordered.push_back(b);
    }
    v.gru = {tape.leaf(res.gru.Wz, true), tape.leaf(res.gru.Wr, true), tape.leaf(res.gru.Wh, true),
             tape.leaf(res.gru.Uz, true), tape.leaf(res.gru.Ur, true), tape.leaf(res.gru.Uh, true),
             tape.leaf(res.gru.bz, true), tape.leaf(res.gru.br, true), tape.leaf(res.gru.bh, true)};
    for (Var g : {v.gru.Wz, v.gru.Wr, v.gru.Wh, v.gru.Uz, v.gru.Ur, v.gru.Uh, v.gru.bz, v.gru.br,
                  v.gru.bh})
        v.ordered.push_back(g);
    v.out_w = tape.leaf(res.out.W, true);
    v.out_b = tape.leaf(res.out.b, true);
    v.ordered.push_back(v.out_w);
    v.ordered.push_back(v.out_b);
    return v;
}

} // namespace detail

// One forward/backward pass over a batch: mean |psi| and gradients for the
// residual parameters, accumulated in sample order.
inline double residual_pass(const std::vector<const SequenceSample*>& batch, ResidualModel& res,
                            std::vector<Tensor>& grads_out) {
    Tape tape;
    detail::ResVars vars = detail::register_res_params(tape, res);

    std::vector<Var> losses;
    losses.reserve(batch.size());
    for (const SequenceSample* s : batch) {
        Var h = tape.constant(s->features);
        for (std::size_t l = 0; l < res.front.size(); ++l)
            h = tape.dense(h, vars.front[l].first, vars.front[l].second, Activation::relu);
        h = tape.gru_sequence(h, vars.gru, s->valid);
        h = tape.dense(h, vars.out_w, vars.out_b, Activation::linear);
        h = tape.add_constant(h, s->base_logits);
        const Var probs = tape.softmax(h);
        const Var value = tape.psi_sweep(probs, s->y00, s->y01, s->valid);
        losses.push_back(tape.abs_value(value));
    }
    const Var loss = tape.mean_of(std::move(losses));
    tape.backward(loss);

    const std::vector<Tensor*> params = res.param_tensors();
    grads_out.clear();
    grads_out.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& g = tape.grad(vars.ordered[i]);
        grads_out.push_back(g.numel() ? g : Tensor(params[i]->rows(), params[i]->cols()));
    }
    return tape.value(loss).data[0];
}

struct ResidualHyper {
    std::vector<std::size_t> widths{4, 50, 50, 50, 50, 50, 2};
    std::size_t batch_size = 32;
    double lr = 0.005; // male-baseline default; 0.001 for the female baseline
    long epochs_max = 300;
    long warmup_epochs = 50;
    long decay_every = 15;
    double decay_factor = 0.9;
    int patience = 50;
    double clip_eta = 100.0;
    std::uint64_t seed = 7;
};

struct ResidualFitResult {
    Model model;
    TrainLog log;
    double final_risk = 0.0; // risk of the restored best epoch
    long epochs_run = 0;
    bool early_stopped = false;
};

using ResidualProgress = std::function<void(const TrainLogRow&, const Model&, bool improved)>;

// Minimizes the empirical risk mean |psi(pi_hat, c, y(c))| over the portfolio
// with adam, warm-up/decay schedule, global-norm clipping and early stopping
// on the training risk. The baseline stays frozen; only residual parameters
// receive gradients.
inline ResidualFitResult fit_residual(const Portfolio& pf, const BaselineCheckpoint& base,
                                      const ResidualHyper& hp,
                                      const ResidualProgress& progress = {}) {
    if (pf.contracts.empty()) throw std::invalid_argument("fit_residual: empty portfolio");
    const auto t0 = std::chrono::steady_clock::now();

    Rng rng(hp.seed);
    ResidualFitResult out;
    out.model.base = base.net;
    out.model.base_scaler = base.scaler;
    out.model.base_gender = base.gender;
    out.model.res = ResidualModel::make(hp.widths, rng);
    out.model.res_scaler = fit_res_scaler(pf);
    ResidualModel& res = out.model.res;

    std::vector<SequenceSample> samples;
    samples.reserve(pf.contracts.size());
    for (std::size_t i = 0; i < pf.contracts.size(); ++i)
        samples.push_back(make_sequence_sample(pf.contracts[i], base, out.model.res_scaler, i));

    // batches of similar length; batch membership is fixed, order shuffles
    std::vector<std::size_t> by_len(samples.size());
    std::iota(by_len.begin(), by_len.end(), 0);
    std::stable_sort(by_len.begin(), by_len.end(),
                     [&](std::size_t a, std::size_t b) { return samples[a].valid < samples[b].valid; });
    std::vector<std::vector<const SequenceSample*>> batches;
    for (std::size_t start = 0; start < by_len.size(); start += hp.batch_size) {
        std::vector<const SequenceSample*> b;
        for (std::size_t i = start; i < std::min(start + hp.batch_size, by_len.size()); ++i)
            b.push_back(&samples[by_len[i]]);
        batches.push_back(std::move(b));
    }

    const std::vector<Tensor*> params = res.param_tensors();
    AdamState adam(params);
    EarlyStopping stopper(hp.patience);
    std::vector<Tensor> best;
    double best_risk = 0.0;
    const double n_total = static_cast<double>(samples.size());

    std::vector<std::size_t> batch_order(batches.size());
    std::iota(batch_order.begin(), batch_order.end(), 0);
    std::vector<Tensor> grads;

    for (long epoch = 0; epoch < hp.epochs_max; ++epoch) {
        const double lr = lr_schedule(epoch, hp.lr, hp.warmup_epochs, hp.decay_every,
                                      hp.decay_factor);
        detail::shuffle_indices(batch_order, rng);

        double risk = 0.0;
        double max_norm = 0.0;
        for (std::size_t bi : batch_order) {
            const auto& batch = batches[bi];
            const double loss = residual_pass(batch, res, grads);
            risk += loss * static_cast<double>(batch.size());

            std::vector<Tensor*> gp;
            std::vector<const Tensor*> gc;
            for (Tensor& g : grads) {
                gp.push_back(&g);
                gc.push_back(&g);
            }
            max_norm = std::max(max_norm, clip_gradients(gp, hp.clip_eta));
            adam.step(params, gc, lr);
        }
        risk /= n_total;
        if (!std::isfinite(risk))
            throw DivergenceError("fit_residual: non-finite risk at epoch " + std::to_string(epoch));
        out.log.push_back({epoch, lr, risk, max_norm, detail::seconds_since(t0)});
        out.epochs_run = epoch + 1;

        const bool stop = stopper.observe(risk);
        if (stopper.improved()) {
            best.clear();
            for (const Tensor* p : params) best.push_back(*p);
            best_risk = risk;
        }
        if (progress) progress(out.log.back(), out.model, stopper.improved());
        if (stop) {
            out.early_stopped = true;
            break;
        }
    }

    if (!best.empty())
        for (std::size_t i = 0; i < params.size(); ++i) *params[i] = best[i];
    out.final_risk = best_risk;
    return out;
}

// Empirical risk of a fixed model over a portfolio (no gradients).
inline double empirical_risk(const Model& model, const Portfolio& pf) {
    double acc = 0.0;
    for (const PricedContract& pc : pf.contracts)
        acc += std::abs(psi(predict_sequence(model, pc.c), pc.c, pc.y));
    return acc / static_cast<double>(pf.contracts.size());
}

} // namespace lifecal
