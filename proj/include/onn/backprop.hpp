#pragma once

// Back-propagation through operational layers, in four phases:
//   1. output delta from the residual,
//   2. inter-layer delta via varying 2D convolution of the next layer's
//      deltas with the trace's pool/nodal derivative caches,
//   3. intra-neuron delta applying the activation derivative and the
//      sampling adjoint (1/(s*s) into down-sampled neurons, u*u into
//      up-sampled ones),
//   4. kernel/bias sensitivities via the weight-mode varying convolution.
// Plus plain gradient descent, the adaptive learning-rate rule, the training
// loop, and a central-finite-difference oracle over every parameter.
//
// Gradient convention: sensitivities are exact derivatives of
//   E_grad = 1/2 * sum_items sum_pixels (y - target)^2,
// while recorded/reported losses are the per-pixel mean squared error. The
// two differ by a positive constant absorbed into the learning rate.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <vector>

#include "onn/dataset.hpp"
#include "onn/errors.hpp"
#include "onn/map2d.hpp"
#include "onn/network.hpp"

namespace onn {

struct TrainConfig {
    double epsilon0 = 0.1;
    double alpha_lr = 1.05; // growth on improvement
    double beta_lr = 0.7;   // shrink on stagnation
    double eps_min = 5e-5;
    double eps_max = 5e-1;
    int iter_max = 240;
    std::optional<double> target_mse; // stop once the batch MSE reaches this
    std::uint64_t seed = 0;

    void validate() const {
        if (!(eps_min > 0.0 && eps_min < eps_max))
            throw InputError("TrainConfig: need 0 < eps_min < eps_max");
        if (!(alpha_lr > 1.0 && beta_lr < 1.0 && beta_lr > 0.0))
            throw InputError("TrainConfig: need alpha_lr > 1 > beta_lr > 0");
        if (iter_max < 0)
            throw InputError("TrainConfig: iter_max must be >= 0");
        if (!(epsilon0 > 0.0))
            throw InputError("TrainConfig: epsilon0 must be > 0");
    }
};

struct NeuronSens {
    std::vector<Map2D> d_kernels;
    double d_bias = 0.0;
};

struct Sensitivities {
    std::vector<std::vector<NeuronSens>> layers;

    static Sensitivities zeros_like(const NetworkModel& model) {
        Sensitivities s;
        s.layers.resize(model.layers.size());
        for (int l = 0; l < model.layer_count(); ++l) {
            s.layers[l].resize(model.layers[l].size());
            for (std::size_t k = 0; k < model.layers[l].size(); ++k) {
                auto& ns = s.layers[l][k];
                ns.d_bias = 0.0;
                for (const auto& kernel : model.layers[l][k].kernels)
                    ns.d_kernels.emplace_back(kernel.rows, kernel.cols);
            }
        }
        return s;
    }

    void accumulate(const Sensitivities& o) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            for (std::size_t k = 0; k < layers[l].size(); ++k) {
                layers[l][k].d_bias += o.layers[l][k].d_bias;
                for (std::size_t i = 0; i < layers[l][k].d_kernels.size(); ++i)
                    add_in_place(layers[l][k].d_kernels[i], o.layers[l][k].d_kernels[i]);
            }
        }
    }

    bool all_finite() const {
        for (const auto& layer : layers)
            for (const auto& ns : layer) {
                if (!std::isfinite(ns.d_bias))
                    return false;
                for (const auto& k : ns.d_kernels)
                    if (!k.all_finite())
                        return false;
            }
        return true;
    }
};

struct BPState {
    std::vector<std::vector<Map2D>> delta;   // dE/dx per [layer][neuron]
    std::vector<std::vector<Map2D>> delta_y; // dE/dy per [layer][neuron]
    Sensitivities sens;
};

// Phase 1 (no-sampling form): delta at the output layer, elementwise
// (y - target) * f'(x).
inline Map2D output_delta(const Map2D& output, const Map2D& target, const Map2D& fprime) {
    if (!output.same_dims(target) || !output.same_dims(fprime)) {
        std::ostringstream os;
        os << "output_delta dims mismatch: y " << output.rows << "x" << output.cols << ", target "
           << target.rows << "x" << target.cols << ", f' " << fprime.rows << "x" << fprime.cols;
        throw DimensionError(os.str());
    }
    Map2D d(output.rows, output.cols);
    for (int i = 0; i < d.size(); ++i)
        d.data[i] = (output.data[i] - target.data[i]) * fprime.data[i];
    return d;
}

// Phase 3: pull an output delta back through the neuron's sampling stage and
// activation. fprime is f'(x) at the pre-sampling dims; the result has those
// dims as well.
inline Map2D intra_neuron_delta(const Map2D& delta_y, const Map2D& fprime, int sampling) {
    if (sampling == 0)
        throw InputError("intra_neuron_delta: sampling must not be 0");
    if (sampling == 1) {
        if (!delta_y.same_dims(fprime)) {
            std::ostringstream os;
            os << "intra_neuron_delta dims mismatch: delta " << delta_y.rows << "x" << delta_y.cols
               << " vs f' " << fprime.rows << "x" << fprime.cols;
            throw DimensionError(os.str());
        }
        return hadamard(delta_y, fprime);
    }
    if (sampling < 0) {
        // forward did y = down(f(x)); spread each delta pixel over its block.
        Map2D up = downsample_adjoint(delta_y, -sampling, -sampling, fprime.rows, fprime.cols);
        return hadamard(up, fprime);
    }
    // forward did y = up(f(x)); fold each replicated block back, scale u*u.
    Map2D down = upsample_adjoint(delta_y, sampling, sampling);
    if (!down.same_dims(fprime)) {
        std::ostringstream os;
        os << "intra_neuron_delta: folded delta " << down.rows << "x" << down.cols
           << " does not match f' " << fprime.rows << "x" << fprime.cols;
        throw DimensionError(os.str());
    }
    return hadamard(down, fprime);
}

namespace detail {

// Varying kernel for the delta path: elementwise product of the pool
// derivative cache and the nodal d/dy cache, restricted to real input
// positions (the previous layer's map dims).
inline Cache4D delta_kernel(const NeuronTrace& tr, std::size_t conn, int prev_rows,
                            int prev_cols) {
    const Cache4D& dp = tr.dpool[conn];
    const Cache4D& dn = tr.dnodal_y[conn];
    Cache4D out(prev_rows, prev_cols, dp.krows, dp.kcols);
    for (int m = 0; m < prev_rows; ++m)
        for (int n = 0; n < prev_cols; ++n)
            for (int r = 0; r < dp.krows; ++r)
                for (int t = 0; t < dp.kcols; ++t)
                    out(m, n, r, t) = dp(m, n, r, t) * dn(m, n, r, t);
    return out;
}

// Varying kernel for the weight path: full extent, including positions that
// read the zero pad (their terms still depend on the weight).
inline Cache4D weight_kernel(const NeuronTrace& tr, std::size_t conn) {
    const Cache4D& dp = tr.dpool[conn];
    const Cache4D& dn = tr.dnodal_w[conn];
    Cache4D out = dp;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] *= dn.data[i];
    return out;
}

} // namespace detail

// Phase 2: output deltas of layer (next_layer - 1) accumulated from the
// deltas of next_layer through the varying 2D convolution.
inline std::vector<Map2D> inter_layer_delta(const NetworkModel& model, const ForwardTrace& trace,
                                            int next_layer,
                                            const std::vector<Map2D>& next_deltas) {
    if (next_layer < 1 || next_layer >= model.layer_count())
        throw InputError("inter_layer_delta: next_layer out of range");
    const auto& next_traces = trace.layers[next_layer];
    if (next_traces.empty() || next_traces.front().dpool.empty())
        throw InputError("inter_layer_delta: trace caches missing (forward ran in inference mode?)");
    const auto& prev_traces = trace.layers[next_layer - 1];
    std::vector<Map2D> out;
    out.reserve(prev_traces.size());
    for (std::size_t k = 0; k < prev_traces.size(); ++k) {
        const Map2D& yk = prev_traces[k].y;
        Map2D acc(yk.rows, yk.cols);
        for (std::size_t i = 0; i < next_traces.size(); ++i) {
            const Cache4D varying = detail::delta_kernel(next_traces[i], k, yk.rows, yk.cols);
            add_in_place(acc, conv2dvar_delta(next_deltas[i], varying));
        }
        out.push_back(std::move(acc));
    }
    return out;
}

// Phase 4: kernel sensitivities through the weight-mode varying convolution,
// bias sensitivity as the plain sum of the delta map.
inline NeuronSens weight_bias_sensitivities(const NetworkModel& model, const ForwardTrace& trace,
                                            int layer, std::size_t neuron, const Map2D& delta) {
    const NeuronTrace& tr = trace.layers[layer][neuron];
    if (tr.dpool.empty())
        throw InputError("weight_bias_sensitivities: trace caches missing");
    (void)model;
    NeuronSens s;
    s.d_kernels.reserve(tr.dpool.size());
    for (std::size_t i = 0; i < tr.dpool.size(); ++i)
        s.d_kernels.push_back(conv2dvar_weight(delta, detail::weight_kernel(tr, i)));
    s.d_bias = sum(delta);
    return s;
}

// Full backward pass for one item; the trace must come from a training-mode
// forward of the same model on the same input.
inline BPState backward(const NetworkModel& model, const ForwardTrace& trace,
                        const std::vector<Map2D>& targets) {
    const int L = model.layer_count();
    if (static_cast<int>(targets.size()) != model.output_channels())
        throw DimensionError("backward: target channel count mismatch");

    BPState bp;
    bp.delta.resize(L);
    bp.delta_y.resize(L);

    // Output layer: residual as dE/dy, then down through sampling/activation.
    bp.delta[L - 1].resize(model.layers[L - 1].size());
    bp.delta_y[L - 1].resize(model.layers[L - 1].size());
    for (std::size_t k = 0; k < model.layers[L - 1].size(); ++k) {
        const NeuronTrace& tr = trace.layers[L - 1][k];
        if (!tr.y.same_dims(targets[k])) {
            std::ostringstream os;
            os << "backward: target " << targets[k].rows << "x" << targets[k].cols
               << " does not match output " << tr.y.rows << "x" << tr.y.cols;
            throw DimensionError(os.str());
        }
        Map2D residual(tr.y.rows, tr.y.cols);
        for (int i = 0; i < residual.size(); ++i)
            residual.data[i] = tr.y.data[i] - targets[k].data[i];
        bp.delta_y[L - 1][k] = residual;
        bp.delta[L - 1][k] =
            intra_neuron_delta(residual, tr.fprime, model.specs[L - 1].sampling);
    }

    for (int l = L - 1; l >= 1; --l) {
        std::vector<Map2D> dys = inter_layer_delta(model, trace, l, bp.delta[l]);
        bp.delta_y[l - 1] = dys;
        bp.delta[l - 1].resize(dys.size());
        for (std::size_t k = 0; k < dys.size(); ++k)
            bp.delta[l - 1][k] = intra_neuron_delta(dys[k], trace.layers[l - 1][k].fprime,
                                                    model.specs[l - 1].sampling);
    }

    bp.sens.layers.resize(L);
    for (int l = 0; l < L; ++l) {
        bp.sens.layers[l].resize(model.layers[l].size());
        for (std::size_t k = 0; k < model.layers[l].size(); ++k)
            bp.sens.layers[l][k] = weight_bias_sensitivities(model, trace, l, k, bp.delta[l][k]);
    }
    return bp;
}

// Plain gradient descent step, Eq.-style w <- w - eps * dE/dw.
inline void apply_update(NetworkModel& model, const Sensitivities& sens, double epsilon) {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw InputError("apply_update: epsilon must be finite and >= 0");
    if (!sens.all_finite())
        throw NumericError("apply_update: non-finite sensitivity");
    for (int l = 0; l < model.layer_count(); ++l) {
        for (std::size_t k = 0; k < model.layers[l].size(); ++k) {
            OperationalNeuron& neuron = model.layers[l][k];
            const NeuronSens& ns = sens.layers[l][k];
            for (std::size_t i = 0; i < neuron.kernels.size(); ++i)
                for (int j = 0; j < neuron.kernels[i].size(); ++j)
                    neuron.kernels[i].data[j] -= epsilon * ns.d_kernels[i].data[j];
            neuron.bias -= epsilon * ns.d_bias;
        }
    }
}

// Global learning-rate adaptation: grow by alpha while improving (capped),
// shrink by beta otherwise (floored), else leave unchanged.
inline double adapt_learning_rate(double eps_prev, double e_t, double e_prev,
                                  const TrainConfig& cfg) {
    if (e_t < e_prev && cfg.alpha_lr * eps_prev <= cfg.eps_max)
        return cfg.alpha_lr * eps_prev;
    if (e_t >= e_prev && cfg.beta_lr * eps_prev >= cfg.eps_min)
        return cfg.beta_lr * eps_prev;
    return eps_prev;
}

// Mean squared error over all output channels and pixels of one item.
inline double item_mse(const std::vector<Map2D>& outputs, const std::vector<Map2D>& targets) {
    if (outputs.size() != targets.size())
        throw DimensionError("item_mse: channel count mismatch");
    double acc = 0.0;
    long count = 0;
    for (std::size_t c = 0; c < outputs.size(); ++c) {
        if (!outputs[c].same_dims(targets[c])) {
            std::ostringstream os;
            os << "item_mse dims mismatch: " << outputs[c].rows << "x" << outputs[c].cols
               << " vs " << targets[c].rows << "x" << targets[c].cols;
            throw DimensionError(os.str());
        }
        for (int i = 0; i < outputs[c].size(); ++i) {
            const double d = outputs[c].data[i] - targets[c].data[i];
            acc += d * d;
        }
        count += outputs[c].size();
    }
    return acc / static_cast<double>(count);
}

// The loss whose exact gradient the analytic BP computes: half the sum of
// squared pixel errors.
inline double half_squared_loss(const std::vector<Map2D>& outputs,
                                const std::vector<Map2D>& targets) {
    if (outputs.size() != targets.size())
        throw DimensionError("half_squared_loss: channel count mismatch");
    double acc = 0.0;
    for (std::size_t c = 0; c < outputs.size(); ++c) {
        if (!outputs[c].same_dims(targets[c]))
            throw DimensionError("half_squared_loss: dims mismatch");
        for (int i = 0; i < outputs[c].size(); ++i) {
            const double d = outputs[c].data[i] - targets[c].data[i];
            acc += d * d;
        }
    }
    return 0.5 * acc;
}

inline double evaluate_mse(const NetworkModel& model, const Dataset& data) {
    double acc = 0.0;
    for (const auto& item : data)
        acc += item_mse(forward(model, item.input), item.target);
    return acc / static_cast<double>(data.size());
}

struct HistoryRow {
    int iter = 0;      // number of updates applied when the loss was measured
    double mse = 0.0;  // batch MSE at that point
    double eps = 0.0;  // learning rate for the update leaving this point
    double fp_ms = 0.0; // wall time of the iteration's forward passes (volatile)
    double bp_ms = 0.0; // wall time of the iteration's backward passes (volatile)
};

struct TrainResult {
    std::vector<HistoryRow> history;
    bool target_reached = false;
    std::optional<int> diverged_at; // iteration (1-based) where the loss left the finite range
    double final_mse = 0.0;
};

// Full-batch training: every iteration accumulates the sensitivities of all
// items, adapts the learning rate once on the batch loss, and applies one
// update. History rows run from iteration 0 (initial weights) to iter_max
// (final weights). Deterministic for fixed model, data and config.
inline TrainResult train(NetworkModel& model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.empty())
        throw InputError("train: empty dataset");
    TrainResult res;
    if (cfg.iter_max == 0)
        return res;

    using clock = std::chrono::steady_clock;
    double eps = cfg.epsilon0;
    double e_prev = 0.0;
    for (int t = 1; t <= cfg.iter_max; ++t) {
        double fp_ms = 0.0;
        double bp_ms = 0.0;
        double batch_mse = 0.0;
        Sensitivities total = Sensitivities::zeros_like(model);
        try {
            ForwardTrace trace;
            for (const auto& item : data) {
                const auto t0 = clock::now();
                std::vector<Map2D> outs = forward(model, item.input, &trace);
                const auto t1 = clock::now();
                batch_mse += item_mse(outs, item.target);
                BPState bp = backward(model, trace, item.target);
                const auto t2 = clock::now();
                total.accumulate(bp.sens);
                fp_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
                bp_ms += std::chrono::duration<double, std::milli>(t2 - t1).count();
            }
        } catch (const NumericError&) {
            res.diverged_at = t;
            break;
        }
        const double e_t = batch_mse / static_cast<double>(data.size());
        if (!std::isfinite(e_t)) {
            res.diverged_at = t;
            break;
        }
        if (t > 1)
            eps = adapt_learning_rate(eps, e_t, e_prev, cfg);
        res.history.push_back({t - 1, e_t, eps, fp_ms, bp_ms});
        res.final_mse = e_t;
        if (cfg.target_mse && e_t <= *cfg.target_mse) {
            res.target_reached = true;
            return res;
        }
        try {
            apply_update(model, total, eps);
        } catch (const NumericError&) {
            res.diverged_at = t;
            break;
        }
        e_prev = e_t;
    }
    if (res.diverged_at)
        return res;

    const double e_final = evaluate_mse(model, data);
    res.history.push_back({cfg.iter_max, e_final, eps, 0.0, 0.0});
    res.final_mse = e_final;
    if (cfg.target_mse && e_final <= *cfg.target_mse)
        res.target_reached = true;
    return res;
}

// Central finite differences of the half-squared loss for every parameter,
// computed from full forwards only. Verification oracle for the analytic BP.
inline Sensitivities finite_difference_gradients(const NetworkModel& model,
                                                 const std::vector<Map2D>& input,
                                                 const std::vector<Map2D>& target, double h) {
    if (!(h > 0.0))
        throw InputError("finite_difference_gradients: h must be > 0");
    NetworkModel work = model;
    Sensitivities sens = Sensitivities::zeros_like(model);
    const auto loss = [&]() { return half_squared_loss(forward(work, input), target); };
    for (int l = 0; l < work.layer_count(); ++l) {
        for (std::size_t k = 0; k < work.layers[l].size(); ++k) {
            OperationalNeuron& neuron = work.layers[l][k];
            for (std::size_t i = 0; i < neuron.kernels.size(); ++i) {
                for (int j = 0; j < neuron.kernels[i].size(); ++j) {
                    double& w = neuron.kernels[i].data[j];
                    const double orig = w;
                    w = orig + h;
                    const double ep = loss();
                    w = orig - h;
                    const double em = loss();
                    w = orig;
                    sens.layers[l][k].d_kernels[i].data[j] = (ep - em) / (2.0 * h);
                }
            }
            const double orig = neuron.bias;
            neuron.bias = orig + h;
            const double ep = loss();
            neuron.bias = orig - h;
            const double em = loss();
            neuron.bias = orig;
            sens.layers[l][k].d_bias = (ep - em) / (2.0 * h);
        }
    }
    return sens;
}

} // namespace onn
