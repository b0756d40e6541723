#pragma once

// Model structure (operational neurons, layers, operator assignment) and the
// forward pass, including the 4D derivative caches back-propagation consumes.
//
// A layer maps the previous layer's outputs y_i (M x N each) to one output
// map per neuron. Per neuron k:
//
//   x_k = bias_k + sum_i pool( psi(w_ik(r,t), y_i(m+r, n+t)) over the window )
//   y_k = sample( f(x_k) )
//
// where pooling runs over the Kx*Ky kernel-window terms of each input
// connection separately and the pooled maps are summed across connections.
// The window is anchored top-left: output (m, n) reads input (m+r, n+t).
// Sampling (zero-order up / average down) is applied after the activation.
//
// Cache conventions for a connection (from previous-layer neuron i into
// neuron k), with x dims (Mo x No) and kernel (Kx x Ky):
//   - psi          (Mo, No, Kx, Ky): nodal terms, indexed by output position.
//   - dpool, dnodal_y, dnodal_w (Mo+Kx-1, No+Ky-1, Kx, Ky): indexed by the
//     input position (m, n) the term reads, paired with its kernel offset
//     (r, t); the term feeds output (m-r, n-t). Under NoZeroPad the extent
//     equals the previous layer's M x N exactly; under SamePad the tail rows
//     and columns belong to the constant zero pad (their dnodal entries are
//     evaluated at y = 0, and no delta ever propagates back into them).

#include <cstdint>
#include <optional>
#include <sstream>
#include <vector>

#include "onn/errors.hpp"
#include "onn/map2d.hpp"
#include "onn/operators.hpp"
#include "onn/rng.hpp"

namespace onn {

struct LayerSpec {
    int neuron_count = 1;
    int kernel_rows = 3;
    int kernel_cols = 3;
    // 1 = none, -s = average down-sample by s, +u = zero-order up-sample by u.
    int sampling = 1;
    PaddingMode padding = PaddingMode::SamePad;
    OperatorSet opset{};
};

inline void validate(const LayerSpec& s) {
    if (s.neuron_count < 1)
        throw InputError("LayerSpec: neuron_count must be >= 1");
    if (s.kernel_rows < 1 || s.kernel_cols < 1 || s.kernel_rows % 2 == 0 ||
        s.kernel_cols % 2 == 0) {
        std::ostringstream os;
        os << "LayerSpec: kernel dims must be odd and >= 1, got " << s.kernel_rows << "x"
           << s.kernel_cols;
        throw InputError(os.str());
    }
    if (s.sampling == 0)
        throw InputError("LayerSpec: sampling must not be 0");
}

struct OperationalNeuron {
    std::vector<Map2D> kernels; // one Kx x Ky kernel per input connection
    double bias = 0.0;
    OperatorSet opset{};
};

struct NetworkModel {
    std::vector<LayerSpec> specs;                       // one per operational layer
    std::vector<std::vector<OperationalNeuron>> layers; // [layer][neuron]
    OperatorParams params{};
    int input_channels = 1;
    std::uint64_t seed = 0;

    int layer_count() const { return static_cast<int>(layers.size()); }
    int output_channels() const { return specs.empty() ? 0 : specs.back().neuron_count; }

    int connections_into(int layer) const {
        return layer == 0 ? input_channels : specs[layer - 1].neuron_count;
    }
};

// All weights and biases drawn i.i.d. uniform on (-0.1, 0.1) from the seeded
// generator; the draw order (layer, neuron, connection, kernel row-major,
// bias last) is part of the determinism contract.
inline NetworkModel init_network(const std::vector<LayerSpec>& specs, int input_channels,
                                 std::uint64_t seed, const OperatorParams& params = {}) {
    if (specs.empty())
        throw InputError("init_network: no layers");
    if (input_channels < 1)
        throw InputError("init_network: input_channels must be >= 1");
    params.validate();
    for (const auto& s : specs)
        validate(s);

    NetworkModel model;
    model.specs = specs;
    model.params = params;
    model.input_channels = input_channels;
    model.seed = seed;

    constexpr double kInitAmplitude = 0.1;
    Rng rng(seed);
    model.layers.resize(specs.size());
    for (std::size_t l = 0; l < specs.size(); ++l) {
        const int fan_in = l == 0 ? input_channels : specs[l - 1].neuron_count;
        model.layers[l].resize(specs[l].neuron_count);
        for (auto& neuron : model.layers[l]) {
            neuron.opset = specs[l].opset;
            neuron.kernels.reserve(fan_in);
            for (int i = 0; i < fan_in; ++i) {
                Map2D k(specs[l].kernel_rows, specs[l].kernel_cols);
                for (double& v : k.data)
                    v = rng.next_uniform(-kInitAmplitude, kInitAmplitude);
                neuron.kernels.push_back(std::move(k));
            }
            neuron.bias = rng.next_uniform(-kInitAmplitude, kInitAmplitude);
        }
    }
    return model;
}

// Assigns the set to every neuron of the layer (layerwise homogeneous);
// weights are untouched. Layer indices count operational layers from 0.
inline void assign_operator_set(NetworkModel& model, int layer_index, const OperatorSet& set) {
    if (layer_index < 0 || layer_index >= model.layer_count()) {
        std::ostringstream os;
        os << "assign_operator_set: layer " << layer_index << " outside [0, "
           << model.layer_count() - 1 << "]";
        throw InputError(os.str());
    }
    model.specs[layer_index].opset = set;
    for (auto& neuron : model.layers[layer_index])
        neuron.opset = set;
}

struct NeuronTrace {
    Map2D x;      // pooled input map plus bias (pre-activation)
    Map2D act;    // f(x), the pre-sampling intermediate
    Map2D fprime; // f'(x)
    Map2D y;      // after sampling: the neuron's output
    // Per input connection, filled in training mode only:
    std::vector<Cache4D> psi;      // nodal terms per output position
    std::vector<Cache4D> dpool;    // d pool / d term, input-position indexed
    std::vector<Cache4D> dnodal_y; // d psi / d y,    input-position indexed
    std::vector<Cache4D> dnodal_w; // d psi / d w,    input-position indexed
};

struct ForwardTrace {
    std::vector<Map2D> input;                    // copy of the network input
    std::vector<std::vector<NeuronTrace>> layers; // [layer][neuron]
};

namespace detail {

inline void check_forward_input(const NetworkModel& model, const std::vector<Map2D>& input) {
    if (static_cast<int>(input.size()) != model.input_channels) {
        std::ostringstream os;
        os << "forward: got " << input.size() << " input channels, model declares "
           << model.input_channels;
        throw DimensionError(os.str());
    }
    for (const auto& ch : input) {
        if (!ch.same_dims(input.front())) {
            std::ostringstream os;
            os << "forward: input channel dims differ: " << ch.rows << "x" << ch.cols << " vs "
               << input.front().rows << "x" << input.front().cols;
            throw DimensionError(os.str());
        }
        if (!ch.all_finite())
            throw NumericError("forward: non-finite input map");
    }
}

inline Map2D apply_sampling(const Map2D& m, int sampling) {
    if (sampling == 1)
        return m;
    if (sampling < 0)
        return downsample(m, -sampling, -sampling);
    return upsample(m, sampling, sampling);
}

} // namespace detail

// Forward pass. Passing a trace switches training mode on: the trace is
// rebuilt with every per-neuron map and every per-connection derivative
// cache needed by back-propagation.
inline std::vector<Map2D> forward(const NetworkModel& model, const std::vector<Map2D>& input,
                                  ForwardTrace* trace = nullptr) {
    detail::check_forward_input(model, input);
    const bool training = trace != nullptr;
    if (training) {
        trace->input = input;
        trace->layers.assign(model.layers.size(), {});
    }

    std::vector<Map2D> prev = input;
    std::vector<double> terms;
    for (int l = 0; l < model.layer_count(); ++l) {
        const LayerSpec& spec = model.specs[l];
        const int kr = spec.kernel_rows;
        const int kc = spec.kernel_cols;
        const int in_rows = prev.front().rows;
        const int in_cols = prev.front().cols;
        if (kr > in_rows || kc > in_cols) {
            std::ostringstream os;
            os << "forward: layer " << l << " kernel " << kr << "x" << kc << " exceeds its input "
               << in_rows << "x" << in_cols;
            throw DimensionError(os.str());
        }
        const bool same = spec.padding == PaddingMode::SamePad;
        const int out_rows = same ? in_rows : in_rows - kr + 1;
        const int out_cols = same ? in_cols : in_cols - kc + 1;

        if (training)
            trace->layers[l].resize(model.layers[l].size());

        std::vector<Map2D> outs;
        outs.reserve(model.layers[l].size());
        terms.resize(static_cast<std::size_t>(kr) * kc);

        for (std::size_t k = 0; k < model.layers[l].size(); ++k) {
            const OperationalNeuron& neuron = model.layers[l][k];
            NeuronTrace* nt = training ? &trace->layers[l][k] : nullptr;
            Map2D x(out_rows, out_cols, neuron.bias);

            if (nt) {
                nt->psi.clear();
                nt->dpool.clear();
                nt->dnodal_y.clear();
                nt->dnodal_w.clear();
            }

            for (std::size_t i = 0; i < prev.size(); ++i) {
                const Map2D& yp = prev[i];
                const Map2D& w = neuron.kernels[i];
                Cache4D* psi = nullptr;
                Cache4D* dpool = nullptr;
                if (nt) {
                    nt->psi.emplace_back(out_rows, out_cols, kr, kc);
                    nt->dpool.emplace_back(out_rows + kr - 1, out_cols + kc - 1, kr, kc);
                    psi = &nt->psi.back();
                    dpool = &nt->dpool.back();
                }
                for (int p = 0; p < out_rows; ++p) {
                    for (int q = 0; q < out_cols; ++q) {
                        int idx = 0;
                        for (int r = 0; r < kr; ++r)
                            for (int t = 0; t < kc; ++t, ++idx)
                                terms[idx] = nodal_eval(neuron.opset.nodal,
                                                        yp.at_or_zero(p + r, q + t), w(r, t),
                                                        model.params);
                        const PoolValue pooled = pool_eval(neuron.opset.pool, terms);
                        x(p, q) += pooled.value;
                        if (nt) {
                            idx = 0;
                            for (int r = 0; r < kr; ++r)
                                for (int t = 0; t < kc; ++t, ++idx)
                                    (*psi)(p, q, r, t) = terms[idx];
                            if (neuron.opset.pool == PoolId::Summation) {
                                for (int r = 0; r < kr; ++r)
                                    for (int t = 0; t < kc; ++t)
                                        (*dpool)(p + r, q + t, r, t) = 1.0;
                            } else {
                                const int r = pooled.argmedian / kc;
                                const int t = pooled.argmedian % kc;
                                (*dpool)(p + r, q + t, r, t) = 1.0;
                            }
                        }
                    }
                }
                if (nt) {
                    Cache4D dy(out_rows + kr - 1, out_cols + kc - 1, kr, kc);
                    Cache4D dw(out_rows + kr - 1, out_cols + kc - 1, kr, kc);
                    for (int m = 0; m < dy.rows; ++m) {
                        for (int n = 0; n < dy.cols; ++n) {
                            const double yv = yp.at_or_zero(m, n);
                            for (int r = 0; r < kr; ++r) {
                                for (int t = 0; t < kc; ++t) {
                                    const NodalGrad g =
                                        nodal_grad(neuron.opset.nodal, yv, w(r, t), model.params);
                                    dy(m, n, r, t) = g.d_y;
                                    dw(m, n, r, t) = g.d_w;
                                }
                            }
                        }
                    }
                    nt->dnodal_y.push_back(std::move(dy));
                    nt->dnodal_w.push_back(std::move(dw));
                }
            }

            Map2D act(out_rows, out_cols);
            Map2D fprime(out_rows, out_cols);
            for (int i = 0; i < x.size(); ++i) {
                act.data[i] = act_eval(neuron.opset.act, x.data[i], model.params);
                fprime.data[i] = act_grad(neuron.opset.act, x.data[i], model.params);
            }
            Map2D y = detail::apply_sampling(act, spec.sampling);
            if (!x.all_finite() || !y.all_finite()) {
                std::ostringstream os;
                os << "forward: non-finite value at layer " << l << " neuron " << k;
                throw NumericError(os.str());
            }
            if (nt) {
                nt->x = x;
                nt->act = act;
                nt->fprime = std::move(fprime);
                nt->y = y;
            }
            outs.push_back(std::move(y));
        }
        prev = std::move(outs);
    }
    return prev;
}

} // namespace onn
