#pragma once

// Gradient verification harness: compares analytic sensitivities against
// central finite differences on a small fixed network (1x3x3x1 with one
// down-sample-2 and one up-sample-2 hidden layer) for any operator set and
// padding mode.
//
// Draws that land on non-differentiable spots are re-drawn with a derived
// seed: lin-cut pre-activations within 1e-4 of +-cut, median windows whose
// selected term has a neighbor closer than 1e-8, and sinc inputs inside the
// |y| < 1e-4 guard band (real pixels only; the constant zero pad never moves
// under a parameter perturbation).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "onn/backprop.hpp"
#include "onn/network.hpp"
#include "onn/rng.hpp"

namespace onn {

struct GradcheckConfig {
    double h = 1e-6;
    double tolerance = 1e-5;
    int num_seeds = 5;
    int max_redraws = 50;
    double lincut_band = 1e-4;
    double median_gap = 1e-8;
    double sinc_band = 1e-4;
    // Relative error uses max(|analytic|, |fd|, rel_floor) as denominator so
    // that parameters with near-zero gradients are held to a matching
    // absolute tolerance instead of amplifying finite-difference round-off.
    double rel_floor = 1e-2;
};

struct GradcheckReport {
    int set_index = 0;
    double max_rel_err = 0.0;
    int redraws = 0;
    bool passed = false;
};

namespace detail {

inline bool window_has_median_tie(const Cache4D& psi, int p, int q, double gap) {
    const int n = psi.krows * psi.kcols;
    std::vector<double> sorted(static_cast<std::size_t>(n));
    int idx = 0;
    for (int r = 0; r < psi.krows; ++r)
        for (int t = 0; t < psi.kcols; ++t)
            sorted[idx++] = psi(p, q, r, t);
    std::sort(sorted.begin(), sorted.end());
    const int mid = (n - 1) / 2;
    if (mid > 0 && sorted[mid] - sorted[mid - 1] < gap)
        return true;
    if (mid + 1 < n && sorted[mid + 1] - sorted[mid] < gap)
        return true;
    return false;
}

} // namespace detail

// True when the traced forward sits too close to a kink, median tie or sinc
// guard band for finite differences to be trustworthy.
inline bool has_fragile_draw(const NetworkModel& model, const ForwardTrace& trace,
                             const GradcheckConfig& cfg) {
    for (int l = 0; l < model.layer_count(); ++l) {
        const OperatorSet set = model.specs[l].opset;
        if (set.nodal == NodalId::Sinc) {
            const std::vector<Map2D>* inputs = &trace.input;
            std::vector<Map2D> prev_y;
            if (l > 0) {
                for (const auto& nt : trace.layers[l - 1])
                    prev_y.push_back(nt.y);
                inputs = &prev_y;
            }
            for (const auto& m : *inputs)
                for (double v : m.data)
                    if (std::fabs(v) < cfg.sinc_band)
                        return true;
        }
        for (const auto& nt : trace.layers[l]) {
            if (set.act == ActId::LinCut) {
                for (double v : nt.x.data)
                    if (std::fabs(std::fabs(v) - model.params.cut) < cfg.lincut_band)
                        return true;
            }
            if (set.pool == PoolId::Median) {
                for (const auto& psi : nt.psi)
                    for (int p = 0; p < psi.rows; ++p)
                        for (int q = 0; q < psi.cols; ++q)
                            if (detail::window_has_median_tie(psi, p, q, cfg.median_gap))
                                return true;
            }
        }
    }
    return false;
}

inline double relative_gradient_error(const Sensitivities& analytic, const Sensitivities& fd,
                                      double rel_floor) {
    double worst = 0.0;
    for (std::size_t l = 0; l < analytic.layers.size(); ++l) {
        for (std::size_t k = 0; k < analytic.layers[l].size(); ++k) {
            const NeuronSens& a = analytic.layers[l][k];
            const NeuronSens& f = fd.layers[l][k];
            const auto rel = [rel_floor](double x, double y) {
                return std::fabs(x - y) / std::max({std::fabs(x), std::fabs(y), rel_floor});
            };
            worst = std::max(worst, rel(a.d_bias, f.d_bias));
            for (std::size_t i = 0; i < a.d_kernels.size(); ++i)
                for (int j = 0; j < a.d_kernels[i].size(); ++j)
                    worst = std::max(worst, rel(a.d_kernels[i].data[j], f.d_kernels[i].data[j]));
        }
    }
    return worst;
}

inline std::vector<LayerSpec> gradcheck_layer_specs(const OperatorSet& set, PaddingMode mode) {
    LayerSpec l1{3, 3, 3, -2, mode, set};
    LayerSpec l2{3, 3, 3, 2, mode, set};
    LayerSpec l3{1, 3, 3, 1, mode, set};
    return {l1, l2, l3};
}

// SamePad keeps 8x8 maps alive through the net; NoZeroPad needs 12x12 so the
// shrinking maps stay at least kernel-sized everywhere.
inline int gradcheck_input_size(PaddingMode mode) {
    return mode == PaddingMode::SamePad ? 8 : 12;
}

inline GradcheckReport gradcheck_operator_set(int set_index, PaddingMode mode,
                                              std::uint64_t base_seed,
                                              const GradcheckConfig& cfg = {}) {
    const OperatorSet set = index_to_set(set_index);
    const std::vector<LayerSpec> specs = gradcheck_layer_specs(set, mode);
    const int size = gradcheck_input_size(mode);

    GradcheckReport report;
    report.set_index = set_index;
    for (int seed_idx = 0; seed_idx < cfg.num_seeds; ++seed_idx) {
        bool checked = false;
        for (int attempt = 0; attempt <= cfg.max_redraws; ++attempt) {
            const std::uint64_t draw =
                mix_seed(base_seed, static_cast<std::uint64_t>(seed_idx) * 1009 + attempt);
            NetworkModel model = init_network(specs, 1, draw);

            Rng data_rng(mix_seed(draw, 17));
            Map2D in(size, size);
            for (double& v : in.data)
                v = data_rng.next_uniform(-1.0, 1.0);
            const std::vector<Map2D> input{in};

            ForwardTrace trace;
            const std::vector<Map2D> outs = forward(model, input, &trace);
            if (has_fragile_draw(model, trace, cfg)) {
                ++report.redraws;
                continue;
            }

            Rng target_rng(mix_seed(draw, 23));
            std::vector<Map2D> target;
            for (const auto& o : outs) {
                Map2D t(o.rows, o.cols);
                for (double& v : t.data)
                    v = target_rng.next_uniform(-1.0, 1.0);
                target.push_back(std::move(t));
            }

            const BPState bp = backward(model, trace, target);
            const Sensitivities fd = finite_difference_gradients(model, input, target, cfg.h);
            report.max_rel_err =
                std::max(report.max_rel_err, relative_gradient_error(bp.sens, fd, cfg.rel_floor));
            checked = true;
            break;
        }
        if (!checked)
            throw NumericError("gradcheck: exceeded redraw budget without a clean draw");
    }
    report.passed = report.max_rel_err < cfg.tolerance;
    return report;
}

// Per-set sweep across both padding modes; each row carries the worst error.
inline std::vector<GradcheckReport> gradcheck_sweep(std::uint64_t base_seed,
                                                    const GradcheckConfig& cfg = {}) {
    std::vector<GradcheckReport> rows;
    rows.reserve(kOperatorSetCount);
    for (int s = 0; s < kOperatorSetCount; ++s) {
        GradcheckReport none = gradcheck_operator_set(s, PaddingMode::NoZeroPad,
                                                      mix_seed(base_seed, 100 + s), cfg);
        GradcheckReport same = gradcheck_operator_set(s, PaddingMode::SamePad,
                                                      mix_seed(base_seed, 200 + s), cfg);
        GradcheckReport merged;
        merged.set_index = s;
        merged.max_rel_err = std::max(none.max_rel_err, same.max_rel_err);
        merged.redraws = none.redraws + same.redraws;
        merged.passed = merged.max_rel_err < cfg.tolerance;
        rows.push_back(merged);
    }
    return rows;
}

} // namespace onn
