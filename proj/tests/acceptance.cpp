// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// gating criterion fails. Criterion 8 is informative (directional claim at
// toy scale) and reported without gating.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "onn/onn.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace onn;

namespace {

int g_failures = 0;

struct Stopwatch {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void report(int criterion, bool passed, const std::string& detail, double seconds,
            bool gating = true) {
    std::printf("[%s] criterion %d: %s (%.2fs)\n",
                passed ? "PASS" : (gating ? "FAIL" : "fail"), criterion, detail.c_str(), seconds);
    std::fflush(stdout);
    if (!passed && gating)
        ++g_failures;
}

Map2D rand_map(Rng& rng, int rows, int cols) {
    Map2D m(rows, cols);
    for (double& v : m.data)
        v = rng.next_uniform(-1.0, 1.0);
    return m;
}

Map2D wgn_map(Rng& rng, int size) {
    Map2D m(size, size);
    for (double& v : m.data)
        v = rng.next_gaussian();
    double lo = m.data[0], hi = m.data[0];
    for (double v : m.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return normalize(m, lo, hi);
}

// 1. Operator-set encoding round trip plus the cited index mappings.
void criterion_1() {
    Stopwatch sw;
    bool ok = true;
    for (int i = 0; i < kOperatorSetCount; ++i)
        ok = ok && set_to_index(index_to_set(i)) == i;
    const auto expect = [&](int index, int pool, int act, int nodal) {
        const OperatorSet s = index_to_set(index);
        ok = ok && static_cast<int>(s.pool) == pool && static_cast<int>(s.act) == act &&
             static_cast<int>(s.nodal) == nodal;
        ok = ok && set_to_index(OperatorSet{static_cast<PoolId>(pool), static_cast<ActId>(act),
                                            static_cast<NodalId>(nodal)}) == index;
    };
    expect(0, 0, 0, 0);
    expect(9, 0, 1, 2);
    expect(12, 0, 1, 5);
    expect(13, 0, 1, 6);
    expect(16, 1, 0, 2);
    expect(27, 1, 1, 6);
    report(1, ok, "operator-set encoding round-trip and cited mappings", sw.seconds());
}

// 2. CNN degeneration: forward, deltas and sensitivities against the
// independent classic-CNN oracle on 50 random set-0 models.
void criterion_2() {
    Stopwatch sw;
    bool ok = true;
    double worst = 0.0;
    Rng rng(20240001);
    for (int trial = 0; trial < 50 && ok; ++trial) {
        testutil::RandomNetCase c = testutil::random_net_case(rng, PaddingMode::NoZeroPad);
        for (auto& s : c.specs)
            s.opset = index_to_set(0);
        const NetworkModel model = init_network(c.specs, c.channels, 9000 + trial);
        std::vector<Map2D> input;
        for (int ch = 0; ch < c.channels; ++ch)
            input.push_back(rand_map(rng, c.input_rows, c.input_cols));

        ForwardTrace trace;
        const std::vector<Map2D> outs = forward(model, input, &trace);
        std::vector<Map2D> targets;
        for (const auto& o : outs)
            targets.push_back(rand_map(rng, o.rows, o.cols));
        const BPState bp = backward(model, trace, targets);

        oracle::CnnTrace ref_trace;
        const std::vector<Map2D> ref_outs = oracle::cnn_forward_ref(model, input, &ref_trace);
        const oracle::CnnBP ref = oracle::cnn_backward_ref(model, ref_trace, targets);

        for (std::size_t i = 0; i < outs.size(); ++i)
            worst = std::max(worst, max_abs_diff(outs[i], ref_outs[i]));
        for (int l = 0; l < model.layer_count(); ++l)
            for (std::size_t k = 0; k < model.layers[l].size(); ++k) {
                worst = std::max(worst, max_abs_diff(bp.delta[l][k], ref.delta[l][k]));
                worst = std::max(worst, max_abs_diff(bp.delta_y[l][k], ref.delta_y[l][k]));
                worst = std::max(worst,
                                 std::fabs(bp.sens.layers[l][k].d_bias - ref.d_bias[l][k]));
                for (std::size_t i = 0; i < bp.sens.layers[l][k].d_kernels.size(); ++i)
                    worst = std::max(worst, max_abs_diff(bp.sens.layers[l][k].d_kernels[i],
                                                         ref.d_kernels[l][k][i]));
            }
        ok = ok && worst <= 1e-12;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "CNN degeneration on 50 random models, max |diff| = %.3e (<= 1e-12)", worst);
    report(2, ok && worst <= 1e-12, buf, sw.seconds());
}

// 3 (and 5). Gradient correctness for all 28 operator sets, 5 seeds, both
// padding modes, on nets with one down-sample-2 and one up-sample-2 layer.
void criterion_3_and_5() {
    Stopwatch sw;
    GradcheckConfig cfg; // h = 1e-6, tolerance 1e-5, 5 seeds
    bool ok = true;
    double worst = 0.0;
    int total_redraws = 0;
    for (int s = 0; s < kOperatorSetCount; ++s) {
        for (PaddingMode mode : {PaddingMode::NoZeroPad, PaddingMode::SamePad}) {
            const GradcheckReport r = gradcheck_operator_set(
                s, mode, mix_seed(777, 100 * s + (mode == PaddingMode::SamePad ? 1 : 0)), cfg);
            worst = std::max(worst, r.max_rel_err);
            total_redraws += r.redraws;
            if (!r.passed) {
                ok = false;
                std::printf("       set %d (%s): max rel err %.3e\n", s, to_string(mode),
                            r.max_rel_err);
            }
        }
    }
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "analytic vs finite-difference gradients, 28 sets x 5 seeds x 2 paddings, "
                  "max rel err = %.3e (< 1e-5), %d redraws",
                  worst, total_redraws);
    const double secs = sw.seconds();
    report(3, ok, buf, secs);
    report(5, ok, "sampling factors validated end-to-end inside criterion 3's nets", 0.0);
}

// 4. Learning-rate schedule branch cases reproduce exactly.
void criterion_4() {
    Stopwatch sw;
    TrainConfig cfg;
    const bool ok = adapt_learning_rate(0.1, 1.0, 2.0, cfg) == 0.1 * 1.05 &&
                    adapt_learning_rate(0.49, 1.0, 2.0, cfg) == 0.49 &&
                    adapt_learning_rate(6e-5, 2.0, 1.0, cfg) == 6e-5;
    report(4, ok, "learning-rate growth to 0.105, cap at 0.49, floor at 6e-5", sw.seconds());
}

// 6. GIS equals exhaustive enumeration on a one-searchable-layer instance.
void criterion_6() {
    Stopwatch sw;
    Rng rng(606);
    DatasetPair pair;
    pair.id = "toy";
    pair.input = {rand_map(rng, 8, 8)};
    pair.target = {rand_map(rng, 8, 8)};
    const Dataset data{pair};

    std::vector<LayerSpec> specs{{3, 3, 3, 1, PaddingMode::SamePad, index_to_set(0)},
                                 {1, 3, 3, 1, PaddingMode::SamePad, index_to_set(0)}};
    OperatorLibrary lib;
    for (int s : {0, 2, 9, 16})
        lib.sets.push_back(index_to_set(s));
    lib.frozen[1] = index_to_set(0);

    GISConfig cfg;
    cfg.passes = 1;
    cfg.n_bp = 2;
    cfg.short_iter_max = 20;
    cfg.final_iter_max = 5;
    cfg.seed = 61;
    TrainConfig tc;
    const GISResult res = gis_search(specs, 1, data, lib, cfg, tc);

    bool ok = res.log.size() == 4;
    const std::vector<std::uint64_t>& seeds = res.log.front().seeds;
    double best_loss = std::numeric_limits<double>::infinity();
    int brute_winner = -1;
    for (std::size_t ci = 0; ci < lib.sets.size(); ++ci) {
        std::vector<LayerSpec> cspecs = specs;
        cspecs[0].opset = lib.sets[ci];
        double best = std::numeric_limits<double>::infinity();
        for (std::uint64_t s : seeds) {
            NetworkModel model = init_network(cspecs, 1, s);
            TrainConfig short_cfg = tc;
            short_cfg.iter_max = cfg.short_iter_max;
            const TrainResult tr = train(model, data, short_cfg);
            for (const auto& row : tr.history)
                best = std::min(best, row.mse);
        }
        ok = ok && res.log[ci].best_mse == best;
        if (best < best_loss) {
            best_loss = best;
            brute_winner = static_cast<int>(ci);
        }
    }
    ok = ok && set_to_index(res.assignment[0]) == set_to_index(lib.sets[brute_winner]);
    report(6, ok, "GIS winner and per-candidate losses equal exhaustive enumeration exactly",
           sw.seconds());
}

// 7. Learnability smoke: final batch MSE within 10% of the iteration-0 MSE.
void criterion_7() {
    Stopwatch sw;
    Rng rng(700);
    DatasetPair pair;
    pair.id = "smoke";
    pair.input = {wgn_map(rng, 16)};
    pair.target = {patterns::checkerboard(16, 4)};
    const Dataset data{pair};

    std::vector<LayerSpec> specs{{4, 3, 3, -2, PaddingMode::SamePad, index_to_set(9)},
                                 {8, 3, 3, 2, PaddingMode::SamePad, index_to_set(9)},
                                 {1, 3, 3, 1, PaddingMode::SamePad, index_to_set(0)}};
    NetworkModel model = init_network(specs, 1, 701);
    TrainConfig cfg;
    cfg.iter_max = 240;
    const TrainResult res = train(model, data, cfg);

    const double initial = res.history.front().mse;
    const double final_mse = res.final_mse;
    const bool ok = !res.diverged_at && final_mse <= 0.1 * initial;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "learnability smoke: mse %.4f -> %.4f over 240 iterations (<= 10%%)", initial,
                  final_mse);
    report(7, ok, buf, sw.seconds());
}

// 8. Directional echo (informative): GIS-selected nets reach at least the
// convolutional baseline's training SNR in 2 of 3 toy repetitions.
void criterion_8() {
    Stopwatch sw;
    int wins = 0;
    for (int rep = 0; rep < 3; ++rep) {
        Rng rng(800 + rep);
        DatasetPair pair;
        pair.id = "synth";
        pair.input = {wgn_map(rng, 16)};
        pair.target = {patterns::target_texture(rep, 16, rng)};
        const Dataset data{pair};

        std::vector<LayerSpec> specs{{4, 3, 3, -2, PaddingMode::SamePad, index_to_set(0)},
                                     {8, 3, 3, 2, PaddingMode::SamePad, index_to_set(0)},
                                     {1, 3, 3, 1, PaddingMode::SamePad, index_to_set(0)}};
        OperatorLibrary lib = OperatorLibrary::full();
        lib.frozen[2] = index_to_set(0);

        GISConfig gcfg;
        gcfg.passes = 1;
        gcfg.n_bp = 2;
        gcfg.short_iter_max = 60;
        gcfg.final_iter_max = 0;
        gcfg.seed = 810 + rep;
        TrainConfig tc;
        const GISResult gis = gis_search(specs, 1, data, lib, gcfg, tc);

        std::vector<LayerSpec> onn_specs = specs;
        for (std::size_t l = 0; l < onn_specs.size(); ++l)
            onn_specs[l].opset = gis.assignment[l];

        const auto best_snr = [&](const std::vector<LayerSpec>& s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int seed_i = 0; seed_i < 3; ++seed_i) {
                NetworkModel model = init_network(s, 1, mix_seed(820 + rep, seed_i));
                TrainConfig cfg;
                cfg.iter_max = 240;
                const TrainResult tr = train(model, data, cfg);
                if (tr.diverged_at)
                    continue;
                const std::vector<Map2D> out = forward(model, pair.input);
                best = std::max(best, snr_db(pair.target.front(), out.front()));
            }
            return best;
        };
        const double snr_onn = best_snr(onn_specs);
        const double snr_cnn = best_snr(specs);
        std::printf("       rep %d: ONN %.2f dB vs CNN %.2f dB\n", rep, snr_onn, snr_cnn);
        if (snr_onn >= snr_cnn)
            ++wins;
    }
    char buf[120];
    std::snprintf(buf, sizeof(buf),
                  "directional echo (informative): GIS-selected nets win %d of 3 repetitions",
                  wins);
    report(8, wins >= 2, buf, sw.seconds(), /*gating=*/false);
}

// 9. Data generator fidelity and metric oracles.
void criterion_9() {
    Stopwatch sw;
    bool ok = true;

    const std::filesystem::path dir =
        std::filesystem::temp_directory_path() / "onn_acceptance_denoise";
    std::filesystem::remove_all(dir);
    MakeDataOptions opt;
    opt.size = 16;
    opt.count = 4;
    make_dataset("denoise", dir.string(), 909, opt);
    const Dataset data = load_dataset(dir.string());
    double worst_db = 0.0;
    for (const auto& item : data) {
        const double snr = snr_db(item.target.front(), item.input.front());
        worst_db = std::max(worst_db, std::fabs(snr));
    }
    ok = ok && worst_db <= 0.01;
    std::filesystem::remove_all(dir);

    // Metric implementations vs brute-force oracles.
    Rng rng(910);
    double worst_var = 0.0, worst_conf = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Map2D target = rand_map(rng, 8, 8);
        const Map2D output = rand_map(rng, 8, 8);
        Map2D noise(8, 8);
        for (int i = 0; i < 64; ++i)
            noise.data[i] = target.data[i] - output.data[i];
        const double want =
            10.0 * std::log10(oracle::variance_ref(target) / oracle::variance_ref(noise));
        worst_var = std::max(worst_var, std::fabs(snr_db(target, output) - want));

        Map2D truth(8, 8);
        for (double& v : truth.data)
            v = rng.next_unit() < 0.5 ? 1.0 : -1.0;
        const oracle::Confusion c = oracle::confusion_ref(output, truth, 0.0);
        const MetricReport r = segmentation_metrics(output, truth, 0.0);
        worst_conf = std::max(worst_conf,
                              std::fabs(r.accuracy - static_cast<double>(c.tp + c.tn) / 64.0));
        if (c.tp + c.fp > 0)
            worst_conf = std::max(worst_conf, std::fabs(r.precision - static_cast<double>(c.tp) /
                                                                          (c.tp + c.fp)));
        if (c.tp + c.fn > 0)
            worst_conf = std::max(
                worst_conf, std::fabs(r.recall - static_cast<double>(c.tp) / (c.tp + c.fn)));
    }
    ok = ok && worst_var <= 1e-12 && worst_conf <= 1e-12;

    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "denoise inputs |SNR| <= %.4f dB (cap 0.01); metric oracle gaps %.1e / %.1e "
                  "(<= 1e-12)",
                  worst_db, worst_var, worst_conf);
    report(9, ok, buf, sw.seconds());
}

} // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion_1();
    criterion_2();
    criterion_3_and_5();
    criterion_4();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    if (g_failures == 0)
        std::printf("all gating criteria passed\n");
    else
        std::printf("%d gating criteria FAILED\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
