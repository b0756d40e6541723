#pragma once

// Greedy Iterative Search over operator sets: multiple passes, each walking
// the searchable layers from the output backwards; every candidate set is
// scored by the best loss over a few short training sessions from fresh
// seeded initializations, and the winner stays assigned before the search
// moves on.
//
// Seed discipline: the run seeds at a given (pass, layer) position are shared
// by all candidates, so score differences isolate the operator set. Weights
// from search runs are discarded; only the winning assignment persists, and
// the returned model is trained from a fresh seed afterwards (unless a run
// already reached the target, in which case that run is reproduced).

#include <algorithm>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "onn/backprop.hpp"
#include "onn/dataset.hpp"
#include "onn/network.hpp"
#include "onn/rng.hpp"

namespace onn {

struct OperatorLibrary {
    std::vector<OperatorSet> sets;      // candidates, evaluated in this order
    std::map<int, OperatorSet> frozen;  // layer index -> pinned set, excluded from search

    static OperatorLibrary full() {
        OperatorLibrary lib;
        for (int i = 0; i < kOperatorSetCount; ++i)
            lib.sets.push_back(index_to_set(i));
        return lib;
    }
};

struct GISConfig {
    int passes = 2;
    int n_bp = 2;            // short sessions per candidate
    int short_iter_max = 80; // iterations of a search session
    int final_iter_max = 240;
    std::optional<double> target_mse;
    std::uint64_t seed = 0;
    int threads = 1; // parallelism across candidates within one (pass, layer)

    void validate() const {
        if (passes < 1 || n_bp < 1)
            throw InputError("GISConfig: need passes >= 1 and n_bp >= 1");
        if (short_iter_max < 1 || final_iter_max < 0)
            throw InputError("GISConfig: need short_iter_max >= 1 and final_iter_max >= 0");
        if (threads < 1)
            throw InputError("GISConfig: threads must be >= 1");
    }
};

struct GISLogRow {
    int pass = 0;
    int layer = 0;
    int set_index = 0;
    double best_mse = 0.0;
    std::vector<std::uint64_t> seeds;
    int rank = 0; // 0 = winner at this (pass, layer)
};

struct GISResult {
    NetworkModel model;
    std::vector<OperatorSet> assignment;
    std::vector<GISLogRow> log;
    bool target_reached = false;
    TrainResult final_training;
};

namespace detail {

inline double session_best_mse(const TrainResult& r) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& row : r.history)
        best = std::min(best, row.mse);
    return best;
}

// Index-strided worker pool; rethrows the first captured exception.
template <typename Fn>
inline void parallel_for(int n, int threads, Fn&& fn) {
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (int i = w; i < n; i += threads)
                    fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error)
                    error = std::current_exception();
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

} // namespace detail

inline GISResult gis_search(const std::vector<LayerSpec>& base_specs, int input_channels,
                            const Dataset& data, const OperatorLibrary& library,
                            const GISConfig& cfg, const TrainConfig& train_base) {
    cfg.validate();
    if (library.sets.empty())
        throw InputError("gis_search: empty operator library");
    if (data.empty())
        throw InputError("gis_search: empty dataset");

    const int L = static_cast<int>(base_specs.size());
    std::vector<int> searchable;
    for (int l = 0; l < L; ++l)
        if (!library.frozen.count(l))
            searchable.push_back(l);
    if (searchable.empty())
        throw InputError("gis_search: no searchable layer after freezing");

    // Initial assignment: random library entries; frozen layers pinned.
    std::vector<LayerSpec> specs = base_specs;
    for (int l = 0; l < L; ++l) {
        const auto frozen = library.frozen.find(l);
        if (frozen != library.frozen.end()) {
            specs[l].opset = frozen->second;
        } else {
            Rng pick(mix_seed(cfg.seed, 5000 + l));
            specs[l].opset = library.sets[pick.next_u64() % library.sets.size()];
        }
    }

    TrainConfig short_cfg = train_base;
    short_cfg.iter_max = cfg.short_iter_max;
    short_cfg.target_mse = cfg.target_mse;

    GISResult result;
    std::uint64_t winning_run_seed = 0;
    bool have_winning_seed = false;

    for (int pass = 1; pass <= cfg.passes && !result.target_reached; ++pass) {
        for (int si = static_cast<int>(searchable.size()) - 1;
             si >= 0 && !result.target_reached; --si) {
            const int layer = searchable[si];

            std::vector<std::uint64_t> run_seeds;
            for (int run = 0; run < cfg.n_bp; ++run)
                run_seeds.push_back(mix_seed(cfg.seed, static_cast<std::uint64_t>(pass) * 1000000 +
                                                           static_cast<std::uint64_t>(layer) * 10000 +
                                                           run));

            const int n_candidates = static_cast<int>(library.sets.size());
            std::vector<double> best(n_candidates, std::numeric_limits<double>::infinity());
            std::vector<std::uint64_t> best_seed(n_candidates, 0);
            std::vector<char> hit_target(n_candidates, 0);

            detail::parallel_for(n_candidates, cfg.threads, [&](int ci) {
                std::vector<LayerSpec> cand = specs;
                cand[layer].opset = library.sets[ci];
                for (std::uint64_t run_seed : run_seeds) {
                    NetworkModel model = init_network(cand, input_channels, run_seed);
                    const TrainResult tr = train(model, data, short_cfg);
                    const double score = detail::session_best_mse(tr);
                    if (score < best[ci]) {
                        best[ci] = score;
                        best_seed[ci] = run_seed;
                    }
                    if (tr.target_reached)
                        hit_target[ci] = 1;
                }
            });

            // Rank by (best loss, library order); ties favor the lower index.
            std::vector<int> order(library.sets.size());
            for (std::size_t i = 0; i < order.size(); ++i)
                order[i] = static_cast<int>(i);
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return best[a] < best[b]; });

            for (std::size_t ci = 0; ci < library.sets.size(); ++ci) {
                GISLogRow row;
                row.pass = pass;
                row.layer = layer;
                row.set_index = set_to_index(library.sets[ci]);
                row.best_mse = best[ci];
                row.seeds = run_seeds;
                row.rank = static_cast<int>(
                    std::find(order.begin(), order.end(), static_cast<int>(ci)) - order.begin());
                result.log.push_back(std::move(row));
            }

            const int winner = order.front();
            specs[layer].opset = library.sets[winner];
            if (std::any_of(hit_target.begin(), hit_target.end(), [](char h) { return h != 0; })) {
                result.target_reached = true;
                winning_run_seed = best_seed[winner];
                have_winning_seed = true;
            }
        }
    }

    result.assignment.reserve(specs.size());
    for (const auto& s : specs)
        result.assignment.push_back(s.opset);

    if (result.target_reached && have_winning_seed) {
        // Reproduce the winning session deterministically.
        result.model = init_network(specs, input_channels, winning_run_seed);
        result.final_training = train(result.model, data, short_cfg);
        return result;
    }

    TrainConfig final_cfg = train_base;
    final_cfg.iter_max = cfg.final_iter_max;
    final_cfg.target_mse = cfg.target_mse;
    const std::uint64_t final_seed = mix_seed(cfg.seed, 999999);
    result.model = init_network(specs, input_channels, final_seed);
    if (cfg.final_iter_max > 0)
        result.final_training = train(result.model, data, final_cfg);
    result.target_reached = result.final_training.target_reached;
    return result;
}

} // namespace onn
