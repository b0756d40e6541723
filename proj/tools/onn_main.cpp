// Command-line harness: dataset generation, training, greedy operator-set
// search, evaluation and gradient checking for operational networks at
// thumbnail scale.
//
// Exit codes: 0 success, 2 input error (unreadable files, bad configuration,
// shape mismatches), 3 numeric failure (divergence, gradcheck above
// tolerance).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "onn/onn.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct ExperimentConfig {
    std::string task = "synth";
    std::string dataset;
    std::string out = "out";
    std::uint64_t seed = 1;

    std::vector<int> hidden = {16, 32};
    std::vector<int> sampling = {-2, 2}; // per hidden layer
    int kernel = 3;
    std::string padding = "same";
    int opset = 0;        // hidden-layer operator set at start
    int output_opset = 0; // output layer stays pinned to this set

    onn::TrainConfig train{};
    int gis_passes = 2;
    int gis_nbp = 2;
    int gis_short_iters = 80;
    int gis_final_iters = 240;
    std::vector<int> opset_library; // empty = all 28
    int threads = 0;                // 0 = unset (fall back to env/1)
    double threshold = 0.0;         // segmentation mask threshold
    double target_mse = -1.0;       // <= 0 = none
};

void apply_json_config(ExperimentConfig& cfg, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw onn::IOError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw onn::IOError(std::string("malformed config JSON: ") + e.what());
    }
    const auto get = [&](const char* key, auto& slot) {
        if (j.contains(key))
            slot = j.at(key).get<std::decay_t<decltype(slot)>>();
    };
    get("task", cfg.task);
    get("dataset", cfg.dataset);
    get("out", cfg.out);
    get("seed", cfg.seed);
    get("hidden", cfg.hidden);
    get("sampling", cfg.sampling);
    get("kernel", cfg.kernel);
    get("padding", cfg.padding);
    get("opset", cfg.opset);
    get("output_opset", cfg.output_opset);
    get("threads", cfg.threads);
    get("threshold", cfg.threshold);
    get("target_mse", cfg.target_mse);
    if (j.contains("train")) {
        const auto& t = j.at("train");
        const auto tget = [&](const char* key, auto& slot) {
            if (t.contains(key))
                slot = t.at(key).get<std::decay_t<decltype(slot)>>();
        };
        tget("epsilon0", cfg.train.epsilon0);
        tget("alpha", cfg.train.alpha_lr);
        tget("beta", cfg.train.beta_lr);
        tget("eps_min", cfg.train.eps_min);
        tget("eps_max", cfg.train.eps_max);
        tget("iters", cfg.train.iter_max);
    }
    if (j.contains("gis")) {
        const auto& g = j.at("gis");
        const auto gget = [&](const char* key, auto& slot) {
            if (g.contains(key))
                slot = g.at(key).get<std::decay_t<decltype(slot)>>();
        };
        gget("passes", cfg.gis_passes);
        gget("n_bp", cfg.gis_nbp);
        gget("short_iters", cfg.gis_short_iters);
        gget("final_iters", cfg.gis_final_iters);
        gget("library", cfg.opset_library);
    }
}

int resolve_threads(const ExperimentConfig& cfg) {
    if (cfg.threads > 0)
        return cfg.threads;
    if (const char* env = std::getenv("ONN_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0)
            return n;
    }
    return 1;
}

onn::PaddingMode parse_padding(const std::string& s) {
    if (s == "same")
        return onn::PaddingMode::SamePad;
    if (s == "none")
        return onn::PaddingMode::NoZeroPad;
    throw onn::InputError("unknown padding mode: " + s + " (want same|none)");
}

std::vector<onn::LayerSpec> build_specs(const ExperimentConfig& cfg) {
    const onn::PaddingMode pad = parse_padding(cfg.padding);
    std::vector<onn::LayerSpec> specs;
    for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
        onn::LayerSpec s;
        s.neuron_count = cfg.hidden[i];
        s.kernel_rows = s.kernel_cols = cfg.kernel;
        s.sampling = i < cfg.sampling.size() ? cfg.sampling[i] : 1;
        s.padding = pad;
        s.opset = onn::index_to_set(cfg.opset);
        specs.push_back(s);
    }
    onn::LayerSpec out;
    out.neuron_count = 1;
    out.kernel_rows = out.kernel_cols = cfg.kernel;
    out.sampling = 1;
    out.padding = pad;
    out.opset = onn::index_to_set(cfg.output_opset);
    specs.push_back(out);
    return specs;
}

onn::TrainConfig build_train_config(const ExperimentConfig& cfg) {
    onn::TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    if (cfg.target_mse > 0.0)
        tc.target_mse = cfg.target_mse;
    return tc;
}

void write_history(const std::string& path, const onn::TrainResult& result) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw onn::IOError("cannot write history: " + path);
    f << "# iter mse eps\n";
    for (const auto& row : result.history)
        f << row.iter << " " << fmt17(row.mse) << " " << fmt17(row.eps) << "\n";
}

// Wall-clock times are run-dependent; they live in their own file so every
// other artifact stays byte-identical across reruns.
void write_timing(const std::string& path, const onn::TrainResult& result) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw onn::IOError("cannot write timing log: " + path);
    double fp = 0.0, bp = 0.0;
    int iters = 0;
    f << "# iter fp_ms bp_ms\n";
    for (const auto& row : result.history) {
        if (row.fp_ms == 0.0 && row.bp_ms == 0.0)
            continue;
        f << row.iter << " " << row.fp_ms << " " << row.bp_ms << "\n";
        fp += row.fp_ms;
        bp += row.bp_ms;
        ++iters;
    }
    if (iters > 0)
        f << "# mean fp_ms/iter " << fp / iters << "  mean bp_ms/iter " << bp / iters << "\n";
}

nlohmann::json snr_json(double snr) {
    if (std::isinf(snr))
        return "inf";
    return snr;
}

nlohmann::json metrics_for_dataset(const onn::NetworkModel& model, const onn::Dataset& data,
                                   double threshold, const std::string& out_dir,
                                   bool write_outputs) {
    nlohmann::json items = nlohmann::json::array();
    double mse_sum = 0.0, snr_sum = 0.0, f1_sum = 0.0, ce_sum = 0.0;
    int snr_count = 0, seg_count = 0;
    for (const auto& item : data) {
        const std::vector<onn::Map2D> out = onn::forward(model, item.input);
        nlohmann::json entry;
        entry["id"] = item.id;
        const double mse = onn::item_mse(out, item.target);
        entry["mse"] = mse;
        mse_sum += mse;
        const double snr = onn::snr_db(item.target.front(), out.front());
        entry["snr_db"] = snr_json(snr);
        if (!std::isinf(snr)) {
            snr_sum += snr;
            ++snr_count;
        }
        if (item.target_is_mask) {
            const onn::MetricReport r =
                onn::segmentation_metrics(out.front(), item.target.front(), threshold);
            entry["ce"] = r.ce;
            entry["f1"] = r.f1;
            entry["precision"] = r.precision;
            entry["recall"] = r.recall;
            entry["precision_defined"] = r.precision_defined;
            entry["recall_defined"] = r.recall_defined;
            f1_sum += r.f1;
            ce_sum += r.ce;
            ++seg_count;
        }
        if (write_outputs)
            onn::write_pgm(out_dir + "/" + item.id + ".output.pgm", out.front());
        items.push_back(entry);
    }
    nlohmann::json doc;
    doc["items"] = items;
    nlohmann::json avg;
    avg["mse"] = mse_sum / data.size();
    if (snr_count > 0)
        avg["snr_db"] = snr_sum / snr_count;
    if (seg_count > 0) {
        avg["f1"] = f1_sum / seg_count;
        avg["ce"] = ce_sum / seg_count;
    }
    doc["averages"] = avg;
    return doc;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw onn::IOError("cannot write: " + path);
    f << j.dump(2) << "\n";
}

int cmd_train(const ExperimentConfig& cfg) {
    const onn::Dataset data = onn::load_dataset(cfg.dataset);
    std::filesystem::create_directories(cfg.out);
    const std::vector<onn::LayerSpec> specs = build_specs(cfg);
    onn::NetworkModel model = onn::init_network(specs, 1, cfg.seed);
    const onn::TrainConfig tc = build_train_config(cfg);

    const onn::TrainResult result = onn::train(model, data, tc);
    onn::save_model(cfg.out + "/model.json", model);
    write_history(cfg.out + "/history.txt", result);
    write_timing(cfg.out + "/timing.txt", result);
    write_json(cfg.out + "/metrics.json",
               metrics_for_dataset(model, data, cfg.threshold, cfg.out, false));
    if (result.diverged_at) {
        std::cerr << "training diverged at iteration " << *result.diverged_at << "\n";
        return kExitNumeric;
    }
    std::cout << "trained " << tc.iter_max << " iterations, final mse " << fmt17(result.final_mse)
              << (result.target_reached ? " (target reached)" : "") << "\n";
    return kExitOk;
}

int cmd_gis(const ExperimentConfig& cfg) {
    const onn::Dataset data = onn::load_dataset(cfg.dataset);
    std::filesystem::create_directories(cfg.out);
    const std::vector<onn::LayerSpec> specs = build_specs(cfg);

    onn::OperatorLibrary library;
    if (cfg.opset_library.empty()) {
        library = onn::OperatorLibrary::full();
    } else {
        for (int idx : cfg.opset_library)
            library.sets.push_back(onn::index_to_set(idx));
    }
    // The output layer stays a fixed (by default convolutional) layer.
    library.frozen[static_cast<int>(specs.size()) - 1] = onn::index_to_set(cfg.output_opset);

    onn::GISConfig gc;
    gc.passes = cfg.gis_passes;
    gc.n_bp = cfg.gis_nbp;
    gc.short_iter_max = cfg.gis_short_iters;
    gc.final_iter_max = cfg.gis_final_iters;
    gc.seed = cfg.seed;
    gc.threads = resolve_threads(cfg);
    if (cfg.target_mse > 0.0)
        gc.target_mse = cfg.target_mse;

    const onn::GISResult result =
        onn::gis_search(specs, 1, data, library, gc, build_train_config(cfg));

    std::ofstream log(cfg.out + "/gis_log.txt", std::ios::binary);
    if (!log)
        throw onn::IOError("cannot write GIS log");
    log << "# pass layer set_index best_mse rank\n";
    for (const auto& row : result.log)
        log << row.pass << " " << row.layer << " " << row.set_index << " " << fmt17(row.best_mse)
            << " " << row.rank << "\n";
    log.close();

    onn::save_model(cfg.out + "/model.json", result.model);
    write_history(cfg.out + "/history.txt", result.final_training);
    write_timing(cfg.out + "/timing.txt", result.final_training);
    write_json(cfg.out + "/metrics.json",
               metrics_for_dataset(result.model, data, cfg.threshold, cfg.out, false));

    std::cout << "gis assignment:";
    for (const auto& s : result.assignment)
        std::cout << " " << onn::set_to_index(s);
    std::cout << "\nfinal mse " << fmt17(result.final_training.final_mse)
              << (result.target_reached ? " (target reached)" : "") << "\n";
    if (result.final_training.diverged_at) {
        std::cerr << "final training diverged at iteration "
                  << *result.final_training.diverged_at << "\n";
        return kExitNumeric;
    }
    return kExitOk;
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& model_path) {
    const onn::NetworkModel model = onn::load_model(model_path);
    const onn::Dataset data = onn::load_dataset(cfg.dataset);
    std::filesystem::create_directories(cfg.out);
    const nlohmann::json doc = metrics_for_dataset(model, data, cfg.threshold, cfg.out, true);
    write_json(cfg.out + "/metrics.json", doc);
    std::cout << doc.at("averages").dump() << "\n";
    return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, double tolerance, double h, int num_seeds,
                  const std::vector<int>& sets) {
    onn::GradcheckConfig gc;
    gc.tolerance = tolerance;
    gc.h = h;
    gc.num_seeds = num_seeds;

    std::vector<int> selected = sets;
    if (selected.empty())
        for (int i = 0; i < onn::kOperatorSetCount; ++i)
            selected.push_back(i);

    bool all_passed = true;
    std::printf("set  pool    act     nodal     max_rel_err   redraws  result\n");
    for (int s : selected) {
        const onn::GradcheckReport none =
            onn::gradcheck_operator_set(s, onn::PaddingMode::NoZeroPad, onn::mix_seed(seed, 100 + s), gc);
        const onn::GradcheckReport same =
            onn::gradcheck_operator_set(s, onn::PaddingMode::SamePad, onn::mix_seed(seed, 200 + s), gc);
        const double err = std::max(none.max_rel_err, same.max_rel_err);
        const bool passed = err < tolerance;
        all_passed = all_passed && passed;
        const onn::OperatorSet set = onn::index_to_set(s);
        std::printf("%-4d %-7s %-7s %-9s %-13.3e %-8d %s\n", s, onn::to_string(set.pool),
                    onn::to_string(set.act), onn::to_string(set.nodal), err,
                    none.redraws + same.redraws, passed ? "pass" : "FAIL");
    }
    return all_passed ? kExitOk : kExitNumeric;
}

int cmd_make_data(const std::string& kind, const std::string& out, std::uint64_t seed, int size,
                  int count) {
    onn::MakeDataOptions opt;
    opt.size = size;
    opt.count = count;
    onn::make_dataset(kind, out, seed, opt);
    std::cout << "wrote " << kind << " dataset (" << count << " items, " << size << "x" << size
              << ") to " << out << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"operational neural network experiments"};
    app.require_subcommand(1);

    ExperimentConfig cfg;
    std::string config_path;
    std::string opset_library_arg;
    std::string model_path;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--seed", cfg.seed, "master seed");
        sub->add_option("--out", cfg.out, "output directory");
        sub->add_option("--dataset", cfg.dataset, "dataset directory");
        sub->add_option("--threads", cfg.threads, "worker threads (env ONN_THREADS as fallback)");
    };

    CLI::App* train = app.add_subcommand("train", "train a network with back-propagation");
    add_common(train);
    train->add_option("--task", cfg.task, "experiment kind");
    train->add_option("--iters", cfg.train.iter_max, "training iterations");
    train->add_option("--epsilon0", cfg.train.epsilon0, "initial learning rate");
    train->add_option("--target", cfg.target_mse, "stop at this batch MSE");
    train->add_option("--hidden", cfg.hidden, "hidden layer widths");
    train->add_option("--sampling", cfg.sampling, "per-hidden-layer sampling factors");
    train->add_option("--kernel", cfg.kernel, "kernel size (odd)");
    train->add_option("--padding", cfg.padding, "same|none");
    train->add_option("--opset", cfg.opset, "operator set for hidden layers");
    train->add_option("--output-opset", cfg.output_opset, "operator set for the output layer");

    CLI::App* gis = app.add_subcommand("gis", "greedy operator-set search, then training");
    add_common(gis);
    gis->add_option("--task", cfg.task, "experiment kind");
    gis->add_option("--iters", cfg.gis_final_iters, "final training iterations");
    gis->add_option("--epsilon0", cfg.train.epsilon0, "initial learning rate");
    gis->add_option("--target", cfg.target_mse, "stop at this batch MSE");
    gis->add_option("--hidden", cfg.hidden, "hidden layer widths");
    gis->add_option("--sampling", cfg.sampling, "per-hidden-layer sampling factors");
    gis->add_option("--kernel", cfg.kernel, "kernel size (odd)");
    gis->add_option("--padding", cfg.padding, "same|none");
    gis->add_option("--output-opset", cfg.output_opset, "pinned output-layer operator set");
    gis->add_option("--opset-library", opset_library_arg, "comma-separated set indices");
    gis->add_option("--passes", cfg.gis_passes, "GIS passes");
    gis->add_option("--nbp", cfg.gis_nbp, "short sessions per candidate");
    gis->add_option("--short-iters", cfg.gis_short_iters, "iterations per search session");

    CLI::App* eval = app.add_subcommand("eval", "forward-only evaluation of a saved model");
    add_common(eval);
    eval->add_option("--model", model_path, "model document")->required();
    eval->add_option("--threshold", cfg.threshold, "segmentation mask threshold");

    std::uint64_t gc_seed = 1;
    double gc_tolerance = 1e-5;
    double gc_h = 1e-6;
    int gc_num_seeds = 5;
    std::string gc_sets_arg;
    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "analytic vs finite-difference gradients per operator set");
    gradcheck->add_option("--seed", gc_seed, "master seed");
    gradcheck->add_option("--tolerance", gc_tolerance, "max relative error allowed");
    gradcheck->add_option("--step", gc_h, "finite-difference step");
    gradcheck->add_option("--num-seeds", gc_num_seeds, "random draws per set and padding");
    gradcheck->add_option("--sets", gc_sets_arg, "comma-separated set indices (default all)");

    std::string md_kind = "synth";
    int md_size = 16;
    int md_count = 4;
    CLI::App* make_data = app.add_subcommand("make-data", "generate a synthetic dataset");
    make_data->add_option("--kind", md_kind, "denoise|synth|segment|transform")->required();
    make_data->add_option("--out", cfg.out, "output directory")->required();
    make_data->add_option("--seed", cfg.seed, "master seed");
    make_data->add_option("--size", md_size, "image side length");
    make_data->add_option("--count", md_count, "number of items");

    CLI11_PARSE(app, argc, argv);

    try {
        // Config file first, then re-parse so explicit flags win.
        if (!config_path.empty()) {
            apply_json_config(cfg, config_path);
            app.clear();
            CLI11_PARSE(app, argc, argv);
        }
        if (!opset_library_arg.empty()) {
            cfg.opset_library.clear();
            std::stringstream ss(opset_library_arg);
            std::string tok;
            while (std::getline(ss, tok, ','))
                cfg.opset_library.push_back(std::stoi(tok));
        }
        std::vector<int> gc_sets;
        if (!gc_sets_arg.empty()) {
            std::stringstream ss(gc_sets_arg);
            std::string tok;
            while (std::getline(ss, tok, ','))
                gc_sets.push_back(std::stoi(tok));
        }

        if (train->parsed())
            return cmd_train(cfg);
        if (gis->parsed())
            return cmd_gis(cfg);
        if (eval->parsed())
            return cmd_eval(cfg, model_path);
        if (gradcheck->parsed())
            return cmd_gradcheck(gc_seed, gc_tolerance, gc_h, gc_num_seeds, gc_sets);
        if (make_data->parsed())
            return cmd_make_data(md_kind, cfg.out, cfg.seed, md_size, md_count);
        std::cerr << "no subcommand\n";
        return kExitInput;
    } catch (const onn::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
}
