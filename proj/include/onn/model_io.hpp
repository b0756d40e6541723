#pragma once

// Versioned JSON model document. Reals are printed with 17 significant
// digits so a save/load cycle reproduces every 64-bit value exactly; the
// writer is hand-rolled to guarantee that format, loading goes through
// nlohmann::json.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "onn/errors.hpp"
#include "onn/network.hpp"

namespace onn {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void emit_double_array(std::ostream& os, const std::vector<double>& values) {
    os << "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i)
            os << ", ";
        os << fmt_double(values[i]);
    }
    os << "]";
}

} // namespace detail

inline std::string model_to_json(const NetworkModel& model) {
    std::ostringstream os;
    os << "{\n";
    os << "  \"format\": \"onn-model\",\n";
    os << "  \"version\": " << kModelFormatVersion << ",\n";
    os << "  \"seed\": " << model.seed << ",\n";
    os << "  \"input_channels\": " << model.input_channels << ",\n";
    os << "  \"params\": {";
    os << "\"k_harmonic\": " << detail::fmt_double(model.params.k_harmonic);
    os << ", \"k_cubic\": " << detail::fmt_double(model.params.k_cubic);
    os << ", \"k_chirp\": " << detail::fmt_double(model.params.k_chirp);
    os << ", \"k_dog\": " << detail::fmt_double(model.params.k_dog);
    os << ", \"cut\": " << detail::fmt_double(model.params.cut);
    os << "},\n";
    os << "  \"layers\": [\n";
    for (int l = 0; l < model.layer_count(); ++l) {
        const LayerSpec& spec = model.specs[l];
        os << "    {\n";
        os << "      \"neuron_count\": " << spec.neuron_count << ",\n";
        os << "      \"kernel_rows\": " << spec.kernel_rows << ",\n";
        os << "      \"kernel_cols\": " << spec.kernel_cols << ",\n";
        os << "      \"sampling\": " << spec.sampling << ",\n";
        os << "      \"padding\": \"" << to_string(spec.padding) << "\",\n";
        os << "      \"operator_set\": " << set_to_index(spec.opset) << ",\n";
        os << "      \"neurons\": [\n";
        for (std::size_t k = 0; k < model.layers[l].size(); ++k) {
            const OperationalNeuron& neuron = model.layers[l][k];
            os << "        {\"operator_set\": " << set_to_index(neuron.opset)
               << ", \"bias\": " << detail::fmt_double(neuron.bias) << ", \"kernels\": [";
            for (std::size_t i = 0; i < neuron.kernels.size(); ++i) {
                if (i)
                    os << ", ";
                detail::emit_double_array(os, neuron.kernels[i].data);
            }
            os << "]}";
            os << (k + 1 < model.layers[l].size() ? ",\n" : "\n");
        }
        os << "      ]\n";
        os << "    }" << (l + 1 < model.layer_count() ? ",\n" : "\n");
    }
    os << "  ]\n";
    os << "}\n";
    return os.str();
}

inline NetworkModel model_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IOError(std::string("model document is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "onn-model")
            throw IOError("not an onn-model document");
        if (j.at("version").get<int>() != kModelFormatVersion)
            throw IOError("unsupported model format version");

        NetworkModel model;
        model.seed = j.at("seed").get<std::uint64_t>();
        model.input_channels = j.at("input_channels").get<int>();
        const auto& p = j.at("params");
        model.params.k_harmonic = p.at("k_harmonic").get<double>();
        model.params.k_cubic = p.at("k_cubic").get<double>();
        model.params.k_chirp = p.at("k_chirp").get<double>();
        model.params.k_dog = p.at("k_dog").get<double>();
        model.params.cut = p.at("cut").get<double>();
        model.params.validate();

        for (const auto& jl : j.at("layers")) {
            LayerSpec spec;
            spec.neuron_count = jl.at("neuron_count").get<int>();
            spec.kernel_rows = jl.at("kernel_rows").get<int>();
            spec.kernel_cols = jl.at("kernel_cols").get<int>();
            spec.sampling = jl.at("sampling").get<int>();
            const std::string pad = jl.at("padding").get<std::string>();
            if (pad == "same")
                spec.padding = PaddingMode::SamePad;
            else if (pad == "none")
                spec.padding = PaddingMode::NoZeroPad;
            else
                throw IOError("unknown padding mode: " + pad);
            spec.opset = index_to_set(jl.at("operator_set").get<int>());
            validate(spec);

            std::vector<OperationalNeuron> neurons;
            for (const auto& jn : jl.at("neurons")) {
                OperationalNeuron neuron;
                neuron.opset = index_to_set(jn.at("operator_set").get<int>());
                neuron.bias = jn.at("bias").get<double>();
                for (const auto& jk : jn.at("kernels")) {
                    std::vector<double> values = jk.get<std::vector<double>>();
                    neuron.kernels.push_back(
                        Map2D::from_data(spec.kernel_rows, spec.kernel_cols, std::move(values)));
                }
                neurons.push_back(std::move(neuron));
            }
            if (static_cast<int>(neurons.size()) != spec.neuron_count)
                throw IOError("neuron count does not match layer spec");
            model.specs.push_back(spec);
            model.layers.push_back(std::move(neurons));
        }
        if (model.layers.empty())
            throw IOError("model has no layers");

        // Connection counts must agree end to end.
        for (int l = 0; l < model.layer_count(); ++l) {
            const int expect = model.connections_into(l);
            for (const auto& neuron : model.layers[l])
                if (static_cast<int>(neuron.kernels.size()) != expect)
                    throw IOError("kernel count does not match previous layer width");
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw IOError(std::string("malformed model document: ") + e.what());
    }
}

inline void save_model(const std::string& path, const NetworkModel& model) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IOError("cannot open for writing: " + path);
    f << model_to_json(model);
    if (!f)
        throw IOError("write failed: " + path);
}

inline NetworkModel load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IOError("cannot open model file: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return model_from_json(buf.str());
}

} // namespace onn
