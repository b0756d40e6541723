#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <string>

#include "onn/model_io.hpp"
#include "onn/network.hpp"

using namespace onn;

TEST_CASE("model serialization round-trips every weight bit-exactly") {
    std::vector<LayerSpec> specs{{3, 3, 3, -2, PaddingMode::SamePad, index_to_set(9)},
                                 {2, 3, 3, 2, PaddingMode::NoZeroPad, index_to_set(16)},
                                 {1, 3, 3, 1, PaddingMode::SamePad, index_to_set(0)}};
    const NetworkModel model = init_network(specs, 2, 0xDEADBEEF);

    const std::string doc = model_to_json(model);
    const NetworkModel back = model_from_json(doc);

    REQUIRE(back.input_channels == model.input_channels);
    REQUIRE(back.seed == model.seed);
    REQUIRE(back.layer_count() == model.layer_count());
    for (int l = 0; l < model.layer_count(); ++l) {
        REQUIRE(set_to_index(back.specs[l].opset) == set_to_index(model.specs[l].opset));
        REQUIRE(back.specs[l].sampling == model.specs[l].sampling);
        REQUIRE(back.specs[l].padding == model.specs[l].padding);
        for (std::size_t k = 0; k < model.layers[l].size(); ++k) {
            REQUIRE(back.layers[l][k].bias == model.layers[l][k].bias);
            for (std::size_t i = 0; i < model.layers[l][k].kernels.size(); ++i)
                REQUIRE(max_abs_diff(back.layers[l][k].kernels[i],
                                     model.layers[l][k].kernels[i]) == 0.0);
        }
    }

    // Serialization itself is deterministic.
    REQUIRE(model_to_json(back) == doc);
}

TEST_CASE("model files save and load") {
    const auto path = std::filesystem::temp_directory_path() / "onn_model_io_test.json";
    std::vector<LayerSpec> specs{{1, 3, 3, 1, PaddingMode::SamePad, index_to_set(4)}};
    const NetworkModel model = init_network(specs, 1, 99);
    save_model(path.string(), model);
    const NetworkModel back = load_model(path.string());
    REQUIRE(max_abs_diff(back.layers[0][0].kernels[0], model.layers[0][0].kernels[0]) == 0.0);
    std::filesystem::remove(path);

    REQUIRE_THROWS_AS(load_model("/nonexistent/model.json"), IOError);
    REQUIRE_THROWS_AS(model_from_json("{not json"), IOError);
    REQUIRE_THROWS_AS(model_from_json("{\"format\": \"other\", \"version\": 1}"), IOError);
}
