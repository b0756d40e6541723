#pragma once

#include <string>
#include <vector>

#include "onn/map2d.hpp"

namespace onn {

// One training/evaluation item: multi-channel input and target maps, already
// normalized into [-1, 1]. Targets flagged as masks are strictly {-1, +1}.
struct DatasetPair {
    std::string id;
    std::vector<Map2D> input;
    std::vector<Map2D> target;
    bool target_is_mask = false;
};

using Dataset = std::vector<DatasetPair>;

} // namespace onn
