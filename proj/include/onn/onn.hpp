#pragma once

// Umbrella header.

#include "onn/backprop.hpp"
#include "onn/datagen.hpp"
#include "onn/dataset.hpp"
#include "onn/errors.hpp"
#include "onn/gis.hpp"
#include "onn/gradcheck.hpp"
#include "onn/image_io.hpp"
#include "onn/map2d.hpp"
#include "onn/metrics.hpp"
#include "onn/model_io.hpp"
#include "onn/network.hpp"
#include "onn/operators.hpp"
#include "onn/rng.hpp"
