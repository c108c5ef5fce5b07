#pragma once

// Umbrella header.

#include "mqrlr/calibrate.hpp"
#include "mqrlr/common.hpp"
#include "mqrlr/core.hpp"
#include "mqrlr/csv.hpp"
#include "mqrlr/evalharness.hpp"
#include "mqrlr/gaussian.hpp"
#include "mqrlr/lp.hpp"
#include "mqrlr/mqr.hpp"
#include "mqrlr/rng.hpp"
#include "mqrlr/scenario.hpp"
#include "mqrlr/threads.hpp"
#include "mqrlr/vertex_enum.hpp"
