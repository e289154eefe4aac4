#pragma once

// Umbrella header for the library (no CLI).
#include "otrank/assign.hpp"
#include "otrank/csv.hpp"
#include "otrank/error.hpp"
#include "otrank/htest.hpp"
#include "otrank/nulldist.hpp"
#include "otrank/point_cloud.hpp"
#include "otrank/qmc.hpp"
#include "otrank/ranks.hpp"
#include "otrank/rng.hpp"
#include "otrank/simgen.hpp"
#include "otrank/stats.hpp"
