#pragma once

#include "ildars/calibration.hpp"
#include "ildars/clustering.hpp"
#include "ildars/error.hpp"
#include "ildars/geometry.hpp"
#include "ildars/harness.hpp"
#include "ildars/localization.hpp"
#include "ildars/simulation.hpp"
#include "ildars/stats.hpp"
