#pragma once

// Umbrella header for the chunked-and-averaged online estimation library.

#include "caest/ca_engine.hpp"
#include "caest/error.hpp"
#include "caest/estimators.hpp"
#include "caest/harness.hpp"
#include "caest/normal.hpp"
#include "caest/rng.hpp"
#include "caest/simulation.hpp"
#include "caest/stats.hpp"
#include "caest/window.hpp"
