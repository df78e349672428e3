#pragma once

// Umbrella header.

#include "bicb/allocator.hpp"
#include "bicb/controllers.hpp"
#include "bicb/core.hpp"
#include "bicb/csv.hpp"
#include "bicb/dual_solver.hpp"
#include "bicb/episode.hpp"
#include "bicb/experiment.hpp"
#include "bicb/lp_oracle.hpp"
#include "bicb/metrics.hpp"
#include "bicb/predictor.hpp"
#include "bicb/synth.hpp"
#include "bicb/traffic_io.hpp"
#include "bicb/verify.hpp"
