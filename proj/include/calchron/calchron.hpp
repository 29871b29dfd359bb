#pragma once

// Umbrella header for the calchron chronology engine.

#include "calchron/calibration_curve.hpp"
#include "calchron/diagnostics.hpp"
#include "calchron/error.hpp"
#include "calchron/inference.hpp"
#include "calchron/model.hpp"
#include "calchron/run_output.hpp"
#include "calchron/summary.hpp"
#include "calchron/svg_plot.hpp"
#include "calchron/version.hpp"
