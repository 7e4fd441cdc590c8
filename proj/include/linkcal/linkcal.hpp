#pragma once

#include "linkcal/common.hpp"
#include "linkcal/rng.hpp"
#include "linkcal/stats.hpp"
#include "linkcal/kinematics.hpp"
#include "linkcal/trajectory.hpp"
#include "linkcal/sensor_calibration.hpp"
#include "linkcal/identification.hpp"
#include "linkcal/uncertainty.hpp"
#include "linkcal/measurement_sim.hpp"
#include "linkcal/adaptive_mc.hpp"
#include "linkcal/io.hpp"
