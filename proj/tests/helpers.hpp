#pragma once

#include <linkcal/linkcal.hpp>

namespace linkcal::testing {

/// Link and setup errors of a representative identified machine, report
/// units (um/m, um). Used as the planted truth across the suites.
inline ErrorParameterVector reference_parameters() {
  Param14 rep;
  rep << -8.8, 138.3, -35.7, -23.0, 6.9, -34.4, -9.9, -2.9,  // link errors
      -1.1, -14.7, -21.5, 1.5, -25.7, 18.8;                  // setup errors
  return ErrorParameterVector::from_report_units(rep);
}

inline std::vector<Pose> short_identification_trajectory(const MachineTopology& topo, int n) {
  TrajectorySpec spec = TrajectorySpec::identification_default();
  spec.pose_count = n;
  spec.condition_ceiling = 1e9;
  return generate_identification_trajectory(topo, spec);
}

}  // namespace linkcal::testing
