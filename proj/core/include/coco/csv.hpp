#pragma once

#include <iosfwd>
#include <vector>

#include "coco/harness.hpp"

namespace coco::csv {

/// Header `t,x0..x{d-1},u0..u{p-1},w0..w{d-1},stage_cost,status,alpha_used`,
/// one row per step, floats with 17 significant digits.
void write_trajectory(std::ostream& os, const harness::Trajectory& trajectory);

/// Inverse of write_trajectory. `states` holds the row states only. Raises
/// InvalidInput on a malformed header or row.
harness::Trajectory read_trajectory(std::istream& is);

/// Header `alpha,avg_cost,normalized,sup_state_norm,sup_noise_norm,steps,diverged,error`.
void write_sweep(std::ostream& os, const std::vector<harness::SweepRow>& rows);

}  // namespace coco::csv
