#pragma once

#include <optional>
#include <vector>

#include "nebula/controller.hpp"
#include "nebula/models.hpp"

// Exhaustive grid search for the joint source/redundancy choice: minimize
// D + phi * MTP over every ladder level crossed with the redundancy rates the
// per-frame sizing rule yields in each FEC mode, subject to MTP <= T_d and
// Re + Rr <= mu. The heuristic controller never calls this; it exists as the
// optimization oracle the heuristic is compared against.

namespace nebula::jointopt {

struct GridPoint {
  int level = 0;
  double re_mbps = 0.0;
  double rr_mbps = 0.0;
  double distortion = 0.0;
  double mtp_s = 0.0;
  double objective = 0.0;
  bool feasible = false;
};

struct Solution {
  GridPoint best;                 // valid iff feasible
  std::vector<GridPoint> grid;    // every evaluated point, for audits
  bool feasible = false;
};

// Ties break toward lower Re, then lower Rr. Throws on an empty ladder.
Solution solve_joint_grid(const model::NetworkState& state, const ctrl::RateLadder& ladder,
                          const model::DistortionParams& dp, const model::MtpParams& mp,
                          const ctrl::ControllerConfig& cfg);

}  // namespace nebula::jointopt
