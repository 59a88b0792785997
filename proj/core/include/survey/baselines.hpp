#pragma once

#include "survey/planner.hpp"

namespace survey {

struct LawnmowerSpec {
  Extent area;
  double track_spacing = 0.0;  // m between adjacent track centerlines
  Vec2 entry_corner = Vec2::Zero();
  double turn_radius = 10.0;

  void validate(double swath) const {
    if (!(track_spacing > 0.0)) throw std::invalid_argument("LawnmowerSpec: spacing must be > 0");
    if (track_spacing > swath + 1e-9)
      throw std::invalid_argument("LawnmowerSpec: spacing must not exceed the swath width");
  }
};

// Boustrophedon coverage: parallel tracks along the area's long axis spaced
// (1 - overlap) * swath_width(nominal_depth), joined by Dubins turns. Turns
// may overshoot the area boundary; the legs themselves stay on the tracks.
std::vector<DubinsPath> lawnmower_path(const Extent& area, double nominal_depth,
                                       double opening_angle, double overlap_fraction,
                                       double turn_radius);

// Single-candidate UCB maximization plus heading optimization; no tree. A
// flat acquisition landscape falls through to the random tail.
PlanResult myopic_plan(std::shared_ptr<const SvgpSnapshot> snap, const PoseBelief& belief,
                       const Extent& extent, const PlannerConfig& cfg, Rng& rng,
                       const PlanBudget& budget);

}  // namespace survey
