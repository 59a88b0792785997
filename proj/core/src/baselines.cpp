#include "survey/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace survey {

std::vector<DubinsPath> lawnmower_path(const Extent& area, double nominal_depth,
                                       double opening_angle, double overlap_fraction,
                                       double turn_radius) {
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0))
    throw std::invalid_argument("lawnmower_path: overlap_fraction must be in [0, 1)");
  const double swath = swath_width(nominal_depth, opening_angle);
  const double spacing = (1.0 - overlap_fraction) * swath;

  // Tracks run along the long axis to minimize turn count.
  const bool along_x = area.width() >= area.height();
  const double long_min = along_x ? area.min_x : area.min_y;
  const double long_max = along_x ? area.max_x : area.max_y;
  const double cross_min = along_x ? area.min_y : area.min_x;
  const double cross_max = along_x ? area.max_y : area.max_x;
  const double cross_width = cross_max - cross_min;

  std::vector<double> tracks;
  if (swath >= cross_width) {
    tracks.push_back(0.5 * (cross_min + cross_max));  // one pass down the centerline
  } else {
    LawnmowerSpec spec{area, spacing, {area.min_x, area.min_y}, turn_radius};
    spec.validate(swath);
    const int n = static_cast<int>(std::ceil((cross_width - swath) / spacing - 1e-9)) + 1;
    for (int i = 0; i < n; ++i) tracks.push_back(cross_min + swath / 2.0 + i * spacing);
  }

  std::vector<DubinsPath> legs;
  Pose cursor;
  bool have_cursor = false;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const bool forward = i % 2 == 0;
    const double a = forward ? long_min : long_max;
    const double b = forward ? long_max : long_min;
    const double heading = along_x ? (forward ? 0.0 : kPi) : (forward ? kPi / 2.0 : -kPi / 2.0);
    const Pose leg_start = along_x ? Pose::make(a, tracks[i], heading)
                                   : Pose::make(tracks[i], a, heading);
    const Pose leg_end = along_x ? Pose::make(b, tracks[i], heading)
                                 : Pose::make(tracks[i], b, heading);
    if (have_cursor) legs.push_back(dubins_shortest(cursor, leg_start, turn_radius));
    legs.push_back(dubins_shortest(leg_start, leg_end, turn_radius));
    cursor = leg_end;
    have_cursor = true;
  }
  return legs;
}

PlanResult myopic_plan(std::shared_ptr<const SvgpSnapshot> snap, const PoseBelief& belief,
                       const Extent& extent, const PlannerConfig& cfg, Rng& rng,
                       const PlanBudget& budget) {
  return plan_myopic(snap, belief, extent, cfg, rng, budget, /*strict_flatness=*/true);
}

}  // namespace survey
