#include "survey/sensor.hpp"

#include <algorithm>
#include <cmath>

namespace survey {

namespace {

// Intersect one fan ray with the height field. The ray leaves the vehicle at
// (pos, z=0) and its horizontal offset grows as depth * tan(angle) along the
// across-track unit vector. Root of g(d) = depth(pos + u*d*tan) - d by bisection.
// Returns the footprint depth, or a negative value if the footprint left the grid.
double beam_footprint_depth(const TerrainGrid& grid, const Vec2& pos, const Vec2& across,
                            double tan_angle, double* max_depth_cache) {
  if (*max_depth_cache <= 0.0)
    *max_depth_cache = *std::max_element(grid.depth.begin(), grid.depth.end());

  auto g = [&](double d) {
    const Vec2 q = pos + across * (d * tan_angle);
    return depth_at_clamped(grid, q.x(), q.y()) - d;
  };

  double lo = 0.0;
  double hi = *max_depth_cache * 1.5 + 1.0;
  if (g(lo) <= 0.0) return -1.0;  // vehicle at or below the seabed: no return
  if (g(hi) >= 0.0) return -1.0;
  for (int it = 0; it < 50 && (hi - lo) > 1e-4; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double swath_width(double depth, double opening_angle) {
  if (!(depth > 0.0)) throw std::invalid_argument("swath_width: depth must be > 0");
  if (!(opening_angle >= 0.0 && opening_angle < kPi))
    throw std::invalid_argument("swath_width: opening_angle must be in [0, pi)");
  return 2.0 * depth * std::tan(opening_angle / 2.0);
}

Mat2 beam_ui_cov(const PoseBelief& believed, const Vec2& beam_offset, const SensorConfig& cfg) {
  const Mat2 pos_block = believed.cov.topLeftCorner<2, 2>();
  const double var_theta = believed.cov(2, 2);
  const double theta = believed.mean.theta;
  Mat2 rot;
  rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  Mat2 lever = Mat2::Zero();
  lever(1, 1) = var_theta * beam_offset.squaredNorm();
  Mat2 omega = pos_block + rot * lever * rot.transpose() + cfg.ui_floor * Mat2::Identity();
  return 0.5 * (omega + omega.transpose());
}

Ping simulate_ping(const Pose& true_pose, const PoseBelief& believed, const TerrainGrid& grid,
                   const SensorConfig& cfg, Rng& rng, double t) {
  cfg.validate();
  if (!grid.extent().contains(true_pose.x, true_pose.y))
    throw std::out_of_range("simulate_ping: true pose outside terrain extent");

  Ping ping;
  ping.t = t;
  ping.true_pose = true_pose;
  ping.believed = believed;
  ping.beams.reserve(cfg.n_beams);

  const Vec2 pos_true{true_pose.x, true_pose.y};
  // Across-track direction (port side) in the map frame, perpendicular to heading.
  const Vec2 across_true{-std::sin(true_pose.theta), std::cos(true_pose.theta)};
  const double cb = std::cos(believed.mean.theta), sb = std::sin(believed.mean.theta);
  const double ct = std::cos(true_pose.theta), st = std::sin(true_pose.theta);
  std::normal_distribution<double> n01(0.0, 1.0);
  const Vec3 noise_std = cfg.noise_q.cwiseSqrt();

  double max_depth_cache = -1.0;
  const Extent ext = grid.extent();

  for (int k = 0; k < cfg.n_beams; ++k) {
    const double angle = cfg.n_beams == 1
                             ? 0.0
                             : -cfg.opening_angle / 2.0 +
                                   cfg.opening_angle * k / static_cast<double>(cfg.n_beams - 1);
    const double tan_angle = std::tan(angle);
    const double d = beam_footprint_depth(grid, pos_true, across_true, tan_angle, &max_depth_cache);
    if (d <= 0.0) continue;
    const Vec2 fp_true = pos_true + across_true * (d * tan_angle);
    if (!ext.contains(fp_true, 1e-9)) continue;  // footprint search exited the grid

    // Footprint in the vehicle frame, re-georeferenced from the believed pose.
    const Vec2 rel = fp_true - pos_true;
    const Vec2 body{ct * rel.x() + st * rel.y(), -st * rel.x() + ct * rel.y()};
    Vec2 fp_bel{believed.mean.x + cb * body.x() - sb * body.y(),
                believed.mean.y + sb * body.x() + cb * body.y()};

    Beam beam;
    beam.pos.x() = fp_bel.x() + noise_std.x() * (noise_std.x() > 0.0 ? n01(rng) : 0.0);
    beam.pos.y() = fp_bel.y() + noise_std.y() * (noise_std.y() > 0.0 ? n01(rng) : 0.0);
    beam.pos.z() = -d + noise_std.z() * (noise_std.z() > 0.0 ? n01(rng) : 0.0);
    beam.omega = beam_ui_cov(believed, body, cfg);
    ping.beams.push_back(beam);
  }
  return ping;
}

}  // namespace survey
