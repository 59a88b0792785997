#pragma once

#include <vector>

#include "survey/terrain.hpp"
#include "survey/vehicle.hpp"

namespace survey {

struct SensorConfig {
  double opening_angle = kPi / 2.0;  // total across-track fan, rad
  int n_beams = 64;
  double ping_rate = 20.0;           // Hz
  Vec3 noise_q = Vec3::Zero();       // diagonal of Q, m^2 per axis (x, y, z)
  double ui_floor = 0.0;             // minimum Omega diagonal, m^2

  void validate() const {
    if (!(opening_angle > 0.0 && opening_angle < kPi))
      throw std::invalid_argument("SensorConfig: opening_angle must be in (0, pi)");
    if (n_beams < 1) throw std::invalid_argument("SensorConfig: n_beams must be >= 1");
    if (!(ping_rate > 0.0)) throw std::invalid_argument("SensorConfig: ping_rate must be > 0");
    if ((noise_q.array() < 0.0).any())
      throw std::invalid_argument("SensorConfig: noise_q must be non-negative");
  }
};

// One georeferenced sounding. pos.z() is the regression target z = -depth;
// omega is the horizontal input covariance attached to (x, y).
struct Beam {
  Vec3 pos = Vec3::Zero();
  Mat2 omega = Mat2::Zero();
};

struct Ping {
  double t = 0.0;
  Pose true_pose;
  PoseBelief believed;
  std::vector<Beam> beams;  // <= n_beams; edge beams outside the grid are dropped
};

// Fan of n_beams rays perpendicular to the heading, intersected with the
// height field (bisection, 1e-3 m tolerance). Footprints are georeferenced
// from the believed pose mean; Q noise is added per beam in map axes.
Ping simulate_ping(const Pose& true_pose, const PoseBelief& believed, const TerrainGrid& grid,
                   const SensorConfig& cfg, Rng& rng, double t = 0.0);

// First-order projection of pose uncertainty onto a beam footprint:
// Omega = P + R(theta) diag(0, var_theta * |offset|^2) R(theta)^T + ui_floor * I.
Mat2 beam_ui_cov(const PoseBelief& believed, const Vec2& beam_offset, const SensorConfig& cfg);

// Flat-bottom swath width: 2 * depth * tan(opening/2).
double swath_width(double depth, double opening_angle);

}  // namespace survey
