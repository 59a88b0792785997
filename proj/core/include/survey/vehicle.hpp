#pragma once

#include <array>
#include <optional>
#include <vector>

#include "survey/common.hpp"

namespace survey {

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // (-pi, pi]

  Vec2 position() const { return {x, y}; }
  static Pose make(double x, double y, double theta) { return {x, y, wrap_angle(theta)}; }
};

// Dead-reckoned pose estimate: mean + 3x3 covariance over (x, y, theta).
struct PoseBelief {
  Pose mean;
  Mat3 cov = Mat3::Zero();
};

struct VehicleConfig {
  double speed = 0.8;              // m/s, constant surveying velocity
  double turn_radius_min = 10.0;   // m
  Mat3 process_noise_rate = Mat3::Zero();  // W, covariance per second
  Mat3 initial_cov = Mat3::Zero();

  void validate() const {
    if (!(speed > 0.0)) throw std::invalid_argument("VehicleConfig: speed must be > 0");
    if (!(turn_radius_min > 0.0)) throw std::invalid_argument("VehicleConfig: turn_radius_min must be > 0");
  }
};

enum class DubinsWord { LSL, RSR, LSR, RSL, RLR, LRL };
const char* to_string(DubinsWord word);

// Curvature-bounded path between oriented poses: three segments, each an
// arc at the minimum radius or a straight, encoded by the word.
struct DubinsPath {
  Pose start;
  Pose end;
  DubinsWord word = DubinsWord::LSL;
  std::array<double, 3> segment_lengths{0.0, 0.0, 0.0};  // m
  double radius = 1.0;

  double length() const { return segment_lengths[0] + segment_lengths[1] + segment_lengths[2]; }
  // Pose at arc length s in [0, length], clamped.
  Pose pose_at(double s) const;
  // Commanded turn rate (rad/s) at arc length s for a vehicle moving at `speed`.
  double turn_rate_at(double s, double speed) const;
};

// Exact unicycle arc update plus one draw of N(0, W*dt).
Pose step_true(const Pose& pose, double turn_rate, double dt, const VehicleConfig& cfg, Rng& rng);

// Noiseless unicycle mean; covariance J cov J^T + W*dt, symmetrized.
PoseBelief propagate_belief(const PoseBelief& belief, double turn_rate, double dt,
                            const VehicleConfig& cfg);

// Single-word solution; nullopt when the word is infeasible for this geometry.
std::optional<DubinsPath> dubins_word_path(const Pose& start, const Pose& end, double radius,
                                           DubinsWord word);

// Minimum-length path over the six words. Coincident poses give a zero-length path.
DubinsPath dubins_shortest(const Pose& start, const Pose& end, double radius);

// Poses at arc-length multiples of ds from 0 to length; the endpoint is always included.
std::vector<Pose> sample_path(const DubinsPath& path, double ds);

}  // namespace survey
