#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace survey {

using Rng = std::mt19937_64;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

// Axis-aligned rectangle in map coordinates (m).
struct Extent {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  double area() const { return width() * height(); }

  bool contains(double x, double y, double tol = 0.0) const {
    return x >= min_x - tol && x <= max_x + tol && y >= min_y - tol && y <= max_y + tol;
  }
  bool contains(const Vec2& p, double tol = 0.0) const { return contains(p.x(), p.y(), tol); }

  Vec2 clamp(const Vec2& p) const {
    return {std::clamp(p.x(), min_x, max_x), std::clamp(p.y(), min_y, max_y)};
  }
  Vec2 center() const { return {0.5 * (min_x + max_x), 0.5 * (min_y + max_y)}; }
};

// Normalize an angle into (-pi, pi].
inline double wrap_angle(double theta) {
  double t = std::remainder(theta, 2.0 * kPi);
  if (t <= -kPi) t += 2.0 * kPi;
  return t;
}

}  // namespace survey
