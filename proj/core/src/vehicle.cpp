#include "survey/vehicle.hpp"

#include <algorithm>
#include <cmath>

namespace survey {

namespace {

double mod2pi(double a) {
  double m = std::fmod(a, 2.0 * kPi);
  if (m < 0.0) m += 2.0 * kPi;
  return m;
}

// Draw from N(0, cov) for a small PSD covariance; tolerates singular cov.
Vec3 gaussian3(const Mat3& cov, Rng& rng) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  Vec3 lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  std::normal_distribution<double> n01(0.0, 1.0);
  Vec3 z{n01(rng), n01(rng), n01(rng)};
  return es.eigenvectors() * lam.asDiagonal() * z;
}

// Exact constant-rate unicycle displacement over dt at unit process noise off.
Pose unicycle_arc(const Pose& p, double v, double omega, double dt) {
  Pose out = p;
  if (std::abs(omega) < 1e-12) {
    out.x += v * dt * std::cos(p.theta);
    out.y += v * dt * std::sin(p.theta);
  } else {
    const double th1 = p.theta + omega * dt;
    out.x += v / omega * (std::sin(th1) - std::sin(p.theta));
    out.y += v / omega * (std::cos(p.theta) - std::cos(th1));
    out.theta = th1;
  }
  out.theta = wrap_angle(out.theta);
  return out;
}

using Segments = std::array<double, 3>;  // normalized: arcs in rad, straights in radius units

struct WordSolution {
  Segments seg;
  double total;  // normalized length
};

// Closed forms in the canonical frame: d = |goal|/r, alpha/beta the start/end
// headings relative to the start->goal direction.
std::optional<WordSolution> solve_word(DubinsWord word, double alpha, double beta, double d) {
  const double sa = std::sin(alpha), ca = std::cos(alpha);
  const double sb = std::sin(beta), cb = std::cos(beta);
  const double cab = std::cos(alpha - beta);
  Segments s;
  switch (word) {
    case DubinsWord::LSL: {
      const double p_sq = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb);
      if (p_sq < 0.0) return std::nullopt;
      const double tmp = std::atan2(cb - ca, d + sa - sb);
      s = {mod2pi(tmp - alpha), std::sqrt(p_sq), mod2pi(beta - tmp)};
      break;
    }
    case DubinsWord::RSR: {
      const double p_sq = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa);
      if (p_sq < 0.0) return std::nullopt;
      const double tmp = std::atan2(ca - cb, d - sa + sb);
      s = {mod2pi(alpha - tmp), std::sqrt(p_sq), mod2pi(tmp - beta)};
      break;
    }
    case DubinsWord::LSR: {
      const double p_sq = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb);
      if (p_sq < 0.0) return std::nullopt;
      const double p = std::sqrt(p_sq);
      const double tmp = std::atan2(-ca - cb, d + sa + sb) - std::atan2(-2.0, p);
      s = {mod2pi(tmp - alpha), p, mod2pi(tmp - beta)};
      break;
    }
    case DubinsWord::RSL: {
      const double p_sq = -2.0 + d * d + 2.0 * cab - 2.0 * d * (sa + sb);
      if (p_sq < 0.0) return std::nullopt;
      const double p = std::sqrt(p_sq);
      const double tmp = std::atan2(ca + cb, d - sa - sb) - std::atan2(2.0, p);
      s = {mod2pi(alpha - tmp), p, mod2pi(beta - tmp)};
      break;
    }
    case DubinsWord::RLR: {
      const double tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0;
      if (std::abs(tmp) > 1.0) return std::nullopt;
      const double p = mod2pi(2.0 * kPi - std::acos(tmp));
      const double t = mod2pi(alpha - std::atan2(ca - cb, d - sa + sb) + p / 2.0);
      s = {t, p, mod2pi(alpha - beta - t + p)};
      break;
    }
    case DubinsWord::LRL: {
      const double tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0;
      if (std::abs(tmp) > 1.0) return std::nullopt;
      const double p = mod2pi(2.0 * kPi - std::acos(tmp));
      const double t = mod2pi(-alpha + std::atan2(cb - ca, d + sa - sb) + p / 2.0);
      s = {t, p, mod2pi(beta - alpha - t + p)};
      break;
    }
  }
  return WordSolution{s, s[0] + s[1] + s[2]};
}

char segment_type(DubinsWord word, int i) {
  static constexpr const char* kTypes[6] = {"LSL", "RSR", "LSR", "RSL", "RLR", "LRL"};
  return kTypes[static_cast<int>(word)][i];
}

// Advance a pose along one segment of normalized length `t` (rad for arcs,
// radius units for straights), at unit radius.
Pose advance_segment(const Pose& p, char type, double t) {
  Pose out = p;
  switch (type) {
    case 'L':
      out.x += std::sin(p.theta + t) - std::sin(p.theta);
      out.y += -std::cos(p.theta + t) + std::cos(p.theta);
      out.theta = p.theta + t;
      break;
    case 'R':
      out.x += -std::sin(p.theta - t) + std::sin(p.theta);
      out.y += std::cos(p.theta - t) - std::cos(p.theta);
      out.theta = p.theta - t;
      break;
    default:  // 'S'
      out.x += t * std::cos(p.theta);
      out.y += t * std::sin(p.theta);
      break;
  }
  return out;
}

}  // namespace

const char* to_string(DubinsWord word) {
  static constexpr const char* kNames[6] = {"LSL", "RSR", "LSR", "RSL", "RLR", "LRL"};
  return kNames[static_cast<int>(word)];
}

Pose DubinsPath::pose_at(double s) const {
  s = std::clamp(s, 0.0, length());
  Pose p{0.0, 0.0, start.theta};  // unit-radius frame anchored at start position
  double remaining = s / radius;
  for (int i = 0; i < 3; ++i) {
    const double seg = segment_lengths[i] / radius;
    const char type = segment_type(word, i);
    if (remaining <= seg) {
      p = advance_segment(p, type, remaining);
      remaining = 0.0;
      break;
    }
    p = advance_segment(p, type, seg);
    remaining -= seg;
  }
  return Pose::make(start.x + radius * p.x, start.y + radius * p.y, p.theta);
}

double DubinsPath::turn_rate_at(double s, double speed) const {
  s = std::clamp(s, 0.0, length());
  double acc = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (segment_lengths[i] <= 1e-12) continue;
    acc += segment_lengths[i];
    if (s <= acc + 1e-12) {
      switch (segment_type(word, i)) {
        case 'L': return speed / radius;
        case 'R': return -speed / radius;
        default: return 0.0;
      }
    }
  }
  return 0.0;
}

Pose step_true(const Pose& pose, double turn_rate, double dt, const VehicleConfig& cfg, Rng& rng) {
  cfg.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("step_true: dt must be > 0");
  const double max_rate = cfg.speed / cfg.turn_radius_min;
  if (std::abs(turn_rate) > max_rate * (1.0 + 1e-9))
    throw std::invalid_argument("step_true: turn_rate exceeds curvature limit");
  Pose p = unicycle_arc(pose, cfg.speed, turn_rate, dt);
  if (!cfg.process_noise_rate.isZero()) {
    const Vec3 noise = gaussian3(cfg.process_noise_rate * dt, rng);
    p.x += noise.x();
    p.y += noise.y();
    p.theta = wrap_angle(p.theta + noise.z());
  }
  return p;
}

PoseBelief propagate_belief(const PoseBelief& belief, double turn_rate, double dt,
                            const VehicleConfig& cfg) {
  cfg.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("propagate_belief: dt must be > 0");
  const double max_rate = cfg.speed / cfg.turn_radius_min;
  if (std::abs(turn_rate) > max_rate * (1.0 + 1e-9))
    throw std::invalid_argument("propagate_belief: turn_rate exceeds curvature limit");

  const Pose& m = belief.mean;
  PoseBelief out;
  out.mean = unicycle_arc(m, cfg.speed, turn_rate, dt);

  Mat3 jac = Mat3::Identity();
  if (std::abs(turn_rate) < 1e-12) {
    jac(0, 2) = -cfg.speed * dt * std::sin(m.theta);
    jac(1, 2) = cfg.speed * dt * std::cos(m.theta);
  } else {
    const double th1 = m.theta + turn_rate * dt;
    jac(0, 2) = cfg.speed / turn_rate * (std::cos(th1) - std::cos(m.theta));
    jac(1, 2) = cfg.speed / turn_rate * (std::sin(th1) - std::sin(m.theta));
  }
  Mat3 cov = jac * belief.cov * jac.transpose() + cfg.process_noise_rate * dt;
  out.cov = 0.5 * (cov + cov.transpose());
  return out;
}

std::optional<DubinsPath> dubins_word_path(const Pose& start, const Pose& end, double radius,
                                           DubinsWord word) {
  if (!(radius > 0.0)) throw std::invalid_argument("dubins: radius must be > 0");
  const double dx = end.x - start.x;
  const double dy = end.y - start.y;
  const double dist = std::hypot(dx, dy);
  const double dir = std::atan2(dy, dx);
  const double alpha = mod2pi(start.theta - dir);
  const double beta = mod2pi(end.theta - dir);
  auto sol = solve_word(word, alpha, beta, dist / radius);
  if (!sol) return std::nullopt;
  DubinsPath path;
  path.start = start;
  path.end = end;
  path.word = word;
  path.radius = radius;
  for (int i = 0; i < 3; ++i) path.segment_lengths[i] = sol->seg[i] * radius;
  return path;
}

DubinsPath dubins_shortest(const Pose& start, const Pose& end, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("dubins_shortest: radius must be > 0");
  const double dist = std::hypot(end.x - start.x, end.y - start.y);
  if (dist < 1e-12 && std::abs(wrap_angle(end.theta - start.theta)) < 1e-12) {
    DubinsPath degenerate;
    degenerate.start = start;
    degenerate.end = end;
    degenerate.word = DubinsWord::LSL;
    degenerate.radius = radius;
    degenerate.segment_lengths = {0.0, 0.0, 0.0};
    return degenerate;
  }
  std::optional<DubinsPath> best;
  for (int w = 0; w < 6; ++w) {
    auto cand = dubins_word_path(start, end, radius, static_cast<DubinsWord>(w));
    if (cand && (!best || cand->length() < best->length())) best = cand;
  }
  // At least LSL or RSR always exists for distinct configurations.
  if (!best) throw std::runtime_error("dubins_shortest: no word produced a path");
  return *best;
}

std::vector<Pose> sample_path(const DubinsPath& path, double ds) {
  if (!(ds > 0.0)) throw std::invalid_argument("sample_path: ds must be > 0");
  const double len = path.length();
  std::vector<Pose> poses;
  const auto n = static_cast<std::size_t>(std::floor(len / ds + 1e-9));
  poses.reserve(n + 2);
  for (std::size_t i = 0; i <= n; ++i) poses.push_back(path.pose_at(static_cast<double>(i) * ds));
  if (len - static_cast<double>(n) * ds > 1e-9) poses.push_back(path.pose_at(len));
  return poses;
}

}  // namespace survey
