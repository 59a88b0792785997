#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "survey/svgp.hpp"

namespace survey {

struct MetricSample {
  double distance = 0.0;  // m travelled when the checkpoint was taken
  double t = 0.0;         // s
  double rmse = 0.0;      // m
  std::uint64_t n_beams = 0;
  std::string tag_mix;    // planner provenance counts, e.g. "nonmyopic:4;random_fallback:1"
};

// Map consistency error: RMS difference between the posterior mean and the
// ground-truth surface at the GT sample locations. GT points carry depth
// positive down (as produced by gt_pointcloud); the model regresses -depth.
double consistency_rmse(const std::vector<Vec3>& gt, const SvgpSnapshot& snap);

struct Checkpoint {
  double distance = 0.0;
  double t = 0.0;
  std::uint64_t n_beams = 0;
  std::string tag_mix;
  std::shared_ptr<const SvgpSnapshot> snapshot;
};

// One MetricSample per checkpoint, ordered by distance.
std::vector<MetricSample> rmse_curve(const std::vector<Checkpoint>& checkpoints,
                                     const std::vector<Vec3>& gt);

struct ParityResult {
  bool reached = false;
  double fraction = 0.0;  // 1 - dist_a(parity) / dist_b(parity)
};

// Fractional distance saving of curve a over curve b at the first crossing of
// parity_rmse (linear interpolation between samples).
ParityResult improvement_at_parity(const std::vector<MetricSample>& curve_a,
                                   const std::vector<MetricSample>& curve_b, double parity_rmse);

// First distance at which the curve reaches rmse <= target (interpolated).
std::optional<double> distance_to_rmse(const std::vector<MetricSample>& curve, double target);

}  // namespace survey
