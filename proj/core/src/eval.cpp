#include "survey/eval.hpp"

#include <cmath>

namespace survey {

double consistency_rmse(const std::vector<Vec3>& gt, const SvgpSnapshot& snap) {
  if (gt.empty()) throw std::invalid_argument("consistency_rmse: empty ground truth");
  double acc = 0.0;
  for (const auto& p : gt) {
    auto [mu, var] = snap.predict_one({p.x(), p.y()});
    (void)var;
    const double err = mu - (-p.z());  // GT depth positive down, regression target is -depth
    acc += err * err;
  }
  return std::sqrt(acc / static_cast<double>(gt.size()));
}

std::vector<MetricSample> rmse_curve(const std::vector<Checkpoint>& checkpoints,
                                     const std::vector<Vec3>& gt) {
  std::vector<MetricSample> out;
  out.reserve(checkpoints.size());
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& cp : checkpoints) {
    if (cp.distance < prev)
      throw std::invalid_argument("rmse_curve: checkpoints must be ordered by distance");
    prev = cp.distance;
    MetricSample s;
    s.distance = cp.distance;
    s.t = cp.t;
    s.n_beams = cp.n_beams;
    s.tag_mix = cp.tag_mix;
    s.rmse = consistency_rmse(gt, *cp.snapshot);
    out.push_back(std::move(s));
  }
  return out;
}

std::optional<double> distance_to_rmse(const std::vector<MetricSample>& curve, double target) {
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i].rmse <= target) {
      if (i == 0 || curve[i - 1].rmse <= curve[i].rmse) return curve[i].distance;
      const auto& a = curve[i - 1];
      const auto& b = curve[i];
      const double f = (a.rmse - target) / (a.rmse - b.rmse);
      return a.distance + f * (b.distance - a.distance);
    }
  }
  return std::nullopt;
}

ParityResult improvement_at_parity(const std::vector<MetricSample>& curve_a,
                                   const std::vector<MetricSample>& curve_b, double parity_rmse) {
  const auto da = distance_to_rmse(curve_a, parity_rmse);
  const auto db = distance_to_rmse(curve_b, parity_rmse);
  if (!da || !db) return {false, 0.0};
  if (*db <= 0.0) return {true, *da <= 0.0 ? 0.0 : -std::numeric_limits<double>::infinity()};
  return {true, 1.0 - *da / *db};
}

}  // namespace survey
