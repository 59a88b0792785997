#pragma once

#include <map>
#include <optional>

#include "survey/config.hpp"
#include "survey/eval.hpp"

namespace survey {

struct RunArtifacts {
  std::vector<MetricSample> metrics;
  double distance = 0.0;
  double duration = 0.0;  // simulated seconds
  std::uint64_t pings = 0;
  std::uint64_t beams = 0;
  std::map<std::string, int> tag_counts;
  std::string out_dir;
  std::string metrics_path;
  std::string checkpoint_path;
  bool path_queue_ever_empty = false;  // true if a tick began with no active path
};

// Receding-horizon survey run: one event loop at ping cadence wiring terrain,
// vehicle, sensor, trainer, planner and evaluator. Deterministic end-to-end
// for a fixed seed in synchronous mode.
RunArtifacts run_mission(const MissionConfig& cfg);

struct SuiteResult {
  // method -> one RMSE curve per seed (seeds are base.seed, base.seed+1, ...)
  std::map<std::string, std::vector<std::vector<MetricSample>>> curves;
  std::map<std::string, std::vector<double>> final_distance;
  double parity_rmse = 0.0;             // 1.05 x median lawnmower terminal RMSE
  std::optional<double> ipp_vs_lawnmower;  // improvement_at_parity of median curves
  std::optional<double> ipp_vs_myopic;
  std::string summary_path;
};

// Runs lawnmower / ipp / myopic for n_seeds seeds each; ipp and myopic get the
// lawnmower's realized distance as their budget. Writes per-run artifacts under
// base.out_dir plus an aggregate summary.csv. Individual run failures are
// recorded and skipped.
SuiteResult run_suite(const MissionConfig& base, int n_seeds);

// Posterior mean and std rendered as binary P5 graymaps (row 0 = north), with
// the normalization recorded in a sidecar text file.
void export_maps(const SvgpSnapshot& snap, const Extent& extent, double resolution,
                 const std::string& out_prefix);

}  // namespace survey
