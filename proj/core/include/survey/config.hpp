#pragma once

#include <string>

#include "survey/baselines.hpp"
#include "survey/planner.hpp"
#include "survey/sensor.hpp"
#include "survey/svgp.hpp"
#include "survey/terrain.hpp"
#include "survey/vehicle.hpp"

namespace survey {

enum class Method { ipp, myopic, lawnmower };
enum class ClockMode { synchronous, realtime };

const char* to_string(Method m);

struct SvgpSettings {
  int inducing = 250;          // u
  TrainConfig train;           // minibatch M = 1024, learning rate, steps per ping
  int train_period = 1;        // pings between train events
  std::size_t buffer_capacity = 200000;
  double signal_std = 2.0;     // initial kernel scale, m
  double lengthscale = 20.0;   // initial, m
  double noise_std = 0.05;     // initial, m
  double mean_offset = 0.0;
  bool mean_offset_auto = true;  // estimate from the first ping
  double matern_nu = 2.5;        // fixed by the kernel; any other value is rejected
};

struct MissionConfig {
  // terrain: load from file when set, otherwise synthesize
  std::string terrain_file;
  FeatureSpec terrain_spec;
  Vec2 terrain_origin{0.0, 0.0};
  double terrain_cell = 1.0;
  int terrain_rows = 201;
  int terrain_cols = 201;

  VehicleConfig vehicle;
  SensorConfig sensor;
  SvgpSettings svgp;
  PlannerConfig planner;
  double lm_overlap = 0.10;

  Method method = Method::ipp;
  double distance_budget = 4000.0;  // C, m
  std::uint64_t seed = 1;
  std::string out_dir = "runs/out";
  double checkpoint_every = 50.0;   // m
  ClockMode clock = ClockMode::synchronous;
  double eval_resolution = 0.0;     // 0: terrain cell size
  double min_runtime = 0.0;         // s the full planner needs (synchronous fallback gate)
  double myopic_min_runtime = 0.0;  // s the myopic stage needs
  bool log_pings = false;

  // start pose; NaN = auto (first lawnmower track entry)
  double start_x = std::numeric_limits<double>::quiet_NaN();
  double start_y = std::numeric_limits<double>::quiet_NaN();
  double start_theta = 0.0;

  void validate() const;
};

// Flat `key = value` text, `#` comments, unknown keys rejected with the line
// number. All defaults above are pre-loaded; `SURVEY_<KEY>` environment
// variables (dots as underscores, upper case) override file values.
MissionConfig parse_config(const std::string& path);
MissionConfig parse_config_text(const std::string& text, const std::string& source_name = "<text>");

// Programmatic override by config key, same validation as the parser.
void apply_override(MissionConfig& cfg, const std::string& key, const std::string& value);

}  // namespace survey
