#include "survey/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace survey {

const char* to_string(Method m) {
  switch (m) {
    case Method::ipp: return "ipp";
    case Method::myopic: return "myopic";
    default: return "lawnmower";
  }
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v) {
  std::size_t pos = 0;
  double d;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("expected a number, got '" + v + "'");
  }
  if (trim(v.substr(pos)) != "") throw std::runtime_error("trailing characters after number in '" + v + "'");
  return d;
}

long long parse_int(const std::string& v) {
  std::size_t pos = 0;
  long long i;
  try {
    i = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("expected an integer, got '" + v + "'");
  }
  if (trim(v.substr(pos)) != "") throw std::runtime_error("trailing characters after integer in '" + v + "'");
  return i;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw std::runtime_error("expected a boolean, got '" + v + "'");
}

using Setter = std::function<void(MissionConfig&, const std::string&)>;

const std::map<std::string, Setter>& key_table() {
  static const std::map<std::string, Setter> table = {
      // mission
      {"mission.method",
       [](MissionConfig& c, const std::string& v) {
         if (v == "ipp") c.method = Method::ipp;
         else if (v == "myopic") c.method = Method::myopic;
         else if (v == "lawnmower") c.method = Method::lawnmower;
         else throw std::runtime_error("method must be ipp|myopic|lawnmower");
       }},
      {"mission.distance_budget", [](MissionConfig& c, const std::string& v) { c.distance_budget = parse_double(v); }},
      {"mission.seed", [](MissionConfig& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(parse_int(v)); }},
      {"mission.out_dir", [](MissionConfig& c, const std::string& v) { c.out_dir = v; }},
      {"mission.checkpoint_every", [](MissionConfig& c, const std::string& v) { c.checkpoint_every = parse_double(v); }},
      {"mission.clock",
       [](MissionConfig& c, const std::string& v) {
         if (v == "sync" || v == "synchronous") c.clock = ClockMode::synchronous;
         else if (v == "realtime") c.clock = ClockMode::realtime;
         else throw std::runtime_error("clock must be sync|realtime");
       }},
      {"mission.eval_resolution", [](MissionConfig& c, const std::string& v) { c.eval_resolution = parse_double(v); }},
      {"mission.min_runtime", [](MissionConfig& c, const std::string& v) { c.min_runtime = parse_double(v); }},
      {"mission.myopic_min_runtime", [](MissionConfig& c, const std::string& v) { c.myopic_min_runtime = parse_double(v); }},
      {"mission.start_x", [](MissionConfig& c, const std::string& v) { c.start_x = parse_double(v); }},
      {"mission.start_y", [](MissionConfig& c, const std::string& v) { c.start_y = parse_double(v); }},
      {"mission.start_theta", [](MissionConfig& c, const std::string& v) { c.start_theta = parse_double(v); }},
      {"mission.log_pings", [](MissionConfig& c, const std::string& v) { c.log_pings = parse_bool(v); }},
      // terrain
      {"terrain.file", [](MissionConfig& c, const std::string& v) { c.terrain_file = v; }},
      {"terrain.base_depth", [](MissionConfig& c, const std::string& v) { c.terrain_spec.base_depth = parse_double(v); }},
      {"terrain.noise_amplitude", [](MissionConfig& c, const std::string& v) { c.terrain_spec.noise_amplitude = parse_double(v); }},
      {"terrain.noise_lengthscale", [](MissionConfig& c, const std::string& v) { c.terrain_spec.noise_lengthscale = parse_double(v); }},
      {"terrain.seed", [](MissionConfig& c, const std::string& v) { c.terrain_spec.seed = static_cast<std::uint64_t>(parse_int(v)); }},
      {"terrain.bump",
       [](MissionConfig& c, const std::string& v) {
         std::istringstream ss(v);
         GaussianBump b;
         if (!(ss >> b.center.x() >> b.center.y() >> b.amplitude >> b.radius))
           throw std::runtime_error("bump wants 'cx cy amplitude radius'");
         std::string extra;
         if (ss >> extra) throw std::runtime_error("bump wants exactly 4 numbers");
         c.terrain_spec.bumps.push_back(b);
       }},
      {"terrain.origin_x", [](MissionConfig& c, const std::string& v) { c.terrain_origin.x() = parse_double(v); }},
      {"terrain.origin_y", [](MissionConfig& c, const std::string& v) { c.terrain_origin.y() = parse_double(v); }},
      {"terrain.cell_size", [](MissionConfig& c, const std::string& v) { c.terrain_cell = parse_double(v); }},
      {"terrain.rows", [](MissionConfig& c, const std::string& v) { c.terrain_rows = static_cast<int>(parse_int(v)); }},
      {"terrain.cols", [](MissionConfig& c, const std::string& v) { c.terrain_cols = static_cast<int>(parse_int(v)); }},
      // vehicle
      {"vehicle.speed", [](MissionConfig& c, const std::string& v) { c.vehicle.speed = parse_double(v); }},
      {"vehicle.turn_radius", [](MissionConfig& c, const std::string& v) { c.vehicle.turn_radius_min = parse_double(v); }},
      {"vehicle.w_pos",
       [](MissionConfig& c, const std::string& v) {
         const double w = parse_double(v);
         c.vehicle.process_noise_rate(0, 0) = w;
         c.vehicle.process_noise_rate(1, 1) = w;
       }},
      {"vehicle.w_heading", [](MissionConfig& c, const std::string& v) { c.vehicle.process_noise_rate(2, 2) = parse_double(v); }},
      {"vehicle.initial_pos_std",
       [](MissionConfig& c, const std::string& v) {
         const double s = parse_double(v);
         c.vehicle.initial_cov(0, 0) = s * s;
         c.vehicle.initial_cov(1, 1) = s * s;
       }},
      {"vehicle.initial_heading_std",
       [](MissionConfig& c, const std::string& v) {
         const double s = parse_double(v);
         c.vehicle.initial_cov(2, 2) = s * s;
       }},
      // sensor
      {"sensor.opening_angle_deg", [](MissionConfig& c, const std::string& v) { c.sensor.opening_angle = parse_double(v) * kPi / 180.0; }},
      {"sensor.n_beams", [](MissionConfig& c, const std::string& v) { c.sensor.n_beams = static_cast<int>(parse_int(v)); }},
      {"sensor.ping_rate", [](MissionConfig& c, const std::string& v) { c.sensor.ping_rate = parse_double(v); }},
      {"sensor.noise_xy_std",
       [](MissionConfig& c, const std::string& v) {
         const double s = parse_double(v);
         c.sensor.noise_q.x() = s * s;
         c.sensor.noise_q.y() = s * s;
       }},
      {"sensor.noise_z_std",
       [](MissionConfig& c, const std::string& v) {
         const double s = parse_double(v);
         c.sensor.noise_q.z() = s * s;
       }},
      {"sensor.ui_floor", [](MissionConfig& c, const std::string& v) { c.sensor.ui_floor = parse_double(v); }},
      // svgp
      {"svgp.inducing", [](MissionConfig& c, const std::string& v) { c.svgp.inducing = static_cast<int>(parse_int(v)); }},
      {"svgp.minibatch", [](MissionConfig& c, const std::string& v) { c.svgp.train.minibatch = static_cast<int>(parse_int(v)); }},
      {"svgp.learning_rate", [](MissionConfig& c, const std::string& v) { c.svgp.train.learning_rate = parse_double(v); }},
      {"svgp.steps_per_ping", [](MissionConfig& c, const std::string& v) { c.svgp.train.steps_per_ping = static_cast<int>(parse_int(v)); }},
      {"svgp.use_adam", [](MissionConfig& c, const std::string& v) { c.svgp.train.use_adam = parse_bool(v); }},
      {"svgp.train_hyperparams", [](MissionConfig& c, const std::string& v) { c.svgp.train.train_hyperparams = parse_bool(v); }},
      {"svgp.train_inducing", [](MissionConfig& c, const std::string& v) { c.svgp.train.train_inducing = parse_bool(v); }},
      {"svgp.train_period", [](MissionConfig& c, const std::string& v) { c.svgp.train_period = static_cast<int>(parse_int(v)); }},
      {"svgp.buffer_capacity", [](MissionConfig& c, const std::string& v) { c.svgp.buffer_capacity = static_cast<std::size_t>(parse_int(v)); }},
      {"svgp.signal_std", [](MissionConfig& c, const std::string& v) { c.svgp.signal_std = parse_double(v); }},
      {"svgp.lengthscale", [](MissionConfig& c, const std::string& v) { c.svgp.lengthscale = parse_double(v); }},
      {"svgp.noise_std", [](MissionConfig& c, const std::string& v) { c.svgp.noise_std = parse_double(v); }},
      {"svgp.matern_nu", [](MissionConfig& c, const std::string& v) { c.svgp.matern_nu = parse_double(v); }},
      {"svgp.mean_offset",
       [](MissionConfig& c, const std::string& v) {
         if (v == "auto") {
           c.svgp.mean_offset_auto = true;
         } else {
           c.svgp.mean_offset = parse_double(v);
           c.svgp.mean_offset_auto = false;
         }
       }},
      // planner
      {"planner.beta", [](MissionConfig& c, const std::string& v) { c.planner.beta = parse_double(v); }},
      {"planner.uct_c", [](MissionConfig& c, const std::string& v) { c.planner.uct_c = parse_double(v); }},
      {"planner.gamma", [](MissionConfig& c, const std::string& v) { c.planner.gamma = parse_double(v); }},
      {"planner.d_max", [](MissionConfig& c, const std::string& v) { c.planner.d_max = static_cast<int>(parse_int(v)); }},
      {"planner.q", [](MissionConfig& c, const std::string& v) { c.planner.q = static_cast<int>(parse_int(v)); }},
      {"planner.n_mc_qucb", [](MissionConfig& c, const std::string& v) { c.planner.n_mc_qucb = static_cast<int>(parse_int(v)); }},
      {"planner.horizon_radius", [](MissionConfig& c, const std::string& v) { c.planner.horizon_radius = parse_double(v); }},
      {"planner.rollout_samples", [](MissionConfig& c, const std::string& v) { c.planner.rollout_samples = static_cast<int>(parse_int(v)); }},
      {"planner.rollout_radius", [](MissionConfig& c, const std::string& v) { c.planner.rollout_radius = parse_double(v); }},
      {"planner.replan_threshold", [](MissionConfig& c, const std::string& v) { c.planner.replan_threshold = parse_double(v); }},
      {"planner.time_budget", [](MissionConfig& c, const std::string& v) { c.planner.time_budget = parse_double(v); }},
      {"planner.restarts", [](MissionConfig& c, const std::string& v) { c.planner.restarts = static_cast<int>(parse_int(v)); }},
      {"planner.tree_iterations", [](MissionConfig& c, const std::string& v) { c.planner.tree_iterations = static_cast<int>(parse_int(v)); }},
      {"planner.fantasy_steps", [](MissionConfig& c, const std::string& v) { c.planner.fantasy_steps = static_cast<int>(parse_int(v)); }},
      {"planner.fantasy_spacing", [](MissionConfig& c, const std::string& v) { c.planner.fantasy_spacing = parse_double(v); }},
      {"planner.heading_max_evals", [](MissionConfig& c, const std::string& v) { c.planner.heading_max_evals = static_cast<int>(parse_int(v)); }},
      {"planner.path_value_samples", [](MissionConfig& c, const std::string& v) { c.planner.path_value_samples = static_cast<int>(parse_int(v)); }},
      // baseline
      {"baseline.overlap", [](MissionConfig& c, const std::string& v) { c.lm_overlap = parse_double(v); }},
  };
  return table;
}

}  // namespace

void MissionConfig::validate() const {
  if (!(distance_budget > 0.0)) throw std::invalid_argument("MissionConfig: distance_budget must be > 0");
  if (!(checkpoint_every > 0.0)) throw std::invalid_argument("MissionConfig: checkpoint_every must be > 0");
  if (svgp.matern_nu != 2.5) throw std::invalid_argument("MissionConfig: the kernel is Matern with nu fixed at 2.5");
  if (svgp.inducing < 1) throw std::invalid_argument("MissionConfig: svgp.inducing must be >= 1");
  if (svgp.train_period < 1) throw std::invalid_argument("MissionConfig: svgp.train_period must be >= 1");
  if (!(svgp.signal_std > 0.0 && svgp.lengthscale > 0.0 && svgp.noise_std > 0.0))
    throw std::invalid_argument("MissionConfig: svgp initial scales must be > 0");
  if (!(lm_overlap >= 0.0 && lm_overlap < 1.0))
    throw std::invalid_argument("MissionConfig: baseline.overlap must be in [0, 1)");
  if (terrain_file.empty() && (terrain_rows < 2 || terrain_cols < 2 || !(terrain_cell > 0.0)))
    throw std::invalid_argument("MissionConfig: bad synthetic terrain dimensions");
  vehicle.validate();
  sensor.validate();
  svgp.train.validate();
  planner.validate();
}

void apply_override(MissionConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = key_table();
  auto it = table.find(key);
  if (it == table.end()) throw std::runtime_error("unknown key '" + key + "'");
  it->second(cfg, trim(value));
}

namespace {

void apply_env_overrides(MissionConfig& cfg) {
  for (const auto& [key, setter] : key_table()) {
    std::string env = "SURVEY_";
    for (char ch : key) env += (ch == '.') ? '_' : static_cast<char>(std::toupper(ch));
    if (const char* val = std::getenv(env.c_str())) setter(cfg, trim(val));
  }
}

MissionConfig parse_stream(std::istream& in, const std::string& source_name) {
  MissionConfig cfg;
  cfg.planner.turn_radius = cfg.vehicle.turn_radius_min;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(source_name + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_override(cfg, key, value);
    } catch (const std::exception& e) {
      throw std::runtime_error(source_name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  apply_env_overrides(cfg);
  // The planner's kinematic and swath context always follows vehicle/sensor.
  cfg.planner.turn_radius = cfg.vehicle.turn_radius_min;
  cfg.planner.swath_opening = cfg.sensor.opening_angle;
  cfg.validate();
  return cfg;
}

}  // namespace

MissionConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_config: cannot open " + path);
  return parse_stream(in, path);
}

MissionConfig parse_config_text(const std::string& text, const std::string& source_name) {
  std::istringstream in(text);
  return parse_stream(in, source_name);
}

}  // namespace survey
