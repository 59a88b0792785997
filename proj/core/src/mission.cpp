#include "survey/mission.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>
#include <sstream>

namespace survey {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

TerrainGrid make_terrain(const MissionConfig& cfg) {
  if (!cfg.terrain_file.empty()) return load_grid(cfg.terrain_file);
  return synth_terrain(cfg.terrain_spec, cfg.terrain_origin, cfg.terrain_cell, cfg.terrain_rows,
                       cfg.terrain_cols);
}

double mean_depth(const TerrainGrid& grid) {
  return std::accumulate(grid.depth.begin(), grid.depth.end(), 0.0) /
         static_cast<double>(grid.depth.size());
}

std::string tag_mix_string(const std::map<std::string, int>& counts) {
  std::string out;
  for (const auto& [tag, n] : counts) {
    if (!out.empty()) out += ';';
    out += tag + "=" + std::to_string(n);
  }
  return out.empty() ? "none" : out;
}

// Covariance forecast to the end of the queued paths: propagate the belief
// noiselessly along each remaining segment so planning sees end-of-transit
// uncertainty.
PoseBelief belief_at_queue_end(PoseBelief belief, const std::deque<DubinsPath>& queue,
                               double s_along, const VehicleConfig& vcfg) {
  const double dt = 0.5;
  const double ds = vcfg.speed * dt;
  bool first = true;
  for (const auto& path : queue) {
    double s = first ? s_along : 0.0;
    first = false;
    while (s < path.length() - 1e-9) {
      const double step = std::min(ds, path.length() - s);
      const double omega = path.turn_rate_at(std::min(s + 0.5 * step, path.length()), vcfg.speed);
      belief = propagate_belief(belief, omega, step / vcfg.speed, vcfg);
      s += step;
    }
    belief.mean = path.end;
  }
  return belief;
}

struct PlannerContext {
  std::shared_ptr<const SvgpSnapshot> snapshot;
  PoseBelief belief;
  PlanBudget budget;
};

}  // namespace

RunArtifacts run_mission(const MissionConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  const TerrainGrid grid = make_terrain(cfg);
  const Extent extent = grid.extent();
  const double nominal_depth = mean_depth(grid);
  if (cfg.terrain_file.empty()) save_grid(grid, cfg.out_dir + "/terrain.bgrid");

  PlannerConfig pcfg = cfg.planner;
  pcfg.nominal_depth = nominal_depth;
  pcfg.turn_radius = cfg.vehicle.turn_radius_min;
  pcfg.swath_opening = cfg.sensor.opening_angle;

  // Viewpoints keep half a swath off the boundary (the swath still covers the
  // rim, exactly like the lawnmower's first and last tracks); the margin also
  // keeps Dubins turns mostly inside the survey area.
  const double swath = swath_width(nominal_depth, cfg.sensor.opening_angle);
  const double inset = std::min({swath / 2.0, extent.width() / 6.0, extent.height() / 6.0});
  const Extent plan_extent{extent.min_x + inset, extent.min_y + inset, extent.max_x - inset,
                           extent.max_y - inset};

  // Independent deterministic streams per subsystem.
  Rng master(cfg.seed);
  Rng rng_model(master());
  Rng rng_vehicle(master());
  Rng rng_sensor(master());
  Rng rng_train(master());
  Rng rng_plan(master());

  KernelParams kernel{cfg.svgp.signal_std * cfg.svgp.signal_std, cfg.svgp.lengthscale};
  // The inducing grid pads past the extent so boundary posteriors stay as
  // tight as the interior (otherwise edge variance never drops and the
  // acquisition chases irreducible corner ripples).
  const double ind_pad = 0.6 * cfg.svgp.lengthscale;
  const Extent inducing_extent{extent.min_x - ind_pad, extent.min_y - ind_pad,
                               extent.max_x + ind_pad, extent.max_y + ind_pad};
  SvgpModel model = SvgpModel::init_grid(inducing_extent, cfg.svgp.inducing, kernel,
                                         cfg.svgp.noise_std * cfg.svgp.noise_std, rng_model);
  model.mean_offset = cfg.svgp.mean_offset;
  SvgpTrainer trainer(std::move(model), cfg.svgp.train);
  TrainBuffer buffer(cfg.svgp.buffer_capacity);
  bool offset_pending = cfg.svgp.mean_offset_auto;

  const double eval_res = cfg.eval_resolution > 0.0 ? cfg.eval_resolution : grid.cell_size;
  const std::vector<Vec3> gt = gt_pointcloud(grid, eval_res);

  // All methods start at the lawnmower entry unless the config pins a pose.
  const auto lm_legs = lawnmower_path(extent, nominal_depth, cfg.sensor.opening_angle,
                                      cfg.lm_overlap, cfg.vehicle.turn_radius_min);
  Pose start = lm_legs.front().start;
  if (std::isfinite(cfg.start_x) && std::isfinite(cfg.start_y))
    start = Pose::make(cfg.start_x, cfg.start_y, cfg.start_theta);

  Pose true_pose = start;
  PoseBelief belief{start, cfg.vehicle.initial_cov};

  std::deque<DubinsPath> queue;
  if (cfg.method == Method::lawnmower)
    queue.assign(lm_legs.begin(), lm_legs.end());

  const double dt = 1.0 / cfg.sensor.ping_rate;
  const double ds_tick = cfg.vehicle.speed * dt;

  std::ofstream traj(cfg.out_dir + "/trajectory.csv");
  traj << "t,x_true,y_true,theta_true,x_bel,y_bel,theta_bel,cov_xx,cov_xy,cov_yy\n";
  std::ofstream plan_log(cfg.out_dir + "/planning.csv");
  plan_log << "cycle,t,tag,viewpoint_x,viewpoint_y,theta,tree_iters,models_trained,wall_time_s\n";
  std::ofstream ping_log;
  if (cfg.log_pings) {
    ping_log.open(cfg.out_dir + "/pings.csv");
    ping_log << "t,beam_idx,x,y,z,om_xx,om_xy,om_yy\n";
  }

  RunArtifacts art;
  art.out_dir = cfg.out_dir;
  const std::string run_id = std::string(to_string(cfg.method)) + "-s" + std::to_string(cfg.seed);

  double t = 0.0;
  double distance = 0.0;
  double s_along = 0.0;
  int cycle = 0;
  std::uint64_t pings_since_train = 0;
  std::map<std::string, int> tag_counts;
  std::vector<MetricSample> metrics;
  double next_checkpoint = 0.0;

  auto take_checkpoint = [&]() {
    MetricSample ms;
    ms.distance = distance;
    ms.t = t;
    ms.n_beams = art.beams;
    ms.tag_mix = tag_mix_string(tag_counts);
    const SvgpSnapshot snap(trainer.model());
    ms.rmse = consistency_rmse(gt, snap);
    metrics.push_back(std::move(ms));
  };

  auto log_plan = [&](const PlanResult& res) {
    ++cycle;
    tag_counts[to_string(res.tag)] += 1;
    plan_log << cycle << ',' << fmt(t) << ',' << to_string(res.tag) << ','
             << fmt(res.viewpoint.x()) << ',' << fmt(res.viewpoint.y()) << ','
             << fmt(res.heading) << ',' << res.tree_iterations << ',' << res.models_trained
             << ',' << fmt(res.wall_time_s) << '\n';
  };

  auto remaining_total = [&]() {
    double rem = 0.0;
    bool first = true;
    for (const auto& p : queue) {
      rem += first ? p.length() - s_along : p.length();
      first = false;
    }
    return rem;
  };

  auto make_budget = [&](double remaining_time) {
    if (remaining_time <= cfg.myopic_min_runtime) return PlanBudget::exhausted();
    PlanBudget b = PlanBudget::iterations(pcfg.tree_iterations);
    if (remaining_time <= cfg.min_runtime) {
      b.allow_tree = false;
      b.tree_iterations = 0;
    }
    if (cfg.clock == ClockMode::realtime)
      b.deadline = std::chrono::steady_clock::now() +
                   std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                       std::chrono::duration<double>(remaining_time));
    return b;
  };

  auto run_planner = [&](const PlannerContext& ctx) {
    if (cfg.method == Method::myopic)
      return myopic_plan(ctx.snapshot, ctx.belief, plan_extent, pcfg, rng_plan, ctx.budget);
    return plan_next(ctx.snapshot, ctx.belief, plan_extent, pcfg, cfg.svgp.train, rng_plan,
                     ctx.budget);
  };

  std::future<PlanResult> pending;  // real-time mode only

  take_checkpoint();  // distance-zero baseline sample
  next_checkpoint = cfg.checkpoint_every;

  const bool plans = cfg.method != Method::lawnmower;
  bool lm_done = false;

  while (distance < cfg.distance_budget && !lm_done) {
    // keep-moving guarantee: never start a tick without an active path
    if (queue.empty()) {
      if (!plans) {
        lm_done = true;
        break;
      }
      if (pending.valid()) {  // real-time worker still out; it honors its deadline
        PlanResult res = pending.get();
        log_plan(res);
        queue.push_back(res.path);
      } else {
        // mission start plans with a full budget; mid-run exhaustion is an
        // emergency and must resolve instantly (random fallback)
        const bool at_start = distance <= 0.0;
        art.path_queue_ever_empty = art.path_queue_ever_empty || !at_start;
        PlannerContext ctx{std::make_shared<SvgpSnapshot>(trainer.model()), belief,
                           at_start ? make_budget(pcfg.replan_threshold / cfg.vehicle.speed)
                                    : PlanBudget::exhausted()};
        PlanResult res = run_planner(ctx);
        log_plan(res);
        queue.push_back(res.path);
      }
      s_along = 0.0;
    }

    // advance one tick along the queue
    double ds = std::min(ds_tick, cfg.distance_budget - distance);
    if (ds <= 1e-12) break;
    const double tick_dt = ds / cfg.vehicle.speed;
    double moved = 0.0;
    while (moved < ds - 1e-12) {
      if (queue.empty()) break;
      DubinsPath& path = queue.front();
      const double step = std::min(ds - moved, path.length() - s_along);
      if (step > 1e-12) {
        const double omega =
            path.turn_rate_at(std::min(s_along + 0.5 * step, path.length()), cfg.vehicle.speed);
        const double step_dt = step / cfg.vehicle.speed;
        true_pose = step_true(true_pose, omega, step_dt, cfg.vehicle, rng_vehicle);
        PoseBelief next = propagate_belief(belief, omega, step_dt, cfg.vehicle);
        next.mean = path.pose_at(s_along + step);  // dead reckoning rides the plan
        belief = next;
        s_along += step;
        moved += step;
        distance += step;
      }
      if (s_along >= path.length() - 1e-9) {
        belief.mean = path.end;
        queue.pop_front();
        s_along = 0.0;
        if (queue.empty() && !plans) {
          lm_done = true;
          break;
        }
        if (queue.empty() && plans) break;  // emergency plan at next tick start
      }
    }
    t += tick_dt;

    traj << fmt(t) << ',' << fmt(true_pose.x) << ',' << fmt(true_pose.y) << ','
         << fmt(true_pose.theta) << ',' << fmt(belief.mean.x) << ',' << fmt(belief.mean.y) << ','
         << fmt(belief.mean.theta) << ',' << fmt(belief.cov(0, 0)) << ',' << fmt(belief.cov(0, 1))
         << ',' << fmt(belief.cov(1, 1)) << '\n';

    // sense and learn
    if (extent.contains(true_pose.x, true_pose.y)) {
      const Ping ping = simulate_ping(true_pose, belief, grid, cfg.sensor, rng_sensor, t);
      ++art.pings;
      ++pings_since_train;
      if (!ping.beams.empty()) {
        if (offset_pending) {
          double zsum = 0.0;
          for (const auto& b : ping.beams) zsum += b.pos.z();
          trainer.set_mean_offset(zsum / static_cast<double>(ping.beams.size()));
          offset_pending = false;
        }
        for (std::size_t i = 0; i < ping.beams.size(); ++i) {
          const Beam& b = ping.beams[i];
          buffer.push({Vec2{b.pos.x(), b.pos.y()}, b.pos.z(), b.omega});
          if (cfg.log_pings)
            ping_log << fmt(t) << ',' << i << ',' << fmt(b.pos.x()) << ',' << fmt(b.pos.y()) << ','
                     << fmt(b.pos.z()) << ',' << fmt(b.omega(0, 0)) << ',' << fmt(b.omega(0, 1))
                     << ',' << fmt(b.omega(1, 1)) << '\n';
        }
        art.beams += ping.beams.size();
        trainer.add_beams_observed(ping.beams.size());
      }
      if (!buffer.empty() && pings_since_train >= static_cast<std::uint64_t>(cfg.svgp.train_period)) {
        pings_since_train = 0;
        for (int k = 0; k < cfg.svgp.train.steps_per_ping; ++k) trainer.train_step(buffer, rng_train);
      }
    }

    // receding-horizon replanning
    if (plans) {
      if (cfg.clock == ClockMode::realtime && pending.valid() &&
          pending.wait_for(std::chrono::seconds(0)) == std::future_status::ready) {
        PlanResult res = pending.get();
        log_plan(res);
        queue.push_back(res.path);
      }
      const double remaining = remaining_total();
      const bool want_plan = remaining < pcfg.replan_threshold && !queue.empty();
      if (want_plan && cfg.clock == ClockMode::synchronous) {
        PlannerContext ctx{std::make_shared<SvgpSnapshot>(trainer.model()),
                           belief_at_queue_end(belief, queue, s_along, cfg.vehicle),
                           make_budget(remaining / cfg.vehicle.speed)};
        PlanResult res = run_planner(ctx);
        log_plan(res);
        queue.push_back(res.path);
      } else if (want_plan && cfg.clock == ClockMode::realtime && !pending.valid()) {
        PlannerContext ctx{std::make_shared<SvgpSnapshot>(trainer.model()),
                           belief_at_queue_end(belief, queue, s_along, cfg.vehicle),
                           make_budget(remaining / cfg.vehicle.speed)};
        pending = std::async(std::launch::async, [ctx, &run_planner]() { return run_planner(ctx); });
      }
    }

    if (distance >= next_checkpoint - 1e-9) {
      take_checkpoint();
      next_checkpoint += cfg.checkpoint_every;
    }
  }

  if (pending.valid()) {
    PlanResult res = pending.get();  // drain the worker; the mission is over
    log_plan(res);
  }

  if (metrics.empty() || distance > metrics.back().distance + 1e-9) take_checkpoint();

  art.distance = distance;
  art.duration = t;
  art.tag_counts = tag_counts;
  art.metrics = metrics;

  art.metrics_path = cfg.out_dir + "/metrics.csv";
  std::ofstream mcsv(art.metrics_path);
  mcsv << "run_id,method,seed,distance_m,t_s,rmse_m\n";
  for (const auto& ms : metrics)
    mcsv << run_id << ',' << to_string(cfg.method) << ',' << cfg.seed << ',' << fmt(ms.distance)
         << ',' << fmt(ms.t) << ',' << fmt(ms.rmse) << '\n';

  art.checkpoint_path = cfg.out_dir + "/checkpoint.svgp";
  save_checkpoint(trainer.model(), extent, art.checkpoint_path);
  return art;
}

namespace {

std::vector<MetricSample> median_curve(const std::vector<std::vector<MetricSample>>& runs) {
  std::vector<MetricSample> out;
  if (runs.empty()) return out;
  std::size_t n = runs.front().size();
  for (const auto& r : runs) n = std::min(n, r.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> vals;
    for (const auto& r : runs) vals.push_back(r[i].rmse);
    std::sort(vals.begin(), vals.end());
    MetricSample ms = runs.front()[i];
    ms.rmse = vals[vals.size() / 2];
    out.push_back(ms);
  }
  return out;
}

}  // namespace

SuiteResult run_suite(const MissionConfig& base, int n_seeds) {
  if (n_seeds < 1) throw std::invalid_argument("run_suite: n_seeds must be >= 1");
  namespace fs = std::filesystem;
  fs::create_directories(base.out_dir);
  SuiteResult result;

  std::ofstream fail_log(base.out_dir + "/failures.log");
  auto run_one = [&](Method method, int seed_idx, double budget) -> std::optional<RunArtifacts> {
    MissionConfig cfg = base;
    cfg.method = method;
    cfg.seed = base.seed + static_cast<std::uint64_t>(seed_idx);
    cfg.distance_budget = budget;
    cfg.out_dir = base.out_dir + "/" + to_string(method) + "-s" + std::to_string(cfg.seed);
    try {
      return run_mission(cfg);
    } catch (const std::exception& e) {
      fail_log << to_string(method) << " seed " << cfg.seed << ": " << e.what() << '\n';
      return std::nullopt;
    }
  };

  for (int s = 0; s < n_seeds; ++s) {
    auto lm = run_one(Method::lawnmower, s, base.distance_budget);
    if (!lm) continue;
    result.curves["lawnmower"].push_back(lm->metrics);
    result.final_distance["lawnmower"].push_back(lm->distance);
    const double budget = lm->distance;
    if (auto ipp = run_one(Method::ipp, s, budget)) {
      result.curves["ipp"].push_back(ipp->metrics);
      result.final_distance["ipp"].push_back(ipp->distance);
    }
    if (auto myo = run_one(Method::myopic, s, budget)) {
      result.curves["myopic"].push_back(myo->metrics);
      result.final_distance["myopic"].push_back(myo->distance);
    }
  }

  // Aggregate summary rows.
  result.summary_path = base.out_dir + "/summary.csv";
  std::ofstream sum(result.summary_path);
  sum << "method,distance_m,rmse_median,rmse_min,rmse_max\n";
  for (const auto& [method, runs] : result.curves) {
    if (runs.empty()) continue;
    std::size_t n = runs.front().size();
    for (const auto& r : runs) n = std::min(n, r.size());
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> vals;
      for (const auto& r : runs) vals.push_back(r[i].rmse);
      std::sort(vals.begin(), vals.end());
      sum << method << ',' << fmt(runs.front()[i].distance) << ',' << fmt(vals[vals.size() / 2])
          << ',' << fmt(vals.front()) << ',' << fmt(vals.back()) << '\n';
    }
  }

  // Parity analysis against the lawnmower terminal quality.
  const auto& lm_runs = result.curves["lawnmower"];
  if (!lm_runs.empty()) {
    std::vector<double> terminal;
    for (const auto& r : lm_runs) terminal.push_back(r.back().rmse);
    std::sort(terminal.begin(), terminal.end());
    result.parity_rmse = 1.05 * terminal[terminal.size() / 2];
    const auto lm_med = median_curve(lm_runs);
    const auto ipp_med = median_curve(result.curves["ipp"]);
    const auto myo_med = median_curve(result.curves["myopic"]);
    if (!ipp_med.empty()) {
      const auto imp = improvement_at_parity(ipp_med, lm_med, result.parity_rmse);
      if (imp.reached) result.ipp_vs_lawnmower = imp.fraction;
    }
    if (!ipp_med.empty() && !myo_med.empty()) {
      const auto imp = improvement_at_parity(ipp_med, myo_med, result.parity_rmse);
      if (imp.reached) result.ipp_vs_myopic = imp.fraction;
    }
  }
  return result;
}

void export_maps(const SvgpSnapshot& snap, const Extent& extent, double resolution,
                 const std::string& out_prefix) {
  if (!(resolution > 0.0)) throw std::invalid_argument("export_maps: resolution must be > 0");
  const int nx = std::max(1, static_cast<int>(std::ceil(extent.width() / resolution - 1e-9)));
  const int ny = std::max(1, static_cast<int>(std::ceil(extent.height() / resolution - 1e-9)));

  Eigen::MatrixXd mean(ny, nx), sd(ny, nx);
  for (int j = 0; j < ny; ++j) {
    const double y = std::clamp(extent.max_y - (j + 0.5) * resolution, extent.min_y, extent.max_y);
    for (int i = 0; i < nx; ++i) {
      const double x = std::clamp(extent.min_x + (i + 0.5) * resolution, extent.min_x, extent.max_x);
      auto [mu, var] = snap.predict_one({x, y});
      mean(j, i) = mu;
      sd(j, i) = std::sqrt(var);
    }
  }

  auto write_pgm = [&](const Eigen::MatrixXd& img, const std::string& path, double& lo, double& hi) {
    lo = img.minCoeff();
    hi = img.maxCoeff();
    const double span = hi - lo > 0.0 ? hi - lo : 1.0;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("export_maps: cannot open " + path);
    out << "P5\n" << nx << ' ' << ny << "\n255\n";
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const auto b = static_cast<unsigned char>(
            std::clamp(255.0 * (img(j, i) - lo) / span, 0.0, 255.0));
        out.put(static_cast<char>(b));
      }
  };

  double mean_lo, mean_hi, sd_lo, sd_hi;
  write_pgm(mean, out_prefix + "_mean.pgm", mean_lo, mean_hi);
  write_pgm(sd, out_prefix + "_std.pgm", sd_lo, sd_hi);

  std::ofstream scale(out_prefix + "_scale.txt");
  scale << "mean_min " << fmt(mean_lo) << "\nmean_max " << fmt(mean_hi) << "\nstd_min "
        << fmt(sd_lo) << "\nstd_max " << fmt(sd_hi) << "\nresolution " << fmt(resolution)
        << "\nextent " << fmt(extent.min_x) << ' ' << fmt(extent.min_y) << ' ' << fmt(extent.max_x)
        << ' ' << fmt(extent.max_y) << '\n';
}

}  // namespace survey
