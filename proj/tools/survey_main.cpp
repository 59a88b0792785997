#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "survey/mission.hpp"

namespace {

int cmd_run(const std::string& config, std::uint64_t seed, bool seed_set,
            const std::string& method, const std::string& out) {
  survey::MissionConfig cfg = survey::parse_config(config);
  if (seed_set) cfg.seed = seed;
  if (!method.empty()) survey::apply_override(cfg, "mission.method", method);
  if (!out.empty()) cfg.out_dir = out;
  const auto art = survey::run_mission(cfg);
  std::printf("run %s: %.1f m, %.1f s, %llu pings, %llu beams\n", survey::to_string(cfg.method),
              art.distance, art.duration, static_cast<unsigned long long>(art.pings),
              static_cast<unsigned long long>(art.beams));
  for (const auto& [tag, n] : art.tag_counts) std::printf("  %s: %d\n", tag.c_str(), n);
  if (!art.metrics.empty())
    std::printf("  rmse %.4f -> %.4f m over %.1f m\n", art.metrics.front().rmse,
                art.metrics.back().rmse, art.distance);
  std::printf("  metrics: %s\n  checkpoint: %s\n", art.metrics_path.c_str(),
              art.checkpoint_path.c_str());
  return 0;
}

int cmd_suite(const std::string& config, int seeds, const std::string& out) {
  survey::MissionConfig cfg = survey::parse_config(config);
  if (!out.empty()) cfg.out_dir = out;
  const auto res = survey::run_suite(cfg, seeds);
  std::printf("suite complete, summary: %s\n", res.summary_path.c_str());
  std::printf("parity rmse (1.05 x lawnmower terminal median): %.4f m\n", res.parity_rmse);
  if (res.ipp_vs_lawnmower)
    std::printf("ipp vs lawnmower improvement over distance: %.1f%%\n",
                100.0 * *res.ipp_vs_lawnmower);
  else
    std::printf("ipp vs lawnmower: parity not reached\n");
  if (res.ipp_vs_myopic)
    std::printf("ipp vs myopic improvement over distance: %.1f%%\n", 100.0 * *res.ipp_vs_myopic);
  else
    std::printf("ipp vs myopic: parity not reached\n");
  return 0;
}

int cmd_export(const std::string& checkpoint, double res, const std::string& out) {
  auto [model, extent] = survey::load_checkpoint(checkpoint);
  const survey::SvgpSnapshot snap(model);
  const std::string prefix = out.empty() ? checkpoint + "_map" : out;
  survey::export_maps(snap, extent, res, prefix);
  std::printf("wrote %s_mean.pgm, %s_std.pgm, %s_scale.txt\n", prefix.c_str(), prefix.c_str(),
              prefix.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-layer Bayesian-optimization informative path planning workbench for "
               "AUV bathymetric surveying"};
  app.require_subcommand(1);

  std::string config, method, out, checkpoint;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int seeds = 10;
  double res = 2.0;

  auto* run = app.add_subcommand("run", "Run one survey mission");
  run->add_option("--config", config, "Mission config file")->required();
  run->add_option("--seed", seed, "Override mission.seed")->each([&](const std::string&) {
    seed_set = true;
  });
  run->add_option("--method", method, "ipp|myopic|lawnmower");
  run->add_option("--out", out, "Output directory override");

  auto* suite = app.add_subcommand("suite", "Run lawnmower/ipp/myopic over several seeds");
  suite->add_option("--config", config, "Mission config file")->required();
  suite->add_option("--seeds", seeds, "Number of seeds")->required();
  suite->add_option("--out", out, "Output directory override");

  auto* exp = app.add_subcommand("export", "Render posterior mean/std maps from a checkpoint");
  exp->add_option("--checkpoint", checkpoint, "Model checkpoint file")->required();
  exp->add_option("--res", res, "Meters per pixel")->required();
  exp->add_option("--out", out, "Output file prefix");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config, seed, seed_set, method, out);
    if (suite->parsed()) return cmd_suite(config, seeds, out);
    if (exp->parsed()) return cmd_export(checkpoint, res, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
