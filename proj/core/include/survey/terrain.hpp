#pragma once

#include <string>
#include <vector>

#include "survey/common.hpp"

namespace survey {

// Ground-truth seabed as a regular grid of depth nodes, meters positive down.
// Node (row, col) sits at origin + (col*cell_size, row*cell_size); queries
// between nodes are bilinear. Immutable after construction.
struct TerrainGrid {
  Vec2 origin{0.0, 0.0};
  double cell_size = 1.0;
  int n_rows = 0;
  int n_cols = 0;
  std::vector<double> depth;  // row-major, n_rows * n_cols

  Extent extent() const {
    return {origin.x(), origin.y(),
            origin.x() + (n_cols - 1) * cell_size,
            origin.y() + (n_rows - 1) * cell_size};
  }
  // Nominal coverage counting one cell_size^2 patch per node.
  double area_hectares() const {
    return static_cast<double>(n_rows) * n_cols * cell_size * cell_size / 1e4;
  }
  double node(int row, int col) const { return depth[static_cast<std::size_t>(row) * n_cols + col]; }
  double& node(int row, int col) { return depth[static_cast<std::size_t>(row) * n_cols + col]; }

  // Throws std::invalid_argument on any invariant breach (size, positivity, finiteness).
  void validate() const;
};

struct GaussianBump {
  Vec2 center{0.0, 0.0};
  double amplitude = 0.0;  // m, negative = shoaling feature
  double radius = 1.0;     // m, > 0
};

// Recipe for a synthetic seabed: base plane + Gaussian bumps + smooth value noise.
struct FeatureSpec {
  double base_depth = 20.0;
  std::vector<GaussianBump> bumps;
  double noise_amplitude = 0.0;
  double noise_lengthscale = 25.0;
  std::uint64_t seed = 0;
};

// Deterministic for a fixed spec/seed. Throws if any generated depth is <= 0.
TerrainGrid synth_terrain(const FeatureSpec& spec, const Vec2& origin, double cell_size,
                          int n_rows, int n_cols);

// Plain-text grid format:
//   line 1: BGRID v1
//   line 2: origin_x origin_y cell_size n_rows n_cols
//   then n_rows lines of n_cols depths (m)
TerrainGrid load_grid(const std::string& path);
void save_grid(const TerrainGrid& grid, const std::string& path);

// Bilinear depth; exact at nodes. Throws std::out_of_range outside the extent.
double depth_at(const TerrainGrid& grid, double x, double y);
// Same, but clamps the query to the extent (used by sensor rays near edges).
double depth_at_clamped(const TerrainGrid& grid, double x, double y);

// Regular resampling of the surface, row-major, z = depth (positive down).
// Requires resolution >= cell_size / 4.
std::vector<Vec3> gt_pointcloud(const TerrainGrid& grid, double resolution);

}  // namespace survey
