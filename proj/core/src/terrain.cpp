#include "survey/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace survey {

namespace {

// splitmix64; stable across platforms, used for the noise lattice.
std::uint64_t hash_mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Lattice value in [-1, 1] for integer noise-cell coordinates.
double lattice_value(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
  std::uint64_t h = hash_mix(seed ^ hash_mix(static_cast<std::uint64_t>(ix) * 0x632be59bd9b4e019ULL ^
                                             static_cast<std::uint64_t>(iy)));
  return 2.0 * (static_cast<double>(h >> 11) * 0x1.0p-53) - 1.0;
}

double cosine_step(double t) { return 0.5 * (1.0 - std::cos(kPi * t)); }

// Value noise: random lattice values interpolated with cosine smoothing.
double value_noise(std::uint64_t seed, double x, double y, double lengthscale) {
  const double u = x / lengthscale;
  const double v = y / lengthscale;
  const auto ix = static_cast<std::int64_t>(std::floor(u));
  const auto iy = static_cast<std::int64_t>(std::floor(v));
  const double fx = cosine_step(u - static_cast<double>(ix));
  const double fy = cosine_step(v - static_cast<double>(iy));
  const double v00 = lattice_value(seed, ix, iy);
  const double v10 = lattice_value(seed, ix + 1, iy);
  const double v01 = lattice_value(seed, ix, iy + 1);
  const double v11 = lattice_value(seed, ix + 1, iy + 1);
  const double a = v00 + (v10 - v00) * fx;
  const double b = v01 + (v11 - v01) * fx;
  return a + (b - a) * fy;
}

}  // namespace

void TerrainGrid::validate() const {
  if (n_rows < 2 || n_cols < 2) throw std::invalid_argument("TerrainGrid: need n_rows >= 2 and n_cols >= 2");
  if (!(cell_size > 0.0)) throw std::invalid_argument("TerrainGrid: cell_size must be > 0");
  if (depth.size() != static_cast<std::size_t>(n_rows) * n_cols)
    throw std::invalid_argument("TerrainGrid: depth array size mismatch");
  for (double d : depth) {
    if (!std::isfinite(d) || d <= 0.0)
      throw std::invalid_argument("TerrainGrid: depths must be finite and > 0");
  }
}

TerrainGrid synth_terrain(const FeatureSpec& spec, const Vec2& origin, double cell_size,
                          int n_rows, int n_cols) {
  for (const auto& b : spec.bumps) {
    if (!(b.radius > 0.0)) throw std::invalid_argument("synth_terrain: bump radius must be > 0");
  }
  if (spec.noise_amplitude != 0.0 && !(spec.noise_lengthscale > 0.0))
    throw std::invalid_argument("synth_terrain: noise_lengthscale must be > 0");

  TerrainGrid g;
  g.origin = origin;
  g.cell_size = cell_size;
  g.n_rows = n_rows;
  g.n_cols = n_cols;
  g.depth.resize(static_cast<std::size_t>(n_rows) * n_cols);

  for (int r = 0; r < n_rows; ++r) {
    for (int c = 0; c < n_cols; ++c) {
      const double x = origin.x() + c * cell_size;
      const double y = origin.y() + r * cell_size;
      double d = spec.base_depth;
      for (const auto& b : spec.bumps) {
        const double dx = x - b.center.x();
        const double dy = y - b.center.y();
        d += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.radius * b.radius));
      }
      if (spec.noise_amplitude != 0.0)
        d += spec.noise_amplitude * value_noise(spec.seed, x - origin.x(), y - origin.y(), spec.noise_lengthscale);
      g.node(r, c) = d;
    }
  }
  g.validate();
  return g;
}

void save_grid(const TerrainGrid& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_grid: cannot open " + path);
  out << "BGRID v1\n";
  out.precision(17);
  out << grid.origin.x() << ' ' << grid.origin.y() << ' ' << grid.cell_size << ' ' << grid.n_rows
      << ' ' << grid.n_cols << '\n';
  for (int r = 0; r < grid.n_rows; ++r) {
    for (int c = 0; c < grid.n_cols; ++c) {
      if (c) out << ' ';
      out << grid.node(r, c);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_grid: write failed for " + path);
}

TerrainGrid load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_grid: cannot open " + path);

  auto fail = [&](int line_no, const std::string& what) {
    throw std::runtime_error("load_grid: " + path + ":" + std::to_string(line_no) + ": " + what);
  };

  std::string line;
  if (!std::getline(in, line)) fail(1, "missing header");
  if (line != "BGRID v1") fail(1, "expected 'BGRID v1'");

  if (!std::getline(in, line)) fail(2, "missing dimensions line");
  TerrainGrid g;
  {
    std::istringstream ss(line);
    if (!(ss >> g.origin.x() >> g.origin.y() >> g.cell_size >> g.n_rows >> g.n_cols))
      fail(2, "expected 'origin_x origin_y cell_size n_rows n_cols'");
    std::string extra;
    if (ss >> extra) fail(2, "trailing tokens in dimensions line");
  }
  if (g.n_rows < 2 || g.n_cols < 2 || !(g.cell_size > 0.0)) fail(2, "bad dimensions");

  g.depth.reserve(static_cast<std::size_t>(g.n_rows) * g.n_cols);
  for (int r = 0; r < g.n_rows; ++r) {
    const int line_no = 3 + r;
    if (!std::getline(in, line)) fail(line_no, "missing data row");
    std::istringstream ss(line);
    for (int c = 0; c < g.n_cols; ++c) {
      double d;
      if (!(ss >> d)) fail(line_no, "row has fewer than n_cols values");
      if (!std::isfinite(d)) fail(line_no, "non-finite depth");
      g.depth.push_back(d);
    }
    std::string extra;
    if (ss >> extra) fail(line_no, "row has more than n_cols values");
  }
  g.validate();
  return g;
}

double depth_at(const TerrainGrid& grid, double x, double y) {
  if (!grid.extent().contains(x, y))
    throw std::out_of_range("depth_at: query outside terrain extent");
  return depth_at_clamped(grid, x, y);
}

double depth_at_clamped(const TerrainGrid& grid, double x, double y) {
  const double u = std::clamp((x - grid.origin.x()) / grid.cell_size, 0.0,
                              static_cast<double>(grid.n_cols - 1));
  const double v = std::clamp((y - grid.origin.y()) / grid.cell_size, 0.0,
                              static_cast<double>(grid.n_rows - 1));
  int c0 = std::min(static_cast<int>(u), grid.n_cols - 2);
  int r0 = std::min(static_cast<int>(v), grid.n_rows - 2);
  const double fx = u - c0;
  const double fy = v - r0;
  const double d00 = grid.node(r0, c0);
  const double d10 = grid.node(r0, c0 + 1);
  const double d01 = grid.node(r0 + 1, c0);
  const double d11 = grid.node(r0 + 1, c0 + 1);
  return d00 * (1 - fx) * (1 - fy) + d10 * fx * (1 - fy) + d01 * (1 - fx) * fy + d11 * fx * fy;
}

std::vector<Vec3> gt_pointcloud(const TerrainGrid& grid, double resolution) {
  if (!(resolution >= grid.cell_size / 4.0))
    throw std::invalid_argument("gt_pointcloud: resolution must be >= cell_size / 4");
  const Extent e = grid.extent();
  const auto nx = static_cast<int>(std::floor(e.width() / resolution + 1e-9)) + 1;
  const auto ny = static_cast<int>(std::floor(e.height() / resolution + 1e-9)) + 1;
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    const double y = e.min_y + j * resolution;
    for (int i = 0; i < nx; ++i) {
      const double x = e.min_x + i * resolution;
      pts.emplace_back(x, y, depth_at(grid, x, y));
    }
  }
  return pts;
}

}  // namespace survey
