#include "dfm/voxel.hpp"

#include <cmath>

#include "dfm/image.hpp"

namespace dfm {

namespace {

int cells_along(double min, double max, double edge, const char* axis) {
  const double span = (max - min) / edge;
  const double rounded = std::round(span);
  if (!(span > 0.0) || std::abs(span - rounded) > 1e-9 * std::max(1.0, span))
    throw std::invalid_argument(std::string("voxel range along ") + axis +
                                " is not an integral number of cells");
  return static_cast<int>(rounded);
}

}  // namespace

VoxelGrid::VoxelGrid(const VoxelGridSpec& spec)
    : spec_(spec),
      nx_(cells_along(spec.x_min, spec.x_max, spec.edge, "x")),
      ny_(cells_along(spec.y_min, spec.y_max, spec.edge, "y")),
      nz_(cells_along(spec.z_min, spec.z_max, spec.edge, "z")),
      values_(static_cast<size_t>(nx_) * ny_ * nz_, 0.0),
      occupancy_(values_.size(), 0) {}

size_t VoxelGrid::occupied_count() const {
  size_t n = 0;
  for (uint8_t v : occupancy_) n += v != 0;
  return n;
}

VoxelGrid sample_voxels(const FrustumVolume& volume, const Intrinsics& cam,
                        const VoxelGridSpec& spec, int threads) {
  VoxelGrid grid(spec);
  const auto& levels = volume.levels();
  const int width = volume.width();
  const int height = volume.height();
  const int count = levels.count();

  parallel_rows(grid.nx(), threads, [&](int x_begin, int x_end) {
    for (int ix = x_begin; ix < x_end; ++ix) {
      const double x = grid.x_center(ix);
      for (int iy = 0; iy < grid.ny(); ++iy) {
        const double y = grid.y_center(iy);
        for (int iz = 0; iz < grid.nz(); ++iz) {
          const double z = grid.z_center(iz);
          if (!levels.contains(z)) continue;
          const double u = cam.fx * x / z + cam.cu;
          const double v = cam.fy * y / z + cam.cv;
          if (u < 0.0 || u > width - 1.0 || v < 0.0 || v > height - 1.0)
            continue;
          const double w = levels.fractional_bin(z);

          const int u0 = std::min(static_cast<int>(u), width - 2 >= 0 ? width - 2 : 0);
          const int v0 = std::min(static_cast<int>(v), height - 2 >= 0 ? height - 2 : 0);
          const int w0 = std::min(static_cast<int>(w), count - 2);
          const int u1 = std::min(u0 + 1, width - 1);
          const int v1 = std::min(v0 + 1, height - 1);
          const int w1 = std::min(w0 + 1, count - 1);
          const double fu = u - u0, fv = v - v0, fw = w - w0;

          bool all_valid = true;
          double value = 0.0;
          for (int dv = 0; dv < 2 && all_valid; ++dv) {
            for (int du = 0; du < 2 && all_valid; ++du) {
              for (int dw = 0; dw < 2; ++dw) {
                const int uu = du ? u1 : u0;
                const int vv = dv ? v1 : v0;
                const int ww = dw ? w1 : w0;
                if (!volume.valid(uu, vv, ww)) {
                  all_valid = false;
                  break;
                }
                const double weight = (du ? fu : 1.0 - fu) *
                                      (dv ? fv : 1.0 - fv) *
                                      (dw ? fw : 1.0 - fw);
                value += weight * volume.value(uu, vv, ww);
              }
            }
          }
          if (!all_valid) continue;
          grid.set(ix, iy, iz, value, true);
        }
      }
    }
  });
  return grid;
}

BevMap collapse_bev(const VoxelGrid& grid, BevMode mode) {
  BevMap bev;
  bev.nx = grid.nx();
  bev.nz = grid.nz();
  bev.channels = mode == BevMode::stack ? grid.ny() : 1;
  bev.values.assign(static_cast<size_t>(bev.channels) * bev.nx * bev.nz, 0.0);
  bev.occupied.assign(bev.values.size(), 0);

  for (int ix = 0; ix < grid.nx(); ++ix) {
    for (int iz = 0; iz < grid.nz(); ++iz) {
      if (mode == BevMode::stack) {
        for (int iy = 0; iy < grid.ny(); ++iy) {
          const size_t p = bev.index(iy, ix, iz);
          if (grid.occupied(ix, iy, iz)) {
            bev.values[p] = grid.value(ix, iy, iz);
            bev.occupied[p] = 1;
          }
        }
        continue;
      }
      double acc = mode == BevMode::max
                       ? -std::numeric_limits<double>::infinity()
                       : 0.0;
      int n = 0;
      for (int iy = 0; iy < grid.ny(); ++iy) {
        if (!grid.occupied(ix, iy, iz)) continue;
        const double v = grid.value(ix, iy, iz);
        if (mode == BevMode::max)
          acc = std::max(acc, v);
        else
          acc += v;
        ++n;
      }
      if (n == 0) continue;
      const size_t p = bev.index(0, ix, iz);
      bev.values[p] = mode == BevMode::max ? acc : acc / n;
      bev.occupied[p] = 1;
    }
  }
  return bev;
}

}  // namespace dfm
