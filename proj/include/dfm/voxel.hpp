#pragma once

#include <vector>

#include "dfm/geometry.hpp"
#include "dfm/plane_sweep.hpp"

namespace dfm {

/// Metric voxel lattice. Ranges must be integral multiples of the edge
/// length; cell centers sit at min + (i + 0.5) * edge.
struct VoxelGridSpec {
  double x_min = -30.0, x_max = 30.0;
  double y_min = -1.0, y_max = 3.0;
  double z_min = 2.0, z_max = 59.6;
  double edge = 0.2;
};

class VoxelGrid {
public:
  explicit VoxelGrid(const VoxelGridSpec& spec);

  const VoxelGridSpec& spec() const { return spec_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }

  size_t index(int ix, int iy, int iz) const {
    return (static_cast<size_t>(ix) * ny_ + iy) * nz_ + iz;
  }
  double x_center(int ix) const { return spec_.x_min + (ix + 0.5) * spec_.edge; }
  double y_center(int iy) const { return spec_.y_min + (iy + 0.5) * spec_.edge; }
  double z_center(int iz) const { return spec_.z_min + (iz + 0.5) * spec_.edge; }

  double value(int ix, int iy, int iz) const {
    return values_[index(ix, iy, iz)];
  }
  bool occupied(int ix, int iy, int iz) const {
    return occupancy_[index(ix, iy, iz)] != 0;
  }
  void set(int ix, int iy, int iz, double value, bool occupied) {
    values_[index(ix, iy, iz)] = value;
    occupancy_[index(ix, iy, iz)] = occupied ? 1 : 0;
  }

  size_t occupied_count() const;
  const std::vector<double>& values() const { return values_; }
  const std::vector<uint8_t>& occupancy() const { return occupancy_; }

private:
  VoxelGridSpec spec_;
  int nx_, ny_, nz_;
  std::vector<double> values_;
  std::vector<uint8_t> occupancy_;
};

/// Resamples a frustum volume onto the voxel lattice: each voxel center is
/// projected into the image, its depth mapped to a fractional bin, and the
/// value tri-linearly interpolated over (u, v, w). A voxel is occupied iff
/// its center projects inside the image's sampleable domain, its depth lies
/// within the level range, and every interpolation corner is a valid sample.
VoxelGrid sample_voxels(const FrustumVolume& volume, const Intrinsics& cam,
                        const VoxelGridSpec& spec, int threads = 0);

enum class BevMode { max, mean, stack };

/// Bird's-eye-view collapse of the height (y) axis. max/mean reduce over the
/// occupied cells of each column; stack keeps every height slice as its own
/// channel so the sum over channels conserves the grid's mass exactly.
struct BevMap {
  int nx = 0, nz = 0, channels = 1;
  std::vector<double> values;     // ((c * nx) + ix) * nz + iz
  std::vector<uint8_t> occupied;  // same layout

  size_t index(int c, int ix, int iz) const {
    return (static_cast<size_t>(c) * nx + ix) * nz + iz;
  }
};

BevMap collapse_bev(const VoxelGrid& grid, BevMode mode);

}  // namespace dfm
