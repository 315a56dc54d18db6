#pragma once

#include <string>

#include "dfm/plane_sweep.hpp"
#include "dfm/voxel.hpp"

namespace dfm {

/// Every tunable default in one place, mirrored by the JSON schema accepted
/// through --config. Unknown keys are rejected.
struct Config {
  // plane sweep
  int levels = 288;
  double d_min = 2.0;
  double d_max = 59.6;
  std::string cost = "zncc";
  double temperature = 0.1;
  int patch_radius = 2;

  // voxel grid
  double voxel_edge = 0.2;
  double x_min = -30.0, x_max = 30.0;
  double y_min = -1.0, y_max = 3.0;
  double z_min = 2.0, z_max = 59.6;

  // pose objective
  double alpha = 0.85;
  double lambda_s = 0.001;
  double lambda_r = 1.0;
  int pyramid_levels = 4;
  int max_iterations = 500;

  // depth supervision loss
  double gamma = 2.0;
  double fg_weight = 5.0;
  double bg_weight = 1.0;

  // closed-form guards
  double eps_disparity = 1e-6;
  double eps_denominator = 1e-9;

  // fusion
  double sharpness = 1.0;
  double camera_height = 1.65;

  int threads = 0;

  DepthLevels depth_levels() const {
    return DepthLevels::from_range(d_min, d_max, levels);
  }
  VoxelGridSpec voxel_spec() const {
    return VoxelGridSpec{x_min, x_max, y_min, y_max, z_min, z_max, voxel_edge};
  }

  std::string to_json() const;
  static Config from_json(const std::string& text);
  static Config load(const std::string& path);
};

}  // namespace dfm
