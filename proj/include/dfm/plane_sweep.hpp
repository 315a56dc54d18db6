#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfm/geometry.hpp"
#include "dfm/image.hpp"

namespace dfm {

/// Uniform depth discretization d(w) = w * delta + d_min, w in [0, count).
/// Endpoints are inclusive: from_range picks delta = (d_max - d_min)/(count-1).
class DepthLevels {
public:
  DepthLevels(double d_min, double delta, int count);
  static DepthLevels from_range(double d_min, double d_max, int count);

  double d_min() const { return d_min_; }
  double delta() const { return delta_; }
  int count() const { return count_; }
  double d_max() const { return depth(count_ - 1); }

  double depth(int bin) const { return bin * delta_ + d_min_; }
  /// Continuous bin coordinate of a metric depth (not clamped).
  double fractional_bin(double depth_m) const {
    return (depth_m - d_min_) / delta_;
  }
  bool contains(double depth_m) const {
    return depth_m >= d_min_ && depth_m <= d_max();
  }

  bool operator==(const DepthLevels& o) const {
    return d_min_ == o.d_min_ && delta_ == o.delta_ && count_ == o.count_;
  }

private:
  double d_min_;
  double delta_;
  int count_;
};

/// Per-pixel-per-bin grid of values over the frame-t image plane. Bins are
/// contiguous per pixel: index = (y * width + x) * count + w.
class FrustumVolume {
public:
  FrustumVolume(int width, int height, const DepthLevels& levels,
                double fill = 0.0, bool valid = false);

  int width() const { return width_; }
  int height() const { return height_; }
  const DepthLevels& levels() const { return levels_; }

  size_t index(int x, int y, int w) const {
    return (static_cast<size_t>(y) * width_ + x) * levels_.count() + w;
  }
  double value(int x, int y, int w) const { return values_[index(x, y, w)]; }
  void set_value(int x, int y, int w, double v) { values_[index(x, y, w)] = v; }
  bool valid(int x, int y, int w) const { return mask_[index(x, y, w)] != 0; }
  void set_valid(int x, int y, int w, bool v) {
    mask_[index(x, y, w)] = v ? 1 : 0;
  }

  double* bins(int x, int y) { return values_.data() + index(x, y, 0); }
  const double* bins(int x, int y) const {
    return values_.data() + index(x, y, 0);
  }
  uint8_t* bin_mask(int x, int y) { return mask_.data() + index(x, y, 0); }
  const uint8_t* bin_mask(int x, int y) const {
    return mask_.data() + index(x, y, 0);
  }

  bool same_grid(const FrustumVolume& o) const {
    return width_ == o.width_ && height_ == o.height_ && levels_ == o.levels_;
  }
  /// Fraction of (pixel, bin) samples that are valid.
  double valid_fraction() const;

  const std::vector<double>& values() const { return values_; }
  const std::vector<uint8_t>& mask() const { return mask_; }
  std::vector<double>& values() { return values_; }
  std::vector<uint8_t>& mask() { return mask_; }

private:
  int width_;
  int height_;
  DepthLevels levels_;
  std::vector<double> values_;
  std::vector<uint8_t> mask_;
};

/// Per-pixel categorical distribution over depth bins. Valid pixels sum to 1
/// across their valid bins; bins outside the mask carry probability 0.
class DepthDistribution {
public:
  DepthDistribution(FrustumVolume probabilities, Mask pixel_valid)
      : vol_(std::move(probabilities)), pixel_valid_(std::move(pixel_valid)) {}

  int width() const { return vol_.width(); }
  int height() const { return vol_.height(); }
  const DepthLevels& levels() const { return vol_.levels(); }
  const FrustumVolume& volume() const { return vol_; }
  FrustumVolume& volume() { return vol_; }

  bool pixel_valid(int x, int y) const { return pixel_valid_.at(x, y); }
  const Mask& pixel_mask() const { return pixel_valid_; }
  double probability(int x, int y, int w) const { return vol_.value(x, y, w); }

private:
  FrustumVolume vol_;
  Mask pixel_valid_;
};

struct FrustumSample {
  int u = 0, v = 0, w = 0;
  double depth = 0.0;
};

/// Materialized (u, v, d) lattice, ordered by (v, u, w). Intended for
/// inspection and small cases; the volume builder streams the same lattice
/// without materializing it.
std::vector<FrustumSample> build_frustum_grid(int width, int height,
                                              const DepthLevels& levels);

enum class CostKind { zncc, sad, ssd };

std::string to_string(CostKind kind);
CostKind cost_kind_from_string(const std::string& name);

struct CostVolumeOptions {
  CostKind kind = CostKind::zncc;
  int patch_radius = 2;  // 5x5 windows
  int threads = 0;       // 0 = hardware concurrency
};

/// Plane-sweep matching cost volume anchored at the frame-t grid. For each
/// depth bin the previous image is warped into the frame-t grid through
/// `motion` (frame-t -> frame-(t-dt) camera coordinates) and compared over
/// (2r+1)^2 windows. A (pixel, bin) sample is valid when the window stays
/// inside frame t and every warped sample in it lands inside the previous
/// image in front of the camera. ZNCC costs are 1 - ZNCC in [0, 2]; SAD/SSD
/// are windowed means, all with 0 as the perfect-match value.
FrustumVolume compute_cost_volume(const ImageBuffer& img_t,
                                  const ImageBuffer& img_prev,
                                  const Intrinsics& cam,
                                  const RigidMotion& motion,
                                  const DepthLevels& levels,
                                  const CostVolumeOptions& options = {});

/// Internal entry point shared with the canonical-augmentation path: the
/// warp is any map (u, v, depth) -> previous-image pixel. Returns false for
/// samples that must be masked (behind camera).
class PixelWarper {
public:
  virtual ~PixelWarper() = default;
  virtual bool warp(double u, double v, double depth, double* u_prev,
                    double* v_prev) const = 0;
};

FrustumVolume compute_cost_volume_warped(const ImageBuffer& img_t,
                                         const ImageBuffer& img_prev,
                                         const PixelWarper& warper,
                                         const DepthLevels& levels,
                                         const CostVolumeOptions& options = {});

/// Softmax of -cost/temperature per pixel over valid bins. Pixels with no
/// valid bin are flagged invalid. Takes the volume by value so callers can
/// move in and reuse the allocation.
DepthDistribution cost_to_distribution(FrustumVolume costs, double temperature,
                                       int threads = 0);

enum class DepthMode { argmax, expectation };

struct DepthMap {
  ImageBuffer depth;
  Mask valid;
};

/// Scalar depth from a distribution. Argmax mode picks d(w*) with 3-point
/// parabolic sub-bin refinement (disable via refine=false); expectation mode
/// returns sum_w p(w) d(w).
DepthMap distribution_to_depth(const DepthDistribution& dist, DepthMode mode,
                               bool refine = true);

}  // namespace dfm
