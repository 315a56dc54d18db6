#pragma once

#include <array>
#include <optional>
#include <vector>

#include "dfm/image.hpp"
#include "dfm/plane_sweep.hpp"

namespace dfm {

inline constexpr std::array<double, 4> kDepthErrorThresholds = {0.2, 0.4, 0.8,
                                                                1.6};

/// 2D box in pixel coordinates, [left, right) x [top, bottom).
struct ObjectBox {
  int left = 0, top = 0, right = 0, bottom = 0;

  bool contains(int x, int y) const {
    return x >= left && x < right && y >= top && y < bottom;
  }
};

struct ErrorStats {
  double median = 0.0;  // lower-middle order statistic for even counts
  std::array<double, 4> ratio_above{};  // fraction with |error| > threshold
  size_t count = 0;
};

struct DepthErrorReport {
  ErrorStats all;                       // every evaluated pixel
  std::optional<ErrorStats> fg_pooled;  // pixels inside the foreground mask
  // Per-object statistics averaged over objects, skipping objects with
  // fewer than 5 evaluated ground-truth points.
  std::optional<ErrorStats> fg_object_averaged;
  int objects_used = 0;
  int objects_ignored = 0;
  size_t prediction_missing = 0;  // gt-valid pixels without a prediction
};

/// Absolute-error statistics of pred against gt over pixels valid in both.
/// The foreground mask adds pooled fg stats; object boxes add the
/// object-averaged variant (median and ratios computed per object, then
/// averaged). Throws NoValidPixels when nothing can be evaluated.
DepthErrorReport depth_error_metrics(
    const DepthMap& pred, const DepthMap& gt, const Mask* foreground = nullptr,
    const std::vector<ObjectBox>* objects = nullptr);

}  // namespace dfm
