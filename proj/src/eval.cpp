#include "dfm/eval.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace dfm {

namespace {

double lower_median(std::vector<double>& values) {
  assert(!values.empty());
  const size_t mid = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  return values[mid];
}

ErrorStats stats_from_errors(std::vector<double> errors) {
  ErrorStats stats;
  stats.count = errors.size();
  for (size_t i = 0; i < kDepthErrorThresholds.size(); ++i) {
    size_t above = 0;
    for (double e : errors) above += e > kDepthErrorThresholds[i];
    stats.ratio_above[i] = static_cast<double>(above) / errors.size();
  }
  stats.median = lower_median(errors);
  // Larger thresholds can only shed pixels.
  for (size_t i = 1; i < stats.ratio_above.size(); ++i)
    assert(stats.ratio_above[i] <= stats.ratio_above[i - 1]);
  return stats;
}

}  // namespace

DepthErrorReport depth_error_metrics(const DepthMap& pred, const DepthMap& gt,
                                     const Mask* foreground,
                                     const std::vector<ObjectBox>* objects) {
  if (!pred.depth.same_size(gt.depth))
    throw ImageSizeMismatch(pred.depth.width(), pred.depth.height(),
                            gt.depth.width(), gt.depth.height());
  const int width = gt.depth.width();
  const int height = gt.depth.height();

  DepthErrorReport report;
  std::vector<double> all_errors;
  std::vector<double> fg_errors;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!gt.valid.at(x, y)) continue;
      if (!pred.valid.at(x, y)) {
        ++report.prediction_missing;
        continue;
      }
      const double error = std::abs(double(pred.depth.at(x, y)) -
                                    double(gt.depth.at(x, y)));
      all_errors.push_back(error);
      if (foreground && foreground->at(x, y)) fg_errors.push_back(error);
    }
  }
  if (all_errors.empty()) throw NoValidPixels();
  report.all = stats_from_errors(std::move(all_errors));
  if (foreground && !fg_errors.empty())
    report.fg_pooled = stats_from_errors(std::move(fg_errors));

  if (objects && !objects->empty()) {
    ErrorStats averaged;
    int used = 0;
    for (const ObjectBox& box : *objects) {
      std::vector<double> object_errors;
      for (int y = std::max(0, box.top); y < std::min(height, box.bottom); ++y) {
        for (int x = std::max(0, box.left); x < std::min(width, box.right);
             ++x) {
          if (!gt.valid.at(x, y) || !pred.valid.at(x, y)) continue;
          object_errors.push_back(std::abs(double(pred.depth.at(x, y)) -
                                           double(gt.depth.at(x, y))));
        }
      }
      if (object_errors.size() < 5) {
        ++report.objects_ignored;
        continue;
      }
      const ErrorStats object_stats = stats_from_errors(std::move(object_errors));
      averaged.median += object_stats.median;
      for (size_t i = 0; i < averaged.ratio_above.size(); ++i)
        averaged.ratio_above[i] += object_stats.ratio_above[i];
      averaged.count += object_stats.count;
      ++used;
    }
    if (used > 0) {
      averaged.median /= used;
      for (auto& r : averaged.ratio_above) r /= used;
      report.fg_object_averaged = averaged;
      report.objects_used = used;
    }
  }
  return report;
}

}  // namespace dfm
