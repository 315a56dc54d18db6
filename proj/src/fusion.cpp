#include "dfm/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace dfm {

DepthDistribution mono_prior_distribution(const DepthMap& depth,
                                          const DepthLevels& levels,
                                          double sharpness) {
  if (!(sharpness > 0.0))
    throw std::invalid_argument("sharpness must be positive");
  const int width = depth.depth.width();
  const int height = depth.depth.height();
  const int count = levels.count();
  FrustumVolume vol(width, height, levels);
  Mask pixel_valid(width, height, false);

  const double support = sharpness * levels.delta();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!depth.valid.at(x, y)) continue;
      double d = depth.depth.at(x, y);
      if (!std::isfinite(d)) continue;
      d = std::clamp(d, levels.d_min(), levels.d_max());

      const double center = levels.fractional_bin(d);
      const int lo = std::max(0, int(std::ceil(center - sharpness)));
      const int hi = std::min(count - 1, int(std::floor(center + sharpness)));
      double norm = 0.0;
      for (int w = lo; w <= hi; ++w)
        norm += std::max(1.0 - std::abs(d - levels.depth(w)) / support, 0.0);
      if (norm <= 0.0) continue;
      for (int w = lo; w <= hi; ++w) {
        const double p =
            std::max(1.0 - std::abs(d - levels.depth(w)) / support, 0.0) / norm;
        if (p > 0.0) {
          vol.set_value(x, y, w, p);
          vol.set_valid(x, y, w, true);
        }
      }
      pixel_valid.set(x, y, true);
    }
  }
  return DepthDistribution(std::move(vol), std::move(pixel_valid));
}

DepthMap ground_plane_depth(const Intrinsics& cam, int width, int height,
                            const DepthLevels& levels, double camera_height_m) {
  DepthMap out{ImageBuffer(width, height, 0.0f), Mask(width, height, false)};
  for (int y = 0; y < height; ++y) {
    const double ray_y = (y - cam.cv) / cam.fy;
    if (ray_y <= 1e-9) continue;  // horizon and above
    const double z = camera_height_m / ray_y;
    const double clamped = std::clamp(z, levels.d_min(), levels.d_max());
    for (int x = 0; x < width; ++x) {
      out.depth.at(x, y) = static_cast<float>(clamped);
      out.valid.set(x, y, true);
    }
  }
  return out;
}

namespace {

// Shared peak-ratio confidence. better(a, b) says a is a better score than b.
template <typename Better>
FusionWeights peak_ratio_confidence(const FrustumVolume& vol,
                                    int exclusion_radius, bool lower_better,
                                    Better better) {
  const int width = vol.width();
  const int height = vol.height();
  const int count = vol.levels().count();
  FusionWeights out{ImageBuffer(width, height, 0.0f),
                    Mask(width, height, false)};
  constexpr double kEps = 1e-6;

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double* bins = vol.bins(x, y);
      const uint8_t* mask = vol.bin_mask(x, y);
      int best = -1;
      for (int w = 0; w < count; ++w) {
        if (!mask[w]) continue;
        if (best < 0 || better(bins[w], bins[best])) best = w;
      }
      if (best < 0) continue;
      out.valid.set(x, y, true);

      bool found = false;
      double runner = 0.0;
      for (int w = 0; w < count; ++w) {
        if (!mask[w] || std::abs(w - best) <= exclusion_radius) continue;
        if (!found || better(bins[w], runner)) {
          runner = bins[w];
          found = true;
        }
      }
      if (!found) continue;  // nothing outside the peak: no evidence, omega 0

      const double peak = bins[best];
      const double ratio = lower_better ? (peak + kEps) / (runner + kEps)
                                        : (runner + kEps) / (peak + kEps);
      out.omega.at(x, y) =
          static_cast<float>(std::clamp(1.0 - ratio, 0.0, 1.0));
    }
  }
  return out;
}

}  // namespace

FusionWeights stereo_confidence(const FrustumVolume& costs,
                                int exclusion_radius) {
  return peak_ratio_confidence(costs, exclusion_radius, true,
                               [](double a, double b) { return a < b; });
}

FusionWeights distribution_confidence(const DepthDistribution& dist,
                                      int exclusion_radius) {
  return peak_ratio_confidence(dist.volume(), exclusion_radius, false,
                               [](double a, double b) { return a > b; });
}

DepthDistribution fuse(const DepthDistribution& mono,
                       const DepthDistribution& stereo,
                       const FusionWeights& weights) {
  if (!mono.volume().same_grid(stereo.volume()))
    throw GridMismatch("mono vs stereo distribution");
  if (weights.omega.width() != mono.width() ||
      weights.omega.height() != mono.height())
    throw GridMismatch("fusion weights vs distributions");

  const int width = mono.width();
  const int height = mono.height();
  const int count = mono.levels().count();
  FrustumVolume vol(width, height, mono.levels());
  Mask pixel_valid(width, height, false);

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const bool has_mono = mono.pixel_valid(x, y);
      const bool has_stereo = stereo.pixel_valid(x, y);
      if (!has_mono && !has_stereo) continue;
      double omega = weights.valid.at(x, y) ? weights.omega.at(x, y) : 0.5;
      if (!has_stereo) omega = 0.0;
      if (!has_mono) omega = 1.0;

      const double* pm = mono.volume().bins(x, y);
      const double* ps = stereo.volume().bins(x, y);
      const uint8_t* mm = mono.volume().bin_mask(x, y);
      const uint8_t* ms = stereo.volume().bin_mask(x, y);
      double* dst = vol.bins(x, y);
      uint8_t* dst_mask = vol.bin_mask(x, y);

      double norm = 0.0;
      for (int w = 0; w < count; ++w) {
        const double ps_w = ms[w] ? ps[w] : 0.0;
        const double pm_w = mm[w] ? pm[w] : 0.0;
        const double p = omega * ps_w + (1.0 - omega) * pm_w;
        dst[w] = p;
        dst_mask[w] = (ms[w] || mm[w]) ? 1 : 0;
        norm += p;
      }
      if (norm <= 0.0) continue;
      // A per-pixel scalar omega already preserves normalization; this only
      // squeezes out float round-off.
      for (int w = 0; w < count; ++w) dst[w] /= norm;
      pixel_valid.set(x, y, true);
    }
  }
  return DepthDistribution(std::move(vol), std::move(pixel_valid));
}

DepthLossResult depth_ce_loss(const DepthDistribution& dist, const DepthMap& gt,
                              const DepthLossConfig& cfg,
                              const Mask* foreground) {
  if (gt.depth.width() != dist.width() || gt.depth.height() != dist.height())
    throw GridMismatch("ground truth vs distribution");
  if (!(cfg.fg_weight > 0.0) || !(cfg.bg_weight > 0.0) || cfg.gamma < 0.0)
    throw std::invalid_argument("depth loss needs positive weights, gamma >= 0");

  const int width = dist.width();
  const int height = dist.height();
  const auto& levels = dist.levels();
  const int count = levels.count();
  DepthLossResult out;
  out.per_pixel = ImageBuffer(width, height, 0.0f);
  out.counted = Mask(width, height, false);

  double total = 0.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!gt.valid.at(x, y) || !dist.pixel_valid(x, y)) continue;
      const double d_star = gt.depth.at(x, y);
      if (!std::isfinite(d_star)) continue;
      // Soft target support is one bin interval on each side.
      const double center = levels.fractional_bin(d_star);
      const int lo = std::max(0, int(std::ceil(center - 1.0)));
      const int hi = std::min(count - 1, int(std::floor(center + 1.0)));
      if (lo > hi) continue;  // ground truth outside the level range

      const double* bins = dist.volume().bins(x, y);
      double pixel_loss = 0.0;
      bool any_target = false;
      for (int w = lo; w <= hi; ++w) {
        const double target = std::max(
            1.0 - std::abs(d_star - levels.depth(w)) / levels.delta(), 0.0);
        if (target <= 0.0) continue;
        any_target = true;
        const double p = std::max(bins[w], 1e-30);
        const double focal = cfg.gamma == 0.0 ? 1.0 : std::pow(1.0 - p, cfg.gamma);
        pixel_loss += -target * focal * std::log(p);
      }
      if (!any_target) continue;

      const double weight = (foreground && foreground->at(x, y))
                                ? cfg.fg_weight
                                : cfg.bg_weight;
      const double contribution = weight * pixel_loss;
      out.per_pixel.at(x, y) = static_cast<float>(contribution);
      out.counted.set(x, y, true);
      total += contribution;
      ++out.valid_pixels;
    }
  }
  if (out.valid_pixels == 0) throw NoValidPixels();
  out.total = total / static_cast<double>(out.valid_pixels);
  return out;
}

}  // namespace dfm
