#pragma once

#include "dfm/image.hpp"
#include "dfm/plane_sweep.hpp"

namespace dfm {

/// Per-pixel fusion weight in [0, 1], broadcast over depth bins: 1 trusts the
/// stereo distribution, 0 the monocular prior.
struct FusionWeights {
  ImageBuffer omega;
  Mask valid;
};

struct DepthLossConfig {
  double fg_weight = 5.0;
  double bg_weight = 1.0;
  double gamma = 2.0;
};

/// Triangular soft assignment of a scalar depth map onto the bins:
/// p(w) ~ max(1 - |d - d(w)| / (sharpness * delta), 0), normalized per pixel.
/// Depths outside the level range are clamped onto the nearest end bin.
DepthDistribution mono_prior_distribution(const DepthMap& depth,
                                          const DepthLevels& levels,
                                          double sharpness = 1.0);

/// Simple monocular stand-in: depth of a horizontal ground plane a fixed
/// camera height below the optical center (y axis pointing down). Pixels at
/// or above the horizon are invalid; depths clamp to the level range.
DepthMap ground_plane_depth(const Intrinsics& cam, int width, int height,
                            const DepthLevels& levels,
                            double camera_height_m = 1.65);

/// Match distinctiveness in [0, 1] from the cost curve per pixel: one minus
/// the ratio of the best cost to the best cost found outside a small bin
/// neighborhood of the minimum. Flat curves (static camera, textureless
/// patches) score ~0.
FusionWeights stereo_confidence(const FrustumVolume& costs,
                                int exclusion_radius = 2);

/// Same peak-ratio idea on a probability volume (higher is better).
FusionWeights distribution_confidence(const DepthDistribution& dist,
                                      int exclusion_radius = 2);

/// P_fuse = omega * P_stereo + (1 - omega) * P_mono per bin, renormalized per
/// pixel. Pixels covered by only one input copy that input; the weight mask
/// falls back to omega = 0.5 where invalid.
DepthDistribution fuse(const DepthDistribution& mono,
                       const DepthDistribution& stereo,
                       const FusionWeights& weights);

struct DepthLossResult {
  double total = 0.0;
  size_t valid_pixels = 0;
  ImageBuffer per_pixel;  // weighted per-pixel contribution
  Mask counted;
};

/// Cross-entropy against the triangular soft target of the ground-truth
/// depth, with focal modulation (1-p)^gamma and per-pixel fg/bg weights,
/// averaged over the pixels with usable ground truth. gamma = 0 with unit
/// weights is the plain cross entropy.
DepthLossResult depth_ce_loss(const DepthDistribution& dist, const DepthMap& gt,
                              const DepthLossConfig& cfg = {},
                              const Mask* foreground = nullptr);

}  // namespace dfm
