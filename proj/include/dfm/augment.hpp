#pragma once

#include <string>

#include "dfm/geometry.hpp"
#include "dfm/image.hpp"
#include "dfm/plane_sweep.hpp"

namespace dfm {

/// Geometric augmentation record: bilinear rescale, then crop, then optional
/// horizontal flip, in that fixed order. Storing the three parts separately
/// keeps the replay exact. crop_width == 0 means "no crop" (full scaled
/// image).
struct AugmentationSpec {
  bool flip_horizontal = false;
  double scale = 1.0;
  int crop_x = 0;
  int crop_y = 0;
  int crop_width = 0;
  int crop_height = 0;

  static AugmentationSpec identity() { return {}; }
  bool is_identity() const {
    return !flip_horizontal && scale == 1.0 && crop_x == 0 && crop_y == 0 &&
           crop_width == 0 && crop_height == 0;
  }

  /// JSON form: {"flip":bool,"scale":float,"crop":[x,y,w,h]}
  std::string to_json() const;
  static AugmentationSpec from_json(const std::string& text);
};

/// Concrete pixel maps for a given input size: scaled dimensions and the
/// resolved crop window. Throws on scale outside [0.5, 2] and on crops that
/// leave the scaled image (CropOutOfBounds).
struct ResolvedAugmentation {
  bool flip = false;
  double scale = 1.0;
  int crop_x = 0, crop_y = 0;
  int width = 0, height = 0;          // output (cropped) size
  int scaled_width = 0, scaled_height = 0;
};

ResolvedAugmentation resolve_augmentation(const AugmentationSpec& spec,
                                          int input_width, int input_height);

/// Rescale multiplies (fx, fy, cu, cv) by scale and the crop shifts the
/// principal point. Flip deliberately leaves intrinsics alone: a mirrored
/// camera is not a right-handed pinhole, so the flip lives in the grid maps.
Intrinsics augment_intrinsics(const Intrinsics& cam,
                              const ResolvedAugmentation& aug);
Intrinsics augment_intrinsics(const Intrinsics& cam,
                              const AugmentationSpec& spec, int input_width,
                              int input_height);

/// Bilinear rescale -> crop -> horizontal flip. Output size is the crop size.
ImageBuffer apply_augmentation(const ImageBuffer& img,
                               const AugmentationSpec& spec);

/// Warp map for augmented inputs. Each augmented frame-t stereo sample is
/// un-flipped, lifted with the scale/crop-manipulated intrinsics into the
/// canonical 3D space, moved by the ego-motion there, projected with the
/// canonical intrinsics, and the previous frame's augmentations are replayed
/// on the projection before sampling.
class CanonicalWarper final : public PixelWarper {
public:
  CanonicalWarper(const Intrinsics& canonical_cam, const RigidMotion& motion,
                  const ResolvedAugmentation& aug_t,
                  const ResolvedAugmentation& aug_prev);

  bool warp(double u, double v, double depth, double* u_prev,
            double* v_prev) const override;

private:
  Intrinsics cam_t_;       // canonical manipulated by aug_t's scale/crop
  Intrinsics cam_canon_;
  Mat3 rotation_;
  Vec3 translation_;
  ResolvedAugmentation aug_t_;
  ResolvedAugmentation aug_prev_;
};

struct WarpedSample {
  int u = 0, v = 0, w = 0;
  double u_prev = 0.0, v_prev = 0.0;
  bool valid = false;
};

/// Materialized canonical warp lattice over the augmented frame-t grid,
/// ordered by (v, u, w). Small-case/inspection companion of the streaming
/// cost-volume path.
std::vector<WarpedSample> canonical_warp_grid(const AugmentationSpec& aug_t,
                                              const AugmentationSpec& aug_prev,
                                              const Intrinsics& canonical_cam,
                                              const RigidMotion& motion,
                                              const DepthLevels& levels,
                                              int canonical_width,
                                              int canonical_height);

/// Cost volume over augmented inputs; img_t and img_prev must already carry
/// their augmentations. canonical_width/height are the un-augmented sizes.
FrustumVolume compute_cost_volume_augmented(
    const ImageBuffer& img_t, const ImageBuffer& img_prev,
    const Intrinsics& canonical_cam, const RigidMotion& motion,
    const DepthLevels& levels, const AugmentationSpec& aug_t,
    const AugmentationSpec& aug_prev, int canonical_width,
    int canonical_height, const CostVolumeOptions& options = {});

}  // namespace dfm
