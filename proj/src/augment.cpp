#include "dfm/augment.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace dfm {

std::string AugmentationSpec::to_json() const {
  nlohmann::json j = {{"flip", flip_horizontal},
                      {"scale", scale},
                      {"crop", {crop_x, crop_y, crop_width, crop_height}}};
  return j.dump();
}

AugmentationSpec AugmentationSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedLine(0, std::string("bad augmentation JSON: ") + e.what());
  }
  AugmentationSpec spec;
  spec.flip_horizontal = j.value("flip", false);
  spec.scale = j.value("scale", 1.0);
  if (j.contains("crop")) {
    const auto& crop = j.at("crop");
    if (!crop.is_array() || crop.size() != 4)
      throw MalformedLine(0, "augmentation crop must be [x,y,w,h]");
    spec.crop_x = crop[0].get<int>();
    spec.crop_y = crop[1].get<int>();
    spec.crop_width = crop[2].get<int>();
    spec.crop_height = crop[3].get<int>();
  }
  return spec;
}

ResolvedAugmentation resolve_augmentation(const AugmentationSpec& spec,
                                          int input_width, int input_height) {
  if (!(spec.scale >= 0.5 && spec.scale <= 2.0))
    throw std::invalid_argument("augmentation scale must be in [0.5, 2.0]");
  ResolvedAugmentation out;
  out.flip = spec.flip_horizontal;
  out.scale = spec.scale;
  out.scaled_width = std::max(1, int(std::lround(spec.scale * input_width)));
  out.scaled_height = std::max(1, int(std::lround(spec.scale * input_height)));
  out.crop_x = spec.crop_x;
  out.crop_y = spec.crop_y;
  out.width = spec.crop_width > 0 ? spec.crop_width : out.scaled_width;
  out.height = spec.crop_height > 0 ? spec.crop_height : out.scaled_height;
  if (out.crop_x < 0 || out.crop_y < 0 ||
      out.crop_x + out.width > out.scaled_width ||
      out.crop_y + out.height > out.scaled_height) {
    throw CropOutOfBounds(std::to_string(out.crop_x) + "," +
                          std::to_string(out.crop_y) + " size " +
                          std::to_string(out.width) + "x" +
                          std::to_string(out.height) + " in " +
                          std::to_string(out.scaled_width) + "x" +
                          std::to_string(out.scaled_height));
  }
  return out;
}

Intrinsics augment_intrinsics(const Intrinsics& cam,
                              const ResolvedAugmentation& aug) {
  return Intrinsics(cam.fx * aug.scale, cam.fy * aug.scale,
                    cam.cu * aug.scale - aug.crop_x,
                    cam.cv * aug.scale - aug.crop_y);
}

Intrinsics augment_intrinsics(const Intrinsics& cam,
                              const AugmentationSpec& spec, int input_width,
                              int input_height) {
  return augment_intrinsics(cam,
                            resolve_augmentation(spec, input_width, input_height));
}

ImageBuffer apply_augmentation(const ImageBuffer& img,
                               const AugmentationSpec& spec) {
  const ResolvedAugmentation aug =
      resolve_augmentation(spec, img.width(), img.height());

  // Rescale. Identity scale keeps the pixels bit-identical because bilinear
  // sampling at integer coordinates is exact.
  ImageBuffer scaled(aug.scaled_width, aug.scaled_height);
  for (int y = 0; y < aug.scaled_height; ++y) {
    const double sy = std::min(double(img.height() - 1), y / aug.scale);
    for (int x = 0; x < aug.scaled_width; ++x) {
      const double sx = std::min(double(img.width() - 1), x / aug.scale);
      scaled.at(x, y) = static_cast<float>(*sample_bilinear(img, sx, sy));
    }
  }

  ImageBuffer out(aug.width, aug.height);
  for (int y = 0; y < aug.height; ++y) {
    for (int x = 0; x < aug.width; ++x) {
      const int src_x = aug.crop_x + (aug.flip ? aug.width - 1 - x : x);
      out.at(x, y) = scaled.at(src_x, aug.crop_y + y);
    }
  }
  return out;
}

CanonicalWarper::CanonicalWarper(const Intrinsics& canonical_cam,
                                 const RigidMotion& motion,
                                 const ResolvedAugmentation& aug_t,
                                 const ResolvedAugmentation& aug_prev)
    : cam_t_(augment_intrinsics(canonical_cam, aug_t)),
      cam_canon_(canonical_cam),
      rotation_(motion.rotation_matrix()),
      translation_(motion.translation),
      aug_t_(aug_t),
      aug_prev_(aug_prev) {}

bool CanonicalWarper::warp(double u, double v, double depth, double* u_prev,
                           double* v_prev) const {
  // Un-flip in the augmented frame-t grid; scale/crop stay folded into the
  // manipulated intrinsics used for the lift.
  const double uu = aug_t_.flip ? (aug_t_.width - 1.0) - u : u;
  const double rx = (uu - cam_t_.cu) / cam_t_.fx;
  const double ry = (v - cam_t_.cv) / cam_t_.fy;
  const double x =
      depth * (rotation_(0, 0) * rx + rotation_(0, 1) * ry + rotation_(0, 2)) +
      translation_.x();
  const double y =
      depth * (rotation_(1, 0) * rx + rotation_(1, 1) * ry + rotation_(1, 2)) +
      translation_.y();
  const double z =
      depth * (rotation_(2, 0) * rx + rotation_(2, 1) * ry + rotation_(2, 2)) +
      translation_.z();
  if (!(z > 0.0)) return false;

  // Project into the canonical previous frame, then replay that frame's
  // augmentations on the projected coordinates.
  double up = cam_canon_.fx * x / z + cam_canon_.cu;
  double vp = cam_canon_.fy * y / z + cam_canon_.cv;
  up = aug_prev_.scale * up - aug_prev_.crop_x;
  vp = aug_prev_.scale * vp - aug_prev_.crop_y;
  if (aug_prev_.flip) up = (aug_prev_.width - 1.0) - up;
  *u_prev = up;
  *v_prev = vp;
  return true;
}

std::vector<WarpedSample> canonical_warp_grid(const AugmentationSpec& aug_t,
                                              const AugmentationSpec& aug_prev,
                                              const Intrinsics& canonical_cam,
                                              const RigidMotion& motion,
                                              const DepthLevels& levels,
                                              int canonical_width,
                                              int canonical_height) {
  const ResolvedAugmentation rt =
      resolve_augmentation(aug_t, canonical_width, canonical_height);
  const ResolvedAugmentation rp =
      resolve_augmentation(aug_prev, canonical_width, canonical_height);
  const CanonicalWarper warper(canonical_cam, motion, rt, rp);

  std::vector<WarpedSample> grid;
  grid.reserve(static_cast<size_t>(rt.width) * rt.height * levels.count());
  for (int v = 0; v < rt.height; ++v) {
    for (int u = 0; u < rt.width; ++u) {
      for (int w = 0; w < levels.count(); ++w) {
        WarpedSample s;
        s.u = u;
        s.v = v;
        s.w = w;
        s.valid = warper.warp(u, v, levels.depth(w), &s.u_prev, &s.v_prev);
        if (s.valid) {
          // Round-off from the lift/project round trip can push boundary
          // samples a few ulp outside; snap those back instead of dropping.
          constexpr double kEdge = 1e-9;
          if (s.u_prev >= -kEdge && s.u_prev <= rp.width - 1.0 + kEdge &&
              s.v_prev >= -kEdge && s.v_prev <= rp.height - 1.0 + kEdge) {
            s.u_prev = std::clamp(s.u_prev, 0.0, rp.width - 1.0);
            s.v_prev = std::clamp(s.v_prev, 0.0, rp.height - 1.0);
          } else {
            s.valid = false;
          }
        }
        grid.push_back(s);
      }
    }
  }
  return grid;
}

FrustumVolume compute_cost_volume_augmented(
    const ImageBuffer& img_t, const ImageBuffer& img_prev,
    const Intrinsics& canonical_cam, const RigidMotion& motion,
    const DepthLevels& levels, const AugmentationSpec& aug_t,
    const AugmentationSpec& aug_prev, int canonical_width,
    int canonical_height, const CostVolumeOptions& options) {
  const ResolvedAugmentation rt =
      resolve_augmentation(aug_t, canonical_width, canonical_height);
  const ResolvedAugmentation rp =
      resolve_augmentation(aug_prev, canonical_width, canonical_height);
  if (img_t.width() != rt.width || img_t.height() != rt.height)
    throw ImageSizeMismatch(img_t.width(), img_t.height(), rt.width, rt.height);
  if (img_prev.width() != rp.width || img_prev.height() != rp.height)
    throw ImageSizeMismatch(img_prev.width(), img_prev.height(), rp.width,
                            rp.height);
  const CanonicalWarper warper(canonical_cam, motion, rt, rp);
  return compute_cost_volume_warped(img_t, img_prev, warper, levels, options);
}

}  // namespace dfm
