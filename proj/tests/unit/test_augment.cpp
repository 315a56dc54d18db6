#include "dfm/augment.hpp"

#include <cstring>

#include "dfm/synth.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace dfm;
using dfm::testing::make_rng;
using dfm::testing::uniform;

namespace {

const Intrinsics kCam = Intrinsics::with_focal(220.0, 96.0, 60.0);
constexpr int kWidth = 192;
constexpr int kHeight = 120;

Scene layered_scene() {
  Scene scene;
  scene.primitives.push_back(Scene::wall(20.0, Texture::noise(0.9, 5, 3)));
  BoxShape box;
  box.min_corner = Vec3(-4.0, -2.5, 9.0);
  box.max_corner = Vec3(-0.5, 2.5, 11.0);
  scene.primitives.push_back(Primitive{box, Texture::noise(0.35, 21, 2)});
  return scene;
}

DepthMap sweep_depth(const ImageBuffer& img_t, const ImageBuffer& img_prev,
                     const Intrinsics& cam, const RigidMotion& motion,
                     const DepthLevels& levels, const AugmentationSpec& aug_t,
                     const AugmentationSpec& aug_prev) {
  const FrustumVolume vol = compute_cost_volume_augmented(
      img_t, img_prev, cam, motion, levels, aug_t, aug_prev, kWidth, kHeight);
  return distribution_to_depth(cost_to_distribution(vol, 0.1),
                               DepthMode::argmax);
}

}  // namespace

TEST_CASE("intrinsics manipulation") {
  SUBCASE("identity changes nothing") {
    const Intrinsics out =
        augment_intrinsics(kCam, AugmentationSpec::identity(), kWidth, kHeight);
    CHECK(out.fx == kCam.fx);
    CHECK(out.cu == kCam.cu);
  }
  SUBCASE("rescale multiplies focal and center") {
    AugmentationSpec spec;
    spec.scale = 2.0;
    const Intrinsics big = Intrinsics::with_focal(700.0, 600.0, 180.0);
    const Intrinsics out = augment_intrinsics(big, spec, 1240, 370);
    CHECK(out.fx == doctest::Approx(1400.0));
    CHECK(out.cu == doctest::Approx(1200.0));
    CHECK(out.cv == doctest::Approx(360.0));
  }
  SUBCASE("cropping the upper rows shifts the principal point") {
    AugmentationSpec spec;
    spec.crop_y = 56;
    spec.crop_width = kWidth;
    spec.crop_height = kHeight - 56;
    const Intrinsics out = augment_intrinsics(kCam, spec, kWidth, kHeight);
    CHECK(out.cv == doctest::Approx(kCam.cv - 56.0));
    CHECK(out.cu == doctest::Approx(kCam.cu));

    // Re-project a known point: its crop-frame pixel is the full-frame pixel
    // shifted by the crop origin.
    const Vec3 p(1.5, 2.0, 12.0);
    const Projection full = project(kCam, p);
    const Projection cropped = project(out, p);
    CHECK(cropped.pixel.v == doctest::Approx(full.pixel.v - 56.0));
    CHECK(cropped.pixel.u == doctest::Approx(full.pixel.u));
  }
  SUBCASE("flip leaves intrinsics alone by design") {
    AugmentationSpec spec;
    spec.flip_horizontal = true;
    const Intrinsics out = augment_intrinsics(kCam, spec, kWidth, kHeight);
    CHECK(out.fx == kCam.fx);
    CHECK(out.cu == kCam.cu);
  }
}

TEST_CASE("projection with augmented intrinsics equals augmenting the projection") {
  auto rng = make_rng(41);
  for (int i = 0; i < 200; ++i) {
    AugmentationSpec spec;
    spec.scale = uniform(rng, 0.8, 1.25);
    const ResolvedAugmentation resolved =
        resolve_augmentation(spec, kWidth, kHeight);
    spec.crop_x = int(uniform(rng, 0, 8));
    spec.crop_y = int(uniform(rng, 0, 8));
    spec.crop_width = resolved.scaled_width - spec.crop_x - int(uniform(rng, 0, 8));
    spec.crop_height = resolved.scaled_height - spec.crop_y - int(uniform(rng, 0, 8));

    const Vec3 p(uniform(rng, -4, 4), uniform(rng, -2, 2), uniform(rng, 6, 40));
    const Projection canonical = project(kCam, p);
    const Projection augmented =
        project(augment_intrinsics(kCam, spec, kWidth, kHeight), p);
    CHECK(std::abs(augmented.pixel.u -
                   (spec.scale * canonical.pixel.u - spec.crop_x)) < 1e-6);
    CHECK(std::abs(augmented.pixel.v -
                   (spec.scale * canonical.pixel.v - spec.crop_y)) < 1e-6);
  }
}

TEST_CASE("apply_augmentation") {
  const Rendered view =
      render(layered_scene(), kCam, kWidth, kHeight, RigidMotion());

  SUBCASE("identity spec is bit-identical") {
    const ImageBuffer out =
        apply_augmentation(view.image, AugmentationSpec::identity());
    CHECK(std::memcmp(out.data(), view.image.data(), out.size() * 4) == 0);
  }

  SUBCASE("flip twice restores the image exactly") {
    AugmentationSpec flip;
    flip.flip_horizontal = true;
    const ImageBuffer twice =
        apply_augmentation(apply_augmentation(view.image, flip), flip);
    CHECK(std::memcmp(twice.data(), view.image.data(), twice.size() * 4) == 0);
  }

  SUBCASE("scale 2 with origin crop is the upsampled top-left quadrant") {
    AugmentationSpec spec;
    spec.scale = 2.0;
    spec.crop_width = kWidth;
    spec.crop_height = kHeight;
    const ImageBuffer out = apply_augmentation(view.image, spec);
    REQUIRE(out.width() == kWidth);
    // Reference resampler: independent nested-loop bilinear at x/2, y/2.
    for (int y = 0; y < kHeight; y += 7) {
      for (int x = 0; x < kWidth; x += 7) {
        const double sx = x / 2.0;
        const double sy = y / 2.0;
        const int x0 = int(sx), y0 = int(sy);
        const double ax = sx - x0, ay = sy - y0;
        const int x1 = std::min(x0 + 1, kWidth - 1);
        const int y1 = std::min(y0 + 1, kHeight - 1);
        const double expected =
            (1 - ay) * ((1 - ax) * view.image.at(x0, y0) +
                        ax * view.image.at(x1, y0)) +
            ay * ((1 - ax) * view.image.at(x0, y1) + ax * view.image.at(x1, y1));
        CHECK(out.at(x, y) == doctest::Approx(expected).epsilon(1e-6));
      }
    }
  }

  SUBCASE("crops outside the scaled bounds are rejected") {
    AugmentationSpec spec;
    spec.crop_x = 10;
    spec.crop_width = kWidth;
    spec.crop_height = kHeight;
    CHECK_THROWS_AS(apply_augmentation(view.image, spec), CropOutOfBounds);
    AugmentationSpec bad_scale;
    bad_scale.scale = 3.0;
    CHECK_THROWS_AS(apply_augmentation(view.image, bad_scale),
                    std::invalid_argument);
  }
}

TEST_CASE("augmentation spec JSON round trip") {
  AugmentationSpec spec;
  spec.flip_horizontal = true;
  spec.scale = 1.05;
  spec.crop_x = 3;
  spec.crop_y = 11;
  spec.crop_width = 180;
  spec.crop_height = 100;
  const AugmentationSpec back = AugmentationSpec::from_json(spec.to_json());
  CHECK(back.flip_horizontal == spec.flip_horizontal);
  CHECK(back.scale == doctest::Approx(spec.scale));
  CHECK(back.crop_x == spec.crop_x);
  CHECK(back.crop_height == spec.crop_height);
  CHECK_THROWS_AS(AugmentationSpec::from_json("{\"crop\":[1,2]}"),
                  MalformedLine);
}

TEST_CASE("flipped pair with identity motion maps pixels onto themselves") {
  AugmentationSpec flip;
  flip.flip_horizontal = true;
  const DepthLevels levels = DepthLevels::from_range(4.0, 30.0, 6);
  const auto grid = canonical_warp_grid(flip, flip, kCam, RigidMotion(), levels,
                                        48, 32);
  for (const auto& sample : grid) {
    REQUIRE(sample.valid);
    CHECK(sample.u_prev == doctest::Approx(double(sample.u)).epsilon(1e-12));
    CHECK(sample.v_prev == doctest::Approx(double(sample.v)).epsilon(1e-12));
  }
}

TEST_CASE("flip equivariance of the full depth pipeline") {
  const Scene scene = layered_scene();
  const RigidMotion pose_t;
  const RigidMotion pose_prev(UnitQuaternion::from_axis_angle(Vec3::UnitY(), 0.004),
                              Vec3(-0.5, 0.02, -0.6));
  const Rendered frame_t = render(scene, kCam, kWidth, kHeight, pose_t);
  const Rendered frame_prev = render(scene, kCam, kWidth, kHeight, pose_prev);
  const RigidMotion motion = compose(pose_prev, invert(pose_t));
  const DepthLevels levels = DepthLevels::from_range(2.0, 59.6, 96);

  AugmentationSpec flip;
  flip.flip_horizontal = true;
  const ImageBuffer t_flipped = apply_augmentation(frame_t.image, flip);
  const ImageBuffer prev_flipped = apply_augmentation(frame_prev.image, flip);

  const DepthMap plain =
      sweep_depth(frame_t.image, frame_prev.image, kCam, motion, levels,
                  AugmentationSpec::identity(), AugmentationSpec::identity());
  const DepthMap flipped =
      sweep_depth(t_flipped, prev_flipped, kCam, motion, levels, flip, flip);

  size_t both = 0, close = 0;
  for (int y = 0; y < kHeight; ++y) {
    for (int x = 0; x < kWidth; ++x) {
      const int mx = kWidth - 1 - x;
      if (!plain.valid.at(x, y) || !flipped.valid.at(mx, y)) continue;
      ++both;
      if (std::abs(plain.depth.at(x, y) - flipped.depth.at(mx, y)) <
          levels.delta())
        ++close;
    }
  }
  REQUIRE(both > size_t(0.7 * kWidth * kHeight));
  CHECK(double(close) / double(both) >= 0.99);
}

TEST_CASE("rescale equivariance of the full depth pipeline") {
  // Resampling tolerance is judged on a smooth fronto-parallel scene; depth
  // discontinuities would mix ordinary matching noise into the comparison.
  Scene scene;
  scene.primitives.push_back(Scene::wall(20.0, Texture::noise(0.9, 5, 3)));
  const RigidMotion pose_t;
  const RigidMotion pose_prev(UnitQuaternion(), Vec3(-0.5, 0.0, -0.4));
  const Rendered frame_t = render(scene, kCam, kWidth, kHeight, pose_t);
  const Rendered frame_prev = render(scene, kCam, kWidth, kHeight, pose_prev);
  const RigidMotion motion = compose(pose_prev, invert(pose_t));
  const DepthLevels levels = DepthLevels::from_range(2.0, 59.6, 96);

  AugmentationSpec rescale;
  rescale.scale = 1.05;
  const ImageBuffer t_scaled = apply_augmentation(frame_t.image, rescale);
  const ImageBuffer prev_scaled = apply_augmentation(frame_prev.image, rescale);

  const DepthMap plain =
      sweep_depth(frame_t.image, frame_prev.image, kCam, motion, levels,
                  AugmentationSpec::identity(), AugmentationSpec::identity());
  const DepthMap scaled = sweep_depth(t_scaled, prev_scaled, kCam, motion,
                                      levels, rescale, rescale);

  // Sample the augmented-frame depth back at canonical pixels.
  size_t both = 0, close = 0;
  for (int y = 0; y < kHeight; ++y) {
    for (int x = 0; x < kWidth; ++x) {
      if (!plain.valid.at(x, y)) continue;
      const double sx = 1.05 * x;
      const double sy = 1.05 * y;
      const int nx = int(std::lround(sx));
      const int ny = int(std::lround(sy));
      if (nx < 0 || nx >= scaled.depth.width() || ny < 0 ||
          ny >= scaled.depth.height() || !scaled.valid.at(nx, ny))
        continue;
      ++both;
      if (std::abs(plain.depth.at(x, y) - scaled.depth.at(nx, ny)) <
          levels.delta())
        ++close;
    }
  }
  REQUIRE(both > size_t(0.6 * kWidth * kHeight));
  CHECK(double(close) / double(both) >= 0.95);
}
