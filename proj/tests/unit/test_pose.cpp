#include "dfm/pose.hpp"

#include "dfm/synth.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace dfm;
using dfm::testing::make_rng;
using dfm::testing::uniform;

namespace {

const Intrinsics kCam = Intrinsics::with_focal(200.0, 80.0, 48.0);
constexpr int kWidth = 160;
constexpr int kHeight = 96;

// Smooth, large-feature texture: pose tests probe geometry and calculus, not
// matching robustness.
Scene smooth_scene() {
  Scene scene;
  scene.primitives.push_back(Scene::wall(15.0, Texture::noise(2.5, 13, 1)));
  BoxShape slab;
  slab.min_corner = Vec3(-6.0, -4.0, 8.0);
  slab.max_corner = Vec3(-1.0, 4.0, 9.0);
  scene.primitives.push_back(Primitive{slab, Texture::noise(1.8, 29, 1)});
  return scene;
}

struct Pair {
  Rendered frame_t;
  Rendered frame_prev;
  RigidMotion motion;  // frame-t -> frame-prev camera coordinates
};

Pair make_pair(const Scene& scene, const RigidMotion& pose_prev) {
  const RigidMotion pose_t;
  Pair out{render(scene, kCam, kWidth, kHeight, pose_t),
           render(scene, kCam, kWidth, kHeight, pose_prev),
           compose(pose_prev, invert(pose_t))};
  return out;
}

DepthMap gt_depth(const Rendered& frame) {
  return DepthMap{frame.depth, frame.valid};
}

double rotation_angle_deg(const UnitQuaternion& a, const UnitQuaternion& b) {
  const Mat3 rel = a.matrix().transpose() * b.matrix();
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

}  // namespace

TEST_CASE("synthesize_view with identity motion returns the previous image") {
  const Pair pair = make_pair(smooth_scene(), RigidMotion());
  const SynthesizedView synth = synthesize_view(
      pair.frame_prev.image, gt_depth(pair.frame_t), kCam, RigidMotion());
  for (int y = 0; y < kHeight; y += 5)
    for (int x = 0; x < kWidth; x += 5) {
      REQUIRE(synth.valid.at(x, y));
      CHECK(synth.image.at(x, y) ==
            doctest::Approx(pair.frame_prev.image.at(x, y)).epsilon(1e-6));
    }
}

TEST_CASE("synthesize_view reconstructs frame t from the previous frame") {
  const RigidMotion pose_prev(
      UnitQuaternion::from_axis_angle(Vec3::UnitY(), 0.01),
      Vec3(-0.25, 0.03, -0.35));
  const Pair pair = make_pair(smooth_scene(), pose_prev);
  const SynthesizedView synth = synthesize_view(
      pair.frame_prev.image, gt_depth(pair.frame_t), kCam, pair.motion);

  size_t valid = 0, close = 0;
  for (int y = 0; y < kHeight; ++y)
    for (int x = 0; x < kWidth; ++x) {
      if (!synth.valid.at(x, y)) continue;
      ++valid;
      if (std::abs(synth.image.at(x, y) - pair.frame_t.image.at(x, y)) < 0.02)
        ++close;
    }
  REQUIRE(valid > size_t(0.8 * kWidth * kHeight));
  CHECK(double(close) / double(valid) >= 0.95);
}

TEST_CASE("synthesizing forward then backward returns the original image") {
  const RigidMotion pose_prev(
      UnitQuaternion::from_axis_angle(Vec3::UnitY(), 0.008),
      Vec3(-0.2, 0.02, -0.3));
  const Pair pair = make_pair(smooth_scene(), pose_prev);

  // Frame t re-rendered from the previous frame, then pushed back again.
  const SynthesizedView forward = synthesize_view(
      pair.frame_prev.image, gt_depth(pair.frame_t), kCam, pair.motion);
  const SynthesizedView back = synthesize_view(
      forward.image, gt_depth(pair.frame_prev), kCam, invert(pair.motion));

  double sum = 0.0;
  size_t n = 0;
  for (int y = 0; y < kHeight; ++y) {
    for (int x = 0; x < kWidth; ++x) {
      if (!back.valid.at(x, y) || !forward.valid.at(x, y)) continue;
      sum += std::abs(back.image.at(x, y) - pair.frame_prev.image.at(x, y));
      ++n;
    }
  }
  REQUIRE(n > size_t(0.6 * kWidth * kHeight));
  CHECK(sum / double(n) < 0.01);
}

TEST_CASE("synthesize_view masks a view rotated behind the camera") {
  const Pair pair = make_pair(smooth_scene(), RigidMotion());
  const RigidMotion half_turn(
      UnitQuaternion::from_axis_angle(Vec3::UnitY(), M_PI), Vec3::Zero());
  const SynthesizedView synth = synthesize_view(
      pair.frame_prev.image, gt_depth(pair.frame_t), kCam, half_turn);
  CHECK(synth.valid.count() == 0);
}

TEST_CASE("ssim properties") {
  const Pair pair = make_pair(smooth_scene(), RigidMotion());
  const ImageBuffer& img = pair.frame_t.image;

  SUBCASE("self similarity is one everywhere") {
    const ImageBuffer map = ssim_map(img, img);
    for (int y = 0; y < kHeight; ++y)
      for (int x = 0; x < kWidth; ++x)
        CHECK(map.at(x, y) == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("range and symmetry") {
    auto rng = make_rng(3);
    ImageBuffer noise_a(kWidth, kHeight), noise_b(kWidth, kHeight);
    for (int y = 0; y < kHeight; ++y)
      for (int x = 0; x < kWidth; ++x) {
        noise_a.at(x, y) = static_cast<float>(uniform(rng, 0, 1));
        noise_b.at(x, y) = static_cast<float>(uniform(rng, 0, 1));
      }
    const ImageBuffer ab = ssim_map(noise_a, noise_b);
    const ImageBuffer ba = ssim_map(noise_b, noise_a);
    double mean = 0.0;
    for (int y = 0; y < kHeight; ++y)
      for (int x = 0; x < kWidth; ++x) {
        CHECK(ab.at(x, y) >= -1.0 - 1e-9);
        CHECK(ab.at(x, y) <= 1.0 + 1e-9);
        CHECK(std::abs(double(ab.at(x, y)) - double(ba.at(x, y))) < 1e-12);
        mean += ab.at(x, y);
      }
    mean /= double(kWidth) * kHeight;
    // Independent noise: no structural agreement.
    CHECK(std::abs(mean) < 0.1);
  }

  SUBCASE("inverted intensities anti-correlate") {
    // Needs windows whose variance beats the C2 stabilizer, so use a
    // high-contrast random image rather than the smooth rendered one.
    auto rng = make_rng(5);
    ImageBuffer busy(kWidth, kHeight), inverted(kWidth, kHeight);
    for (int y = 0; y < kHeight; ++y)
      for (int x = 0; x < kWidth; ++x) {
        busy.at(x, y) = static_cast<float>(uniform(rng, 0, 1));
        inverted.at(x, y) = 1.0f - busy.at(x, y);
      }
    const ImageBuffer map = ssim_map(busy, inverted);
    double mean = 0.0;
    for (int y = 0; y < kHeight; ++y)
      for (int x = 0; x < kWidth; ++x) mean += map.at(x, y);
    CHECK(mean / (double(kWidth) * kHeight) < 0.0);
  }

  SUBCASE("size mismatch is rejected") {
    CHECK_THROWS_AS(ssim_map(img, ImageBuffer(3, 3)), ImageSizeMismatch);
  }
}

TEST_CASE("photometric loss identities") {
  const Pair pair = make_pair(smooth_scene(), RigidMotion());
  const ImageBuffer& img = pair.frame_t.image;
  const Mask all(kWidth, kHeight, true);

  CHECK(photometric_loss(img, img, all, 0.85) == doctest::Approx(0.0));

  // alpha = 0 is the plain mean L1 error.
  ImageBuffer shifted(kWidth, kHeight);
  for (int y = 0; y < kHeight; ++y)
    for (int x = 0; x < kWidth; ++x)
      shifted.at(x, y) = std::min(1.0f, img.at(x, y) + 0.05f);
  double l1 = 0.0;
  for (int y = 0; y < kHeight; ++y)
    for (int x = 0; x < kWidth; ++x)
      l1 += std::abs(img.at(x, y) - shifted.at(x, y));
  l1 /= double(kWidth) * kHeight;
  CHECK(photometric_loss(img, shifted, all, 0.0) == doctest::Approx(l1));

  // alpha = 1 is half the mean SSIM deficit.
  const ImageBuffer ssim = ssim_map(img, shifted);
  double deficit = 0.0;
  for (int y = 0; y < kHeight; ++y)
    for (int x = 0; x < kWidth; ++x) deficit += 0.5 * (1.0 - ssim.at(x, y));
  deficit /= double(kWidth) * kHeight;
  CHECK(photometric_loss(img, shifted, all, 1.0) ==
        doctest::Approx(deficit).epsilon(1e-9));

  CHECK_THROWS_AS(photometric_loss(img, shifted, Mask(kWidth, kHeight, false), 0.85),
                  EmptyMask);
}

TEST_CASE("smoothness loss") {
  const int w = 32, h = 20;

  SUBCASE("constant depth costs nothing") {
    const DepthMap depth{ImageBuffer(w, h, 12.0f), Mask(w, h, true)};
    const ImageBuffer img(w, h, 0.5f);
    CHECK(smoothness_loss(depth, img) == doctest::Approx(0.0));
  }

  SUBCASE("a linear ramp on a flat image costs the normalized slope") {
    DepthMap depth{ImageBuffer(w, h, 0.0f), Mask(w, h, true)};
    const double slope = 0.25;
    double sum = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        depth.depth.at(x, y) = static_cast<float>(10.0 + slope * x);
        sum += depth.depth.at(x, y);
      }
    const double mean = sum / (w * h);
    const ImageBuffer img(w, h, 0.5f);
    // Forward x-differences of float-rounded values, normalized by the mean.
    double expected = 0.0;
    size_t n = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x + 1 < w; ++x) {
        expected += std::abs(double(depth.depth.at(x + 1, y)) -
                             double(depth.depth.at(x, y))) / mean;
        ++n;
      }
    expected /= double(n);
    CHECK(smoothness_loss(depth, img, true) ==
          doctest::Approx(expected).epsilon(1e-9));
    // Raw mode skips the mean normalization.
    CHECK(smoothness_loss(depth, img, false) ==
          doctest::Approx(expected * mean).epsilon(1e-7));
  }

  SUBCASE("depth edges aligned with image edges cost less") {
    DepthMap step{ImageBuffer(w, h, 10.0f), Mask(w, h, true)};
    for (int y = 0; y < h; ++y)
      for (int x = w / 2; x < w; ++x) step.depth.at(x, y) = 14.0f;
    ImageBuffer flat(w, h, 0.5f);
    ImageBuffer edged(w, h, 0.1f);
    for (int y = 0; y < h; ++y)
      for (int x = w / 2; x < w; ++x) edged.at(x, y) = 0.9f;
    CHECK(smoothness_loss(step, edged) < smoothness_loss(step, flat));
  }
}

TEST_CASE("supervised pose loss handles the quaternion double cover") {
  auto rng = make_rng(17);
  const RigidMotion gt = testing::random_motion(rng, 1.0, 3.0);
  const Eigen::Vector4d q_gt(gt.rotation.w(), gt.rotation.x(), gt.rotation.y(),
                             gt.rotation.z());

  CHECK(supervised_pose_loss(gt.translation, 2.5 * q_gt, gt, 1.0) ==
        doctest::Approx(0.0));
  // -q is the same rotation; the double cover keeps the loss at zero.
  CHECK(supervised_pose_loss(gt.translation, -q_gt, gt, 7.0) ==
        doctest::Approx(0.0));
  CHECK(supervised_pose_loss(gt.translation + Vec3(0.1, 0, 0), q_gt, gt, 3.0) ==
        doctest::Approx(0.1));
  CHECK_THROWS_AS(
      supervised_pose_loss(gt.translation, Eigen::Vector4d::Zero(), gt, 1.0),
      ZeroQuaternion);
}

TEST_CASE("photometric objective gradient matches central differences") {
  // The finite-difference probe steps across bilinear interpolation cells;
  // a long-wavelength texture keeps those curvature kinks small relative to
  // the first-order image response.
  Scene scene;
  scene.primitives.push_back(Scene::wall(15.0, Texture::noise(12.0, 13, 1)));
  const RigidMotion pose_prev(
      UnitQuaternion::from_axis_angle(Vec3(0.2, 1.0, 0.1).normalized(), 0.015),
      Vec3(-0.3, 0.05, -0.4));
  const Pair pair = make_pair(scene, pose_prev);
  PoseLossConfig cfg;
  const PhotometricObjective objective(pair.frame_t.image, pair.frame_prev.image,
                                       gt_depth(pair.frame_t), kCam, cfg);

  auto rng = make_rng(71);
  int tested = 0;
  for (int i = 0; i < 40 && tested < 20; ++i) {
    const UnitQuaternion rotation = testing::random_rotation(rng, 0.02);
    const double tx = uniform(rng, -0.4, 0.4);
    const double ty = uniform(rng, -0.1, 0.1);
    const double tz = uniform(rng, -0.5, 0.5);
    const RigidMotion T(rotation, Vec3(tx, ty, tz));
    if (objective.overlap_fraction(T) < 0.5) continue;
    const Mask mask = objective.valid_mask(T);
    const Vec6 analytic = objective.gradient(T, mask);
    const Vec6 fd = objective.gradient_fd(T, mask, 1e-5);
    const double rel = (analytic - fd).norm() / std::max(fd.norm(), 1e-30);
    CHECK(rel < 1e-3);
    ++tested;
  }
  CHECK(tested == 20);
}

TEST_CASE("optimizer stays put when initialized at the ground truth") {
  // The objective's minimum sits within interpolation bias of the true pose
  // (the synthesized view is bilinear-resampled, frame t is not), so "stays
  // put" means millimeters, not ulps.
  const RigidMotion pose_prev(
      UnitQuaternion::from_axis_angle(Vec3::UnitY(), 0.01),
      Vec3(-0.2, 0.0, -0.3));
  const Pair pair = make_pair(smooth_scene(), pose_prev);
  PoseLossConfig cfg;
  const PoseEstimate out =
      optimize_pose(pair.frame_t.image, pair.frame_prev.image,
                    gt_depth(pair.frame_t), kCam, cfg, pair.motion);
  CHECK((out.motion.translation - pair.motion.translation).norm() < 5e-3);
  CHECK(rotation_angle_deg(out.motion.rotation, pair.motion.rotation) < 0.05);
}

TEST_CASE("optimizer recovers a 0.3 m / 2 degree motion from identity") {
  const Vec3 axis = Vec3(0.1, 1.0, 0.05).normalized();
  const RigidMotion pose_prev(
      UnitQuaternion::from_axis_angle(axis, 2.0 * M_PI / 180.0),
      Vec3(-0.18, 0.04, -0.23));  // |t| ~ 0.295 m
  const Pair pair = make_pair(smooth_scene(), pose_prev);

  PoseLossConfig cfg;
  const PoseEstimate out =
      optimize_pose(pair.frame_t.image, pair.frame_prev.image,
                    gt_depth(pair.frame_t), kCam, cfg, RigidMotion());

  const double t_true = pair.motion.translation.norm();
  const double t_err =
      (out.motion.translation - pair.motion.translation).norm() / t_true;
  CHECK(t_err < 0.01);
  CHECK(rotation_angle_deg(out.motion.rotation, pair.motion.rotation) < 0.1);
  CHECK(out.diagnostics.gradient_check_residual >= 0.0);
  CHECK(out.diagnostics.gradient_check_residual < 1e-3);
}

TEST_CASE("identical frames converge to the identity motion") {
  const Pair pair = make_pair(smooth_scene(), RigidMotion());
  PoseLossConfig cfg;
  cfg.max_iterations = 100;
  const PoseEstimate out =
      optimize_pose(pair.frame_t.image, pair.frame_t.image,
                    gt_depth(pair.frame_t), kCam, cfg, RigidMotion());
  CHECK(out.motion.translation.norm() < 1e-4);
  CHECK(rotation_angle_deg(out.motion.rotation, UnitQuaternion()) < 1e-3);
}

TEST_CASE("recovered translation scales with the depth map") {
  const RigidMotion pose_prev(
      UnitQuaternion::from_axis_angle(Vec3::UnitY(), 0.012),
      Vec3(-0.2, 0.02, -0.25));
  const Pair pair = make_pair(smooth_scene(), pose_prev);

  PoseLossConfig cfg;
  const PoseEstimate base =
      optimize_pose(pair.frame_t.image, pair.frame_prev.image,
                    gt_depth(pair.frame_t), kCam, cfg, RigidMotion());

  const double scale = 2.0;
  DepthMap scaled = gt_depth(pair.frame_t);
  for (int y = 0; y < kHeight; ++y)
    for (int x = 0; x < kWidth; ++x)
      scaled.depth.at(x, y) *= static_cast<float>(scale);
  const PoseEstimate doubled =
      optimize_pose(pair.frame_t.image, pair.frame_prev.image, scaled, kCam,
                    cfg, RigidMotion());

  CHECK((doubled.motion.translation - scale * base.motion.translation).norm() /
            (scale * base.motion.translation.norm()) <
        0.01);
}

TEST_CASE("optimizer failure modes") {
  const Pair pair = make_pair(smooth_scene(), RigidMotion());

  SUBCASE("insufficient overlap") {
    // Looking 90 degrees away leaves nothing to match.
    const RigidMotion away(
        UnitQuaternion::from_axis_angle(Vec3::UnitY(), M_PI / 2), Vec3::Zero());
    CHECK_THROWS_AS(optimize_pose(pair.frame_t.image, pair.frame_prev.image,
                                  gt_depth(pair.frame_t), kCam, {}, away),
                    DegenerateOverlap);
  }

  SUBCASE("non-finite image data diverges") {
    ImageBuffer poisoned = pair.frame_prev.image;
    for (int y = 0; y < kHeight; ++y)
      for (int x = 0; x < kWidth; ++x)
        poisoned.at(x, y) = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(optimize_pose(pair.frame_t.image, poisoned,
                                  gt_depth(pair.frame_t), kCam, {},
                                  RigidMotion()),
                    Diverged);
  }
}

TEST_CASE("auto-masking drops pixels that match better unwarped") {
  // Identical frames: at any nonzero motion the warped error exceeds the
  // unwarped one, so auto-masking strips (nearly) everything; at identity the
  // two errors tie and nothing is dropped.
  const Pair pair = make_pair(smooth_scene(), RigidMotion());
  PoseLossConfig cfg;
  cfg.auto_mask = true;
  const PhotometricObjective objective(pair.frame_t.image, pair.frame_t.image,
                                       gt_depth(pair.frame_t), kCam, cfg);
  const Mask at_identity = objective.valid_mask(RigidMotion());
  const Mask at_offset = objective.valid_mask(
      RigidMotion(UnitQuaternion(), Vec3(0.1, 0.0, 0.0)));
  CHECK(at_identity.count() > size_t(0.9 * kWidth * kHeight));
  CHECK(at_offset.count() < at_identity.count() / 4);
}

TEST_CASE("numeric-gradient optimizer mode agrees on an easy case") {
  // Mixed lateral/forward motion: the slab parallax separates translation
  // from yaw, which a purely lateral push would leave near-ambiguous.
  const RigidMotion pose_prev(UnitQuaternion(), Vec3(-0.12, 0.0, -0.2));
  const Pair pair = make_pair(smooth_scene(), pose_prev);
  PoseLossConfig cfg;
  cfg.analytic_gradient = false;
  cfg.check_gradient = false;
  const PoseEstimate out =
      optimize_pose(pair.frame_t.image, pair.frame_prev.image,
                    gt_depth(pair.frame_t), kCam, cfg, RigidMotion());
  CHECK((out.motion.translation - pair.motion.translation).norm() /
            pair.motion.translation.norm() <
        0.02);
}
