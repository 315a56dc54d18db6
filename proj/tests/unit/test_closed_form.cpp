#include "dfm/closed_form.hpp"

#include "doctest.h"
#include "test_helpers.hpp"

using namespace dfm;
using dfm::testing::make_rng;
using dfm::testing::random_motion;
using dfm::testing::uniform;

namespace {

// Projection oracle: place a 3D point in frame 1, move it through the
// frame-1 -> frame-2 motion, and project both ends.
Correspondence project_pair(const Intrinsics& cam, const RigidMotion& motion,
                            const Vec3& p1, Vec3* p2_out = nullptr) {
  const Projection a = project(cam, p1);
  const Vec3 p2 = motion.apply(p1);
  const Projection b = project(cam, p2);
  if (p2_out) *p2_out = p2;
  return Correspondence{a.pixel.u, a.pixel.v, b.pixel.u, b.pixel.v};
}

}  // namespace

TEST_CASE("binocular depth follows f b / d") {
  CHECK(binocular_depth(700.0, 0.54, 70.0) == doctest::Approx(5.4));
  CHECK(binocular_depth(721.5, 0.54, 7.215) == doctest::Approx(54.0));
  CHECK_THROWS_AS(binocular_depth(700.0, 0.54, 0.0), ZeroDisparity);
  CHECK_THROWS_AS(binocular_depth(700.0, 0.54, 1e-9), ZeroDisparity);
}

TEST_CASE("parallel two-view depth reduces to binocular when dD = 0") {
  const Intrinsics cam = testing::kitti_like_camera();
  const ParallelDepth out =
      parallel_two_view_depth(cam, 670.0, 600.0, 0.54, 0.0);
  CHECK(out.depth == doctest::Approx(5.4));
  CHECK_FALSE(out.non_physical);
  CHECK_THROWS_AS(parallel_two_view_depth(cam, 600.0, 600.0, 0.54, 0.0),
                  ZeroDisparity);
}

TEST_CASE("parallel two-view depth on a synthetic 54 m point") {
  // Forward-only motion: the camera advances 5.4 m, dx = 0, dD = 5.4. A point
  // at 54 m whose frame-2 pixel sits 70 px right of center fixes x via the
  // second projection; both pixels then come from projection alone.
  const Intrinsics cam = testing::kitti_like_camera();
  const double depth_1 = 54.0;
  const double dd = 5.4;
  const double depth_2 = depth_1 - dd;
  const double x = 0.1 * depth_2;  // (u2 - cu)/f = 0.1
  const Projection p1 = project(cam, Vec3(x, 0.0, depth_1));
  const Projection p2 = project(cam, Vec3(x, 0.0, depth_2));
  CHECK(p2.pixel.u == doctest::Approx(670.0));

  const ParallelDepth out =
      parallel_two_view_depth(cam, p1.pixel.u, p2.pixel.u, 0.0, dd);
  CHECK(std::abs(out.depth - depth_1) < 1e-6);
}

TEST_CASE("parallel two-view depth flags non-physical results") {
  const Intrinsics cam = testing::kitti_like_camera();
  const ParallelDepth out =
      parallel_two_view_depth(cam, 600.0, 670.0, 0.54, 0.0);
  CHECK(out.depth < 0.0);
  CHECK(out.non_physical);
}

TEST_CASE("effective baseline forms the reference 0.54 m value") {
  const Intrinsics cam = testing::kitti_like_camera();
  // dD = 5.4 m with u2 - cu = 70 at f = 700 forms the 0.54 m baseline, as
  // does dD = 2.7 m with u2 - cu = 140.
  CHECK(std::abs(effective_baseline(0.0, 5.4, 670.0, cam) - (-0.54)) < 1e-15);
  CHECK(std::abs(effective_baseline(0.0, 2.7, 740.0, cam) - (-0.54)) < 1e-15);
  CHECK(effective_baseline(0.37, 0.0, 1100.0, cam) == doctest::Approx(0.37));
}

TEST_CASE("general two-view depth reduces to the parallel form when R = I") {
  // With R = I the appendix solution is algebraically the parallel formula
  // under t = (-dx, *, -dD); the identity holds for any correspondence.
  const Intrinsics cam = testing::kitti_like_camera();
  auto rng = make_rng(21);
  for (int i = 0; i < 1000; ++i) {
    const double dx = uniform(rng, -2.0, 2.0);
    const double dd = uniform(rng, -6.0, 6.0);
    const Correspondence corr{uniform(rng, 0.0, 1200.0), uniform(rng, 0.0, 360.0),
                              uniform(rng, 0.0, 1200.0), uniform(rng, 0.0, 360.0)};
    if (std::abs(corr.u1 - corr.u2) < 1e-3) continue;
    const RigidMotion motion(UnitQuaternion(), Vec3(-dx, 0.0, -dd));
    const double parallel =
        parallel_two_view_depth(cam, corr.u1, corr.u2, dx, dd).depth;
    const TwoViewDepth general = general_two_view_depth(cam, motion, corr);
    REQUIRE(general.d1_from_u.has_value());
    CHECK(std::abs(*general.d1_from_u - parallel) <=
          1e-9 * std::max(1.0, std::abs(parallel)));
  }
}

TEST_CASE("general two-view depth recovers synthetic ground truth") {
  const Intrinsics cam = testing::kitti_like_camera();
  auto rng = make_rng(33);
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    const RigidMotion motion = random_motion(rng, 5.0 * M_PI / 180.0, 2.0);
    const double z = uniform(rng, 4.0, 50.0);
    const Vec3 p1(uniform(rng, -0.7, 0.7) * z, uniform(rng, -0.25, 0.25) * z, z);
    Vec3 p2;
    const Correspondence corr = project_pair(cam, motion, p1, &p2);
    if (!(p2.z() > 0.5)) continue;

    TwoViewDepth out;
    try {
      out = general_two_view_depth(cam, motion, corr);
    } catch (const NoValidSolution&) {
      continue;
    }
    if (std::abs(out.denom_u) > 1e-4) {
      REQUIRE(out.d1_from_u.has_value());
      CHECK(std::abs(*out.d1_from_u - z) / z < 1e-6);
    }
    if (std::abs(out.denom_v) > 1e-4) {
      REQUIRE(out.d1_from_v.has_value());
      CHECK(std::abs(*out.d1_from_v - z) / z < 1e-6);
    }
    // Where both forms exist they agree on clean correspondences.
    if (out.d1_from_u && out.d1_from_v && std::abs(out.denom_u) > 1e-4 &&
        std::abs(out.denom_v) > 1e-4) {
      CHECK(std::abs(*out.d1_from_u - *out.d1_from_v) / out.d1 < 1e-6);
    }
    // D2 consistency: reprojecting the reconstructed point through the
    // motion lands on (u2, v2).
    if (std::abs(out.denom_u) > 1e-4 && std::abs(out.denom_v) > 1e-4) {
      const Vec3 reconstructed = backproject(cam, Pixel{corr.u1, corr.v1}, out.d1);
      const Vec3 in_frame2 = motion.apply(reconstructed);
      if (in_frame2.z() > 0.0) {
        const Projection reproj = project(cam, in_frame2);
        CHECK(std::abs(reproj.pixel.u - corr.u2) < 1e-6);
        CHECK(std::abs(reproj.pixel.v - corr.v2) < 1e-6);
        CHECK(std::abs(out.d2 - in_frame2.z()) / in_frame2.z() < 1e-6);
      }
    }
    ++checked;
  }
  CHECK(checked > 800);
}

TEST_CASE("degenerate denominators are detected and reported") {
  const Intrinsics cam = testing::kitti_like_camera();
  auto rng = make_rng(55);
  const RigidMotion motion = random_motion(rng, 0.05, 1.0);
  const Correspondence base{800.0, 200.0, 0.0, 0.0};
  const ABCoefficients ab = ab_coefficients(cam, motion, base);

  // Solve ((u2-cu)/f) a3 - a1 = 0 for u2: only the u form degenerates.
  Correspondence corr = base;
  corr.u2 = cam.cu + cam.fx * ab.a1 / ab.a3;
  corr.v2 = 150.0;
  CHECK_THROWS_AS(two_view_depth_from_u(cam, motion, corr),
                  DegenerateDenominator);
  const TwoViewDepth out = general_two_view_depth(cam, motion, corr);
  CHECK_FALSE(out.d1_from_u.has_value());
  REQUIRE(out.d1_from_v.has_value());

  // Degenerate in both coordinates: no usable solution remains.
  corr.v2 = cam.cv + cam.fy * ab.a2 / ab.a3;
  CHECK_THROWS_AS(general_two_view_depth(cam, motion, corr), NoValidSolution);
  CHECK_THROWS_AS(two_view_depth_from_v(cam, motion, corr),
                  DegenerateDenominator);
}

TEST_CASE("moving object centers add their translation to the motion") {
  const Intrinsics cam = testing::kitti_like_camera();

  SUBCASE("zero object translation collapses to the static formula") {
    auto rng = make_rng(77);
    const RigidMotion motion = random_motion(rng, 0.05, 1.5);
    const Vec3 p1(2.0, -0.5, 18.0);
    const Correspondence corr = project_pair(cam, motion, p1);
    const TwoViewDepth moving =
        moving_center_depth(cam, motion, Vec3::Zero(), corr);
    const TwoViewDepth still = general_two_view_depth(cam, motion, corr);
    CHECK(moving.d1 == still.d1);
    CHECK(moving.d2 == still.d2);
  }

  SUBCASE("static camera, object drives 3 m toward it") {
    const Vec3 object_translation(0.0, 0.0, -3.0);
    const Vec3 center_1(1.0, 0.2, 10.0);
    const Vec3 center_2 = center_1 + object_translation;
    const Projection a = project(cam, center_1);
    const Projection b = project(cam, center_2);
    const Correspondence corr{a.pixel.u, a.pixel.v, b.pixel.u, b.pixel.v};
    const TwoViewDepth out =
        moving_center_depth(cam, RigidMotion(), object_translation, corr);
    CHECK(std::abs(out.d1 - 10.0) < 1e-6);
  }

  SUBCASE("ego motion and object motion combined") {
    auto rng = make_rng(78);
    for (int i = 0; i < 50; ++i) {
      const RigidMotion ego = random_motion(rng, 0.04, 1.0);
      const Vec3 object_world(uniform(rng, -1.0, 1.0), 0.0,
                              uniform(rng, -2.0, 2.0));
      const Vec3 center_1(uniform(rng, -4.0, 4.0), uniform(rng, -1.0, 1.0),
                          uniform(rng, 8.0, 30.0));
      // Frame 1 doubles as the world frame; the object translation lands in
      // frame-2 coordinates through the ego rotation.
      const Vec3 t_obj = ego.rotation.rotate(object_world);
      const Vec3 center_2 = ego.apply(center_1) + t_obj;
      if (!(center_2.z() > 0.5)) continue;
      const Projection a = project(cam, center_1);
      const Projection b = project(cam, center_2);
      const Correspondence corr{a.pixel.u, a.pixel.v, b.pixel.u, b.pixel.v};
      TwoViewDepth out;
      try {
        out = moving_center_depth(cam, ego, t_obj, corr);
      } catch (const NoValidSolution&) {
        continue;
      }
      if (std::max(std::abs(out.denom_u), std::abs(out.denom_v)) < 1e-4)
        continue;
      CHECK(std::abs(out.d1 - center_1.z()) / center_1.z() < 1e-6);
    }
  }
}

TEST_CASE("reduction chain: parallel collapses to binocular over random input") {
  const Intrinsics cam = testing::kitti_like_camera();
  auto rng = make_rng(91);
  for (int i = 0; i < 1000; ++i) {
    const double u1 = uniform(rng, 0.0, 1200.0);
    const double u2 = uniform(rng, 0.0, 1200.0);
    const double baseline = uniform(rng, 0.05, 2.0);
    if (std::abs(u1 - u2) < 1e-3) continue;
    const double para = parallel_two_view_depth(cam, u1, u2, baseline, 0.0).depth;
    const double bino = binocular_depth(cam.fx, baseline, u1 - u2);
    CHECK(std::abs(para - bino) <= 1e-9 * std::abs(bino));
  }
}
