#include "dfm/synth.hpp"

#include <cstring>

#include "dfm/closed_form.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace dfm;
using dfm::testing::make_rng;
using dfm::testing::uniform;

namespace {

Scene noise_wall_scene(double z = 20.0) {
  Scene scene;
  scene.primitives.push_back(Scene::wall(z, Texture::noise(0.8, 7, 3)));
  return scene;
}

const Intrinsics kCam = Intrinsics::with_focal(220.0, 96.0, 60.0);
constexpr int kWidth = 192;
constexpr int kHeight = 120;

}  // namespace

TEST_CASE("empty scene renders nothing") {
  const Rendered out = render(Scene{}, kCam, kWidth, kHeight, RigidMotion());
  CHECK(out.valid.count() == 0);
}

TEST_CASE("fronto-parallel wall fills the view with constant depth") {
  const Rendered out =
      render(noise_wall_scene(20.0), kCam, kWidth, kHeight, RigidMotion());
  CHECK(out.valid.count() == size_t(kWidth) * kHeight);
  for (int y = 0; y < kHeight; y += 7)
    for (int x = 0; x < kWidth; x += 7)
      CHECK(out.depth.at(x, y) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("renders are deterministic") {
  const Scene scene = noise_wall_scene();
  RenderOptions opts;
  opts.threads = 2;
  const Rendered a = render(scene, kCam, kWidth, kHeight, RigidMotion(), opts);
  opts.threads = 1;
  const Rendered b = render(scene, kCam, kWidth, kHeight, RigidMotion(), opts);
  CHECK(std::memcmp(a.image.data(), b.image.data(),
                    a.image.size() * sizeof(float)) == 0);
  CHECK(std::memcmp(a.depth.data(), b.depth.data(),
                    a.depth.size() * sizeof(float)) == 0);
}

TEST_CASE("boxes occlude the background wall") {
  Scene scene = noise_wall_scene(30.0);
  BoxShape box;
  box.min_corner = Vec3(-2.0, -2.0, 10.0);
  box.max_corner = Vec3(2.0, 2.0, 12.0);
  scene.primitives.push_back(Primitive{box, Texture::constant(0.9)});

  const Rendered out = render(scene, kCam, kWidth, kHeight, RigidMotion());
  CHECK(out.depth.at(96, 60) == doctest::Approx(10.0));  // box front face
  CHECK(out.depth.at(4, 4) == doctest::Approx(30.0));    // wall
}

TEST_CASE("identical poses give identical correspondences") {
  const Scene scene = noise_wall_scene();
  const auto points = sample_correspondences(scene, kCam, kWidth, kHeight,
                                             RigidMotion(), RigidMotion(), 64);
  REQUIRE(points.size() == 64);
  for (const auto& pt : points) {
    CHECK(pt.corr.u1 == doctest::Approx(pt.corr.u2).epsilon(1e-12));
    CHECK(pt.corr.v1 == doctest::Approx(pt.corr.v2).epsilon(1e-12));
    CHECK(pt.depth_a == doctest::Approx(pt.depth_b));
  }
}

TEST_CASE("lateral baseline over a 5.4 m wall gives the textbook disparity") {
  // f = 220 px here, so a 0.54 m baseline at 5.4 m depth yields 22 px.
  Scene scene;
  scene.primitives.push_back(Scene::wall(5.4, Texture::noise(0.4, 3, 2)));
  const RigidMotion pose_a;  // camera a at the world origin
  const RigidMotion pose_b(UnitQuaternion(), Vec3(-0.54, 0.0, 0.0));

  const auto points =
      sample_correspondences(scene, kCam, kWidth, kHeight, pose_a, pose_b, 100);
  // pose_b translates world points by -0.54 in x, i.e. camera b sits 0.54 m
  // to the right of camera a, so u1 - u2 = f b / z > 0.
  const double expected = kCam.fx * 0.54 / 5.4;
  for (const auto& pt : points) {
    CHECK(std::abs((pt.corr.u1 - pt.corr.u2) - expected) < 1e-9);
    CHECK(std::abs(pt.corr.v1 - pt.corr.v2) < 1e-9);
    // Binocular route: disparity, focal and baseline reproduce the wall depth.
    CHECK(binocular_depth(kCam.fx, 0.54, pt.corr.u1 - pt.corr.u2) ==
          doctest::Approx(5.4));
  }
}

TEST_CASE("correspondences reproduce depth through the two-view closed form") {
  Scene scene = noise_wall_scene(14.0);
  scene.primitives.push_back(Scene::wall(26.0, Texture::noise(1.1, 9, 2)));
  auto rng = make_rng(101);
  int checked = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const RigidMotion pose_a;
    const RigidMotion pose_b(testing::random_rotation(rng, 0.03),
                             Vec3(uniform(rng, -0.6, 0.6),
                                  uniform(rng, -0.2, 0.2),
                                  uniform(rng, -1.5, 1.5)));
    // Frame-1 (view a) to frame-2 (view b) motion.
    const RigidMotion motion = compose(pose_b, invert(pose_a));
    std::vector<ScenePoint> points;
    try {
      points = sample_correspondences(scene, kCam, kWidth, kHeight, pose_a,
                                      pose_b, 80, 5 + trial);
    } catch (const InsufficientVisibility&) {
      continue;
    }
    for (const auto& pt : points) {
      TwoViewDepth out;
      try {
        out = general_two_view_depth(kCam, motion, pt.corr);
      } catch (const NoValidSolution&) {
        continue;
      }
      if (std::max(std::abs(out.denom_u), std::abs(out.denom_v)) < 1e-4)
        continue;
      CHECK(std::abs(out.d1 - pt.depth_a) / pt.depth_a < 1e-6);
      ++checked;
    }
  }
  CHECK(checked > 400);
}

TEST_CASE("photometric constancy holds for co-visible points") {
  const Scene scene = noise_wall_scene(12.0);
  const RigidMotion pose_a;
  const RigidMotion pose_b(UnitQuaternion::from_axis_angle(Vec3::UnitY(), 0.01),
                           Vec3(-0.3, 0.05, -0.4));
  const Rendered view_a = render(scene, kCam, kWidth, kHeight, pose_a);
  const Rendered view_b = render(scene, kCam, kWidth, kHeight, pose_b);
  const auto points =
      sample_correspondences(scene, kCam, kWidth, kHeight, pose_a, pose_b, 200);
  int inside = 0;
  for (const auto& pt : points) {
    const auto ia = sample_bilinear(view_a.image, pt.corr.u1, pt.corr.v1);
    const auto ib = sample_bilinear(view_b.image, pt.corr.u2, pt.corr.v2);
    if (!ia || !ib) continue;
    CHECK(std::abs(*ia - *ib) < 0.02);
    ++inside;
  }
  CHECK(inside > 150);
}

TEST_CASE("a camera facing away finds no correspondences") {
  const Scene scene = noise_wall_scene();
  const RigidMotion pose_b(UnitQuaternion::from_axis_angle(Vec3::UnitY(), M_PI),
                           Vec3::Zero());
  CHECK_THROWS_AS(sample_correspondences(scene, kCam, kWidth, kHeight,
                                         RigidMotion(), pose_b, 10),
                  InsufficientVisibility);
}

TEST_CASE("scene JSON round trips") {
  Scene scene = noise_wall_scene(18.0);
  BoxShape box;
  box.min_corner = Vec3(-3.0, -1.0, 8.0);
  box.max_corner = Vec3(-1.0, 1.0, 9.5);
  scene.primitives.push_back(Primitive{box, Texture::checker(0.5, 0.1, 0.9)});
  scene.primitives.push_back(Scene::wall(40.0, Texture::constant(0.7), 5.0, 4.0));

  const Scene back = scene_from_json(scene_to_json(scene));
  REQUIRE(back.primitives.size() == scene.primitives.size());
  const Rendered a = render(scene, kCam, kWidth, kHeight, RigidMotion());
  const Rendered b = render(back, kCam, kWidth, kHeight, RigidMotion());
  CHECK(std::memcmp(a.image.data(), b.image.data(),
                    a.image.size() * sizeof(float)) == 0);

  CHECK_THROWS_AS(scene_from_json("{"), MalformedLine);
  CHECK_THROWS_AS(scene_from_json(R"({"primitives":[{"shape":{"type":"pyramid"}}]})"),
                  MalformedLine);
}
