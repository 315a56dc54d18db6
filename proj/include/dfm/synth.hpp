#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "dfm/closed_form.hpp"
#include "dfm/geometry.hpp"
#include "dfm/image.hpp"
#include "dfm/plane_sweep.hpp"

namespace dfm {

/// Procedural surface intensity, evaluated at the 3D world hit point so that
/// co-visible points read the same value from every view (Lambertian).
struct Texture {
  enum class Kind { constant, checker, noise };
  Kind kind = Kind::constant;
  double value = 0.5;    // constant level / noise midpoint
  double scale = 1.0;    // feature size in meters
  double contrast = 0.6; // peak-to-peak amplitude for checker and noise
  uint64_t seed = 0;     // noise lattice seed
  int octaves = 3;

  static Texture constant(double value);
  static Texture checker(double scale, double lo = 0.2, double hi = 0.8);
  static Texture noise(double scale, uint64_t seed, int octaves = 3);

  double eval(const Vec3& world_point) const;
};

/// Plane through `point` with unit `normal`; bounded to a rectangle of
/// half-extents in the plane's local axes unless half_u <= 0 (infinite).
struct PlaneShape {
  Vec3 point = Vec3::Zero();
  Vec3 normal = -Vec3::UnitZ();
  double half_u = 0.0;
  double half_v = 0.0;
};

/// Axis-aligned box between min_corner and max_corner.
struct BoxShape {
  Vec3 min_corner = Vec3::Zero();
  Vec3 max_corner = Vec3::Ones();
};

struct Primitive {
  std::variant<PlaneShape, BoxShape> shape;
  Texture texture;
};

struct Scene {
  std::vector<Primitive> primitives;

  /// Fronto-parallel textured plane at world depth z (normal facing -z).
  static Primitive wall(double z, const Texture& texture, double half_x = 0.0,
                        double half_y = 0.0);
};

struct RenderOptions {
  bool supersample = false;  // 2x2 intensity supersampling; depth stays exact
  int threads = 0;
};

struct Rendered {
  ImageBuffer image;
  ImageBuffer depth;  // camera-frame z of the nearest hit
  Mask valid;         // false where no primitive is hit
};

/// Ray-casts one pixel-center ray per pixel. `world_to_camera` is the camera
/// pose; intensities come from each primitive's texture at the world hit
/// point, so photometric constancy holds across views by construction.
Rendered render(const Scene& scene, const Intrinsics& cam, int width,
                int height, const RigidMotion& world_to_camera,
                const RenderOptions& options = {});

/// Nearest-hit ray cast for a single continuous pixel; returns false on miss.
bool cast_pixel(const Scene& scene, const Intrinsics& cam,
                const RigidMotion& world_to_camera, double u, double v,
                Vec3* world_point, double* depth);

struct ScenePoint {
  Correspondence corr;   // (u1,v1) in view a, (u2,v2) in view b, exact
  double depth_a = 0.0;  // camera-frame depth in each view
  double depth_b = 0.0;
  Vec3 world = Vec3::Zero();
};

/// Draws points visible in both views by casting random view-a rays and
/// depth-testing the reprojection in view b. Projections are exact (no pixel
/// rounding). Throws InsufficientVisibility when fewer than n co-visible
/// points are found within 10n attempts.
std::vector<ScenePoint> sample_correspondences(
    const Scene& scene, const Intrinsics& cam, int width, int height,
    const RigidMotion& pose_a, const RigidMotion& pose_b, int n,
    uint64_t seed = 1);

/// Scene description accepted by the synth CLI:
/// {"primitives":[{"shape":{"type":"plane","point":[x,y,z],
///   "normal":[x,y,z],"extent":[half_u,half_v]},
///   "texture":{"type":"noise","scale":0.5,"seed":7,"octaves":3}}, ...]}
/// Shapes: plane (extent optional), box {"min":[...],"max":[...]}.
/// Textures: constant {"value":v}, checker {"scale":s,"lo":l,"hi":h},
/// noise {"scale":s,"seed":n,"octaves":k}.
Scene scene_from_json(const std::string& text);
std::string scene_to_json(const Scene& scene);

}  // namespace dfm
