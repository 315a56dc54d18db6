#include "dfm/synth.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "json.hpp"

namespace dfm {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double lattice_value(int64_t ix, int64_t iy, int64_t iz, uint64_t seed) {
  uint64_t h = seed;
  h = splitmix64(h ^ static_cast<uint64_t>(ix));
  h = splitmix64(h ^ static_cast<uint64_t>(iy));
  h = splitmix64(h ^ static_cast<uint64_t>(iz));
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);  // [0,1)
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Smoothstep-interpolated 3D value noise in [0,1].
double value_noise(const Vec3& p, uint64_t seed) {
  const double fx = std::floor(p.x()), fy = std::floor(p.y()),
               fz = std::floor(p.z());
  const int64_t ix = static_cast<int64_t>(fx), iy = static_cast<int64_t>(fy),
                iz = static_cast<int64_t>(fz);
  const double tx = smoothstep(p.x() - fx);
  const double ty = smoothstep(p.y() - fy);
  const double tz = smoothstep(p.z() - fz);
  double corners[2][2][2];
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx)
        corners[dz][dy][dx] = lattice_value(ix + dx, iy + dy, iz + dz, seed);
  auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
  const double c00 = lerp(corners[0][0][0], corners[0][0][1], tx);
  const double c01 = lerp(corners[0][1][0], corners[0][1][1], tx);
  const double c10 = lerp(corners[1][0][0], corners[1][0][1], tx);
  const double c11 = lerp(corners[1][1][0], corners[1][1][1], tx);
  return lerp(lerp(c00, c01, ty), lerp(c10, c11, ty), tz);
}

}  // namespace

Texture Texture::constant(double value) {
  Texture t;
  t.kind = Kind::constant;
  t.value = value;
  return t;
}

Texture Texture::checker(double scale, double lo, double hi) {
  Texture t;
  t.kind = Kind::checker;
  t.scale = scale;
  t.value = 0.5 * (lo + hi);
  t.contrast = hi - lo;
  return t;
}

Texture Texture::noise(double scale, uint64_t seed, int octaves) {
  Texture t;
  t.kind = Kind::noise;
  t.scale = scale;
  t.seed = seed;
  t.octaves = octaves;
  return t;
}

double Texture::eval(const Vec3& p) const {
  switch (kind) {
    case Kind::constant:
      return value;
    case Kind::checker: {
      const int64_t parity =
          (static_cast<int64_t>(std::floor(p.x() / scale)) +
           static_cast<int64_t>(std::floor(p.y() / scale)) +
           static_cast<int64_t>(std::floor(p.z() / scale))) & 1;
      return value + (parity ? 0.5 : -0.5) * contrast;
    }
    case Kind::noise: {
      double sum = 0.0, amp = 1.0, freq = 1.0 / scale, norm = 0.0;
      for (int o = 0; o < octaves; ++o) {
        sum += amp * value_noise(p * freq, seed + 0x9e37u * o);
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
      }
      const double centered = sum / norm - 0.5;
      return std::clamp(value + contrast * centered, 0.0, 1.0);
    }
  }
  return value;
}

Primitive Scene::wall(double z, const Texture& texture, double half_x,
                      double half_y) {
  PlaneShape plane;
  plane.point = Vec3(0.0, 0.0, z);
  plane.normal = -Vec3::UnitZ();
  plane.half_u = half_x;
  plane.half_v = half_y;
  return Primitive{plane, texture};
}

namespace {

constexpr double kRayEps = 1e-9;

// Ray origin + s*dir against one shape; s is the camera-frame depth when dir
// is the unnormalized pixel ray (z component 1 in camera coordinates).
bool intersect_plane(const PlaneShape& plane, const Vec3& origin,
                     const Vec3& dir, double* s_out) {
  const Vec3 n = plane.normal.normalized();
  const double denom = dir.dot(n);
  if (std::abs(denom) < 1e-15) return false;
  const double s = (plane.point - origin).dot(n) / denom;
  if (s <= kRayEps) return false;
  if (plane.half_u > 0.0) {
    // Local axes: pick the world axis least aligned with n to seed u.
    Vec3 seed = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 u_axis = (seed - seed.dot(n) * n).normalized();
    const Vec3 v_axis = n.cross(u_axis);
    const Vec3 local = origin + s * dir - plane.point;
    if (std::abs(local.dot(u_axis)) > plane.half_u ||
        std::abs(local.dot(v_axis)) > plane.half_v) {
      return false;
    }
  }
  *s_out = s;
  return true;
}

bool intersect_box(const BoxShape& box, const Vec3& origin, const Vec3& dir,
                   double* s_out) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const double o = origin[axis], d = dir[axis];
    const double lo = box.min_corner[axis], hi = box.max_corner[axis];
    if (std::abs(d) < 1e-15) {
      if (o < lo || o > hi) return false;
      continue;
    }
    double t0 = (lo - o) / d;
    double t1 = (hi - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return false;
  }
  const double s = t_near > kRayEps ? t_near : t_far;
  if (s <= kRayEps) return false;
  *s_out = s;
  return true;
}

struct Hit {
  double s = std::numeric_limits<double>::infinity();
  const Primitive* primitive = nullptr;
};

Hit nearest_hit(const Scene& scene, const Vec3& origin, const Vec3& dir) {
  Hit best;
  for (const Primitive& prim : scene.primitives) {
    double s = 0.0;
    bool hit = false;
    if (const auto* plane = std::get_if<PlaneShape>(&prim.shape)) {
      hit = intersect_plane(*plane, origin, dir, &s);
    } else if (const auto* box = std::get_if<BoxShape>(&prim.shape)) {
      hit = intersect_box(*box, origin, dir, &s);
    }
    if (hit && s < best.s) {
      best.s = s;
      best.primitive = &prim;
    }
  }
  return best;
}

}  // namespace

bool cast_pixel(const Scene& scene, const Intrinsics& cam,
                const RigidMotion& world_to_camera, double u, double v,
                Vec3* world_point, double* depth) {
  const RigidMotion camera_to_world = invert(world_to_camera);
  const Vec3 origin = camera_to_world.translation;
  const Vec3 dir_cam((u - cam.cu) / cam.fx, (v - cam.cv) / cam.fy, 1.0);
  const Vec3 dir = camera_to_world.rotation.rotate(dir_cam);
  const Hit hit = nearest_hit(scene, origin, dir);
  if (!hit.primitive) return false;
  if (world_point) *world_point = origin + hit.s * dir;
  if (depth) *depth = hit.s;
  return true;
}

Rendered render(const Scene& scene, const Intrinsics& cam, int width,
                int height, const RigidMotion& world_to_camera,
                const RenderOptions& options) {
  Rendered out{ImageBuffer(width, height, 0.0f), ImageBuffer(width, height, 0.0f),
               Mask(width, height, false)};
  const RigidMotion camera_to_world = invert(world_to_camera);
  const Vec3 origin = camera_to_world.translation;
  const Mat3 r = camera_to_world.rotation.matrix();

  parallel_rows(height, options.threads, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < width; ++x) {
        const Vec3 dir_cam((x - cam.cu) / cam.fx, (y - cam.cv) / cam.fy, 1.0);
        const Vec3 dir = r * dir_cam;
        const Hit hit = nearest_hit(scene, origin, dir);
        if (!hit.primitive) continue;
        out.depth.at(x, y) = static_cast<float>(hit.s);
        out.valid.set(x, y, true);
        if (!options.supersample) {
          out.image.at(x, y) = static_cast<float>(
              hit.primitive->texture.eval(origin + hit.s * dir));
        } else {
          double acc = 0.0;
          int n = 0;
          for (double dy : {-0.25, 0.25}) {
            for (double dx : {-0.25, 0.25}) {
              const Vec3 sub_cam((x + dx - cam.cu) / cam.fx,
                                 (y + dy - cam.cv) / cam.fy, 1.0);
              const Vec3 sub = r * sub_cam;
              const Hit h = nearest_hit(scene, origin, sub);
              if (h.primitive) {
                acc += h.primitive->texture.eval(origin + h.s * sub);
                ++n;
              }
            }
          }
          out.image.at(x, y) = static_cast<float>(n > 0 ? acc / n : 0.0);
        }
      }
    }
  });
  return out;
}

std::vector<ScenePoint> sample_correspondences(
    const Scene& scene, const Intrinsics& cam, int width, int height,
    const RigidMotion& pose_a, const RigidMotion& pose_b, int n,
    uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("need n > 0 correspondences");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, width - 1.0);
  std::uniform_real_distribution<double> uy(0.0, height - 1.0);

  std::vector<ScenePoint> points;
  points.reserve(n);
  const long attempts = 10L * n;
  for (long i = 0; i < attempts && static_cast<int>(points.size()) < n; ++i) {
    const double u1 = ux(rng);
    const double v1 = uy(rng);
    Vec3 world;
    double depth_a;
    if (!cast_pixel(scene, cam, pose_a, u1, v1, &world, &depth_a)) continue;

    const Vec3 in_b = pose_b.apply(world);
    if (!(in_b.z() > 0.0)) continue;
    const Projection proj_b = project(cam, in_b);
    if (proj_b.pixel.u < 0.0 || proj_b.pixel.u > width - 1.0 ||
        proj_b.pixel.v < 0.0 || proj_b.pixel.v > height - 1.0) {
      continue;
    }
    // Occlusion test: the nearest surface along view b's ray must be this
    // very point.
    Vec3 world_b;
    double depth_b;
    if (!cast_pixel(scene, cam, pose_b, proj_b.pixel.u, proj_b.pixel.v,
                    &world_b, &depth_b)) {
      continue;
    }
    if (std::abs(depth_b - in_b.z()) > 1e-6 * std::max(1.0, in_b.z())) continue;

    ScenePoint pt;
    pt.corr = Correspondence{u1, v1, proj_b.pixel.u, proj_b.pixel.v};
    pt.depth_a = depth_a;
    pt.depth_b = in_b.z();
    pt.world = world;
    points.push_back(pt);
  }
  if (static_cast<int>(points.size()) < n)
    throw InsufficientVisibility(static_cast<int>(points.size()), n);
  return points;
}

namespace {

using nlohmann::json;

Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3)
    throw MalformedLine(0, "expected a 3-element array in scene JSON");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec3_to(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

Scene scene_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw MalformedLine(0, std::string("scene JSON: ") + e.what());
  }
  Scene scene;
  try {
    for (const auto& p : j.at("primitives")) {
      Primitive prim;
      const auto& shape = p.at("shape");
      const std::string shape_type = shape.at("type").get<std::string>();
      if (shape_type == "plane") {
        PlaneShape plane;
        plane.point = vec3_from(shape.at("point"));
        if (shape.contains("normal"))
          plane.normal = vec3_from(shape.at("normal"));
        if (shape.contains("extent")) {
          plane.half_u = shape.at("extent")[0].get<double>();
          plane.half_v = shape.at("extent")[1].get<double>();
        }
        prim.shape = plane;
      } else if (shape_type == "box") {
        BoxShape box;
        box.min_corner = vec3_from(shape.at("min"));
        box.max_corner = vec3_from(shape.at("max"));
        prim.shape = box;
      } else {
        throw MalformedLine(0, "unknown shape type '" + shape_type + "'");
      }

      if (p.contains("texture")) {
        const auto& tex = p.at("texture");
        const std::string tex_type = tex.value("type", "constant");
        if (tex_type == "constant") {
          prim.texture = Texture::constant(tex.value("value", 0.5));
        } else if (tex_type == "checker") {
          prim.texture = Texture::checker(tex.value("scale", 1.0),
                                          tex.value("lo", 0.2),
                                          tex.value("hi", 0.8));
        } else if (tex_type == "noise") {
          prim.texture = Texture::noise(tex.value("scale", 1.0),
                                        tex.value("seed", uint64_t(0)),
                                        tex.value("octaves", 3));
        } else {
          throw MalformedLine(0, "unknown texture type '" + tex_type + "'");
        }
      }
      scene.primitives.push_back(prim);
    }
  } catch (const json::exception& e) {
    throw MalformedLine(0, std::string("scene JSON: ") + e.what());
  }
  return scene;
}

std::string scene_to_json(const Scene& scene) {
  json out;
  out["primitives"] = json::array();
  for (const Primitive& prim : scene.primitives) {
    json p;
    if (const auto* plane = std::get_if<PlaneShape>(&prim.shape)) {
      p["shape"] = {{"type", "plane"},
                    {"point", vec3_to(plane->point)},
                    {"normal", vec3_to(plane->normal)}};
      if (plane->half_u > 0.0)
        p["shape"]["extent"] = {plane->half_u, plane->half_v};
    } else if (const auto* box = std::get_if<BoxShape>(&prim.shape)) {
      p["shape"] = {{"type", "box"},
                    {"min", vec3_to(box->min_corner)},
                    {"max", vec3_to(box->max_corner)}};
    }
    switch (prim.texture.kind) {
      case Texture::Kind::constant:
        p["texture"] = {{"type", "constant"}, {"value", prim.texture.value}};
        break;
      case Texture::Kind::checker:
        p["texture"] = {{"type", "checker"},
                        {"scale", prim.texture.scale},
                        {"lo", prim.texture.value - 0.5 * prim.texture.contrast},
                        {"hi", prim.texture.value + 0.5 * prim.texture.contrast}};
        break;
      case Texture::Kind::noise:
        p["texture"] = {{"type", "noise"},
                        {"scale", prim.texture.scale},
                        {"seed", prim.texture.seed},
                        {"octaves", prim.texture.octaves}};
        break;
    }
    out["primitives"].push_back(p);
  }
  return out.dump(2);
}

}  // namespace dfm
