#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <optional>

#include "dfm/errors.hpp"

namespace dfm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Pinhole camera parameters in pixels. The classic single-f camera is the
/// special case fx == fy.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cu = 0.0;
  double cv = 0.0;

  Intrinsics() = default;
  Intrinsics(double fx_, double fy_, double cu_, double cv_);

  /// Single focal length shared by both axes.
  static Intrinsics with_focal(double f, double cu, double cv) {
    return Intrinsics(f, f, cu, cv);
  }

  Mat3 matrix() const;
  Mat3 inverse_matrix() const;
};

/// Rotation stored as a quaternion, normalized on construction. q and -q map
/// to the same rotation matrix.
class UnitQuaternion {
public:
  UnitQuaternion() : q_(1.0, 0.0, 0.0, 0.0) {}

  /// Normalizes (w, x, y, z); throws ZeroQuaternion when the norm is < 1e-15.
  UnitQuaternion(double w, double x, double y, double z);

  static UnitQuaternion identity() { return UnitQuaternion(); }
  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle_rad);
  static UnitQuaternion from_matrix(const Mat3& rotation);
  /// ZYX (yaw-pitch-roll) Euler angles, provided for file I/O only.
  static UnitQuaternion from_euler_zyx(double yaw, double pitch, double roll);

  double w() const { return q_.w(); }
  double x() const { return q_.x(); }
  double y() const { return q_.y(); }
  double z() const { return q_.z(); }

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  Vec3 rotate(const Vec3& v) const { return q_ * v; }
  UnitQuaternion conjugate() const;
  UnitQuaternion operator*(const UnitQuaternion& rhs) const;
  /// Yaw, pitch, roll of the ZYX factorization.
  Vec3 to_euler_zyx() const;

private:
  explicit UnitQuaternion(const Eigen::Quaterniond& q) : q_(q) {}
  Eigen::Quaterniond q_;
};

Mat3 quat_to_matrix(const UnitQuaternion& q);

/// SE(3) motion: p_out = R p_in + t. Used as the frame-t to frame-(t-dt)
/// camera transform throughout the cost-volume pipeline.
struct RigidMotion {
  UnitQuaternion rotation;
  Vec3 translation = Vec3::Zero();

  RigidMotion() = default;
  RigidMotion(const UnitQuaternion& q, const Vec3& t)
      : rotation(q), translation(t) {}

  static RigidMotion identity() { return RigidMotion(); }

  Mat3 rotation_matrix() const { return rotation.matrix(); }
  Mat4 matrix() const;
  Vec3 apply(const Vec3& p) const {
    return rotation.rotate(p) + translation;
  }
};

/// a then b is compose(b, a): compose(b, a).apply(p) == b.apply(a.apply(p)).
RigidMotion compose(const RigidMotion& outer, const RigidMotion& inner);
RigidMotion invert(const RigidMotion& motion);

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

struct Projection {
  Pixel pixel;
  double depth = 0.0;
};

/// u = fx x/z + cu, v = fy y/z + cv. Throws NonPositiveDepth when z <= 0.
Projection project(const Intrinsics& cam, const Vec3& point);

/// Inverse of project. Throws NonPositiveDepth when depth <= 0.
Vec3 backproject(const Intrinsics& cam, const Pixel& px, double depth);

/// Reprojects (px, depth) through motion T: project(cam, T(backproject(...))).
/// This is the K T K^-1 warp applied in scaled-homogeneous (u d, v d, d) form,
/// carried out with the full homogeneous transform so translation is kept.
/// Throws BehindCamera when the transformed point has z <= 0.
Projection warp_pixel(const Intrinsics& cam, const RigidMotion& motion,
                      const Pixel& px, double depth);

/// Non-throwing warp for volume-building loops; nullopt when behind camera.
std::optional<Projection> try_warp_pixel(const Intrinsics& cam,
                                         const RigidMotion& motion,
                                         const Pixel& px, double depth);

}  // namespace dfm
