#include "dfm/geometry.hpp"

#include <cmath>

namespace dfm {

Intrinsics::Intrinsics(double fx_, double fy_, double cu_, double cv_)
    : fx(fx_), fy(fy_), cu(cu_), cv(cv_) {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy) ||
      !std::isfinite(cu) || !std::isfinite(cv)) {
    throw std::invalid_argument("intrinsics require finite positive focal lengths");
  }
}

Mat3 Intrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cu, 0.0, fy, cv, 0.0, 0.0, 1.0;
  return k;
}

Mat3 Intrinsics::inverse_matrix() const {
  Mat3 k_inv;
  k_inv << 1.0 / fx, 0.0, -cu / fx, 0.0, 1.0 / fy, -cv / fy, 0.0, 0.0, 1.0;
  return k_inv;
}

UnitQuaternion::UnitQuaternion(double w, double x, double y, double z)
    : q_(w, x, y, z) {
  const double norm = q_.norm();
  if (norm < 1e-15) throw ZeroQuaternion();
  q_.coeffs() /= norm;
}

UnitQuaternion UnitQuaternion::from_axis_angle(const Vec3& axis,
                                               double angle_rad) {
  const double norm = axis.norm();
  if (norm < 1e-15) {
    if (std::abs(angle_rad) < 1e-15) return UnitQuaternion();
    throw ZeroQuaternion();
  }
  return UnitQuaternion(
      Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis / norm)));
}

UnitQuaternion UnitQuaternion::from_matrix(const Mat3& rotation) {
  return UnitQuaternion(Eigen::Quaterniond(rotation).normalized());
}

UnitQuaternion UnitQuaternion::from_euler_zyx(double yaw, double pitch,
                                              double roll) {
  const Eigen::Quaterniond q = Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
                               Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                               Eigen::AngleAxisd(roll, Vec3::UnitX());
  return UnitQuaternion(q);
}

UnitQuaternion UnitQuaternion::conjugate() const {
  return UnitQuaternion(q_.conjugate());
}

UnitQuaternion UnitQuaternion::operator*(const UnitQuaternion& rhs) const {
  return UnitQuaternion((q_ * rhs.q_).normalized());
}

Vec3 UnitQuaternion::to_euler_zyx() const {
  const Mat3 r = matrix();
  // ZYX factorization; pitch = asin(-r20), gimbal degeneracy folded into yaw.
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  double yaw, roll;
  if (std::abs(r(2, 0)) < 1.0 - 1e-12) {
    yaw = std::atan2(r(1, 0), r(0, 0));
    roll = std::atan2(r(2, 1), r(2, 2));
  } else {
    yaw = std::atan2(-r(0, 1), r(1, 1));
    roll = 0.0;
  }
  return Vec3(yaw, pitch, roll);
}

Mat3 quat_to_matrix(const UnitQuaternion& q) { return q.matrix(); }

Mat4 RigidMotion::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation.matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

RigidMotion compose(const RigidMotion& outer, const RigidMotion& inner) {
  return RigidMotion(outer.rotation * inner.rotation,
                     outer.rotation.rotate(inner.translation) +
                         outer.translation);
}

RigidMotion invert(const RigidMotion& motion) {
  const UnitQuaternion r_inv = motion.rotation.conjugate();
  return RigidMotion(r_inv, -r_inv.rotate(motion.translation));
}

Projection project(const Intrinsics& cam, const Vec3& point) {
  if (!(point.z() > 0.0)) throw NonPositiveDepth(point.z());
  return Projection{
      Pixel{cam.fx * point.x() / point.z() + cam.cu,
            cam.fy * point.y() / point.z() + cam.cv},
      point.z()};
}

Vec3 backproject(const Intrinsics& cam, const Pixel& px, double depth) {
  if (!(depth > 0.0)) throw NonPositiveDepth(depth);
  return Vec3((px.u - cam.cu) / cam.fx * depth,
              (px.v - cam.cv) / cam.fy * depth, depth);
}

Projection warp_pixel(const Intrinsics& cam, const RigidMotion& motion,
                      const Pixel& px, double depth) {
  const Vec3 transformed = motion.apply(backproject(cam, px, depth));
  if (!(transformed.z() > 0.0)) throw BehindCamera();
  return project(cam, transformed);
}

std::optional<Projection> try_warp_pixel(const Intrinsics& cam,
                                         const RigidMotion& motion,
                                         const Pixel& px, double depth) {
  if (!(depth > 0.0)) return std::nullopt;
  const Vec3 transformed = motion.apply(backproject(cam, px, depth));
  if (!(transformed.z() > 0.0)) return std::nullopt;
  return project(cam, transformed);
}

}  // namespace dfm
