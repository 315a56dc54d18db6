#include "dfm/closed_form.hpp"

#include <cmath>

namespace dfm {

double binocular_depth(double focal_px, double baseline_m, double disparity_px,
                       const ClosedFormConfig& cfg) {
  if (std::abs(disparity_px) < cfg.eps_disparity)
    throw ZeroDisparity(disparity_px);
  return focal_px * baseline_m / disparity_px;
}

ParallelDepth parallel_two_view_depth(const Intrinsics& cam, double u1,
                                      double u2, double dx_m, double dd_m,
                                      const ClosedFormConfig& cfg) {
  const double disparity = u1 - u2;
  if (std::abs(disparity) < cfg.eps_disparity) throw ZeroDisparity(disparity);
  const double depth =
      cam.fx * effective_baseline(dx_m, dd_m, u2, cam) / disparity;
  return ParallelDepth{depth, depth <= 0.0};
}

double effective_baseline(double dx_m, double dd_m, double u2,
                          const Intrinsics& cam) {
  return dx_m - (u2 - cam.cu) / cam.fx * dd_m;
}

ABCoefficients ab_coefficients(const Intrinsics& cam, const RigidMotion& motion,
                               const Correspondence& corr) {
  const Mat3 r = motion.rotation_matrix();
  const double ray_u = (corr.u1 - cam.cu) / cam.fx;
  const double ray_v = (corr.v1 - cam.cv) / cam.fy;
  ABCoefficients ab;
  ab.a1 = r(0, 0) * ray_u + r(0, 1) * ray_v + r(0, 2);
  ab.a2 = r(1, 0) * ray_u + r(1, 1) * ray_v + r(1, 2);
  ab.a3 = r(2, 0) * ray_u + r(2, 1) * ray_v + r(2, 2);
  ab.b1 = motion.translation.x();
  ab.b2 = motion.translation.y();
  ab.b3 = motion.translation.z();
  return ab;
}

double two_view_depth_from_u(const Intrinsics& cam, const RigidMotion& motion,
                             const Correspondence& corr,
                             const ClosedFormConfig& cfg) {
  const ABCoefficients ab = ab_coefficients(cam, motion, corr);
  const double ray2_u = (corr.u2 - cam.cu) / cam.fx;
  const double denom = ray2_u * ab.a3 - ab.a1;
  if (std::abs(denom) < cfg.eps_denominator)
    throw DegenerateDenominator("u form");
  return (ab.b1 - ray2_u * ab.b3) / denom;
}

double two_view_depth_from_v(const Intrinsics& cam, const RigidMotion& motion,
                             const Correspondence& corr,
                             const ClosedFormConfig& cfg) {
  const ABCoefficients ab = ab_coefficients(cam, motion, corr);
  const double ray2_v = (corr.v2 - cam.cv) / cam.fy;
  const double denom = ray2_v * ab.a3 - ab.a2;
  if (std::abs(denom) < cfg.eps_denominator)
    throw DegenerateDenominator("v form");
  return (ab.b2 - ray2_v * ab.b3) / denom;
}

TwoViewDepth general_two_view_depth(const Intrinsics& cam,
                                    const RigidMotion& motion,
                                    const Correspondence& corr,
                                    const ClosedFormConfig& cfg) {
  TwoViewDepth out;
  out.ab = ab_coefficients(cam, motion, corr);

  const double ray2_u = (corr.u2 - cam.cu) / cam.fx;
  const double ray2_v = (corr.v2 - cam.cv) / cam.fy;
  out.denom_u = ray2_u * out.ab.a3 - out.ab.a1;
  out.denom_v = ray2_v * out.ab.a3 - out.ab.a2;

  if (std::abs(out.denom_u) >= cfg.eps_denominator)
    out.d1_from_u = (out.ab.b1 - ray2_u * out.ab.b3) / out.denom_u;
  if (std::abs(out.denom_v) >= cfg.eps_denominator)
    out.d1_from_v = (out.ab.b2 - ray2_v * out.ab.b3) / out.denom_v;
  if (!out.d1_from_u && !out.d1_from_v) throw NoValidSolution();

  // Estimation error scales with 1/|denominator|, so each form is weighted by
  // its denominator magnitude.
  if (out.d1_from_u && out.d1_from_v) {
    const double wu = std::abs(out.denom_u);
    const double wv = std::abs(out.denom_v);
    out.d1 = (wu * *out.d1_from_u + wv * *out.d1_from_v) / (wu + wv);
  } else {
    out.d1 = out.d1_from_u ? *out.d1_from_u : *out.d1_from_v;
  }
  out.d2 = out.ab.a3 * out.d1 + out.ab.b3;
  out.non_physical = out.d1 <= 0.0;
  return out;
}

TwoViewDepth moving_center_depth(const Intrinsics& cam,
                                 const RigidMotion& ego_motion,
                                 const Vec3& object_translation,
                                 const Correspondence& corr,
                                 const ClosedFormConfig& cfg) {
  RigidMotion combined = ego_motion;
  combined.translation += object_translation;
  return general_two_view_depth(cam, combined, corr, cfg);
}

}  // namespace dfm
