#pragma once

#include <optional>

#include "dfm/geometry.hpp"

namespace dfm {

/// One matched point across the two frames: (u1, v1) in frame t,
/// (u2, v2) in frame t-dt, sharing the same camera.
struct Correspondence {
  double u1 = 0.0, v1 = 0.0;
  double u2 = 0.0, v2 = 0.0;
};

/// Coefficients of the linear depth relations D2 = A3 D1 + B3 and
/// x2 = A1 D1 + B1, y2 = A2 D1 + B2. The A_i fold the rotation rows with the
/// frame-t ray; the B_i are the translation components (meters).
struct ABCoefficients {
  double a1 = 0.0, a2 = 0.0, a3 = 0.0;
  double b1 = 0.0, b2 = 0.0, b3 = 0.0;
};

struct ClosedFormConfig {
  double eps_disparity = 1e-6;    // px; below this, depth from disparity blows up
  double eps_denominator = 1e-9;  // dimensionless two-view denominator floor
};

struct ParallelDepth {
  double depth = 0.0;
  bool non_physical = false;  // depth <= 0, kept for diagnostics
};

struct TwoViewDepth {
  std::optional<double> d1_from_u;  // nullopt when the u-form is degenerate
  std::optional<double> d1_from_v;
  double d1 = 0.0;  // |denominator|-weighted combination of the valid forms
  double d2 = 0.0;  // A3 * d1 + B3
  ABCoefficients ab;
  double denom_u = 0.0;
  double denom_v = 0.0;
  bool non_physical = false;  // combined d1 <= 0
};

/// D = f b / d, the binocular similar-triangle rule.
double binocular_depth(double focal_px, double baseline_m, double disparity_px,
                       const ClosedFormConfig& cfg = {});

/// Translation-only two-view depth:
///   D1 = f (dx - ((u2-cu)/f) dD) / (u1 - u2),
/// which reduces to binocular_depth when dD == 0. dx and dD are the camera
/// translation from frame 2 to frame 1 expressed as dx = x1 - x2,
/// dD = D1 - D2 of a common point.
ParallelDepth parallel_two_view_depth(const Intrinsics& cam, double u1,
                                      double u2, double dx_m, double dd_m,
                                      const ClosedFormConfig& cfg = {});

/// The quantity playing the baseline's role in a parallel two-view system:
/// dx - ((u2-cu)/f) dD, signed.
double effective_baseline(double dx_m, double dd_m, double u2,
                          const Intrinsics& cam);

ABCoefficients ab_coefficients(const Intrinsics& cam, const RigidMotion& motion,
                               const Correspondence& corr);

/// Single-form solutions; each throws DegenerateDenominator when its own
/// denominator magnitude is below cfg.eps_denominator.
double two_view_depth_from_u(const Intrinsics& cam, const RigidMotion& motion,
                             const Correspondence& corr,
                             const ClosedFormConfig& cfg = {});
double two_view_depth_from_v(const Intrinsics& cam, const RigidMotion& motion,
                             const Correspondence& corr,
                             const ClosedFormConfig& cfg = {});

/// Closed-form depth from a general two-view motion. `motion` maps frame-1
/// (current) camera coordinates to frame-2 coordinates:
/// (x2, y2, D2) = R (x1, y1, D1) + t. Both the u- and v-derived forms are
/// returned; each is dropped when its denominator magnitude falls below
/// cfg.eps_denominator, and NoValidSolution is thrown when both do.
TwoViewDepth general_two_view_depth(const Intrinsics& cam,
                                    const RigidMotion& motion,
                                    const Correspondence& corr,
                                    const ClosedFormConfig& cfg = {});

/// Depth of a rigidly translating object's center: the object translation is
/// added to the ego translation (t_obj expressed in frame-2 camera
/// coordinates, matching the ego convention above).
TwoViewDepth moving_center_depth(const Intrinsics& cam,
                                 const RigidMotion& ego_motion,
                                 const Vec3& object_translation,
                                 const Correspondence& corr,
                                 const ClosedFormConfig& cfg = {});

}  // namespace dfm
