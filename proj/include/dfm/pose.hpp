#pragma once

#include <Eigen/Core>

#include "dfm/geometry.hpp"
#include "dfm/image.hpp"
#include "dfm/plane_sweep.hpp"

namespace dfm {

using Vec6 = Eigen::Matrix<double, 6, 1>;

struct PoseLossConfig {
  double alpha = 0.85;      // SSIM weight in the photometric loss
  double lambda_s = 0.001;  // smoothness weight
  double lambda_r = 1.0;    // rotation weight of the supervised loss
  int pyramid_levels = 4;
  int max_iterations = 500;  // per pyramid level
  double tolerance = 1e-12;  // relative objective decrease to stop
  bool normalize_smoothness = true;  // mean-normalize depth in the smoothness term
  bool auto_mask = false;  // drop pixels whose unwarped error beats the warped one
  bool analytic_gradient = true;  // false: central differences inside the optimizer
  bool check_gradient = true;     // report analytic-vs-FD residual in diagnostics
  int threads = 0;
};

struct SynthesizedView {
  ImageBuffer image;
  Mask valid;
};

/// Backproject every frame-t pixel with its depth, move through `motion`
/// (frame t -> frame t-dt), project, and bilinearly sample the previous
/// image. Out-of-image and behind-camera pixels fail into the mask.
SynthesizedView synthesize_view(const ImageBuffer& img_prev,
                                const DepthMap& depth_t, const Intrinsics& cam,
                                const RigidMotion& motion, int threads = 0);

/// Windowed SSIM over a 3x3 box (C1 = 0.01^2, C2 = 0.03^2 on [0,1]
/// intensities). Windows are clipped at the borders, so SSIM(I, I) is 1
/// everywhere.
ImageBuffer ssim_map(const ImageBuffer& a, const ImageBuffer& b);

/// Mean over valid pixels of alpha/2 (1 - SSIM) + (1 - alpha) |I_t - I_s|.
/// SSIM window statistics include valid pixels only. Throws EmptyMask.
double photometric_loss(const ImageBuffer& img_t, const ImageBuffer& synth,
                        const Mask& mask, double alpha);

/// Edge-aware smoothness: mean |dx d| e^{-|dx I|} + |dy d| e^{-|dy I|} with
/// forward differences over pairs of valid depth pixels. With normalize the
/// depth is divided by its mean over valid pixels first.
double smoothness_loss(const DepthMap& depth, const ImageBuffer& img,
                       bool normalize = true);

/// ||t - t_hat||_1 + lambda_r min(||q - qn||_1, ||q + qn||_1) with
/// qn = q_hat/||q_hat|| — the double cover makes q and -q the same rotation,
/// so the closer sign is scored. q_hat ordered (w, x, y, z).
double supervised_pose_loss(const Vec3& t_pred,
                            const Eigen::Vector4d& q_pred_unnormalized,
                            const RigidMotion& gt, double lambda_r);

/// The self-supervised pose objective at one resolution: photometric loss of
/// the view synthesized through (depth, T) against frame t. Exposes frozen-
/// mask evaluation and both gradient paths so they can be compared.
class PhotometricObjective {
public:
  PhotometricObjective(const ImageBuffer& img_t, const ImageBuffer& img_prev,
                       const DepthMap& depth_t, const Intrinsics& cam,
                       const PoseLossConfig& cfg);

  /// Geometrically valid pixels at T: depth valid, in front of the camera
  /// with margin, warped at least one pixel inside the previous image (so
  /// small perturbations stay sampleable). Intersects the auto-mask when
  /// configured.
  Mask valid_mask(const RigidMotion& T) const;
  double overlap_fraction(const RigidMotion& T) const;

  /// Loss over a frozen pixel set. The set must be geometrically valid at T.
  double evaluate(const RigidMotion& T, const Mask& mask) const;
  double evaluate(const RigidMotion& T) const;  // mask recomputed at T

  /// d evaluate / d [dt, dw] at delta = 0 for the update
  /// T(delta) = (R exp([dw]x), t + dt): exact chain rule through the SSIM
  /// windows and the bilinear interpolant.
  Vec6 gradient(const RigidMotion& T, const Mask& mask) const;
  /// Central differences of evaluate() on the same frozen mask.
  Vec6 gradient_fd(const RigidMotion& T, const Mask& mask,
                   double step = 1e-6) const;

  /// Mean valid depth, used to precondition translation against rotation.
  double mean_depth() const { return mean_depth_; }

  const ImageBuffer& frame_t() const { return img_t_; }

private:
  struct WarpData;
  void warp_pixels(const RigidMotion& T, const Mask& mask, WarpData* out) const;

  ImageBuffer img_t_;
  ImageBuffer img_prev_;
  DepthMap depth_;
  Intrinsics cam_;
  PoseLossConfig cfg_;
  double mean_depth_ = 1.0;
  ImageBuffer identity_error_;  // per-pixel unwarped photometric error
};

/// Applies the optimizer's tangent update to a motion.
RigidMotion apply_tangent(const RigidMotion& T, const Vec6& delta);

struct PoseDiagnostics {
  double final_objective = 0.0;
  double photometric = 0.0;
  double smoothness = 0.0;
  int iterations = 0;
  int levels_used = 0;
  double gradient_check_residual = -1.0;  // analytic vs FD, -1 when skipped
  bool converged = false;
};

struct PoseEstimate {
  RigidMotion motion;
  PoseDiagnostics diagnostics;
};

/// Coarse-to-fine minimization of the photometric objective (plus the
/// constant smoothness term) over SE(3), with depth held fixed: depth-scaled
/// conjugate gradient descent with Armijo backtracking. Deterministic.
/// Throws DegenerateOverlap when under 10% of depth-valid pixels survive the
/// warp at the start, Diverged when the objective turns non-finite.
PoseEstimate optimize_pose(const ImageBuffer& img_t,
                           const ImageBuffer& img_prev,
                           const DepthMap& depth_t, const Intrinsics& cam,
                           const PoseLossConfig& cfg = {},
                           const RigidMotion& init = RigidMotion());

}  // namespace dfm
