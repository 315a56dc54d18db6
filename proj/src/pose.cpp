#include "dfm/pose.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace dfm {

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
constexpr double kMinZ = 1e-4;

// Window moments over valid pixels, 3x3 box clipped at the borders.
struct WindowMoments {
  int width = 0, height = 0;
  std::vector<double> n, sa, sb, saa, sbb, sab;

  size_t idx(int x, int y) const { return static_cast<size_t>(y) * width + x; }
};

void window_moments(const ImageBuffer& a, const std::vector<float>& b,
                    const std::vector<uint8_t>& valid, WindowMoments* out) {
  const int width = a.width();
  const int height = a.height();
  out->width = width;
  out->height = height;
  const size_t plane = static_cast<size_t>(width) * height;
  out->n.assign(plane, 0.0);
  out->sa.assign(plane, 0.0);
  out->sb.assign(plane, 0.0);
  out->saa.assign(plane, 0.0);
  out->sbb.assign(plane, 0.0);
  out->sab.assign(plane, 0.0);

  for (int y = 0; y < height; ++y) {
    const int y0 = std::max(0, y - 1), y1 = std::min(height - 1, y + 1);
    for (int x = 0; x < width; ++x) {
      const int x0 = std::max(0, x - 1), x1 = std::min(width - 1, x + 1);
      const size_t p = out->idx(x, y);
      for (int yy = y0; yy <= y1; ++yy) {
        for (int xx = x0; xx <= x1; ++xx) {
          const size_t q = out->idx(xx, yy);
          if (!valid[q]) continue;
          const double av = a.at(xx, yy);
          const double bv = b[q];
          out->n[p] += 1.0;
          out->sa[p] += av;
          out->sb[p] += bv;
          out->saa[p] += av * av;
          out->sbb[p] += bv * bv;
          out->sab[p] += av * bv;
        }
      }
    }
  }
}

struct SsimTerms {
  double s = 0.0;           // SSIM value
  double a1 = 0.0, a2 = 0.0, b1 = 1.0, b2 = 1.0;
  double mean_a = 0.0, mean_b = 0.0, n = 0.0;
};

SsimTerms ssim_at(const WindowMoments& m, size_t p) {
  SsimTerms t;
  t.n = m.n[p];
  if (t.n < 0.5) return t;
  t.mean_a = m.sa[p] / t.n;
  t.mean_b = m.sb[p] / t.n;
  const double var_a = std::max(0.0, m.saa[p] / t.n - t.mean_a * t.mean_a);
  const double var_b = std::max(0.0, m.sbb[p] / t.n - t.mean_b * t.mean_b);
  const double cov = m.sab[p] / t.n - t.mean_a * t.mean_b;
  t.a1 = 2.0 * t.mean_a * t.mean_b + kC1;
  t.a2 = 2.0 * cov + kC2;
  t.b1 = t.mean_a * t.mean_a + t.mean_b * t.mean_b + kC1;
  t.b2 = var_a + var_b + kC2;
  t.s = (t.a1 * t.a2) / (t.b1 * t.b2);
  return t;
}

std::vector<float> image_as_vector(const ImageBuffer& img) {
  return std::vector<float>(img.data(), img.data() + img.size());
}

// Derivative of the bilinear interpolant of img at (x, y), exact inside each
// cell. Coordinates must be at least one pixel inside the border.
void bilinear_gradient(const ImageBuffer& img, double x, double y, double* gx,
                       double* gy) {
  int x0 = std::clamp(static_cast<int>(x), 0, img.width() - 2);
  int y0 = std::clamp(static_cast<int>(y), 0, img.height() - 2);
  const double fx = x - x0;
  const double fy = y - y0;
  const double i00 = img.at(x0, y0), i10 = img.at(x0 + 1, y0);
  const double i01 = img.at(x0, y0 + 1), i11 = img.at(x0 + 1, y0 + 1);
  *gx = (1.0 - fy) * (i10 - i00) + fy * (i11 - i01);
  *gy = (1.0 - fx) * (i01 - i00) + fx * (i11 - i10);
}

}  // namespace

SynthesizedView synthesize_view(const ImageBuffer& img_prev,
                                const DepthMap& depth_t, const Intrinsics& cam,
                                const RigidMotion& motion, int threads) {
  const int width = depth_t.depth.width();
  const int height = depth_t.depth.height();
  SynthesizedView out{ImageBuffer(width, height, 0.0f),
                      Mask(width, height, false)};
  const Mat3 r = motion.rotation_matrix();
  const Vec3 t = motion.translation;

  parallel_rows(height, threads, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < width; ++x) {
        if (!depth_t.valid.at(x, y)) continue;
        const double d = depth_t.depth.at(x, y);
        if (!(d > 0.0)) continue;
        const double rx = (x - cam.cu) / cam.fx;
        const double ry = (y - cam.cv) / cam.fy;
        const double px = d * (r(0, 0) * rx + r(0, 1) * ry + r(0, 2)) + t.x();
        const double py = d * (r(1, 0) * rx + r(1, 1) * ry + r(1, 2)) + t.y();
        const double pz = d * (r(2, 0) * rx + r(2, 1) * ry + r(2, 2)) + t.z();
        if (!(pz > 0.0)) continue;
        const auto sample = sample_bilinear(img_prev, cam.fx * px / pz + cam.cu,
                                            cam.fy * py / pz + cam.cv);
        if (!sample) continue;
        out.image.at(x, y) = static_cast<float>(*sample);
        out.valid.set(x, y, true);
      }
    }
  });
  return out;
}

ImageBuffer ssim_map(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.same_size(b))
    throw ImageSizeMismatch(a.width(), a.height(), b.width(), b.height());
  WindowMoments moments;
  std::vector<uint8_t> all(static_cast<size_t>(a.width()) * a.height(), 1);
  window_moments(a, image_as_vector(b), all, &moments);
  ImageBuffer out(a.width(), a.height());
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      out.at(x, y) = static_cast<float>(ssim_at(moments, moments.idx(x, y)).s);
  return out;
}

double photometric_loss(const ImageBuffer& img_t, const ImageBuffer& synth,
                        const Mask& mask, double alpha) {
  if (!img_t.same_size(synth))
    throw ImageSizeMismatch(img_t.width(), img_t.height(), synth.width(),
                            synth.height());
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("alpha must lie in [0, 1]");
  WindowMoments moments;
  window_moments(img_t, image_as_vector(synth), mask.raw(), &moments);
  double total = 0.0;
  size_t count = 0;
  for (int y = 0; y < img_t.height(); ++y) {
    for (int x = 0; x < img_t.width(); ++x) {
      if (!mask.at(x, y)) continue;
      const double s = ssim_at(moments, moments.idx(x, y)).s;
      total += 0.5 * alpha * (1.0 - s) +
               (1.0 - alpha) * std::abs(img_t.at(x, y) - synth.at(x, y));
      ++count;
    }
  }
  if (count == 0) throw EmptyMask();
  return total / static_cast<double>(count);
}

double smoothness_loss(const DepthMap& depth, const ImageBuffer& img,
                       bool normalize) {
  const int width = depth.depth.width();
  const int height = depth.depth.height();
  double mean = 1.0;
  if (normalize) {
    double sum = 0.0;
    size_t n = 0;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (depth.valid.at(x, y)) {
          sum += depth.depth.at(x, y);
          ++n;
        }
    if (n == 0) return 0.0;
    mean = sum / static_cast<double>(n);
    if (!(std::abs(mean) > 1e-12)) mean = 1.0;
  }

  double sum_x = 0.0, sum_y = 0.0;
  size_t n_x = 0, n_y = 0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!depth.valid.at(x, y)) continue;
      const double d = depth.depth.at(x, y) / mean;
      if (x + 1 < width && depth.valid.at(x + 1, y)) {
        const double dd = depth.depth.at(x + 1, y) / mean - d;
        const double di = img.at(x + 1, y) - img.at(x, y);
        sum_x += std::abs(dd) * std::exp(-std::abs(di));
        ++n_x;
      }
      if (y + 1 < height && depth.valid.at(x, y + 1)) {
        const double dd = depth.depth.at(x, y + 1) / mean - d;
        const double di = img.at(x, y + 1) - img.at(x, y);
        sum_y += std::abs(dd) * std::exp(-std::abs(di));
        ++n_y;
      }
    }
  }
  double loss = 0.0;
  if (n_x > 0) loss += sum_x / static_cast<double>(n_x);
  if (n_y > 0) loss += sum_y / static_cast<double>(n_y);
  return loss;
}

double supervised_pose_loss(const Vec3& t_pred,
                            const Eigen::Vector4d& q_pred_unnormalized,
                            const RigidMotion& gt, double lambda_r) {
  const double norm = q_pred_unnormalized.norm();
  if (norm < 1e-15) throw ZeroQuaternion();
  const Eigen::Vector4d qn = q_pred_unnormalized / norm;
  const Eigen::Vector4d q_gt(gt.rotation.w(), gt.rotation.x(), gt.rotation.y(),
                             gt.rotation.z());
  const double translation = (gt.translation - t_pred).lpNorm<1>();
  const double rotation = std::min((q_gt - qn).lpNorm<1>(),
                                   (q_gt + qn).lpNorm<1>());
  return translation + lambda_r * rotation;
}

RigidMotion apply_tangent(const RigidMotion& T, const Vec6& delta) {
  const Vec3 dt = delta.head<3>();
  const Vec3 dw = delta.tail<3>();
  const double angle = dw.norm();
  UnitQuaternion dq = angle < 1e-18
                          ? UnitQuaternion()
                          : UnitQuaternion::from_axis_angle(dw / angle, angle);
  return RigidMotion(T.rotation * dq, T.translation + dt);
}

// --------------------------------------------------------- PhotometricObjective

struct PhotometricObjective::WarpData {
  std::vector<float> value;     // sampled previous image
  std::vector<uint8_t> valid;   // pixel contributed
  std::vector<double> u, v;     // warped coordinates
  std::vector<double> px, py, pz;  // transformed 3D point
  size_t failures = 0;          // requested but unsampleable
};

PhotometricObjective::PhotometricObjective(const ImageBuffer& img_t,
                                           const ImageBuffer& img_prev,
                                           const DepthMap& depth_t,
                                           const Intrinsics& cam,
                                           const PoseLossConfig& cfg)
    : img_t_(img_t), img_prev_(img_prev), depth_(depth_t), cam_(cam),
      cfg_(cfg) {
  if (!img_t.same_size(img_prev))
    throw ImageSizeMismatch(img_t.width(), img_t.height(), img_prev.width(),
                            img_prev.height());
  if (depth_t.depth.width() != img_t.width() ||
      depth_t.depth.height() != img_t.height())
    throw ImageSizeMismatch(depth_t.depth.width(), depth_t.depth.height(),
                            img_t.width(), img_t.height());

  double sum = 0.0;
  size_t n = 0;
  for (int y = 0; y < img_t.height(); ++y)
    for (int x = 0; x < img_t.width(); ++x)
      if (depth_.valid.at(x, y) && depth_.depth.at(x, y) > 0.0f) {
        sum += depth_.depth.at(x, y);
        ++n;
      }
  mean_depth_ = n > 0 ? sum / static_cast<double>(n) : 1.0;

  if (cfg_.auto_mask) {
    // Per-pixel error of the un-warped previous frame, compared against the
    // warped error when masking.
    WindowMoments moments;
    std::vector<uint8_t> all(img_t.size(), 1);
    window_moments(img_t_, image_as_vector(img_prev_), all, &moments);
    identity_error_ = ImageBuffer(img_t.width(), img_t.height());
    for (int y = 0; y < img_t.height(); ++y) {
      for (int x = 0; x < img_t.width(); ++x) {
        const double s = ssim_at(moments, moments.idx(x, y)).s;
        identity_error_.at(x, y) = static_cast<float>(
            0.5 * cfg_.alpha * (1.0 - s) +
            (1.0 - cfg_.alpha) * std::abs(img_t_.at(x, y) - img_prev_.at(x, y)));
      }
    }
  }
}

void PhotometricObjective::warp_pixels(const RigidMotion& T, const Mask& mask,
                                       WarpData* out) const {
  const int width = img_t_.width();
  const int height = img_t_.height();
  const size_t plane = static_cast<size_t>(width) * height;
  out->value.assign(plane, 0.0f);
  out->valid.assign(plane, 0);
  out->u.assign(plane, 0.0);
  out->v.assign(plane, 0.0);
  out->px.assign(plane, 0.0);
  out->py.assign(plane, 0.0);
  out->pz.assign(plane, 1.0);
  out->failures = 0;

  const Mat3 r = T.rotation_matrix();
  const Vec3 t = T.translation;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!mask.at(x, y)) continue;
      const size_t p = static_cast<size_t>(y) * width + x;
      const double d = depth_.depth.at(x, y);
      const double rx = (x - cam_.cu) / cam_.fx;
      const double ry = (y - cam_.cv) / cam_.fy;
      const double px = d * (r(0, 0) * rx + r(0, 1) * ry + r(0, 2)) + t.x();
      const double py = d * (r(1, 0) * rx + r(1, 1) * ry + r(1, 2)) + t.y();
      const double pz = d * (r(2, 0) * rx + r(2, 1) * ry + r(2, 2)) + t.z();
      if (!(pz > kMinZ)) {
        ++out->failures;
        continue;
      }
      const double u = cam_.fx * px / pz + cam_.cu;
      const double v = cam_.fy * py / pz + cam_.cv;
      const auto sample = sample_bilinear(img_prev_, u, v);
      if (!sample) {
        ++out->failures;
        continue;
      }
      out->value[p] = static_cast<float>(*sample);
      out->valid[p] = 1;
      out->u[p] = u;
      out->v[p] = v;
      out->px[p] = px;
      out->py[p] = py;
      out->pz[p] = pz;
    }
  }
}

Mask PhotometricObjective::valid_mask(const RigidMotion& T) const {
  const int width = img_t_.width();
  const int height = img_t_.height();
  Mask mask(width, height, false);
  const Mat3 r = T.rotation_matrix();
  const Vec3 t = T.translation;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!depth_.valid.at(x, y)) continue;
      const double d = depth_.depth.at(x, y);
      if (!(d > 0.0)) continue;
      const double rx = (x - cam_.cu) / cam_.fx;
      const double ry = (y - cam_.cv) / cam_.fy;
      const double px = d * (r(0, 0) * rx + r(0, 1) * ry + r(0, 2)) + t.x();
      const double py = d * (r(1, 0) * rx + r(1, 1) * ry + r(1, 2)) + t.y();
      const double pz = d * (r(2, 0) * rx + r(2, 1) * ry + r(2, 2)) + t.z();
      if (!(pz > kMinZ)) continue;
      const double u = cam_.fx * px / pz + cam_.cu;
      const double v = cam_.fy * py / pz + cam_.cv;
      // One-pixel margin keeps finite-difference probes sampleable.
      if (u < 1.0 || u > width - 2.0 || v < 1.0 || v > height - 2.0) continue;
      if (u > img_prev_.width() - 2.0 || v > img_prev_.height() - 2.0) continue;
      mask.set(x, y, true);
    }
  }

  if (cfg_.auto_mask) {
    WarpData warp;
    warp_pixels(T, mask, &warp);
    WindowMoments moments;
    window_moments(img_t_, warp.value, warp.valid, &moments);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        if (!mask.at(x, y)) continue;
        const size_t p = moments.idx(x, y);
        const double s = ssim_at(moments, p).s;
        const double warped_error =
            0.5 * cfg_.alpha * (1.0 - s) +
            (1.0 - cfg_.alpha) * std::abs(img_t_.at(x, y) - warp.value[p]);
        if (identity_error_.at(x, y) < warped_error) mask.set(x, y, false);
      }
    }
  }
  return mask;
}

double PhotometricObjective::overlap_fraction(const RigidMotion& T) const {
  size_t depth_valid = 0;
  for (int y = 0; y < img_t_.height(); ++y)
    for (int x = 0; x < img_t_.width(); ++x)
      if (depth_.valid.at(x, y)) ++depth_valid;
  if (depth_valid == 0) return 0.0;
  return static_cast<double>(valid_mask(T).count()) /
         static_cast<double>(depth_valid);
}

double PhotometricObjective::evaluate(const RigidMotion& T,
                                      const Mask& mask) const {
  WarpData warp;
  warp_pixels(T, mask, &warp);
  if (warp.failures > 0) return std::numeric_limits<double>::infinity();
  WindowMoments moments;
  window_moments(img_t_, warp.value, warp.valid, &moments);

  double total = 0.0;
  size_t count = 0;
  for (int y = 0; y < img_t_.height(); ++y) {
    for (int x = 0; x < img_t_.width(); ++x) {
      const size_t p = moments.idx(x, y);
      if (!warp.valid[p]) continue;
      const double s = ssim_at(moments, p).s;
      total += 0.5 * cfg_.alpha * (1.0 - s) +
               (1.0 - cfg_.alpha) * std::abs(img_t_.at(x, y) - warp.value[p]);
      ++count;
    }
  }
  if (count == 0) throw EmptyMask();
  return total / static_cast<double>(count);
}

double PhotometricObjective::evaluate(const RigidMotion& T) const {
  return evaluate(T, valid_mask(T));
}

Vec6 PhotometricObjective::gradient(const RigidMotion& T,
                                    const Mask& mask) const {
  const int width = img_t_.width();
  const int height = img_t_.height();
  WarpData warp;
  warp_pixels(T, mask, &warp);
  WindowMoments moments;
  window_moments(img_t_, warp.value, warp.valid, &moments);

  size_t count = 0;
  for (uint8_t v : warp.valid) count += v;
  if (count == 0) throw EmptyMask();
  const double inv_n = 1.0 / static_cast<double>(count);

  // dSSIM_p/db_q = g1(p) + g2(p) a_q + g3(p) b_q for q in p's window; the
  // three coefficient maps get box-summed so each q reads its own windows.
  const size_t plane = static_cast<size_t>(width) * height;
  std::vector<double> g1(plane, 0.0), g2(plane, 0.0), g3(plane, 0.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const size_t p = moments.idx(x, y);
      if (!warp.valid[p]) continue;
      const SsimTerms t = ssim_at(moments, p);
      const double inv_nb = 1.0 / (t.n * t.b1 * t.b2);
      g2[p] = 2.0 * t.a1 * inv_nb;
      g3[p] = -2.0 * t.s / (t.n * t.b2);
      g1[p] = 2.0 * t.mean_a * (t.a2 - t.a1) * inv_nb -
              2.0 * t.s * t.mean_b / (t.n * t.b1) +
              2.0 * t.s * t.mean_b / (t.n * t.b2);
    }
  }
  // Box-sum the coefficient maps over each pixel's 3x3 neighborhood.
  std::vector<double> G1(plane, 0.0), G2(plane, 0.0), G3(plane, 0.0);
  for (int y = 0; y < height; ++y) {
    const int y0 = std::max(0, y - 1), y1 = std::min(height - 1, y + 1);
    for (int x = 0; x < width; ++x) {
      const int x0 = std::max(0, x - 1), x1 = std::min(width - 1, x + 1);
      const size_t q = moments.idx(x, y);
      for (int yy = y0; yy <= y1; ++yy) {
        for (int xx = x0; xx <= x1; ++xx) {
          const size_t p = moments.idx(xx, yy);
          G1[q] += g1[p];
          G2[q] += g2[p];
          G3[q] += g3[p];
        }
      }
    }
  }

  const Mat3 r = T.rotation_matrix();
  Vec6 grad = Vec6::Zero();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const size_t q = moments.idx(x, y);
      if (!warp.valid[q]) continue;
      const double a_q = img_t_.at(x, y);
      const double b_q = warp.value[q];
      const double dssim = G1[q] + G2[q] * a_q + G3[q] * b_q;
      double dl_db = -0.5 * cfg_.alpha * dssim;
      const double err = a_q - b_q;
      if (err > 0.0) dl_db -= (1.0 - cfg_.alpha);
      else if (err < 0.0) dl_db += (1.0 - cfg_.alpha);
      dl_db *= inv_n;

      double gx, gy;
      bilinear_gradient(img_prev_, warp.u[q], warp.v[q], &gx, &gy);

      // Rows of d(u,v)/dX' scaled by the image gradient.
      const double pz = warp.pz[q];
      const double inv_z = 1.0 / pz;
      const double du_dx = cam_.fx * inv_z;
      const double du_dz = -cam_.fx * warp.px[q] * inv_z * inv_z;
      const double dv_dy = cam_.fy * inv_z;
      const double dv_dz = -cam_.fy * warp.py[q] * inv_z * inv_z;
      const Vec3 dI_dP(gx * du_dx, gy * dv_dy, gx * du_dz + gy * dv_dz);

      // X' = R exp([dw]x) X + t + dt: translation block is the identity,
      // rotation block is -R [X]x with X the backprojected frame-t point.
      const double d = depth_.depth.at(x, y);
      const Vec3 X(d * (x - cam_.cu) / cam_.fx, d * (y - cam_.cv) / cam_.fy, d);
      const Vec3 rot = -(r.transpose() * dI_dP).cross(X);
      grad.head<3>() += dl_db * dI_dP;
      grad.tail<3>() += dl_db * rot;
    }
  }
  return grad;
}

Vec6 PhotometricObjective::gradient_fd(const RigidMotion& T, const Mask& mask,
                                       double step) const {
  Vec6 grad = Vec6::Zero();
  for (int i = 0; i < 6; ++i) {
    Vec6 delta = Vec6::Zero();
    delta[i] = step;
    const double hi = evaluate(apply_tangent(T, delta), mask);
    delta[i] = -step;
    const double lo = evaluate(apply_tangent(T, delta), mask);
    grad[i] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

// ------------------------------------------------------------- optimize_pose

namespace {

struct PyramidLevel {
  ImageBuffer img_t;
  ImageBuffer img_prev;
  DepthMap depth;
  Intrinsics cam;
};

DepthMap downsample_depth(const DepthMap& depth) {
  const int w = std::max(1, depth.depth.width() / 2);
  const int h = std::max(1, depth.depth.height() / 2);
  DepthMap out{ImageBuffer(w, h, 0.0f), Mask(w, h, false)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      int n = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int sx = std::min(2 * x + dx, depth.depth.width() - 1);
          const int sy = std::min(2 * y + dy, depth.depth.height() - 1);
          if (depth.valid.at(sx, sy)) {
            sum += depth.depth.at(sx, sy);
            ++n;
          }
        }
      }
      if (n > 0) {
        out.depth.at(x, y) = static_cast<float>(sum / n);
        out.valid.set(x, y, true);
      }
    }
  }
  return out;
}

// Pixel centers sit at integers and a coarse pixel averages a 2x2 block, so
// the block center maps to u_f = 2 u_c + 0.5.
Intrinsics downsample_intrinsics(const Intrinsics& cam) {
  return Intrinsics(cam.fx / 2.0, cam.fy / 2.0, (cam.cu - 0.5) / 2.0,
                    (cam.cv - 0.5) / 2.0);
}

}  // namespace

PoseEstimate optimize_pose(const ImageBuffer& img_t,
                           const ImageBuffer& img_prev,
                           const DepthMap& depth_t, const Intrinsics& cam,
                           const PoseLossConfig& cfg, const RigidMotion& init) {
  std::vector<PyramidLevel> pyramid;
  pyramid.push_back(PyramidLevel{img_t, img_prev, depth_t, cam});
  for (int level = 1; level < cfg.pyramid_levels; ++level) {
    const PyramidLevel& prev = pyramid.back();
    if (prev.img_t.width() < 32 || prev.img_t.height() < 32) break;
    pyramid.push_back(PyramidLevel{
        downsample_half(prev.img_t), downsample_half(prev.img_prev),
        downsample_depth(prev.depth), downsample_intrinsics(prev.cam)});
  }

  RigidMotion T = init;
  PoseDiagnostics diag;
  diag.levels_used = static_cast<int>(pyramid.size());

  for (int level = static_cast<int>(pyramid.size()) - 1; level >= 0; --level) {
    const PyramidLevel& data = pyramid[level];
    PhotometricObjective objective(data.img_t, data.img_prev, data.depth,
                                   data.cam, cfg);
    const double overlap = objective.overlap_fraction(T);
    if (overlap < 0.10) throw DegenerateOverlap(overlap);

    Mask mask = objective.valid_mask(T);
    double f = objective.evaluate(T, mask);
    if (!std::isfinite(f)) throw Diverged(0);

    // A radian of rotation displaces pixels about as much as mean_depth
    // meters of translation: the preconditioner equalizes the two blocks and
    // seeds the L-BFGS metric, whose curvature pairs then capture the
    // translation/rotation coupling that defeats plain steepest descent.
    const double z_bar = std::max(objective.mean_depth(), 1e-6);
    Vec6 precond;
    precond << z_bar * z_bar, z_bar * z_bar, z_bar * z_bar, 1.0, 1.0, 1.0;

    std::deque<std::pair<Vec6, Vec6>> memory;  // (step s, gradient change y)
    constexpr size_t kMemory = 10;
    Vec6 prev_g = Vec6::Zero();
    bool have_prev = false;
    double step = 1.0;

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
      const Vec6 g = cfg.analytic_gradient ? objective.gradient(T, mask)
                                           : objective.gradient_fd(T, mask);
      if (have_prev) {
        const Vec6 s = memory.empty() ? Vec6::Zero() : memory.back().first;
        const Vec6 y = g - prev_g;
        if (!memory.empty() && memory.back().second.isZero()) {
          if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            memory.back().second = y;
          } else {
            memory.pop_back();  // curvature too weak to be useful
          }
        }
      }
      prev_g = g;

      // Two-loop recursion in the preconditioned metric.
      Vec6 q = g;
      std::vector<double> alphas(memory.size());
      for (size_t i = memory.size(); i-- > 0;) {
        const auto& [s, y] = memory[i];
        const double rho = 1.0 / s.dot(y);
        alphas[i] = rho * s.dot(q);
        q -= alphas[i] * y;
      }
      double gamma = 1.0;
      if (!memory.empty()) {
        const auto& [s, y] = memory.back();
        gamma = s.dot(y) / y.dot((precond.array() * y.array()).matrix());
      }
      q = gamma * (precond.array() * q.array()).matrix();
      for (size_t i = 0; i < memory.size(); ++i) {
        const auto& [s, y] = memory[i];
        const double rho = 1.0 / s.dot(y);
        const double beta = rho * y.dot(q);
        q += (alphas[i] - beta) * s;
      }
      Vec6 direction = -q;
      if (direction.dot(g) > -1e-30) {
        memory.clear();
        direction = -(precond.array() * g.array()).matrix();
      }

      double expected_decrease = -direction.dot(g);
      if (expected_decrease < 1e-26) {
        diag.converged = true;
        break;
      }

      bool accepted = false;
      double alpha = memory.empty() ? step : 1.0;
      double f_try = f;
      RigidMotion T_try = T;
      for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
        for (int bt = 0; bt < 40; ++bt) {
          T_try = apply_tangent(T, alpha * direction);
          f_try = objective.evaluate(T_try, mask);
          if (std::isfinite(f_try) &&
              f_try <= f - 1e-4 * alpha * expected_decrease) {
            accepted = true;
            break;
          }
          alpha *= 0.5;
        }
        if (accepted || memory.empty()) break;
        // Quasi-Newton direction stalled: drop the memory and retry steepest.
        memory.clear();
        direction = -(precond.array() * g.array()).matrix();
        expected_decrease = -direction.dot(g);
        alpha = step;
      }
      if (!accepted) {
        diag.converged = true;  // no descent along the steepest direction
        break;
      }

      const double decrease = f - f_try;
      T = T_try;
      ++diag.iterations;
      if (memory.empty()) step = std::min(alpha * 4.0, 1e8);

      memory.emplace_back(alpha * direction, Vec6::Zero());  // y filled next iter
      if (memory.size() > kMemory) memory.pop_front();
      have_prev = true;

      mask = objective.valid_mask(T);
      f = objective.evaluate(T, mask);
      if (!std::isfinite(f)) throw Diverged(diag.iterations);
      if (decrease <= cfg.tolerance * std::max(1.0, std::abs(f_try))) {
        diag.converged = true;
        break;
      }
    }

    if (level == 0) {
      diag.photometric = f;
      if (cfg.check_gradient) {
        // Probed a little off the optimum: at the minimum both gradients are
        // near zero and their ratio is noise.
        Vec6 offset;
        offset << 2e-3 * z_bar, -1e-3 * z_bar, 1.5e-3 * z_bar, 1e-3, -8e-4,
            1.2e-3;
        const RigidMotion probe = apply_tangent(T, offset);
        const Mask probe_mask = objective.valid_mask(probe);
        if (probe_mask.count() > 0) {
          const Vec6 ga = objective.gradient(probe, probe_mask);
          const Vec6 gfd = objective.gradient_fd(probe, probe_mask, 1e-5);
          diag.gradient_check_residual =
              (ga - gfd).norm() / std::max(gfd.norm(), 1e-30);
        }
      }
    }
  }

  diag.smoothness = smoothness_loss(depth_t, img_t, cfg.normalize_smoothness);
  diag.final_objective = diag.photometric + cfg.lambda_s * diag.smoothness;
  return PoseEstimate{T, diag};
}

}  // namespace dfm
