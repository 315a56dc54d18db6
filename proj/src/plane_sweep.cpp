#include "dfm/plane_sweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dfm {

DepthLevels::DepthLevels(double d_min, double delta, int count)
    : d_min_(d_min), delta_(delta), count_(count) {
  if (!(d_min > 0.0) || !(delta > 0.0) || count < 2 || !std::isfinite(d_min) ||
      !std::isfinite(delta)) {
    throw std::invalid_argument(
        "depth levels require d_min > 0, delta > 0, count >= 2");
  }
}

DepthLevels DepthLevels::from_range(double d_min, double d_max, int count) {
  if (count < 2 || !(d_max > d_min)) {
    throw std::invalid_argument("depth range requires d_max > d_min, count >= 2");
  }
  return DepthLevels(d_min, (d_max - d_min) / (count - 1), count);
}

FrustumVolume::FrustumVolume(int width, int height, const DepthLevels& levels,
                             double fill, bool valid)
    : width_(width), height_(height), levels_(levels),
      values_(static_cast<size_t>(width) * height * levels.count(), fill),
      mask_(values_.size(), valid ? 1 : 0) {
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("frustum volume needs positive dimensions");
}

double FrustumVolume::valid_fraction() const {
  size_t n = 0;
  for (uint8_t m : mask_) n += m != 0;
  return mask_.empty() ? 0.0 : static_cast<double>(n) / mask_.size();
}

std::vector<FrustumSample> build_frustum_grid(int width, int height,
                                              const DepthLevels& levels) {
  std::vector<FrustumSample> grid;
  grid.reserve(static_cast<size_t>(width) * height * levels.count());
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u)
      for (int w = 0; w < levels.count(); ++w)
        grid.push_back(FrustumSample{u, v, w, levels.depth(w)});
  return grid;
}

std::string to_string(CostKind kind) {
  switch (kind) {
    case CostKind::zncc: return "zncc";
    case CostKind::sad: return "sad";
    case CostKind::ssd: return "ssd";
  }
  return "zncc";
}

CostKind cost_kind_from_string(const std::string& name) {
  if (name == "zncc") return CostKind::zncc;
  if (name == "sad") return CostKind::sad;
  if (name == "ssd") return CostKind::ssd;
  throw std::invalid_argument("unknown cost kind: " + name);
}

namespace {

// Full-window box sums with radius r. Only interior pixels
// [r, W-r) x [r, H-r) receive sums; the border is left untouched. The
// vertical pass keeps one running sum per column so both passes stream
// row-major.
template <typename Src>
void window_sums(int width, int height, int radius, Src&& src,
                 std::vector<double>& hsum, std::vector<double>& out) {
  const int d = 2 * radius + 1;
  hsum.assign(static_cast<size_t>(width) * height, 0.0);
  out.assign(static_cast<size_t>(width) * height, 0.0);
  if (width < d || height < d) return;

  for (int y = 0; y < height; ++y) {
    double run = 0.0;
    for (int x = 0; x < d; ++x) run += src(x, y);
    double* hrow = hsum.data() + static_cast<size_t>(y) * width;
    hrow[radius] = run;
    for (int x = radius + 1; x < width - radius; ++x) {
      run += src(x + radius, y) - src(x - radius - 1, y);
      hrow[x] = run;
    }
  }

  std::vector<double> col(width, 0.0);
  for (int y = 0; y < d; ++y) {
    const double* hrow = hsum.data() + static_cast<size_t>(y) * width;
    for (int x = radius; x < width - radius; ++x) col[x] += hrow[x];
  }
  double* orow = out.data() + static_cast<size_t>(radius) * width;
  std::copy(col.begin() + radius, col.end() - radius, orow + radius);
  for (int y = radius + 1; y < height - radius; ++y) {
    const double* add = hsum.data() + static_cast<size_t>(y + radius) * width;
    const double* sub =
        hsum.data() + static_cast<size_t>(y - radius - 1) * width;
    orow = out.data() + static_cast<size_t>(y) * width;
    for (int x = radius; x < width - radius; ++x) {
      col[x] += add[x] - sub[x];
      orow[x] = col[x];
    }
  }
}

constexpr double kFlatVariance = 1e-12;

double zncc_cost(double sum_t, double sum_tt, double sum_w, double sum_ww,
                 double sum_tw, double n) {
  const double mean_t = sum_t / n;
  const double mean_w = sum_w / n;
  const double var_t = std::max(0.0, sum_tt / n - mean_t * mean_t);
  const double var_w = std::max(0.0, sum_ww / n - mean_w * mean_w);
  double zncc;
  if (var_t < kFlatVariance && var_w < kFlatVariance) {
    zncc = 1.0;  // two flat patches match everywhere equally well
  } else if (var_t < kFlatVariance || var_w < kFlatVariance) {
    zncc = 0.0;
  } else {
    const double cov = sum_tw / n - mean_t * mean_w;
    zncc = std::clamp(cov / std::sqrt(var_t * var_w), -1.0, 1.0);
  }
  return 1.0 - zncc;
}

}  // namespace

FrustumVolume compute_cost_volume_warped(const ImageBuffer& img_t,
                                         const ImageBuffer& img_prev,
                                         const PixelWarper& warper,
                                         const DepthLevels& levels,
                                         const CostVolumeOptions& options) {
  const int width = img_t.width();
  const int height = img_t.height();
  const int radius = options.patch_radius;
  const int window = (2 * radius + 1) * (2 * radius + 1);
  FrustumVolume vol(width, height, levels);

  // Frame-t window statistics do not depend on the depth bin.
  std::vector<double> sum_t, sum_tt;
  const bool zncc = options.kind == CostKind::zncc;
  if (zncc) {
    std::vector<double> scratch;
    window_sums(width, height, radius,
                [&](int x, int y) { return double(img_t.at(x, y)); }, scratch,
                sum_t);
    window_sums(width, height, radius,
                [&](int x, int y) {
                  const double v = img_t.at(x, y);
                  return v * v;
                },
                scratch, sum_tt);
  }

  parallel_rows(levels.count(), options.threads, [&](int bin_begin,
                                                     int bin_end) {
    const size_t plane = static_cast<size_t>(width) * height;
    std::vector<float> warped(plane, 0.0f);
    std::vector<uint8_t> ok(plane, 0);
    std::vector<double> hsum, s1, s2, s3, cnt;

    for (int w = bin_begin; w < bin_end; ++w) {
      const double depth = levels.depth(w);
      for (int y = 0; y < height; ++y) {
        float* wrow = warped.data() + static_cast<size_t>(y) * width;
        uint8_t* orow = ok.data() + static_cast<size_t>(y) * width;
        for (int x = 0; x < width; ++x) {
          double up, vp;
          bool good = warper.warp(x, y, depth, &up, &vp);
          double value = 0.0;
          if (good) {
            const auto s = sample_bilinear(img_prev, up, vp);
            good = s.has_value();
            value = s.value_or(0.0);
          }
          wrow[x] = static_cast<float>(value);
          orow[x] = good ? 1 : 0;
        }
      }

      const auto warped_at = [&](int x, int y) {
        return double(warped[static_cast<size_t>(y) * width + x]);
      };
      window_sums(width, height, radius,
                  [&](int x, int y) {
                    return double(ok[static_cast<size_t>(y) * width + x]);
                  },
                  hsum, cnt);
      switch (options.kind) {
        case CostKind::zncc:
          window_sums(width, height, radius, warped_at, hsum, s1);
          window_sums(width, height, radius,
                      [&](int x, int y) {
                        const double v = warped_at(x, y);
                        return v * v;
                      },
                      hsum, s2);
          window_sums(width, height, radius,
                      [&](int x, int y) {
                        return double(img_t.at(x, y)) * warped_at(x, y);
                      },
                      hsum, s3);
          break;
        case CostKind::sad:
          window_sums(width, height, radius,
                      [&](int x, int y) {
                        return std::abs(double(img_t.at(x, y)) -
                                        warped_at(x, y));
                      },
                      hsum, s1);
          break;
        case CostKind::ssd:
          window_sums(width, height, radius,
                      [&](int x, int y) {
                        const double d = double(img_t.at(x, y)) - warped_at(x, y);
                        return d * d;
                      },
                      hsum, s1);
          break;
      }

      for (int y = radius; y < height - radius; ++y) {
        for (int x = radius; x < width - radius; ++x) {
          const size_t p = static_cast<size_t>(y) * width + x;
          if (cnt[p] < window - 0.5) continue;  // some warped sample invalid
          double cost;
          if (options.kind == CostKind::zncc) {
            cost = zncc_cost(sum_t[p], sum_tt[p], s1[p], s2[p], s3[p], window);
          } else {
            cost = s1[p] / window;
          }
          vol.set_value(x, y, w, cost);
          vol.set_valid(x, y, w, true);
        }
      }
    }
  });
  return vol;
}

namespace {

/// Fixed-motion warp: backproject with K, apply R|t, project with K. The
/// rotation is folded into the ray so rows stream with three fused
/// multiply-adds per pixel.
class RigidWarper final : public PixelWarper {
public:
  RigidWarper(const Intrinsics& cam, const RigidMotion& motion)
      : cam_(cam), r_(motion.rotation_matrix()), t_(motion.translation) {}

  bool warp(double u, double v, double depth, double* u_prev,
            double* v_prev) const override {
    const double rx = (u - cam_.cu) / cam_.fx;
    const double ry = (v - cam_.cv) / cam_.fy;
    const double x = depth * (r_(0, 0) * rx + r_(0, 1) * ry + r_(0, 2)) + t_.x();
    const double y = depth * (r_(1, 0) * rx + r_(1, 1) * ry + r_(1, 2)) + t_.y();
    const double z = depth * (r_(2, 0) * rx + r_(2, 1) * ry + r_(2, 2)) + t_.z();
    if (!(z > 0.0)) return false;
    *u_prev = cam_.fx * x / z + cam_.cu;
    *v_prev = cam_.fy * y / z + cam_.cv;
    return true;
  }

private:
  Intrinsics cam_;
  Mat3 r_;
  Vec3 t_;
};

}  // namespace

FrustumVolume compute_cost_volume(const ImageBuffer& img_t,
                                  const ImageBuffer& img_prev,
                                  const Intrinsics& cam,
                                  const RigidMotion& motion,
                                  const DepthLevels& levels,
                                  const CostVolumeOptions& options) {
  if (!img_t.same_size(img_prev)) {
    throw ImageSizeMismatch(img_t.width(), img_t.height(), img_prev.width(),
                            img_prev.height());
  }
  RigidWarper warper(cam, motion);
  return compute_cost_volume_warped(img_t, img_prev, warper, levels, options);
}

DepthDistribution cost_to_distribution(FrustumVolume costs, double temperature,
                                       int threads) {
  if (!(temperature > 0.0))
    throw std::invalid_argument("softmax temperature must be positive");
  const int width = costs.width();
  const int height = costs.height();
  const int count = costs.levels().count();
  Mask pixel_valid(width, height, false);

  parallel_rows(height, threads, [&](int y0, int y1) {
    std::vector<double> logits(count);
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < width; ++x) {
        double* bins = costs.bins(x, y);
        const uint8_t* mask = costs.bin_mask(x, y);
        double best = -std::numeric_limits<double>::infinity();
        for (int w = 0; w < count; ++w) {
          if (!mask[w]) continue;
          logits[w] = -bins[w] / temperature;
          best = std::max(best, logits[w]);
        }
        if (!std::isfinite(best)) {
          std::fill(bins, bins + count, 0.0);
          continue;
        }
        double norm = 0.0;
        for (int w = 0; w < count; ++w)
          if (mask[w]) norm += std::exp(logits[w] - best);
        for (int w = 0; w < count; ++w) {
          bins[w] = mask[w] ? std::exp(logits[w] - best) / norm : 0.0;
        }
        pixel_valid.set(x, y, true);
      }
    }
  });
  return DepthDistribution(std::move(costs), std::move(pixel_valid));
}

DepthMap distribution_to_depth(const DepthDistribution& dist, DepthMode mode,
                               bool refine) {
  const int width = dist.width();
  const int height = dist.height();
  const auto& levels = dist.levels();
  const int count = levels.count();
  DepthMap out{ImageBuffer(width, height, 0.0f), Mask(width, height, false)};

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!dist.pixel_valid(x, y)) continue;
      const double* bins = dist.volume().bins(x, y);
      double depth;
      if (mode == DepthMode::expectation) {
        depth = 0.0;
        for (int w = 0; w < count; ++w) depth += bins[w] * levels.depth(w);
      } else {
        int best = 0;
        for (int w = 1; w < count; ++w)
          if (bins[w] > bins[best]) best = w;
        double bin = best;
        if (refine && best > 0 && best < count - 1) {
          const double pm = bins[best - 1];
          const double p0 = bins[best];
          const double pp = bins[best + 1];
          const double denom = pm - 2.0 * p0 + pp;
          if (denom < 0.0) {
            bin += std::clamp(0.5 * (pm - pp) / denom, -0.5, 0.5);
          }
        }
        depth = levels.d_min() + bin * levels.delta();
      }
      out.depth.at(x, y) = static_cast<float>(depth);
      out.valid.set(x, y, true);
    }
  }
  return out;
}

}  // namespace dfm
