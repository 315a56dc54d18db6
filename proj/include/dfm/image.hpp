#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dfm/errors.hpp"

namespace dfm {

/// Row-major single-channel float image. Intensities live in [0, 1]; depth
/// maps reuse the same container with meters in each cell. Pixel centers sit
/// at integer coordinates, so sampling at (x=j, y=i) returns at(j, i) exactly.
class ImageBuffer {
public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, float fill = 0.0f)
      : width_(width), height_(height),
        data_(static_cast<size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  float& at(int x, int y) { return data_[static_cast<size_t>(y) * width_ + x]; }
  float at(int x, int y) const {
    return data_[static_cast<size_t>(y) * width_ + x];
  }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float* row(int y) { return data_.data() + static_cast<size_t>(y) * width_; }
  const float* row(int y) const {
    return data_.data() + static_cast<size_t>(y) * width_;
  }

  bool same_size(const ImageBuffer& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

/// Per-pixel validity companion to ImageBuffer.
class Mask {
public:
  Mask() = default;
  Mask(int width, int height, bool value = false)
      : width_(width), height_(height),
        data_(static_cast<size_t>(width) * height, value ? 1 : 0) {}

  int width() const { return width_; }
  int height() const { return height_; }

  bool at(int x, int y) const {
    return data_[static_cast<size_t>(y) * width_ + x] != 0;
  }
  void set(int x, int y, bool value) {
    data_[static_cast<size_t>(y) * width_ + x] = value ? 1 : 0;
  }

  size_t count() const;
  const std::vector<uint8_t>& raw() const { return data_; }

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<uint8_t> data_;
};

/// Bilinear interpolation at continuous (x, y); nullopt outside
/// [0, W-1] x [0, H-1]. Exact at integer coordinates.
std::optional<double> sample_bilinear(const ImageBuffer& img, double x,
                                      double y);

/// sample_bilinear that treats coordinates on the domain boundary as valid
/// and everything outside as invalid, writing validity to *valid.
double sample_bilinear_or(const ImageBuffer& img, double x, double y,
                          double fallback, bool* valid = nullptr);

/// Downsample by a factor of two with a 2x2 box average (pyramid builder).
ImageBuffer downsample_half(const ImageBuffer& img);

/// Run fn(begin_row, end_row) over [0, rows) split across threads.
/// threads == 0 picks the hardware concurrency. Deterministic: the split is a
/// function of rows and the thread count only, and ranges are disjoint.
void parallel_rows(int rows, int threads,
                   const std::function<void(int, int)>& fn);

}  // namespace dfm
