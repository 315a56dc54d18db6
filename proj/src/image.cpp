#include "dfm/image.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace dfm {

size_t Mask::count() const {
  size_t n = 0;
  for (uint8_t v : data_) n += v != 0;
  return n;
}

std::optional<double> sample_bilinear(const ImageBuffer& img, double x,
                                      double y) {
  if (!(x >= 0.0) || !(y >= 0.0) || !(x <= img.width() - 1.0) ||
      !(y <= img.height() - 1.0)) {
    return std::nullopt;
  }
  const int x0 = std::min(static_cast<int>(x), img.width() - 2 >= 0
                                                   ? img.width() - 2
                                                   : 0);
  const int y0 = std::min(static_cast<int>(y), img.height() - 2 >= 0
                                                   ? img.height() - 2
                                                   : 0);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  const double top = (1.0 - ax) * img.at(x0, y0) + ax * img.at(x1, y0);
  const double bot = (1.0 - ax) * img.at(x0, y1) + ax * img.at(x1, y1);
  return (1.0 - ay) * top + ay * bot;
}

double sample_bilinear_or(const ImageBuffer& img, double x, double y,
                          double fallback, bool* valid) {
  const auto s = sample_bilinear(img, x, y);
  if (valid) *valid = s.has_value();
  return s.value_or(fallback);
}

ImageBuffer downsample_half(const ImageBuffer& img) {
  const int w = std::max(1, img.width() / 2);
  const int h = std::max(1, img.height() / 2);
  ImageBuffer out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int x1 = std::min(2 * x + 1, img.width() - 1);
      const int y1 = std::min(2 * y + 1, img.height() - 1);
      out.at(x, y) = 0.25f * (img.at(2 * x, 2 * y) + img.at(x1, 2 * y) +
                              img.at(2 * x, y1) + img.at(x1, y1));
    }
  }
  return out;
}

void parallel_rows(int rows, int threads,
                   const std::function<void(int, int)>& fn) {
  if (rows <= 0) return;
  int n = threads > 0 ? threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  n = std::clamp(n, 1, rows);
  if (n == 1) {
    fn(0, rows);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n);
  const int chunk = (rows + n - 1) / n;
  for (int i = 0; i < n; ++i) {
    const int begin = i * chunk;
    const int end = std::min(rows, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace dfm
