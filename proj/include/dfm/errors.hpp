#pragma once

#include <stdexcept>
#include <string>

namespace dfm {

// Two failure families, mapped to CLI exit codes: bad input (2) and
// numerical/geometric failure (3).
enum class ErrorCategory { input, numeric };

class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

private:
  ErrorCategory category_;
};

// -- geometry ----------------------------------------------------------------

struct NonPositiveDepth : Error {
  explicit NonPositiveDepth(double z)
      : Error(ErrorCategory::numeric,
              "projection requires positive depth, got z=" + std::to_string(z)) {}
};

struct BehindCamera : Error {
  BehindCamera()
      : Error(ErrorCategory::numeric, "warped point lies behind the camera") {}
};

struct ZeroQuaternion : Error {
  ZeroQuaternion()
      : Error(ErrorCategory::numeric,
              "quaternion norm below 1e-15, cannot normalize") {}
};

// -- closed-form depth -------------------------------------------------------

struct ZeroDisparity : Error {
  explicit ZeroDisparity(double disp)
      : Error(ErrorCategory::numeric,
              "disparity magnitude " + std::to_string(disp) +
                  " below threshold, depth undefined") {}
};

struct DegenerateDenominator : Error {
  explicit DegenerateDenominator(const std::string& which)
      : Error(ErrorCategory::numeric,
              "two-view depth denominator vanishes (" + which + ")") {}
};

struct NoValidSolution : Error {
  NoValidSolution()
      : Error(ErrorCategory::numeric,
              "both u- and v-derived depth forms are degenerate") {}
};

// -- images, grids, masks ----------------------------------------------------

struct ImageSizeMismatch : Error {
  ImageSizeMismatch(int w1, int h1, int w2, int h2)
      : Error(ErrorCategory::input,
              "image sizes differ: " + std::to_string(w1) + "x" +
                  std::to_string(h1) + " vs " + std::to_string(w2) + "x" +
                  std::to_string(h2)) {}
};

struct GridMismatch : Error {
  explicit GridMismatch(const std::string& what)
      : Error(ErrorCategory::input, "frustum grids differ: " + what) {}
};

struct CropOutOfBounds : Error {
  explicit CropOutOfBounds(const std::string& what)
      : Error(ErrorCategory::input, "crop exceeds image bounds: " + what) {}
};

struct EmptyMask : Error {
  EmptyMask() : Error(ErrorCategory::numeric, "no valid pixels in mask") {}
};

struct NoValidPixels : Error {
  NoValidPixels()
      : Error(ErrorCategory::numeric, "no valid pixels with ground truth") {}
};

// -- pose optimization -------------------------------------------------------

struct Diverged : Error {
  explicit Diverged(int steps)
      : Error(ErrorCategory::numeric,
              "objective failed to decrease for " + std::to_string(steps) +
                  " consecutive steps") {}
};

struct DegenerateOverlap : Error {
  explicit DegenerateOverlap(double fraction)
      : Error(ErrorCategory::numeric,
              "valid overlap fraction " + std::to_string(fraction) +
                  " below 10%") {}
};

// -- synthetic scenes --------------------------------------------------------

struct InsufficientVisibility : Error {
  InsufficientVisibility(int found, int requested)
      : Error(ErrorCategory::numeric,
              "only " + std::to_string(found) + " of " +
                  std::to_string(requested) +
                  " co-visible correspondences found") {}
};

// -- file I/O ----------------------------------------------------------------

struct BadMagic : Error {
  explicit BadMagic(const std::string& what)
      : Error(ErrorCategory::input, "unsupported file header: " + what) {}
};

struct TruncatedData : Error {
  explicit TruncatedData(const std::string& what)
      : Error(ErrorCategory::input, "truncated data: " + what) {}
};

struct MalformedLine : Error {
  MalformedLine(int line, const std::string& reason)
      : Error(ErrorCategory::input,
              "line " + std::to_string(line) + ": " + reason),
        line_number(line) {}
  int line_number;
};

struct MissingCamera : Error {
  explicit MissingCamera(const std::string& id)
      : Error(ErrorCategory::input, "calibration has no camera '" + id + "'") {}
};

struct UnsupportedCalibration : Error {
  explicit UnsupportedCalibration(const std::string& what)
      : Error(ErrorCategory::input,
              "only rectified K[I|t] projections are supported: " + what) {}
};

}  // namespace dfm
