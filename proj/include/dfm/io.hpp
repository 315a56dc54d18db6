#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "dfm/closed_form.hpp"
#include "dfm/geometry.hpp"
#include "dfm/image.hpp"
#include "dfm/plane_sweep.hpp"

namespace dfm {

// -- PFM (grayscale float) ----------------------------------------------
// Written little-endian with scale -1.0, rows bottom-to-top per the format's
// convention. write/read round-trips are bit-identical.

void write_pfm(const std::string& path, const ImageBuffer& img);
ImageBuffer read_pfm(const std::string& path);

/// Depth-map flavored helpers: invalid pixels are stored as 0 and read back
/// as invalid (depth maps are strictly positive where defined).
void write_depth_pfm(const std::string& path, const DepthMap& map);
DepthMap read_depth_pfm(const std::string& path);

// -- PPM / PGM (8-bit binary, maxval 255) ---------------------------------
// [0,1] maps to [0,255] with round-half-up; reading divides by 255. PPM
// writes the gray value into all three channels and reads back their mean.

void write_pgm(const std::string& path, const ImageBuffer& img);
void write_ppm(const std::string& path, const ImageBuffer& img);
ImageBuffer read_pnm(const std::string& path);  // P5 or P6

/// 8-bit grayscale/RGB(A) non-interlaced PNG, mean of the color channels.
ImageBuffer read_png(const std::string& path);

/// Any supported image by magic: PFM, PGM/PPM, PNG.
ImageBuffer read_image(const std::string& path);

/// Validity mask from an image file: nonzero means true.
Mask read_mask_image(const std::string& path);

// -- KITTI-style calibration ----------------------------------------------

struct CalibrationRecord {
  std::string camera_id;           // e.g. "P2"
  Eigen::Matrix<double, 3, 4> projection;
  Intrinsics intrinsics;
  double baseline_tx = 0.0;        // -P03/P00, meters
};

/// Parses `Pk: v00 ... v23` lines (whitespace tolerant, '#' comments and
/// unrelated keys skipped). Only rectified K[I|t] projections are accepted.
/// Rejected malformation classes (each with its error type):
///   MissingCamera    - empty file; only comments; requested id absent
///   MalformedLine    - non-numeric token; <12 or >12 values; missing ':';
///                      non-finite value; non-positive focal; duplicate id
///   UnsupportedCalibration - left 3x3 block is not upper-triangular with
///                      unit bottom row (general K[R|t] not supported)
std::vector<CalibrationRecord> parse_calibration(const std::string& text);
std::vector<CalibrationRecord> read_calibration_file(const std::string& path);
const CalibrationRecord& find_camera(
    const std::vector<CalibrationRecord>& records, const std::string& id);

// -- pose text format -------------------------------------------------------
// One motion per line: `tx ty tz qw qx qy qz` (meters, unit quaternion).
// '#' starts a comment; blank lines are skipped.

std::vector<RigidMotion> parse_poses(const std::string& text);
std::vector<RigidMotion> read_pose_file(const std::string& path);
RigidMotion read_single_pose(const std::string& path);
void write_pose_file(const std::string& path,
                     const std::vector<RigidMotion>& poses);
std::string format_pose(const RigidMotion& motion);

// -- frustum volume container ------------------------------------------
// "DFMVOL1\n" + one-line JSON header + "\n" + float32 values (little-endian,
// (y*W + x)*count + w order) + one validity byte per sample.

void write_volume(const std::string& path, const FrustumVolume& volume,
                  const std::string& kind);
struct VolumeFile {
  FrustumVolume volume;
  std::string kind;
};
VolumeFile read_volume(const std::string& path);

// -- correspondence CSV -------------------------------------------------

/// CSV with columns u1,v1,u2,v2 (header row optional).
std::vector<Correspondence> read_correspondence_csv(const std::string& path);

}  // namespace dfm
