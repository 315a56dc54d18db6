#include "dfm/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dfm {

namespace {

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TruncatedData("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TruncatedData("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw TruncatedData("short write to " + path);
}

bool host_is_little_endian() {
  const uint16_t probe = 1;
  return *reinterpret_cast<const uint8_t*>(&probe) == 1;
}

float byteswap_float(float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  bits = ((bits & 0xff000000u) >> 24) | ((bits & 0x00ff0000u) >> 8) |
         ((bits & 0x0000ff00u) << 8) | ((bits & 0x000000ffu) << 24);
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

// ---------------------------------------------------------------- PFM

void write_pfm(const std::string& path, const ImageBuffer& img) {
  std::ostringstream out;
  out << "Pf\n" << img.width() << " " << img.height() << "\n-1.0\n";
  std::string header = out.str();
  std::string bytes = header;
  bytes.reserve(header.size() + img.size() * 4);
  // Bottom row first.
  for (int y = img.height() - 1; y >= 0; --y) {
    const float* row = img.row(y);
    for (int x = 0; x < img.width(); ++x) {
      float v = row[x];
      if (!host_is_little_endian()) v = byteswap_float(v);
      bytes.append(reinterpret_cast<const char*>(&v), 4);
    }
  }
  write_file_bytes(path, bytes);
}

ImageBuffer read_pfm(const std::string& path) {
  const std::string bytes = read_file_bytes(path);
  std::istringstream in(bytes);
  std::string magic;
  in >> magic;
  if (magic != "Pf") throw BadMagic("expected grayscale PFM 'Pf', got '" + magic + "'");
  int width = 0, height = 0;
  double scale = 0.0;
  in >> width >> height >> scale;
  if (!in || width <= 0 || height <= 0 || scale == 0.0)
    throw BadMagic("bad PFM dimensions or scale");
  in.get();  // single whitespace after the scale
  const size_t offset = static_cast<size_t>(in.tellg());
  const size_t need = static_cast<size_t>(width) * height * 4;
  if (bytes.size() < offset + need)
    throw TruncatedData("PFM payload smaller than header promises");

  const bool file_little = scale < 0.0;
  const bool swap = file_little != host_is_little_endian();
  ImageBuffer img(width, height);
  const char* src = bytes.data() + offset;
  for (int y = height - 1; y >= 0; --y) {
    float* row = img.row(y);
    std::memcpy(row, src, static_cast<size_t>(width) * 4);
    src += static_cast<size_t>(width) * 4;
    if (swap)
      for (int x = 0; x < width; ++x) row[x] = byteswap_float(row[x]);
  }
  return img;
}

void write_depth_pfm(const std::string& path, const DepthMap& map) {
  ImageBuffer img = map.depth;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (!map.valid.at(x, y)) img.at(x, y) = 0.0f;
  write_pfm(path, img);
}

DepthMap read_depth_pfm(const std::string& path) {
  ImageBuffer img = read_pfm(path);
  Mask valid(img.width(), img.height(), false);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (img.at(x, y) > 0.0f) valid.set(x, y, true);
  return DepthMap{std::move(img), std::move(valid)};
}

// ---------------------------------------------------------------- PNM

namespace {

uint8_t to_byte(float v) {
  const double scaled = std::floor(double(v) * 255.0 + 0.5);  // round-half-up
  return static_cast<uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

// Reads one header token, skipping whitespace and '#' comments.
std::string pnm_token(const std::string& bytes, size_t* pos) {
  size_t i = *pos;
  while (i < bytes.size()) {
    if (std::isspace(static_cast<unsigned char>(bytes[i]))) {
      ++i;
    } else if (bytes[i] == '#') {
      while (i < bytes.size() && bytes[i] != '\n') ++i;
    } else {
      break;
    }
  }
  size_t start = i;
  while (i < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[i])))
    ++i;
  *pos = i;
  if (start == i) throw TruncatedData("PNM header ended early");
  return bytes.substr(start, i - start);
}

}  // namespace

void write_pgm(const std::string& path, const ImageBuffer& img) {
  std::ostringstream out;
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  std::string bytes = out.str();
  bytes.reserve(bytes.size() + img.size());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      bytes.push_back(static_cast<char>(to_byte(img.at(x, y))));
  write_file_bytes(path, bytes);
}

void write_ppm(const std::string& path, const ImageBuffer& img) {
  std::ostringstream out;
  out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
  std::string bytes = out.str();
  bytes.reserve(bytes.size() + img.size() * 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const char b = static_cast<char>(to_byte(img.at(x, y)));
      bytes.push_back(b);
      bytes.push_back(b);
      bytes.push_back(b);
    }
  }
  write_file_bytes(path, bytes);
}

ImageBuffer read_pnm(const std::string& path) {
  const std::string bytes = read_file_bytes(path);
  size_t pos = 0;
  const std::string magic = pnm_token(bytes, &pos);
  if (magic != "P5" && magic != "P6")
    throw BadMagic("expected binary PGM/PPM (P5/P6), got '" + magic + "'");
  const int channels = magic == "P6" ? 3 : 1;
  int width, height, maxval;
  try {
    width = std::stoi(pnm_token(bytes, &pos));
    height = std::stoi(pnm_token(bytes, &pos));
    maxval = std::stoi(pnm_token(bytes, &pos));
  } catch (const std::logic_error&) {
    throw BadMagic("non-numeric PNM header field");
  }
  if (maxval != 255) throw BadMagic("only maxval 255 is supported");
  if (width <= 0 || height <= 0) throw BadMagic("bad PNM dimensions");
  ++pos;  // single whitespace byte after maxval
  const size_t need = static_cast<size_t>(width) * height * channels;
  if (bytes.size() < pos + need)
    throw TruncatedData("PNM payload smaller than header promises");

  ImageBuffer img(width, height);
  const uint8_t* src = reinterpret_cast<const uint8_t*>(bytes.data()) + pos;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (channels == 1) {
        img.at(x, y) = float(*src++) / 255.0f;
      } else {
        const float mean = (float(src[0]) + float(src[1]) + float(src[2])) / 3.0f;
        img.at(x, y) = mean / 255.0f;
        src += 3;
      }
    }
  }
  return img;
}

// ---------------------------------------------------------------- PNG

namespace {

uint32_t read_be32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) |
         (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

ImageBuffer read_png(const std::string& path) {
  const std::string bytes = read_file_bytes(path);
  static const uint8_t signature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a,
                                       '\n'};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), signature, 8) != 0)
    throw BadMagic("not a PNG file");

  uint32_t width = 0, height = 0;
  int bit_depth = 0, color_type = 0, interlace = 0;
  std::string idat;
  size_t pos = 8;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* p = reinterpret_cast<const uint8_t*>(bytes.data()) + pos;
    const uint32_t length = read_be32(p);
    const std::string type(bytes, pos + 4, 4);
    if (pos + 12 + length > bytes.size())
      throw TruncatedData("PNG chunk exceeds file size");
    const uint8_t* data = p + 8;
    if (type == "IHDR") {
      width = read_be32(data);
      height = read_be32(data + 4);
      bit_depth = data[8];
      color_type = data[9];
      interlace = data[12];
    } else if (type == "IDAT") {
      idat.append(bytes, pos + 8, length);
    } else if (type == "IEND") {
      break;
    }
    pos += 12 + length;
  }
  if (width == 0 || height == 0) throw BadMagic("PNG missing IHDR");
  if (bit_depth != 8 || interlace != 0)
    throw BadMagic("only 8-bit non-interlaced PNG is supported");
  int channels;
  switch (color_type) {
    case 0: channels = 1; break;  // gray
    case 2: channels = 3; break;  // rgb
    case 4: channels = 2; break;  // gray+alpha
    case 6: channels = 4; break;  // rgba
    default: throw BadMagic("unsupported PNG color type");
  }

  const size_t stride = static_cast<size_t>(width) * channels;
  const size_t raw_size = (stride + 1) * height;
  std::vector<uint8_t> raw(raw_size);
  uLongf out_size = raw_size;
  const int rc = uncompress(raw.data(), &out_size,
                            reinterpret_cast<const Bytef*>(idat.data()),
                            static_cast<uLong>(idat.size()));
  if (rc != Z_OK || out_size != raw_size)
    throw TruncatedData("PNG inflate failed");

  // Undo per-row filters in place (bpp = bytes per pixel).
  std::vector<uint8_t> pixels(stride * height);
  const int bpp = channels;
  for (uint32_t y = 0; y < height; ++y) {
    const uint8_t filter = raw[(stride + 1) * y];
    const uint8_t* src = raw.data() + (stride + 1) * y + 1;
    uint8_t* dst = pixels.data() + stride * y;
    const uint8_t* up = y > 0 ? pixels.data() + stride * (y - 1) : nullptr;
    for (size_t i = 0; i < stride; ++i) {
      const int left = i >= size_t(bpp) ? dst[i - bpp] : 0;
      const int above = up ? up[i] : 0;
      const int corner = (up && i >= size_t(bpp)) ? up[i - bpp] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += left; break;
        case 2: v += above; break;
        case 3: v += (left + above) / 2; break;
        case 4: v += paeth(left, above, corner); break;
        default: throw BadMagic("unknown PNG filter type");
      }
      dst[i] = static_cast<uint8_t>(v & 0xff);
    }
  }

  ImageBuffer img(static_cast<int>(width), static_cast<int>(height));
  const int color_channels = channels >= 3 ? 3 : 1;
  for (uint32_t y = 0; y < height; ++y) {
    const uint8_t* row = pixels.data() + stride * y;
    for (uint32_t x = 0; x < width; ++x) {
      const uint8_t* px = row + x * channels;
      float sum = 0.0f;
      for (int c = 0; c < color_channels; ++c) sum += px[c];
      img.at(static_cast<int>(x), static_cast<int>(y)) =
          sum / (255.0f * color_channels);
    }
  }
  return img;
}

ImageBuffer read_image(const std::string& path) {
  const std::string bytes = read_file_bytes(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' &&
      (bytes[1] == 'f' || bytes[1] == '5' || bytes[1] == '6')) {
    return bytes[1] == 'f' ? read_pfm(path) : read_pnm(path);
  }
  if (bytes.size() >= 4 && static_cast<uint8_t>(bytes[0]) == 0x89 &&
      bytes[1] == 'P') {
    return read_png(path);
  }
  throw BadMagic("unrecognized image format in " + path);
}

Mask read_mask_image(const std::string& path) {
  const ImageBuffer img = read_image(path);
  Mask mask(img.width(), img.height(), false);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (img.at(x, y) > 0.0f) mask.set(x, y, true);
  return mask;
}

// ------------------------------------------------------------ calibration

std::vector<CalibrationRecord> parse_calibration(const std::string& text) {
  std::vector<CalibrationRecord> records;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;  // blank

    // Only projection keys P<digit>[:] are parsed; other calibration keys
    // (R0_rect, Tr_velo_to_cam, ...) are skipped.
    bool colon_in_key = !key.empty() && key.back() == ':';
    std::string id = colon_in_key ? key.substr(0, key.size() - 1) : key;
    if (id.size() < 2 || id[0] != 'P' ||
        !std::isdigit(static_cast<unsigned char>(id[1]))) {
      continue;
    }
    if (!colon_in_key) {
      std::string sep;
      if (!(ls >> sep) || sep != ":")
        throw MalformedLine(line_number, "missing ':' after camera id " + id);
    }

    std::vector<double> values;
    std::string token;
    while (ls >> token) {
      try {
        size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        values.push_back(v);
      } catch (const std::logic_error&) {
        throw MalformedLine(line_number, "non-numeric token '" + token + "'");
      }
    }
    if (values.size() != 12)
      throw MalformedLine(line_number,
                          "expected 12 projection values, got " +
                              std::to_string(values.size()));
    for (double v : values)
      if (!std::isfinite(v))
        throw MalformedLine(line_number, "non-finite projection value");

    CalibrationRecord rec;
    rec.camera_id = id;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) rec.projection(r, c) = values[r * 4 + c];

    // Rectified KITTI projections are K[I|t]: the left 3x3 must be upper
    // triangular with bottom row (0,0,1). Anything else is a general K[R|t],
    // which is rejected rather than half-supported.
    const auto& m = rec.projection;
    const double scale = std::abs(m(0, 0)) + std::abs(m(1, 1)) + 1e-12;
    if (std::abs(m(1, 0)) > 1e-6 * scale || std::abs(m(2, 0)) > 1e-9 ||
        std::abs(m(2, 1)) > 1e-9 || std::abs(m(2, 2) - 1.0) > 1e-9) {
      throw UnsupportedCalibration(id + " has a rotated projection");
    }
    if (!(m(0, 0) > 0.0) || !(m(1, 1) > 0.0))
      throw MalformedLine(line_number, "non-positive focal length in " + id);

    rec.intrinsics = Intrinsics(m(0, 0), m(1, 1), m(0, 2), m(1, 2));
    rec.baseline_tx = -m(0, 3) / m(0, 0);
    for (const auto& existing : records)
      if (existing.camera_id == id)
        throw MalformedLine(line_number, "duplicate camera id " + id);
    records.push_back(rec);
  }
  if (records.empty()) throw MissingCamera("any");
  return records;
}

std::vector<CalibrationRecord> read_calibration_file(const std::string& path) {
  return parse_calibration(read_file_bytes(path));
}

const CalibrationRecord& find_camera(
    const std::vector<CalibrationRecord>& records, const std::string& id) {
  for (const auto& rec : records)
    if (rec.camera_id == id) return rec;
  throw MissingCamera(id);
}

// ------------------------------------------------------------------ poses

std::vector<RigidMotion> parse_poses(const std::string& text) {
  std::vector<RigidMotion> poses;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    std::istringstream ls(line);
    double tx, ty, tz, qw, qx, qy, qz;
    if (!(ls >> tx)) continue;  // blank
    if (!(ls >> ty >> tz >> qw >> qx >> qy >> qz))
      throw MalformedLine(line_number,
                          "pose line needs `tx ty tz qw qx qy qz`");
    std::string extra;
    if (ls >> extra)
      throw MalformedLine(line_number, "trailing token '" + extra + "'");
    poses.emplace_back(UnitQuaternion(qw, qx, qy, qz), Vec3(tx, ty, tz));
  }
  return poses;
}

std::vector<RigidMotion> read_pose_file(const std::string& path) {
  return parse_poses(read_file_bytes(path));
}

RigidMotion read_single_pose(const std::string& path) {
  const auto poses = read_pose_file(path);
  if (poses.empty()) throw MalformedLine(0, "pose file " + path + " is empty");
  return poses.front();
}

std::string format_pose(const RigidMotion& m) {
  std::ostringstream out;
  out.precision(17);
  out << m.translation.x() << " " << m.translation.y() << " "
      << m.translation.z() << " " << m.rotation.w() << " " << m.rotation.x()
      << " " << m.rotation.y() << " " << m.rotation.z();
  return out.str();
}

void write_pose_file(const std::string& path,
                     const std::vector<RigidMotion>& poses) {
  std::ostringstream out;
  out << "# tx ty tz qw qx qy qz\n";
  for (const auto& pose : poses) out << format_pose(pose) << "\n";
  write_file_bytes(path, out.str());
}

// ----------------------------------------------------------------- volume

void write_volume(const std::string& path, const FrustumVolume& volume,
                  const std::string& kind) {
  nlohmann::json header = {
      {"width", volume.width()},
      {"height", volume.height()},
      {"levels",
       {{"d_min", volume.levels().d_min()},
        {"delta", volume.levels().delta()},
        {"count", volume.levels().count()}}},
      {"kind", kind},
      {"dtype", "float64"},
  };
  std::string bytes = "DFMVOL1\n" + header.dump() + "\n";
  bytes.append(reinterpret_cast<const char*>(volume.values().data()),
               volume.values().size() * 8);
  bytes.append(reinterpret_cast<const char*>(volume.mask().data()),
               volume.mask().size());
  write_file_bytes(path, bytes);
}

VolumeFile read_volume(const std::string& path) {
  const std::string bytes = read_file_bytes(path);
  const std::string magic = "DFMVOL1\n";
  if (bytes.rfind(magic, 0) != 0) throw BadMagic("not a DFMVOL1 file");
  const size_t header_end = bytes.find('\n', magic.size());
  if (header_end == std::string::npos) throw TruncatedData("missing volume header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(
        bytes.substr(magic.size(), header_end - magic.size()));
  } catch (const nlohmann::json::exception& e) {
    throw BadMagic(std::string("bad volume header: ") + e.what());
  }
  const int width = header.at("width").get<int>();
  const int height = header.at("height").get<int>();
  const auto& lv = header.at("levels");
  DepthLevels levels(lv.at("d_min").get<double>(), lv.at("delta").get<double>(),
                     lv.at("count").get<int>());
  FrustumVolume volume(width, height, levels);
  if (header.value("dtype", "float64") != std::string("float64"))
    throw BadMagic("unsupported volume dtype");
  const size_t samples = static_cast<size_t>(width) * height * levels.count();
  const size_t offset = header_end + 1;
  if (bytes.size() < offset + samples * 9)
    throw TruncatedData("volume payload smaller than header promises");
  std::memcpy(volume.values().data(), bytes.data() + offset, samples * 8);
  std::memcpy(volume.mask().data(), bytes.data() + offset + samples * 8,
              samples);
  return VolumeFile{std::move(volume),
                    header.value("kind", std::string("cost"))};
}

// -------------------------------------------------------------------- CSV

std::vector<Correspondence> read_correspondence_csv(const std::string& path) {
  const std::string text = read_file_bytes(path);
  std::vector<Correspondence> out;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    Correspondence c;
    if (!(ls >> c.u1)) {
      if (line_number == 1) continue;  // header row
      throw MalformedLine(line_number, "expected numeric u1");
    }
    if (!(ls >> c.v1 >> c.u2 >> c.v2))
      throw MalformedLine(line_number, "expected u1,v1,u2,v2");
    out.push_back(c);
  }
  return out;
}

}  // namespace dfm
