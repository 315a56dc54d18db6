#include "dfm/config.hpp"

#include <fstream>
#include <sstream>

#include "dfm/errors.hpp"
#include "json.hpp"

namespace dfm {

namespace {

using nlohmann::json;

template <typename T>
void pull(const json& j, const char* key, T* out) {
  if (j.contains(key)) *out = j.at(key).get<T>();
}

}  // namespace

std::string Config::to_json() const {
  json j = {
      {"levels", levels},
      {"d_min", d_min},
      {"d_max", d_max},
      {"cost", cost},
      {"temperature", temperature},
      {"patch_radius", patch_radius},
      {"voxel_edge", voxel_edge},
      {"x_min", x_min},
      {"x_max", x_max},
      {"y_min", y_min},
      {"y_max", y_max},
      {"z_min", z_min},
      {"z_max", z_max},
      {"alpha", alpha},
      {"lambda_s", lambda_s},
      {"lambda_r", lambda_r},
      {"pyramid_levels", pyramid_levels},
      {"max_iterations", max_iterations},
      {"gamma", gamma},
      {"fg_weight", fg_weight},
      {"bg_weight", bg_weight},
      {"eps_disparity", eps_disparity},
      {"eps_denominator", eps_denominator},
      {"sharpness", sharpness},
      {"camera_height", camera_height},
      {"threads", threads},
  };
  return j.dump(2);
}

Config Config::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw MalformedLine(0, std::string("config JSON: ") + e.what());
  }
  Config cfg;
  const json defaults = json::parse(cfg.to_json());
  for (const auto& item : j.items()) {
    if (!defaults.contains(item.key()))
      throw MalformedLine(0, "unknown config key '" + item.key() + "'");
  }
  try {
    pull(j, "levels", &cfg.levels);
    pull(j, "d_min", &cfg.d_min);
    pull(j, "d_max", &cfg.d_max);
    pull(j, "cost", &cfg.cost);
    pull(j, "temperature", &cfg.temperature);
    pull(j, "patch_radius", &cfg.patch_radius);
    pull(j, "voxel_edge", &cfg.voxel_edge);
    pull(j, "x_min", &cfg.x_min);
    pull(j, "x_max", &cfg.x_max);
    pull(j, "y_min", &cfg.y_min);
    pull(j, "y_max", &cfg.y_max);
    pull(j, "z_min", &cfg.z_min);
    pull(j, "z_max", &cfg.z_max);
    pull(j, "alpha", &cfg.alpha);
    pull(j, "lambda_s", &cfg.lambda_s);
    pull(j, "lambda_r", &cfg.lambda_r);
    pull(j, "pyramid_levels", &cfg.pyramid_levels);
    pull(j, "max_iterations", &cfg.max_iterations);
    pull(j, "gamma", &cfg.gamma);
    pull(j, "fg_weight", &cfg.fg_weight);
    pull(j, "bg_weight", &cfg.bg_weight);
    pull(j, "eps_disparity", &cfg.eps_disparity);
    pull(j, "eps_denominator", &cfg.eps_denominator);
    pull(j, "sharpness", &cfg.sharpness);
    pull(j, "camera_height", &cfg.camera_height);
    pull(j, "threads", &cfg.threads);
  } catch (const json::exception& e) {
    throw MalformedLine(0, std::string("config JSON: ") + e.what());
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TruncatedData("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace dfm
