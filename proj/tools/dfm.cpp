// dfm: batch front end for the depth-from-motion library.
//
// Subcommands: synth, depth, depth-closed-form, fuse, pose, warp, lift, eval.
// Exit codes: 0 success, 2 input error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "dfm/augment.hpp"
#include "dfm/closed_form.hpp"
#include "dfm/config.hpp"
#include "dfm/eval.hpp"
#include "dfm/fusion.hpp"
#include "dfm/io.hpp"
#include "dfm/plane_sweep.hpp"
#include "dfm/pose.hpp"
#include "dfm/synth.hpp"
#include "dfm/voxel.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dfm::TruncatedData("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw dfm::TruncatedData("cannot open " + path + " for writing");
  out << text;
}

dfm::Intrinsics load_intrinsics(const std::string& calib_path,
                                const std::string& camera_id) {
  const auto records = dfm::read_calibration_file(calib_path);
  return dfm::find_camera(records, camera_id).intrinsics;
}

void write_image_by_extension(const std::string& path,
                              const dfm::ImageBuffer& img) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".pfm") dfm::write_pfm(path, img);
  else if (ext == ".ppm") dfm::write_ppm(path, img);
  else dfm::write_pgm(path, img);
}

dfm::AugmentationSpec load_aug(const std::string& arg) {
  if (arg.empty()) return dfm::AugmentationSpec::identity();
  // Inline JSON or a path to a JSON file.
  if (!arg.empty() && arg.front() == '{')
    return dfm::AugmentationSpec::from_json(arg);
  return dfm::AugmentationSpec::from_json(read_text(arg));
}

// Voxel grids and BEV maps are written as a raw little-endian payload next
// to a JSON sidecar header (<out>.json).
void write_grid(const std::string& path, const dfm::VoxelGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dfm::TruncatedData("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(grid.values().data()),
            static_cast<std::streamsize>(grid.values().size() * 8));
  out.write(reinterpret_cast<const char*>(grid.occupancy().data()),
            static_cast<std::streamsize>(grid.occupancy().size()));
  const auto& s = grid.spec();
  json header = {
      {"layout", "values<f64 le> then occupancy<u8>, index (ix*ny+iy)*nz+iz"},
      {"nx", grid.nx()},
      {"ny", grid.ny()},
      {"nz", grid.nz()},
      {"x_range", {s.x_min, s.x_max}},
      {"y_range", {s.y_min, s.y_max}},
      {"z_range", {s.z_min, s.z_max}},
      {"edge", s.edge},
      {"occupied", grid.occupied_count()},
  };
  write_text(path + ".json", header.dump(2) + "\n");
}

void write_bev(const std::string& path, const dfm::BevMap& bev) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dfm::TruncatedData("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bev.values.data()),
            static_cast<std::streamsize>(bev.values.size() * 8));
  out.write(reinterpret_cast<const char*>(bev.occupied.data()),
            static_cast<std::streamsize>(bev.occupied.size()));
  json header = {
      {"layout", "values<f64 le> then occupancy<u8>, index (c*nx+ix)*nz+iz"},
      {"channels", bev.channels},
      {"nx", bev.nx},
      {"nz", bev.nz},
  };
  write_text(path + ".json", header.dump(2) + "\n");
}

json stats_to_json(const dfm::ErrorStats& stats) {
  return json{{"median_m", stats.median},
              {"ratio_above_0.2m", stats.ratio_above[0]},
              {"ratio_above_0.4m", stats.ratio_above[1]},
              {"ratio_above_0.8m", stats.ratio_above[2]},
              {"ratio_above_1.6m", stats.ratio_above[3]},
              {"pixels", stats.count}};
}

struct CommonArgs {
  std::string config_path;
  int threads = -1;  // -1: take the config's value

  dfm::Config config() const {
    dfm::Config cfg = config_path.empty() ? dfm::Config()
                                          : dfm::Config::load(config_path);
    if (threads >= 0) cfg.threads = threads;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"depth-from-motion geometry toolkit"};
  app.require_subcommand(1);

  CommonArgs common;
  app.add_option("--config", common.config_path,
                 "JSON config with pipeline defaults");
  app.add_option("--threads", common.threads, "worker threads (0 = all cores)");

  // ------------------------------------------------------------------ synth
  auto* synth = app.add_subcommand("synth", "render a synthetic scene");
  struct {
    std::string scene, poses, out;
    int width = 376, height = 240;
    double focal = 721.5, cu = -1.0, cv = -1.0;
    int correspondences = 0;
    uint64_t seed = 1;
    bool supersample = false;
  } synth_args;
  synth->add_option("--scene", synth_args.scene, "scene JSON")->required();
  synth->add_option("--poses", synth_args.poses, "pose file, one world->camera pose per line")->required();
  synth->add_option("--out", synth_args.out, "output directory")->required();
  synth->add_option("--width", synth_args.width);
  synth->add_option("--height", synth_args.height);
  synth->add_option("--focal", synth_args.focal, "focal length in pixels");
  synth->add_option("--cu", synth_args.cu, "principal point x (default W/2)");
  synth->add_option("--cv", synth_args.cv, "principal point y (default H/2)");
  synth->add_option("--corr", synth_args.correspondences,
                    "sample N correspondences per consecutive pose pair");
  synth->add_option("--seed", synth_args.seed);
  synth->add_flag("--supersample", synth_args.supersample, "2x2 antialiasing");

  // ------------------------------------------------------------------ depth
  auto* depth = app.add_subcommand("depth", "plane-sweep depth from an image pair");
  struct {
    std::string img_t, img_prev, calib, camera = "P2", pose, out;
    std::string out_meta, out_vol, out_conf, out_csv;
    std::string aug_t, aug_prev;
    int canon_width = 0, canon_height = 0;
    int levels = -1;
    double dmin = -1, dmax = -1, temp = -1;
    std::string cost, mode = "argmax";
    int patch = -1;
  } depth_args;
  depth->add_option("--img-t", depth_args.img_t, "frame t image")->required();
  depth->add_option("--img-prev", depth_args.img_prev, "frame t-dt image")->required();
  depth->add_option("--calib", depth_args.calib, "KITTI-style calibration file")->required();
  depth->add_option("--cam", depth_args.camera, "camera id in the calibration");
  depth->add_option("--pose", depth_args.pose,
                    "motion file: frame-t to frame-(t-dt) camera coordinates")->required();
  depth->add_option("--out", depth_args.out, "output depth PFM")->required();
  depth->add_option("--out-meta", depth_args.out_meta, "metadata JSON");
  depth->add_option("--out-csv", depth_args.out_csv,
                    "u,v,depth rows for spreadsheet inspection");
  depth->add_option("--out-vol", depth_args.out_vol, "depth distribution volume");
  depth->add_option("--out-conf", depth_args.out_conf, "stereo confidence PFM");
  depth->add_option("--levels", depth_args.levels, "depth bin count");
  depth->add_option("--dmin", depth_args.dmin);
  depth->add_option("--dmax", depth_args.dmax);
  depth->add_option("--cost", depth_args.cost, "zncc|sad|ssd");
  depth->add_option("--temp", depth_args.temp, "softmax temperature");
  depth->add_option("--patch", depth_args.patch, "matching patch radius");
  depth->add_option("--mode", depth_args.mode, "argmax|expectation");
  depth->add_option("--aug-t", depth_args.aug_t, "frame-t augmentation JSON (inline or file)");
  depth->add_option("--aug-prev", depth_args.aug_prev, "frame t-dt augmentation JSON");
  depth->add_option("--canon-width", depth_args.canon_width,
                    "un-augmented image width (required with --aug-*)");
  depth->add_option("--canon-height", depth_args.canon_height);

  // ------------------------------------------------------- depth-closed-form
  auto* closed = app.add_subcommand("depth-closed-form",
                                    "two-view closed-form depth per correspondence");
  struct {
    std::string calib, camera = "P2", pose, corr, out;
    double obj_tx = 0, obj_ty = 0, obj_tz = 0;
  } closed_args;
  closed->add_option("--calib", closed_args.calib)->required();
  closed->add_option("--cam", closed_args.camera);
  closed->add_option("--pose", closed_args.pose,
                     "frame-1 to frame-2 motion file")->required();
  closed->add_option("--corr", closed_args.corr, "CSV with u1,v1,u2,v2")->required();
  closed->add_option("--out", closed_args.out, "output CSV")->required();
  closed->add_option("--obj-t", closed_args.obj_tx,
                     "object translation x (moving-center rule)");
  closed->add_option("--obj-ty", closed_args.obj_ty);
  closed->add_option("--obj-tz", closed_args.obj_tz);

  // ------------------------------------------------------------------- fuse
  auto* fuse_cmd = app.add_subcommand("fuse", "fuse stereo and mono depth");
  struct {
    std::string stereo, mono, conf = "auto", vol, out, out_dist;
    std::string calib, camera = "P2";
    double camera_height = -1;
    int levels = -1;
    double dmin = -1, dmax = -1, sharpness = -1;
  } fuse_args;
  fuse_cmd->add_option("--stereo", fuse_args.stereo, "stereo depth PFM")->required();
  fuse_cmd->add_option("--mono", fuse_args.mono,
                       "mono depth PFM, or 'ground-plane' (requires --calib)")->required();
  fuse_cmd->add_option("--calib", fuse_args.calib,
                       "calibration for the ground-plane prior");
  fuse_cmd->add_option("--cam", fuse_args.camera);
  fuse_cmd->add_option("--camera-height", fuse_args.camera_height,
                       "ground plane height below the camera, meters");
  fuse_cmd->add_option("--conf", fuse_args.conf,
                       "confidence PFM, or 'auto' (requires --vol)");
  fuse_cmd->add_option("--vol", fuse_args.vol, "stereo volume file for auto confidence");
  fuse_cmd->add_option("--out", fuse_args.out, "fused depth PFM")->required();
  fuse_cmd->add_option("--out-dist", fuse_args.out_dist, "fused distribution volume");
  fuse_cmd->add_option("--levels", fuse_args.levels);
  fuse_cmd->add_option("--dmin", fuse_args.dmin);
  fuse_cmd->add_option("--dmax", fuse_args.dmax);
  fuse_cmd->add_option("--sharpness", fuse_args.sharpness);

  // ------------------------------------------------------------------- loss
  auto* loss_cmd = app.add_subcommand("loss", "depth supervision loss");
  struct {
    std::string pred, gt, fg_mask, out;
    double gamma = -1, fg_weight = -1, bg_weight = -1;
  } loss_args;
  loss_cmd->add_option("--pred", loss_args.pred,
                       "predicted distribution volume (DFMVOL1)")->required();
  loss_cmd->add_option("--gt", loss_args.gt, "ground-truth depth PFM")->required();
  loss_cmd->add_option("--fg-mask", loss_args.fg_mask, "foreground mask image");
  loss_cmd->add_option("--out", loss_args.out, "report JSON (default stdout)");
  loss_cmd->add_option("--gamma", loss_args.gamma);
  loss_cmd->add_option("--fg-weight", loss_args.fg_weight);
  loss_cmd->add_option("--bg-weight", loss_args.bg_weight);

  // ------------------------------------------------------------------- pose
  auto* pose_cmd = app.add_subcommand("pose", "photometric pose estimation");
  struct {
    std::string img_t, img_prev, depth, calib, camera = "P2", init, out, out_diag;
    bool auto_mask = false, numeric = false, raw_smoothness = false;
  } pose_args;
  pose_cmd->add_option("--img-t", pose_args.img_t)->required();
  pose_cmd->add_option("--img-prev", pose_args.img_prev)->required();
  pose_cmd->add_option("--depth", pose_args.depth, "frame-t depth PFM")->required();
  pose_cmd->add_option("--calib", pose_args.calib)->required();
  pose_cmd->add_option("--cam", pose_args.camera);
  pose_cmd->add_option("--init", pose_args.init, "initial pose file");
  pose_cmd->add_option("--out", pose_args.out, "estimated pose file")->required();
  pose_cmd->add_option("--out-diag", pose_args.out_diag, "diagnostics JSON");
  pose_cmd->add_flag("--auto-mask", pose_args.auto_mask,
                     "drop pixels whose unwarped error beats the warped one");
  pose_cmd->add_flag("--numeric", pose_args.numeric,
                     "finite-difference gradients instead of analytic");
  pose_cmd->add_flag("--raw-smoothness", pose_args.raw_smoothness,
                     "skip mean normalization in the smoothness term");

  // ------------------------------------------------------------------- warp
  auto* warp_cmd = app.add_subcommand("warp", "synthesize frame t from t-dt");
  struct {
    std::string img_prev, depth, calib, camera = "P2", pose, out, out_mask;
  } warp_args;
  warp_cmd->add_option("--img-prev", warp_args.img_prev)->required();
  warp_cmd->add_option("--depth", warp_args.depth, "frame-t depth PFM")->required();
  warp_cmd->add_option("--calib", warp_args.calib)->required();
  warp_cmd->add_option("--cam", warp_args.camera);
  warp_cmd->add_option("--pose", warp_args.pose)->required();
  warp_cmd->add_option("--out", warp_args.out, "synthesized image (.pfm/.ppm/.pgm)")->required();
  warp_cmd->add_option("--out-mask", warp_args.out_mask, "validity mask PGM");

  // ------------------------------------------------------------------- lift
  auto* lift_cmd = app.add_subcommand("lift", "frustum volume to voxel grid");
  struct {
    std::string dist, calib, camera = "P2", out, bev, bev_mode = "max";
    double voxel = -1;
    std::vector<double> xr, yr, zr;
  } lift_args;
  lift_cmd->add_option("--dist", lift_args.dist, "volume file (DFMVOL1)")->required();
  lift_cmd->add_option("--calib", lift_args.calib)->required();
  lift_cmd->add_option("--cam", lift_args.camera);
  lift_cmd->add_option("--out", lift_args.out, "voxel grid output")->required();
  lift_cmd->add_option("--voxel", lift_args.voxel, "voxel edge length");
  lift_cmd->add_option("--xr", lift_args.xr, "x range, two values")->expected(2);
  lift_cmd->add_option("--yr", lift_args.yr, "y range, two values")->expected(2);
  lift_cmd->add_option("--zr", lift_args.zr, "z range, two values")->expected(2);
  lift_cmd->add_option("--bev", lift_args.bev, "also collapse to BEV");
  lift_cmd->add_option("--bev-mode", lift_args.bev_mode, "max|mean|stack");

  // ------------------------------------------------------------------- eval
  auto* eval_cmd = app.add_subcommand("eval", "depth error metrics");
  struct {
    std::string pred, gt, fg_mask, boxes, out;
  } eval_args;
  eval_cmd->add_option("--pred", eval_args.pred)->required();
  eval_cmd->add_option("--gt", eval_args.gt)->required();
  eval_cmd->add_option("--fg-mask", eval_args.fg_mask, "foreground mask image");
  eval_cmd->add_option("--boxes", eval_args.boxes,
                       "object boxes CSV: left,top,right,bottom per line");
  eval_cmd->add_option("--out", eval_args.out, "report JSON (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    const dfm::Config cfg = common.config();

    if (*synth) {
      const auto& a = synth_args;
      const dfm::Scene scene = dfm::scene_from_json(read_text(a.scene));
      const auto poses = dfm::read_pose_file(a.poses);
      if (poses.empty()) throw dfm::MalformedLine(0, "pose file has no poses");
      const dfm::Intrinsics cam(
          a.focal, a.focal, a.cu >= 0 ? a.cu : (a.width - 1) / 2.0,
          a.cv >= 0 ? a.cv : (a.height - 1) / 2.0);
      std::filesystem::create_directories(a.out);
      dfm::RenderOptions options;
      options.supersample = a.supersample;
      options.threads = cfg.threads;
      for (size_t i = 0; i < poses.size(); ++i) {
        const dfm::Rendered view =
            dfm::render(scene, cam, a.width, a.height, poses[i], options);
        char tag[16];
        std::snprintf(tag, sizeof(tag), "%03zu", i);
        dfm::write_ppm(a.out + "/image_" + tag + ".ppm", view.image);
        dfm::write_depth_pfm(a.out + "/depth_" + tag + ".pfm",
                             dfm::DepthMap{view.depth, view.valid});
      }
      dfm::write_pose_file(a.out + "/poses.txt", poses);
      {
        std::ostringstream calib;
        calib << "P2: " << cam.fx << " 0.0 " << cam.cu << " 0.0 0.0 " << cam.fy
              << " " << cam.cv << " 0.0 0.0 0.0 1.0 0.0\n";
        write_text(a.out + "/calib.txt", calib.str());
      }
      if (a.correspondences > 0) {
        for (size_t i = 1; i < poses.size(); ++i) {
          const auto points = dfm::sample_correspondences(
              scene, cam, a.width, a.height, poses[i - 1], poses[i],
              a.correspondences, a.seed + i);
          char tag[32];
          std::snprintf(tag, sizeof(tag), "%03zu_%03zu", i - 1, i);
          std::ostringstream csv;
          csv << "u1,v1,u2,v2,depth1,depth2\n";
          csv.precision(17);
          for (const auto& pt : points) {
            csv << pt.corr.u1 << "," << pt.corr.v1 << "," << pt.corr.u2 << ","
                << pt.corr.v2 << "," << pt.depth_a << "," << pt.depth_b << "\n";
          }
          write_text(a.out + "/corr_" + tag + ".csv", csv.str());
        }
      }
    }

    if (*depth) {
      auto& a = depth_args;
      const dfm::ImageBuffer img_t = dfm::read_image(a.img_t);
      const dfm::ImageBuffer img_prev = dfm::read_image(a.img_prev);
      const dfm::Intrinsics cam = load_intrinsics(a.calib, a.camera);
      const dfm::RigidMotion motion = dfm::read_single_pose(a.pose);
      const dfm::DepthLevels levels = dfm::DepthLevels::from_range(
          a.dmin > 0 ? a.dmin : cfg.d_min, a.dmax > 0 ? a.dmax : cfg.d_max,
          a.levels > 0 ? a.levels : cfg.levels);
      dfm::CostVolumeOptions options;
      options.kind = dfm::cost_kind_from_string(a.cost.empty() ? cfg.cost : a.cost);
      options.patch_radius = a.patch >= 0 ? a.patch : cfg.patch_radius;
      options.threads = cfg.threads;

      dfm::FrustumVolume volume =
          a.aug_t.empty() && a.aug_prev.empty()
              ? dfm::compute_cost_volume(img_t, img_prev, cam, motion, levels,
                                         options)
              : dfm::compute_cost_volume_augmented(
                    img_t, img_prev, cam, motion, levels, load_aug(a.aug_t),
                    load_aug(a.aug_prev),
                    a.canon_width > 0 ? a.canon_width : img_t.width(),
                    a.canon_height > 0 ? a.canon_height : img_t.height(),
                    options);
      const double mask_fraction = volume.valid_fraction();
      if (!a.out_conf.empty()) {
        const dfm::FusionWeights conf = dfm::stereo_confidence(volume);
        dfm::write_pfm(a.out_conf, conf.omega);
      }
      const double temperature = a.temp > 0 ? a.temp : cfg.temperature;
      const dfm::DepthDistribution dist =
          dfm::cost_to_distribution(std::move(volume), temperature, cfg.threads);
      if (!a.out_vol.empty()) dfm::write_volume(a.out_vol, dist.volume(), "probability");
      const dfm::DepthMap map = dfm::distribution_to_depth(
          dist, a.mode == "expectation" ? dfm::DepthMode::expectation
                                        : dfm::DepthMode::argmax);
      dfm::write_depth_pfm(a.out, map);
      if (!a.out_csv.empty()) {
        std::ostringstream csv;
        csv << "u,v,depth\n";
        csv.precision(9);
        for (int y = 0; y < map.depth.height(); ++y)
          for (int x = 0; x < map.depth.width(); ++x)
            if (map.valid.at(x, y))
              csv << x << "," << y << "," << map.depth.at(x, y) << "\n";
        write_text(a.out_csv, csv.str());
      }
      if (!a.out_meta.empty()) {
        json meta = {
            {"levels",
             {{"d_min", levels.d_min()},
              {"delta", levels.delta()},
              {"count", levels.count()}}},
            {"bin_spacing", "uniform in depth, endpoints inclusive"},
            {"cost", dfm::to_string(options.kind)},
            {"patch_radius", options.patch_radius},
            {"temperature", temperature},
            {"mask_fraction", mask_fraction},
            {"mode", a.mode},
        };
        write_text(a.out_meta, meta.dump(2) + "\n");
      }
    }

    if (*closed) {
      const auto& a = closed_args;
      const dfm::Intrinsics cam = load_intrinsics(a.calib, a.camera);
      const dfm::RigidMotion motion = dfm::read_single_pose(a.pose);
      const auto rows = dfm::read_correspondence_csv(a.corr);
      const dfm::Vec3 t_obj(a.obj_tx, a.obj_ty, a.obj_tz);
      dfm::ClosedFormConfig ccfg;
      ccfg.eps_disparity = cfg.eps_disparity;
      ccfg.eps_denominator = cfg.eps_denominator;

      std::ostringstream out;
      out.precision(17);
      out << "u1,v1,u2,v2,D1_u,D1_v,D1,D2,flags\n";
      for (const auto& corr : rows) {
        out << corr.u1 << "," << corr.v1 << "," << corr.u2 << "," << corr.v2
            << ",";
        try {
          const dfm::TwoViewDepth solution =
              dfm::moving_center_depth(cam, motion, t_obj, corr, ccfg);
          std::string flags;
          if (!solution.d1_from_u) flags += "degenerate_u;";
          if (!solution.d1_from_v) flags += "degenerate_v;";
          if (solution.non_physical) flags += "non_physical;";
          if (solution.d1_from_u) out << *solution.d1_from_u;
          out << ",";
          if (solution.d1_from_v) out << *solution.d1_from_v;
          out << "," << solution.d1 << "," << solution.d2 << "," << flags
              << "\n";
        } catch (const dfm::NoValidSolution&) {
          out << ",,,,no_valid_solution\n";
        }
      }
      write_text(a.out, out.str());
    }

    if (*fuse_cmd) {
      const auto& a = fuse_args;
      const dfm::DepthMap stereo_map = dfm::read_depth_pfm(a.stereo);
      const double sharpness = a.sharpness > 0 ? a.sharpness : cfg.sharpness;

      std::optional<dfm::VolumeFile> vol;
      if (!a.vol.empty()) vol = dfm::read_volume(a.vol);
      const dfm::DepthLevels levels =
          vol ? vol->volume.levels()
              : dfm::DepthLevels::from_range(
                    a.dmin > 0 ? a.dmin : cfg.d_min,
                    a.dmax > 0 ? a.dmax : cfg.d_max,
                    a.levels > 0 ? a.levels : cfg.levels);

      dfm::DepthMap mono_map;
      if (a.mono == "ground-plane") {
        if (a.calib.empty())
          throw dfm::MalformedLine(
              0, "--mono ground-plane needs --calib for the intrinsics");
        const dfm::Intrinsics cam = load_intrinsics(a.calib, a.camera);
        mono_map = dfm::ground_plane_depth(
            cam, stereo_map.depth.width(), stereo_map.depth.height(), levels,
            a.camera_height > 0 ? a.camera_height : cfg.camera_height);
      } else {
        mono_map = dfm::read_depth_pfm(a.mono);
      }

      const dfm::DepthDistribution mono =
          dfm::mono_prior_distribution(mono_map, levels, sharpness);
      std::optional<dfm::DepthDistribution> stereo;
      if (vol && vol->kind == "probability") {
        // Re-derive per-pixel validity from the stored bin masks.
        dfm::Mask pixel_valid(vol->volume.width(), vol->volume.height(), false);
        for (int y = 0; y < vol->volume.height(); ++y)
          for (int x = 0; x < vol->volume.width(); ++x)
            for (int w = 0; w < levels.count(); ++w)
              if (vol->volume.valid(x, y, w)) {
                pixel_valid.set(x, y, true);
                break;
              }
        stereo = dfm::DepthDistribution(vol->volume, std::move(pixel_valid));
      } else if (vol) {
        stereo = dfm::cost_to_distribution(vol->volume, cfg.temperature,
                                           cfg.threads);
      } else {
        stereo = dfm::mono_prior_distribution(stereo_map, levels, sharpness);
      }

      dfm::FusionWeights weights;
      if (a.conf == "auto") {
        if (!vol)
          throw dfm::MalformedLine(
              0, "--conf auto needs --vol (confidence comes from the volume)");
        weights = vol->kind == "probability"
                      ? dfm::distribution_confidence(*stereo)
                      : dfm::stereo_confidence(vol->volume);
      } else {
        const dfm::ImageBuffer omega = dfm::read_pfm(a.conf);
        weights = dfm::FusionWeights{
            omega, dfm::Mask(omega.width(), omega.height(), true)};
      }

      const dfm::DepthDistribution fused = dfm::fuse(mono, *stereo, weights);
      dfm::write_depth_pfm(a.out,
                           dfm::distribution_to_depth(fused, dfm::DepthMode::argmax));
      if (!a.out_dist.empty())
        dfm::write_volume(a.out_dist, fused.volume(), "probability");
    }

    if (*loss_cmd) {
      const auto& a = loss_args;
      const dfm::VolumeFile vol = dfm::read_volume(a.pred);
      if (vol.kind != "probability")
        throw dfm::BadMagic("loss expects a probability volume");
      dfm::Mask pixel_valid(vol.volume.width(), vol.volume.height(), false);
      for (int y = 0; y < vol.volume.height(); ++y)
        for (int x = 0; x < vol.volume.width(); ++x)
          for (int w = 0; w < vol.volume.levels().count(); ++w)
            if (vol.volume.valid(x, y, w)) {
              pixel_valid.set(x, y, true);
              break;
            }
      const dfm::DepthDistribution dist(vol.volume, std::move(pixel_valid));
      const dfm::DepthMap gt = dfm::read_depth_pfm(a.gt);
      std::optional<dfm::Mask> fg;
      if (!a.fg_mask.empty()) fg = dfm::read_mask_image(a.fg_mask);

      dfm::DepthLossConfig loss_cfg;
      loss_cfg.gamma = a.gamma >= 0 ? a.gamma : cfg.gamma;
      loss_cfg.fg_weight = a.fg_weight > 0 ? a.fg_weight : cfg.fg_weight;
      loss_cfg.bg_weight = a.bg_weight > 0 ? a.bg_weight : cfg.bg_weight;
      const dfm::DepthLossResult result =
          dfm::depth_ce_loss(dist, gt, loss_cfg, fg ? &*fg : nullptr);
      json report = {{"loss", result.total},
                     {"valid_pixels", result.valid_pixels},
                     {"gamma", loss_cfg.gamma},
                     {"fg_weight", loss_cfg.fg_weight},
                     {"bg_weight", loss_cfg.bg_weight}};
      if (a.out.empty()) std::cout << report.dump(2) << "\n";
      else write_text(a.out, report.dump(2) + "\n");
    }

    if (*pose_cmd) {
      const auto& a = pose_args;
      const dfm::ImageBuffer img_t = dfm::read_image(a.img_t);
      const dfm::ImageBuffer img_prev = dfm::read_image(a.img_prev);
      const dfm::DepthMap depth_map = dfm::read_depth_pfm(a.depth);
      const dfm::Intrinsics cam = load_intrinsics(a.calib, a.camera);
      const dfm::RigidMotion init =
          a.init.empty() ? dfm::RigidMotion() : dfm::read_single_pose(a.init);

      dfm::PoseLossConfig pose_cfg;
      pose_cfg.alpha = cfg.alpha;
      pose_cfg.lambda_s = cfg.lambda_s;
      pose_cfg.lambda_r = cfg.lambda_r;
      pose_cfg.pyramid_levels = cfg.pyramid_levels;
      pose_cfg.max_iterations = cfg.max_iterations;
      pose_cfg.auto_mask = a.auto_mask;
      pose_cfg.analytic_gradient = !a.numeric;
      pose_cfg.normalize_smoothness = !a.raw_smoothness;
      pose_cfg.threads = cfg.threads;

      const dfm::PoseEstimate estimate =
          dfm::optimize_pose(img_t, img_prev, depth_map, cam, pose_cfg, init);
      write_text(a.out, dfm::format_pose(estimate.motion) + "\n");
      if (!a.out_diag.empty()) {
        const auto& d = estimate.diagnostics;
        json diag = {{"final_objective", d.final_objective},
                     {"photometric", d.photometric},
                     {"smoothness", d.smoothness},
                     {"iterations", d.iterations},
                     {"levels_used", d.levels_used},
                     {"gradient_check_residual", d.gradient_check_residual},
                     {"converged", d.converged}};
        write_text(a.out_diag, diag.dump(2) + "\n");
      }
    }

    if (*warp_cmd) {
      const auto& a = warp_args;
      const dfm::ImageBuffer img_prev = dfm::read_image(a.img_prev);
      const dfm::DepthMap depth_map = dfm::read_depth_pfm(a.depth);
      const dfm::Intrinsics cam = load_intrinsics(a.calib, a.camera);
      const dfm::RigidMotion motion = dfm::read_single_pose(a.pose);
      const dfm::SynthesizedView synth_view =
          dfm::synthesize_view(img_prev, depth_map, cam, motion, cfg.threads);
      write_image_by_extension(a.out, synth_view.image);
      if (!a.out_mask.empty()) {
        dfm::ImageBuffer mask_img(synth_view.valid.width(),
                                  synth_view.valid.height());
        for (int y = 0; y < mask_img.height(); ++y)
          for (int x = 0; x < mask_img.width(); ++x)
            mask_img.at(x, y) = synth_view.valid.at(x, y) ? 1.0f : 0.0f;
        dfm::write_pgm(a.out_mask, mask_img);
      }
    }

    if (*lift_cmd) {
      const auto& a = lift_args;
      const dfm::VolumeFile vol = dfm::read_volume(a.dist);
      const dfm::Intrinsics cam = load_intrinsics(a.calib, a.camera);
      dfm::VoxelGridSpec spec = cfg.voxel_spec();
      if (a.voxel > 0) spec.edge = a.voxel;
      if (a.xr.size() == 2) { spec.x_min = a.xr[0]; spec.x_max = a.xr[1]; }
      if (a.yr.size() == 2) { spec.y_min = a.yr[0]; spec.y_max = a.yr[1]; }
      if (a.zr.size() == 2) { spec.z_min = a.zr[0]; spec.z_max = a.zr[1]; }
      const dfm::VoxelGrid grid =
          dfm::sample_voxels(vol.volume, cam, spec, cfg.threads);
      write_grid(a.out, grid);
      if (!a.bev.empty()) {
        dfm::BevMode mode = dfm::BevMode::max;
        if (a.bev_mode == "mean") mode = dfm::BevMode::mean;
        else if (a.bev_mode == "stack") mode = dfm::BevMode::stack;
        else if (a.bev_mode != "max")
          throw dfm::MalformedLine(0, "unknown BEV mode " + a.bev_mode);
        write_bev(a.bev, dfm::collapse_bev(grid, mode));
      }
    }

    if (*eval_cmd) {
      const auto& a = eval_args;
      const dfm::DepthMap pred = dfm::read_depth_pfm(a.pred);
      const dfm::DepthMap gt = dfm::read_depth_pfm(a.gt);
      std::optional<dfm::Mask> fg;
      if (!a.fg_mask.empty()) fg = dfm::read_mask_image(a.fg_mask);
      std::vector<dfm::ObjectBox> boxes;
      if (!a.boxes.empty()) {
        const std::string text = read_text(a.boxes);
        std::istringstream in(text);
        std::string line;
        int line_number = 0;
        while (std::getline(in, line)) {
          ++line_number;
          if (line.empty() || line[0] == '#') continue;
          std::replace(line.begin(), line.end(), ',', ' ');
          std::istringstream ls(line);
          dfm::ObjectBox box;
          if (!(ls >> box.left >> box.top >> box.right >> box.bottom)) {
            if (line_number == 1) continue;  // header
            throw dfm::MalformedLine(line_number,
                                     "box line needs left,top,right,bottom");
          }
          boxes.push_back(box);
        }
      }
      const dfm::DepthErrorReport report = dfm::depth_error_metrics(
          pred, gt, fg ? &*fg : nullptr, boxes.empty() ? nullptr : &boxes);
      json out = {{"all", stats_to_json(report.all)},
                  {"prediction_missing", report.prediction_missing}};
      if (report.fg_pooled) out["foreground_pooled"] = stats_to_json(*report.fg_pooled);
      if (report.fg_object_averaged) {
        out["foreground_object_averaged"] =
            stats_to_json(*report.fg_object_averaged);
        out["objects_used"] = report.objects_used;
        out["objects_ignored"] = report.objects_ignored;
      }
      if (a.out.empty()) std::cout << out.dump(2) << "\n";
      else write_text(a.out, out.dump(2) + "\n");
    }

    return 0;
  } catch (const dfm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.category() == dfm::ErrorCategory::input ? 2 : 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
