// Python bindings for the depth-from-motion core: geometry, closed-form
// depth, plane sweep, fusion, pose estimation, voxel sampling, the synthetic
// scene oracle and the evaluation metrics. Images cross the boundary as
// numpy arrays (float32 HxW); volumes as float64 HxWxD plus a bool mask.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

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

namespace py = pybind11;
using namespace dfm;

namespace {

ImageBuffer image_from_array(const py::array_t<float>& array) {
  const auto buf = array.request();
  if (buf.ndim != 2) throw std::invalid_argument("image must be a 2-D array");
  ImageBuffer img(static_cast<int>(buf.shape[1]), static_cast<int>(buf.shape[0]));
  const auto view = array.unchecked<2>();
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) img.at(x, y) = view(y, x);
  return img;
}

py::array_t<float> image_to_array(const ImageBuffer& img) {
  py::array_t<float> out({img.height(), img.width()});
  auto view = out.mutable_unchecked<2>();
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) view(y, x) = img.at(x, y);
  return out;
}

Mask mask_from_array(const py::array_t<bool>& array) {
  const auto buf = array.request();
  if (buf.ndim != 2) throw std::invalid_argument("mask must be a 2-D array");
  Mask mask(static_cast<int>(buf.shape[1]), static_cast<int>(buf.shape[0]));
  const auto view = array.unchecked<2>();
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) mask.set(x, y, view(y, x));
  return mask;
}

py::array_t<bool> mask_to_array(const Mask& mask) {
  py::array_t<bool> out({mask.height(), mask.width()});
  auto view = out.mutable_unchecked<2>();
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) view(y, x) = mask.at(x, y);
  return out;
}

DepthMap depth_map_from_arrays(const py::array_t<float>& depth,
                               const py::array_t<bool>& valid) {
  return DepthMap{image_from_array(depth), mask_from_array(valid)};
}

py::array_t<double> volume_values(const FrustumVolume& vol) {
  py::array_t<double> out({vol.height(), vol.width(), vol.levels().count()});
  auto view = out.mutable_unchecked<3>();
  for (int y = 0; y < vol.height(); ++y)
    for (int x = 0; x < vol.width(); ++x)
      for (int w = 0; w < vol.levels().count(); ++w)
        view(y, x, w) = vol.value(x, y, w);
  return out;
}

py::array_t<bool> volume_mask(const FrustumVolume& vol) {
  py::array_t<bool> out({vol.height(), vol.width(), vol.levels().count()});
  auto view = out.mutable_unchecked<3>();
  for (int y = 0; y < vol.height(); ++y)
    for (int x = 0; x < vol.width(); ++x)
      for (int w = 0; w < vol.levels().count(); ++w)
        view(y, x, w) = vol.valid(x, y, w);
  return out;
}

py::dict stats_dict(const ErrorStats& stats) {
  py::dict out;
  out["median"] = stats.median;
  out["ratio_above"] = std::vector<double>(stats.ratio_above.begin(),
                                           stats.ratio_above.end());
  out["count"] = stats.count;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "depth-from-motion geometry core";

  py::register_exception<Error>(m, "DfmError");

  // ---------------------------------------------------------------- geometry
  py::class_<Intrinsics>(m, "Intrinsics")
      .def(py::init<double, double, double, double>(), py::arg("fx"),
           py::arg("fy"), py::arg("cu"), py::arg("cv"))
      .def_static("with_focal", &Intrinsics::with_focal, py::arg("f"),
                  py::arg("cu"), py::arg("cv"))
      .def_readonly("fx", &Intrinsics::fx)
      .def_readonly("fy", &Intrinsics::fy)
      .def_readonly("cu", &Intrinsics::cu)
      .def_readonly("cv", &Intrinsics::cv)
      .def("matrix", &Intrinsics::matrix);

  py::class_<UnitQuaternion>(m, "UnitQuaternion")
      .def(py::init<>())
      .def(py::init<double, double, double, double>(), py::arg("w"),
           py::arg("x"), py::arg("y"), py::arg("z"))
      .def_static("from_axis_angle", &UnitQuaternion::from_axis_angle)
      .def_static("from_euler_zyx", &UnitQuaternion::from_euler_zyx)
      .def("matrix", &UnitQuaternion::matrix)
      .def("to_euler_zyx", &UnitQuaternion::to_euler_zyx)
      .def_property_readonly("w", &UnitQuaternion::w)
      .def_property_readonly("x", &UnitQuaternion::x)
      .def_property_readonly("y", &UnitQuaternion::y)
      .def_property_readonly("z", &UnitQuaternion::z);

  py::class_<RigidMotion>(m, "RigidMotion")
      .def(py::init<>())
      .def(py::init<const UnitQuaternion&, const Vec3&>(), py::arg("rotation"),
           py::arg("translation"))
      .def_readwrite("rotation", &RigidMotion::rotation)
      .def_readwrite("translation", &RigidMotion::translation)
      .def("apply", &RigidMotion::apply)
      .def("matrix", &RigidMotion::matrix);
  m.def("compose", &compose, py::arg("outer"), py::arg("inner"));
  m.def("invert", &invert);

  m.def(
      "project",
      [](const Intrinsics& cam, const Vec3& p) {
        const Projection out = project(cam, p);
        return py::make_tuple(out.pixel.u, out.pixel.v, out.depth);
      },
      py::arg("cam"), py::arg("point"));
  m.def(
      "backproject",
      [](const Intrinsics& cam, double u, double v, double depth) {
        return backproject(cam, Pixel{u, v}, depth);
      },
      py::arg("cam"), py::arg("u"), py::arg("v"), py::arg("depth"));
  m.def(
      "warp_pixel",
      [](const Intrinsics& cam, const RigidMotion& motion, double u, double v,
         double depth) {
        const Projection out = warp_pixel(cam, motion, Pixel{u, v}, depth);
        return py::make_tuple(out.pixel.u, out.pixel.v, out.depth);
      },
      py::arg("cam"), py::arg("motion"), py::arg("u"), py::arg("v"),
      py::arg("depth"));

  // ------------------------------------------------------------- closed form
  py::class_<Correspondence>(m, "Correspondence")
      .def(py::init([](double u1, double v1, double u2, double v2) {
             return Correspondence{u1, v1, u2, v2};
           }),
           py::arg("u1"), py::arg("v1"), py::arg("u2"), py::arg("v2"))
      .def_readwrite("u1", &Correspondence::u1)
      .def_readwrite("v1", &Correspondence::v1)
      .def_readwrite("u2", &Correspondence::u2)
      .def_readwrite("v2", &Correspondence::v2);

  py::class_<TwoViewDepth>(m, "TwoViewDepth")
      .def_readonly("d1_from_u", &TwoViewDepth::d1_from_u)
      .def_readonly("d1_from_v", &TwoViewDepth::d1_from_v)
      .def_readonly("d1", &TwoViewDepth::d1)
      .def_readonly("d2", &TwoViewDepth::d2)
      .def_readonly("denom_u", &TwoViewDepth::denom_u)
      .def_readonly("denom_v", &TwoViewDepth::denom_v)
      .def_readonly("non_physical", &TwoViewDepth::non_physical);

  py::class_<ClosedFormConfig>(m, "ClosedFormConfig")
      .def(py::init<>())
      .def_readwrite("eps_disparity", &ClosedFormConfig::eps_disparity)
      .def_readwrite("eps_denominator", &ClosedFormConfig::eps_denominator);

  m.def("binocular_depth", &binocular_depth, py::arg("focal_px"),
        py::arg("baseline_m"), py::arg("disparity_px"),
        py::arg("config") = ClosedFormConfig{});
  m.def(
      "parallel_two_view_depth",
      [](const Intrinsics& cam, double u1, double u2, double dx, double dd) {
        const ParallelDepth out = parallel_two_view_depth(cam, u1, u2, dx, dd);
        return py::make_tuple(out.depth, out.non_physical);
      },
      py::arg("cam"), py::arg("u1"), py::arg("u2"), py::arg("dx_m"),
      py::arg("dd_m"));
  m.def("effective_baseline", &effective_baseline, py::arg("dx_m"),
        py::arg("dd_m"), py::arg("u2"), py::arg("cam"));
  m.def("general_two_view_depth", &general_two_view_depth, py::arg("cam"),
        py::arg("motion"), py::arg("corr"),
        py::arg("config") = ClosedFormConfig{});
  m.def("moving_center_depth", &moving_center_depth, py::arg("cam"),
        py::arg("ego_motion"), py::arg("object_translation"), py::arg("corr"),
        py::arg("config") = ClosedFormConfig{});

  // ------------------------------------------------------------- plane sweep
  py::class_<DepthLevels>(m, "DepthLevels")
      .def(py::init<double, double, int>(), py::arg("d_min"), py::arg("delta"),
           py::arg("count"))
      .def_static("from_range", &DepthLevels::from_range, py::arg("d_min"),
                  py::arg("d_max"), py::arg("count"))
      .def_property_readonly("d_min", &DepthLevels::d_min)
      .def_property_readonly("delta", &DepthLevels::delta)
      .def_property_readonly("count", &DepthLevels::count)
      .def_property_readonly("d_max", &DepthLevels::d_max)
      .def("depth", &DepthLevels::depth)
      .def("fractional_bin", &DepthLevels::fractional_bin);

  py::class_<FrustumVolume>(m, "FrustumVolume")
      .def_property_readonly("width", &FrustumVolume::width)
      .def_property_readonly("height", &FrustumVolume::height)
      .def_property_readonly("levels", &FrustumVolume::levels)
      .def("values", &volume_values)
      .def("mask", &volume_mask)
      .def("valid_fraction", &FrustumVolume::valid_fraction);

  py::class_<DepthDistribution>(m, "DepthDistribution")
      .def_property_readonly("levels",
                             [](const DepthDistribution& d) { return d.levels(); })
      .def("values", [](const DepthDistribution& d) { return volume_values(d.volume()); })
      .def("pixel_valid", [](const DepthDistribution& d) { return mask_to_array(d.pixel_mask()); });

  m.def(
      "compute_cost_volume",
      [](const py::array_t<float>& img_t, const py::array_t<float>& img_prev,
         const Intrinsics& cam, const RigidMotion& motion,
         const DepthLevels& levels, const std::string& cost, int patch_radius,
         int threads) {
        CostVolumeOptions options;
        options.kind = cost_kind_from_string(cost);
        options.patch_radius = patch_radius;
        options.threads = threads;
        return compute_cost_volume(image_from_array(img_t),
                                   image_from_array(img_prev), cam, motion,
                                   levels, options);
      },
      py::arg("img_t"), py::arg("img_prev"), py::arg("cam"), py::arg("motion"),
      py::arg("levels"), py::arg("cost") = "zncc", py::arg("patch_radius") = 2,
      py::arg("threads") = 0);
  m.def("cost_to_distribution", &cost_to_distribution, py::arg("costs"),
        py::arg("temperature"), py::arg("threads") = 0);
  m.def(
      "distribution_to_depth",
      [](const DepthDistribution& dist, const std::string& mode, bool refine) {
        const DepthMap map = distribution_to_depth(
            dist, mode == "expectation" ? DepthMode::expectation
                                        : DepthMode::argmax,
            refine);
        return py::make_tuple(image_to_array(map.depth), mask_to_array(map.valid));
      },
      py::arg("dist"), py::arg("mode") = "argmax", py::arg("refine") = true);

  // ------------------------------------------------------------ augmentation
  py::class_<AugmentationSpec>(m, "AugmentationSpec")
      .def(py::init<>())
      .def_readwrite("flip_horizontal", &AugmentationSpec::flip_horizontal)
      .def_readwrite("scale", &AugmentationSpec::scale)
      .def_readwrite("crop_x", &AugmentationSpec::crop_x)
      .def_readwrite("crop_y", &AugmentationSpec::crop_y)
      .def_readwrite("crop_width", &AugmentationSpec::crop_width)
      .def_readwrite("crop_height", &AugmentationSpec::crop_height)
      .def("to_json", &AugmentationSpec::to_json)
      .def_static("from_json", &AugmentationSpec::from_json);
  m.def(
      "apply_augmentation",
      [](const py::array_t<float>& img, const AugmentationSpec& spec) {
        return image_to_array(apply_augmentation(image_from_array(img), spec));
      },
      py::arg("img"), py::arg("spec"));
  m.def(
      "augment_intrinsics",
      [](const Intrinsics& cam, const AugmentationSpec& spec, int width,
         int height) { return augment_intrinsics(cam, spec, width, height); },
      py::arg("cam"), py::arg("spec"), py::arg("width"), py::arg("height"));
  m.def(
      "compute_cost_volume_augmented",
      [](const py::array_t<float>& img_t, const py::array_t<float>& img_prev,
         const Intrinsics& cam, const RigidMotion& motion,
         const DepthLevels& levels, const AugmentationSpec& aug_t,
         const AugmentationSpec& aug_prev, int canon_width, int canon_height,
         const std::string& cost, int patch_radius, int threads) {
        CostVolumeOptions options;
        options.kind = cost_kind_from_string(cost);
        options.patch_radius = patch_radius;
        options.threads = threads;
        return compute_cost_volume_augmented(
            image_from_array(img_t), image_from_array(img_prev), cam, motion,
            levels, aug_t, aug_prev, canon_width, canon_height, options);
      },
      py::arg("img_t"), py::arg("img_prev"), py::arg("cam"), py::arg("motion"),
      py::arg("levels"), py::arg("aug_t"), py::arg("aug_prev"),
      py::arg("canon_width"), py::arg("canon_height"),
      py::arg("cost") = "zncc", py::arg("patch_radius") = 2,
      py::arg("threads") = 0);

  // ----------------------------------------------------------------- fusion
  m.def(
      "mono_prior_distribution",
      [](const py::array_t<float>& depth, const py::array_t<bool>& valid,
         const DepthLevels& levels, double sharpness) {
        return mono_prior_distribution(depth_map_from_arrays(depth, valid),
                                       levels, sharpness);
      },
      py::arg("depth"), py::arg("valid"), py::arg("levels"),
      py::arg("sharpness") = 1.0);
  m.def(
      "ground_plane_depth",
      [](const Intrinsics& cam, int width, int height, const DepthLevels& levels,
         double camera_height) {
        const DepthMap map =
            ground_plane_depth(cam, width, height, levels, camera_height);
        return py::make_tuple(image_to_array(map.depth), mask_to_array(map.valid));
      },
      py::arg("cam"), py::arg("width"), py::arg("height"), py::arg("levels"),
      py::arg("camera_height") = 1.65);
  m.def(
      "stereo_confidence",
      [](const FrustumVolume& costs, int exclusion_radius) {
        const FusionWeights weights = stereo_confidence(costs, exclusion_radius);
        return py::make_tuple(image_to_array(weights.omega),
                              mask_to_array(weights.valid));
      },
      py::arg("costs"), py::arg("exclusion_radius") = 2);
  m.def(
      "fuse",
      [](const DepthDistribution& mono, const DepthDistribution& stereo,
         const py::array_t<float>& omega) {
        const FusionWeights weights{
            image_from_array(omega),
            Mask(mono.width(), mono.height(), true)};
        return fuse(mono, stereo, weights);
      },
      py::arg("mono"), py::arg("stereo"), py::arg("omega"));
  m.def(
      "depth_ce_loss",
      [](const DepthDistribution& dist, const py::array_t<float>& gt,
         const py::array_t<bool>& gt_valid, double fg_weight, double bg_weight,
         double gamma, const std::optional<py::array_t<bool>>& foreground) {
        DepthLossConfig cfg;
        cfg.fg_weight = fg_weight;
        cfg.bg_weight = bg_weight;
        cfg.gamma = gamma;
        std::optional<Mask> fg;
        if (foreground) fg = mask_from_array(*foreground);
        const DepthLossResult out = depth_ce_loss(
            dist, depth_map_from_arrays(gt, gt_valid), cfg, fg ? &*fg : nullptr);
        return py::make_tuple(out.total, out.valid_pixels);
      },
      py::arg("dist"), py::arg("gt"), py::arg("gt_valid"),
      py::arg("fg_weight") = 5.0, py::arg("bg_weight") = 1.0,
      py::arg("gamma") = 2.0, py::arg("foreground") = std::nullopt);

  // ------------------------------------------------------------------- pose
  py::class_<PoseLossConfig>(m, "PoseLossConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &PoseLossConfig::alpha)
      .def_readwrite("lambda_s", &PoseLossConfig::lambda_s)
      .def_readwrite("lambda_r", &PoseLossConfig::lambda_r)
      .def_readwrite("pyramid_levels", &PoseLossConfig::pyramid_levels)
      .def_readwrite("max_iterations", &PoseLossConfig::max_iterations)
      .def_readwrite("auto_mask", &PoseLossConfig::auto_mask)
      .def_readwrite("analytic_gradient", &PoseLossConfig::analytic_gradient)
      .def_readwrite("check_gradient", &PoseLossConfig::check_gradient)
      .def_readwrite("threads", &PoseLossConfig::threads);

  m.def(
      "synthesize_view",
      [](const py::array_t<float>& img_prev, const py::array_t<float>& depth,
         const py::array_t<bool>& depth_valid, const Intrinsics& cam,
         const RigidMotion& motion, int threads) {
        const SynthesizedView out =
            synthesize_view(image_from_array(img_prev),
                            depth_map_from_arrays(depth, depth_valid), cam,
                            motion, threads);
        return py::make_tuple(image_to_array(out.image), mask_to_array(out.valid));
      },
      py::arg("img_prev"), py::arg("depth"), py::arg("depth_valid"),
      py::arg("cam"), py::arg("motion"), py::arg("threads") = 0);
  m.def(
      "ssim_map",
      [](const py::array_t<float>& a, const py::array_t<float>& b) {
        return image_to_array(ssim_map(image_from_array(a), image_from_array(b)));
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "photometric_loss",
      [](const py::array_t<float>& img_t, const py::array_t<float>& synth,
         const py::array_t<bool>& mask, double alpha) {
        return photometric_loss(image_from_array(img_t),
                                image_from_array(synth), mask_from_array(mask),
                                alpha);
      },
      py::arg("img_t"), py::arg("synth"), py::arg("mask"),
      py::arg("alpha") = 0.85);
  m.def(
      "smoothness_loss",
      [](const py::array_t<float>& depth, const py::array_t<bool>& valid,
         const py::array_t<float>& img, bool normalize) {
        return smoothness_loss(depth_map_from_arrays(depth, valid),
                               image_from_array(img), normalize);
      },
      py::arg("depth"), py::arg("valid"), py::arg("img"),
      py::arg("normalize") = true);
  m.def("supervised_pose_loss", &supervised_pose_loss, py::arg("t_pred"),
        py::arg("q_pred_wxyz"), py::arg("gt"), py::arg("lambda_r") = 1.0);
  m.def(
      "optimize_pose",
      [](const py::array_t<float>& img_t, const py::array_t<float>& img_prev,
         const py::array_t<float>& depth, const py::array_t<bool>& depth_valid,
         const Intrinsics& cam, const PoseLossConfig& cfg,
         const RigidMotion& init) {
        const PoseEstimate out =
            optimize_pose(image_from_array(img_t), image_from_array(img_prev),
                          depth_map_from_arrays(depth, depth_valid), cam, cfg,
                          init);
        py::dict diag;
        diag["final_objective"] = out.diagnostics.final_objective;
        diag["photometric"] = out.diagnostics.photometric;
        diag["smoothness"] = out.diagnostics.smoothness;
        diag["iterations"] = out.diagnostics.iterations;
        diag["levels_used"] = out.diagnostics.levels_used;
        diag["gradient_check_residual"] =
            out.diagnostics.gradient_check_residual;
        diag["converged"] = out.diagnostics.converged;
        return py::make_tuple(out.motion, diag);
      },
      py::arg("img_t"), py::arg("img_prev"), py::arg("depth"),
      py::arg("depth_valid"), py::arg("cam"),
      py::arg("config") = PoseLossConfig{},
      py::arg("init") = RigidMotion{});

  // ------------------------------------------------------------------ voxel
  py::class_<VoxelGridSpec>(m, "VoxelGridSpec")
      .def(py::init<>())
      .def_readwrite("x_min", &VoxelGridSpec::x_min)
      .def_readwrite("x_max", &VoxelGridSpec::x_max)
      .def_readwrite("y_min", &VoxelGridSpec::y_min)
      .def_readwrite("y_max", &VoxelGridSpec::y_max)
      .def_readwrite("z_min", &VoxelGridSpec::z_min)
      .def_readwrite("z_max", &VoxelGridSpec::z_max)
      .def_readwrite("edge", &VoxelGridSpec::edge);
  py::class_<VoxelGrid>(m, "VoxelGrid")
      .def_property_readonly("nx", &VoxelGrid::nx)
      .def_property_readonly("ny", &VoxelGrid::ny)
      .def_property_readonly("nz", &VoxelGrid::nz)
      .def("values",
           [](const VoxelGrid& grid) {
             py::array_t<double> out({grid.nx(), grid.ny(), grid.nz()});
             auto view = out.mutable_unchecked<3>();
             for (int ix = 0; ix < grid.nx(); ++ix)
               for (int iy = 0; iy < grid.ny(); ++iy)
                 for (int iz = 0; iz < grid.nz(); ++iz)
                   view(ix, iy, iz) = grid.value(ix, iy, iz);
             return out;
           })
      .def("occupancy",
           [](const VoxelGrid& grid) {
             py::array_t<bool> out({grid.nx(), grid.ny(), grid.nz()});
             auto view = out.mutable_unchecked<3>();
             for (int ix = 0; ix < grid.nx(); ++ix)
               for (int iy = 0; iy < grid.ny(); ++iy)
                 for (int iz = 0; iz < grid.nz(); ++iz)
                   view(ix, iy, iz) = grid.occupied(ix, iy, iz);
             return out;
           })
      .def("occupied_count", &VoxelGrid::occupied_count);
  m.def("sample_voxels", &sample_voxels, py::arg("volume"), py::arg("cam"),
        py::arg("spec"), py::arg("threads") = 0);
  m.def(
      "collapse_bev",
      [](const VoxelGrid& grid, const std::string& mode) {
        BevMode bev_mode = BevMode::max;
        if (mode == "mean") bev_mode = BevMode::mean;
        else if (mode == "stack") bev_mode = BevMode::stack;
        else if (mode != "max") throw std::invalid_argument("unknown BEV mode");
        const BevMap bev = collapse_bev(grid, bev_mode);
        py::array_t<double> values({bev.channels, bev.nx, bev.nz});
        py::array_t<bool> occupied({bev.channels, bev.nx, bev.nz});
        auto vv = values.mutable_unchecked<3>();
        auto vo = occupied.mutable_unchecked<3>();
        for (int c = 0; c < bev.channels; ++c)
          for (int ix = 0; ix < bev.nx; ++ix)
            for (int iz = 0; iz < bev.nz; ++iz) {
              vv(c, ix, iz) = bev.values[bev.index(c, ix, iz)];
              vo(c, ix, iz) = bev.occupied[bev.index(c, ix, iz)] != 0;
            }
        return py::make_tuple(values, occupied);
      },
      py::arg("grid"), py::arg("mode") = "max");

  // ------------------------------------------------------------------ synth
  m.def(
      "render_scene",
      [](const std::string& scene_json, const Intrinsics& cam, int width,
         int height, const RigidMotion& world_to_camera, bool supersample,
         int threads) {
        RenderOptions options;
        options.supersample = supersample;
        options.threads = threads;
        const Rendered out = render(scene_from_json(scene_json), cam, width,
                                    height, world_to_camera, options);
        return py::make_tuple(image_to_array(out.image),
                              image_to_array(out.depth),
                              mask_to_array(out.valid));
      },
      py::arg("scene_json"), py::arg("cam"), py::arg("width"),
      py::arg("height"), py::arg("world_to_camera") = RigidMotion{},
      py::arg("supersample") = false, py::arg("threads") = 0);
  m.def(
      "sample_correspondences",
      [](const std::string& scene_json, const Intrinsics& cam, int width,
         int height, const RigidMotion& pose_a, const RigidMotion& pose_b,
         int n, uint64_t seed) {
        const auto points = sample_correspondences(
            scene_from_json(scene_json), cam, width, height, pose_a, pose_b, n,
            seed);
        py::list out;
        for (const auto& pt : points) {
          py::dict d;
          d["u1"] = pt.corr.u1;
          d["v1"] = pt.corr.v1;
          d["u2"] = pt.corr.u2;
          d["v2"] = pt.corr.v2;
          d["depth_a"] = pt.depth_a;
          d["depth_b"] = pt.depth_b;
          out.append(d);
        }
        return out;
      },
      py::arg("scene_json"), py::arg("cam"), py::arg("width"),
      py::arg("height"), py::arg("pose_a"), py::arg("pose_b"), py::arg("n"),
      py::arg("seed") = 1);

  // ------------------------------------------------------------------- eval
  m.def(
      "depth_error_metrics",
      [](const py::array_t<float>& pred, const py::array_t<bool>& pred_valid,
         const py::array_t<float>& gt, const py::array_t<bool>& gt_valid,
         const std::optional<py::array_t<bool>>& foreground) {
        std::optional<Mask> fg;
        if (foreground) fg = mask_from_array(*foreground);
        const DepthErrorReport report = depth_error_metrics(
            depth_map_from_arrays(pred, pred_valid),
            depth_map_from_arrays(gt, gt_valid), fg ? &*fg : nullptr, nullptr);
        py::dict out;
        out["all"] = stats_dict(report.all);
        if (report.fg_pooled) out["foreground_pooled"] = stats_dict(*report.fg_pooled);
        out["prediction_missing"] = report.prediction_missing;
        return out;
      },
      py::arg("pred"), py::arg("pred_valid"), py::arg("gt"),
      py::arg("gt_valid"), py::arg("foreground") = std::nullopt);

  // --------------------------------------------------------------------- io
  m.def("write_pfm",
        [](const std::string& path, const py::array_t<float>& img) {
          write_pfm(path, image_from_array(img));
        });
  m.def("read_pfm", [](const std::string& path) {
    return image_to_array(read_pfm(path));
  });
  m.def("read_image", [](const std::string& path) {
    return image_to_array(read_image(path));
  });
  m.def("parse_calibration", [](const std::string& text) {
    py::dict out;
    for (const auto& rec : parse_calibration(text)) {
      py::dict cam;
      cam["intrinsics"] = rec.intrinsics;
      cam["baseline_tx"] = rec.baseline_tx;
      out[py::str(rec.camera_id)] = cam;
    }
    return out;
  });
}
