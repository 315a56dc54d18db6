"""Smoke tests for the python bindings: every exposed subsystem gets one
round trip against values the C++ suite pins down in depth."""

import math

import numpy as np
import pytest

import dfm

CAM = dfm.Intrinsics.with_focal(220.0, 95.5, 59.5)
WALL_SCENE = (
    '{"primitives":[{"shape":{"type":"plane","point":[0,0,20],'
    '"normal":[0,0,-1]},"texture":{"type":"noise","scale":0.9,"seed":5,'
    '"octaves":3}}]}'
)


def test_projection_round_trip():
    u, v, depth = dfm.project(CAM, np.array([1.0, 0.5, 10.0]))
    point = dfm.backproject(CAM, u, v, depth)
    assert np.allclose(point, [1.0, 0.5, 10.0], atol=1e-12)
    with pytest.raises(dfm.DfmError):
        dfm.project(CAM, np.array([0.0, 0.0, -1.0]))


def test_binocular_and_effective_baseline():
    assert dfm.binocular_depth(700.0, 0.54, 70.0) == pytest.approx(5.4)
    cam = dfm.Intrinsics.with_focal(700.0, 600.0, 180.0)
    assert dfm.effective_baseline(0.0, 5.4, 670.0, cam) == pytest.approx(-0.54)


def test_two_view_depth_recovers_synthetic_point():
    motion = dfm.RigidMotion(
        dfm.UnitQuaternion.from_axis_angle(np.array([0.0, 1.0, 0.0]), 0.01),
        np.array([-0.3, 0.02, -0.5]),
    )
    point = np.array([1.5, -0.4, 18.0])
    u1, v1, _ = dfm.project(CAM, point)
    u2, v2, _ = dfm.project(CAM, motion.apply(point))
    out = dfm.general_two_view_depth(CAM, motion, dfm.Correspondence(u1, v1, u2, v2))
    assert out.d1 == pytest.approx(18.0, rel=1e-6)


def test_plane_sweep_pipeline():
    width, height = 128, 80
    img_t, depth_t, valid_t = dfm.render_scene(WALL_SCENE, CAM, width, height)
    prev_pose = dfm.RigidMotion(dfm.UnitQuaternion(), np.array([-0.54, 0.0, 0.0]))
    img_prev, _, _ = dfm.render_scene(WALL_SCENE, CAM, width, height, prev_pose)

    levels = dfm.DepthLevels.from_range(2.0, 59.6, 64)
    # Frame t sits at the world origin, so the frame-t -> frame-prev motion
    # is the previous camera's world-to-camera pose itself.
    motion = prev_pose
    vol = dfm.compute_cost_volume(img_t, img_prev, CAM, motion, levels)
    assert vol.values().shape == (height, width, 64)
    dist = dfm.cost_to_distribution(vol, 0.1)
    depth, valid = dfm.distribution_to_depth(dist, "argmax")

    close = np.abs(depth[valid] - 20.0) <= levels.delta
    assert close.mean() > 0.9

    omega, conf_valid = dfm.stereo_confidence(vol)
    assert omega[conf_valid].mean() > 0.5

    report = dfm.depth_error_metrics(depth, valid, depth_t, valid_t)
    assert report["all"]["median"] < levels.delta


def test_fusion_convex_combination():
    levels = dfm.DepthLevels.from_range(2.0, 12.0, 21)
    mono_depth = np.full((6, 8), 5.0, dtype=np.float32)
    stereo_depth = np.full((6, 8), 9.0, dtype=np.float32)
    valid = np.ones((6, 8), dtype=bool)
    mono = dfm.mono_prior_distribution(mono_depth, valid, levels)
    stereo = dfm.mono_prior_distribution(stereo_depth, valid, levels)
    fused = dfm.fuse(mono, stereo, np.full((6, 8), 0.5, dtype=np.float32))
    total = fused.values().sum(axis=2)
    assert np.allclose(total, 1.0, atol=1e-6)

    loss, pixels = dfm.depth_ce_loss(
        stereo, stereo_depth, valid, fg_weight=1.0, bg_weight=1.0, gamma=0.0
    )
    assert loss == pytest.approx(0.0, abs=1e-9)
    assert pixels == 48


def test_ssim_and_photometric_loss():
    rng = np.random.default_rng(3)
    img = rng.random((40, 50), dtype=np.float32)
    ssim = dfm.ssim_map(img, img)
    assert np.allclose(ssim, 1.0, atol=1e-9)
    mask = np.ones_like(img, dtype=bool)
    assert dfm.photometric_loss(img, img, mask) == pytest.approx(0.0)


def test_pose_recovery():
    width, height = 128, 80
    img_t, depth_t, valid_t = dfm.render_scene(WALL_SCENE, CAM, width, height)
    prev_pose = dfm.RigidMotion(
        dfm.UnitQuaternion.from_axis_angle(np.array([0.0, 1.0, 0.0]), 0.01),
        np.array([-0.2, 0.0, -0.3]),
    )
    img_prev, _, _ = dfm.render_scene(WALL_SCENE, CAM, width, height, prev_pose)
    motion = prev_pose  # frame t renders at the world origin

    cfg = dfm.PoseLossConfig()
    cfg.check_gradient = False
    estimate, diag = dfm.optimize_pose(img_t, img_prev, depth_t, valid_t, CAM, cfg)
    err = np.linalg.norm(estimate.translation - motion.translation)
    assert err / np.linalg.norm(motion.translation) < 0.05
    assert diag["iterations"] > 0


def test_voxel_sampling_and_bev():
    levels = dfm.DepthLevels.from_range(2.0, 12.0, 26)
    img = np.zeros((48, 64), dtype=np.float32)
    vol = dfm.compute_cost_volume(
        img, img, dfm.Intrinsics.with_focal(100.0, 32.0, 24.0),
        dfm.RigidMotion(), levels,
    )
    spec = dfm.VoxelGridSpec()
    spec.x_min, spec.x_max = -2.0, 2.0
    spec.y_min, spec.y_max = -1.0, 1.0
    spec.z_min, spec.z_max = 2.0, 12.0
    spec.edge = 0.5
    grid = dfm.sample_voxels(vol, dfm.Intrinsics.with_focal(100.0, 32.0, 24.0), spec)
    assert grid.values().shape == (8, 4, 20)
    assert grid.occupied_count() > 0
    values, occupied = dfm.collapse_bev(grid, "stack")
    assert values.shape == (4, 8, 20)


def test_pfm_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    img = rng.random((12, 17), dtype=np.float32)
    path = str(tmp_path / "x.pfm")
    dfm.write_pfm(path, img)
    assert np.array_equal(dfm.read_pfm(path), img)


def test_calibration_parse():
    cams = dfm.parse_calibration(
        "P2: 707.0 0.0 601.0 0.0 0.0 707.0 183.0 0.0 0.0 0.0 1.0 0.0\n"
    )
    assert cams["P2"]["intrinsics"].fx == pytest.approx(707.0)
    assert cams["P2"]["intrinsics"].cv == pytest.approx(183.0)
