"""Association, focal/ground estimation, and mirror initialization."""

import numpy as np
import pytest

from conftest import associated_pairs

from mirrormocap.calibrate import (
    CalibrateConfig,
    Detection2D,
    FrameAssociation,
    ankle_point,
    associate_real_mirror,
    associated_pair,
    estimate_focal_ground,
    head_point,
    init_mirror,
    mirror_from_ground_points,
)
from mirrormocap.errors import (
    AmbiguousAssociation,
    AnklesCoincide,
    DegenerateMotion,
    NoValidFrames,
    WrongPersonCount,
)
from mirrormocap.geometry import (
    CameraIntrinsics,
    Plane,
    angle_between_deg,
    project_points,
)
from mirrormocap.skeleton import default_skeleton
from mirrormocap.synth import SceneConfig, generate_scene

SKEL, _ = default_skeleton()
NAMES = SKEL.joint_names
FLIP = SKEL.flip_permutation()
CFG = CalibrateConfig()


def detection_with_size(px_size, offset=(0.0, 0.0)):
    """Synthetic detection whose neck-pelvis pixel distance is px_size."""
    joints = np.full((17, 2), 300.0) + np.asarray(offset)
    joints[NAMES.index("neck"), 1] -= px_size
    conf = np.ones(17)
    return Detection2D(joints, conf)


class TestAssociation:
    def test_larger_person_is_real(self):
        frame = [detection_with_size(120.0), detection_with_size(80.0, (50, 0))]
        assoc = associate_real_mirror(frame, FLIP, CFG, NAMES)
        assert assoc.real_idx == 0 and assoc.mirror_idx == 1

    def test_threshold_case_is_ambiguous(self):
        frame = [detection_with_size(100.0), detection_with_size(100.5, (50, 0))]
        with pytest.raises(AmbiguousAssociation):
            associate_real_mirror(frame, FLIP, CFG, NAMES)

    def test_wrong_person_count(self):
        with pytest.raises(WrongPersonCount):
            associate_real_mirror([detection_with_size(100.0)], FLIP, CFG, NAMES)
        with pytest.raises(WrongPersonCount):
            associate_real_mirror([detection_with_size(100.0)] * 3, FLIP, CFG, NAMES)

    def test_low_confidence_is_ambiguous(self):
        a = detection_with_size(120.0)
        a.conf[NAMES.index("neck")] = 0.1
        frame = [a, detection_with_size(80.0, (50, 0))]
        with pytest.raises(AmbiguousAssociation):
            associate_real_mirror(frame, FLIP, CFG, NAMES)

    def test_synthetic_accuracy(self):
        scene, frames = generate_scene(SceneConfig(frames=200), seed=1)
        ok = total = 0
        for t, pair in enumerate(frames):
            try:
                assoc = associate_real_mirror(pair, scene.flip, CFG, NAMES)
            except AmbiguousAssociation:
                continue
            total += 1
            ok += assoc.real_idx == (0 if scene.real_first[t] else 1)
        assert total >= 0.95 * len(frames)
        assert ok / total >= 0.99

    def test_flip_applied_to_mirror(self):
        scene, frames = generate_scene(SceneConfig(frames=5), seed=2)
        pair = frames[0]
        assoc = associate_real_mirror(pair, scene.flip, CFG, NAMES)
        real, mirror = associated_pair(pair, assoc)
        # un-flipped mirror joints match the projected reflected joints
        from mirrormocap.geometry import reflection_matrix

        A = reflection_matrix(scene.mirror_gt)
        expected = project_points(scene.K_gt, A.apply_many(scene.joints_gt[0]))
        assert np.abs(mirror.joints - expected).max() < 1e-9

    def test_association_requires_involution(self):
        with pytest.raises(ValueError):
            FrameAssociation(0, 1, np.array([1, 2, 0]))


class TestFocalGround:
    @staticmethod
    def pedestrian_pixels(f, tilt_deg, cam_h, n, seed, sigma=0.0, height=1.7):
        """Exact vertical pedestrians on a tilted ground plane."""
        rng = np.random.default_rng(seed)
        W, H = 1280, 720
        K = CameraIntrinsics(f, W / 2, H / 2, W, H)
        pitch = np.radians(tilt_deg)
        n_g = np.array([0.0, -np.cos(pitch), -np.sin(pitch)])
        feet3 = []
        for _ in range(n):
            z = rng.uniform(3.0, 8.0)
            x = rng.uniform(-0.3, 0.3) * z
            y = (cam_h - z * (-n_g[2])) / -n_g[1] * -1.0
            # solve n.p + d = 0 for y given x, z
            y = (cam_h + n_g[2] * z) / (-n_g[1])
            feet3.append((x, y, z))
        feet3 = np.asarray(feet3)
        heads3 = feet3 + height * n_g
        ankles = project_points(K, feet3) + rng.normal(0, sigma, (n, 2))
        heads = project_points(K, heads3) + rng.normal(0, sigma, (n, 2))
        return K, Plane(n_g, cam_h), heads, ankles

    def test_exact_recovery_fronto_level(self):
        # zero noise, level camera: normal recovered to solver tolerance
        K, ground, heads, ankles = self.pedestrian_pixels(1000.0, 0.001, 1.6, 60, 0)
        K_est, g_est, rms = estimate_focal_ground(heads, ankles, (K.width, K.height))
        assert rms < 1e-3
        assert abs(K_est.f - 1000.0) / 1000.0 < 1e-3
        assert angle_between_deg(g_est.n, np.array([0.0, -1.0, 0.0])) < 0.05

    def test_tilted_camera_with_noise(self):
        K, ground, heads, ankles = self.pedestrian_pixels(1200.0, 10.0, 1.5, 120, 3, sigma=1.0)
        K_est, g_est, rms = estimate_focal_ground(heads, ankles, (K.width, K.height))
        assert abs(K_est.f - 1200.0) / 1200.0 < 0.02
        assert angle_between_deg(g_est.n, ground.n) < 1.0

    def test_height_rescales_not_focal(self):
        # wrong assumed height changes camera height, not f or the normal
        K, ground, heads, ankles = self.pedestrian_pixels(1000.0, 8.0, 1.5, 80, 5)
        K1, g1, _ = estimate_focal_ground(heads, ankles, (K.width, K.height), person_height=1.7)
        K2, g2, _ = estimate_focal_ground(heads, ankles, (K.width, K.height), person_height=1.7 * 1.3)
        assert abs(K1.f - K2.f) / K1.f < 5e-3
        assert angle_between_deg(g1.n, g2.n) < 0.1
        assert np.isclose(g2.d / g1.d, 1.3, rtol=0.02)

    def test_degenerate_motion(self):
        heads = np.tile([[300.0, 200.0]], (60, 1))
        ankles = np.tile([[300.0, 500.0]], (60, 1))
        with pytest.raises(DegenerateMotion):
            estimate_focal_ground(heads, ankles, (1280, 720))

    def test_too_few_upright(self):
        heads = np.random.default_rng(0).uniform(100, 600, (20, 2))
        ankles = heads + np.array([0.0, 100.0])
        with pytest.raises(NoValidFrames):
            estimate_focal_ground(heads, ankles, (1280, 720))


class TestMirrorInit:
    def test_hand_placed_points(self):
        ground = Plane(np.array([0.0, -1.0, 0.0]), 1.6)
        n, m = mirror_from_ground_points(
            np.array([0.0, 1.6, 2.0]), np.array([0.0, 1.6, 4.0]), ground
        )
        assert np.allclose(n, (0, 0, -1))
        assert np.allclose(m, (0, 1.6, 3.0))

    def test_person_touching_mirror(self):
        ground = Plane(np.array([0.0, -1.0, 0.0]), 1.6)
        p = np.array([0.0, 1.6, 2.0])
        with pytest.raises(AnklesCoincide):
            mirror_from_ground_points(p, p + 1e-9, ground)

    def test_recovery_zero_noise(self, walk_scene):
        scene, frames = walk_scene
        pairs, _ = associated_pairs(scene, frames)
        usable = [p for p in pairs if p is not None]
        mirror = init_mirror(scene.K_gt, scene.ground_gt, usable)
        assert angle_between_deg(mirror.n, scene.mirror_gt.n) < 0.05
        assert abs(mirror.n @ scene.ground_gt.n) < 1e-9
        assert abs(np.linalg.norm(mirror.n) - 1.0) < 1e-9

    def test_recovery_noise_1px(self):
        scene, frames = generate_scene(SceneConfig(frames=100, noise_sigma=1.0), seed=21)
        pairs, _ = associated_pairs(scene, frames)
        usable = [p for p in pairs if p is not None]
        mirror = init_mirror(scene.K_gt, scene.ground_gt, usable)
        assert angle_between_deg(mirror.n, scene.mirror_gt.n) < 0.5

    def test_rotated_mirror_30deg(self):
        scene, frames = generate_scene(
            SceneConfig(frames=100, mirror_yaw_deg=30.0, mirror_distance=4.4), seed=8
        )
        pairs, _ = associated_pairs(scene, frames)
        usable = [p for p in pairs if p is not None]
        mirror = init_mirror(scene.K_gt, scene.ground_gt, usable)
        assert angle_between_deg(mirror.n, scene.mirror_gt.n) < 0.05

    def test_duplicating_frames_is_invariant(self, walk_scene):
        scene, frames = walk_scene
        pairs, _ = associated_pairs(scene, frames)
        usable = [p for p in pairs if p is not None]
        m1 = init_mirror(scene.K_gt, scene.ground_gt, usable)
        m2 = init_mirror(scene.K_gt, scene.ground_gt, usable + usable)
        assert np.abs(m1.n - m2.n).max() < 1e-12
        assert abs(m1.d - m2.d) < 1e-12

    def test_no_valid_frames(self):
        with pytest.raises(NoValidFrames):
            init_mirror(
                CameraIntrinsics(900.0, 640, 360, 1280, 720),
                Plane(np.array([0.0, -1.0, 0.0]), 1.5),
                [],
            )

    def test_noise_response_monotone(self):
        sigmas = [0.0, 1.0, 2.0, 4.0]
        means = []
        for sigma in sigmas:
            errs = []
            for seed in range(20):
                scene, frames = generate_scene(
                    SceneConfig(frames=60, noise_sigma=sigma), seed=seed
                )
                pairs, _ = associated_pairs(scene, frames)
                usable = [p for p in pairs if p is not None]
                mirror = init_mirror(scene.K_gt, scene.ground_gt, usable)
                errs.append(angle_between_deg(mirror.n, scene.mirror_gt.n))
            means.append(np.mean(errs))
        assert all(a <= b + 1e-9 for a, b in zip(means, means[1:]))


class TestHelpers:
    def test_ankle_point_weighted(self):
        det = detection_with_size(100.0)
        la, ra = NAMES.index("left_ankle"), NAMES.index("right_ankle")
        det.joints[la] = (100.0, 500.0)
        det.joints[ra] = (200.0, 500.0)
        det.conf[la] = 1.0
        det.conf[ra] = 0.5
        p = ankle_point(det, NAMES)
        assert np.allclose(p, ((100.0 + 0.5 * 200.0) / 1.5, 500.0))

    def test_ankle_point_single_fallback(self):
        det = detection_with_size(100.0)
        la, ra = NAMES.index("left_ankle"), NAMES.index("right_ankle")
        det.joints[la] = (100.0, 500.0)
        det.conf[ra] = 0.0
        assert np.allclose(ankle_point(det, NAMES), det.joints[la])
        det.conf[la] = 0.0
        assert ankle_point(det, NAMES) is None

    def test_head_point_fallback_chain(self):
        det = detection_with_size(100.0)
        det.conf[NAMES.index("head_top")] = 0.0
        assert np.allclose(head_point(det, NAMES), det.joints[NAMES.index("head")])
        det.conf[NAMES.index("head")] = 0.0
        assert np.allclose(head_point(det, NAMES), det.joints[NAMES.index("neck")])
