"""Shared fixtures: small scenes and helpers reused across test modules."""

import numpy as np
import pytest
import torch

from mirrormocap.calibrate import (
    CalibrateConfig,
    associate_real_mirror,
    associated_pair,
)
from mirrormocap.geometry import CameraIntrinsics, Plane, rotation_about_axis
from mirrormocap.render import AnalyticBodyField, PoseFrame, RenderConfig
from mirrormocap.skeleton import (
    IDENTITY_ROT6D,
    PoseParams,
    default_skeleton,
    upright_root_rot6d,
)
from mirrormocap.synth import SceneConfig, dance_config, generate_scene

torch.set_num_threads(2)


def associated_pairs(scene, frames, config=None):
    """(pairs, valid) lists with Nones for frames that fail association."""
    config = config or CalibrateConfig()
    names = scene.skel.joint_names
    pairs, valid = [], []
    for dets in frames:
        try:
            assoc = associate_real_mirror(dets, scene.flip, config, names)
            pairs.append(associated_pair(dets, assoc))
            valid.append(True)
        except Exception:
            pairs.append(None)
            valid.append(False)
    return pairs, np.asarray(valid, dtype=bool)


@pytest.fixture(scope="session")
def walk_scene():
    return generate_scene(SceneConfig(frames=100), seed=11)


@pytest.fixture(scope="session")
def dance_scene_30():
    return generate_scene(dance_config(frames=30), seed=5)


@pytest.fixture(scope="session")
def capsule_setup():
    """Small overlapping real/mirror capsule scene for render tests."""
    K = CameraIntrinsics(300, 128, 128, 256, 256)
    skel, lengths = default_skeleton()
    ground = Plane(np.array([0.0, -1.0, 0.0]), 1.0)
    up = ground.n
    n0 = np.array([0.0, 0.0, -1.0])
    n0 = n0 - (n0 @ up) * up
    n0 /= np.linalg.norm(n0)
    mirror = Plane(rotation_about_axis(up, np.radians(14.0)) @ n0, 2.6)
    theta = np.tile(IDENTITY_ROT6D, (1, skel.n_joints, 1))
    theta[0, 0] = upright_root_rot6d(up, 0.4)
    pose = PoseParams(theta, lengths, np.array([[0.15, 0.12, 2.2]]))
    pf = PoseFrame(skel, pose, 0)
    radii = np.clip(0.22 * lengths, 0.02, 0.08)
    field = AnalyticBodyField(
        skel, lengths, radii, AnalyticBodyField.default_palette(skel), sigma=200.0
    )
    bg = np.full((256, 256, 3), 0.1)
    return dict(K=K, skel=skel, mirror=mirror, ground=ground, pose=pose, pf=pf, field=field, bg=bg)


@pytest.fixture(scope="session")
def disjoint_capsule_setup():
    """Same body, mirror angled so the two projections do not overlap."""
    K = CameraIntrinsics(260, 128, 128, 256, 256)
    skel, lengths = default_skeleton()
    ground = Plane(np.array([0.0, -1.0, 0.0]), 1.0)
    up = ground.n
    n0 = np.array([0.0, 0.0, -1.0])
    n0 = n0 - (n0 @ up) * up
    n0 /= np.linalg.norm(n0)
    mirror = Plane(rotation_about_axis(up, np.radians(34.0)) @ n0, 2.3)
    theta = np.tile(IDENTITY_ROT6D, (1, skel.n_joints, 1))
    theta[0, 0] = upright_root_rot6d(up, -0.3)
    pose = PoseParams(theta, lengths, np.array([[-0.45, 0.12, 2.3]]))
    pf = PoseFrame(skel, pose, 0)
    radii = np.clip(0.22 * lengths, 0.02, 0.075)
    field = AnalyticBodyField(
        skel, lengths, radii, AnalyticBodyField.default_palette(skel), sigma=200.0
    )
    bg = np.full((256, 256, 3), 0.15)
    return dict(K=K, skel=skel, mirror=mirror, ground=ground, pose=pose, pf=pf, field=field, bg=bg)


def render_cfg(**kw):
    base = dict(jitter=False)
    base.update(kw)
    return RenderConfig(**base)
