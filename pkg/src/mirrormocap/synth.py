"""Ground-truth scene generator and brute-force oracles.

Scenes place an articulated person in front of a mirror that stands
exactly orthogonal to a (possibly tilted) ground plane, then project the
forward-kinematics joints into the camera for the real person and through
the mirror transform for the virtual one. Detections get the left/right
flip a 2D detector would apply to a mirror image, optional Gaussian pixel
noise, and uniform confidences; generation is a pure function of
(config, seed).

Motion presets:

* ``walk``  -- straight legs and torso with swinging arms on a curved
  ground path: head and ankles keep exact pedestrian geometry, which the
  calibration stage assumes.
* ``dance`` -- sinusoidal joint angles on every limb plus pelvis bobbing;
  exercises all rotations for the lifting tests.
* ``stand`` -- static A-pose (association and initialization fixtures).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .calibrate import Detection2D
from .errors import PersonBehindMirror
from .geometry import (
    CameraIntrinsics,
    Plane,
    Ray,
    project_points,
    rotation_about_axis,
)
from .render import RadianceField, ray_box_span
from .skeleton import (
    IDENTITY_ROT6D,
    PoseParams,
    SkeletonDef,
    default_skeleton,
    forward_kinematics_all,
    leg_length,
    matrix_to_rot6d,
    standing_height,
    template_lengths,
    upright_root_rot6d,
)


@dataclass(frozen=True)
class SceneConfig:
    frames: int = 100
    image_width: int = 1280
    image_height: int = 720
    focal: float = 900.0
    camera_height: float = 1.4
    camera_pitch_deg: float = 8.0
    mirror_distance: float = 3.9
    mirror_yaw_deg: float = 15.0
    person_distance: float = 3.1
    walk_span: float = 0.9
    depth_span: float = 0.5
    facing_deg: float = 0.0
    facing_sweep_deg: float = 35.0
    motion: str = "walk"
    arm_swing: float = 0.45
    leg_swing: float = 0.0
    torso_sway: float = 0.0
    bob_amount: float = 0.0
    person_height: float = 1.7
    noise_sigma: float = 0.0
    conf_correlated: bool = False
    with_heels: bool = False


def dance_config(**overrides) -> SceneConfig:
    """Articulated preset: every joint group moves."""
    base = SceneConfig(
        motion="dance", arm_swing=0.5, leg_swing=0.35, torso_sway=0.18, bob_amount=0.04
    )
    return replace(base, **overrides)


@dataclass
class SyntheticScene:
    """Ground truth for one generated sequence."""

    config: SceneConfig
    seed: int
    K_gt: CameraIntrinsics
    ground_gt: Plane
    mirror_gt: Plane
    skel: SkeletonDef
    motion_gt: PoseParams
    joints_gt: np.ndarray  # (T, J, 3)
    person_height: float
    noise_sigma: float
    real_first: np.ndarray  # (T,) detection order per frame
    flip: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.joints_gt.shape[0]


def _scene_frames(config: SceneConfig, seed: int):
    """Ground-truth geometry and motion shared by generate paths."""
    cfg = config
    K = CameraIntrinsics(
        cfg.focal, cfg.image_width / 2.0, cfg.image_height / 2.0,
        cfg.image_width, cfg.image_height,
    )
    pitch = np.radians(cfg.camera_pitch_deg)
    n_g = np.array([0.0, -np.cos(pitch), -np.sin(pitch)])
    ground = Plane(n_g, cfg.camera_height)
    up = n_g  # camera is on the positive side

    # mirror: faces the camera, orthogonal to the ground, yawed about up
    n0 = -np.array([0.0, 0.0, 1.0])
    n0 = n0 - (n0 @ up) * up
    n0 /= np.linalg.norm(n0)
    n_m = rotation_about_axis(up, np.radians(cfg.mirror_yaw_deg)) @ n0
    mirror = Plane(n_m, cfg.mirror_distance)

    skel, _ = default_skeleton(with_heels=cfg.with_heels)
    lengths = template_lengths(skel, cfg.person_height)

    # ground-plane basis: e1 lateral, e2 away from the camera
    e1 = np.array([1.0, 0.0, 0.0])
    e1 = e1 - (e1 @ up) * up
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(up, e1)
    origin_g = -ground.d * up  # ground point right below the camera

    T = cfg.frames
    rng = np.random.default_rng(np.random.SeedSequence([seed, 77]))
    J = skel.n_joints
    phase = 2.0 * np.pi * np.arange(T) / max(T, 1)

    feet = (
        origin_g[None, :]
        + (cfg.person_distance + cfg.depth_span * np.sin(0.7 * phase))[:, None] * e2[None, :]
        + (cfg.walk_span * np.sin(phase - 0.4))[:, None] * e1[None, :]
    )
    bob = cfg.bob_amount * np.sin(2.3 * phase) if cfg.motion == "dance" else np.zeros(T)
    pelvis = feet + (leg_length(skel, lengths) + bob)[:, None] * up[None, :]

    facing = np.radians(cfg.facing_deg) + np.radians(cfg.facing_sweep_deg) * np.sin(0.5 * phase)

    theta = np.tile(IDENTITY_ROT6D, (T, J, 1))
    for t in range(T):
        theta[t, 0] = upright_root_rot6d(up, float(facing[t]))

    amplitudes = np.zeros(J)
    names = skel.joint_names
    for nm in ("left_elbow", "right_elbow", "left_wrist", "right_wrist"):
        amplitudes[names.index(nm)] = cfg.arm_swing
    for nm in ("left_shoulder", "right_shoulder"):
        amplitudes[names.index(nm)] = 0.5 * cfg.arm_swing
    for nm in ("left_hip", "right_hip", "left_knee", "right_knee"):
        amplitudes[names.index(nm)] = cfg.leg_swing
    for nm in ("spine", "neck"):
        amplitudes[names.index(nm)] = cfg.torso_sway

    axes = rng.normal(size=(J, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    phases = rng.uniform(0, 2 * np.pi, size=J)
    freqs = rng.uniform(0.8, 1.6, size=J)
    for j in range(1, J):
        if amplitudes[j] == 0.0:
            continue
        for t in range(T):
            ang = amplitudes[j] * np.sin(freqs[j] * phase[t] + phases[j])
            theta[t, j] = matrix_to_rot6d(rotation_about_axis(axes[j], ang))

    motion = PoseParams(theta=theta, lengths=lengths, pelvis=pelvis)
    joints = forward_kinematics_all(skel, motion)
    return K, ground, mirror, skel, motion, joints


def generate_scene(config: SceneConfig, seed: int = 0):
    """Generate a scene plus per-frame detection pairs.

    Returns (SyntheticScene, frames) where ``frames[t]`` is a list of two
    Detection2D in randomized order; the mirror detection carries the
    left/right flip a pose detector would produce. Deterministic in
    (config, seed).
    """
    cfg = config
    K, ground, mirror, skel, motion, joints = _scene_frames(cfg, seed)
    T, J = joints.shape[:2]

    margin = 0.02
    dist = joints @ mirror.n + mirror.d
    if np.any(dist < margin):
        raise PersonBehindMirror(
            f"motion reaches {dist.min():.3f} of the mirror plane (needs > {margin})"
        )

    from .geometry import reflection_matrix

    A = reflection_matrix(mirror)
    mirror_joints = joints @ A.linear.T + A.A[:3, 3]

    px_real = project_points(K, joints)
    px_mirror = project_points(K, mirror_joints)

    flip = skel.flip_permutation()
    px_mirror = px_mirror[:, flip, :]  # detector labels the mirror image flipped

    W, H = cfg.image_width, cfg.image_height
    for px in (px_real, px_mirror):
        if (
            px[..., 0].min() < -0.08 * W
            or px[..., 0].max() > 1.08 * W
            or px[..., 1].min() < -0.08 * H
            or px[..., 1].max() > 1.08 * H
        ):
            raise ValueError("scene config projects outside the image (+8% margin)")

    rng = np.random.default_rng(np.random.SeedSequence([seed, 101]))
    noise_r = rng.normal(0.0, 1.0, size=px_real.shape)
    noise_m = rng.normal(0.0, 1.0, size=px_mirror.shape)
    obs_real = px_real + cfg.noise_sigma * noise_r
    obs_mirror = px_mirror + cfg.noise_sigma * noise_m

    if cfg.conf_correlated and cfg.noise_sigma > 0:
        mag_r = np.linalg.norm(noise_r, axis=2)
        mag_m = np.linalg.norm(noise_m, axis=2)
        conf_r = np.clip(1.0 - 0.2 * mag_r, 0.5, 1.0)
        conf_m = np.clip(1.0 - 0.2 * mag_m, 0.5, 1.0)
    else:
        conf_r = rng.uniform(0.5, 1.0, size=(T, J))
        conf_m = rng.uniform(0.5, 1.0, size=(T, J))

    real_first = rng.random(T) < 0.5
    frames = []
    for t in range(T):
        real_det = Detection2D(obs_real[t], conf_r[t], frame_idx=t)
        mirror_det = Detection2D(obs_mirror[t], conf_m[t], frame_idx=t)
        pair = [real_det, mirror_det] if real_first[t] else [mirror_det, real_det]
        for i, det in enumerate(pair):
            det.person_idx = i
        frames.append(pair)

    scene = SyntheticScene(
        config=cfg,
        seed=seed,
        K_gt=K,
        ground_gt=ground,
        mirror_gt=mirror,
        skel=skel,
        motion_gt=motion,
        joints_gt=joints,
        person_height=standing_height(skel, motion.lengths),
        noise_sigma=cfg.noise_sigma,
        real_first=real_first,
        flip=flip,
    )
    return scene, frames


def scene_keypoint_dict(scene: SyntheticScene, frames: list) -> dict:
    """Serialize detections to the keypoint JSON schema the CLI ingests."""
    out_frames = []
    for t, pair in enumerate(frames):
        persons = []
        for det in pair:
            arr = np.concatenate([det.joints, det.conf[:, None]], axis=1)
            persons.append({"joints": [[float(x) for x in row] for row in arr]})
        out_frames.append({"frame": t, "persons": persons})
    return {
        "schema": "mirror17" if scene.skel.n_joints == 17 else "mirror19",
        "image_size": [scene.K_gt.width, scene.K_gt.height],
        "frames": out_frames,
    }


def scene_ground_truth_dict(scene: SyntheticScene) -> dict:
    return {
        "K": scene.K_gt.to_dict(),
        "ground": scene.ground_gt.to_dict(),
        "mirror": scene.mirror_gt.to_dict(),
        "person_height": float(scene.person_height),
        "joint_names": list(scene.skel.joint_names),
        "frames": [
            {"joints": [[float(x) for x in row] for row in scene.joints_gt[t]]}
            for t in range(scene.n_frames)
        ],
    }


# --- perturbations ------------------------------------------------------------------


def perturb(scene: SyntheticScene, what: str, magnitude: float) -> SyntheticScene:
    """Controlled perturbation of one ground-truth quantity.

    ``focal``: multiplies f by (1 + magnitude). ``normal``: rotates the
    mirror normal by ``magnitude`` degrees about the ground normal.
    ``pose``: adds seeded Gaussian noise of the given std to the 6D
    rotation parameters.
    """
    if magnitude == 0.0:
        return scene
    if what == "focal":
        K = scene.K_gt
        K2 = CameraIntrinsics(K.f * (1.0 + magnitude), K.o1, K.o2, K.width, K.height)
        return replace_scene(scene, K_gt=K2)
    if what == "normal":
        R = rotation_about_axis(scene.ground_gt.n, np.radians(magnitude))
        n = R @ scene.mirror_gt.n
        return replace_scene(scene, mirror_gt=Plane(n, scene.mirror_gt.d))
    if what == "pose":
        rng = np.random.default_rng(np.random.SeedSequence([scene.seed, 202]))
        theta = scene.motion_gt.theta + rng.normal(0.0, magnitude, scene.motion_gt.theta.shape)
        motion = PoseParams(theta, scene.motion_gt.lengths.copy(), scene.motion_gt.pelvis.copy())
        return replace_scene(scene, motion_gt=motion)
    raise ValueError(f"unknown perturbation {what!r}")


def replace_scene(scene: SyntheticScene, **kw) -> SyntheticScene:
    fields = dict(
        config=scene.config,
        seed=scene.seed,
        K_gt=scene.K_gt,
        ground_gt=scene.ground_gt,
        mirror_gt=scene.mirror_gt,
        skel=scene.skel,
        motion_gt=scene.motion_gt,
        joints_gt=scene.joints_gt,
        person_height=scene.person_height,
        noise_sigma=scene.noise_sigma,
        real_first=scene.real_first,
        flip=scene.flip,
    )
    fields.update(kw)
    return SyntheticScene(**fields)


# --- exact ray-march oracle ------------------------------------------------------------


def _march_leg(field, encoder, origins, dirs, a, b, step, trans, color, sample_chunk=200000):
    """Fixed-step midpoint march of one leg for a batch of rays.

    ``a``/``b`` are per-ray start/end distances (b <= a marks an empty
    leg); ``trans``/``color`` carry transmittance and accumulated color
    across legs and are updated in place.
    """
    span = np.maximum(b - a, 0.0)
    alive = span > 0.0
    if not alive.any():
        return
    idx = np.nonzero(alive)[0]
    a, b = a[idx], b[idx]
    origins, dirs = origins[idx], dirs[idx]
    n_cells = int(np.ceil((b - a).max() / step))
    k = np.arange(n_cells)
    lo = a[:, None] + step * k[None, :]
    hi = np.minimum(lo + step, b[:, None])
    widths = np.maximum(hi - lo, 0.0)
    mids = np.where(widths > 0.0, 0.5 * (lo + hi), a[:, None])
    pts = origins[:, None, :] + mids[..., None] * dirs[:, None, :]
    R, S, _ = pts.shape
    flat = pts.reshape(R * S, 3)
    sigma = np.empty(R * S)
    rgb = np.empty((R * S, 3))
    for s0 in range(0, R * S, sample_chunk):
        s1 = min(s0 + sample_chunk, R * S)
        rgb[s0:s1], sigma[s0:s1] = field.evaluate(encoder(flat[s0:s1]))
    sigma = np.maximum(sigma.reshape(R, S), 0.0)
    rgb = rgb.reshape(R, S, 3)
    od = sigma * widths
    cs = np.cumsum(od, axis=1)
    t_k = np.exp(-(cs - od)) * trans[idx, None]
    w = t_k * (1.0 - np.exp(-od))
    color[idx] += np.einsum("rs,rsc->rc", w, rgb)
    trans[idx] *= np.exp(-cs[:, -1])


def oracle_march_rays(
    field: RadianceField,
    mirror: Plane,
    origins: np.ndarray,
    dirs: np.ndarray,
    t_near,
    t_far,
    step: float,
    encoder,
    background,
    support: tuple | None = None,
) -> np.ndarray:
    """Vectorized dense march of the full physical path for many rays.

    Directions are normalized internally so ``step`` and the t ranges are
    in scene units. Each ray marches the direct leg up to the mirror, then
    the reflected continuation from the intersection point (Householder
    direction), accumulating transmittance in a single pass and finishing
    on the background. ``support`` optionally restricts marching to a
    conservative world AABB outside of which the field is exactly zero;
    this changes nothing for compactly supported fields but keeps the
    march tractable.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    R = len(dirs)
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    d0 = dirs / norms
    t_near = np.broadcast_to(np.asarray(t_near, dtype=np.float64), (R,)) * norms[:, 0]
    t_far = np.broadcast_to(np.asarray(t_far, dtype=np.float64), (R,)) * norms[:, 0]
    if not np.all(np.isfinite(t_far)):
        raise ValueError("oracle needs finite t_far")
    background = np.asarray(background, dtype=np.float64)
    bg = np.broadcast_to(background, (R, 3))

    denom = d0 @ mirror.n
    with np.errstate(divide="ignore", invalid="ignore"):
        t_s = np.where(
            np.abs(denom) > 1e-12, -(origins @ mirror.n + mirror.d) / denom, np.inf
        )
    crossing = (t_near < t_s) & (t_s < t_far)
    t_s = np.where(crossing, t_s, np.inf)

    # leg 1: origin to mirror (or all the way if the ray never crosses)
    a1 = t_near
    b1 = np.where(crossing, t_s, t_far)
    # leg 2: reflected continuation, local parameter from the mirror point
    s_pts = origins + np.where(crossing, t_s, 0.0)[:, None] * d0
    refl = d0 - 2.0 * (d0 @ mirror.n)[:, None] * mirror.n[None, :]
    a2 = np.zeros(R)
    b2 = np.where(crossing, t_far - t_s, 0.0)

    def clip_support(origin, direction, a, b):
        if support is None:
            return a, b
        lo, hi = support
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(np.abs(direction) < 1e-15, np.inf, 1.0 / direction)
        ta = (lo[None, :] - origin) * inv
        tb = (hi[None, :] - origin) * inv
        pair = np.sort(np.stack([ta, tb], axis=0), axis=0)
        # rays parallel to an axis: inside -> unconstrained, outside -> miss
        parallel = np.abs(direction) < 1e-15
        inside = (origin >= lo[None, :]) & (origin <= hi[None, :])
        slab_lo = np.where(parallel, np.where(inside, -np.inf, np.inf), pair[0])
        slab_hi = np.where(parallel, np.where(inside, np.inf, -np.inf), pair[1])
        aa = np.maximum(a, slab_lo.max(axis=1))
        bb = np.minimum(b, slab_hi.min(axis=1))
        bb = np.where(bb > aa, bb, aa)
        return aa, bb

    trans = np.ones(R)
    color = np.zeros((R, 3))
    a1c, b1c = clip_support(origins, d0, a1, b1)
    _march_leg(field, encoder, origins, d0, a1c, b1c, step, trans, color)
    a2c, b2c = clip_support(s_pts, refl, a2, b2)
    _march_leg(field, encoder, s_pts, refl, a2c, b2c, step, trans, color)
    return color + trans[:, None] * bg


def oracle_raymarch(
    field: RadianceField,
    mirror: Plane,
    ray: Ray,
    step: float,
    encoder,
    background,
    support: tuple | None = None,
) -> np.ndarray:
    """Dense fixed-step march of one ray's full physical light path."""
    out = oracle_march_rays(
        field, mirror, ray.origin, ray.dir, ray.t_near, ray.t_far,
        step, encoder, background, support,
    )
    return out[0]


def oracle_raymarch_image(
    field: RadianceField,
    mirror: Plane,
    K: CameraIntrinsics,
    step: float,
    encoder,
    background: np.ndarray,
    support: tuple | None = None,
    t_near: float = 1e-2,
    t_far: float = 20.0,
    chunk: int = 4096,
) -> np.ndarray:
    """Oracle march of every pixel (centers) of a full image."""
    H, W = background.shape[:2]
    us, vs = np.meshgrid(np.arange(W) + 0.5, np.arange(H) + 0.5)
    dirs = np.stack(
        [(us.ravel() - K.o1) / K.f, (vs.ravel() - K.o2) / K.f, np.ones(H * W)], axis=1
    )
    out = np.empty((H * W, 3))
    bg_flat = background.reshape(H * W, 3)
    for s in range(0, H * W, chunk):
        e = min(s + chunk, H * W)
        out[s:e] = oracle_march_rays(
            field, mirror, np.zeros((e - s, 3)), dirs[s:e],
            t_near, t_far, step, encoder, bg_flat[s:e], support,
        )
    return out.reshape(H, W, 3)
