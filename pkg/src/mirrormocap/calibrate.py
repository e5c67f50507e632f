"""Step 1: focal length, ground plane, person association, mirror plane.

Everything works from 2D detections alone. Focal/ground estimation uses
the classic pedestrian-calibration idea: assume every upright person has
the same height, backproject each ankle pixel onto a candidate ground
plane, erect a vertical segment of that height, and compare the projected
head with the detected one. Both the real person and the mirror person
count as pedestrians since they stand on the same ground plane.

The global scale is unobservable from a single camera, so the assumed
person height only fixes the unit of the reconstruction; focal length and
the ground normal are unaffected by it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    AmbiguousAssociation,
    AnklesCoincide,
    DegenerateGeometry,
    DegenerateMotion,
    NoConvergence,
    NoValidFrames,
    WrongPersonCount,
)
from .geometry import CameraIntrinsics, Plane, backproject_to_plane


@dataclass
class Detection2D:
    """One person's 2D keypoints in one frame, in internal joint order."""

    joints: np.ndarray  # (J, 2) pixels
    conf: np.ndarray  # (J,) in [0, 1]
    person_idx: int = 0
    frame_idx: int = 0

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=np.float64)
        self.conf = np.clip(np.asarray(self.conf, dtype=np.float64), 0.0, 1.0)
        if self.joints.shape != (self.conf.shape[0], 2):
            raise ValueError("joints/conf shape mismatch")

    def flipped(self, perm: np.ndarray) -> "Detection2D":
        """Apply a left/right joint permutation (used on mirror detections)."""
        return Detection2D(
            joints=self.joints[perm],
            conf=self.conf[perm],
            person_idx=self.person_idx,
            frame_idx=self.frame_idx,
        )


@dataclass(frozen=True)
class FrameAssociation:
    """Which detection is the real person, plus the left/right flip map."""

    real_idx: int
    mirror_idx: int
    flip: np.ndarray

    def __post_init__(self):
        if self.real_idx == self.mirror_idx:
            raise ValueError("real and mirror indices must differ")
        flip = np.asarray(self.flip, dtype=np.int64)
        object.__setattr__(self, "flip", flip)
        if not np.array_equal(flip[flip], np.arange(len(flip))):
            raise ValueError("flip must be an involution permutation")


@dataclass
class CalibrationResult:
    K: CameraIntrinsics
    ground: Plane
    mirror: Plane
    camera_height: float
    per_frame_valid: np.ndarray
    residual_rms: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "f": float(self.K.f),
            "o1": float(self.K.o1),
            "o2": float(self.K.o2),
            "width": int(self.K.width),
            "height": int(self.K.height),
            "ground": self.ground.to_dict(),
            "mirror": self.mirror.to_dict(),
            "camera_height": float(self.camera_height),
            "per_frame_valid": [bool(v) for v in self.per_frame_valid],
            "residual_rms": float(self.residual_rms),
        }

    @staticmethod
    def from_dict(d: dict) -> "CalibrationResult":
        K = CameraIntrinsics(d["f"], d["o1"], d["o2"], d["width"], d["height"])
        return CalibrationResult(
            K=K,
            ground=Plane.from_dict(d["ground"]),
            mirror=Plane.from_dict(d["mirror"]),
            camera_height=d["camera_height"],
            per_frame_valid=np.asarray(d["per_frame_valid"], dtype=bool),
            residual_rms=d.get("residual_rms", float("nan")),
        )


@dataclass
class CalibrateConfig:
    """Tunables for step 1; all defaults are deliberate and test-covered."""

    person_height: float = 1.7
    conf_threshold: float = 0.3  # joint usable / frame valid cutoff
    ambiguity_threshold: float = 0.02  # relative neck-pelvis size difference
    focal_grid: tuple = tuple(0.5 + 0.25 * i for i in range(11))  # x image width
    min_upright_frames: int = 30
    degenerate_cluster_px: float = 5.0
    residual_threshold_px: float = 20.0  # NoConvergence above this RMS
    min_mirror_angle_deg: float = 5.0  # view-axis-to-mirror-plane bounds
    max_mirror_angle_deg: float = 85.0


# --- association ---------------------------------------------------------------


def _weighted_point(det: Detection2D, idx_a: int, idx_b: int, conf_min: float):
    """Confidence-weighted midpoint of two joints; single-joint fallback."""
    ca, cb = det.conf[idx_a], det.conf[idx_b]
    if ca >= conf_min and cb >= conf_min:
        w = ca + cb
        return (ca * det.joints[idx_a] + cb * det.joints[idx_b]) / w
    if ca >= conf_min:
        return det.joints[idx_a].copy()
    if cb >= conf_min:
        return det.joints[idx_b].copy()
    return None


def ankle_point(det: Detection2D, names, conf_min: float = 0.3):
    """Confidence-weighted ankle midpoint in pixels (None if both missing)."""
    return _weighted_point(
        det, names.index("left_ankle"), names.index("right_ankle"), conf_min
    )


def head_point(det: Detection2D, names, conf_min: float = 0.3):
    """Topmost confident head-ish pixel: head_top, then head, then neck.

    The assumed person height is the ankle-to-this-keypoint distance, so
    callers should configure it to match whichever joint their detector
    provides.
    """
    for name in ("head_top", "head", "neck"):
        if name in names and det.conf[names.index(name)] >= conf_min:
            return det.joints[names.index(name)].copy()
    return None


def associate_real_mirror(
    frame: list,
    flip: np.ndarray,
    config: CalibrateConfig | None = None,
    joint_names: tuple | None = None,
) -> FrameAssociation:
    """Pick the real person as the one with the larger neck-pelvis distance.

    The person seen through the mirror is farther from the camera and hence
    smaller under perspective. Raises WrongPersonCount for anything but two
    detections and AmbiguousAssociation when the sizes are within the
    relative threshold (or the deciding joints are too low-confidence).
    """
    config = config or CalibrateConfig()
    if joint_names is None:
        from .skeleton import default_skeleton

        joint_names = default_skeleton()[0].joint_names
    if len(frame) != 2:
        raise WrongPersonCount(f"expected 2 detections, got {len(frame)}")
    i_neck = joint_names.index("neck")
    i_pelvis = joint_names.index("pelvis")
    sizes = []
    for det in frame:
        if det.conf[i_neck] < config.conf_threshold or det.conf[i_pelvis] < config.conf_threshold:
            raise AmbiguousAssociation("neck/pelvis confidence too low to associate")
        sizes.append(float(np.linalg.norm(det.joints[i_neck] - det.joints[i_pelvis])))
    larger = max(sizes)
    if larger <= 0 or abs(sizes[0] - sizes[1]) / larger < config.ambiguity_threshold:
        raise AmbiguousAssociation(
            f"neck-pelvis sizes {sizes[0]:.2f} vs {sizes[1]:.2f} px too similar"
        )
    real = int(np.argmax(sizes))
    return FrameAssociation(real_idx=real, mirror_idx=1 - real, flip=flip)


def associated_pair(frame: list, assoc: FrameAssociation):
    """(real detection, mirror detection with the left/right flip applied)."""
    return frame[assoc.real_idx], frame[assoc.mirror_idx].flipped(assoc.flip)


# --- focal length and ground plane -----------------------------------------------


def _pedestrian_residuals(params, f, ankles, heads, height, K_proto):
    """Stacked head-reprojection residuals for one (f, n_g, d) hypothesis."""
    u, v, log_d = params
    n = np.array([u, -1.0, v])
    n = n / np.linalg.norm(n)
    d = np.exp(np.clip(log_d, -10.0, 10.0))
    f = float(np.clip(f, 1.0, 1e7))
    o1, o2 = K_proto.o1, K_proto.o2
    dirs = np.stack(
        [(ankles[:, 0] - o1) / f, (ankles[:, 1] - o2) / f, np.ones(len(ankles))],
        axis=-1,
    )
    denom = dirs @ n
    denom = np.where(np.abs(denom) < 1e-9, np.sign(denom + 1e-30) * 1e-9, denom)
    t = -d / denom
    # smooth positive floor: keeps gradient signal when a candidate plane
    # puts intersections behind the camera instead of flat-lining there
    floor = 0.3
    t = np.where(t < floor, floor * np.exp(np.clip((t - floor) / floor, -50.0, 0.0)), t)
    feet = t[:, None] * dirs
    tops = feet + height * n  # n points up toward the camera side
    z = np.maximum(tops[:, 2], 1e-3)
    proj = np.stack([f * tops[:, 0] / z + o1, f * tops[:, 1] / z + o2], axis=-1)
    return (proj - heads).ravel()


def estimate_focal_ground(
    head_pixels: np.ndarray,
    ankle_pixels: np.ndarray,
    image_size: tuple,
    person_height: float = 1.7,
    config: CalibrateConfig | None = None,
):
    """Recover focal length and ground plane from upright pedestrians.

    ``head_pixels``/``ankle_pixels`` are (N, 2) arrays of matched
    observations (several per frame are fine: real and mirror persons both
    count). Minimizes the head-reprojection residual over a coarse focal
    grid followed by joint nonlinear refinement.

    Returns (K, ground plane oriented with the camera on the positive side,
    residual RMS in pixels).
    """
    config = config or CalibrateConfig()
    heads = np.asarray(head_pixels, dtype=np.float64)
    ankles = np.asarray(ankle_pixels, dtype=np.float64)
    if heads.shape != ankles.shape or heads.ndim != 2:
        raise ValueError("head/ankle arrays must both be (N, 2)")
    width, height_px = image_size

    upright = heads[:, 1] < ankles[:, 1]  # head above ankle in image
    heads, ankles = heads[upright], ankles[upright]
    if len(heads) < config.min_upright_frames:
        raise NoValidFrames(
            f"only {len(heads)} upright observations, need {config.min_upright_frames}"
        )
    spread = np.linalg.norm(ankles - ankles.mean(axis=0), axis=1)
    if float(spread.max()) < config.degenerate_cluster_px:
        raise DegenerateMotion("ankle pixels cluster within 5 px; no depth variation")

    K_proto = CameraIntrinsics(1.0, width / 2.0, height_px / 2.0, width, height_px)
    plane_lo = [-2.0, -2.0, -4.0]
    plane_hi = [2.0, 2.0, 6.0]
    # multi-start over camera tilt: the head-residual landscape has flat
    # wrong-tilt basins a single start can fall into
    starts = [
        np.array([0.0, v0, np.log(person_height)]) for v0 in (-0.4, 0.0, 0.4)
    ]

    def refine(f, x_init):
        res = least_squares(
            _pedestrian_residuals,
            x_init,
            args=(f, ankles, heads, person_height, K_proto),
            method="trf",
            bounds=(plane_lo, plane_hi),
            max_nfev=400,
        )
        return res.x, float(res.cost)

    best = None
    for scale in config.focal_grid:
        f = scale * width
        for x0 in starts:
            x, cost = refine(f, x0)
            if best is None or cost < best[2]:
                best = (f, x, cost)

    # joint refinement of focal length together with the plane parameters;
    # the focal stays bounded to a sane multiple of the image width so a
    # badly modeled input cannot drive it toward a near-orthographic optimum
    f0, x_best, _ = best
    log_f_lo = np.log(0.3 * width)
    log_f_hi = np.log(4.0 * width)

    def joint_residuals(params):
        return _pedestrian_residuals(
            params[1:], np.exp(params[0]), ankles, heads, person_height, K_proto
        )

    res = least_squares(
        joint_residuals,
        np.clip(np.concatenate([[np.log(f0)], x_best]),
                [log_f_lo] + plane_lo, [log_f_hi] + plane_hi),
        method="trf",
        bounds=([log_f_lo] + plane_lo, [log_f_hi] + plane_hi),
        max_nfev=800,
    )
    x = res.x
    f = float(np.exp(x[0]))
    u, v, log_d = x[1:]
    n = np.array([u, -1.0, v])
    n = n / np.linalg.norm(n)
    d = float(np.exp(log_d))
    rms = float(np.sqrt(np.mean(np.sum(res.fun.reshape(-1, 2) ** 2, axis=1))))
    if rms > config.residual_threshold_px:
        raise NoConvergence(
            f"pedestrian residual RMS {rms:.1f} px exceeds {config.residual_threshold_px} px"
        )
    K = CameraIntrinsics(f, width / 2.0, height_px / 2.0, width, height_px)
    ground = Plane(n, d).oriented_toward(np.zeros(3))
    return K, ground, rms


# --- mirror plane initialization ---------------------------------------------------


def mirror_from_ground_points(p_real: np.ndarray, p_mirror: np.ndarray, ground: Plane):
    """Per-frame mirror normal and midpoint from paired ground points.

    The normal is the real-to-mirror ankle direction projected into the
    ground plane (enforcing mirror-ground orthogonality) and the mirror
    passes through the midpoint of the pair.
    """
    diff = np.asarray(p_real) - np.asarray(p_mirror)
    if np.linalg.norm(diff) < 1e-6:
        raise AnklesCoincide("ankle points coincide; person touching the mirror")
    n = diff - (diff @ ground.n) * ground.n
    norm = np.linalg.norm(n)
    if norm < 1e-9:
        raise AnklesCoincide("ankle displacement is vertical; mirror direction undefined")
    n = n / norm
    midpoint = 0.5 * (np.asarray(p_real) + np.asarray(p_mirror))
    return n, midpoint


def init_mirror(
    K: CameraIntrinsics,
    ground: Plane,
    frames: list,
    config: CalibrateConfig | None = None,
    joint_names: tuple | None = None,
) -> Plane:
    """Initialize the mirror plane from associated per-frame detections.

    ``frames`` is a list of (real Detection2D, mirror Detection2D) pairs
    with the mirror joints already un-flipped. Both ankle midpoints are
    backprojected to the ground plane per frame; the averaged real-to-mirror
    direction (projected into the ground plane, then renormalized) gives
    the normal and the averaged midpoint fixes the offset. The returned
    plane is oriented with the camera on its positive side.
    """
    config = config or CalibrateConfig()
    if joint_names is None:
        from .skeleton import default_skeleton

        joint_names = default_skeleton()[0].joint_names
    normals, midpoints = [], []
    for real_det, mirror_det in frames:
        a_real = ankle_point(real_det, joint_names, config.conf_threshold)
        a_mirror = ankle_point(mirror_det, joint_names, config.conf_threshold)
        if a_real is None or a_mirror is None:
            continue
        try:
            p = backproject_to_plane(K, a_real, ground)
            p_bar = backproject_to_plane(K, a_mirror, ground)
            n, m = mirror_from_ground_points(p, p_bar, ground)
        except AnklesCoincide:
            raise
        except Exception:
            continue
        normals.append(n)
        midpoints.append(m)
    if not normals:
        raise NoValidFrames("no frame produced a usable ankle pair")
    n = np.mean(normals, axis=0)
    n = n - (n @ ground.n) * ground.n
    norm = np.linalg.norm(n)
    if norm < 1e-9:
        raise NoValidFrames("averaged mirror direction degenerate")
    n = n / norm
    m = np.mean(midpoints, axis=0)
    plane = Plane(n, -float(n @ m)).oriented_toward(np.zeros(3))

    # view axis is +z; reject mirrors seen too edge-on or too head-on
    incidence = float(np.degrees(np.arcsin(np.clip(abs(plane.n[2]), 0.0, 1.0))))
    if not (config.min_mirror_angle_deg <= incidence <= config.max_mirror_angle_deg):
        raise DegenerateGeometry(
            f"view-to-mirror incidence {incidence:.1f} deg outside "
            f"[{config.min_mirror_angle_deg}, {config.max_mirror_angle_deg}]"
        )
    return plane
