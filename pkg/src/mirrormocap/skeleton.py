"""Kinematic body model: 6D rotations, forward kinematics, standing init.

The built-in skeleton is a 17-joint H36M-style tree (pelvis root, spine/
neck/head/head_top column, two arms, two legs); a 19-joint variant appends
left/right heels for detectors that provide them. Reference bone vectors
encode a neutral A-pose (upright torso, straight legs, arms ~30 degrees off
the body) in a canonical frame with up = (0,-1,0) and the person facing -z,
so identity joint rotations reproduce the A-pose. Custom skeletons load
from JSON.

Everything here is pure and operates on immutable values; per-frame FK is
embarrassingly parallel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRotation
from .geometry import Plane, rotation_about_axis, rotation_between

CANONICAL_UP = np.array([0.0, -1.0, 0.0])

IDENTITY_ROT6D = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])


@dataclass(frozen=True)
class SkeletonDef:
    """Kinematic tree with per-bone unit reference directions.

    ``parents[j]`` is the parent joint index (root has -1); ``v_ref[j]`` is
    the unit parent->j bone direction in the reference pose (row 0 is zero
    for the root).
    """

    joint_names: tuple
    parents: np.ndarray
    v_ref: np.ndarray

    def __post_init__(self):
        parents = np.asarray(self.parents, dtype=np.int64)
        v_ref = np.asarray(self.v_ref, dtype=np.float64)
        object.__setattr__(self, "joint_names", tuple(self.joint_names))
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "v_ref", v_ref)
        J = len(self.joint_names)
        if parents.shape != (J,) or v_ref.shape != (J, 3):
            raise ValueError("inconsistent skeleton arrays")
        if parents[0] != -1 or np.any(parents[1:] >= np.arange(1, J)):
            raise ValueError("joints must be topologically ordered with root first")
        norms = np.linalg.norm(v_ref[1:], axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("reference bone vectors must be unit length")

    @property
    def n_joints(self) -> int:
        return len(self.joint_names)

    def index(self, name: str) -> int:
        return self.joint_names.index(name)

    def flip_permutation(self) -> np.ndarray:
        """Left/right joint swap derived from the ``left_``/``right_`` names."""
        perm = np.arange(self.n_joints)
        for i, name in enumerate(self.joint_names):
            if name.startswith("left_"):
                perm[i] = self.index("right_" + name[5:])
            elif name.startswith("right_"):
                perm[i] = self.index("left_" + name[6:])
        return perm

    def chains_to_root(self) -> list:
        out = []
        for j in range(self.n_joints):
            chain = []
            k = j
            while k != -1:
                chain.append(k)
                k = int(self.parents[k])
            out.append(chain[::-1])
        return out

    def to_dict(self) -> dict:
        return {
            "joint_names": list(self.joint_names),
            "parents": [int(p) for p in self.parents],
            "v_ref": [[float(x) for x in row] for row in self.v_ref],
        }

    @staticmethod
    def from_dict(d: dict) -> "SkeletonDef":
        return SkeletonDef(
            joint_names=tuple(d["joint_names"]),
            parents=np.asarray(d["parents"], dtype=np.int64),
            v_ref=np.asarray(d["v_ref"], dtype=np.float64),
        )

    @staticmethod
    def load_json(path) -> "SkeletonDef":
        with open(path) as fh:
            return SkeletonDef.from_dict(json.load(fh))


@dataclass
class PoseParams:
    """Optimizable pose: per-frame 6D joint rotations, shared bone lengths,
    and per-frame pelvis translation.

    ``theta`` is (T, J, 6); ``lengths`` is (J,) indexed by child joint with
    entry 0 unused; ``pelvis`` is (T, 3).
    """

    theta: np.ndarray
    lengths: np.ndarray
    pelvis: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        self.lengths = np.asarray(self.lengths, dtype=np.float64)
        self.pelvis = np.asarray(self.pelvis, dtype=np.float64)
        if self.theta.ndim != 3 or self.theta.shape[2] != 6:
            raise ValueError("theta must be (T, J, 6)")
        if np.any(self.lengths[1:] <= 0):
            raise ValueError("bone lengths must be positive")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta must be finite")

    @property
    def n_frames(self) -> int:
        return self.theta.shape[0]

    def copy(self) -> "PoseParams":
        return PoseParams(self.theta.copy(), self.lengths.copy(), self.pelvis.copy())


@dataclass(frozen=True)
class Pose3D:
    """World joint positions for one frame."""

    joints: np.ndarray
    frame_idx: int = 0

    def __post_init__(self):
        object.__setattr__(self, "joints", np.asarray(self.joints, dtype=np.float64))


# --- rotations ---------------------------------------------------------------


def rot6d_to_matrix(theta6) -> np.ndarray:
    """Gram-Schmidt the two 3-vector columns of a 6D parameter into SO(3)."""
    t = np.asarray(theta6, dtype=np.float64).reshape(6)
    a1, a2 = t[:3], t[3:]
    n1 = np.linalg.norm(a1)
    if n1 <= 1e-9:
        raise DegenerateRotation("first 6D column is (near) zero")
    b1 = a1 / n1
    b2_raw = a2 - (b1 @ a2) * b1
    n2 = np.linalg.norm(b2_raw)
    if n2 <= 1e-9:
        raise DegenerateRotation("6D columns are (near) parallel")
    b2 = b2_raw / n2
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=1)


def rot6d_many(theta: np.ndarray) -> np.ndarray:
    """Vectorized rot6d_to_matrix over (..., 6) arrays."""
    t = np.asarray(theta, dtype=np.float64)
    a1, a2 = t[..., :3], t[..., 3:]
    n1 = np.linalg.norm(a1, axis=-1, keepdims=True)
    if np.any(n1 <= 1e-9):
        raise DegenerateRotation("first 6D column is (near) zero")
    b1 = a1 / n1
    b2_raw = a2 - np.sum(b1 * a2, axis=-1, keepdims=True) * b1
    n2 = np.linalg.norm(b2_raw, axis=-1, keepdims=True)
    if np.any(n2 <= 1e-9):
        raise DegenerateRotation("6D columns are (near) parallel")
    b2 = b2_raw / n2
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


def matrix_to_rot6d(R) -> np.ndarray:
    """First two columns of a rotation matrix, flattened."""
    R = np.asarray(R, dtype=np.float64).reshape(3, 3)
    return np.concatenate([R[:, 0], R[:, 1]])


# --- forward kinematics --------------------------------------------------------


def joint_transforms(skel: SkeletonDef, pose: PoseParams, frame: int):
    """World rotation and translation of every joint for one frame.

    Joint j's transform is the product of per-joint transforms
    ``T_i = [M(theta_i), l_i v_i; 0, 1]`` over the root-to-j chain
    (j included), plus the pelvis translation. Returns (R (J,3,3), t (J,3)).
    """
    J = skel.n_joints
    M = rot6d_many(pose.theta[frame])  # (J, 3, 3)
    R = np.empty((J, 3, 3))
    t = np.empty((J, 3))
    R[0] = M[0]
    t[0] = pose.pelvis[frame]
    for j in range(1, J):
        p = int(skel.parents[j])
        t[j] = R[p] @ (pose.lengths[j] * skel.v_ref[j]) + t[p]
        R[j] = R[p] @ M[j]
    return R, t


def forward_kinematics(skel: SkeletonDef, pose: PoseParams, frame: int) -> Pose3D:
    """Joint world positions for one frame."""
    _, t = joint_transforms(skel, pose, frame)
    return Pose3D(joints=t, frame_idx=frame)


def forward_kinematics_all(skel: SkeletonDef, pose: PoseParams) -> np.ndarray:
    """(T, J, 3) joint positions for every frame."""
    T, J = pose.theta.shape[:2]
    M = rot6d_many(pose.theta)  # (T, J, 3, 3)
    R = np.empty((T, J, 3, 3))
    t = np.empty((T, J, 3))
    R[:, 0] = M[:, 0]
    t[:, 0] = pose.pelvis
    for j in range(1, J):
        p = int(skel.parents[j])
        bone = pose.lengths[j] * skel.v_ref[j]
        t[:, j] = np.einsum("tab,b->ta", R[:, p], bone) + t[:, p]
        R[:, j] = R[:, p] @ M[:, j]
    return t


# --- built-in skeletons ---------------------------------------------------------

_H36M17 = [
    # name, parent, v_ref, template length (person_height 1.7)
    ("pelvis", -1, (0.0, 0.0, 0.0), 0.0),
    ("spine", 0, (0.0, -1.0, 0.0), 0.24),
    ("neck", 1, (0.0, -1.0, 0.0), 0.26),
    ("head", 2, (0.0, -1.0, 0.0), 0.14),
    ("head_top", 3, (0.0, -1.0, 0.0), 0.20),
    ("left_shoulder", 2, (1.0, 0.0, 0.0), 0.19),
    ("left_elbow", 5, (0.5, 0.8660254037844386, 0.0), 0.28),
    ("left_wrist", 6, (0.5, 0.8660254037844386, 0.0), 0.26),
    ("right_shoulder", 2, (-1.0, 0.0, 0.0), 0.19),
    ("right_elbow", 8, (-0.5, 0.8660254037844386, 0.0), 0.28),
    ("right_wrist", 9, (-0.5, 0.8660254037844386, 0.0), 0.26),
    ("left_hip", 0, (1.0, 0.0, 0.0), 0.11),
    ("left_knee", 11, (0.0, 1.0, 0.0), 0.45),
    ("left_ankle", 12, (0.0, 1.0, 0.0), 0.41),
    ("right_hip", 0, (-1.0, 0.0, 0.0), 0.11),
    ("right_knee", 14, (0.0, 1.0, 0.0), 0.45),
    ("right_ankle", 15, (0.0, 1.0, 0.0), 0.41),
]

_HEELS = [
    ("left_heel", 13, (0.0, 0.6, 0.8), 0.08),
    ("right_heel", 16, (0.0, 0.6, 0.8), 0.08),
]


def _build(rows):
    names = tuple(r[0] for r in rows)
    parents = np.array([r[1] for r in rows], dtype=np.int64)
    v_ref = np.array([r[2] for r in rows], dtype=np.float64)
    lengths = np.array([r[3] for r in rows], dtype=np.float64)
    return SkeletonDef(names, parents, v_ref), lengths


def default_skeleton(with_heels: bool = False):
    """Built-in skeleton plus its A-pose template bone lengths.

    Template lengths are scaled for a 1.70 ankle-to-head_top height; scale
    them with :func:`template_lengths` for other person heights.
    """
    rows = _H36M17 + (_HEELS if with_heels else [])
    return _build(rows)


def template_lengths(skel: SkeletonDef, person_height: float = 1.7) -> np.ndarray:
    """A-pose template lengths rescaled so ankle-to-head_top = person_height."""
    base_skel, base_len = default_skeleton(with_heels=skel.n_joints > 17)
    if skel.joint_names != base_skel.joint_names:
        raise ValueError("template lengths only defined for built-in skeletons")
    return base_len * (person_height / 1.7)


def standing_height(skel: SkeletonDef, lengths: np.ndarray) -> float:
    """Ankle-to-head_top distance of the upright template pose."""
    names = skel.joint_names
    leg = lengths[names.index("left_knee")] + lengths[names.index("left_ankle")]
    torso = (
        lengths[names.index("spine")]
        + lengths[names.index("neck")]
        + lengths[names.index("head")]
        + lengths[names.index("head_top")]
    )
    return float(leg + torso)


def leg_length(skel: SkeletonDef, lengths: np.ndarray) -> float:
    names = skel.joint_names
    return float(lengths[names.index("left_knee")] + lengths[names.index("left_ankle")])


# --- standing-pose initialization ------------------------------------------------


def upright_root_rot6d(up, yaw_rad: float) -> np.ndarray:
    """Root rotation aligning the canonical up axis with ``up``, then yawed.

    The yaw is applied about the world up axis, so yaw 0 keeps the canonical
    facing and positive angles turn the person right-handedly around ``up``.
    """
    up = np.asarray(up, dtype=np.float64)
    up = up / np.linalg.norm(up)
    align = rotation_between(CANONICAL_UP, up)
    return matrix_to_rot6d(rotation_about_axis(up, yaw_rad) @ align)


def standing_pose_candidates(
    skel: SkeletonDef,
    ankle_pos,
    ground: Plane,
    lengths: np.ndarray | None = None,
    n_candidates: int = 8,
) -> list:
    """Single-frame standing poses at ``ankle_pos``, yawed in 45-degree steps.

    Feet rest at ``ankle_pos`` on the ground (the pelvis sits one leg length
    above it along the upward ground direction); candidate k is the neutral
    A-pose rotated by k * (360/n) degrees about the ground normal. Bone
    lengths default to the built-in template.
    """
    if lengths is None:
        lengths = template_lengths(skel)
    ankle_pos = np.asarray(ankle_pos, dtype=np.float64)
    up = ground.n if ground.d >= 0 else -ground.n  # camera side is up
    pelvis = ankle_pos + leg_length(skel, lengths) * up
    out = []
    for k in range(n_candidates):
        yaw = 2.0 * np.pi * k / n_candidates
        theta = np.tile(IDENTITY_ROT6D, (1, skel.n_joints, 1))
        theta[0, 0] = upright_root_rot6d(up, yaw)
        out.append(PoseParams(theta=theta, lengths=lengths.copy(), pelvis=pelvis[None, :]))
    return out
