"""Pinhole camera, plane, and mirror-reflection math.

Conventions used throughout the package:

* the real camera sits at the origin and looks along +z, with x pointing
  right and y pointing down (so image v grows downward like pixel rows);
* a plane is the point set ``{p : n . p + d = 0}`` with ``n`` unit length;
  the signed distance of a point is ``n . p + d``, and planes handed to the
  pipeline are oriented so the camera has positive signed distance.

All types are immutable values and every operation is pure, so everything
here is safe to share across worker threads/processes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    NoIntersection,
    NoMirrorIntersection,
    NonPositiveDepth,
    NonUnitNormal,
)

_DEPTH_EPS = 1e-9
_PARALLEL_EPS = 1e-9
_UNIT_TOL = 1e-6


def _as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64).reshape(3)
    return a


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics: focal length (pixels) and principal point."""

    f: float
    o1: float
    o2: float
    width: int
    height: int

    def __post_init__(self):
        if self.f <= 0:
            raise ValueError(f"focal length must be positive, got {self.f}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")

    @property
    def K(self) -> np.ndarray:
        """3x3 projection matrix (square pixels, zero skew)."""
        return np.array(
            [[self.f, 0.0, self.o1], [0.0, self.f, self.o2], [0.0, 0.0, 1.0]]
        )

    def to_dict(self) -> dict:
        return {
            "f": float(self.f),
            "o1": float(self.o1),
            "o2": float(self.o2),
            "width": int(self.width),
            "height": int(self.height),
        }

    @staticmethod
    def from_dict(d: dict) -> "CameraIntrinsics":
        return CameraIntrinsics(d["f"], d["o1"], d["o2"], d["width"], d["height"])


@dataclass(frozen=True)
class Plane:
    """Plane {p : n.p + d = 0} with unit normal ``n`` and offset ``d``."""

    n: np.ndarray
    d: float

    def __post_init__(self):
        n = _as_vec3(self.n)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "d", float(self.d))
        if abs(np.linalg.norm(n) - 1.0) > _UNIT_TOL:
            raise NonUnitNormal(f"plane normal has norm {np.linalg.norm(n):.9f}")

    def signed_distance(self, p) -> float:
        return float(self.n @ _as_vec3(p) + self.d)

    def oriented_toward(self, p) -> "Plane":
        """Same plane, with the normal flipped so ``p`` has positive distance."""
        if self.signed_distance(p) < 0:
            return Plane(-self.n, -self.d)
        return self

    def to_dict(self) -> dict:
        return {"n": [float(x) for x in self.n], "d": float(self.d)}

    @staticmethod
    def from_dict(d: dict) -> "Plane":
        return Plane(np.asarray(d["n"], dtype=np.float64), d["d"])

    @staticmethod
    def from_unnormalized(n, d: float) -> "Plane":
        """Normalize (n, d) jointly so the normal is unit length."""
        n = _as_vec3(n)
        s = np.linalg.norm(n)
        if s < 1e-12:
            raise NonUnitNormal("cannot normalize a zero normal")
        return Plane(n / s, float(d) / s)


@dataclass(frozen=True)
class ReflectionTransform:
    """4x4 homogeneous involution mirroring points across a plane.

    The linear block is ``I - 2 n n^T`` (a Householder reflection, so it is
    orthogonal with determinant -1) and the translation is ``-2 d n``.
    """

    A: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64).reshape(4, 4)
        object.__setattr__(self, "A", A)

    @property
    def linear(self) -> np.ndarray:
        """Top-left 3x3 block."""
        return self.A[:3, :3]

    def apply(self, p) -> np.ndarray:
        """Mirror a 3D point."""
        p = _as_vec3(p)
        return self.A[:3, :3] @ p + self.A[:3, 3]

    def apply_many(self, pts: np.ndarray) -> np.ndarray:
        """Mirror an (N, 3) array of points."""
        pts = np.asarray(pts, dtype=np.float64)
        return pts @ self.A[:3, :3].T + self.A[:3, 3]

    def plane(self) -> Plane:
        """Recover a (sign-ambiguous) plane that generates this transform."""
        M = 0.5 * (np.eye(3) - self.A[:3, :3])  # = n n^T
        col = int(np.argmax(np.diag(M)))
        n = M[:, col]
        norm = np.linalg.norm(n)
        if norm < 1e-12:
            raise NonUnitNormal("transform has no reflection component")
        n = n / norm
        t = self.A[:3, 3]
        d = -0.5 * float(n @ t)
        return Plane(n, d)


@dataclass(frozen=True)
class VirtualCamera:
    """Mirror image of the real camera: improper orientation and center."""

    R_bar: np.ndarray
    c_bar: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R_bar", np.asarray(self.R_bar, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "c_bar", _as_vec3(self.c_bar))


@dataclass(frozen=True)
class Ray:
    """Parametric ray origin + t * dir over t in [t_near, t_far)."""

    origin: np.ndarray
    dir: np.ndarray
    t_near: float = 1e-6
    t_far: float = np.inf

    def __post_init__(self):
        object.__setattr__(self, "origin", _as_vec3(self.origin))
        object.__setattr__(self, "dir", _as_vec3(self.dir))
        object.__setattr__(self, "t_near", float(self.t_near))
        object.__setattr__(self, "t_far", float(self.t_far))
        if not self.t_near < self.t_far:
            raise ValueError("require t_near < t_far")
        if np.linalg.norm(self.dir) == 0.0:
            raise ValueError("ray direction must be nonzero")

    def at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if t.ndim == 0:
            return self.origin + float(t) * self.dir
        return self.origin + t[..., None] * self.dir


# --- operations ---------------------------------------------------------------


def project(K: CameraIntrinsics, p) -> np.ndarray:
    """Perspective-project a 3D point to pixel coordinates.

    Raises NonPositiveDepth if the point is behind or on the camera plane.
    """
    p = _as_vec3(p)
    if p[2] <= _DEPTH_EPS:
        raise NonPositiveDepth(f"point depth {p[2]:.3g} <= {_DEPTH_EPS}")
    return np.array([K.f * p[0] / p[2] + K.o1, K.f * p[1] / p[2] + K.o2])


def project_points(K: CameraIntrinsics, pts: np.ndarray) -> np.ndarray:
    """Vectorized projection of an (..., 3) array; raises on any bad depth."""
    pts = np.asarray(pts, dtype=np.float64)
    z = pts[..., 2]
    if np.any(z <= _DEPTH_EPS):
        raise NonPositiveDepth("some points are behind the camera")
    return np.stack(
        [K.f * pts[..., 0] / z + K.o1, K.f * pts[..., 1] / z + K.o2], axis=-1
    )


def pixel_ray_dir(K: CameraIntrinsics, q) -> np.ndarray:
    """Unnormalized camera-frame ray direction K^-1 (u, v, 1)."""
    q = np.asarray(q, dtype=np.float64).reshape(2)
    return np.array([(q[0] - K.o1) / K.f, (q[1] - K.o2) / K.f, 1.0])


def backproject_to_plane(K: CameraIntrinsics, q, plane: Plane) -> np.ndarray:
    """Intersect the ray through pixel ``q`` with ``plane``.

    The returned point reprojects onto ``q`` and lies on the plane. Raises
    NoIntersection when the ray is parallel to the plane or the hit is at
    non-positive depth.
    """
    direction = pixel_ray_dir(K, q)
    denom = float(plane.n @ direction)
    if abs(denom) <= _PARALLEL_EPS:
        raise NoIntersection("pixel ray is parallel to the plane")
    t = -plane.d / denom
    if t <= _DEPTH_EPS:
        raise NoIntersection(f"plane intersection behind the camera (t={t:.3g})")
    return t * direction


def backproject_many(K: CameraIntrinsics, qs: np.ndarray, plane: Plane) -> np.ndarray:
    """Vectorized backprojection of an (N, 2) pixel array onto a plane."""
    qs = np.asarray(qs, dtype=np.float64)
    dirs = np.stack(
        [(qs[..., 0] - K.o1) / K.f, (qs[..., 1] - K.o2) / K.f, np.ones(qs.shape[:-1])],
        axis=-1,
    )
    denom = dirs @ plane.n
    if np.any(np.abs(denom) <= _PARALLEL_EPS):
        raise NoIntersection("some pixel rays are parallel to the plane")
    t = -plane.d / denom
    if np.any(t <= _DEPTH_EPS):
        raise NoIntersection("some plane intersections are behind the camera")
    return t[..., None] * dirs


def reflection_matrix(plane: Plane) -> ReflectionTransform:
    """Build the 4x4 mirror transform for a plane with unit normal.

    Acts on homogeneous points as ``p - 2 (n.p + d) n``.
    """
    n = plane.n
    if abs(np.linalg.norm(n) - 1.0) > _UNIT_TOL:
        raise NonUnitNormal("reflection requires a unit plane normal")
    A = np.eye(4)
    A[:3, :3] -= 2.0 * np.outer(n, n)
    A[:3, 3] = -2.0 * plane.d * n
    return ReflectionTransform(A)


def virtual_camera(A: ReflectionTransform) -> VirtualCamera:
    """Virtual camera induced by a mirror: R_bar = A_3x3^T, center = A(0).

    The center is defined as the image of the real camera center under the
    reflection, which equals -2 d n for a plane (n, d).
    """
    R_bar = A.linear.T.copy()
    c_bar = A.apply(np.zeros(3))
    return VirtualCamera(R_bar=R_bar, c_bar=c_bar)


def reflect_ray(A: ReflectionTransform, ray: Ray) -> Ray:
    """Reflect a camera ray across the mirror.

    The returned ray starts at the virtual camera center with direction
    ``A_3x3 . dir``; its parameter t matches path length along the physical
    ray (direct leg up to the mirror, reflected leg beyond it), and its
    t_near is the mirror-crossing parameter. Reflecting twice restores the
    original direction.
    """
    plane = A.plane()
    denom = float(plane.n @ ray.dir)
    if abs(denom) <= _PARALLEL_EPS:
        raise NoMirrorIntersection("ray is parallel to the mirror plane")
    t_s = -(plane.n @ ray.origin + plane.d) / denom
    if not (ray.t_near <= t_s < ray.t_far):
        raise NoMirrorIntersection(
            f"mirror crossing t={t_s:.4g} outside [{ray.t_near:.4g}, {ray.t_far:.4g})"
        )
    return Ray(
        origin=A.apply(ray.origin),
        dir=A.linear @ ray.dir,
        t_near=t_s,
        t_far=ray.t_far,
    )


def rotation_about_axis(axis, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation matrix about a (non-zero) axis, right-handed."""
    a = _as_vec3(axis)
    a = a / np.linalg.norm(a)
    K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + np.sin(angle_rad) * K + (1 - np.cos(angle_rad)) * (K @ K)


def rotation_between(v_from, v_to) -> np.ndarray:
    """Minimal rotation taking unit vector v_from onto unit vector v_to."""
    a = _as_vec3(v_from)
    b = _as_vec3(v_to)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    c = float(a @ b)
    if c > 1.0 - 1e-12:
        return np.eye(3)
    if c < -1.0 + 1e-12:
        # pick any axis orthogonal to a
        helper = np.array([1.0, 0.0, 0.0])
        if abs(a[0]) > 0.9:
            helper = np.array([0.0, 1.0, 0.0])
        axis = np.cross(a, helper)
        return rotation_about_axis(axis, np.pi)
    axis = np.cross(a, b)
    angle = np.arccos(np.clip(c, -1.0, 1.0))
    return rotation_about_axis(axis, angle)


def angle_between_deg(u, v) -> float:
    """Angle between two vectors in degrees, sign-insensitive not applied."""
    u = _as_vec3(u)
    v = _as_vec3(v)
    c = float(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))
