"""Rendering geometry: rays, bounded sampling, bone-relative encoding,
occlusion boxes, per-layer volume rendering, and layered composition.

Three render modes are provided:

* ``layered``    -- real and mirror contributions rendered as separate
  (color, alpha) layers and blended back-to-front over the background;
  pixels inside both person boxes are processed along the direct and the
  reflected path, which resolves real-over-mirror occlusion.
* ``no-occlusion`` -- independent real/mirror renders pasted by their
  masks; correct only while the two regions do not overlap.
* ``no-layering``  -- one 128-sample quadrature per pixel (64 samples up
  to the mirror, 64 beyond it along the reflected path) over the union
  region.

Radiance fields evaluate (color, density) from per-joint bone-relative
sample encodings, the same inputs an articulated neural field would see;
the analytic implementations here make exact oracles possible. Fields are
read-only and safe to share across workers; rendering parallelizes over
pixels with disjoint output ownership.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DimensionMismatch, NoBoxIntersection, OutOfBounds
from .geometry import CameraIntrinsics, Plane, Ray, reflection_matrix
from .skeleton import PoseParams, SkeletonDef, joint_transforms

N_SAMPLES = 64  # samples per ray per layer


# --- pose context ---------------------------------------------------------------


class PoseFrame:
    """FK transforms of one frame, cached for encoding and box queries."""

    def __init__(self, skel: SkeletonDef, pose: PoseParams, frame: int = 0):
        self.skel = skel
        self.pose = pose
        self.frame = frame
        self.R, self.t = joint_transforms(skel, pose, frame)
        self.joints = self.t

    def encode(self, points: np.ndarray) -> np.ndarray:
        """Map (N, 3) world points into every joint's local frame -> (N, J, 3)."""
        points = np.asarray(points, dtype=np.float64)
        diff = points[:, None, :] - self.t[None, :, :]
        return np.einsum("jab,nja->njb", self.R, diff)

    def bbox(self, pad: float) -> tuple:
        lo = self.joints.min(axis=0) - pad
        hi = self.joints.max(axis=0) + pad
        return lo, hi


def bone_relative_encode(
    samples: np.ndarray, skel: SkeletonDef, pose: PoseParams, frame: int = 0
) -> np.ndarray:
    """Per-joint local coordinates of world samples (inverse FK transforms)."""
    return PoseFrame(skel, pose, frame).encode(np.asarray(samples, dtype=np.float64))


# --- radiance fields --------------------------------------------------------------


class RadianceField:
    """Evaluator from bone-relative encodings to (color, density).

    ``evaluate`` takes an (N, J, 3) encoding array and returns an (N, 3)
    color array in [0, 1] and an (N,) density array >= 0.
    """

    def evaluate(self, encodings: np.ndarray):
        raise NotImplementedError

    def support_radius(self) -> float:
        """Conservative world-space padding beyond the joints that can have
        nonzero density; None means unbounded."""
        return None


class ConstantField(RadianceField):
    """Uniform color and density everywhere (useful for slab tests)."""

    def __init__(self, color=(1.0, 1.0, 1.0), sigma: float = 1.0):
        self.color = np.asarray(color, dtype=np.float64)
        self.sigma = float(sigma)

    def evaluate(self, encodings):
        n = encodings.shape[0]
        return np.tile(self.color, (n, 1)), np.full(n, max(self.sigma, 0.0))


class SphereField(RadianceField):
    """Solid sphere attached to one joint, given in that joint's local frame."""

    def __init__(self, joint: int, center_local, radius: float, color, sigma: float):
        self.joint = int(joint)
        self.center = np.asarray(center_local, dtype=np.float64)
        self.radius = float(radius)
        self.color = np.asarray(color, dtype=np.float64)
        self.sigma = float(sigma)

    def evaluate(self, encodings):
        local = encodings[:, self.joint, :]
        inside = np.linalg.norm(local - self.center, axis=1) < self.radius
        rgb = np.where(inside[:, None], self.color, 0.0)
        return rgb, np.where(inside, max(self.sigma, 0.0), 0.0)

    def support_radius(self):
        return float(np.linalg.norm(self.center) + self.radius)


class BoxField(RadianceField):
    """Solid axis-aligned box in one joint's local frame."""

    def __init__(self, joint: int, lo, hi, color, sigma: float):
        self.joint = int(joint)
        self.lo = np.asarray(lo, dtype=np.float64)
        self.hi = np.asarray(hi, dtype=np.float64)
        self.color = np.asarray(color, dtype=np.float64)
        self.sigma = float(sigma)

    def evaluate(self, encodings):
        local = encodings[:, self.joint, :]
        inside = np.all((local >= self.lo) & (local <= self.hi), axis=1)
        rgb = np.where(inside[:, None], self.color, 0.0)
        return rgb, np.where(inside, max(self.sigma, 0.0), 0.0)

    def support_radius(self):
        return float(max(np.linalg.norm(self.lo), np.linalg.norm(self.hi)))


class AnalyticBodyField(RadianceField):
    """Solid capsule per bone, evaluated in bone-relative coordinates.

    Bone j's capsule is the segment from its parent joint to
    ``lengths[j] * v_ref[j]`` in the parent's local frame, so the body
    deforms rigidly with the pose exactly like an articulated neural field
    conditioned on the same encodings would.
    """

    def __init__(self, skel: SkeletonDef, lengths, radii, colors, sigma: float = 200.0):
        self.skel = skel
        self.lengths = np.asarray(lengths, dtype=np.float64)
        J = skel.n_joints
        radii = np.asarray(radii, dtype=np.float64)
        if radii.ndim == 0:
            radii = np.full(J, float(radii))
        self.radii = radii
        colors = np.asarray(colors, dtype=np.float64)
        if colors.shape == (3,):
            colors = np.tile(colors, (J, 1))
        self.colors = colors
        self.sigma = float(sigma)
        self.bones = [j for j in range(1, J)]

    def evaluate(self, encodings):
        n = encodings.shape[0]
        best = np.full(n, np.inf)  # signed distance to nearest capsule surface
        idx = np.zeros(n, dtype=np.int64)
        for j in self.bones:
            p = int(self.skel.parents[j])
            local = encodings[:, p, :]
            seg = self.lengths[j] * self.skel.v_ref[j]
            seg_len2 = float(seg @ seg)
            if seg_len2 <= 0:
                continue
            s = np.clip((local @ seg) / seg_len2, 0.0, 1.0)
            closest = s[:, None] * seg
            dist = np.linalg.norm(local - closest, axis=1)
            signed = dist - self.radii[j]
            better = signed < best
            best = np.where(better, signed, best)
            idx = np.where(better, j, idx)
        inside = best < 0.0
        rgb = np.where(inside[:, None], self.colors[idx], 0.0)
        sigma = np.where(inside, self.sigma, 0.0)
        return rgb, sigma

    def support_radius(self):
        return float(self.radii.max())

    @staticmethod
    def default_palette(skel: SkeletonDef) -> np.ndarray:
        """Deterministic distinct per-bone colors in [0.15, 0.95]."""
        J = skel.n_joints
        rng = np.random.default_rng(12345)
        return 0.15 + 0.8 * rng.random((J, 3))


# --- rays and sampling -------------------------------------------------------------


@dataclass
class SampleBatch:
    """Ordered samples along one ray: world positions and physical spacing."""

    positions: np.ndarray  # (n, 3)
    deltas: np.ndarray  # (n,) scene units
    ray_id: int = 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.deltas = np.asarray(self.deltas, dtype=np.float64)


def generate_rays(
    K: CameraIntrinsics, pixels, t_near: float = 1e-3, t_far: float = np.inf
) -> list:
    """Rays through the given (u, v) pixel coordinates.

    Directions are un-normalized ``K^-1 (u, v, 1)``; pixels must lie inside
    the image rectangle.
    """
    out = []
    for u, v in pixels:
        if not (0.0 <= u <= K.width and 0.0 <= v <= K.height):
            raise OutOfBounds(f"pixel ({u}, {v}) outside {K.width}x{K.height}")
        d = np.array([(u - K.o1) / K.f, (v - K.o2) / K.f, 1.0])
        out.append(Ray(origin=np.zeros(3), dir=d, t_near=t_near, t_far=t_far))
    return out


def ray_box_span(origin, direction, lo, hi, t_min, t_max):
    """Slab-method ray/AABB intersection clipped to [t_min, t_max] or None."""
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    t0, t1 = t_min, t_max
    for a in range(3):
        if abs(direction[a]) < 1e-15:
            if origin[a] < lo[a] or origin[a] > hi[a]:
                return None
            continue
        ta = (lo[a] - origin[a]) / direction[a]
        tb = (hi[a] - origin[a]) / direction[a]
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
    if t0 >= t1:
        return None
    return t0, t1


def sample_segment(
    ray: Ray,
    bbox: tuple,
    n_samples: int = N_SAMPLES,
    rng: np.random.Generator | None = None,
) -> SampleBatch:
    """Stratified samples along the ray inside an axis-aligned box.

    One sample per equal t-bin between the entry and exit parameters
    (jittered inside the bin when ``rng`` is given, bin midpoint otherwise);
    deltas are the physical bin widths. Raises NoBoxIntersection on a miss.
    """
    lo, hi = bbox
    span = ray_box_span(ray.origin, ray.dir, lo, hi, ray.t_near, ray.t_far)
    if span is None:
        raise NoBoxIntersection("ray misses the sampling box")
    t0, t1 = span
    ts, deltas = _stratified(t0, t1, n_samples, np.linalg.norm(ray.dir), rng)
    return SampleBatch(positions=ray.at(ts), deltas=deltas)


def _stratified(t0, t1, n, dir_norm, rng):
    edges = np.linspace(t0, t1, n + 1)
    if rng is None:
        ts = 0.5 * (edges[:-1] + edges[1:])
    else:
        u = rng.random(n)
        ts = edges[:-1] + u * (edges[1:] - edges[:-1])
    deltas = np.full(n, (t1 - t0) / n * dir_norm)
    return ts, deltas


def render_layer(field: RadianceField, batch: SampleBatch, encodings: np.ndarray):
    """Standard transmittance quadrature along one ray.

    Returns (premultiplied color Sum w_k gamma_k, alpha Sum w_k).
    """
    rgb, sigma = field.evaluate(encodings)
    sigma = np.maximum(sigma, 0.0)
    od = sigma * batch.deltas
    trans = np.exp(-np.concatenate([[0.0], np.cumsum(od[:-1])]))
    w = trans * (1.0 - np.exp(-od))
    return w @ rgb, float(w.sum())


def _render_rays(field, encoder, positions, deltas, chunk: int = 2048):
    """Vectorized quadrature: positions (R, N, 3), deltas (R, N) ->
    premultiplied colors (R, 3) and alphas (R,). Chunked over rays to keep
    the (rays * samples, joints, 3) encoding buffers small."""
    R, N, _ = positions.shape
    colors = np.empty((R, 3))
    alphas = np.empty(R)
    for s in range(0, R, chunk):
        e = min(s + chunk, R)
        flat = positions[s:e].reshape((e - s) * N, 3)
        rgb, sigma = field.evaluate(encoder(flat))
        rgb = rgb.reshape(e - s, N, 3)
        sigma = np.maximum(sigma.reshape(e - s, N), 0.0)
        od = sigma * deltas[s:e]
        csum = np.cumsum(od, axis=1)
        trans = np.exp(-(csum - od))
        w = trans * (1.0 - np.exp(-od))
        colors[s:e] = np.einsum("rn,rnc->rc", w, rgb)
        alphas[s:e] = w.sum(axis=1)
    return colors, alphas


# --- boxes and occlusion -------------------------------------------------------------


@dataclass(frozen=True)
class Box2D:
    """Float pixel rectangle [x0, x1] x [y0, y1]."""

    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def area(self) -> float:
        return max(self.x1 - self.x0, 0.0) * max(self.y1 - self.y0, 0.0)

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.x1 - self.x0, self.y1 - self.y0))

    def padded(self, amount: float) -> "Box2D":
        return Box2D(self.x0 - amount, self.y0 - amount, self.x1 + amount, self.y1 + amount)

    def contains_mask(self, width: int, height: int) -> np.ndarray:
        """Boolean (H, W) mask of pixels whose centers fall in the box."""
        u = np.arange(width) + 0.5
        v = np.arange(height) + 0.5
        inside_u = (u >= self.x0) & (u < self.x1)
        inside_v = (v >= self.y0) & (v < self.y1)
        return inside_v[:, None] & inside_u[None, :]

    @staticmethod
    def from_points(pts: np.ndarray) -> "Box2D":
        pts = np.asarray(pts, dtype=np.float64)
        return Box2D(*pts.min(axis=0), *pts.max(axis=0))


def intersect_boxes(a: Box2D, b: Box2D) -> Box2D:
    return Box2D(max(a.x0, b.x0), max(a.y0, b.y0), min(a.x1, b.x1), min(a.y1, b.y1))


def box_iou(a: Box2D, b: Box2D) -> float:
    inter = intersect_boxes(a, b).area
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


@dataclass(frozen=True)
class OcclusionBoxes:
    """Padded projected-joint boxes of both persons plus their overlap."""

    N: Box2D
    N_bar: Box2D
    inter: Box2D
    iou: float
    is_occlusion_frame: bool


def occlusion_boxes(
    K: CameraIntrinsics,
    joints_real_px: np.ndarray,
    joints_mirror_px: np.ndarray,
    pad_frac: float = 0.10,
    iou_threshold: float = 0.1,
) -> OcclusionBoxes:
    """Boxes from projected joints, each side padded by pad_frac/2 of the
    box diagonal; the frame is an occlusion frame iff IOU exceeds threshold."""
    del K  # boxes live purely in pixel space
    box_r = Box2D.from_points(joints_real_px)
    box_m = Box2D.from_points(joints_mirror_px)
    box_r = box_r.padded(0.5 * pad_frac * box_r.diagonal)
    box_m = box_m.padded(0.5 * pad_frac * box_m.diagonal)
    iou = box_iou(box_r, box_m)
    return OcclusionBoxes(
        N=box_r,
        N_bar=box_m,
        inter=intersect_boxes(box_r, box_m),
        iou=iou,
        is_occlusion_frame=iou > iou_threshold,
    )


def should_enable_occlusion(
    ious, iou_threshold: float = 0.1, frame_fraction: float = 0.05
) -> bool:
    """Enable occlusion processing iff more than ``frame_fraction`` of the
    frames exceed the IOU threshold."""
    ious = np.asarray(ious, dtype=np.float64)
    if ious.size == 0:
        return False
    return float(np.mean(ious > iou_threshold)) > frame_fraction


# --- layers and composition ------------------------------------------------------------


@dataclass
class LayerImage:
    """Un-premultiplied color layer and alpha map; (0, 0) off the shot rays."""

    L: np.ndarray  # (H, W, 3)
    alpha: np.ndarray  # (H, W)

    def __post_init__(self):
        self.L = np.asarray(self.L, dtype=np.float64)
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        if self.L.shape[:2] != self.alpha.shape:
            raise DimensionMismatch("layer color/alpha shapes disagree")

    @staticmethod
    def empty(height: int, width: int) -> "LayerImage":
        return LayerImage(np.zeros((height, width, 3)), np.zeros((height, width)))


@dataclass
class Mask:
    """Boolean pixel mask with provenance (external file or projected box)."""

    values: np.ndarray
    provenance: str = "projected-box"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=bool)


def composite(real: LayerImage, mirror: LayerImage, I_bg: np.ndarray) -> np.ndarray:
    """Back-to-front blend: real over mirror over background.

    Per pixel and channel: ``L a + (1 - a) (Lb ab + (1 - ab) bg)``. The real
    person always occludes the mirrored person because the mirror path is
    strictly longer than the direct view.
    """
    I_bg = np.asarray(I_bg, dtype=np.float64)
    if real.L.shape != I_bg.shape or mirror.L.shape != I_bg.shape:
        raise DimensionMismatch("layer and background shapes disagree")
    a = real.alpha[..., None]
    ab = mirror.alpha[..., None]
    return real.L * a + (1.0 - a) * (mirror.L * ab + (1.0 - ab) * I_bg)


# --- full-frame renderer -----------------------------------------------------------------


@dataclass
class RenderConfig:
    n_samples: int = N_SAMPLES
    jitter: bool = True
    seed: int = 0
    box_pad_frac: float = 0.10
    iou_threshold: float = 0.1
    bbox_pad: float | None = None  # world pad; default from field support
    t_near: float = 1e-2


def _layer_pixels(mask_image: np.ndarray):
    rows, cols = np.nonzero(mask_image)
    return rows, cols, np.stack([cols + 0.5, rows + 0.5], axis=1)


def _pixel_dirs(K: CameraIntrinsics, px: np.ndarray) -> np.ndarray:
    return np.stack(
        [(px[:, 0] - K.o1) / K.f, (px[:, 1] - K.o2) / K.f, np.ones(len(px))], axis=1
    )


def _batched_segments(origins, dirs, lo, hi, t_min, t_max, fallback_end):
    """Per-ray [t0, t1] spans inside the box, with a same-length fallback
    span ending at ``fallback_end`` for rays that miss (their samples land
    in empty space and contribute nothing, but keep the query count fixed)."""
    n = len(dirs)
    inv = np.where(np.abs(dirs) < 1e-15, np.inf, 1.0 / dirs)
    ta = (lo[None, :] - origins) * inv
    tb = (hi[None, :] - origins) * inv
    lohi = np.sort(np.stack([ta, tb], axis=0), axis=0)
    t0 = np.maximum(lohi[0].max(axis=1), t_min)
    t1 = np.minimum(lohi[1].min(axis=1), t_max)
    miss = t0 >= t1
    span = float(np.linalg.norm(hi - lo))
    fb_end = np.broadcast_to(np.asarray(fallback_end, dtype=np.float64), (n,))
    t0 = np.where(miss, np.maximum(fb_end - span, 1e-4), t0)
    t1 = np.where(miss, fb_end, t1)
    return t0, t1


def _stratified_batch(t0, t1, n_samples, rng):
    R = len(t0)
    width = (t1 - t0)[:, None] / n_samples
    base = t0[:, None] + width * np.arange(n_samples)[None, :]
    if rng is None:
        ts = base + 0.5 * width
    else:
        ts = base + rng.random((R, n_samples)) * width
    return ts, width[:, 0]


def render_scene(
    field: RadianceField,
    K: CameraIntrinsics,
    mirror: Plane,
    pose_frame: PoseFrame,
    I_bg: np.ndarray,
    mode: str = "layered",
    config: RenderConfig | None = None,
    masks: tuple | None = None,
    return_layers: bool = False,
):
    """Render one frame of the scene in the requested mode.

    ``masks`` optionally supplies (real Mask, mirror Mask) to gate ray
    selection outside the occlusion box; inside the intersection box the
    projected boxes always win since segmentations are unreliable there.
    """
    config = config or RenderConfig()
    I_bg = np.asarray(I_bg, dtype=np.float64)
    H, W = I_bg.shape[:2]
    if (H, W) != (K.height, K.width):
        raise DimensionMismatch("background size disagrees with intrinsics")

    A = reflection_matrix(mirror)
    joints = pose_frame.joints
    mirror_joints = A.apply_many(joints)
    z = joints[:, 2]
    zb = mirror_joints[:, 2]
    if np.any(z <= 0) or np.any(zb <= 0):
        raise ValueError("pose projects behind the camera")
    px_real = np.stack([K.f * joints[:, 0] / z + K.o1, K.f * joints[:, 1] / z + K.o2], axis=1)
    px_mirror = np.stack(
        [K.f * mirror_joints[:, 0] / zb + K.o1, K.f * mirror_joints[:, 1] / zb + K.o2], axis=1
    )
    boxes = occlusion_boxes(K, px_real, px_mirror, config.box_pad_frac, config.iou_threshold)

    pad = config.bbox_pad
    if pad is None:
        sr = field.support_radius()
        pad = 0.4 if sr is None else 1.25 * sr
    lo, hi = pose_frame.bbox(pad)

    box_mask_real = boxes.N.contains_mask(W, H)
    box_mask_mirror = boxes.N_bar.contains_mask(W, H)
    inter_mask = boxes.inter.contains_mask(W, H)
    if masks is not None:
        m_real, m_mirror = masks
        if m_real.values.shape != (H, W) or m_mirror.values.shape != (H, W):
            raise DimensionMismatch("mask size disagrees with image")
        sel_real = (m_real.values & ~inter_mask) | (box_mask_real & inter_mask)
        sel_mirror = (m_mirror.values & ~inter_mask) | (box_mask_mirror & inter_mask)
    else:
        sel_real, sel_mirror = box_mask_real, box_mask_mirror

    encoder = pose_frame.encode
    t_far_cap = float(np.linalg.norm(hi) + np.linalg.norm(hi - lo) + 10.0)

    def direct_layer(sel_mask, rng):
        rows, cols, px = _layer_pixels(sel_mask)
        layer = LayerImage.empty(H, W)
        if len(px) == 0:
            return layer
        dirs = _pixel_dirs(K, px)
        dn = np.linalg.norm(dirs, axis=1)
        denom = dirs @ mirror.n
        with np.errstate(divide="ignore", invalid="ignore"):
            t_s = np.where(np.abs(denom) > 1e-12, -mirror.d / denom, np.inf)
        t_s = np.where(t_s > config.t_near, t_s, np.inf)
        t_max = np.minimum(t_s, t_far_cap)
        t0, t1 = _batched_segments(
            np.zeros_like(dirs), dirs, lo, hi, config.t_near, t_max,
            np.where(np.isfinite(t_s), t_s, t_far_cap),
        )
        ts, width = _stratified_batch(t0, t1, config.n_samples, rng)
        positions = dirs[:, None, :] * ts[:, :, None]
        deltas = (width * dn)[:, None] * np.ones(config.n_samples)[None, :]
        colors, alphas = _render_rays(field, encoder, positions, deltas)
        _write_layer(layer, rows, cols, colors, alphas)
        return layer

    def mirror_layer(sel_mask, rng):
        rows, cols, px = _layer_pixels(sel_mask)
        layer = LayerImage.empty(H, W)
        if len(px) == 0:
            return layer
        dirs = _pixel_dirs(K, px)
        dn = np.linalg.norm(dirs, axis=1)
        refl_dirs = dirs @ A.linear.T
        origin = A.apply(np.zeros(3))
        denom = dirs @ mirror.n
        with np.errstate(divide="ignore", invalid="ignore"):
            t_s = np.where(np.abs(denom) > 1e-12, -mirror.d / denom, np.inf)
        usable = np.isfinite(t_s) & (t_s > config.t_near)
        t_s_eff = np.where(usable, t_s, t_far_cap)
        t0, t1 = _batched_segments(
            np.tile(origin, (len(px), 1)), refl_dirs, lo, hi,
            config.t_near, np.full(len(px), t_far_cap),
            t_s_eff + float(np.linalg.norm(hi - lo)),
        )
        t0 = np.maximum(t0, t_s_eff)  # reflected leg starts at the mirror
        t1 = np.maximum(t1, t0 + 1e-9)
        ts, width = _stratified_batch(t0, t1, config.n_samples, rng)
        positions = origin[None, None, :] + refl_dirs[:, None, :] * ts[:, :, None]
        deltas = (width * dn)[:, None] * np.ones(config.n_samples)[None, :]
        colors, alphas = _render_rays(field, encoder, positions, deltas)
        alphas = np.where(usable, alphas, 0.0)
        colors = np.where(usable[:, None], colors, 0.0)
        _write_layer(layer, rows, cols, colors, alphas)
        return layer

    rng_real = np.random.default_rng(np.random.SeedSequence([config.seed, 1])) if config.jitter else None
    rng_mirror = np.random.default_rng(np.random.SeedSequence([config.seed, 2])) if config.jitter else None

    if mode == "layered":
        real = direct_layer(sel_real, rng_real)
        mirr = mirror_layer(sel_mirror, rng_mirror)
        out = composite(real, mirr, I_bg)
    elif mode == "no-occlusion":
        real = direct_layer(sel_real, rng_real)
        mirr = mirror_layer(sel_mirror, rng_mirror)
        out = I_bg.copy()
        mm = sel_mirror
        out[mm] = (
            mirr.L[mm] * mirr.alpha[mm][..., None]
            + (1.0 - mirr.alpha[mm][..., None]) * I_bg[mm]
        )
        rm = sel_real
        out[rm] = (
            real.L[rm] * real.alpha[rm][..., None]
            + (1.0 - real.alpha[rm][..., None]) * I_bg[rm]
        )
    elif mode == "no-layering":
        union = sel_real | sel_mirror
        out, real, mirr = _render_no_layering(
            field, encoder, K, mirror, A, union, lo, hi, I_bg, config,
            rng_real, rng_mirror, t_far_cap,
        )
    else:
        raise ValueError(f"unknown render mode {mode!r}")

    if return_layers:
        return out, real, mirr
    return out


def _write_layer(layer: LayerImage, rows, cols, colors, alphas):
    safe = alphas > 0.0
    un = np.zeros_like(colors)
    un[safe] = colors[safe] / alphas[safe, None]
    layer.L[rows, cols] = un
    layer.alpha[rows, cols] = alphas


def _render_no_layering(
    field, encoder, K, mirror, A, union_mask, lo, hi, I_bg, config,
    rng_real, rng_mirror, t_far_cap,
):
    """Single 2x64-sample quadrature per union pixel (direct + reflected)."""
    H, W = I_bg.shape[:2]
    rows, cols, px = _layer_pixels(union_mask)
    out = I_bg.copy()
    real = LayerImage.empty(H, W)
    mirr = LayerImage.empty(H, W)
    if len(px) == 0:
        return out, real, mirr
    dirs = _pixel_dirs(K, px)
    dn = np.linalg.norm(dirs, axis=1)
    denom = dirs @ mirror.n
    with np.errstate(divide="ignore", invalid="ignore"):
        t_s = np.where(np.abs(denom) > 1e-12, -mirror.d / denom, np.inf)
    t_s = np.where(t_s > config.t_near, t_s, np.inf)
    t_s_eff = np.where(np.isfinite(t_s), t_s, t_far_cap)

    t0d, t1d = _batched_segments(
        np.zeros_like(dirs), dirs, lo, hi, config.t_near,
        np.minimum(t_s, t_far_cap), t_s_eff,
    )
    tsd, wd = _stratified_batch(t0d, t1d, config.n_samples, rng_real)
    pos_d = dirs[:, None, :] * tsd[:, :, None]

    refl_dirs = dirs @ A.linear.T
    origin = A.apply(np.zeros(3))
    t0m, t1m = _batched_segments(
        np.tile(origin, (len(px), 1)), refl_dirs, lo, hi,
        config.t_near, np.full(len(px), t_far_cap),
        t_s_eff + float(np.linalg.norm(hi - lo)),
    )
    t0m = np.maximum(t0m, t_s_eff)
    t1m = np.maximum(t1m, t0m + 1e-9)
    tsm, wm = _stratified_batch(t0m, t1m, config.n_samples, rng_mirror)
    pos_m = origin[None, None, :] + refl_dirs[:, None, :] * tsm[:, :, None]

    n = config.n_samples
    positions = np.concatenate([pos_d, pos_m], axis=1)
    deltas = np.concatenate(
        [
            (wd * dn)[:, None] * np.ones(n)[None, :],
            (wm * dn)[:, None] * np.ones(n)[None, :],
        ],
        axis=1,
    )
    colors, alphas = _render_rays(field, encoder, positions, deltas)
    blended = colors + (1.0 - alphas)[:, None] * I_bg[rows, cols]
    out[rows, cols] = blended
    _write_layer(real, rows, cols, colors, alphas)
    return out, real, mirr
