"""Step 2: lift 2D detections to a 3D skeleton over the whole sequence.

The objective is the confidence-weighted reprojection error of the
forward-kinematics joints into the real camera and through the mirror,
plus regularizers: second-difference smoothness of joint locations and
joint rotations, a ground contact penalty on the lower heel, mirror/ground
orthogonality, and unit-norm penalties on both normals (the mirror and
ground normals are free variables refined jointly with the pose; the plane
offsets stay fixed, which pins the overall scale chosen in step 1).

Losses and gradients are evaluated in float64 torch so the public
gradient is the exact autograd of the public loss; the optimizer is Adam
(first-order, adaptive step) with step decay, run in two phases: global
pelvis + root orientation first with the limb rotations frozen, then all
parameters jointly. One optimization run is single-threaded and
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .calibrate import CalibrateConfig, ankle_point
from .errors import NaNDetected, NoDecrease
from .geometry import CameraIntrinsics, Plane, backproject_to_plane
from .metrics import default_subset_indices
from .skeleton import (
    PoseParams,
    SkeletonDef,
    forward_kinematics_all,
    standing_pose_candidates,
    template_lengths,
)

_DEPTH_FLOOR = 1e-3
_BARRIER_WEIGHT = 1e4


@dataclass
class LiftWeights:
    lambda_p: float = 1.0  # location smoothness
    lambda_theta: float = 0.1  # orientation smoothness
    lambda_f: float = 1.0  # feet-on-ground


@dataclass
class LiftConfig:
    iterations: int = 2000
    phase1_iterations: int = 200
    lr: float = 0.02
    lr_decay: float = 0.5
    lr_decay_every: int = 600
    no_decrease_window: int = 50


@dataclass
class LiftProblem:
    """Immutable snapshot of everything the optimizer needs."""

    K: CameraIntrinsics
    mirror: Plane
    ground: Plane
    skel: SkeletonDef
    q: np.ndarray  # (T, J, 2) real-person pixels
    w: np.ndarray  # (T, J) confidences
    q_bar: np.ndarray  # (T, J, 2) mirror-person pixels, un-flipped
    w_bar: np.ndarray  # (T, J)
    valid: np.ndarray  # (T,) frame validity
    weights: LiftWeights = field(default_factory=LiftWeights)

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.float64)
        self.w = np.clip(np.asarray(self.w, dtype=np.float64), 0.0, 1.0)
        self.q_bar = np.asarray(self.q_bar, dtype=np.float64)
        self.w_bar = np.clip(np.asarray(self.w_bar, dtype=np.float64), 0.0, 1.0)
        self.valid = np.asarray(self.valid, dtype=bool)

    @property
    def n_frames(self) -> int:
        return self.q.shape[0]

    def heel_indices(self) -> list:
        names = self.skel.joint_names
        if "left_heel" in names:
            return [names.index("left_heel"), names.index("right_heel")]
        return [names.index("left_ankle"), names.index("right_ankle")]


@dataclass
class LiftResult:
    poses: PoseParams
    mirror: Plane
    ground: Plane
    residuals: np.ndarray  # (T,) weighted reprojection RMS in pixels
    final_loss: float

    def to_dict(self) -> dict:
        return {
            "theta": self.poses.theta.tolist(),
            "lengths": self.poses.lengths.tolist(),
            "pelvis": self.poses.pelvis.tolist(),
            "mirror": self.mirror.to_dict(),
            "ground": self.ground.to_dict(),
            "residuals": [float(r) for r in self.residuals],
            "final_loss": float(self.final_loss),
        }

    @staticmethod
    def from_dict(d: dict) -> "LiftResult":
        poses = PoseParams(
            np.asarray(d["theta"]), np.asarray(d["lengths"]), np.asarray(d["pelvis"])
        )
        return LiftResult(
            poses=poses,
            mirror=Plane.from_dict(d["mirror"]),
            ground=Plane.from_dict(d["ground"]),
            residuals=np.asarray(d["residuals"], dtype=np.float64),
            final_loss=d.get("final_loss", float("nan")),
        )


def problem_from_pairs(
    K: CameraIntrinsics,
    mirror: Plane,
    ground: Plane,
    skel: SkeletonDef,
    pairs: list,
    valid: np.ndarray,
    weights: LiftWeights | None = None,
) -> LiftProblem:
    """Assemble a LiftProblem from per-frame (real, mirror) detection pairs.

    ``pairs[t]`` may be None for invalid frames; those get zero weights.
    """
    T = len(pairs)
    J = skel.n_joints
    q = np.zeros((T, J, 2))
    w = np.zeros((T, J))
    qb = np.zeros((T, J, 2))
    wb = np.zeros((T, J))
    for t, pair in enumerate(pairs):
        if pair is None:
            continue
        real, mirr = pair
        q[t], w[t] = real.joints, real.conf
        qb[t], wb[t] = mirr.joints, mirr.conf
    valid = np.asarray(valid, dtype=bool)
    w[~valid] = 0.0
    wb[~valid] = 0.0
    return LiftProblem(
        K=K, mirror=mirror, ground=ground, skel=skel,
        q=q, w=w, q_bar=qb, w_bar=wb, valid=valid,
        weights=weights or LiftWeights(),
    )


# --- torch internals ------------------------------------------------------------


def _rot6d_t(theta: torch.Tensor) -> torch.Tensor:
    a1, a2 = theta[..., :3], theta[..., 3:]
    b1 = a1 / a1.norm(dim=-1, keepdim=True)
    b2 = a2 - (b1 * a2).sum(dim=-1, keepdim=True) * b1
    b2 = b2 / b2.norm(dim=-1, keepdim=True)
    b3 = torch.cross(b1, b2, dim=-1)
    return torch.stack([b1, b2, b3], dim=-1)


def _fk_t(skel: SkeletonDef, theta, lengths, pelvis):
    """Batched FK: theta (T,J,6), lengths (J,), pelvis (T,3) -> (T,J,3)."""
    J = skel.n_joints
    M = _rot6d_t(theta)
    v_ref = torch.as_tensor(skel.v_ref, dtype=theta.dtype)
    R = [None] * J
    t = [None] * J
    R[0] = M[:, 0]
    t[0] = pelvis
    for j in range(1, J):
        p = int(skel.parents[j])
        bone = lengths[j] * v_ref[j]
        t[j] = torch.einsum("tab,b->ta", R[p], bone) + t[p]
        R[j] = R[p] @ M[:, j]
    return torch.stack(t, dim=1)


def _project_barrier(K: CameraIntrinsics, pts: torch.Tensor):
    """Clamped projection plus a quadratic barrier for points behind the camera."""
    z = pts[..., 2]
    z_safe = torch.clamp(z, min=_DEPTH_FLOOR)
    uv = torch.stack(
        [K.f * pts[..., 0] / z_safe + K.o1, K.f * pts[..., 1] / z_safe + K.o2], dim=-1
    )
    barrier = _BARRIER_WEIGHT * torch.clamp(_DEPTH_FLOOR - z, min=0.0).pow(2).sum()
    return uv, barrier


def _tensors(problem: LiftProblem):
    tt = lambda a: torch.as_tensor(a, dtype=torch.float64)
    return (
        tt(problem.q), tt(problem.w), tt(problem.q_bar), tt(problem.w_bar),
        torch.as_tensor(problem.valid),
    )


def _reprojection_t(problem, joints, n_m, frame=None):
    """Weighted reprojection loss; all frames unless one index is given."""
    q, w, qb, wb, _ = _tensors(problem)
    if frame is not None:
        joints = joints[frame : frame + 1]
        q, w, qb, wb = (a[frame : frame + 1] for a in (q, w, qb, wb))
    uv, bar1 = _project_barrier(problem.K, joints)
    lin = torch.eye(3, dtype=joints.dtype) - 2.0 * torch.outer(n_m, n_m)
    trans = -2.0 * problem.mirror.d * n_m
    mirrored = torch.einsum("ab,tjb->tja", lin, joints) + trans
    uv_bar, bar2 = _project_barrier(problem.K, mirrored)
    loss = (w * ((uv - q) ** 2).sum(-1)).sum() + (wb * ((uv_bar - qb) ** 2).sum(-1)).sum()
    return loss + bar1 + bar2


def _second_diff_windows(valid: torch.Tensor) -> torch.Tensor:
    """Mask of 3-frame windows fully inside a run of valid frames."""
    return valid[:-2] & valid[1:-1] & valid[2:]


def _regularizer_t(problem, joints, theta, n_m, n_g):
    lw = problem.weights
    _, _, _, _, valid = _tensors(problem)
    total = joints.new_zeros(())
    if joints.shape[0] >= 3:
        win = _second_diff_windows(valid)
        if win.any():
            acc_p = joints[2:] - 2.0 * joints[1:-1] + joints[:-2]
            total = total + lw.lambda_p * (acc_p[win] ** 2).sum()
            acc_t = theta[2:] - 2.0 * theta[1:-1] + theta[:-2]
            total = total + lw.lambda_theta * (acc_t[win] ** 2).sum()
    heel = problem.heel_indices()
    signed = torch.einsum("thc,c->th", joints[:, heel, :], n_g) + problem.ground.d
    lower = signed.min(dim=1).values
    total = total + lw.lambda_f * (lower[valid] ** 2).sum()
    total = total + (n_g @ n_m) ** 2
    total = total + (n_m.norm() - 1.0) ** 2 + (n_g.norm() - 1.0) ** 2
    return total


def _total_t(problem, theta, lengths, pelvis, n_m, n_g):
    joints = _fk_t(problem.skel, theta, lengths, pelvis)
    return (
        _reprojection_t(problem, joints, n_m)
        + _regularizer_t(problem, joints, theta, n_m, n_g),
        joints,
    )


def _full_lengths(skel, lengths_rest: torch.Tensor) -> torch.Tensor:
    zero = lengths_rest.new_zeros(1)
    return torch.cat([zero, lengths_rest])


# --- public loss / gradient -------------------------------------------------------


def reprojection_loss(problem: LiftProblem, poses: PoseParams, frame: int) -> float:
    """Confidence-weighted squared pixel error of one frame (both views)."""
    theta = torch.as_tensor(poses.theta, dtype=torch.float64)
    lengths = torch.as_tensor(poses.lengths, dtype=torch.float64)
    pelvis = torch.as_tensor(poses.pelvis, dtype=torch.float64)
    joints = _fk_t(problem.skel, theta, lengths, pelvis)
    n_m = torch.as_tensor(problem.mirror.n, dtype=torch.float64)
    return float(_reprojection_t(problem, joints, n_m, frame=frame))


def regularizer_loss(
    problem: LiftProblem, poses: PoseParams, n_m=None, n_g=None
) -> float:
    """Smoothness + feet + orthogonality + normal-norm penalties."""
    theta = torch.as_tensor(poses.theta, dtype=torch.float64)
    lengths = torch.as_tensor(poses.lengths, dtype=torch.float64)
    pelvis = torch.as_tensor(poses.pelvis, dtype=torch.float64)
    joints = _fk_t(problem.skel, theta, lengths, pelvis)
    n_m_t = torch.as_tensor(problem.mirror.n if n_m is None else n_m, dtype=torch.float64)
    n_g_t = torch.as_tensor(problem.ground.n if n_g is None else n_g, dtype=torch.float64)
    return float(_regularizer_t(problem, joints, theta, n_m_t, n_g_t))


def total_loss(problem: LiftProblem, poses: PoseParams, n_m=None, n_g=None) -> float:
    theta = torch.as_tensor(poses.theta, dtype=torch.float64)
    lengths = torch.as_tensor(poses.lengths, dtype=torch.float64)
    pelvis = torch.as_tensor(poses.pelvis, dtype=torch.float64)
    n_m_t = torch.as_tensor(problem.mirror.n if n_m is None else n_m, dtype=torch.float64)
    n_g_t = torch.as_tensor(problem.ground.n if n_g is None else n_g, dtype=torch.float64)
    loss, _ = _total_t(problem, theta, lengths, pelvis, n_m_t, n_g_t)
    return float(loss)


def gradient(problem: LiftProblem, poses: PoseParams, n_m=None, n_g=None) -> np.ndarray:
    """Autograd gradient of the total loss over all parameters.

    Packing order: theta (T*J*6), bone lengths for joints 1..J-1, pelvis
    (T*3), mirror normal (3), ground normal (3).
    """
    theta = torch.as_tensor(poses.theta, dtype=torch.float64).clone().requires_grad_(True)
    lengths_rest = (
        torch.as_tensor(poses.lengths[1:], dtype=torch.float64).clone().requires_grad_(True)
    )
    pelvis = torch.as_tensor(poses.pelvis, dtype=torch.float64).clone().requires_grad_(True)
    n_m_t = (
        torch.as_tensor(problem.mirror.n if n_m is None else n_m, dtype=torch.float64)
        .clone()
        .requires_grad_(True)
    )
    n_g_t = (
        torch.as_tensor(problem.ground.n if n_g is None else n_g, dtype=torch.float64)
        .clone()
        .requires_grad_(True)
    )
    loss, joints = _total_t(
        problem, theta, _full_lengths(problem.skel, lengths_rest), pelvis, n_m_t, n_g_t
    )
    if not torch.isfinite(loss):
        frame = _first_bad_frame(joints)
        raise NaNDetected("non-finite loss", frame_idx=frame)
    loss.backward()
    return np.concatenate(
        [
            theta.grad.numpy().ravel(),
            lengths_rest.grad.numpy().ravel(),
            pelvis.grad.numpy().ravel(),
            n_m_t.grad.numpy().ravel(),
            n_g_t.grad.numpy().ravel(),
        ]
    )


def _first_bad_frame(joints: torch.Tensor):
    finite = torch.isfinite(joints).all(dim=(1, 2))
    bad = (~finite).nonzero()
    return int(bad[0]) if len(bad) else None


# --- initialization -----------------------------------------------------------------


def estimate_bone_lengths(
    problem: LiftProblem, depth: float, person_height: float = 1.7
) -> np.ndarray:
    """Bone lengths from median 2D limb lengths scaled by the depth estimate.

    Falls back to the template proportions for joints with poor detection
    support, and clamps everything to a sane multiple of the template.
    """
    skel = problem.skel
    templ = template_lengths(skel, person_height)
    lengths = templ.copy()
    for j in range(1, skel.n_joints):
        p = int(skel.parents[j])
        ok = (problem.w[:, j] >= 0.3) & (problem.w[:, p] >= 0.3) & problem.valid
        if ok.sum() < 3:
            continue
        px = np.linalg.norm(problem.q[ok, j] - problem.q[ok, p], axis=1)
        est = float(np.median(px)) * depth / problem.K.f
        lengths[j] = np.clip(est, 0.5 * templ[j], 2.0 * templ[j])
    return lengths


def initialize_poses(
    problem: LiftProblem,
    person_height: float = 1.7,
    config: CalibrateConfig | None = None,
) -> PoseParams:
    """Standing-pose initialization: per-frame pelvis above the backprojected
    ankle point, best of 8 global yaws by reprojection error."""
    config = config or CalibrateConfig()
    skel = problem.skel
    names = skel.joint_names
    ground = problem.ground.oriented_toward(np.zeros(3))
    T = problem.n_frames

    ankle_targets = np.zeros((T, 3))
    depths = []
    last = None
    from .calibrate import Detection2D

    for t in range(T):
        det = Detection2D(problem.q[t], problem.w[t], frame_idx=t)
        ap = ankle_point(det, names, config.conf_threshold)
        if ap is not None and problem.valid[t]:
            try:
                g = backproject_to_plane(problem.K, ap, ground)
                last = g
                depths.append(g[2])
            except Exception:
                g = last
        else:
            g = last
        ankle_targets[t] = g if g is not None else np.zeros(3)
    if last is None:
        raise NoDecrease("no frame yields a usable ankle backprojection")
    # backfill leading frames that had no estimate yet
    for t in range(T - 1, -1, -1):
        if not np.any(ankle_targets[t]):
            ankle_targets[t] = ankle_targets[t + 1] if t + 1 < T else last

    depth = float(np.median(depths))
    lengths = estimate_bone_lengths(problem, depth, person_height)

    best = None
    mid = ankle_targets[problem.valid].mean(axis=0) if problem.valid.any() else last
    candidates = standing_pose_candidates(skel, mid, ground, lengths)
    for k, cand in enumerate(candidates):
        theta = np.tile(cand.theta[0][None, :, :], (T, 1, 1))
        up = ground.n
        from .skeleton import leg_length

        pelvis = ankle_targets + leg_length(skel, lengths) * up[None, :]
        poses = PoseParams(theta=theta, lengths=lengths.copy(), pelvis=pelvis)
        joints = forward_kinematics_all(skel, poses)
        score = _score_reprojection(problem, joints)
        if best is None or score < best[0]:
            best = (score, poses)
    return best[1]


def _score_reprojection(problem: LiftProblem, joints: np.ndarray) -> float:
    z = np.maximum(joints[..., 2], _DEPTH_FLOOR)
    uv = np.stack(
        [problem.K.f * joints[..., 0] / z + problem.K.o1,
         problem.K.f * joints[..., 1] / z + problem.K.o2], axis=-1,
    )
    n, d = problem.mirror.n, problem.mirror.d
    mirrored = joints - 2.0 * ((joints @ n) + d)[..., None] * n[None, None, :]
    zb = np.maximum(mirrored[..., 2], _DEPTH_FLOOR)
    uvb = np.stack(
        [problem.K.f * mirrored[..., 0] / zb + problem.K.o1,
         problem.K.f * mirrored[..., 1] / zb + problem.K.o2], axis=-1,
    )
    return float(
        (problem.w * ((uv - problem.q) ** 2).sum(-1)).sum()
        + (problem.w_bar * ((uvb - problem.q_bar) ** 2).sum(-1)).sum()
    )


# --- optimizer ------------------------------------------------------------------------


def optimize_sequence(
    problem: LiftProblem,
    init: PoseParams,
    config: LiftConfig | None = None,
) -> LiftResult:
    """Minimize the full objective with two-phase Adam.

    Tracks the best parameters seen, so the reported loss is monotonically
    non-increasing; raises NoDecrease if nothing improves in the opening
    iterations and NaNDetected (with a frame index) on numerical blow-up.
    """
    config = config or LiftConfig()
    skel = problem.skel
    T, J = init.theta.shape[:2]

    theta_root = torch.as_tensor(init.theta[:, :1], dtype=torch.float64).clone().requires_grad_(True)
    theta_rest = torch.as_tensor(init.theta[:, 1:], dtype=torch.float64).clone().requires_grad_(True)
    log_lengths = (
        torch.log(torch.as_tensor(init.lengths[1:], dtype=torch.float64)).clone().requires_grad_(True)
    )
    pelvis = torch.as_tensor(init.pelvis, dtype=torch.float64).clone().requires_grad_(True)
    n_m = torch.as_tensor(problem.mirror.n, dtype=torch.float64).clone().requires_grad_(True)
    n_g = torch.as_tensor(problem.ground.n, dtype=torch.float64).clone().requires_grad_(True)

    all_params = [theta_root, theta_rest, log_lengths, pelvis, n_m, n_g]

    def evaluate():
        theta = torch.cat([theta_root, theta_rest], dim=1)
        lengths = _full_lengths(skel, torch.exp(log_lengths))
        return _total_t(problem, theta, lengths, pelvis, n_m, n_g)

    def snapshot():
        return [p.detach().clone() for p in all_params]

    best_state = snapshot()
    with torch.no_grad():
        loss0, _ = evaluate()
    if not torch.isfinite(loss0):
        raise NaNDetected("non-finite loss at initialization", frame_idx=None)
    best_loss = float(loss0)
    initial_loss = best_loss

    phases = [
        (config.phase1_iterations, [pelvis, theta_root]),
        (max(config.iterations - config.phase1_iterations, 0), all_params),
    ]
    it_global = 0
    for n_iters, params in phases:
        if n_iters == 0:
            continue
        opt = torch.optim.Adam(params, lr=config.lr)
        sched = torch.optim.lr_scheduler.StepLR(
            opt, step_size=config.lr_decay_every, gamma=config.lr_decay
        )
        for _ in range(n_iters):
            opt.zero_grad(set_to_none=True)
            loss, joints = evaluate()
            if not torch.isfinite(loss):
                raise NaNDetected(
                    f"non-finite loss at iteration {it_global}",
                    frame_idx=_first_bad_frame(joints),
                )
            val = float(loss.detach())
            if val < best_loss:
                best_loss = val
                best_state = snapshot()
            loss.backward()
            opt.step()
            sched.step()
            it_global += 1
            if it_global == config.no_decrease_window and best_loss >= initial_loss:
                raise NoDecrease(
                    f"loss did not decrease in the first {config.no_decrease_window} "
                    "iterations; check the calibration"
                )

    theta_root_b, theta_rest_b, log_lengths_b, pelvis_b, n_m_b, n_g_b = best_state
    theta = torch.cat([theta_root_b, theta_rest_b], dim=1).numpy()
    lengths = np.concatenate([[0.0], np.exp(log_lengths_b.numpy())])
    poses = PoseParams(theta=theta, lengths=lengths, pelvis=pelvis_b.numpy())

    n_m_np = n_m_b.numpy()
    n_g_np = n_g_b.numpy()
    mirror = Plane(n_m_np / np.linalg.norm(n_m_np), problem.mirror.d)
    ground = Plane(n_g_np / np.linalg.norm(n_g_np), problem.ground.d)

    residuals = per_frame_residuals(problem, poses, mirror)
    return LiftResult(
        poses=poses, mirror=mirror, ground=ground,
        residuals=residuals, final_loss=best_loss,
    )


def per_frame_residuals(problem: LiftProblem, poses: PoseParams, mirror: Plane) -> np.ndarray:
    """Weighted reprojection RMS (px) per frame at the given solution."""
    joints = forward_kinematics_all(problem.skel, poses)
    z = np.maximum(joints[..., 2], _DEPTH_FLOOR)
    uv = np.stack(
        [problem.K.f * joints[..., 0] / z + problem.K.o1,
         problem.K.f * joints[..., 1] / z + problem.K.o2], axis=-1,
    )
    n, d = mirror.n, mirror.d
    mirrored = joints - 2.0 * ((joints @ n) + d)[..., None] * n[None, None, :]
    zb = np.maximum(mirrored[..., 2], _DEPTH_FLOOR)
    uvb = np.stack(
        [problem.K.f * mirrored[..., 0] / zb + problem.K.o1,
         problem.K.f * mirrored[..., 1] / zb + problem.K.o2], axis=-1,
    )
    num = (problem.w * ((uv - problem.q) ** 2).sum(-1)).sum(axis=1) + (
        problem.w_bar * ((uvb - problem.q_bar) ** 2).sum(-1)
    ).sum(axis=1)
    den = problem.w.sum(axis=1) + problem.w_bar.sum(axis=1)
    out = np.zeros(problem.n_frames)
    ok = den > 0
    out[ok] = np.sqrt(num[ok] / den[ok])
    return out


# --- BVH export -------------------------------------------------------------------------


def export_bvh(skel: SkeletonDef, poses: PoseParams, path, frame_time: float = 1.0 / 30.0):
    """Minimal BVH export of the solved joint angles for motion tools."""
    from scipy.spatial.transform import Rotation

    from .skeleton import rot6d_many

    children = [[] for _ in range(skel.n_joints)]
    for j in range(1, skel.n_joints):
        children[int(skel.parents[j])].append(j)

    lines = ["HIERARCHY"]
    order = []

    def emit(j, indent, keyword):
        pad = "  " * indent
        lines.append(f"{pad}{keyword} {skel.joint_names[j]}")
        lines.append(pad + "{")
        off = poses.lengths[j] * skel.v_ref[j]
        lines.append(f"{pad}  OFFSET {off[0]:.6f} {off[1]:.6f} {off[2]:.6f}")
        if j == 0:
            lines.append(
                f"{pad}  CHANNELS 6 Xposition Yposition Zposition "
                "Zrotation Xrotation Yrotation"
            )
        else:
            lines.append(f"{pad}  CHANNELS 3 Zrotation Xrotation Yrotation")
        order.append(j)
        if children[j]:
            for c in children[j]:
                emit(c, indent + 1, "JOINT")
        else:
            lines.append(f"{pad}  End Site")
            lines.append(pad + "  {")
            lines.append(f"{pad}    OFFSET 0.000000 0.000000 0.000000")
            lines.append(pad + "  }")
        lines.append(pad + "}")

    emit(0, 0, "ROOT")
    T = poses.n_frames
    lines.append("MOTION")
    lines.append(f"Frames: {T}")
    lines.append(f"Frame Time: {frame_time:.6f}")
    M = rot6d_many(poses.theta)  # (T, J, 3, 3)
    for t in range(T):
        vals = list(poses.pelvis[t])
        for j in order:
            e = Rotation.from_matrix(M[t, j]).as_euler("ZXY", degrees=True)
            if j == 0:
                vals.extend(e)
            else:
                vals.extend(e)
        lines.append(" ".join(f"{v:.6f}" for v in vals))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
