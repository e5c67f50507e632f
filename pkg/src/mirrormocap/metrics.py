"""Pose error metrics: Procrustes-aligned and scale-normalized MPJPE.

Monocular reconstructions are inherently scale-ambiguous, so both metrics
remove at least the scale before measuring joint error. PA-MPJPE aligns
the prediction with the best similarity transform (rotation constrained to
det +1 so a mirror-flipped prediction scores badly rather than zero);
N-MPJPE root-centers both poses and allows only a uniform scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfiguration, ZeroPose

# Default evaluation subset: 15 core joints of the built-in skeleton
# (spine and head_top excluded). Override per dataset as needed.
DEFAULT_EVAL_JOINTS = (
    "pelvis",
    "neck",
    "head",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_hip",
    "left_knee",
    "left_ankle",
    "right_hip",
    "right_knee",
    "right_ankle",
)


@dataclass
class MetricReport:
    pa_mpjpe: float
    n_mpjpe: float
    per_frame: list
    joint_subset: list

    def to_dict(self) -> dict:
        return {
            "pa_mpjpe": float(self.pa_mpjpe),
            "n_mpjpe": float(self.n_mpjpe),
            "per_frame": [
                {"pa_mpjpe": float(a), "n_mpjpe": float(b)} for a, b in self.per_frame
            ],
            "joint_subset": [int(i) for i in self.joint_subset],
        }

    def text_table(self) -> str:
        lines = [
            f"{'frame':>6}  {'PA-MPJPE':>10}  {'N-MPJPE':>10}",
            "-" * 32,
        ]
        for i, (a, b) in enumerate(self.per_frame):
            lines.append(f"{i:>6}  {a:>10.5f}  {b:>10.5f}")
        lines.append("-" * 32)
        lines.append(f"{'mean':>6}  {self.pa_mpjpe:>10.5f}  {self.n_mpjpe:>10.5f}")
        return "\n".join(lines)


def _subset(pose: np.ndarray, subset) -> np.ndarray:
    pose = np.asarray(pose, dtype=np.float64)
    if subset is None:
        return pose
    return pose[np.asarray(subset, dtype=np.int64)]


def similarity_align(pred: np.ndarray, gt: np.ndarray):
    """Least-squares similarity transform (s, R, t) mapping pred onto gt.

    Rotation is solved by orthogonal Procrustes on the centered
    cross-covariance with det(R) = +1 enforced.
    """
    mu_p = pred.mean(axis=0)
    mu_g = gt.mean(axis=0)
    P = pred - mu_p
    G = gt - mu_g
    cov = G.T @ P
    U, S, Vt = np.linalg.svd(cov)
    sign = np.sign(np.linalg.det(U @ Vt))
    D = np.diag([1.0, 1.0, sign])
    R = U @ D @ Vt
    var_p = (P**2).sum()
    if var_p < 1e-18:
        raise DegenerateConfiguration("prediction collapsed to a point")
    s = (S * np.diag(D)).sum() / var_p
    t = mu_g - s * (R @ mu_p)
    return s, R, t


def pa_mpjpe(pred, gt, subset=None) -> float:
    """Mean joint error after optimal similarity alignment of pred to gt."""
    P = _subset(getattr(pred, "joints", pred), subset)
    G = _subset(getattr(gt, "joints", gt), subset)
    if P.shape != G.shape or P.shape[0] < 3:
        raise DegenerateConfiguration("need matching joint sets of size >= 3")
    centered = P - P.mean(axis=0)
    _, sing, _ = np.linalg.svd(centered)
    if sing[1] < 1e-12 * max(sing[0], 1.0):
        raise DegenerateConfiguration("joints are collinear")
    s, R, t = similarity_align(P, G)
    aligned = s * (P @ R.T) + t
    return float(np.linalg.norm(aligned - G, axis=1).mean())


def n_mpjpe(pred, gt, subset=None) -> float:
    """Mean joint error after root-centering and optimal uniform scaling.

    Both poses are centered at their root joint (row 0 of the full pose),
    then the prediction is scaled by <pred, gt> / <pred, pred>.
    """
    P_full = np.asarray(getattr(pred, "joints", pred), dtype=np.float64)
    G_full = np.asarray(getattr(gt, "joints", gt), dtype=np.float64)
    P = _subset(P_full - P_full[0], subset)
    G = _subset(G_full - G_full[0], subset)
    if P.shape != G.shape:
        raise ValueError("pose shapes disagree")
    denom = float((P * P).sum())
    if denom < 1e-18:
        raise ZeroPose("prediction has zero norm after root-centering")
    s = float((P * G).sum()) / denom
    return float(np.linalg.norm(s * P - G, axis=1).mean())


def sequence_report(pred_seq, gt_seq, subset=None) -> MetricReport:
    """Per-frame and mean metrics over (T, J, 3) pose sequences."""
    pred_seq = np.asarray(pred_seq, dtype=np.float64)
    gt_seq = np.asarray(gt_seq, dtype=np.float64)
    per_frame = [
        (pa_mpjpe(p, g, subset), n_mpjpe(p, g, subset))
        for p, g in zip(pred_seq, gt_seq)
    ]
    arr = np.asarray(per_frame)
    return MetricReport(
        pa_mpjpe=float(arr[:, 0].mean()),
        n_mpjpe=float(arr[:, 1].mean()),
        per_frame=per_frame,
        joint_subset=list(subset) if subset is not None else list(range(pred_seq.shape[1])),
    )


def default_subset_indices(joint_names) -> list:
    return [list(joint_names).index(n) for n in DEFAULT_EVAL_JOINTS if n in joint_names]
