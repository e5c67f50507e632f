"""Pipeline driver: ingest -> calibrate -> lift -> eval -> render.

Each stage writes an individually loadable JSON artifact so later stages
can resume from saved state, and every run writes a manifest (config hash,
seed, library versions) sufficient to reproduce the outputs byte-exactly.
Errors carry a ``stage`` attribute naming the stage that raised them.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import __version__
from .calibrate import (
    CalibrationResult,
    WrongPersonCount,
    ankle_point,
    associate_real_mirror,
    associated_pair,
    estimate_focal_ground,
    head_point,
    init_mirror,
)
from .config import PipelineConfig
from .errors import MirrorMocapError, NoValidFrames
from .geometry import CameraIntrinsics
from .keypoints import ingest_keypoints
from .lift import (
    LiftResult,
    initialize_poses,
    optimize_sequence,
    problem_from_pairs,
)
from .metrics import default_subset_indices, sequence_report
from .ppm import write_ppm
from .render import AnalyticBodyField, PoseFrame, render_scene
from .skeleton import default_skeleton, forward_kinematics_all


def _stage(name):
    """Decorator stamping raised errors with the stage name."""

    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except MirrorMocapError as e:
                if not hasattr(e, "stage"):
                    e.stage = name
                raise
        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner

    return wrap


@dataclass
class AssociatedFrames:
    """Per-frame association outcome feeding calibration and lifting."""

    pairs: list  # (real, mirror-unflipped) or None per frame
    valid: np.ndarray


@_stage("associate")
def stage_associate(frames: list, skel, config: PipelineConfig) -> AssociatedFrames:
    """Associate real/mirror per frame and apply the validity rule.

    A frame is valid iff it has exactly two detections, the association is
    unambiguous, and both persons' mean joint confidence reaches the
    threshold. If no frame is usable and every failure was a person-count
    problem, that error is surfaced directly.
    """
    ccfg = config.calibrate_config()
    flip = skel.flip_permutation()
    pairs, valid, errors = [], [], []
    for dets in frames:
        try:
            assoc = associate_real_mirror(dets, flip, ccfg, skel.joint_names)
            real, mirror = associated_pair(dets, assoc)
            if (
                real.conf.mean() < config.conf_threshold
                or mirror.conf.mean() < config.conf_threshold
            ):
                raise NoValidFrames("mean confidence below threshold")
            pairs.append((real, mirror))
            valid.append(True)
            errors.append(None)
        except MirrorMocapError as e:
            pairs.append(None)
            valid.append(False)
            errors.append(e)
    valid = np.asarray(valid, dtype=bool)
    if not valid.any():
        counts = [e for e in errors if isinstance(e, WrongPersonCount)]
        if counts and len(counts) == len(errors):
            raise counts[0]
        raise NoValidFrames("no frame passed association and confidence checks")
    return AssociatedFrames(pairs=pairs, valid=valid)


@_stage("calibrate")
def stage_calibrate(
    assoc: AssociatedFrames, image_size: tuple, skel, config: PipelineConfig
) -> CalibrationResult:
    """Focal/ground from pedestrian observations, then the mirror plane."""
    ccfg = config.calibrate_config()
    names = skel.joint_names
    heads, ankles = [], []
    for pair in assoc.pairs:
        if pair is None:
            continue
        for det in pair:  # real and mirror persons both stand on the ground
            a = ankle_point(det, names, ccfg.conf_threshold)
            h = head_point(det, names, ccfg.conf_threshold)
            if a is not None and h is not None:
                heads.append(h)
                ankles.append(a)
    K, ground, rms = estimate_focal_ground(
        np.asarray(heads), np.asarray(ankles), image_size,
        person_height=config.person_height, config=ccfg,
    )
    usable = [p for p in assoc.pairs if p is not None]
    mirror = init_mirror(K, ground, usable, ccfg, names)
    return CalibrationResult(
        K=K,
        ground=ground,
        mirror=mirror,
        camera_height=float(ground.d),
        per_frame_valid=assoc.valid,
        residual_rms=rms,
    )


@_stage("lift")
def stage_lift(
    assoc: AssociatedFrames, calib: CalibrationResult, skel, config: PipelineConfig
) -> LiftResult:
    problem = problem_from_pairs(
        calib.K, calib.mirror, calib.ground, skel,
        assoc.pairs, assoc.valid, config.lift_weights(),
    )
    init = initialize_poses(problem, config.person_height, config.calibrate_config())
    return optimize_sequence(problem, init, config.lift_config())


@_stage("eval")
def stage_eval(lift_result: LiftResult, skel, gt_doc: dict):
    pred = forward_kinematics_all(skel, lift_result.poses)
    gt = np.asarray([fr["joints"] for fr in gt_doc["frames"]], dtype=np.float64)
    if len(gt) != len(pred):
        raise NoValidFrames(f"GT has {len(gt)} frames, prediction {len(pred)}")
    gt_names = gt_doc.get("joint_names", list(skel.joint_names))
    common = [n for n in skel.joint_names if n in gt_names]
    sub_pred = [skel.joint_names.index(n) for n in common if n in _metric_names(skel)]
    sub_gt = [gt_names.index(n) for n in common if n in _metric_names(skel)]
    return sequence_report(pred[:, sub_pred], gt[:, sub_gt], None)


def _metric_names(skel):
    return {skel.joint_names[i] for i in default_subset_indices(skel.joint_names)}


@_stage("render")
def stage_render(
    lift_result: LiftResult, calib: CalibrationResult, skel, config: PipelineConfig,
    out_dir, background: np.ndarray | None = None,
) -> list:
    """Render the configured frames with an analytic capsule body."""
    K = calib.K
    if config.render_width > 0:
        s = config.render_width / K.width
        K = CameraIntrinsics(
            K.f * s, K.o1 * s, K.o2 * s,
            config.render_width, int(round(K.height * s)),
        )
    if background is None:
        background = np.full((K.height, K.width, 3), 0.12)
    lengths = lift_result.poses.lengths
    radii = np.clip(0.22 * lengths, 0.02, 0.09)
    field = AnalyticBodyField(
        skel, lengths, radii, AnalyticBodyField.default_palette(skel), sigma=200.0
    )
    paths = []
    for frame in config.render_frames:
        pf = PoseFrame(skel, lift_result.poses, int(frame))
        img = render_scene(
            field, K, lift_result.mirror, pf, background,
            mode=config.render_mode, config=config.render_config(),
        )
        path = os.path.join(out_dir, f"render_f{int(frame):04d}_{config.render_mode}.ppm")
        write_ppm(path, img)
        paths.append(path)
    return paths


def _dump_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)


def run_pipeline(
    config: PipelineConfig, input_path, out_dir, gt_path=None
) -> dict:
    """Execute the full pipeline and write all artifacts under ``out_dir``.

    Returns a summary dict with artifact paths and headline values. The
    run is idempotent: identical (config, input) produce byte-identical
    outputs.
    """
    import torch

    if config.threads > 0:
        torch.set_num_threads(config.threads)
    torch.manual_seed(config.seed)

    os.makedirs(out_dir, exist_ok=True)
    with_heels = config.schema in ("mirror19", "body25")
    skel, _ = default_skeleton(with_heels=with_heels)

    frames, image_size = ingest_keypoints(input_path, config.schema, skel)
    assoc = stage_associate(frames, skel, config)
    calib = stage_calibrate(assoc, image_size, skel, config)
    calib_path = os.path.join(out_dir, "calibration.json")
    _dump_json(calib_path, calib.to_dict())

    lift_result = stage_lift(assoc, calib, skel, config)
    joints = forward_kinematics_all(skel, lift_result.poses)
    lift_doc = lift_result.to_dict()
    lift_doc["joint_names"] = list(skel.joint_names)
    lift_doc["joints"] = joints.tolist()
    mean_resid = float(lift_result.residuals[assoc.valid].mean())
    lift_doc["mean_residual_px"] = mean_resid
    lift_doc["reliable"] = bool(mean_resid <= config.degenerate_residual_px)
    lift_path = os.path.join(out_dir, "lift.json")
    _dump_json(lift_path, lift_doc)

    summary = {
        "calibration": calib_path,
        "lift": lift_path,
        "mean_residual_px": mean_resid,
        "reliable": lift_doc["reliable"],
    }

    if gt_path is not None:
        with open(gt_path) as fh:
            gt_doc = json.load(fh)
        report = stage_eval(lift_result, skel, gt_doc)
        metrics_path = os.path.join(out_dir, "metrics.json")
        _dump_json(metrics_path, report.to_dict())
        with open(os.path.join(out_dir, "metrics.txt"), "w") as fh:
            fh.write(report.text_table() + "\n")
        summary["metrics"] = metrics_path
        summary["pa_mpjpe"] = report.pa_mpjpe
        summary["n_mpjpe"] = report.n_mpjpe

    if config.render_frames:
        summary["renders"] = stage_render(lift_result, calib, skel, config, out_dir)

    manifest = {
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "versions": _versions(),
        "artifacts": sorted(
            k for k in ("calibration", "lift", "metrics") if k in summary
        ),
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    _dump_json(manifest_path, manifest)
    summary["manifest"] = manifest_path
    return summary


def _versions() -> dict:
    import numpy
    import scipy
    import torch

    return {
        "mirrormocap": __version__,
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "torch": torch.__version__,
    }
