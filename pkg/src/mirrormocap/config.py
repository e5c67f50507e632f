"""Pipeline configuration: one flat dataclass, JSON-loadable, CLI-overridable."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

from .calibrate import CalibrateConfig
from .lift import LiftConfig, LiftWeights
from .render import RenderConfig


@dataclass
class PipelineConfig:
    # data
    schema: str = "mirror17"
    person_height: float = 1.7
    # calibration
    conf_threshold: float = 0.3
    ambiguity_threshold: float = 0.02
    residual_threshold_px: float = 20.0
    min_mirror_angle_deg: float = 5.0
    max_mirror_angle_deg: float = 85.0
    # lifting
    lambda_p: float = 1.0
    lambda_theta: float = 0.1
    lambda_f: float = 1.0
    iterations: int = 2000
    phase1_iterations: int = 200
    lr: float = 0.02
    degenerate_residual_px: float = 20.0
    # rendering
    render_mode: str = "layered"
    render_frames: tuple = ()
    render_samples: int = 64
    render_jitter: bool = True
    box_pad_frac: float = 0.10
    iou_threshold: float = 0.1
    occlusion_enable_fraction: float = 0.05
    render_width: int = 0  # 0 = use input image size
    render_height: int = 0
    # misc
    seed: int = 0
    threads: int = 0  # 0 = leave torch defaults

    def calibrate_config(self) -> CalibrateConfig:
        return CalibrateConfig(
            person_height=self.person_height,
            conf_threshold=self.conf_threshold,
            ambiguity_threshold=self.ambiguity_threshold,
            residual_threshold_px=self.residual_threshold_px,
            min_mirror_angle_deg=self.min_mirror_angle_deg,
            max_mirror_angle_deg=self.max_mirror_angle_deg,
        )

    def lift_weights(self) -> LiftWeights:
        return LiftWeights(
            lambda_p=self.lambda_p, lambda_theta=self.lambda_theta, lambda_f=self.lambda_f
        )

    def lift_config(self) -> LiftConfig:
        return LiftConfig(
            iterations=self.iterations,
            phase1_iterations=self.phase1_iterations,
            lr=self.lr,
        )

    def render_config(self) -> RenderConfig:
        return RenderConfig(
            n_samples=self.render_samples,
            jitter=self.render_jitter,
            seed=self.seed,
            box_pad_frac=self.box_pad_frac,
            iou_threshold=self.iou_threshold,
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["render_frames"] = list(self.render_frames)
        return d

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    @staticmethod
    def from_dict(d: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(PipelineConfig)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "render_frames" in d:
            d = dict(d)
            d["render_frames"] = tuple(d["render_frames"])
        return PipelineConfig(**d)

    @staticmethod
    def load(path) -> "PipelineConfig":
        with open(path) as fh:
            return PipelineConfig.from_dict(json.load(fh))

    def merged(self, overrides: dict) -> "PipelineConfig":
        """New config with non-None override values applied (CLI flags win)."""
        d = self.to_dict()
        for k, v in overrides.items():
            if v is not None:
                d[k] = v
        return PipelineConfig.from_dict(d)
