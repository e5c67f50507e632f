"""Keypoint file ingestion and detector joint-schema remapping.

The native file format is JSON:

.. code-block:: json

    {
      "schema": "mirror17",
      "image_size": [1280, 720],
      "frames": [
        {"frame": 0, "persons": [{"joints": [[x, y, conf], ...]}, ...]},
        ...
      ]
    }

``joints`` rows follow the declared schema's joint order. Importers for
the two common detector layouts (17-joint COCO and 25-joint BODY-25) remap
onto the internal skeleton: composite internal joints (for instance the
pelvis from the two hips) average their sources, extra detector joints are
dropped, and internal joints with no source get confidence zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .calibrate import Detection2D
from .errors import ParseError, UnknownSchema
from .skeleton import SkeletonDef, default_skeleton

_COCO17 = (
    "nose", "left_eye", "right_eye", "left_ear", "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hip", "right_hip",
    "left_knee", "right_knee", "left_ankle", "right_ankle",
)

_BODY25 = (
    "nose", "neck", "right_shoulder", "right_elbow", "right_wrist",
    "left_shoulder", "left_elbow", "left_wrist", "mid_hip",
    "right_hip", "right_knee", "right_ankle",
    "left_hip", "left_knee", "left_ankle",
    "right_eye", "left_eye", "right_ear", "left_ear",
    "left_big_toe", "left_small_toe", "left_heel",
    "right_big_toe", "right_small_toe", "right_heel",
)


@dataclass(frozen=True)
class JointSchema:
    """Detector joint layout plus its mapping onto the internal skeleton."""

    name: str
    source_names: tuple
    mapping: dict  # internal joint name -> tuple of source joint names

    @property
    def n_source(self) -> int:
        return len(self.source_names)


def _identity_schema(name: str, skel: SkeletonDef) -> JointSchema:
    return JointSchema(
        name=name,
        source_names=skel.joint_names,
        mapping={n: (n,) for n in skel.joint_names},
    )


def _coco17_schema() -> JointSchema:
    mapping = {
        "pelvis": ("left_hip", "right_hip"),
        "spine": ("left_hip", "right_hip", "left_shoulder", "right_shoulder"),
        "neck": ("left_shoulder", "right_shoulder"),
        "head": ("nose",),
        "left_shoulder": ("left_shoulder",),
        "left_elbow": ("left_elbow",),
        "left_wrist": ("left_wrist",),
        "right_shoulder": ("right_shoulder",),
        "right_elbow": ("right_elbow",),
        "right_wrist": ("right_wrist",),
        "left_hip": ("left_hip",),
        "left_knee": ("left_knee",),
        "left_ankle": ("left_ankle",),
        "right_hip": ("right_hip",),
        "right_knee": ("right_knee",),
        "right_ankle": ("right_ankle",),
    }
    return JointSchema("coco17", _COCO17, mapping)


def _body25_schema() -> JointSchema:
    mapping = {
        "pelvis": ("mid_hip",),
        "spine": ("neck", "mid_hip"),
        "neck": ("neck",),
        "head": ("nose",),
        "left_shoulder": ("left_shoulder",),
        "left_elbow": ("left_elbow",),
        "left_wrist": ("left_wrist",),
        "right_shoulder": ("right_shoulder",),
        "right_elbow": ("right_elbow",),
        "right_wrist": ("right_wrist",),
        "left_hip": ("left_hip",),
        "left_knee": ("left_knee",),
        "left_ankle": ("left_ankle",),
        "right_hip": ("right_hip",),
        "right_knee": ("right_knee",),
        "right_ankle": ("right_ankle",),
        "left_heel": ("left_heel",),
        "right_heel": ("right_heel",),
    }
    return JointSchema("body25", _BODY25, mapping)


def schema_registry() -> dict:
    skel17, _ = default_skeleton()
    skel19, _ = default_skeleton(with_heels=True)
    return {
        "mirror17": _identity_schema("mirror17", skel17),
        "mirror19": _identity_schema("mirror19", skel19),
        "coco17": _coco17_schema(),
        "body25": _body25_schema(),
    }


def get_schema(name: str) -> JointSchema:
    reg = schema_registry()
    if name not in reg:
        raise UnknownSchema(f"unknown joint schema {name!r}; known: {sorted(reg)}")
    return reg[name]


def remap_detection(joints: np.ndarray, conf: np.ndarray, schema: JointSchema, skel: SkeletonDef):
    """Remap (Js, 2)/(Js,) source arrays onto the internal joint order.

    Composite joints average their sources (position and confidence);
    internal joints with no mapped source get confidence zero.
    """
    J = skel.n_joints
    out_j = np.zeros((J, 2))
    out_c = np.zeros(J)
    src_index = {n: i for i, n in enumerate(schema.source_names)}
    for i, name in enumerate(skel.joint_names):
        srcs = schema.mapping.get(name, ())
        idx = [src_index[s] for s in srcs if s in src_index]
        if not idx:
            continue
        out_j[i] = joints[idx].mean(axis=0)
        out_c[i] = conf[idx].mean()
    return out_j, out_c


def ingest_keypoints(path, schema_name: str, skel: SkeletonDef | None = None):
    """Load a keypoint JSON file, remapped to the internal skeleton.

    Returns (frames, image_size) where ``frames[t]`` is the list of
    Detection2D for frame t. Raises ParseError with location context on
    malformed input and UnknownSchema for unregistered layouts.
    """
    schema = get_schema(schema_name)
    if skel is None:
        skel, _ = default_skeleton(with_heels="left_heel" in schema.mapping and schema_name == "mirror19")
    try:
        with open(path, "rb") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON at byte {e.pos}: {e.msg}") from e
    except OSError as e:
        raise ParseError(f"{path}: {e}") from e

    if not isinstance(doc, dict) or "frames" not in doc:
        raise ParseError(f"{path}: missing top-level 'frames'")
    file_schema = doc.get("schema", schema_name)
    if file_schema != schema_name:
        raise ParseError(
            f"{path}: file declares schema {file_schema!r}, requested {schema_name!r}"
        )
    try:
        width, height = doc["image_size"]
    except (KeyError, ValueError, TypeError) as e:
        raise ParseError(f"{path}: bad or missing image_size") from e

    frames = []
    for k, fr in enumerate(doc["frames"]):
        if fr.get("frame", k) != k:
            raise ParseError(f"{path}: frames not contiguous at index {k}")
        persons = []
        for p_idx, person in enumerate(fr.get("persons", [])):
            arr = np.asarray(person["joints"], dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != 3:
                raise ParseError(
                    f"{path}: frame {k} person {p_idx}: joints must be Jx3 rows"
                )
            if arr.shape[0] != schema.n_source:
                raise ParseError(
                    f"{path}: frame {k} person {p_idx}: expected "
                    f"{schema.n_source} joints for schema {schema_name}, got {arr.shape[0]}"
                )
            xy, conf = arr[:, :2], arr[:, 2]
            seen = conf > 0
            if np.any(
                (xy[seen, 0] < -0.1 * width) | (xy[seen, 0] > 1.1 * width)
                | (xy[seen, 1] < -0.1 * height) | (xy[seen, 1] > 1.1 * height)
            ):
                raise ParseError(
                    f"{path}: frame {k} person {p_idx}: coordinates outside "
                    "image bounds +-10%"
                )
            joints, conf = remap_detection(xy, conf, schema, skel)
            persons.append(
                Detection2D(joints=joints, conf=conf, person_idx=p_idx, frame_idx=k)
            )
        frames.append(persons)
    return frames, (int(width), int(height))


def write_keypoints(path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
