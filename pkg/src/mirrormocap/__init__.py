"""Single-camera mirror motion capture.

Reconstructs camera intrinsics, mirror geometry, and an articulated 3D
skeleton from 2D keypoint detections of a person in front of a mirror,
and renders occlusion-aware layered mirror images of an analytic body.
"""

__version__ = "0.1.0"
