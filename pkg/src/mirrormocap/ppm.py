"""Binary PPM (P6, 8-bit) image I/O.

Chosen for dependency-free, bit-exact comparison in tests: writing the
same float image twice produces identical bytes.
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError


def write_ppm(path, image: np.ndarray) -> None:
    """Write an (H, W, 3) float image in [0, 1] (or uint8) as binary P6."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("PPM image must be (H, W, 3)")
    if image.dtype != np.uint8:
        image = np.clip(np.rint(np.clip(image, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
    h, w = image.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def read_ppm(path) -> np.ndarray:
    """Read a binary P6 file into a (H, W, 3) uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P6"):
        raise ParseError(f"{path}: not a binary PPM (P6) file")
    # header: magic, width, height, maxval, then a single whitespace byte
    tokens = []
    i = 2
    while len(tokens) < 3:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(data) and not data[j : j + 1].isspace():
            j += 1
        tokens.append(data[i:j])
        i = j
    i += 1  # single whitespace after maxval
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as e:
        raise ParseError(f"{path}: bad PPM header") from e
    if maxval != 255:
        raise ParseError(f"{path}: only maxval 255 supported, got {maxval}")
    body = data[i : i + w * h * 3]
    if len(body) != w * h * 3:
        raise ParseError(f"{path}: truncated pixel data at byte {i + len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3).copy()


def to_float(image: np.ndarray) -> np.ndarray:
    return np.asarray(image, dtype=np.float64) / 255.0
