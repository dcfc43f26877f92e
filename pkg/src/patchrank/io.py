"""Binary PPM/PGM images and comma-separated trajectory files."""
import re
from pathlib import Path

import numpy as np

from patchrank.errors import InputError
from patchrank.features import BoundingBox

_HEADER = re.compile(rb"(P[56])\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s")


def _read_pnm(path, magic, channels):
    data = Path(path).read_bytes()
    m = _HEADER.match(data)
    if not m or m.group(1) != magic:
        raise InputError(f"{path}: not a binary {magic.decode()} file")
    width, height, maxval = int(m.group(2)), int(m.group(3)), int(m.group(4))
    if maxval != 255:
        raise InputError(f"{path}: only maxval 255 is supported, got {maxval}")
    size = width * height * channels
    body = data[m.end():m.end() + size]
    if len(body) != size:
        raise InputError(f"{path}: truncated pixel data ({len(body)} of {size} bytes)")
    arr = np.frombuffer(body, dtype=np.uint8)
    shape = (height, width, channels) if channels > 1 else (height, width)
    return arr.reshape(shape).copy()


def read_ppm(path):
    """Read a P6 image as an ``(H, W, 3)`` uint8 array."""
    return _read_pnm(path, b"P6", 3)


def write_ppm(path, rgb):
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w = rgb.shape[:2]
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + rgb.tobytes())


def read_pgm(path):
    return _read_pnm(path, b"P5", 1)


def write_pgm(path, gray):
    gray = np.asarray(gray, dtype=np.uint8)
    h, w = gray.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + gray.tobytes())


def weight_map_image(weights, rows=8, cols=8):
    """Patch weights in [0, 1] as a ``rows x cols`` 8-bit grey image."""
    w = np.clip(np.asarray(weights, dtype=float), 0.0, 1.0).reshape(rows, cols)
    return np.round(255.0 * w).astype(np.uint8)


def read_boxes(path):
    boxes = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            boxes.append(BoundingBox.parse(line))
    return boxes


def write_boxes(path, boxes, confidences=None):
    lines = []
    for i, b in enumerate(boxes):
        row = f"{b.x},{b.y},{b.w},{b.h}"
        if confidences is not None:
            row += f",{confidences[i]:.6f}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n")


def list_frames(directory):
    """PPM files of a sequence directory in lexicographic order."""
    frames = sorted(Path(directory).glob("*.ppm"))
    if not frames:
        raise InputError(f"no .ppm frames found in {directory}")
    return frames
