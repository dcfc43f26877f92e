"""Patch partitioning, per-patch colour/gradient features and weight fusion."""
import math
from dataclasses import dataclass

import numpy as np

from patchrank.errors import BackgroundUnavailable, InputError, StructuralError

GRID = 8
COLOR_BINS = 8
ORIENT_BINS = 8
FEATURE_DIM = 3 * COLOR_BINS + ORIENT_BINS


@dataclass(frozen=True)
class BoundingBox:
    x: int
    y: int
    w: int
    h: int

    @property
    def center(self):
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def shifted(self, dx, dy):
        return BoundingBox(self.x + dx, self.y + dy, self.w, self.h)

    def as_tuple(self):
        return (self.x, self.y, self.w, self.h)

    @classmethod
    def parse(cls, text):
        parts = [p for p in text.replace("\t", ",").replace(" ", ",").split(",") if p]
        if len(parts) < 4:
            raise InputError(f"expected 'x,y,w,h', got {text!r}")
        x, y, w, h = (int(round(float(p))) for p in parts[:4])
        return cls(x, y, w, h)


def iou(a, b):
    ix = max(0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    return inter / union if union > 0 else 0.0


def grayscale(rgb):
    rgb = np.asarray(rgb, dtype=float)
    return rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114


def gradients(gray):
    """Gradient magnitude and unsigned orientation in [0, pi).

    Central differences in the interior, one-sided at the border.
    """
    gray = np.asarray(gray, dtype=float)
    gy = np.gradient(gray, axis=0) if gray.shape[0] > 1 else np.zeros_like(gray)
    gx = np.gradient(gray, axis=1) if gray.shape[1] > 1 else np.zeros_like(gray)
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), np.pi)
    return mag, ang


def _orient_bin(ang):
    return np.minimum((ang * (ORIENT_BINS / np.pi)).astype(int), ORIENT_BINS - 1)


def _pixel_channels(rgb, mag, ang):
    """Per-pixel one-hot contributions to the 32 histogram bins, shape (H, W, 32)."""
    rgb = np.asarray(rgb)
    H, W = rgb.shape[:2]
    out = np.zeros((H, W, FEATURE_DIM))
    rows, cols = np.indices((H, W))
    for ch in range(3):
        bins = rgb[..., ch].astype(int) * COLOR_BINS // 256
        out[rows, cols, ch * COLOR_BINS + bins] = 1.0
    # gradient magnitudes live on a 0..~180 scale, colour bins on counts
    out[rows, cols, 3 * COLOR_BINS + _orient_bin(ang)] = mag / 255.0
    return out


def _normalize_columns(F, axis):
    norms = np.linalg.norm(F, axis=axis, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(norms > 0, F / norms, 0.0)


def extract_feature(pixels, grad=None):
    """32-dim descriptor of one patch: 3x8 colour bins then 8 orientation bins.

    ``grad`` optionally supplies precomputed ``(magnitude, orientation)`` for
    the patch pixels, e.g. taken from whole-frame gradients; otherwise they
    are computed within the patch. The result is L2-normalised.
    """
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.shape[0] * pixels.shape[1] == 0:
        raise InputError(f"patch must be a non-empty HxWx3 array, got shape {pixels.shape}")
    if grad is None:
        grad = gradients(grayscale(pixels))
    hist = _pixel_channels(pixels, *grad).sum(axis=(0, 1))
    return _normalize_columns(hist, axis=0)


def _edges(start, length, parts):
    step = length // parts
    e = start + step * np.arange(parts + 1)
    e[-1] = start + length
    return e


def patch_edges(box, rows=GRID, cols=GRID):
    """Column and row pixel edges of the patch tiling; remainder goes to the last patch."""
    return _edges(box.x, box.w, cols), _edges(box.y, box.h, rows)


class FrameFeatures:
    """Integral histograms of one frame, for fast per-patch features of many boxes."""

    def __init__(self, frame):
        frame = np.asarray(frame)
        if frame.ndim != 3 or frame.shape[2] != 3:
            raise InputError(f"frame must be HxWx3, got {frame.shape}")
        self.frame = frame
        self.height, self.width = frame.shape[:2]
        mag, ang = gradients(grayscale(frame))
        self.mag, self.ang = mag, ang
        chans = _pixel_channels(frame, mag, ang)
        integral = np.zeros((self.height + 1, self.width + 1, FEATURE_DIM))
        integral[1:, 1:] = chans.cumsum(0).cumsum(1)
        self.integral = integral

    def contains(self, box):
        return box.x >= 0 and box.y >= 0 and box.x + box.w <= self.width and box.y + box.h <= self.height

    def rect_histograms(self, x0, y0, x1, y1):
        """Raw histograms of rectangles ``[x0, x1) x [y0, y1)``; arrays broadcast."""
        I = self.integral
        return I[y1, x1] - I[y0, x1] - I[y1, x0] + I[y0, x0]

    def grid_features(self, boxes, rows=GRID, cols=GRID):
        """Normalised features for each box, shape ``(len(boxes), 32, rows*cols)``."""
        xe = np.stack([_edges(b.x, b.w, cols) for b in boxes])
        ye = np.stack([_edges(b.y, b.h, rows) for b in boxes])
        x0 = xe[:, None, :-1]
        x1 = xe[:, None, 1:]
        y0 = ye[:, :-1, None]
        y1 = ye[:, 1:, None]
        H = self.rect_histograms(x0, y0, x1, y1)  # (N, rows, cols, 32)
        H = H.reshape(len(boxes), rows * cols, FEATURE_DIM).transpose(0, 2, 1)
        return _normalize_columns(H, axis=1)


@dataclass(frozen=True)
class PatchGrid:
    box: BoundingBox
    rows: int
    cols: int
    features: np.ndarray
    x_edges: np.ndarray
    y_edges: np.ndarray

    @property
    def n(self):
        return self.rows * self.cols

    def centers(self):
        cx = 0.5 * (self.x_edges[:-1] + self.x_edges[1:])
        cy = 0.5 * (self.y_edges[:-1] + self.y_edges[1:])
        return np.tile(cx, self.rows), np.repeat(cy, self.cols)


def partition(frame, box, rows=GRID, cols=GRID, frame_features=None):
    """Tile ``box`` into ``rows x cols`` patches and featurise each patch."""
    ff = frame_features if frame_features is not None else FrameFeatures(frame)
    if box.w < cols or box.h < rows:
        raise InputError(f"box {box.w}x{box.h} is smaller than the {cols}x{rows} patch grid")
    if not ff.contains(box):
        raise InputError(f"box {box.as_tuple()} is not inside the {ff.width}x{ff.height} frame")
    xe, ye = patch_edges(box, rows, cols)
    X = ff.grid_features([box], rows, cols)[0]
    return PatchGrid(box, rows, cols, X, xe, ye)


def foreground_queries(grid, shrink=0.6):
    """Indicator of patches whose centre lies in the box shrunk by ``shrink`` about its centre."""
    if not 0 < shrink < 1:
        raise InputError(f"shrink ratio must lie in (0, 1), got {shrink}")
    box = grid.box
    bx, by = box.center
    hw, hh = 0.5 * shrink * box.w, 0.5 * shrink * box.h
    cx, cy = grid.centers()
    inside = (np.abs(cx - bx) <= hw) & (np.abs(cy - by) <= hh)
    if not inside.any():
        # degenerate shrink: keep the patch(es) nearest the box centre
        d = np.maximum(np.abs(cx - bx) / box.w, np.abs(cy - by) / box.h)
        inside = np.isclose(d, d.min())
    return inside.astype(float)


@dataclass(frozen=True)
class BackgroundProblem:
    """Patch set for the background ranking: the box grid plus a surrounding ring.

    ``features`` and ``prior`` cover only the ``valid`` cells of the extended
    ``rows x cols`` grid; ``inner`` maps each of the box's patches (row-major)
    to its index in that reduced set.
    """
    rows: int
    cols: int
    valid: np.ndarray
    features: np.ndarray
    queries: np.ndarray
    inner: np.ndarray
    ring: int


def ring_width(expand, grid=GRID):
    if expand <= 1:
        raise InputError(f"expand ratio must exceed 1, got {expand}")
    return max(1, math.ceil(grid * (expand - 1.0) / 2.0 - 1e-9))


def background_problem(ff, box, expand=1.4, rows=GRID, cols=GRID):
    """Extended grid around ``box`` whose ring patches act as background queries.

    Ring patches that do not lie fully inside the frame are dropped. Raises
    ``BackgroundUnavailable`` when none survive.
    """
    m = ring_width(expand, max(rows, cols))
    pw, ph = box.w // cols, box.h // rows
    xe, ye = patch_edges(box, rows, cols)
    xe = np.concatenate([box.x - pw * np.arange(m, 0, -1), xe, xe[-1] + pw * np.arange(1, m + 1)])
    ye = np.concatenate([box.y - ph * np.arange(m, 0, -1), ye, ye[-1] + ph * np.arange(1, m + 1)])
    R, C = rows + 2 * m, cols + 2 * m
    x0, x1 = xe[:-1], xe[1:]
    y0, y1 = ye[:-1], ye[1:]
    inframe_x = (x0 >= 0) & (x1 <= ff.width)
    inframe_y = (y0 >= 0) & (y1 <= ff.height)
    valid = (inframe_y[:, None] & inframe_x[None, :]).ravel()
    r, c = np.divmod(np.arange(R * C), C)
    is_inner = (r >= m) & (r < m + rows) & (c >= m) & (c < m + cols)
    ring = valid & ~is_inner
    if not ring.any():
        raise BackgroundUnavailable("no background ring patch lies inside the frame")
    xs0 = np.clip(x0, 0, ff.width)[None, :]
    xs1 = np.clip(x1, 0, ff.width)[None, :]
    ys0 = np.clip(y0, 0, ff.height)[:, None]
    ys1 = np.clip(y1, 0, ff.height)[:, None]
    H = ff.rect_histograms(xs0, ys0, xs1, ys1).reshape(R * C, FEATURE_DIM).T
    F = _normalize_columns(H, axis=0)[:, valid]
    index = -np.ones(R * C, dtype=int)
    index[valid] = np.arange(valid.sum())
    inner = index[is_inner]
    return BackgroundProblem(R, C, valid, F, ring[valid].astype(float), inner, m)


def fuse_weights(v, u, eps=43.0):
    """Logistic fusion of foreground and background rankings into (0, 1) weights."""
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    if v.shape != u.shape:
        raise StructuralError(f"v {v.shape} and u {u.shape} differ in shape")
    z = eps * (v - u)
    # numerically stable logistic; exactly 0.5 at z == 0
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def weighted_descriptor(Xc, w):
    """Scale each patch column of ``Xc`` by its weight."""
    Xc = np.asarray(Xc, dtype=float)
    w = np.asarray(w, dtype=float)
    if Xc.shape[-1] != w.size:
        raise StructuralError(f"descriptor has {Xc.shape[-1]} patches but {w.size} weights")
    return Xc * w
