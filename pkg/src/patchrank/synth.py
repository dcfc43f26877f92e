"""Seeded synthetic ranking instances and image sequences."""
import math
from dataclasses import dataclass

import numpy as np

from patchrank.errors import InputError
from patchrank.features import BoundingBox
from patchrank.graph import build_prior_graph, grid_neighbors
from patchrank.model import MemoryFrame, Params, RankingInstance


def make_rng(seed):
    """Counter-based 64-bit generator; identical streams on every platform."""
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class SyntheticSpec:
    seed: int = 0
    n: int = 32
    p: int = 8
    clusters: int = 2
    separation: float = 3.0
    corruption_fraction: float = 0.0
    queries: int = 4
    # fraction of prior-graph edges whose weight is replaced by noise
    edge_noise: float = 0.0
    # memory-frame perturbation, in units of the feature noise std
    jitter: float = 1.0
    # "block": foreground is a central block of the patch grid, "random": scattered
    layout: str = "block"
    memory_frames: int = 2
    # sequence mode
    frames: int = 50
    motion: float = 2.0
    target_size: int = 32
    frame_width: int = 0
    frame_height: int = 0


def grid_shape(n):
    """Most nearly square ``rows x cols`` factorisation of ``n`` with rows <= cols."""
    rows = max(r for r in range(1, int(math.isqrt(n)) + 1) if n % r == 0)
    return rows, n // rows


def gen_instance(spec, params=None):
    """Cluster-structured ranking instance plus its ground-truth foreground labels.

    Cluster 0 is the foreground; with the default ``block`` layout it
    occupies the central block of a near-square patch grid, the remaining
    clusters tile the surround in column bands. Features are Gaussians around
    cluster means placed ``separation`` apart, with per-dimension noise std
    ``1/sqrt(p)`` so that noise vectors have unit expected squared norm.
    Memory frames are jittered copies of the clean features labelled with
    the truth.
    """
    if spec.clusters < 2:
        raise InputError("need at least two clusters")
    if not 0.0 <= spec.corruption_fraction <= 1.0:
        raise InputError(f"corruption fraction must lie in [0, 1], got {spec.corruption_fraction}")
    if not 0.0 <= spec.edge_noise <= 1.0:
        raise InputError(f"edge noise fraction must lie in [0, 1], got {spec.edge_noise}")
    n, p = spec.n, spec.p
    if n < spec.clusters or p < 1:
        raise InputError(f"cannot place {spec.clusters} clusters on {n} patches")
    rng = make_rng(spec.seed)

    # cluster means: random orthogonal directions, pairwise distance = separation
    Q, _ = np.linalg.qr(rng.standard_normal((p, max(p, spec.clusters))))
    means = Q[:, :spec.clusters] * (spec.separation / math.sqrt(2.0)) if p >= spec.clusters \
        else rng.standard_normal((p, spec.clusters)) * spec.separation / math.sqrt(2.0 * p)
    rows, cols = grid_shape(n)
    if spec.layout == "block":
        r, c = np.divmod(np.arange(n), cols)
        fg = (np.abs(r - (rows - 1) / 2) <= rows / 4) & (np.abs(c - (cols - 1) / 2) <= cols / 4)
        bands = np.minimum(c * (spec.clusters - 1) // cols, spec.clusters - 2) + 1
        assign = np.where(fg, 0, bands)
    elif spec.layout == "random":
        assign = rng.permutation(np.arange(n) % spec.clusters)
    else:
        raise InputError(f"unknown layout {spec.layout!r}")
    labels = (assign == 0).astype(float)
    if labels.sum() == 0 or labels.sum() == n:
        raise InputError(f"grid {rows}x{cols} leaves no foreground/background split")
    sigma = 1.0 / math.sqrt(p)
    clean = means[:, assign] + sigma * rng.standard_normal((p, n))

    X = clean.copy()
    n_bad = int(round(spec.corruption_fraction * n))
    if n_bad:
        bad = rng.choice(n, size=n_bad, replace=False)
        lo, hi = clean.min(), clean.max()
        X[:, bad] = rng.uniform(lo, hi, size=(p, n_bad))

    fg = np.flatnonzero(labels)
    y = np.zeros(n)
    y[rng.choice(fg, size=min(spec.queries, fg.size), replace=False)] = 1.0

    params = params or Params()
    memory = []
    for k in range(spec.memory_frames):
        delta = params.delta_prev if k == 0 else params.delta_first
        Xk = clean + spec.jitter * sigma * rng.standard_normal((p, n))
        memory.append(MemoryFrame(Xk, labels.copy(), delta))

    S = build_prior_graph(rows, cols, X).weights
    if spec.edge_noise > 0:
        S = perturb_edges(S, rows, cols, spec.edge_noise, rng)
    return RankingInstance(X, y, S, tuple(memory), params), labels


def perturb_edges(S, rows, cols, fraction, rng):
    """Replace the weights of a random ``fraction`` of grid edges by uniform noise."""
    S = S.copy()
    iu, ju = np.nonzero(np.triu(grid_neighbors(rows, cols), 1))
    k = int(round(fraction * iu.size))
    pick = rng.choice(iu.size, size=k, replace=False)
    vals = rng.uniform(0.0, 1.0, size=k)
    S[iu[pick], ju[pick]] = vals
    S[ju[pick], iu[pick]] = vals
    return S


def _checker(size, cell, c0, c1):
    r, c = np.indices((size, size))
    mask = ((r // cell) + (c // cell)) % 2 == 0
    out = np.empty((size, size, 3), dtype=np.uint8)
    out[mask] = c0
    out[~mask] = c1
    return out


def gen_sequence(spec):
    """Checker-textured square moving right by ``motion`` px/frame over a cluttered background.

    Returns ``(frames, boxes)``: a list of ``(H, W, 3)`` uint8 arrays and the
    ground-truth box of each frame.
    """
    if spec.frames < 1:
        raise InputError("need at least one frame")
    size = spec.target_size
    margin = size + 8
    travel = spec.motion * (spec.frames - 1)
    width = spec.frame_width or int(math.ceil(2 * margin + size + abs(travel)))
    height = spec.frame_height or 2 * margin + size
    x0 = margin if spec.motion >= 0 else width - margin - size
    y0 = (height - size) // 2
    rng = make_rng(spec.seed)

    # blocky colour clutter, static across the sequence
    blocks = rng.integers(0, 256, size=(height // 4 + 1, width // 4 + 1, 3))
    background = np.repeat(np.repeat(blocks, 4, axis=0), 4, axis=1)[:height, :width]
    background = (0.5 * background + 40).astype(np.uint8)
    target = _checker(size, max(1, size // 4), (230, 40, 40), (250, 220, 30))

    frames, boxes = [], []
    for t in range(spec.frames):
        x = int(round(x0 + spec.motion * t))
        box = BoundingBox(x, y0, size, size)
        if x < 0 or x + size > width or y0 < 0 or y0 + size > height:
            raise InputError(f"target leaves the {width}x{height} frame at frame {t}")
        img = background.copy()
        img[y0:y0 + size, x:x + size] = target
        noise = rng.integers(-6, 7, size=img.shape)
        frames.append(np.clip(img.astype(int) + noise, 0, 255).astype(np.uint8))
        boxes.append(box)
    return frames, boxes
