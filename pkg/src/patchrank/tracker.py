"""Tracking by detection with ranking-weighted patch descriptors.

Each frame: rank the patches at the previous box location, fuse the
foreground and background rankings into patch weights, weight the
descriptor of every candidate window, score candidates with a mix of three
linear classifiers and update the newest classifier when the result is
confident enough.
"""
import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from patchrank.errors import BackgroundUnavailable, ParameterError
from patchrank.features import (
    GRID, BoundingBox, FrameFeatures, background_problem, foreground_queries,
    fuse_weights, iou, partition, weighted_descriptor,
)
from patchrank.graph import build_prior_graph
from patchrank.model import MemoryFrame, Params, RankingInstance
from patchrank.solver import solve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrackerConfig:
    shrink: float = 0.6
    expand: float = 1.4
    fuse_eps: float = 43.0
    alpha1: float = 0.63
    alpha2: float = 0.07
    alpha3: float = 0.03
    theta: float = 0.3
    min_side: int = 32
    stride: int = 2
    pa_c: float = 1.0
    max_violators: int = 16
    negative_iou: float = 0.5
    init_passes: int = 5
    ranking_mode: str = "full"
    # False: all patch weights fixed to 1 (unweighted baseline)
    use_weights: bool = True

    def override(self, **updates):
        types = {f.name: f.type for f in dataclasses.fields(self)}
        clean = {}
        for key, val in updates.items():
            if key not in types:
                raise ParameterError(f"unknown tracker parameter {key!r}")
            t = types[key]
            if t in (bool, "bool"):
                clean[key] = val if isinstance(val, bool) else str(val).lower() in ("1", "true", "yes")
            elif t in (int, "int"):
                clean[key] = int(val)
            elif t in (str, "str"):
                clean[key] = str(val)
            else:
                clean[key] = float(val)
        return dataclasses.replace(self, **clean)


@dataclass
class ClassifierBank:
    h_first: np.ndarray
    h_prev2: np.ndarray
    h_prev1: np.ndarray
    alpha1: float = 0.63
    alpha2: float = 0.07
    alpha3: float = 0.03

    @classmethod
    def from_single(cls, h, cfg=None):
        cfg = cfg or TrackerConfig()
        return cls(h.copy(), h.copy(), h.copy(), cfg.alpha1, cfg.alpha2, cfg.alpha3)

    def combined(self):
        return self.alpha1 * self.h_prev1 + self.alpha2 * self.h_prev2 + self.alpha3 * self.h_first

    def copy(self):
        return dataclasses.replace(self, h_first=self.h_first.copy(),
                                   h_prev2=self.h_prev2.copy(), h_prev1=self.h_prev1.copy())


def score(bank, Xw):
    """Mixed classifier score of one weighted descriptor."""
    x = np.ravel(Xw)
    return float(bank.alpha1 * (bank.h_prev1 @ x) + bank.alpha2 * (bank.h_prev2 @ x)
                 + bank.alpha3 * (bank.h_first @ x))


def score_many(bank, Xw):
    """Scores of a stack of descriptors, shape ``(N, ...)``."""
    return Xw.reshape(len(Xw), -1) @ bank.combined()


def select(boxes, scores, prev_box):
    """Best-scoring candidate and a confidence in [0, 1].

    Confidence is the winner's lead over the mean score, relative to the
    score range; 1.0 when all scores are equal. Ties go to the candidate
    closest to ``prev_box``.
    """
    scores = np.asarray(scores, dtype=float)
    top = scores.max()
    best = np.flatnonzero(scores == top)
    if best.size > 1:
        px, py = prev_box.center
        d = [math.hypot(boxes[i].center[0] - px, boxes[i].center[1] - py) for i in best]
        best = best[int(np.argmin(d))]
    else:
        best = best[0]
    spread = top - scores.min()
    conf = 1.0 if spread <= 0 else float((top - scores.mean()) / spread)
    return int(best), conf


def pa_step(h, x_pos, x_neg, overlap, c=1.0):
    """One passive-aggressive step on the pair margin; returns (h, loss before)."""
    diff = (x_pos - x_neg).ravel()
    loss = (1.0 - overlap) - float(h @ diff)
    nrm = float(diff @ diff)
    if loss <= 0 or nrm == 0:
        return h, loss
    return h + min(c, loss / nrm) * diff, loss


def _pa_update(h, x_sel, pool, overlaps, cfg):
    neg = np.flatnonzero(overlaps < cfg.negative_iou)
    if neg.size == 0:
        return h
    flat_pool = pool.reshape(len(pool), -1)
    xs = np.ravel(x_sel)
    margins = (xs @ h) - flat_pool[neg] @ h
    losses = (1.0 - overlaps[neg]) - margins
    order = np.argsort(-losses, kind="stable")
    worst = [neg[i] for i in order[:cfg.max_violators] if losses[i] > 0]
    for i in worst:
        h, _ = pa_step(h, xs, flat_pool[i], overlaps[i], cfg.pa_c)
    return h


def update_classifier(bank, x_sel, pool, pool_boxes, sel_box, confidence, cfg=None):
    """Gated structured update of the newest classifier.

    Below the confidence threshold the bank is returned unchanged. Otherwise
    history rotates (``h_prev2 <- h_prev1``) and ``h_prev1`` takes
    passive-aggressive steps against the worst margin violators among
    candidates overlapping the selection by less than ``negative_iou``.
    """
    cfg = cfg or TrackerConfig()
    if confidence <= cfg.theta:
        return bank
    overlaps = np.array([iou(b, sel_box) for b in pool_boxes])
    new = bank.copy()
    new.h_prev2 = bank.h_prev1.copy()
    new.h_prev1 = _pa_update(bank.h_prev1.copy(), x_sel, pool, overlaps, cfg)
    return new


def preprocess_scale(box, min_side=32):
    """Upscale factor making the box's shorter side ``min_side``; 1 if already large enough."""
    short = min(box.w, box.h)
    return min_side / short if short < min_side else 1.0


def scale_box(box, s):
    if s == 1.0:
        return box
    return BoundingBox(int(round(box.x * s)), int(round(box.y * s)),
                       int(round(box.w * s)), int(round(box.h * s)))


def scale_frame(frame, s):
    if s == 1.0:
        return frame
    h, w = frame.shape[:2]
    img = Image.fromarray(np.asarray(frame, dtype=np.uint8))
    return np.asarray(img.resize((int(round(w * s)), int(round(h * s))), Image.BILINEAR))


def preprocess(frame, box, min_side=32):
    """Rescale frame and box so the box's shorter side is at least ``min_side``.

    Returns ``(frame, box, scale)``; divide coordinates by ``scale`` to map back.
    """
    s = preprocess_scale(box, min_side)
    return scale_frame(frame, s), scale_box(box, s), s


def candidates(prev_box, width, height, stride=2):
    """Same-size windows on a ``stride`` grid whose centres lie in the search square.

    The square has side ``2*sqrt(w*h)`` about the previous centre; windows
    not fully inside the frame are dropped.
    """
    half = math.sqrt(prev_box.w * prev_box.h)
    k = int(math.floor(half / stride + 1e-9))
    offs = stride * np.arange(-k, k + 1)
    out = []
    for dy in offs:
        for dx in offs:
            b = prev_box.shifted(int(dx), int(dy))
            if b.x >= 0 and b.y >= 0 and b.x + b.w <= width and b.y + b.h <= height:
                out.append(b)
    return out


@dataclass
class TrackRecord:
    box: BoundingBox
    confidence: float
    weights: np.ndarray
    lost: bool = False


@dataclass
class Trajectory:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def boxes(self):
        return [r.box for r in self.records]

    @property
    def confidences(self):
        return [r.confidence for r in self.records]


def patch_weights(ff, box, memory, params, cfg):
    """Rank the patches of ``box`` and fuse with the background ranking.

    Returns ``(X, v, w)``: patch features, foreground ranking and fused weights.
    """
    grid = partition(ff.frame, box, frame_features=ff)
    X = grid.features
    if not cfg.use_weights:
        return X, np.ones(grid.n), np.ones(grid.n)
    S = build_prior_graph(GRID, GRID, X)
    y = foreground_queries(grid, cfg.shrink)
    inst = RankingInstance(X, y, S.weights, tuple(memory), params)
    v = solve(inst, cfg.ranking_mode).v
    try:
        bg = background_problem(ff, box, cfg.expand)
        S_bg = build_prior_graph(bg.rows, bg.cols, bg.features, cells=bg.valid)
        bg_mode = "noG" if cfg.ranking_mode == "noG" else "full"
        u = solve(RankingInstance(bg.features, bg.queries, S_bg.weights, (), params), bg_mode).v[bg.inner]
    except BackgroundUnavailable:
        log.info("background ring unavailable at %s; using u = 0", box.as_tuple())
        u = np.zeros(grid.n)
    return X, v, fuse_weights(v, u, cfg.fuse_eps)


def _train_initial(ff, box, w, cfg):
    pool_boxes = candidates(box, ff.width, ff.height, cfg.stride)
    pool = weighted_descriptor(ff.grid_features(pool_boxes), w)
    x_pos = weighted_descriptor(ff.grid_features([box])[0], w)
    overlaps = np.array([iou(b, box) for b in pool_boxes])
    h = np.zeros(x_pos.size)
    for _ in range(cfg.init_passes):
        h = _pa_update(h, x_pos, pool, overlaps, cfg)
    return h


def track(frames, init_box, params=None, cfg=None):
    """Track ``init_box`` through ``frames`` (an iterable of HxWx3 uint8 arrays).

    Boxes in the returned trajectory are in the input frames' coordinates.
    """
    params = params or Params()
    cfg = cfg or TrackerConfig()
    frames = iter(frames)
    first = np.asarray(next(frames))
    s = preprocess_scale(init_box, cfg.min_side)
    box = scale_box(init_box, s)
    ff = FrameFeatures(scale_frame(first, s))

    X, v, w = patch_weights(ff, box, (), params, cfg)
    mem_first = MemoryFrame(X, v, params.delta_first)
    mem_prev = MemoryFrame(X, v, params.delta_prev)
    bank = ClassifierBank.from_single(_train_initial(ff, box, w, cfg), cfg)
    traj = Trajectory([TrackRecord(init_box, 1.0, w)])

    for t, frame in enumerate(frames, start=2):
        ff = FrameFeatures(scale_frame(np.asarray(frame), s))
        pool_boxes = candidates(box, ff.width, ff.height, cfg.stride)
        if not pool_boxes or not ff.contains(box):
            log.warning("frame %d: tracking lost, keeping last box", t)
            traj.records.append(TrackRecord(_unscale(box, s), 0.0, traj.records[-1].weights, lost=True))
            continue
        X, v, w = patch_weights(ff, box, (mem_prev, mem_first), params, cfg)
        pool = weighted_descriptor(ff.grid_features(pool_boxes), w)
        scores = score_many(bank, pool)
        i, conf = select(pool_boxes, scores, box)
        bank = update_classifier(bank, pool[i], pool, pool_boxes, pool_boxes[i], conf, cfg)
        mem_prev = MemoryFrame(X, v, params.delta_prev)
        box = pool_boxes[i]
        traj.records.append(TrackRecord(_unscale(box, s), conf, w))
    return traj


def _unscale(box, s):
    return scale_box(box, 1.0 / s) if s != 1.0 else box
