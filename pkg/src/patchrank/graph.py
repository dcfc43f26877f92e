"""Prior patch graph and Laplacian-style helpers."""
from dataclasses import dataclass

import numpy as np

from patchrank.errors import StructuralError


@dataclass(frozen=True)
class PatchAdjacency:
    grid_rows: int
    grid_cols: int
    weights: np.ndarray

    @property
    def n(self):
        return self.grid_rows * self.grid_cols


def grid_neighbors(rows, cols):
    """Boolean ``(rows*cols, rows*cols)`` mask of 8-connected grid cells.

    Cells are numbered row-major.
    """
    r, c = np.divmod(np.arange(rows * cols), cols)
    dr = np.abs(r[:, None] - r[None, :])
    dc = np.abs(c[:, None] - c[None, :])
    return (np.maximum(dr, dc) == 1)


def build_prior_graph(rows, cols, features, cells=None):
    """Gaussian-kernel 8-neighbour graph over a ``rows x cols`` patch grid.

    ``features`` holds one column per grid cell, or one per cell selected by
    the boolean ``cells`` mask when only part of the grid is present. The
    bandwidth is the mean feature distance over neighbour pairs, falling
    back to 1 when every neighbour pair is identical.
    """
    X = np.asarray(features, dtype=float)
    mask = grid_neighbors(rows, cols)
    if cells is not None:
        cells = np.asarray(cells, dtype=bool).ravel()
        mask = mask[np.ix_(cells, cells)]
    n = mask.shape[0]
    if X.ndim != 2 or X.shape[1] != n:
        raise StructuralError(f"expected {n} feature columns for a {rows}x{cols} grid, got shape {X.shape}")
    sq = np.sum(X * X, axis=0)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X.T @ X, 0.0)
    iu = np.triu(mask, 1)
    if iu.any():
        sigma = float(np.mean(np.sqrt(d2[iu])))
    else:
        sigma = 0.0
    if sigma <= 0.0:
        sigma = 1.0
    S = np.where(mask, np.exp(-d2 / (2.0 * sigma ** 2)), 0.0)
    S = 0.5 * (S + S.T)
    return PatchAdjacency(rows, cols, S)


def degree(Z):
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
        raise StructuralError(f"degree needs a square matrix, got {Z.shape}")
    return np.diag(Z.sum(axis=1))


def laplacian(Z):
    """``D - Zs`` for the symmetrised ``Zs = (Z + Z.T) / 2``."""
    Zs = 0.5 * (Z + Z.T)
    return degree(Zs) - Zs


def pairwise_sq(v):
    v = np.asarray(v, dtype=float).ravel()
    diff = v[:, None] - v[None, :]
    return diff * diff


def smoothness(Z, v):
    """``1/2 * sum_ij Z_ij (v_i - v_j)^2``."""
    Z = np.asarray(Z, dtype=float)
    v = np.asarray(v, dtype=float).ravel()
    if Z.shape != (v.size, v.size):
        raise StructuralError(f"graph {Z.shape} does not match vector of length {v.size}")
    return 0.5 * float(np.sum(Z * pairwise_sq(v)))
