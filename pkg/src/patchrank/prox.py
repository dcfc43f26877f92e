"""Proximal operators for the ALM subproblems.

Every operator returns a new array and leaves its input untouched.
"""
import numpy as np

from patchrank.errors import NumericError, ParameterError


def _check_tau(tau):
    if tau < 0:
        raise ParameterError(f"threshold must be nonnegative, got {tau}")


def soft_threshold(M, tau):
    """Elementwise shrinkage, the prox of ``tau * ||.||_1``."""
    _check_tau(tau)
    M = np.asarray(M, dtype=float)
    return np.sign(M) * np.maximum(np.abs(M) - tau, 0.0)


def svt(M, tau):
    """Singular value thresholding, the prox of ``tau * ||.||_*``.

    Uses a full SVD; the matrices seen by the solver are at most a few
    hundred on a side.
    """
    _check_tau(tau)
    M = np.asarray(M, dtype=float)
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            f"SVD did not converge on a {M.shape[0]}x{M.shape[1]} matrix "
            f"(max |entry| {np.max(np.abs(M)):.3g}): {exc}"
        ) from exc
    s = np.maximum(s - tau, 0.0)
    keep = s > 0
    if not keep.any():
        return np.zeros_like(M)
    return (U[:, keep] * s[keep]) @ Vt[keep]


def l21_shrink(M, tau, axis=1):
    """Group shrinkage, the prox of ``tau * ||.||_{2,1}``.

    ``axis=1`` groups rows (norm taken along each row), ``axis=0`` groups
    columns. Groups with norm at most ``tau`` are zeroed.
    """
    _check_tau(tau)
    if axis not in (0, 1):
        raise ParameterError(f"axis must be 0 or 1, got {axis}")
    M = np.asarray(M, dtype=float)
    norms = np.linalg.norm(M, axis=axis, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > tau, 1.0 - tau / norms, 0.0)
    return M * scale


def nonneg_project(M):
    """Euclidean projection onto the nonnegative orthant."""
    return np.maximum(np.asarray(M, dtype=float), 0.0)


def l21_norm(M, axis=1):
    return float(np.sum(np.linalg.norm(M, axis=axis)))


def nuclear_norm(M):
    return float(np.sum(np.linalg.svd(M, compute_uv=False)))
