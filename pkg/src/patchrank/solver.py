"""Inexact ALM solver for the graph-optimised, temporally coherent ranking model.

The update order within an iteration is U, B, A, E, Z, v, w, b followed by
the multiplier step. Each update is the exact minimiser of its block
subproblem; the ``sub_*`` functions evaluate those subproblems so callers
can check that.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from patchrank.errors import NumericError, ParameterError
from patchrank.graph import laplacian, pairwise_sq
from patchrank.model import SolverState, objective_eq4, prediction_loss, residuals
from patchrank.prox import l21_norm, l21_shrink, nonneg_project, nuclear_norm, soft_threshold, svt

MODES = ("full", "noT", "noG")


def _sq(M):
    return float(np.sum(M * M))


# -- block updates ----------------------------------------------------------

def update_U(state, params):
    return soft_threshold(state.Z + state.Y2 / state.mu, params.alpha / state.mu)


def update_B(state, params):
    # argument is Z + Y3/mu: the thresholded matrix must be the one in the subproblem
    return svt(state.Z + state.Y3 / state.mu, params.gamma / state.mu)


def update_A(state, params, R=None):
    if R is None:
        R = pairwise_sq(state.v)
    mu = state.mu
    return nonneg_project(state.Z + state.Y4 / mu - (params.beta2 / (2.0 * mu)) * R)


def update_E(state, inst, params):
    X = inst.X
    return l21_shrink(X - X @ state.Z + state.Y1 / state.mu, 1.0 / state.mu, axis=params.l21_axis)


def update_Z(state, inst, params):
    X, mu = inst.X, state.mu
    n = inst.n
    XtX = X.T @ X
    c = 2.0 * params.beta1 / mu
    lhs = XtX + (3.0 + c) * np.eye(n)
    rhs = (XtX - X.T @ state.E + state.B + state.A + state.U + c * inst.S
           + (X.T @ state.Y1 - state.Y2 - state.Y3 - state.Y4) / mu)
    try:
        return scipy.linalg.solve(lhs, rhs, assume_a="pos")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"Z system solve failed: {exc}", state.iter, "Z") from exc


def update_v(state, inst, params):
    n = inst.n
    L = laplacian(state.Z)
    lhs = (params.delta + params.lam) * np.eye(n) + params.beta2 * L
    rhs = params.lam * inst.y + params.delta * (inst.X.T @ state.w + state.b)
    try:
        return np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"v system is singular: {exc}", state.iter, "v") from exc


def update_w(state, inst, params, memory=None):
    memory = inst.memory if memory is None else memory
    X, b = inst.X, state.b
    G = params.delta * X @ X.T + params.ridge * np.eye(inst.p)
    rhs = params.delta * X @ (state.v - b)
    for m in memory:
        G += m.delta * m.X @ m.X.T
        rhs += m.delta * m.X @ (m.v - b)
    try:
        return scipy.linalg.solve(G, rhs, assume_a="pos")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"w system solve failed: {exc}", state.iter, "w") from exc


def update_b(state, inst, params, memory=None):
    memory = inst.memory if memory is None else memory
    n, w = inst.n, state.w
    num = params.delta * float(np.sum(inst.X.T @ w - state.v))
    den = params.delta
    for m in memory:
        num += m.delta * float(np.sum(m.X.T @ w - m.v))
        den += m.delta
    if den == 0:
        return 0.0
    return -num / (n * den)


def step_multipliers(state, inst, params):
    """Dual ascent on the four constraints and the penalty increase, in place."""
    mu, X, Z = state.mu, inst.X, state.Z
    state.Y1 = state.Y1 + mu * (X - X @ Z - state.E)
    state.Y2 = state.Y2 + mu * (Z - state.U)
    state.Y3 = state.Y3 + mu * (Z - state.B)
    state.Y4 = state.Y4 + mu * (Z - state.A)
    state.mu = min(params.mu_max, params.rho * mu)
    return state


# -- block subproblem objectives --------------------------------------------

def sub_U(U, state, params):
    return params.alpha * float(np.abs(U).sum()) + 0.5 * state.mu * _sq(state.Z - U + state.Y2 / state.mu)


def sub_B(B, state, params):
    return params.gamma * nuclear_norm(B) + 0.5 * state.mu * _sq(state.Z - B + state.Y3 / state.mu)


def sub_A(A, state, params, R=None):
    if R is None:
        R = pairwise_sq(state.v)
    if np.any(A < 0):
        return math.inf
    return 0.5 * params.beta2 * float(np.sum(A * R)) + 0.5 * state.mu * _sq(state.Z - A + state.Y4 / state.mu)


def sub_E(E, state, inst, params):
    X = inst.X
    return l21_norm(E, axis=params.l21_axis) + 0.5 * state.mu * _sq(X - X @ state.Z - E + state.Y1 / state.mu)


def sub_Z(Z, state, inst, params):
    X, mu = inst.X, state.mu
    return params.beta1 * _sq(Z - inst.S) + 0.5 * mu * (
        _sq(X - X @ Z - state.E + state.Y1 / mu)
        + _sq(Z - state.U + state.Y2 / mu)
        + _sq(Z - state.B + state.Y3 / mu)
        + _sq(Z - state.A + state.Y4 / mu)
    )


def sub_v(v, state, inst, params):
    r = inst.X.T @ state.w + state.b - v
    return (params.beta2 * float(v @ laplacian(state.Z) @ v)
            + params.delta * float(r @ r) + params.lam * _sq(v - inst.y))


def sub_wb(w, b, state, inst, params, memory=None):
    return prediction_loss(inst, w, b, state.v, memory)


# -- driver -------------------------------------------------------------------

@dataclass
class RankingResult:
    v: np.ndarray
    w: np.ndarray
    b: float
    Z: np.ndarray
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)
    state: SolverState = None

    def write_trace(self, path):
        write_trace_csv(self.trace, path)


TRACE_FIELDS = ("iter", "mu", "objective", "r1", "r2", "r3", "r4", "max_delta")


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_FIELDS)
        writer.writeheader()
        for row in trace:
            writer.writerow({k: row[k] for k in TRACE_FIELDS})


def _finite(value, name, it):
    if not np.all(np.isfinite(value)):
        raise NumericError(f"non-finite values in {name} at iteration {it}", it, name)
    return value


def _max_change(new, old):
    return float(np.max(np.abs(np.asarray(new) - np.asarray(old)))) if np.size(new) else 0.0


def _check_decrease(name, before, after, it):
    if after > before + 1e-9 * (1.0 + abs(before)):
        raise NumericError(f"{name}-update increased its subproblem objective "
                           f"({before:.12g} -> {after:.12g}) at iteration {it}", it, name)


def solve(inst, mode="full", *, check=False, state=None, callback=None):
    """Run the ALM iterations on ``inst`` and return the ranking.

    ``mode="noT"`` drops the memory terms, ``mode="noG"`` freezes the graph
    at the prior ``S`` and only alternates the v, w, b updates. With
    ``check=True`` every block update is verified to not increase its own
    subproblem objective. ``callback(iteration, state)`` is invoked after
    every iteration; the state must not be modified.
    """
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    inst.validate()
    prm = inst.params
    memory = () if mode == "noT" else inst.memory
    if mode == "noT":
        inst = inst.replace(memory=())
    st = SolverState.zeros(inst) if state is None else state.copy()
    learn_graph = mode != "noG"
    if not learn_graph:
        X, S = inst.X, inst.S
        st.Z, st.U, st.B, st.A = S.copy(), S.copy(), S.copy(), S.copy()
        st.E = X - X @ S

    trace = []
    converged = False
    for it in range(1, prm.max_iter + 1):
        st.iter = it
        prev = (st.E, st.Z, st.U, st.B, st.A, st.v, st.w, np.array([st.b]))
        if learn_graph:
            R = pairwise_sq(st.v)
            new = update_U(st, prm)
            if check:
                _check_decrease("U", sub_U(st.U, st, prm), sub_U(new, st, prm), it)
            st.U = _finite(new, "U", it)
            new = update_B(st, prm)
            if check:
                _check_decrease("B", sub_B(st.B, st, prm), sub_B(new, st, prm), it)
            st.B = _finite(new, "B", it)
            new = update_A(st, prm, R)
            if check:
                _check_decrease("A", sub_A(st.A, st, prm, R), sub_A(new, st, prm, R), it)
            st.A = _finite(new, "A", it)
            new = update_E(st, inst, prm)
            if check:
                _check_decrease("E", sub_E(st.E, st, inst, prm), sub_E(new, st, inst, prm), it)
            st.E = _finite(new, "E", it)
            new = update_Z(st, inst, prm)
            if check:
                _check_decrease("Z", sub_Z(st.Z, st, inst, prm), sub_Z(new, st, inst, prm), it)
            st.Z = _finite(new, "Z", it)

        new = update_v(st, inst, prm)
        if check:
            _check_decrease("v", sub_v(st.v, st, inst, prm), sub_v(new, st, inst, prm), it)
        st.v = _finite(new, "v", it)
        new = update_w(st, inst, prm, memory)
        if check:
            _check_decrease("w", sub_wb(st.w, st.b, st, inst, prm, memory),
                            sub_wb(new, st.b, st, inst, prm, memory), it)
        st.w = _finite(new, "w", it)
        new = update_b(st, inst, prm, memory)
        if check:
            _check_decrease("b", sub_wb(st.w, st.b, st, inst, prm, memory),
                            sub_wb(st.w, new, st, inst, prm, memory), it)
        st.b = float(_finite(new, "b", it))

        if learn_graph:
            step_multipliers(st, inst, prm)
            for name in ("Y1", "Y2", "Y3", "Y4"):
                _finite(getattr(st, name), name, it)

        cur = (st.E, st.Z, st.U, st.B, st.A, st.v, st.w, np.array([st.b]))
        max_delta = max(_max_change(a, b) for a, b in zip(cur, prev))
        res = residuals(st, inst)
        trace.append({
            "iter": it, "mu": st.mu, "objective": objective_eq4(st, inst),
            "r1": res[0], "r2": res[1], "r3": res[2], "r4": res[3], "max_delta": max_delta,
        })
        if callback is not None:
            callback(it, st)
        if max_delta <= prm.eps_conv and max(res) <= prm.eps_conv:
            converged = True
            break

    return RankingResult(v=st.v.copy(), w=st.w.copy(), b=st.b, Z=st.Z.copy(),
                         iterations=len(trace), converged=converged, trace=trace, state=st)
