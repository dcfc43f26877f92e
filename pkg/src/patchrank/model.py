"""Problem data, parameters and the convex objective being minimised."""
import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from patchrank.errors import ParameterError, StructuralError
from patchrank.graph import PatchAdjacency, smoothness
from patchrank.prox import l21_norm, nuclear_norm


@dataclass(frozen=True)
class Params:
    alpha: float = 0.2
    gamma: float = 0.08
    beta1: float = 20.0
    beta2: float = 0.9
    delta: float = 0.3
    lam: float = 1.0
    delta_prev: float = 0.3
    delta_first: float = 0.3
    rho: float = 1.3
    mu0: float = 1e-6
    mu_max: float = 1e10
    eps_conv: float = 1e-6
    max_iter: int = 50
    # ridge added to the w normal equations
    ridge: float = 1e-8
    # 1: ||E||_{2,1} sums row norms, 0: column norms
    l21_axis: int = 1

    def __post_init__(self):
        for name in ("alpha", "gamma", "beta1", "beta2", "delta", "lam",
                     "delta_prev", "delta_first", "mu0", "mu_max", "eps_conv", "ridge"):
            val = getattr(self, name)
            if not math.isfinite(val) or val < 0:
                raise ParameterError(f"{name} must be a finite nonnegative number, got {val}")
        if self.mu0 <= 0 or self.mu_max < self.mu0:
            raise ParameterError("need 0 < mu0 <= mu_max")
        if self.rho <= 1:
            raise ParameterError(f"rho must exceed 1, got {self.rho}")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be at least 1")
        if self.l21_axis not in (0, 1):
            raise ParameterError("l21_axis must be 0 (columns) or 1 (rows)")

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**d)

    def override(self, **updates):
        """Return a copy with ``updates`` applied; values are coerced to the field's type."""
        types = {f.name: f.type for f in dataclasses.fields(self)}
        clean = {}
        for key, val in updates.items():
            key = "lam" if key == "lambda" else key
            if key not in types:
                raise ParameterError(f"unknown parameter {key!r}")
            clean[key] = int(val) if types[key] in (int, "int") else float(val)
        return dataclasses.replace(self, **clean)


@dataclass(frozen=True)
class MemoryFrame:
    X: np.ndarray
    v: np.ndarray
    delta: float


@dataclass(frozen=True)
class RankingInstance:
    X: np.ndarray
    y: np.ndarray
    S: np.ndarray
    memory: tuple = ()
    params: Params = field(default_factory=Params)

    def __post_init__(self):
        S = self.S.weights if isinstance(self.S, PatchAdjacency) else self.S
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise StructuralError(f"X must be a matrix, got shape {X.shape}")
        p, n = X.shape
        y = np.asarray(self.y, dtype=float).ravel()
        S = np.asarray(S, dtype=float)
        if y.size != n:
            raise StructuralError(f"y has {y.size} entries but X has {n} columns")
        if S.shape != (n, n):
            raise StructuralError(f"S must be {n}x{n}, got {S.shape}")
        mem = []
        for m in self.memory:
            mX = np.asarray(m.X, dtype=float)
            mv = np.asarray(m.v, dtype=float).ravel()
            if mX.shape != (p, n) or mv.size != n:
                raise StructuralError(f"memory frame shapes {mX.shape}/{mv.size} do not match X {X.shape}")
            mem.append(MemoryFrame(mX, mv, float(m.delta)))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "memory", tuple(mem))

    @property
    def p(self):
        return self.X.shape[0]

    @property
    def n(self):
        return self.X.shape[1]

    def validate(self):
        """Check the conditions the solver relies on beyond shapes."""
        arrays = [self.X, self.y, self.S] + [a for m in self.memory for a in (m.X, m.v)]
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise StructuralError("instance contains non-finite values")
        if not np.any(self.y == 1):
            raise StructuralError("query vector y has no query (no entry equal to 1)")
        if any(m.delta < 0 for m in self.memory):
            raise ParameterError("memory weights must be nonnegative")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return {
            "p": self.p,
            "n": self.n,
            "X": self.X.ravel().tolist(),
            "y": self.y.tolist(),
            "S": self.S.ravel().tolist(),
            "memory": [{"X": m.X.ravel().tolist(), "v": m.v.tolist(), "delta": m.delta}
                       for m in self.memory],
            "params": self.params.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        p, n = int(d["p"]), int(d["n"])
        memory = tuple(
            MemoryFrame(np.reshape(np.asarray(m["X"], dtype=float), (p, n)),
                        np.asarray(m["v"], dtype=float), float(m["delta"]))
            for m in d.get("memory", [])
        )
        return cls(
            X=np.reshape(np.asarray(d["X"], dtype=float), (p, n)),
            y=np.asarray(d["y"], dtype=float),
            S=np.reshape(np.asarray(d["S"], dtype=float), (n, n)),
            memory=memory,
            params=Params.from_dict(d.get("params", {})),
        )

    def to_json(self):
        # repr-based float output round-trips doubles exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass
class SolverState:
    Z: np.ndarray
    E: np.ndarray
    U: np.ndarray
    B: np.ndarray
    A: np.ndarray
    v: np.ndarray
    w: np.ndarray
    b: float
    Y1: np.ndarray
    Y2: np.ndarray
    Y3: np.ndarray
    Y4: np.ndarray
    mu: float
    iter: int = 0

    @classmethod
    def zeros(cls, inst, mu=None):
        p, n = inst.p, inst.n
        sq = lambda: np.zeros((n, n))  # noqa: E731
        return cls(
            Z=sq(), E=np.zeros((p, n)), U=sq(), B=sq(), A=sq(),
            v=np.zeros(n), w=np.zeros(p), b=0.0,
            Y1=np.zeros((p, n)), Y2=sq(), Y3=sq(), Y4=sq(),
            mu=inst.params.mu0 if mu is None else mu,
        )

    def copy(self):
        return dataclasses.replace(
            self, **{f.name: np.array(getattr(self, f.name), copy=True)
                     for f in dataclasses.fields(self)
                     if isinstance(getattr(self, f.name), np.ndarray)}
        )


def _check_dims(state, inst):
    p, n = inst.p, inst.n
    expect = {"Z": (n, n), "E": (p, n), "U": (n, n), "B": (n, n), "A": (n, n),
              "v": (n,), "w": (p,), "Y1": (p, n), "Y2": (n, n), "Y3": (n, n), "Y4": (n, n)}
    for name, shape in expect.items():
        got = np.shape(getattr(state, name))
        if got != shape:
            raise StructuralError(f"state.{name} has shape {got}, expected {shape}")


def prediction_loss(inst, w, b, v, memory=None):
    """Current-frame plus memory linear-prediction terms."""
    memory = inst.memory if memory is None else memory
    r = inst.X.T @ w + b - v
    total = inst.params.delta * float(r @ r)
    for m in memory:
        rk = m.X.T @ w + b - m.v
        total += m.delta * float(rk @ rk)
    return total


def objective_eq4(state, inst):
    """Value of the convex surrogate objective at ``state``; constraints are not included."""
    _check_dims(state, inst)
    prm = inst.params
    Z, v = state.Z, state.v
    fit = v - inst.y
    return (
        l21_norm(state.E, axis=prm.l21_axis)
        + prm.alpha * float(np.abs(Z).sum())
        + prm.gamma * nuclear_norm(Z)
        + prm.beta1 * float(np.sum((Z - inst.S) ** 2))
        + prm.beta2 * smoothness(Z, v)
        + prediction_loss(inst, state.w, state.b, v)
        + prm.lam * float(fit @ fit)
    )


def residuals(state, inst):
    """Max-abs violations of ``X = XZ + E``, ``Z = U``, ``Z = B``, ``Z = A``."""
    _check_dims(state, inst)
    X, Z = inst.X, state.Z
    return (
        float(np.max(np.abs(X - X @ Z - state.E))),
        float(np.max(np.abs(Z - state.U))),
        float(np.max(np.abs(Z - state.B))),
        float(np.max(np.abs(Z - state.A))),
    )
