import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from patchrank.model import MemoryFrame, Params, RankingInstance, SolverState  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_instance(rng, p=5, n=6, memory=2, params=None):
    X = rng.normal(size=(p, n))
    y = np.zeros(n)
    y[rng.choice(n, size=max(1, n // 3), replace=False)] = 1.0
    S = rng.uniform(0, 1, size=(n, n))
    S = 0.5 * (S + S.T)
    np.fill_diagonal(S, 0.0)
    mem = tuple(MemoryFrame(rng.normal(size=(p, n)), rng.uniform(0, 1, n), 0.3) for _ in range(memory))
    return RankingInstance(X, y, S, mem, params or Params())


def random_state(rng, inst, mu=None):
    p, n = inst.p, inst.n
    return SolverState(
        Z=rng.normal(size=(n, n)), E=rng.normal(size=(p, n)), U=rng.normal(size=(n, n)),
        B=rng.normal(size=(n, n)), A=np.abs(rng.normal(size=(n, n))),
        v=rng.normal(size=n), w=rng.normal(size=p), b=float(rng.normal()),
        Y1=rng.normal(size=(p, n)), Y2=rng.normal(size=(n, n)), Y3=rng.normal(size=(n, n)),
        Y4=rng.normal(size=(n, n)), mu=float(rng.uniform(0.5, 3.0)) if mu is None else mu,
    )
