import numpy as np
import pytest

from potsolve.core import validate_problem


def random_problem(rng, n=None, n_lo=2, n_hi=8, cost_scale=1.0, s_frac=None):
    """A random strictly-positive instance with normalized max cost."""
    if n is None:
        n = int(rng.integers(n_lo, n_hi + 1))
    r = rng.uniform(0.1, 1.0, n)
    c = rng.uniform(0.1, 1.0, n)
    frac = rng.uniform(0.2, 0.9) if s_frac is None else s_frac
    s = frac * min(r.sum(), c.sum())
    C = rng.uniform(0.0, 1.0, (n, n))
    C *= cost_scale / C.max()
    return validate_problem(r, c, s, C)


def random_point(rng, n, scale=1.0):
    """A random nonnegative (X, p, q), generally infeasible."""
    from potsolve.core import PrimalPoint

    return PrimalPoint(
        X=rng.uniform(0.0, scale, (n, n)),
        p=rng.uniform(0.0, scale, n),
        q=rng.uniform(0.0, scale, n),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
